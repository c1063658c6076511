//! System parameters, the on-disk document schema and validation.
//!
//! Internally everything is SI-ish: seconds, meters, mol for released
//! amounts and mol/L for concentrations. Kinetic rates are stored per
//! second; the document may declare them per minute (the default, which
//! is how the reference parameter table is written).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{self, Link};
use crate::error::{Error, Result};

/// Release amount (mol) times a channel gain (m⁻³), expressed in mol/L.
pub fn unit_convert(release: f64, gain: f64) -> f64 {
    release * gain / 1000.0
}

/// Release (mol) that produces `concentration` (mol/L) through `gain` (m⁻³).
pub fn release_for(concentration: f64, gain: f64) -> f64 {
    concentration * 1000.0 / gain
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateUnit {
    Minute,
    Second,
}

impl RateUnit {
    fn per_second(self, value: f64) -> f64 {
        match self {
            RateUnit::Minute => value / 60.0,
            RateUnit::Second => value,
        }
    }
}

/// Association (per molar per second) and dissociation (per second) rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub association: f64,
    pub dissociation: f64,
}

impl Rates {
    /// Dissociation constant κ = η/γ in mol/L.
    pub fn kappa(&self) -> f64 {
        self.dissociation / self.association
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockingProfile {
    None,
    Low,
    High,
    Custom,
}

impl BlockingProfile {
    pub fn name(self) -> &'static str {
        match self {
            BlockingProfile::None => "none",
            BlockingProfile::Low => "low",
            BlockingProfile::High => "high",
            BlockingProfile::Custom => "custom",
        }
    }

    pub fn presets() -> [BlockingProfile; 3] {
        [BlockingProfile::None, BlockingProfile::Low, BlockingProfile::High]
    }

    /// Rates of the reference table, per second. `None` has no blocking.
    fn preset_rates(self) -> Option<Rates> {
        let per_min = |gamma: f64, eta: f64| Rates {
            association: gamma / 60.0,
            dissociation: eta / 60.0,
        };
        match self {
            BlockingProfile::Low => Some(per_min(3e5, 0.1)),
            BlockingProfile::High => Some(per_min(5e5, 0.01)),
            BlockingProfile::None | BlockingProfile::Custom => None,
        }
    }
}

impl std::str::FromStr for BlockingProfile {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(BlockingProfile::None),
            "low" => Ok(BlockingProfile::Low),
            "high" => Ok(BlockingProfile::High),
            "custom" => Ok(BlockingProfile::Custom),
            other => Err(other.to_string()),
        }
    }
}

/// Blocking of relay receptor group `i` by the other transceiver's molecule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blocking {
    pub profile: BlockingProfile,
    /// `[group 1 blocked by M2, group 2 blocked by M1]`; `None` means no blocking.
    pub rates: [Option<Rates>; 2],
}

impl Blocking {
    pub fn preset(profile: BlockingProfile) -> Self {
        let r = profile.preset_rates();
        Blocking {
            profile,
            rates: [r, r],
        }
    }

    /// κ_{D,i}^{Block,ī} for relay group `i` (0-based), if blocking is present.
    pub fn kappa(&self, group: usize) -> Option<f64> {
        self.rates[group].map(|r| r.kappa())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Release {
    /// ζ^{T1}, ζ^{T2} in mol (fixed-rate OOK budgets).
    pub zeta_t: [f64; 2],
    /// ζ^R in mol.
    pub zeta_r: f64,
    /// Target relay-side concentrations (mol/L) of the rate-adaptive schemes.
    pub c_snc: Option<f64>,
    pub c_pnc: Option<f64>,
    /// Average release per transceiver (mol); when set, c_snc and c_pnc are
    /// calibrated so that both schemes spend it on average.
    pub x_avg: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Memory {
    /// q^{T1R}, q^{T2R} in slots.
    pub to_relay: [usize; 2],
    /// q^{RT1}, q^{RT2} in slots.
    pub from_relay: [usize; 2],
}

impl Memory {
    pub fn uniform(q: usize) -> Self {
        Memory {
            to_relay: [q, q],
            from_relay: [q, q],
        }
    }

    pub fn max(&self) -> usize {
        self.to_relay
            .iter()
            .chain(self.from_relay.iter())
            .copied()
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub t0: f64,
    pub ts: f64,
    /// Normalized gain of the first truncated tap used when ts is derived.
    pub target_nu: f64,
}

pub const DEFAULT_TARGET_NU: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// D1, D2, D3 in m²/s.
    pub diffusion: [f64; 3],
    /// d1, d2 in m.
    pub distance: [f64; 2],
    /// n_1^R, n_2^R.
    pub relay_receptors: [u32; 2],
    /// n_3^{T1}, n_3^{T2}.
    pub transceiver_receptors: [u32; 2],
    /// Receptor kinetics for M1, M2, M3 (per second).
    pub kinetics: [Rates; 3],
    pub blocking: Blocking,
    pub release: Release,
    pub memory: Memory,
    pub timing: Timing,
}

impl SystemConfig {
    /// The reference parameter set with the given blocking profile, no ISI
    /// and 1e-16 mol releases.
    pub fn reference(profile: BlockingProfile) -> Self {
        let per_min = Rates {
            association: 4e5 / 60.0,
            dissociation: 0.1 / 60.0,
        };
        let mut cfg = SystemConfig {
            diffusion: [1e-9; 3],
            distance: [100e-6; 2],
            relay_receptors: [250, 250],
            transceiver_receptors: [500, 500],
            kinetics: [per_min; 3],
            blocking: Blocking::preset(profile),
            release: Release {
                zeta_t: [1e-16; 2],
                zeta_r: 1e-16,
                c_snc: None,
                c_pnc: None,
                x_avg: None,
            },
            memory: Memory::uniform(0),
            timing: Timing {
                t0: 0.0,
                ts: 0.0,
                target_nu: DEFAULT_TARGET_NU,
            },
        };
        cfg.resolve_timing(None, None)
            .expect("reference geometry always admits a slot duration");
        cfg
    }

    /// κ_{D,i} = η_i/γ_i for molecule type `m` (0-based: M1, M2, M3).
    pub fn kappa(&self, m: usize) -> f64 {
        self.kinetics[m].kappa()
    }

    /// Recomputes t0 and ts from the geometry unless explicit values are given.
    pub fn resolve_timing(&mut self, t0: Option<f64>, ts: Option<f64>) -> Result<()> {
        self.timing.t0 = match t0 {
            Some(t) => t,
            None => channel::choose_t0(self),
        };
        self.timing.ts = match ts {
            Some(t) => t,
            None if self.memory.max() == 0 => self.timing.t0,
            None => channel::choose_ts_for_memory(self, self.memory.max(), self.timing.target_nu)?,
        };
        Ok(())
    }

    /// Sets all four link memories and re-derives ts.
    pub fn with_memory(mut self, memory: Memory) -> Result<Self> {
        self.memory = memory;
        self.resolve_timing(Some(self.timing.t0), None)?;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::field(field, format!("must be finite and strictly positive, got {v}")))
            }
        };
        for (i, d) in self.diffusion.iter().enumerate() {
            positive(&format!("channel.diffusion[{i}]"), *d)?;
        }
        positive("channel.d1", self.distance[0])?;
        positive("channel.d2", self.distance[1])?;
        let counts = [
            ("receptors.n1_r", self.relay_receptors[0]),
            ("receptors.n2_r", self.relay_receptors[1]),
            ("receptors.n3_t1", self.transceiver_receptors[0]),
            ("receptors.n3_t2", self.transceiver_receptors[1]),
        ];
        for (field, n) in counts {
            if n == 0 {
                return Err(Error::field(field, "receptor count must be at least 1"));
            }
        }
        for (i, r) in self.kinetics.iter().enumerate() {
            positive(&format!("kinetics.gamma[{i}]"), r.association)?;
            positive(&format!("kinetics.eta[{i}]"), r.dissociation)?;
        }
        for (i, r) in self.blocking.rates.iter().enumerate() {
            if let Some(r) = r {
                let name = if i == 0 { "m1_by_m2" } else { "m2_by_m1" };
                positive(&format!("kinetics.blocking.{name}.gamma"), r.association)?;
                positive(&format!("kinetics.blocking.{name}.eta"), r.dissociation)?;
            }
        }
        let nonneg = |field: &str, v: f64| -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::field(field, format!("must be finite and non-negative, got {v}")))
            }
        };
        nonneg("release.zeta_t1", self.release.zeta_t[0])?;
        nonneg("release.zeta_t2", self.release.zeta_t[1])?;
        nonneg("release.zeta_r", self.release.zeta_r)?;
        if let Some(c) = self.release.c_snc {
            nonneg("release.c_snc", c)?;
        }
        if let Some(c) = self.release.c_pnc {
            nonneg("release.c_pnc", c)?;
        }
        if let Some(x) = self.release.x_avg {
            nonneg("release.x_avg", x)?;
        }
        positive("timing.t0", self.timing.t0)?;
        positive("timing.ts", self.timing.ts)?;
        if !(self.timing.target_nu > 0.0 && self.timing.target_nu < 1.0) {
            return Err(Error::field("timing.target_nu", "must lie in (0, 1)"));
        }
        if self.timing.t0 > self.timing.ts {
            return Err(Error::field(
                "timing.t0",
                format!("t0 = {} exceeds ts = {}", self.timing.t0, self.timing.ts),
            ));
        }
        self.check_stability()
    }

    /// Rejects gain sets for which the rate-adaptive recursions diverge.
    fn check_stability(&self) -> Result<()> {
        let sums: Vec<f64> = [Link::T1R, Link::T2R]
            .iter()
            .map(|&link| {
                channel::link_gains(self, link, link.memory(self))
                    .odd_nus()
                    .iter()
                    .sum()
            })
            .collect();
        for (i, s) in sums.iter().enumerate() {
            if *s >= 1.0 {
                return Err(Error::Unstable(format!(
                    "sum of odd normalized gains on T{}->R is {s:.4} >= 1",
                    i + 1
                )));
            }
        }
        let cross = sums[0] * sums[1];
        if cross >= 1.0 {
            return Err(Error::Unstable(format!("cross gain product {cross:.4} >= 1")));
        }
        Ok(())
    }

    pub fn to_document(&self) -> ConfigDocument {
        let rates = |r: &Rates| (r.association, r.dissociation);
        let blocking = match self.blocking.profile {
            BlockingProfile::Custom => {
                let doc = |r: Option<Rates>| {
                    r.map(|r| RatesDoc {
                        gamma: r.association,
                        eta: r.dissociation,
                    })
                };
                BlockingDoc::Custom {
                    m1_by_m2: doc(self.blocking.rates[0]),
                    m2_by_m1: doc(self.blocking.rates[1]),
                }
            }
            p => BlockingDoc::Preset(p.name().to_string()),
        };
        ConfigDocument {
            channel: ChannelDoc {
                diffusion: self.diffusion,
                d1: self.distance[0],
                d2: self.distance[1],
            },
            receptors: ReceptorsDoc {
                n1_r: self.relay_receptors[0],
                n2_r: self.relay_receptors[1],
                n3_t1: self.transceiver_receptors[0],
                n3_t2: self.transceiver_receptors[1],
            },
            kinetics: KineticsDoc {
                rate_unit: Some(RateUnit::Second),
                gamma: self.kinetics.map(|r| rates(&r).0),
                eta: self.kinetics.map(|r| rates(&r).1),
                blocking,
            },
            release: ReleaseDoc {
                zeta_t1: self.release.zeta_t[0],
                zeta_t2: self.release.zeta_t[1],
                zeta_r: self.release.zeta_r,
                c_snc: self.release.c_snc,
                c_pnc: self.release.c_pnc,
                x_avg: self.release.x_avg,
            },
            memory: Some(MemoryDoc {
                q_t1r: self.memory.to_relay[0],
                q_t2r: self.memory.to_relay[1],
                q_rt1: self.memory.from_relay[0],
                q_rt2: self.memory.from_relay[1],
            }),
            timing: Some(TimingDoc {
                t0: Some(self.timing.t0),
                ts: Some(self.timing.ts),
                target_nu: Some(self.timing.target_nu),
            }),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(&self.to_document()).expect("config document is always serializable")
    }
}

// ---------------------------------------------------------------------------
// Document schema

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub channel: ChannelDoc,
    pub receptors: ReceptorsDoc,
    pub kinetics: KineticsDoc,
    pub release: ReleaseDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<MemoryDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDoc {
    /// D1, D2, D3 (m²/s).
    pub diffusion: [f64; 3],
    pub d1: f64,
    pub d2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceptorsDoc {
    pub n1_r: u32,
    pub n2_r: u32,
    pub n3_t1: u32,
    pub n3_t2: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticsDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_unit: Option<RateUnit>,
    pub gamma: [f64; 3],
    pub eta: [f64; 3],
    pub blocking: BlockingDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BlockingDoc {
    Preset(String),
    Custom {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m1_by_m2: Option<RatesDoc>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m2_by_m1: Option<RatesDoc>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesDoc {
    pub gamma: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReleaseDoc {
    pub zeta_t1: f64,
    pub zeta_t2: f64,
    pub zeta_r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_snc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_pnc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_avg: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryDoc {
    pub q_t1r: usize,
    pub q_t2r: usize,
    pub q_rt1: usize,
    pub q_rt2: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ts: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_nu: Option<f64>,
}

impl ConfigDocument {
    pub fn into_config(self) -> Result<SystemConfig> {
        let unit = self.kinetics.rate_unit.unwrap_or(RateUnit::Minute);
        let mut kinetics = [Rates {
            association: 0.0,
            dissociation: 0.0,
        }; 3];
        for (i, k) in kinetics.iter_mut().enumerate() {
            k.association = unit.per_second(self.kinetics.gamma[i]);
            k.dissociation = unit.per_second(self.kinetics.eta[i]);
        }
        let blocking = match self.kinetics.blocking {
            BlockingDoc::Preset(name) => {
                let profile: BlockingProfile = name.parse().map_err(|name| Error::UnknownBlocking {
                    field: "kinetics.blocking".into(),
                    name,
                })?;
                Blocking::preset(profile)
            }
            BlockingDoc::Custom { m1_by_m2, m2_by_m1 } => {
                let conv = |r: Option<RatesDoc>| {
                    r.map(|r| Rates {
                        association: unit.per_second(r.gamma),
                        dissociation: unit.per_second(r.eta),
                    })
                };
                Blocking {
                    profile: BlockingProfile::Custom,
                    rates: [conv(m1_by_m2), conv(m2_by_m1)],
                }
            }
        };
        let memory = self
            .memory
            .map(|m| Memory {
                to_relay: [m.q_t1r, m.q_t2r],
                from_relay: [m.q_rt1, m.q_rt2],
            })
            .unwrap_or(Memory::uniform(0));
        let timing = self.timing.unwrap_or(TimingDoc {
            t0: None,
            ts: None,
            target_nu: None,
        });
        let mut cfg = SystemConfig {
            diffusion: self.channel.diffusion,
            distance: [self.channel.d1, self.channel.d2],
            relay_receptors: [self.receptors.n1_r, self.receptors.n2_r],
            transceiver_receptors: [self.receptors.n3_t1, self.receptors.n3_t2],
            kinetics,
            blocking,
            release: Release {
                zeta_t: [self.release.zeta_t1, self.release.zeta_t2],
                zeta_r: self.release.zeta_r,
                c_snc: self.release.c_snc,
                c_pnc: self.release.c_pnc,
                x_avg: self.release.x_avg,
            },
            memory,
            timing: Timing {
                t0: 0.0,
                ts: 0.0,
                target_nu: timing.target_nu.unwrap_or(DEFAULT_TARGET_NU),
            },
        };
        // geometry has to be sane before the channel is sampled to derive timing
        cfg.timing.t0 = 1.0;
        cfg.timing.ts = 1.0;
        cfg.validate_geometry()?;
        if !(cfg.timing.target_nu > 0.0 && cfg.timing.target_nu < 1.0) {
            return Err(Error::field("timing.target_nu", "must lie in (0, 1)"));
        }
        cfg.resolve_timing(timing.t0, timing.ts)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl SystemConfig {
    fn validate_geometry(&self) -> Result<()> {
        for (i, d) in self.diffusion.iter().enumerate() {
            if !(d.is_finite() && *d > 0.0) {
                return Err(Error::field(
                    format!("channel.diffusion[{i}]"),
                    format!("must be finite and strictly positive, got {d}"),
                ));
            }
        }
        for (name, d) in [("channel.d1", self.distance[0]), ("channel.d2", self.distance[1])] {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::field(name, format!("must be finite and strictly positive, got {d}")));
            }
        }
        Ok(())
    }
}

/// Parses and validates a TOML config document.
pub fn load_config(source: &str) -> Result<SystemConfig> {
    load_config_with_overrides(source, &[])
}

/// Like [`load_config`], applying `path=value` overrides (dotted paths into
/// the document, e.g. `release.zeta_r=2e-16`) before validation.
pub fn load_config_with_overrides(source: &str, overrides: &[String]) -> Result<SystemConfig> {
    let mut value: toml::Value = toml::from_str(source).map_err(|e| Error::Parse(e.to_string()))?;
    for ov in overrides {
        apply_override(&mut value, ov)?;
    }
    let doc: ConfigDocument = value.try_into().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    doc.into_config()
}

pub fn load_config_file(path: &Path, overrides: &[String]) -> Result<SystemConfig> {
    let source = std::fs::read_to_string(path)?;
    load_config_with_overrides(&source, overrides)
}

fn apply_override(doc: &mut toml::Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("override `{assignment}` is not of the form path=value")))?;
    let path = path.trim();
    let raw = raw.trim();
    // parse the right-hand side as a TOML value; bare words become strings
    let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut cursor = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (depth, part) in parts.iter().enumerate() {
        let table = cursor
            .as_table_mut()
            .ok_or_else(|| Error::field(path, "path does not point into a table"))?;
        if depth + 1 == parts.len() {
            table.insert((*part).to_string(), parsed);
            return Ok(());
        }
        cursor = table
            .entry((*part).to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    Err(Error::field(path, "empty override path"))
}
