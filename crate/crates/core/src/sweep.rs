//! Parameter sweeps, figure presets and analysis-versus-simulation reports.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, noe};
use crate::config::{Blocking, BlockingProfile, Memory, SystemConfig};
use crate::error::{Error, Result};
use crate::model::{Scheme, SystemModel};
use crate::montecarlo::{simulate_in_current_pool, SimOptions};

/// Seed used by the presets unless overridden.
pub const DEFAULT_SEED: u64 = 20_160_101;
/// Simulated super slots per point in the presets unless overridden.
pub const DEFAULT_TRIALS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVariable {
    /// Fixed-rate release ζ of every node (mol).
    Zeta,
    /// Average transceiver release (mol) of the budget-calibrated schemes.
    Xavg,
    /// Memory q of every link (slots).
    Memory,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Zeta => "zeta",
            SweepVariable::Xavg => "xavg",
            SweepVariable::Memory => "memory",
        }
    }
}

impl std::str::FromStr for SweepVariable {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "zeta" => Ok(SweepVariable::Zeta),
            "xavg" | "x_avg" => Ok(SweepVariable::Xavg),
            "memory" | "q" => Ok(SweepVariable::Memory),
            other => Err(format!("unknown sweep variable `{other}` (expected zeta, xavg or memory)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Analysis,
    Noe,
    Simulation,
    /// Simulation with every fed-back decision forced correct.
    Genie,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Analysis => "analysis",
            Mode::Noe => "noe",
            Mode::Simulation => "simulation",
            Mode::Genie => "genie",
        }
    }

    fn simulated(self) -> bool {
        matches!(self, Mode::Simulation | Mode::Genie)
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "analysis" => Ok(Mode::Analysis),
            "noe" => Ok(Mode::Noe),
            "simulation" | "sim" => Ok(Mode::Simulation),
            "genie" => Ok(Mode::Genie),
            other => Err(format!("unknown mode `{other}` (expected analysis, noe, simulation or genie)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    pub schemes: Vec<Scheme>,
    /// `Custom` keeps the blocking of the base configuration.
    pub blockings: Vec<BlockingProfile>,
    pub modes: Vec<Mode>,
    pub trials: u64,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::field("sweep.grid", "must not be empty"));
        }
        if self.schemes.is_empty() || self.blockings.is_empty() || self.modes.is_empty() {
            return Err(Error::field("sweep", "schemes, blockings and modes must not be empty"));
        }
        if self.modes.iter().any(|m| m.simulated()) && self.trials == 0 {
            return Err(Error::field("sweep.trials", "must be positive"));
        }
        if self.variable == SweepVariable::Memory && self.grid.iter().any(|q| q.fract() != 0.0 || *q < 0.0) {
            return Err(Error::field("sweep.grid", "memory values must be non-negative integers"));
        }
        Ok(())
    }
}

/// One output line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub scheme: Scheme,
    pub blocking: String,
    pub mode: Mode,
    pub pe1: f64,
    pub pe2: f64,
    pub avg_bep: f64,
    pub stderr: Option<f64>,
    pub trials: Option<u64>,
    pub c_snc: f64,
    pub c_pnc: f64,
    pub seed: Option<u64>,
}

/// Applies one grid value and blocking profile to the base configuration.
pub fn configure(base: &SystemConfig, variable: SweepVariable, value: f64, blocking: BlockingProfile) -> Result<SystemConfig> {
    let mut cfg = base.clone();
    if blocking != BlockingProfile::Custom {
        cfg.blocking = Blocking::preset(blocking);
    }
    match variable {
        SweepVariable::Zeta => {
            cfg.release.zeta_t = [value; 2];
            cfg.release.zeta_r = value;
        }
        SweepVariable::Xavg => {
            cfg.release.x_avg = Some(value);
            cfg.release.zeta_r = 2.0 * value;
        }
        SweepVariable::Memory => {
            cfg = cfg.with_memory(Memory::uniform(value as usize))?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn evaluate(model: &SystemModel, scheme: Scheme, mode: Mode, spec: &SweepSpec) -> Result<SweepRow> {
    let (pe, stderr, trials, seed) = match mode {
        Mode::Analysis => (analyze(model, scheme)?.pe, None, None, None),
        Mode::Noe => (noe(model, scheme)?, None, None, None),
        Mode::Simulation | Mode::Genie => {
            let mut opts = SimOptions::new(spec.trials, spec.seed);
            opts.genie = mode == Mode::Genie;
            let r = simulate_in_current_pool(model, scheme, &opts)?;
            (r.pe, Some(r.avg_stderr), Some(r.trials), Some(spec.seed))
        }
    };
    Ok(SweepRow {
        value: 0.0,
        scheme,
        blocking: String::new(),
        mode,
        pe1: pe[0],
        pe2: pe[1],
        avg_bep: 0.5 * (pe[0] + pe[1]),
        stderr,
        trials,
        c_snc: model.budgets.c_snc,
        c_pnc: model.budgets.c_pnc,
        seed,
    })
}

/// Evaluates every (value, blocking, scheme, mode) combination in that
/// nesting order, using `workers` threads.
pub fn run_sweep(spec: &SweepSpec, base: &SystemConfig, workers: usize) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut jobs = Vec::new();
    for &value in &spec.grid {
        for &blocking in &spec.blockings {
            for &scheme in &spec.schemes {
                for &mode in &spec.modes {
                    jobs.push((value, blocking, scheme, mode));
                }
            }
        }
    }
    let run = |(value, blocking, scheme, mode): (f64, BlockingProfile, Scheme, Mode)| -> Result<SweepRow> {
        let point = format!(
            "{}={value:e}, blocking={}, scheme={scheme}, mode={}",
            spec.variable.name(),
            blocking.name(),
            mode.name()
        );
        let wrap = |e: Error| Error::SweepPoint {
            point: point.clone(),
            source: Box::new(e),
        };
        let cfg = configure(base, spec.variable, value, blocking).map_err(wrap)?;
        let model = SystemModel::new(cfg).map_err(wrap)?;
        let mut row = evaluate(&model, scheme, mode, spec).map_err(wrap)?;
        row.value = value;
        row.blocking = blocking.name().to_string();
        Ok(row)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?;
    pool.install(|| jobs.into_par_iter().map(run).collect())
}

pub fn write_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn geometric(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let step = (hi / lo).ln() / (points - 1) as f64;
    (0..points).map(|k| lo * (step * k as f64).exp()).collect()
}

/// Fixed-rate signalling without memory, all blocking profiles.
pub fn fig3(trials: u64, seed: u64) -> (SweepSpec, SystemConfig) {
    let spec = SweepSpec {
        variable: SweepVariable::Zeta,
        grid: geometric(1e-18, 1e-15, 6),
        schemes: Scheme::ALL.to_vec(),
        blockings: BlockingProfile::presets().to_vec(),
        modes: vec![Mode::Analysis, Mode::Simulation],
        trials,
        seed,
    };
    (spec, SystemConfig::reference(BlockingProfile::Low))
}

/// Budget-calibrated schemes with memory 3 on every link.
pub fn fig4(trials: u64, seed: u64) -> Result<(SweepSpec, SystemConfig)> {
    let spec = SweepSpec {
        variable: SweepVariable::Xavg,
        grid: geometric(1e-18, 1e-16, 5),
        schemes: Scheme::ALL.to_vec(),
        blockings: vec![BlockingProfile::Low],
        modes: vec![Mode::Analysis, Mode::Noe, Mode::Simulation],
        trials,
        seed,
    };
    let cfg = SystemConfig::reference(BlockingProfile::Low).with_memory(Memory::uniform(3))?;
    Ok((spec, cfg))
}

/// Error against memory at a fixed average release.
pub fn fig5(trials: u64, seed: u64) -> (SweepSpec, SystemConfig) {
    let spec = SweepSpec {
        variable: SweepVariable::Memory,
        grid: vec![1.0, 3.0, 5.0, 7.0],
        schemes: Scheme::ALL.to_vec(),
        blockings: vec![BlockingProfile::Low],
        modes: vec![Mode::Simulation],
        trials,
        seed,
    };
    let mut cfg = SystemConfig::reference(BlockingProfile::Low);
    cfg.release.x_avg = Some(1e-22);
    cfg.release.zeta_r = 2e-22;
    (spec, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointComparison {
    pub value: f64,
    pub blocking: String,
    pub scheme: Scheme,
    pub analysis: f64,
    pub simulation: f64,
    pub stderr: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceCheck {
    pub value: f64,
    pub blocking: String,
    pub mode: Mode,
    pub pnc: f64,
    pub snc: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoeViolation {
    pub value: f64,
    pub blocking: String,
    pub scheme: Scheme,
    pub noe: f64,
    pub simulation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub points: Vec<PointComparison>,
    pub max_abs_z: f64,
    pub dominance: Vec<DominanceCheck>,
    pub noe_violations: Vec<NoeViolation>,
}

impl ComparisonReport {
    pub fn passes(&self, z_limit: f64) -> bool {
        self.max_abs_z <= z_limit && self.dominance.iter().all(|d| d.holds) && self.noe_violations.is_empty()
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>12} {:>8} {:>6} {:>12} {:>12} {:>10} {:>7}",
            "value", "blocking", "scheme", "analysis", "simulation", "stderr", "z"
        );
        for p in &self.points {
            let _ = writeln!(
                s,
                "{:>12.4e} {:>8} {:>6} {:>12.4e} {:>12.4e} {:>10.2e} {:>7.2}",
                p.value, p.blocking, p.scheme, p.analysis, p.simulation, p.stderr, p.z
            );
        }
        let _ = writeln!(s, "max |z| = {:.3}", self.max_abs_z);
        let failed = self.dominance.iter().filter(|d| !d.holds).count();
        let _ = writeln!(s, "pnc <= snc: {} of {} checks hold", self.dominance.len() - failed, self.dominance.len());
        let _ = writeln!(s, "noe above simulation: {} points", self.noe_violations.len());
        s
    }
}

fn z_score(analysis: f64, simulation: f64, stderr: f64) -> f64 {
    let diff = simulation - analysis;
    if diff == 0.0 {
        0.0
    } else if stderr > 0.0 {
        diff / stderr
    } else {
        f64::INFINITY.copysign(diff)
    }
}

pub fn compare_report(rows: &[SweepRow]) -> Result<ComparisonReport> {
    let key = |r: &SweepRow| (r.value.to_bits(), r.blocking.clone(), r.scheme);
    let find = |mode: Mode, k: &(u64, String, Scheme)| rows.iter().find(|r| r.mode == mode && key(r) == *k);

    let mut points = Vec::new();
    let mut noe_violations = Vec::new();
    for a in rows.iter().filter(|r| r.mode == Mode::Analysis) {
        let sim = find(Mode::Simulation, &key(a)).ok_or_else(|| {
            Error::Comparison(format!(
                "no simulation row for value {:e}, blocking {}, scheme {}",
                a.value, a.blocking, a.scheme
            ))
        })?;
        let stderr = sim.stderr.unwrap_or(0.0);
        points.push(PointComparison {
            value: a.value,
            blocking: a.blocking.clone(),
            scheme: a.scheme,
            analysis: a.avg_bep,
            simulation: sim.avg_bep,
            stderr,
            z: z_score(a.avg_bep, sim.avg_bep, stderr),
        });
    }
    for n in rows.iter().filter(|r| r.mode == Mode::Noe) {
        if let Some(sim) = find(Mode::Simulation, &key(n)) {
            if n.avg_bep > sim.avg_bep {
                noe_violations.push(NoeViolation {
                    value: n.value,
                    blocking: n.blocking.clone(),
                    scheme: n.scheme,
                    noe: n.avg_bep,
                    simulation: sim.avg_bep,
                });
            }
        }
    }
    if points.is_empty() && noe_violations.is_empty() && !rows.iter().any(|r| r.mode == Mode::Simulation) {
        return Err(Error::Comparison("no simulation rows to compare against".into()));
    }

    let mut dominance = Vec::new();
    for p in rows.iter().filter(|r| r.scheme == Scheme::Pnc) {
        if let Some(s) = rows
            .iter()
            .find(|r| r.scheme == Scheme::Snc && r.mode == p.mode && r.value.to_bits() == p.value.to_bits() && r.blocking == p.blocking)
        {
            dominance.push(DominanceCheck {
                value: p.value,
                blocking: p.blocking.clone(),
                mode: p.mode,
                pnc: p.avg_bep,
                snc: s.avg_bep,
                holds: p.avg_bep <= s.avg_bep,
            });
        }
    }
    let max_abs_z = points.iter().map(|p| p.z.abs()).fold(0.0, f64::max);
    Ok(ComparisonReport {
        points,
        max_abs_z,
        dominance,
        noe_violations,
    })
}
