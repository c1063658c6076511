//! A validated configuration together with everything derived from it.

use serde::{Deserialize, Serialize};

use crate::channel::{link_gains, Link, LinkGains};
use crate::coding::{self, Budgets};
use crate::config::{unit_convert, SystemConfig};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Pnc,
    Snc,
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::Pnc, Scheme::Snc];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Pnc => "pnc",
            Scheme::Snc => "snc",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pnc" => Ok(Scheme::Pnc),
            "snc" => Ok(Scheme::Snc),
            other => Err(format!("unknown scheme `{other}` (expected pnc or snc)")),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct SystemModel {
    pub cfg: SystemConfig,
    /// T1→R, T2→R.
    pub to_relay: [LinkGains; 2],
    /// R→T1, R→T2.
    pub from_relay: [LinkGains; 2],
    /// Relay-side targets of the rate-adaptive releases.
    pub budgets: Budgets,
}

impl SystemModel {
    pub fn new(cfg: SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let gains = |link: Link| link_gains(&cfg, link, link.memory(&cfg));
        let to_relay = [gains(Link::T1R), gains(Link::T2R)];
        let from_relay = [gains(Link::RT1), gains(Link::RT2)];
        // without an explicit average, spend what fixed-rate signalling would
        let x_avg = cfg
            .release
            .x_avg
            .unwrap_or((cfg.release.zeta_t[0] + cfg.release.zeta_t[1]) / 4.0);
        let calibrated = coding::calibrate_budgets(x_avg, [&to_relay[0], &to_relay[1]]);
        let budgets = Budgets {
            c_snc: cfg.release.c_snc.unwrap_or(calibrated.c_snc),
            c_pnc: cfg.release.c_pnc.unwrap_or(calibrated.c_pnc),
        };
        Ok(SystemModel {
            cfg,
            to_relay,
            from_relay,
            budgets,
        })
    }

    /// Whether transceivers run the rate-adaptive releases (some link has memory).
    pub fn adaptive(&self) -> bool {
        self.cfg.memory.max() > 0
    }

    /// Super-slot memory of each transceiver→relay link.
    pub fn uplink_depth(&self) -> [usize; 2] {
        [self.to_relay[0].super_memory(), self.to_relay[1].super_memory()]
    }

    /// Super-slot memory of each relay→transceiver link.
    pub fn downlink_depth(&self) -> [usize; 2] {
        [self.from_relay[0].super_memory(), self.from_relay[1].super_memory()]
    }

    pub fn target(&self, scheme: Scheme) -> f64 {
        match scheme {
            Scheme::Pnc => self.budgets.c_pnc,
            Scheme::Snc => self.budgets.c_snc,
        }
    }

    /// Relay-side concentration of transceiver `i`'s molecule when it signals 1
    /// in an otherwise empty medium.
    pub fn signal_concentration(&self, scheme: Scheme, i: usize) -> f64 {
        if self.adaptive() {
            self.target(scheme)
        } else {
            unit_convert(self.cfg.release.zeta_t[i], self.to_relay[i].peak())
        }
    }

    /// Largest release transceiver `i` can ever make.
    pub fn x_max(&self, scheme: Scheme, i: usize) -> f64 {
        if !self.adaptive() {
            return self.cfg.release.zeta_t[i];
        }
        match scheme {
            Scheme::Snc => coding::snc_x_max(&self.to_relay[i], self.budgets.c_snc),
            Scheme::Pnc => coding::pnc_x_max(&self.to_relay[i], &self.to_relay[1 - i], self.budgets.c_pnc),
        }
    }

    /// Closed-form long-run mean release of transceiver `i`.
    pub fn mean_release(&self, scheme: Scheme, i: usize) -> f64 {
        if !self.adaptive() {
            return self.cfg.release.zeta_t[i] / 2.0;
        }
        match scheme {
            Scheme::Snc => coding::snc_mean_release(&self.to_relay[i], self.budgets.c_snc),
            Scheme::Pnc => coding::pnc_mean_release(&self.to_relay[i], &self.to_relay[1 - i], self.budgets.c_pnc),
        }
    }

    /// κ of relay receptor group `i`.
    pub fn relay_kappa(&self, i: usize) -> f64 {
        self.cfg.kappa(i)
    }

    /// κ of the M3 receptors at the transceivers.
    pub fn transceiver_kappa(&self) -> f64 {
        self.cfg.kappa(2)
    }

    /// Concentration at transceiver `i` contributed by a relay release `lag`
    /// super slots ago (0 = current).
    pub fn relay_arrival(&self, i: usize, lag: usize) -> f64 {
        unit_convert(self.cfg.release.zeta_r, self.from_relay[i].pi(2 * lag + 1))
    }
}
