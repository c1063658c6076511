//! Deterministic diffusion channel: impulse response, sampled gains and slot timing.

use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// Concentration (m⁻³) at distance `r` and time `t` after releasing one unit
/// into an unbounded medium with diffusion coefficient `d`.
pub fn impulse_response(r: f64, t: f64, d: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let spread = 4.0 * std::f64::consts::PI * d * t;
    spread.powf(-1.5) * (-r * r / (4.0 * d * t)).exp()
}

/// Time at which the impulse response at distance `r` peaks.
pub fn peak_time(r: f64, d: f64) -> f64 {
    r * r / (6.0 * d)
}

/// Latest peak time over the four links, so that every link is sampled on
/// the decreasing side of its response.
pub fn choose_t0(cfg: &SystemConfig) -> f64 {
    Link::ALL
        .iter()
        .map(|l| {
            let (r, d) = l.geometry(cfg);
            peak_time(r, d)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Link {
    T1R,
    T2R,
    RT1,
    RT2,
}

impl Link {
    pub const ALL: [Link; 4] = [Link::T1R, Link::T2R, Link::RT1, Link::RT2];

    pub fn to_relay(i: usize) -> Link {
        [Link::T1R, Link::T2R][i]
    }

    pub fn from_relay(i: usize) -> Link {
        [Link::RT1, Link::RT2][i]
    }

    /// (distance, diffusion coefficient) of the link.
    pub fn geometry(self, cfg: &SystemConfig) -> (f64, f64) {
        match self {
            Link::T1R => (cfg.distance[0], cfg.diffusion[0]),
            Link::T2R => (cfg.distance[1], cfg.diffusion[1]),
            Link::RT1 => (cfg.distance[0], cfg.diffusion[2]),
            Link::RT2 => (cfg.distance[1], cfg.diffusion[2]),
        }
    }

    pub fn memory(self, cfg: &SystemConfig) -> usize {
        match self {
            Link::T1R => cfg.memory.to_relay[0],
            Link::T2R => cfg.memory.to_relay[1],
            Link::RT1 => cfg.memory.from_relay[0],
            Link::RT2 => cfg.memory.from_relay[1],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Link::T1R => "T1->R",
            Link::T2R => "T2->R",
            Link::RT1 => "R->T1",
            Link::RT2 => "R->T2",
        }
    }
}

/// Sampled gains of one directed link, truncated after `memory + 1` taps.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGains {
    pub link: Link,
    pub memory: usize,
    /// π_1..π_{q+1} in m⁻³.
    pub pis: Vec<f64>,
    /// ν_2..ν_{q+1}.
    pub nus: Vec<f64>,
}

impl LinkGains {
    /// π_l (1-based); zero past the memory.
    pub fn pi(&self, l: usize) -> f64 {
        assert!(l >= 1, "gain index is 1-based");
        self.pis.get(l - 1).copied().unwrap_or(0.0)
    }

    /// ν_l (1-based, ν_1 = 1); zero past the memory.
    pub fn nu(&self, l: usize) -> f64 {
        assert!(l >= 1, "gain index is 1-based");
        if l == 1 {
            1.0
        } else {
            self.nus.get(l - 2).copied().unwrap_or(0.0)
        }
    }

    pub fn peak(&self) -> f64 {
        self.pis[0]
    }

    /// Number of earlier super slots that still leak into the current one.
    pub fn super_memory(&self) -> usize {
        self.memory / 2
    }

    /// ν_3, ν_5, … ν_{2Q+1}: the taps that hit the same phase one, two, …
    /// super slots later.
    pub fn odd_nus(&self) -> Vec<f64> {
        (1..=self.super_memory()).map(|l| self.nu(2 * l + 1)).collect()
    }

    /// π_3, π_5, … π_{2Q+1}.
    pub fn odd_pis(&self) -> Vec<f64> {
        (1..=self.super_memory()).map(|l| self.pi(2 * l + 1)).collect()
    }
}

pub fn link_gains(cfg: &SystemConfig, link: Link, memory: usize) -> LinkGains {
    let (r, d) = link.geometry(cfg);
    let pis: Vec<f64> = (0..=memory)
        .map(|l| impulse_response(r, cfg.timing.t0 + l as f64 * cfg.timing.ts, d))
        .collect();
    let nus = pis[1..].iter().map(|p| p / pis[0]).collect();
    LinkGains {
        link,
        memory,
        pis,
        nus,
    }
}

/// ν_{q+2} on `link` for a candidate slot duration.
fn first_dropped_nu(cfg: &SystemConfig, link: Link, t0: f64, ts: f64, q: usize) -> f64 {
    let (r, d) = link.geometry(cfg);
    impulse_response(r, t0 + (q + 1) as f64 * ts, d) / impulse_response(r, t0, d)
}

fn worst_dropped_nu(cfg: &SystemConfig, t0: f64, ts: f64, q: usize) -> f64 {
    Link::ALL
        .iter()
        .map(|&l| first_dropped_nu(cfg, l, t0, ts, q))
        .fold(0.0, f64::max)
}

/// Slot duration at which the largest first-truncated normalized gain
/// ν_{q+2} over the four links equals `target_nu`.
pub fn choose_ts_for_memory(cfg: &SystemConfig, q: usize, target_nu: f64) -> Result<f64> {
    if !(target_nu > 0.0 && target_nu < 1.0) {
        return Err(Error::field("timing.target_nu", "must lie in (0, 1)"));
    }
    let t0 = cfg.timing.t0;
    let f = |ts: f64| worst_dropped_nu(cfg, t0, ts, q) - target_nu;

    let mut lo = t0 * 1e-6;
    let mut hi = t0.max(1e-12);
    let mut steps = 0;
    while f(lo) <= 0.0 {
        lo *= 0.5;
        steps += 1;
        if steps > 200 || lo == 0.0 {
            return Err(Error::NoBracket { target: target_nu });
        }
    }
    steps = 0;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        steps += 1;
        if steps > 200 || !hi.is_finite() {
            return Err(Error::NoBracket { target: target_nu });
        }
    }
    while (hi - lo) > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{BlockingProfile, Memory, SystemConfig};
    use proptest::prelude::*;

    const R: f64 = 100e-6;
    const D: f64 = 1e-9;

    #[test]
    fn zero_time_is_zero() {
        assert_eq!(impulse_response(R, 0.0, D), 0.0);
        assert_eq!(impulse_response(R, -1.0, D), 0.0);
    }

    #[test]
    fn peak_value() {
        // closed form at the peak: (4πD t*)^(-3/2) e^(-3/2), t* = r²/(6D)
        let t = peak_time(R, D);
        let expected = (4.0 * std::f64::consts::PI * D * t).powf(-1.5) * (-1.5f64).exp();
        let got = impulse_response(R, t, D);
        assert!((got - expected).abs() / expected < 1e-14);
        assert!((got - 7.36e10).abs() / 7.36e10 < 2e-3, "{got}");
    }

    #[test]
    fn numeric_argmax_matches_peak() {
        let step = 1e-4;
        let (mut best_t, mut best) = (0.0, 0.0);
        for i in 1..50_000 {
            let t = i as f64 * step;
            let v = impulse_response(R, t, D);
            if v > best {
                best = v;
                best_t = t;
            }
        }
        assert!((best_t - peak_time(R, D)).abs() <= step);
    }

    #[test]
    fn spatial_integral_is_one() {
        for &t in &[0.1, 1.0, 1.667, 20.0] {
            // Simpson on [0, 12σ], σ = sqrt(2Dt)
            let upper = 12.0 * (2.0 * D * t).sqrt();
            let n = 20_000;
            let h = upper / n as f64;
            let g = |r: f64| impulse_response(r, t, D) * 4.0 * std::f64::consts::PI * r * r;
            let mut s = g(0.0) + g(upper);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * g(i as f64 * h);
            }
            let total = s * h / 3.0;
            assert!((total - 1.0).abs() < 1e-6, "t={t}: {total}");
        }
    }

    #[test]
    fn t0_cases() {
        let cfg = SystemConfig::reference(BlockingProfile::Low);
        assert!((choose_t0(&cfg) - 1.667).abs() < 1e-3);

        let mut slow = cfg.clone();
        slow.diffusion[2] = D / 4.0;
        assert!((choose_t0(&slow) - R * R / (6.0 * D / 4.0)).abs() < 1e-12);

        let mut far = cfg.clone();
        far.distance = [2.0 * R, R];
        assert!((choose_t0(&far) - 4.0 * R * R / (6.0 * D)).abs() < 1e-12);
    }

    #[test]
    fn ts_self_consistent() {
        let mut cfg = SystemConfig::reference(BlockingProfile::Low);
        cfg.memory = Memory::uniform(3);
        let ts = choose_ts_for_memory(&cfg, 3, 0.05).unwrap();
        cfg.timing.ts = ts;
        let worst = Link::ALL
            .iter()
            .map(|&l| {
                let (r, d) = l.geometry(&cfg);
                impulse_response(r, cfg.timing.t0 + 4.0 * ts, d) / impulse_response(r, cfg.timing.t0, d)
            })
            .fold(0.0, f64::max);
        assert!((worst - 0.05).abs() < 1e-6, "{worst}");
    }

    #[test]
    fn ts_shrinks_as_target_grows() {
        let cfg = SystemConfig::reference(BlockingProfile::Low);
        let mut prev = f64::INFINITY;
        for target in [0.05, 0.2, 0.5, 0.9, 0.99, 0.9999] {
            let ts = choose_ts_for_memory(&cfg, 1, target).unwrap();
            assert!(ts < prev);
            prev = ts;
        }
        assert!(prev < 1e-2);
    }

    #[test]
    fn symmetric_links_agree() {
        let cfg = SystemConfig::reference(BlockingProfile::Low);
        let ts = choose_ts_for_memory(&cfg, 3, 0.05).unwrap();
        let vals: Vec<f64> = Link::ALL
            .iter()
            .map(|&l| first_dropped_nu(&cfg, l, cfg.timing.t0, ts, 3))
            .collect();
        for v in &vals {
            assert!((v - vals[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn link_gain_shapes() {
        let cfg = SystemConfig::reference(BlockingProfile::Low);
        let g = link_gains(&cfg, Link::T1R, 0);
        assert_eq!(g.pis.len(), 1);
        assert!(g.nus.is_empty());
        assert_eq!(g.pi(2), 0.0);

        let cfg = cfg.with_memory(Memory::uniform(3)).unwrap();
        let g = link_gains(&cfg, Link::RT2, 3);
        assert_eq!(g.pis.len(), 4);
        assert_eq!(g.pi(5), 0.0);
        assert!(g.pi(3) < g.pi(1));
        assert_eq!(g.odd_nus().len(), 1);
        assert!(g.odd_nus()[0] > 0.05);
    }

    proptest! {
        #[test]
        fn nus_strictly_decrease(q in 1usize..8, target in 0.01f64..0.5) {
            let mut cfg = SystemConfig::reference(BlockingProfile::Low);
            cfg.timing.ts = choose_ts_for_memory(&cfg, q, target).unwrap();
            for link in Link::ALL {
                let g = link_gains(&cfg, link, q);
                prop_assert!(g.pi(1) > 0.0);
                for l in 1..=q {
                    prop_assert!(g.nu(l + 1) < g.nu(l));
                    prop_assert!(g.nu(l + 1) < 1.0);
                }
            }
        }

        #[test]
        fn response_nonnegative(r in 1e-6f64..1e-3, t in -1.0f64..100.0, d in 1e-11f64..1e-8) {
            let v = impulse_response(r, t, d);
            prop_assert!(v >= 0.0 && v.is_finite());
        }
    }
}
