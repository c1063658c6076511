//! Release rules, medium reaction and node behavior of the two relaying schemes.

use std::collections::VecDeque;

use serde::Serialize;

use crate::channel::LinkGains;
use crate::config::release_for;
use crate::error::{Error, Result};

/// Fixed-depth history, most recent entry first.
#[derive(Debug, Clone, PartialEq)]
pub struct History<T> {
    items: VecDeque<T>,
    depth: usize,
}

impl<T: Copy + Default> History<T> {
    /// Cold history: every slot holds the zero value.
    pub fn new(depth: usize) -> Self {
        History {
            items: std::iter::repeat_n(T::default(), depth).collect(),
            depth,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn push(&mut self, value: T) {
        if self.depth == 0 {
            return;
        }
        self.items.pop_back();
        self.items.push_front(value);
    }

    /// Entry `lag` super slots back (1 = previous). Zero beyond the depth.
    pub fn lag(&self, lag: usize) -> T {
        debug_assert!(lag >= 1);
        self.items.get(lag - 1).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }
}

/// Perfect annihilation of the two reactive species.
pub fn react_perfect(c1: f64, c2: f64) -> (f64, f64) {
    ((c1 - c2).max(0.0), (c2 - c1).max(0.0))
}

/// Straightforward scheme: top the relay-side concentration up to `target`
/// when sending 1, stay silent otherwise.
pub fn snc_release(bit: u8, own_releases: &History<f64>, gains: &LinkGains, target: f64) -> Result<f64> {
    if bit == 0 {
        return Ok(0.0);
    }
    let residual: f64 = gains
        .odd_nus()
        .iter()
        .enumerate()
        .map(|(l, nu)| nu * own_releases.lag(l + 1))
        .sum();
    let x = release_for(target, gains.peak()) - residual;
    if x < 0.0 {
        return Err(Error::Invariant(format!(
            "straightforward release went negative ({x:e}); residual exceeds the target"
        )));
    }
    Ok(x)
}

/// Reaction-based scheme: signal release plus the amount needed to cancel
/// the other transceiver's estimated leftovers at the relay.
pub fn pnc_release(
    bit: u8,
    own_releases: &History<f64>,
    decoded_other: &History<u8>,
    gains_self: &LinkGains,
    gains_other: &LinkGains,
    target: f64,
) -> f64 {
    let nu_self = gains_self.odd_nus();
    let nu_other = gains_other.odd_nus();
    let cancel: f64 = nu_other
        .iter()
        .enumerate()
        .map(|(l, nu)| nu * f64::from(decoded_other.lag(l + 1)))
        .sum();
    let mut echo = 0.0;
    for (l1, a) in nu_self.iter().enumerate() {
        for (l2, b) in nu_other.iter().enumerate() {
            echo += a * b * own_releases.lag(l1 + l2 + 2);
        }
    }
    release_for(target, gains_self.peak()) * (f64::from(bit) + cancel) + echo
}

fn odd_sum(gains: &LinkGains) -> f64 {
    gains.odd_nus().iter().sum()
}

pub fn snc_x_max(gains: &LinkGains, target: f64) -> f64 {
    release_for(target, gains.peak())
}

pub fn pnc_x_max(gains_self: &LinkGains, gains_other: &LinkGains, target: f64) -> f64 {
    let (s, o) = (odd_sum(gains_self), odd_sum(gains_other));
    release_for(target, gains_self.peak()) * (1.0 + o) / (1.0 - s * o)
}

/// Long-run mean release of the straightforward scheme.
pub fn snc_mean_release(gains: &LinkGains, target: f64) -> f64 {
    release_for(target, gains.peak()) / (2.0 + odd_sum(gains))
}

/// Long-run mean release of the reaction-based scheme (equiprobable bits,
/// decoded bits taken at their mean).
pub fn pnc_mean_release(gains_self: &LinkGains, gains_other: &LinkGains, target: f64) -> f64 {
    let (s, o) = (odd_sum(gains_self), odd_sum(gains_other));
    release_for(target, gains_self.peak()) * (1.0 + o) / (2.0 * (1.0 - s * o))
}

/// Relay-side targets of both schemes that spend `x_avg` per transceiver on average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Budgets {
    pub c_snc: f64,
    pub c_pnc: f64,
}

pub fn calibrate_budgets(x_avg: f64, to_relay: [&LinkGains; 2]) -> Budgets {
    // mean releases are linear in the target, so solve with a unit target
    let snc: f64 = (0..2).map(|i| snc_mean_release(to_relay[i], 1.0)).sum::<f64>() / 2.0;
    let pnc: f64 = (0..2)
        .map(|i| pnc_mean_release(to_relay[i], to_relay[1 - i], 1.0))
        .sum::<f64>()
        / 2.0;
    Budgets {
        c_snc: x_avg / snc,
        c_pnc: x_avg / pnc,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RelayDecision {
    /// Decoded bit of each receptor group.
    pub decoded: [u8; 2],
    /// Bit the relay forwards.
    pub sent: u8,
}

impl RelayDecision {
    pub fn release(&self, zeta_r: f64) -> f64 {
        f64::from(self.sent) * zeta_r
    }
}

pub fn relay_step_pnc(y: [u32; 2], tau: [f64; 2]) -> Result<RelayDecision> {
    let d1 = crate::reception::threshold_decode(y[0], tau[0]);
    let d2 = crate::reception::threshold_decode(y[1], tau[1]);
    if d1 == 1 && d2 == 1 {
        return Err(Error::Invariant(format!(
            "both relay receptor groups decoded 1 (bound counts {y:?}) despite perfect reaction"
        )));
    }
    Ok(RelayDecision {
        decoded: [d1, d2],
        sent: d1 + d2,
    })
}

pub fn relay_step_snc(y: [u32; 2], tau: [f64; 2]) -> RelayDecision {
    let d1 = crate::reception::threshold_decode(y[0], tau[0]);
    let d2 = crate::reception::threshold_decode(y[1], tau[1]);
    RelayDecision {
        decoded: [d1, d2],
        sent: d1 ^ d2,
    }
}

/// The other transceiver's bit recovered from one's own bit and the relay's.
pub fn transceiver_recover(own: u8, relay: u8) -> u8 {
    own ^ relay
}

/// Concentrations in one super slot (mol/L).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MediumSnapshot {
    pub relay_pre: [f64; 2],
    pub relay_post: [f64; 2],
    pub at_transceiver: [f64; 2],
}

/// Per-node memory needed by the rate-adaptive recursions.
#[derive(Debug, Clone, PartialEq)]
pub struct TransceiverState {
    pub releases: History<f64>,
    pub decoded_other: History<u8>,
    pub decoded_relay: History<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeState {
    pub transceivers: [TransceiverState; 2],
}

impl SchemeState {
    /// `to_relay` and `from_relay` are the super-slot memories of each link.
    pub fn cold(to_relay: [usize; 2], from_relay: [usize; 2]) -> Self {
        let node = |i: usize| TransceiverState {
            releases: History::new(to_relay[0] + to_relay[1]),
            decoded_other: History::new(to_relay[1 - i]),
            decoded_relay: History::new(from_relay[i]),
        };
        SchemeState {
            transceivers: [node(0), node(1)],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{link_gains, Link};
    use crate::config::{unit_convert, BlockingProfile, Memory, SystemConfig};
    use proptest::prelude::*;

    fn gains(q: usize) -> [LinkGains; 2] {
        let cfg = SystemConfig::reference(BlockingProfile::Low)
            .with_memory(Memory::uniform(q))
            .unwrap();
        [link_gains(&cfg, Link::T1R, q), link_gains(&cfg, Link::T2R, q)]
    }

    #[test]
    fn reaction_cases() {
        assert_eq!(react_perfect(2.0, 2.0), (0.0, 0.0));
        assert_eq!(react_perfect(5.0, 3.0), (2.0, 0.0));
        assert_eq!(react_perfect(0.0, 4.0), (0.0, 4.0));
    }

    #[test]
    fn snc_release_cases() {
        let [g, _] = gains(2);
        let c = 1e-9;
        let mut h = History::new(1);
        assert_eq!(snc_release(0, &h, &g, c).unwrap(), 0.0);
        assert_eq!(snc_release(1, &h, &g, c).unwrap(), release_for(c, g.peak()));
        h.push(release_for(c, g.peak()));
        h.push(7.0); // depth 1 keeps only the latest
        h.push(release_for(c, g.peak()));
        let x = snc_release(1, &h, &g, c).unwrap();
        let expected = release_for(c, g.peak()) * (1.0 - g.nu(3));
        assert!((x - expected).abs() / expected < 1e-14);
    }

    #[test]
    fn pnc_release_cases() {
        let [g1, g2] = gains(3);
        let c = 1e-9;
        let st = SchemeState::cold([1, 1], [1, 1]);
        let node = &st.transceivers[0];
        assert_eq!(pnc_release(0, &node.releases, &node.decoded_other, &g1, &g2, c), 0.0);
        assert_eq!(pnc_release(1, &node.releases, &node.decoded_other, &g1, &g2, c), release_for(c, g1.peak()));
    }

    #[test]
    fn pnc_worst_case_converges_to_max() {
        let [g1, g2] = gains(3);
        let c = 1e-9;
        let mut st = SchemeState::cold([1, 1], [1, 1]);
        let node = &mut st.transceivers[0];
        let mut x = 0.0;
        for _ in 0..400 {
            x = pnc_release(1, &node.releases, &node.decoded_other, &g1, &g2, c);
            node.releases.push(x);
            node.decoded_other.push(1);
        }
        let max = pnc_x_max(&g1, &g2, c);
        let closed = release_for(c, g1.peak()) * (1.0 + g2.nu(3)) / (1.0 - g1.nu(3) * g2.nu(3));
        assert!((max - closed).abs() / closed < 1e-14);
        assert!((x - max).abs() / max < 1e-12, "{x} vs {max}");
    }

    #[test]
    fn no_memory_budgets_agree() {
        let [g1, g2] = gains(0);
        let b = calibrate_budgets(1e-16, [&g1, &g2]);
        assert!((b.c_snc - b.c_pnc).abs() / b.c_snc < 1e-14);
        let half = release_for(b.c_snc, g1.peak()) / 2.0;
        assert!((snc_mean_release(&g1, b.c_snc) - half).abs() / half < 1e-14);
    }

    #[test]
    fn unit_memory_budget_ratio() {
        let [g1, g2] = gains(3);
        let nu = g1.nu(3);
        let b = calibrate_budgets(1e-16, [&g1, &g2]);
        // equal means: c_snc/(2+ν) = c_pnc (1+ν)/(2(1-ν²))
        let expected = (2.0 + nu) * (1.0 + nu) / (2.0 * (1.0 - nu * nu));
        assert!((b.c_snc / b.c_pnc - expected).abs() < 1e-12);
    }

    #[test]
    fn relay_pnc_table() {
        let zero = [0.0, 0.0];
        assert_eq!(relay_step_pnc([0, 0], zero).unwrap().sent, 0);
        let r = relay_step_pnc([3, 0], zero).unwrap();
        assert_eq!((r.decoded, r.release(2.0)), ([1, 0], 2.0));
        let r = relay_step_pnc([0, 1], zero).unwrap();
        assert_eq!((r.decoded, r.release(2.0)), ([0, 1], 2.0));
        assert!(matches!(relay_step_pnc([1, 1], zero), Err(Error::Invariant(_))));
    }

    #[test]
    fn relay_snc_xor() {
        let zero = [0.0, 0.0];
        assert_eq!(relay_step_snc([0, 0], zero).release(1.0), 0.0);
        assert_eq!(relay_step_snc([4, 0], zero).release(1.0), 1.0);
        assert_eq!(relay_step_snc([4, 2], zero).release(1.0), 0.0);
    }

    #[test]
    fn recover_is_xor() {
        assert_eq!(transceiver_recover(0, 0), 0);
        assert_eq!(transceiver_recover(1, 1), 0);
        assert_eq!(transceiver_recover(0, 1), 1);
        assert_eq!(transceiver_recover(1, 0), 1);
    }

    #[test]
    fn history_lags() {
        let mut h: History<u8> = History::new(2);
        assert_eq!(h.lag(1), 0);
        h.push(1);
        h.push(0);
        assert_eq!((h.lag(1), h.lag(2), h.lag(3)), (0, 1, 0));
        let mut empty: History<f64> = History::new(0);
        empty.push(3.0);
        assert_eq!(empty.lag(1), 0.0);
    }

    proptest! {
        #[test]
        fn reaction_conserves_difference(a in 0.0f64..1e-3, b in 0.0f64..1e-3) {
            let (x, y) = react_perfect(a, b);
            prop_assert_eq!(x * y, 0.0);
            prop_assert!(((x - y) - (a - b)).abs() <= 1e-18);
        }

        #[test]
        fn releases_bounded(
            q in 1usize..7,
            bits in prop::collection::vec((0u8..2, 0u8..2), 1..200),
        ) {
            let [g1, g2] = gains(q);
            let c = 1e-9;
            let depth = [g1.super_memory(), g2.super_memory()];
            let mut snc = History::new(depth[0]);
            let mut st = SchemeState::cold(depth, [0, 0]);
            let snc_max = snc_x_max(&g1, c);
            let pnc_max = pnc_x_max(&g1, &g2, c);
            for (b, decoded) in bits {
                let x = snc_release(b, &snc, &g1, c).unwrap();
                prop_assert!(x >= 0.0 && x <= snc_max * (1.0 + 1e-12));
                snc.push(x);
                let node = &mut st.transceivers[0];
                let y = pnc_release(b, &node.releases, &node.decoded_other, &g1, &g2, c);
                prop_assert!(y >= 0.0 && y <= pnc_max * (1.0 + 1e-12));
                node.releases.push(y);
                node.decoded_other.push(decoded);
            }
        }

        /// With correct feedback the relay sees exactly c(b1 - b2) after reaction.
        #[test]
        fn pnc_cancels_isi_with_correct_feedback(
            q in 1usize..7,
            bits in prop::collection::vec((0u8..2, 0u8..2), 1..120),
        ) {
            let g = gains(q);
            let c = 1e-9;
            let depth = [g[0].super_memory(), g[1].super_memory()];
            let mut st = SchemeState::cold(depth, [0, 0]);
            let mut sent: [History<f64>; 2] = [History::new(depth[0]), History::new(depth[1])];
            for (b1, b2) in bits {
                let b = [b1, b2];
                let mut pre = [0.0; 2];
                let mut x = [0.0; 2];
                for i in 0..2 {
                    let node = &st.transceivers[i];
                    x[i] = pnc_release(b[i], &node.releases, &node.decoded_other, &g[i], &g[1 - i], c);
                    pre[i] = unit_convert(x[i], g[i].peak())
                        + g[i].odd_pis().iter().enumerate().map(|(l, p)| unit_convert(sent[i].lag(l + 1), *p)).sum::<f64>();
                }
                let diff = pre[0] - pre[1];
                let expected = c * (f64::from(b1) - f64::from(b2));
                prop_assert!((diff - expected).abs() <= 1e-9 * c, "{diff} vs {expected}");
                for i in 0..2 {
                    st.transceivers[i].releases.push(x[i]);
                    st.transceivers[i].decoded_other.push(b[1 - i]);
                    sent[i].push(x[i]);
                }
            }
        }
    }
}
