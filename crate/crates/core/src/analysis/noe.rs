//! Closed forms that ignore decoding errors in earlier super slots.

use super::no_isi::pnc_phase1_no_isi;
use super::phase2::{thresholds, PhaseTwoBinding};
use super::pnc_isi::require_unit_memory;
use super::snc_isi::{snc_relay_errors, DEFAULT_ATOM_DEPTH};
use super::PhaseOne;
use crate::error::Result;
use crate::model::SystemModel;
use crate::reception::bound_count_tail_real;

/// Phase-2 weights of transceiver `i`: the error after a clean 0, and the
/// errors after a clean 1. The false alarm can only follow a relay 1, so it
/// carries that prior and sits in the second weight.
pub(crate) fn phase2_weights(model: &SystemModel, i: usize) -> Result<[f64; 2]> {
    let b = PhaseTwoBinding::new(model, i);
    let tau = thresholds(&b)?;
    let n = b.n;
    let miss_after_zero = bound_count_tail_real(n, b.table[1][0], tau[0]).at_most;
    let false_alarm_after_one = bound_count_tail_real(n, b.table[0][1], tau[1]).above;
    let miss_after_one = bound_count_tail_real(n, b.table[1][1], tau[1]).at_most;
    Ok([miss_after_zero, false_alarm_after_one + miss_after_one])
}

/// Shared form for both schemes. `same` sums the relay errors of equal bit
/// pairs, `differ` those of unequal pairs.
pub(crate) fn noe_combine(same: f64, differ: f64, w: [f64; 2]) -> f64 {
    ((2.0 - same).powi(2) - differ.powi(2)) * w[0] / 16.0
        + ((2.0 - differ).powi(2) - same.powi(2)) * w[1] / 16.0
        + 0.25 * (same + differ)
}

fn from_phase1(model: &SystemModel, phase1: &PhaseOne) -> Result<[f64; 2]> {
    let same = phase1[0][0] + phase1[1][1];
    let differ = phase1[0][1] + phase1[1][0];
    Ok([
        noe_combine(same, differ, phase2_weights(model, 0)?),
        noe_combine(same, differ, phase2_weights(model, 1)?),
    ])
}

pub fn pnc_noe(model: &SystemModel) -> Result<[f64; 2]> {
    require_unit_memory(model)?;
    from_phase1(model, &pnc_phase1_no_isi(model))
}

pub fn snc_noe(model: &SystemModel) -> Result<[f64; 2]> {
    require_unit_memory(model)?;
    from_phase1(model, &snc_relay_errors(model, DEFAULT_ATOM_DEPTH)?.phase1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{pnc_isi_fixed_point, pnc_no_isi, snc_isi_fixed_point, snc_no_isi};
    use crate::config::{BlockingProfile, Memory, SystemConfig};

    fn isi_model(profile: BlockingProfile, x_avg: f64) -> SystemModel {
        let mut cfg = SystemConfig::reference(profile).with_memory(Memory::uniform(3)).unwrap();
        cfg.release.x_avg = Some(x_avg);
        cfg.release.zeta_r = 2.0 * x_avg;
        SystemModel::new(cfg).unwrap()
    }

    #[test]
    fn error_free_is_zero() {
        assert_eq!(noe_combine(0.0, 0.0, [0.0, 0.0]), 0.0);
    }

    #[test]
    fn clean_relay_leaves_phase_two() {
        // u = 0: pe = (w1 + w2)/4
        let v = noe_combine(0.0, 0.0, [0.2, 0.1]);
        assert!((v - 0.075).abs() < 1e-15);
    }

    #[test]
    fn weights_follow_relay_prior() {
        // direct average over the previous relay bit with a clean history
        let m = isi_model(BlockingProfile::Low, 2e-17);
        let b = PhaseTwoBinding::new(&m, 0);
        let tau = thresholds(&b).unwrap();
        let u = {
            let p = pnc_phase1_no_isi(&m);
            p[0][1] + p[1][0]
        };
        let prior_zero = 0.25 * (2.0 + u);
        let prior = [prior_zero, 1.0 - prior_zero];
        let err = |bit: usize, prev: usize| {
            let t = bound_count_tail_real(b.n, b.table[bit][prev], tau[prev]);
            if bit == 0 {
                t.above
            } else {
                t.at_most
            }
        };
        let pt: Vec<f64> = (0..2).map(|bit| (0..2).map(|prev| prior[prev] * err(bit, prev)).sum()).collect();
        // relay errors only on unequal pairs; a relay error is undone iff the
        // transceiver also misreads
        let direct = 0.25 * (2.0 * pt[0] + u * (1.0 - pt[0]) + (2.0 - u) * pt[1]);
        let closed = pnc_noe(&m).unwrap()[0];
        assert!((direct - closed).abs() < 1e-14, "{direct} vs {closed}");
    }

    #[test]
    fn memoryless_collapse() {
        for profile in BlockingProfile::presets() {
            let m = SystemModel::new(SystemConfig::reference(profile)).unwrap();
            let p = pnc_noe(&m).unwrap();
            let s = snc_noe(&m).unwrap();
            let (pc, sc) = (pnc_no_isi(&m), snc_no_isi(&m));
            for i in 0..2 {
                assert!((p[i] - pc.pe[i]).abs() <= 1e-12 * pc.pe[i], "{} {}", p[i], pc.pe[i]);
                assert!((s[i] - sc.pe[i]).abs() <= 1e-12 * sc.pe[i], "{} {}", s[i], sc.pe[i]);
            }
        }
    }

    #[test]
    fn below_full_recursion() {
        for x_avg in [2e-17, 5e-17, 1e-16, 2e-16] {
            let m = isi_model(BlockingProfile::Low, x_avg);
            let p = pnc_noe(&m).unwrap();
            let s = snc_noe(&m).unwrap();
            let pf = pnc_isi_fixed_point(&m, 1e-12, 10_000).unwrap().breakdown;
            let sf = snc_isi_fixed_point(&m, 1e-12, 10_000).unwrap();
            assert!(0.5 * (p[0] + p[1]) <= pf.avg_bep, "{x_avg}");
            assert!(0.5 * (s[0] + s[1]) <= sf.avg_bep, "{x_avg}");
        }
    }
}
