//! Straightforward scheme under channel memory: release law, numeric relay
//! threshold and the steady-state error recursion.

use std::collections::BTreeMap;

use serde::Serialize;

use super::no_isi::{phase2_no_isi, snc_relay_binding, xor_error};
use super::phase2::{phase2_step, thresholds, PhaseTwoBinding};
use super::pnc_isi::{require_unit_memory, sup_diff};
use super::{relay_zero_prior, ErrorBreakdown, PhaseOne};
use crate::channel::LinkGains;
use crate::coding::{snc_release, History};
use crate::config::{release_for, unit_convert};
use crate::error::{Error, Result};
use crate::model::{Scheme, SystemModel};
use crate::reception::{bound_count_pmf, neumaier_sum};

/// Truncation depth of the release-count law.
pub const DEFAULT_ATOM_DEPTH: usize = 30;

/// Past-bit window enumerated when more than one super slot leaks.
const HISTORY_WINDOW: usize = 10;
/// Bins used to compress the enumerated interference law.
const INTERFERENCE_BINS: usize = 40;

/// Discrete law of one transceiver's release under the straightforward scheme.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReleaseAtoms {
    /// Release amounts in mol, silent atom first.
    pub values: Vec<f64>,
    /// Weight 2^{-m} of the m-th atom.
    pub weights: Vec<f64>,
    /// Mass not covered by the listed atoms.
    pub tail: f64,
}

impl ReleaseAtoms {
    /// Weights rescaled to sum to one.
    pub fn normalized(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        self.weights.iter().map(|w| w / total).collect()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().zip(self.normalized()).map(|(x, w)| x * w).sum()
    }
}

/// Atoms x_m = (release for the target) · Σ_{l<m-1} (−ν3)^l with weight 2^{-m},
/// m = 1..depth. Atom m is a run of m−1 ones preceded by a zero.
pub fn snc_isi_release_distribution(gains: &LinkGains, target: f64, depth: usize) -> ReleaseAtoms {
    let base = release_for(target, gains.peak());
    let ratio = -gains.nu(3);
    let mut values = Vec::with_capacity(depth);
    let mut weights = Vec::with_capacity(depth);
    let (mut partial, mut power, mut weight) = (0.0, 1.0, 0.5);
    for m in 1..=depth {
        if m >= 2 {
            partial += power;
            power *= ratio;
        }
        values.push(base * partial);
        weights.push(weight);
        weight *= 0.5;
    }
    ReleaseAtoms {
        values,
        weights,
        tail: 0.5f64.powi(depth as i32),
    }
}

/// Law of the leftover concentration of one molecule type at the relay in a
/// slot where its transmitter stays silent, as (mol/L, probability) pairs.
pub(crate) fn silent_interference(model: &SystemModel, i: usize, depth: usize) -> Result<Vec<(f64, f64)>> {
    let gains = &model.to_relay[i];
    let target = model.target(Scheme::Snc);
    match gains.super_memory() {
        0 => Ok(vec![(0.0, 1.0)]),
        1 => {
            let atoms = snc_isi_release_distribution(gains, target, depth);
            let pi3 = gains.pi(3);
            Ok(atoms
                .values
                .iter()
                .zip(atoms.normalized())
                .map(|(x, w)| (unit_convert(*x, pi3), w))
                .collect())
        }
        q => enumerate_interference(gains, target, q),
    }
}

/// Interference law for deeper memory: enumerate a window of past bits from a
/// cold start, then bin the leftovers.
fn enumerate_interference(gains: &LinkGains, target: f64, q: usize) -> Result<Vec<(f64, f64)>> {
    let window = HISTORY_WINDOW.max(q + 2);
    let pis = gains.odd_pis();
    let weight = 0.5f64.powi(window as i32);
    let mut samples = Vec::with_capacity(1 << window);
    for pattern in 0u32..(1 << window) {
        let mut history = History::new(q);
        // oldest bit first
        for l in (0..window).rev() {
            let bit = ((pattern >> l) & 1) as u8;
            let x = snc_release(bit, &history, gains, target)?;
            history.push(x);
        }
        let leftover: f64 = pis
            .iter()
            .enumerate()
            .map(|(l, pi)| unit_convert(history.lag(l + 1), *pi))
            .sum();
        samples.push(leftover);
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(0.0, f64::max);
    let width = (hi - lo) / INTERFERENCE_BINS as f64;
    let mut bins = vec![(0.0, 0.0); INTERFERENCE_BINS];
    for s in samples {
        let k = if width > 0.0 {
            (((s - lo) / width) as usize).min(INTERFERENCE_BINS - 1)
        } else {
            0
        };
        bins[k].0 += s * weight;
        bins[k].1 += weight;
    }
    Ok(bins
        .into_iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|(mass, w)| (mass / w, w))
        .collect())
}

/// Bound-count pmfs of relay group `i`, indexed `[b_i][b_other][y]`, averaged
/// over the interference of both molecule types.
fn mixture_pmfs(model: &SystemModel, i: usize, laws: &[Vec<(f64, f64)>; 2]) -> Result<[[Vec<f64>; 2]; 2]> {
    let n = model.cfg.relay_receptors[i];
    let signal = [
        model.signal_concentration(Scheme::Snc, 0),
        model.signal_concentration(Scheme::Snc, 1),
    ];
    let blocked = model.cfg.blocking.kappa(i).is_some();
    let silent_only = vec![(0.0, 1.0)];
    let mut out: [[Vec<f64>; 2]; 2] = Default::default();
    for (b_own, row) in out.iter_mut().enumerate() {
        for (b_other, pmf) in row.iter_mut().enumerate() {
            let bits = {
                let mut b = [0usize; 2];
                b[i] = b_own;
                b[1 - i] = b_other;
                b
            };
            // only silent types contribute leftovers; the other type matters
            // only through blocking
            let law = |j: usize| {
                if bits[j] == 1 || (j != i && !blocked) {
                    &silent_only
                } else {
                    &laws[j]
                }
            };
            let mut by_p: BTreeMap<u64, f64> = BTreeMap::new();
            for (c1, w1) in law(0) {
                for (c2, w2) in law(1) {
                    let leftovers = [*c1, *c2];
                    let conc = [0, 1].map(|j| if bits[j] == 1 { signal[j] } else { leftovers[j] });
                    let p = snc_relay_binding(model, i, conc);
                    *by_p.entry(p.to_bits()).or_default() += w1 * w2;
                }
            }
            let mut acc = vec![0.0; n as usize + 1];
            for (bits_p, w) in by_p {
                let p = f64::from_bits(bits_p);
                for (y, a) in acc.iter_mut().enumerate() {
                    *a += w * bound_count_pmf(n, p, y as u32)?;
                }
            }
            *pmf = acc;
        }
    }
    Ok(out)
}

/// Smallest count favoring 1 under the summed likelihood difference, minus one.
fn threshold_from_mixtures(mix: &[[Vec<f64>; 2]; 2]) -> i64 {
    let n = mix[0][0].len() - 1;
    (0..=n)
        .find(|&y| decision_statistic(mix, y) > 0.0)
        .map(|y| y as i64 - 1)
        .unwrap_or(n as i64)
}

fn decision_statistic(mix: &[[Vec<f64>; 2]; 2], y: usize) -> f64 {
    (0..2).map(|b| mix[1][b][y] - mix[0][b][y]).sum()
}

/// Relay-side analysis of the straightforward scheme under memory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SncRelayAnalysis {
    pub thresholds: [i64; 2],
    /// P(group i misreads its bit), indexed `[i][b_i][b_other]`.
    pub errors: [[[f64; 2]; 2]; 2],
    pub phase1: PhaseOne,
}

fn group_errors(mix: &[[Vec<f64>; 2]; 2], tau: i64) -> [[f64; 2]; 2] {
    let cut = (tau + 1).clamp(0, mix[0][0].len() as i64) as usize;
    let mut e = [[0.0; 2]; 2];
    for b_other in 0..2 {
        e[0][b_other] = neumaier_sum(mix[0][b_other][cut..].iter().copied());
        e[1][b_other] = neumaier_sum(mix[1][b_other][..cut].iter().copied());
    }
    e
}

fn relay_mixtures(model: &SystemModel, depth: usize) -> Result<[[[Vec<f64>; 2]; 2]; 2]> {
    let laws = [silent_interference(model, 0, depth)?, silent_interference(model, 1, depth)?];
    Ok([mixture_pmfs(model, 0, &laws)?, mixture_pmfs(model, 1, &laws)?])
}

pub fn snc_isi_threshold(model: &SystemModel, depth: usize) -> Result<[i64; 2]> {
    let mix = relay_mixtures(model, depth)?;
    Ok([threshold_from_mixtures(&mix[0]), threshold_from_mixtures(&mix[1])])
}

pub fn snc_relay_errors(model: &SystemModel, depth: usize) -> Result<SncRelayAnalysis> {
    let mix = relay_mixtures(model, depth)?;
    let thresholds = [threshold_from_mixtures(&mix[0]), threshold_from_mixtures(&mix[1])];
    let errors = [group_errors(&mix[0], thresholds[0]), group_errors(&mix[1], thresholds[1])];
    let mut phase1 = [[0.0; 2]; 2];
    for (b1, row) in phase1.iter_mut().enumerate() {
        for (b2, p) in row.iter_mut().enumerate() {
            *p = xor_error(errors[0][b1][b2], errors[1][b2][b1]);
        }
    }
    Ok(SncRelayAnalysis {
        thresholds,
        errors,
        phase1,
    })
}

pub fn snc_isi_fixed_point(model: &SystemModel, tol: f64, max_iter: usize) -> Result<ErrorBreakdown> {
    require_unit_memory(model)?;
    let phase1 = snc_relay_errors(model, DEFAULT_ATOM_DEPTH)?.phase1;
    let prior = relay_zero_prior(&phase1);
    let bindings = [PhaseTwoBinding::new(model, 0), PhaseTwoBinding::new(model, 1)];
    let taus = [thresholds(&bindings[0])?, thresholds(&bindings[1])?];
    let mut phase2 = phase2_no_isi(model);
    let mut residual = f64::INFINITY;
    for iteration in 1..=max_iter {
        let next = [
            phase2_step(&bindings[0], &taus[0], &phase2[0], prior),
            phase2_step(&bindings[1], &taus[1], &phase2[1], prior),
        ];
        residual = sup_diff(&phase2, &next);
        phase2 = next;
        if residual < tol {
            let mut out = ErrorBreakdown::from_phases(phase1, phase2);
            out.iterations = iteration;
            return Ok(out);
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::snc_no_isi;
    use crate::config::{BlockingProfile, Memory, SystemConfig};

    fn isi_model(profile: BlockingProfile, q: usize, x_avg: f64) -> SystemModel {
        let mut cfg = SystemConfig::reference(profile).with_memory(Memory::uniform(q)).unwrap();
        cfg.release.x_avg = Some(x_avg);
        cfg.release.zeta_r = 2.0 * x_avg;
        SystemModel::new(cfg).unwrap()
    }

    #[test]
    fn atom_examples() {
        let m = isi_model(BlockingProfile::Low, 3, 5e-17);
        let g = &m.to_relay[0];
        let c = m.budgets.c_snc;
        let atoms = snc_isi_release_distribution(g, c, DEFAULT_ATOM_DEPTH);
        let base = release_for(c, g.peak());
        assert_eq!(atoms.values[0], 0.0);
        assert_eq!(atoms.weights[0], 0.5);
        assert!((atoms.values[1] - base).abs() <= 1e-15 * base);
        assert_eq!(atoms.weights[1], 0.25);
        let limit = base / (1.0 + g.nu(3));
        assert!((atoms.values[29] - limit).abs() < 1e-6 * limit);
        assert_eq!(atoms.tail, 0.5f64.powi(30));
        assert!((atoms.weights.iter().sum::<f64>() + atoms.tail - 1.0).abs() < 1e-15);
    }

    #[test]
    fn atom_mean_matches_long_run_release() {
        let m = isi_model(BlockingProfile::Low, 3, 5e-17);
        let atoms = snc_isi_release_distribution(&m.to_relay[0], m.budgets.c_snc, 50);
        let mean = m.mean_release(Scheme::Snc, 0);
        assert!((atoms.mean() - mean).abs() < 1e-12 * mean);
    }

    #[test]
    fn memoryless_threshold_is_zero() {
        let m = SystemModel::new(SystemConfig::reference(BlockingProfile::High)).unwrap();
        assert_eq!(snc_isi_threshold(&m, DEFAULT_ATOM_DEPTH).unwrap(), [0, 0]);
    }

    #[test]
    fn memoryless_run_reproduces_closed_form() {
        for profile in BlockingProfile::presets() {
            let m = SystemModel::new(SystemConfig::reference(profile)).unwrap();
            let fp = snc_isi_fixed_point(&m, 1e-14, 10_000).unwrap();
            let cf = snc_no_isi(&m);
            for i in 0..2 {
                assert!((fp.pe[i] - cf.pe[i]).abs() <= 1e-12 * cf.pe[i], "{profile:?}");
            }
        }
    }

    #[test]
    fn silent_pair_errs_under_memory() {
        let m = isi_model(BlockingProfile::Low, 3, 1e-16);
        let r = snc_relay_errors(&m, DEFAULT_ATOM_DEPTH).unwrap();
        assert!(r.phase1[0][0] > 0.0);
    }

    #[test]
    fn statistic_straddles_zero() {
        let m = isi_model(BlockingProfile::Low, 3, 5e-17);
        let mix = relay_mixtures(&m, DEFAULT_ATOM_DEPTH).unwrap();
        for g in &mix {
            let tau = threshold_from_mixtures(g);
            assert!(tau >= 0);
            assert!(decision_statistic(g, tau as usize) <= 0.0);
            assert!(decision_statistic(g, tau as usize + 1) > 0.0);
        }
    }

    #[test]
    fn truncation_does_not_move_threshold() {
        let m = isi_model(BlockingProfile::Low, 3, 1e-16);
        assert_eq!(snc_isi_threshold(&m, 30).unwrap(), snc_isi_threshold(&m, 40).unwrap());
    }

    #[test]
    fn threshold_is_locally_optimal() {
        for x_avg in [2e-17, 5e-17, 1e-16, 3e-16] {
            let m = isi_model(BlockingProfile::Low, 3, x_avg);
            let mix = relay_mixtures(&m, DEFAULT_ATOM_DEPTH).unwrap();
            for g in &mix {
                let tau = threshold_from_mixtures(g);
                let cost = |t: i64| {
                    let e = group_errors(g, t);
                    e[0][0] + e[0][1] + e[1][0] + e[1][1]
                };
                let best = cost(tau);
                assert!(cost(tau - 1) >= best - 1e-15);
                assert!(cost(tau + 1) >= best - 1e-15);
            }
        }
    }

    #[test]
    fn deeper_memory_law_is_normalized() {
        let m = isi_model(BlockingProfile::Low, 5, 5e-17);
        let law = silent_interference(&m, 0, DEFAULT_ATOM_DEPTH).unwrap();
        assert!(law.len() <= INTERFERENCE_BINS);
        assert!((law.iter().map(|(_, w)| w).sum::<f64>() - 1.0).abs() < 1e-12);
        let t = snc_isi_threshold(&m, DEFAULT_ATOM_DEPTH).unwrap();
        assert!(t[0] >= 0 && t[1] >= 0);
        assert!(matches!(snc_isi_fixed_point(&m, 1e-12, 10), Err(Error::Unsupported(_))));
    }
}
