//! Steady state of the reaction-based scheme under unit super-slot memory.

use serde::Serialize;

use super::groups::{group_of, group_relay_error_closed_form, RelayParams, GROUPS};
use super::no_isi::pnc_no_isi;
use super::phase2::{phase2_step, thresholds, PhaseTwoBinding};
use super::{relay_zero_prior, ErrorBreakdown, PhaseOne, PhaseTwo};
use crate::error::{Error, Result};
use crate::model::{Scheme, SystemModel};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PncIsiReport {
    pub breakdown: ErrorBreakdown,
    /// f_g: summed probability of the previous-slot outcomes in each group.
    pub group_weights: [f64; 9],
    /// p_g(b1, b2), indexed `[group][2 * b1 + b2]`.
    pub group_errors: [[f64; 4]; 9],
    pub thresholds: [[f64; 2]; 2],
    pub residual: f64,
}

pub(crate) fn require_unit_memory(model: &SystemModel) -> Result<()> {
    let deepest = model
        .uplink_depth()
        .into_iter()
        .chain(model.downlink_depth())
        .max()
        .unwrap_or(0);
    if deepest > 1 {
        return Err(Error::Unsupported(format!(
            "the recursion covers at most one super slot of memory per link, got {deepest}; use simulation"
        )));
    }
    Ok(())
}

pub(crate) fn relay_params(model: &SystemModel) -> RelayParams {
    RelayParams {
        target: model.signal_concentration(Scheme::Pnc, 0),
        nu: [model.to_relay[0].nu(3), model.to_relay[1].nu(3)],
        kappa: [model.relay_kappa(0), model.relay_kappa(1)],
        n: model.cfg.relay_receptors,
    }
}

/// f_g for the previous slot's relay errors and per-transceiver relay-bit errors.
pub(crate) fn group_weights(phase1: &PhaseOne, phase2: &PhaseTwo) -> [f64; 9] {
    let mut f = [0.0; 9];
    for b1 in 0..2u8 {
        for b2 in 0..2u8 {
            let x = usize::from(b1 ^ b2);
            let relay_err = phase1[b1 as usize][b2 as usize];
            for d1 in 0..2u8 {
                for d2 in 0..2u8 {
                    // T1's bit is recovered at T2 and vice versa
                    let clean = |wrong: bool, rx: usize| {
                        let e = phase2[rx][x];
                        if wrong {
                            e
                        } else {
                            1.0 - e
                        }
                    };
                    // a wrong relay bit flips the recovered bit unless the
                    // transceiver also misreads it
                    let flipped = |wrong: bool, rx: usize| {
                        let e = phase2[rx][1 - x];
                        if wrong {
                            1.0 - e
                        } else {
                            e
                        }
                    };
                    let w1 = d1 != b1;
                    let w2 = d2 != b2;
                    let joint = (1.0 - relay_err) * clean(w1, 1) * clean(w2, 0)
                        + relay_err * flipped(w1, 1) * flipped(w2, 0);
                    f[group_of([b1, b2], [d1, d2]).index - 1] += joint;
                }
            }
        }
    }
    f
}

pub fn pnc_isi_fixed_point(model: &SystemModel, tol: f64, max_iter: usize) -> Result<PncIsiReport> {
    require_unit_memory(model)?;
    let params = relay_params(model);
    let mut group_errors = [[0.0; 4]; 9];
    for (g, row) in GROUPS.iter().zip(group_errors.iter_mut()) {
        for (k, p) in row.iter_mut().enumerate() {
            *p = group_relay_error_closed_form(*g, [(k >> 1) as u8, (k & 1) as u8], &params);
        }
    }
    let bindings = [PhaseTwoBinding::new(model, 0), PhaseTwoBinding::new(model, 1)];
    let taus = [thresholds(&bindings[0])?, thresholds(&bindings[1])?];

    let start = pnc_no_isi(model);
    let (mut phase1, mut phase2) = (start.phase1, start.phase2);
    let mut residual = f64::INFINITY;
    for iteration in 1..=max_iter {
        let f = group_weights(&phase1, &phase2);
        let mut next1 = [[0.0; 2]; 2];
        for (b1, row) in next1.iter_mut().enumerate() {
            for (b2, p) in row.iter_mut().enumerate() {
                let k = 2 * b1 + b2;
                *p = 0.25 * f.iter().zip(&group_errors).map(|(w, e)| w * e[k]).sum::<f64>();
            }
        }
        let prior = relay_zero_prior(&phase1);
        let next2 = [
            phase2_step(&bindings[0], &taus[0], &phase2[0], prior),
            phase2_step(&bindings[1], &taus[1], &phase2[1], prior),
        ];
        residual = sup_diff(&phase1, &next1).max(sup_diff(&phase2, &next2));
        phase1 = next1;
        phase2 = next2;
        if residual < tol {
            let mut breakdown = ErrorBreakdown::from_phases(phase1, phase2);
            breakdown.iterations = iteration;
            return Ok(PncIsiReport {
                breakdown,
                group_weights: group_weights(&phase1, &phase2),
                group_errors,
                thresholds: taus,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

pub(crate) fn sup_diff(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
