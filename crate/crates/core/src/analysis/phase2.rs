//! Relay→transceiver hop: binding table, adaptive threshold and the
//! one-step error recursion.

use crate::error::{Error, Result};
use crate::model::SystemModel;
use crate::reception::{binding_probability, bound_count_tail_real, BindingContext};

/// Binding probabilities at one transceiver, indexed `[current relay bit][previous relay bit]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseTwoBinding {
    pub table: [[f64; 2]; 2],
    pub n: u32,
}

impl PhaseTwoBinding {
    /// Unit-memory view of the relay→T_i link.
    pub fn new(model: &SystemModel, i: usize) -> Self {
        let now = model.relay_arrival(i, 0);
        let before = model.relay_arrival(i, 1);
        let kappa = model.transceiver_kappa();
        let n = model.cfg.transceiver_receptors[i];
        let mut table = [[0.0; 2]; 2];
        for (b, row) in table.iter_mut().enumerate() {
            for (prev, p) in row.iter_mut().enumerate() {
                let c = b as f64 * now + prev as f64 * before;
                *p = binding_probability(&BindingContext::unblocked(c, kappa, n));
            }
        }
        PhaseTwoBinding { table, n }
    }
}

/// ML threshold between Binomial(n, p1) and Binomial(n, p0); zero when the
/// null hypothesis never produces a bound receptor.
pub fn adaptive_threshold(p1: f64, p0: f64, n: u32) -> Result<f64> {
    if p0 <= 0.0 {
        return Ok(0.0);
    }
    if p1 <= p0 {
        return Err(Error::ThresholdOrdering { p1, p0 });
    }
    let num = n as f64 * ((-p0).ln_1p() - (-p1).ln_1p());
    let den = p1.ln() - p0.ln() + (-p0).ln_1p() - (-p1).ln_1p();
    Ok(num / den)
}

pub fn adaptive_threshold_phase2(binding: &PhaseTwoBinding, prev_decoded: u8) -> Result<f64> {
    let prev = usize::from(prev_decoded);
    adaptive_threshold(binding.table[1][prev], binding.table[0][prev], binding.n)
}

/// Thresholds after a decoded 0 and after a decoded 1. When the relay is
/// silent the signal vanishes and nothing can be told apart; decode 0.
pub(crate) fn thresholds(binding: &PhaseTwoBinding) -> Result<[f64; 2]> {
    let mut out = [0.0; 2];
    for (prev, t) in out.iter_mut().enumerate() {
        *t = if binding.table[1][prev] <= binding.table[0][prev] && binding.table[0][prev] == 0.0 {
            0.0
        } else {
            adaptive_threshold_phase2(binding, prev as u8)?
        };
    }
    Ok(out)
}

/// P(wrong decision | current bit, previous bit, threshold).
pub(crate) fn decision_error(binding: &PhaseTwoBinding, bit: usize, prev: usize, tau: f64) -> f64 {
    let tail = bound_count_tail_real(binding.n, binding.table[bit][prev], tau);
    if bit == 0 {
        tail.above
    } else {
        tail.at_most
    }
}

/// One step of the phase-2 recursion: new P(E^T | b) from the previous
/// slot's errors and the prior that the relay sent 0.
pub(crate) fn phase2_step(binding: &PhaseTwoBinding, tau: &[f64; 2], prev_err: &[f64; 2], prior_zero: f64) -> [f64; 2] {
    let prior = [prior_zero, 1.0 - prior_zero];
    let mut out = [0.0; 2];
    for (bit, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for prev in 0..2 {
            for decoded_prev in 0..2 {
                let w = if decoded_prev == prev {
                    1.0 - prev_err[prev]
                } else {
                    prev_err[prev]
                };
                acc += prior[prev] * w * decision_error(binding, bit, prev, tau[decoded_prev]);
            }
        }
        *o = acc;
    }
    out
}
