//! Closed forms without channel memory.

use super::{ErrorBreakdown, PhaseOne, PhaseTwo};
use crate::model::{Scheme, SystemModel};
use crate::reception::{binding_probability, prob_all_unbound, BindingContext};

/// Phase-2 errors with a memoryless relay→transceiver hop and zero threshold.
pub(crate) fn phase2_no_isi(model: &SystemModel) -> PhaseTwo {
    let mut out = [[0.0; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        let n = model.cfg.transceiver_receptors[i];
        let p = binding_probability(&BindingContext::unblocked(
            model.relay_arrival(i, 0),
            model.transceiver_kappa(),
            n,
        ));
        row[1] = prob_all_unbound(n, p);
    }
    out
}

/// P(relay group i misses a lone signal) under the reaction-based scheme.
pub(crate) fn pnc_relay_miss(model: &SystemModel, i: usize) -> f64 {
    let n = model.cfg.relay_receptors[i];
    let p = binding_probability(&BindingContext::unblocked(
        model.signal_concentration(Scheme::Pnc, i),
        model.relay_kappa(i),
        n,
    ));
    prob_all_unbound(n, p)
}

pub(crate) fn pnc_phase1_no_isi(model: &SystemModel) -> PhaseOne {
    let mut p = [[0.0; 2]; 2];
    p[1][0] = pnc_relay_miss(model, 0);
    p[0][1] = pnc_relay_miss(model, 1);
    p
}

pub fn pnc_no_isi(model: &SystemModel) -> ErrorBreakdown {
    ErrorBreakdown::from_phases(pnc_phase1_no_isi(model), phase2_no_isi(model))
}

/// Binding probability of relay group `i` under the straightforward scheme
/// given both relay-side concentrations.
pub(crate) fn snc_relay_binding(model: &SystemModel, i: usize, conc: [f64; 2]) -> f64 {
    let mut ctx = BindingContext::unblocked(conc[i], model.relay_kappa(i), model.cfg.relay_receptors[i]);
    if let Some(kb) = model.cfg.blocking.kappa(i) {
        ctx = ctx.with_blocker(conc[1 - i], kb);
    }
    binding_probability(&ctx)
}

/// Independent decoding of both groups; the XOR is wrong iff exactly one is.
pub(crate) fn xor_error(a: f64, b: f64) -> f64 {
    a * (1.0 - b) + (1.0 - a) * b
}

pub fn snc_no_isi(model: &SystemModel) -> ErrorBreakdown {
    let mut phase1 = [[0.0; 2]; 2];
    for b1 in 0..2 {
        for b2 in 0..2 {
            let bits = [b1, b2];
            let conc = [
                bits[0] as f64 * model.signal_concentration(Scheme::Snc, 0),
                bits[1] as f64 * model.signal_concentration(Scheme::Snc, 1),
            ];
            let mut miss = [0.0; 2];
            for i in 0..2 {
                if bits[i] == 1 {
                    let p = snc_relay_binding(model, i, conc);
                    miss[i] = prob_all_unbound(model.cfg.relay_receptors[i], p);
                }
            }
            phase1[b1][b2] = xor_error(miss[0], miss[1]);
        }
    }
    ErrorBreakdown::from_phases(phase1, phase2_no_isi(model))
}

/// MAP threshold when silence produces no bound receptors. `priors` is
/// `[P(B=0), P(B=1)]`; thresholds are clamped at 0.
pub fn map_threshold_no_isi(priors: [f64; 2], pmf0: &[f64], pmf1: &[f64]) -> i64 {
    pmf0.iter()
        .zip(pmf1)
        .position(|(p0, p1)| priors[1] * p1 > priors[0] * p0)
        .map(|y| (y as i64 - 1).max(0))
        .unwrap_or(0)
}
