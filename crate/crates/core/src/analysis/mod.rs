//! Analytical error probabilities of both schemes, with and without ISI.

mod groups;
mod no_isi;
mod noe;
mod phase2;
mod pnc_isi;
mod snc_isi;

use serde::Serialize;

pub use groups::{
    group_of, group_relay_error, group_relay_error_closed_form, group_relay_concentrations, Group,
    RelayParams, GROUPS,
};
pub use no_isi::{map_threshold_no_isi, pnc_no_isi, snc_no_isi};
pub use noe::{pnc_noe, snc_noe};
pub use phase2::{adaptive_threshold, adaptive_threshold_phase2, PhaseTwoBinding};
pub use pnc_isi::{pnc_isi_fixed_point, PncIsiReport};
pub use snc_isi::{
    snc_isi_fixed_point, snc_isi_release_distribution, snc_isi_threshold, snc_relay_errors, ReleaseAtoms,
    SncRelayAnalysis, DEFAULT_ATOM_DEPTH,
};

use crate::error::Result;
use crate::model::{Scheme, SystemModel};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Phase-1 conditional errors indexed `[b1][b2]`.
pub type PhaseOne = [[f64; 2]; 2];
/// Phase-2 conditional errors indexed `[transceiver][relay bit]`.
pub type PhaseTwo = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBreakdown {
    /// P(E_R | b1, b2).
    pub phase1: PhaseOne,
    /// P(E^{T_i} | B_R = b).
    pub phase2: PhaseTwo,
    pub pe: [f64; 2],
    pub avg_bep: f64,
    /// Iterations the steady-state solver needed (0 for closed forms).
    pub iterations: usize,
}

impl ErrorBreakdown {
    pub fn from_phases(phase1: PhaseOne, phase2: PhaseTwo) -> Self {
        let (pe, avg_bep) = combine_phases(&phase1, &phase2);
        ErrorBreakdown {
            phase1,
            phase2,
            pe,
            avg_bep,
            iterations: 0,
        }
    }
}

/// Per-transceiver end-to-end error and their mean, averaging over the
/// four equiprobable bit pairs.
pub fn combine_phases(phase1: &PhaseOne, phase2: &PhaseTwo) -> ([f64; 2], f64) {
    let mut pe = [0.0; 2];
    for (i, p) in pe.iter_mut().enumerate() {
        for b1 in 0..2 {
            for b2 in 0..2 {
                let x = b1 ^ b2;
                let relay = phase1[b1][b2];
                *p += 0.25 * (relay * (1.0 - phase2[i][1 - x]) + (1.0 - relay) * phase2[i][x]);
            }
        }
    }
    (pe, 0.5 * (pe[0] + pe[1]))
}

/// Probability that the relay forwards 0, given the phase-1 errors.
pub(crate) fn relay_zero_prior(phase1: &PhaseOne) -> f64 {
    0.25 * (2.0 - phase1[0][0] - phase1[1][1] + phase1[0][1] + phase1[1][0])
}

/// Analytical breakdown appropriate for the model: closed forms without
/// memory, the steady-state recursion otherwise.
pub fn analyze(model: &SystemModel, scheme: Scheme) -> Result<ErrorBreakdown> {
    if !model.adaptive() {
        return Ok(match scheme {
            Scheme::Pnc => pnc_no_isi(model),
            Scheme::Snc => snc_no_isi(model),
        });
    }
    match scheme {
        Scheme::Pnc => Ok(pnc_isi_fixed_point(model, DEFAULT_TOL, DEFAULT_MAX_ITER)?.breakdown),
        Scheme::Snc => snc_isi_fixed_point(model, DEFAULT_TOL, DEFAULT_MAX_ITER),
    }
}

/// NoE approximation of `[pe1, pe2]`; needs channel memory of at most one super slot.
pub fn noe(model: &SystemModel, scheme: Scheme) -> Result<[f64; 2]> {
    match scheme {
        Scheme::Pnc => pnc_noe(model),
        Scheme::Snc => snc_noe(model),
    }
}
