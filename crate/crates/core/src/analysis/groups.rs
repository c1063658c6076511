//! Relay-side error of the reaction-based scheme under unit memory, split by
//! how the previous super slot was decoded at the transceivers.
//!
//! A group is identified by the decoding offsets `(e1, e2)` where
//! `e1 = b̂1 - b1'` is T2's error on T1's previous bit and likewise for `e2`.
//! After reaction only the difference
//! `c (b1 - b2) + c ν₂ e2 - c ν₁ e1` survives at the relay.

use crate::coding::react_perfect;
use crate::reception::{binding_probability, bound_count_tail, BindingContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Group {
    /// 1..=9 in the canonical order.
    pub index: usize,
    pub error_1: i8,
    pub error_2: i8,
}

const fn g(index: usize, error_1: i8, error_2: i8) -> Group {
    Group {
        index,
        error_1,
        error_2,
    }
}

pub const GROUPS: [Group; 9] = [
    g(1, 0, 0),
    g(2, 1, 0),
    g(3, 0, -1),
    g(4, 0, 1),
    g(5, -1, 0),
    g(6, 1, 1),
    g(7, -1, -1),
    g(8, 1, -1),
    g(9, -1, 1),
];

/// Group of a previous-slot outcome: true bits `prev` and the bits each
/// transceiver recovered for the other (`decoded[0]` is T1's bit as seen by T2).
pub fn group_of(prev: [u8; 2], decoded: [u8; 2]) -> Group {
    let e1 = decoded[0] as i8 - prev[0] as i8;
    let e2 = decoded[1] as i8 - prev[1] as i8;
    *GROUPS
        .iter()
        .find(|g| g.error_1 == e1 && g.error_2 == e2)
        .expect("every offset pair belongs to a group")
}

/// Static relay-side quantities the group errors depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayParams {
    /// Target concentration (mol/L).
    pub target: f64,
    /// ν₃ of T1→R and T2→R.
    pub nu: [f64; 2],
    pub kappa: [f64; 2],
    pub n: [u32; 2],
}

/// Post-reaction concentrations at the relay for group `g` and current bits.
pub fn group_relay_concentrations(g: Group, bits: [u8; 2], p: &RelayParams) -> (f64, f64) {
    let pos = |e: i8| f64::from(e.max(0));
    let neg = |e: i8| f64::from((-e).max(0));
    // leftovers not cancelled: an over-estimated bit of T1 makes T2 release
    // extra M2, an under-estimated one leaves M1 uncancelled; same for T2
    let pre1 = p.target * (f64::from(bits[0]) + p.nu[1] * pos(g.error_2) + p.nu[0] * neg(g.error_1));
    let pre2 = p.target * (f64::from(bits[1]) + p.nu[1] * neg(g.error_2) + p.nu[0] * pos(g.error_1));
    react_perfect(pre1, pre2)
}

/// Relay error for group `g` from its concentrations: binding probability,
/// then the zero-threshold binomial tails of both receptor groups.
pub fn group_relay_error(g: Group, bits: [u8; 2], p: &RelayParams) -> f64 {
    let (c1, c2) = group_relay_concentrations(g, bits, p);
    let tail = |j: usize, c: f64| {
        let pb = binding_probability(&BindingContext::unblocked(c, p.kappa[j], p.n[j]));
        bound_count_tail(p.n[j], pb, 0)
    };
    // at most one species survives, so the relay sends 1 iff that group fires
    let surviving = if c1 > 0.0 {
        Some(tail(0, c1))
    } else if c2 > 0.0 {
        Some(tail(1, c2))
    } else {
        None
    };
    match (bits[0] ^ bits[1] == 1, surviving) {
        (true, Some(t)) => t.at_most,
        (true, None) => 1.0,
        (false, Some(t)) => t.above,
        (false, None) => 0.0,
    }
}

/// Tabulated closed forms of the group errors.
pub fn group_relay_error_closed_form(g: Group, bits: [u8; 2], p: &RelayParams) -> f64 {
    // (κ_j / (a c + κ_j))^{n_j} and its complement, cancellation-free
    let log_miss = |j: usize, a: f64| -(p.n[j] as f64) * (a * p.target / p.kappa[j]).ln_1p();
    let miss = |j: usize, a: f64| log_miss(j, a).exp();
    let hit = |j: usize, a: f64| -log_miss(j, a).exp_m1();

    let (nu1, nu2) = (p.nu[0], p.nu[1]);
    let plus = nu1 + nu2;
    let mut minus = nu1 - nu2;
    let mut index = g.index;
    // the table is written for ν₋ ≥ 0; the other sign swaps groups 6 and 7
    if minus < 0.0 && (index == 6 || index == 7) {
        minus = -minus;
        index = 13 - index;
    }
    let row: [f64; 3] = match index {
        1 => [0.0, miss(0, 1.0), miss(1, 1.0)],
        2 => [hit(1, nu1), miss(0, 1.0 - nu1), miss(1, 1.0 + nu1)],
        3 => [hit(1, nu2), miss(0, 1.0 - nu2), miss(1, 1.0 + nu2)],
        4 => [hit(0, nu2), miss(0, 1.0 + nu2), miss(1, 1.0 - nu2)],
        5 => [hit(0, nu1), miss(0, 1.0 + nu1), miss(1, 1.0 - nu1)],
        6 => [hit(1, minus), miss(0, 1.0 - minus), miss(1, 1.0 + minus)],
        7 => [hit(0, minus), miss(0, 1.0 + minus), miss(1, 1.0 - minus)],
        8 => [
            hit(1, plus),
            if plus < 1.0 { miss(0, 1.0 - plus) } else { miss(1, plus - 1.0) },
            miss(1, 1.0 + plus),
        ],
        9 => [
            hit(0, plus),
            miss(0, 1.0 + plus),
            if plus < 1.0 { miss(1, 1.0 - plus) } else { miss(0, plus - 1.0) },
        ],
        _ => unreachable!("group index out of range"),
    };
    match bits {
        [0, 0] | [1, 1] => row[0],
        [1, 0] => row[1],
        _ => row[2],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const KD: f64 = 2.5e-7;

    fn params(nu: [f64; 2]) -> RelayParams {
        RelayParams {
            target: 1.3e-8,
            nu,
            kappa: [KD, KD],
            n: [250, 250],
        }
    }

    #[test]
    fn sixteen_cases_partition() {
        let mut count = [0usize; 10];
        for code in 0..16u8 {
            let b = |k: u8| (code >> k) & 1;
            count[group_of([b(0), b(1)], [b(2), b(3)]).index] += 1;
        }
        assert_eq!(count, [0, 4, 2, 2, 2, 2, 1, 1, 1, 1]);
        assert_eq!(group_of([0, 0], [1, 0]).index, 2);
        assert_eq!(group_of([1, 1], [1, 0]).index, 3);
        assert_eq!(group_of([1, 0], [0, 1]).index, 9);
    }

    #[test]
    fn clean_group_is_plain_signal() {
        let p = params([0.1, 0.2]);
        assert_eq!(group_relay_concentrations(GROUPS[0], [1, 0], &p), (p.target, 0.0));
        assert_eq!(group_relay_concentrations(GROUPS[0], [1, 1], &p), (0.0, 0.0));
    }

    #[test]
    fn group_two_printed_values() {
        let p = params([0.12, 0.07]);
        let g2 = GROUPS[1];
        let (c1, c2) = group_relay_concentrations(g2, [0, 0], &p);
        assert_eq!(c1, 0.0);
        assert!((c2 - 0.12 * p.target).abs() < 1e-24);
        let expected = (KD / ((1.0 - 0.12) * p.target + KD)).powi(250);
        let got = group_relay_error_closed_form(g2, [1, 0], &p);
        assert!((got - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn no_memory_collapses_to_clean_group() {
        let p = params([0.0, 0.0]);
        for g in GROUPS {
            for bits in [[0, 0], [1, 0], [0, 1], [1, 1]] {
                let a = group_relay_error(g, bits, &p);
                let b = group_relay_error(GROUPS[0], bits, &p);
                assert!((a - b).abs() <= 1e-15 * b.max(1e-300));
            }
        }
    }

    #[test]
    fn large_sum_branch() {
        let p = params([0.6, 0.55]);
        for bits in [[1, 0], [0, 1]] {
            for g in [GROUPS[7], GROUPS[8]] {
                let a = group_relay_error(g, bits, &p);
                let b = group_relay_error_closed_form(g, bits, &p);
                assert!((a - b).abs() <= 1e-12 * b, "{} {bits:?}", g.index);
            }
        }
    }

    proptest! {
        #[test]
        fn closed_form_matches_concentrations(
            nu1 in 0.0f64..0.95,
            nu2 in 0.0f64..0.95,
            target in 1e-10f64..1e-6,
            k1 in 1e-8f64..1e-6,
            k2 in 1e-8f64..1e-6,
            n1 in 1u32..400,
            n2 in 1u32..400,
        ) {
            let p = RelayParams { target, nu: [nu1, nu2], kappa: [k1, k2], n: [n1, n2] };
            for g in GROUPS {
                for bits in [[0, 0], [1, 0], [0, 1], [1, 1]] {
                    let a = group_relay_error(g, bits, &p);
                    let b = group_relay_error_closed_form(g, bits, &p);
                    prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300),
                        "group {} bits {:?}: {} vs {}", g.index, bits, a, b);
                }
            }
        }
    }
}
