//! Ligand-receptor reception: binding probability, binomial bound counts and
//! threshold decisions.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};

/// Competing molecule around a receptor group: its concentration and the
/// dissociation constant of the blocking reaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blocker {
    pub concentration: f64,
    pub kappa_block: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BindingContext {
    pub own_concentration: f64,
    pub blockers: Vec<Blocker>,
    pub kappa_d: f64,
    pub n_receptors: u32,
}

impl BindingContext {
    pub fn unblocked(own_concentration: f64, kappa_d: f64, n_receptors: u32) -> Self {
        BindingContext {
            own_concentration,
            blockers: Vec::new(),
            kappa_d,
            n_receptors,
        }
    }

    pub fn with_blocker(mut self, concentration: f64, kappa_block: f64) -> Self {
        self.blockers.push(Blocker {
            concentration,
            kappa_block,
        });
        self
    }
}

/// Steady-state probability that a receptor is bound by its own molecule.
pub fn binding_probability(ctx: &BindingContext) -> f64 {
    let c = ctx.own_concentration;
    if c <= 0.0 {
        return 0.0;
    }
    let blocked: f64 = ctx
        .blockers
        .iter()
        .map(|b| ctx.kappa_d * b.concentration / b.kappa_block)
        .sum();
    c / (c + blocked + ctx.kappa_d)
}

/// Binomial(n, p) mass at `y`.
pub fn bound_count_pmf(n: u32, p: f64, y: u32) -> Result<f64> {
    if y > n {
        return Err(Error::CountOutOfRange { y, n });
    }
    Ok(pmf_unchecked(n, p, y))
}

fn pmf_unchecked(n: u32, p: f64, y: u32) -> f64 {
    if p <= 0.0 {
        return if y == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if y == n { 1.0 } else { 0.0 };
    }
    let ln = ln_binomial(n as u64, y as u64) + y as f64 * p.ln() + (n - y) as f64 * (-p).ln_1p();
    ln.exp()
}

/// (1 - p)^n without cancellation for small p.
pub fn prob_all_unbound(n: u32, p: f64) -> f64 {
    if p >= 1.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (n as f64 * (-p).ln_1p()).exp()
}

/// 1 - (1 - p)^n without cancellation for small p.
pub fn prob_any_bound(n: u32, p: f64) -> f64 {
    if p >= 1.0 {
        return if n == 0 { 0.0 } else { 1.0 };
    }
    -(n as f64 * (-p).ln_1p()).exp_m1()
}

/// Compensated (Neumaier) sum.
pub(crate) fn neumaier_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in terms {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Tail masses of Binomial(n, p) split at an integer threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tail {
    /// P{Y ≤ τ}
    pub at_most: f64,
    /// P{Y > τ}
    pub above: f64,
}

pub fn bound_count_tail(n: u32, p: f64, tau: i64) -> Tail {
    if tau < 0 {
        return Tail {
            at_most: 0.0,
            above: 1.0,
        };
    }
    if tau >= n as i64 {
        return Tail {
            at_most: 1.0,
            above: 0.0,
        };
    }
    if tau == 0 {
        return Tail {
            at_most: prob_all_unbound(n, p),
            above: prob_any_bound(n, p),
        };
    }
    let t = tau as u32;
    // both sides summed directly so that tiny tails keep full relative accuracy
    let at_most = neumaier_sum((0..=t).map(|y| pmf_unchecked(n, p, y)));
    let above = neumaier_sum((t + 1..=n).map(|y| pmf_unchecked(n, p, y)));
    Tail { at_most, above }
}

/// Integer cut equivalent to a real threshold under the strict rule Y > τ.
pub fn integer_threshold(tau: f64) -> i64 {
    if tau.is_nan() {
        return 0;
    }
    tau.floor().clamp(-1.0, i64::MAX as f64) as i64
}

/// P{Y ≤ τ} and P{Y > τ} for a real-valued threshold.
pub fn bound_count_tail_real(n: u32, p: f64, tau: f64) -> Tail {
    bound_count_tail(n, p, integer_threshold(tau))
}

pub fn sample_bound_count<R: Rng + ?Sized>(n: u32, p: f64, rng: &mut R) -> u32 {
    if p <= 0.0 || n == 0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    let dist = Binomial::new(n as u64, p).expect("p lies in (0, 1)");
    dist.sample(rng) as u32
}

/// Decodes 1 iff the bound count strictly exceeds the threshold.
pub fn threshold_decode(y: u32, tau: f64) -> u8 {
    u8::from(y as f64 > tau)
}
