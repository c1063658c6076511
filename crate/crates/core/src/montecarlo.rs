//! Slot-level simulator of the full two-way system with error propagation.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{adaptive_threshold, snc_isi_threshold, DEFAULT_ATOM_DEPTH};
use crate::coding::{
    pnc_release, react_perfect, relay_step_pnc, relay_step_snc, snc_release, transceiver_recover, History,
    MediumSnapshot, RelayDecision, SchemeState,
};
use crate::config::unit_convert;
use crate::error::{Error, Result};
use crate::model::{Scheme, SystemModel};
use crate::reception::{binding_probability, sample_bound_count, threshold_decode, BindingContext};

/// Counted super slots per independently seeded block.
pub const BLOCK_SLOTS: u64 = 1 << 16;

/// Deepest relay→transceiver memory for which thresholds are tabulated.
const MAX_DOWNLINK_DEPTH: usize = 16;

/// Resolution of the release histogram, in units of the largest release.
const HISTOGRAM_SCALE: f64 = 1e9;

/// Everything that happened in one super slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialTrace {
    pub k: u64,
    pub bits: [u8; 2],
    /// Releases of T1, T2 and the relay (mol).
    pub releases: [f64; 3],
    pub medium: MediumSnapshot,
    /// Bound counts at relay groups 1, 2 and at T1, T2.
    pub bound: [u32; 4],
    pub relay_decoded: [u8; 2],
    pub relay_sent: u8,
    /// Relay bit as read by T1 and T2.
    pub transceiver_decoded: [u8; 2],
    /// Bit of the other transceiver recovered at T1 and T2.
    pub recovered: [u8; 2],
    pub errors: [bool; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    /// Counted super slots.
    pub trials: u64,
    pub seed: u64,
    /// Slots discarded at the start of every block; defaults to max(10, 2·depth).
    pub warmup: Option<u64>,
    /// Force every fed-back decision to be correct.
    pub genie: bool,
    /// Record the release histogram.
    pub histogram: bool,
    /// Keep the first this many counted slots as traces.
    pub trace_limit: usize,
}

impl SimOptions {
    pub fn new(trials: u64, seed: u64) -> Self {
        SimOptions {
            trials,
            seed,
            warmup: None,
            genie: false,
            histogram: false,
            trace_limit: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub scheme: Scheme,
    pub trials: u64,
    pub errors: [u64; 2],
    /// Slots in which the relay forwarded the wrong XOR.
    pub relay_errors: u64,
    pub pe: [f64; 2],
    pub avg_bep: f64,
    pub stderr: [f64; 2],
    /// Standard error of `avg_bep`, treating it as one proportion over `trials`.
    pub avg_stderr: f64,
    pub mean_release: [f64; 2],
    pub max_release: [f64; 2],
    /// Largest release the scheme can make, per transceiver.
    pub x_max: [f64; 2],
    /// Counts keyed by round(release / x_max · 1e9), per transceiver.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub histogram: Option<[BTreeMap<i64, u64>; 2]>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub traces: Vec<TrialTrace>,
}

/// Standard error of a binomial proportion.
pub fn binomial_stderr(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

impl SimReport {
    /// Total-variation distance between transceiver `i`'s release histogram
    /// and a discrete law given as (release, probability) pairs.
    pub fn release_tv_distance(&self, i: usize, law: &[(f64, f64)]) -> Option<f64> {
        let hist = self.histogram.as_ref()?;
        let mut expected: BTreeMap<i64, f64> = BTreeMap::new();
        for (x, w) in law {
            *expected.entry(histogram_key(*x, self.x_max[i])).or_default() += w;
        }
        let total = hist[i].values().sum::<u64>() as f64;
        let mut keys: Vec<i64> = hist[i].keys().chain(expected.keys()).copied().collect();
        keys.sort_unstable();
        keys.dedup();
        let dist = keys
            .iter()
            .map(|k| {
                let observed = hist[i].get(k).copied().unwrap_or(0) as f64 / total;
                (observed - expected.get(k).copied().unwrap_or(0.0)).abs()
            })
            .sum::<f64>();
        Some(0.5 * dist)
    }

    /// Writes the kept traces as one JSON object per line.
    pub fn write_traces<W: Write>(&self, mut out: W) -> Result<()> {
        for t in &self.traces {
            serde_json::to_writer(&mut out, t)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn histogram_key(x: f64, x_max: f64) -> i64 {
    if x_max > 0.0 {
        (x / x_max * HISTOGRAM_SCALE).round() as i64
    } else {
        0
    }
}

/// Per-run constants shared by every block.
struct Plan<'a> {
    model: &'a SystemModel,
    scheme: Scheme,
    adaptive: bool,
    genie: bool,
    histogram: bool,
    trace_limit: usize,
    warmup: u64,
    x_max: [f64; 2],
    relay_tau: [f64; 2],
    /// Transceiver thresholds indexed by the decoded relay history pattern.
    transceiver_tau: [Vec<f64>; 2],
    uplink: [usize; 2],
    downlink: [usize; 2],
}

impl<'a> Plan<'a> {
    fn new(model: &'a SystemModel, scheme: Scheme, opts: &SimOptions) -> Result<Self> {
        let adaptive = model.adaptive();
        let uplink = model.uplink_depth();
        let downlink = model.downlink_depth();
        if downlink.iter().any(|&q| q > MAX_DOWNLINK_DEPTH) {
            return Err(Error::Unsupported(format!(
                "relay→transceiver super-slot memory above {MAX_DOWNLINK_DEPTH}"
            )));
        }
        let relay_tau = match (scheme, adaptive) {
            (Scheme::Snc, true) => {
                let t = snc_isi_threshold(model, DEFAULT_ATOM_DEPTH)?;
                [t[0] as f64, t[1] as f64]
            }
            _ => [0.0, 0.0],
        };
        let transceiver_tau = [threshold_table(model, 0)?, threshold_table(model, 1)?];
        let depth = (uplink[0] + uplink[1]).max(downlink[0]).max(downlink[1]) as u64;
        Ok(Plan {
            model,
            scheme,
            adaptive,
            genie: opts.genie,
            histogram: opts.histogram,
            trace_limit: opts.trace_limit,
            warmup: opts.warmup.unwrap_or((2 * depth).max(10)),
            x_max: [model.x_max(scheme, 0), model.x_max(scheme, 1)],
            relay_tau,
            transceiver_tau,
            uplink,
            downlink,
        })
    }
}

/// Adaptive thresholds at transceiver `i` for every pattern of decoded relay
/// bits in its memory (bit l−1 holds the bit l super slots back).
fn threshold_table(model: &SystemModel, i: usize) -> Result<Vec<f64>> {
    let q = model.from_relay[i].super_memory();
    let n = model.cfg.transceiver_receptors[i];
    let kappa = model.transceiver_kappa();
    let bind = |c: f64| binding_probability(&BindingContext::unblocked(c, kappa, n));
    (0..1usize << q)
        .map(|pattern| {
            let isi: f64 = (1..=q)
                .filter(|l| pattern >> (l - 1) & 1 == 1)
                .map(|l| model.relay_arrival(i, l))
                .sum();
            let (p1, p0) = (bind(model.relay_arrival(i, 0) + isi), bind(isi));
            if p0 == 0.0 {
                Ok(0.0)
            } else {
                adaptive_threshold(p1, p0, n)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
struct BlockStats {
    trials: u64,
    errors: [u64; 2],
    relay_errors: u64,
    release_sum: [f64; 2],
    max_release: [f64; 2],
    histogram: [BTreeMap<i64, u64>; 2],
    traces: Vec<TrialTrace>,
}

impl BlockStats {
    fn merge(&mut self, other: BlockStats, trace_limit: usize) {
        self.trials += other.trials;
        for i in 0..2 {
            self.errors[i] += other.errors[i];
            self.release_sum[i] += other.release_sum[i];
            self.max_release[i] = self.max_release[i].max(other.max_release[i]);
            for (k, v) in &other.histogram[i] {
                *self.histogram[i].entry(*k).or_default() += v;
            }
        }
        self.relay_errors += other.relay_errors;
        let room = trace_limit.saturating_sub(self.traces.len());
        self.traces.extend(other.traces.into_iter().take(room));
    }
}

fn run_block(plan: &Plan, block: u64, slots: u64, seed: u64) -> Result<BlockStats> {
    let model = plan.model;
    let cfg = &model.cfg;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    let mut state = SchemeState::cold(plan.uplink, plan.downlink);
    let mut relay_history: History<f64> = History::new(plan.downlink[0].max(plan.downlink[1]));
    let mut stats = BlockStats::default();
    let signal = [model.target(plan.scheme); 2];
    let k0 = block * BLOCK_SLOTS;

    for step in 0..plan.warmup + slots {
        let counted = step >= plan.warmup;
        let k = k0 + step.saturating_sub(plan.warmup);
        let bits = [u8::from(rng.random_bool(0.5)), u8::from(rng.random_bool(0.5))];

        // transceiver releases
        let mut x = [0.0; 2];
        for i in 0..2 {
            x[i] = if !plan.adaptive {
                f64::from(bits[i]) * cfg.release.zeta_t[i]
            } else {
                let node = &state.transceivers[i];
                match plan.scheme {
                    Scheme::Snc => snc_release(bits[i], &node.releases, &model.to_relay[i], signal[i])?,
                    Scheme::Pnc => pnc_release(
                        bits[i],
                        &node.releases,
                        &node.decoded_other,
                        &model.to_relay[i],
                        &model.to_relay[1 - i],
                        signal[i],
                    ),
                }
            };
        }

        // relay side
        let mut pre = [0.0; 2];
        for i in 0..2 {
            let gains = &model.to_relay[i];
            let past = &state.transceivers[i].releases;
            pre[i] = unit_convert(x[i], gains.peak())
                + (1..=plan.uplink[i])
                    .map(|l| unit_convert(past.lag(l), gains.pi(2 * l + 1)))
                    .sum::<f64>();
        }
        let post = match plan.scheme {
            Scheme::Pnc => {
                let (a, b) = react_perfect(pre[0], pre[1]);
                [a, b]
            }
            Scheme::Snc => pre,
        };
        let mut y_relay = [0u32; 2];
        for i in 0..2 {
            let n = cfg.relay_receptors[i];
            let mut ctx = BindingContext::unblocked(post[i], model.relay_kappa(i), n);
            if let Some(kb) = cfg.blocking.kappa(i) {
                ctx = ctx.with_blocker(post[1 - i], kb);
            }
            y_relay[i] = sample_bound_count(n, binding_probability(&ctx), &mut rng);
        }
        let decision = match plan.scheme {
            Scheme::Pnc => relay_step_pnc(y_relay, plan.relay_tau),
            Scheme::Snc => Ok(relay_step_snc(y_relay, plan.relay_tau)),
        };

        let mut trace = TrialTrace {
            k,
            bits,
            releases: [x[0], x[1], 0.0],
            medium: MediumSnapshot {
                relay_pre: pre,
                relay_post: post,
                at_transceiver: [0.0; 2],
            },
            bound: [y_relay[0], y_relay[1], 0, 0],
            relay_decoded: [0; 2],
            relay_sent: 0,
            transceiver_decoded: [0; 2],
            recovered: [0; 2],
            errors: [false; 2],
        };
        let fail = |reason: String, trace: TrialTrace| Error::Simulation {
            reason,
            trace: Box::new(trace),
        };

        for i in 0..2 {
            if x[i] > plan.x_max[i] * (1.0 + 1e-12) {
                return Err(fail(
                    format!("T{} released {:e} mol above the bound {:e}", i + 1, x[i], plan.x_max[i]),
                    trace,
                ));
            }
        }
        if plan.scheme == Scheme::Pnc && post[0] > 0.0 && post[1] > 0.0 {
            return Err(fail("both molecule types survived the reaction".into(), trace));
        }
        let RelayDecision { decoded, sent } = match decision {
            Ok(d) => d,
            Err(e) => return Err(fail(e.to_string(), trace)),
        };
        let x3 = f64::from(sent) * cfg.release.zeta_r;
        trace.relay_decoded = decoded;
        trace.relay_sent = sent;
        trace.releases[2] = x3;

        // relay → transceivers
        let mut heard = [0u8; 2];
        for i in 0..2 {
            let gains = &model.from_relay[i];
            let conc = unit_convert(x3, gains.peak())
                + (1..=plan.downlink[i])
                    .map(|l| unit_convert(relay_history.lag(l), gains.pi(2 * l + 1)))
                    .sum::<f64>();
            let n = cfg.transceiver_receptors[i];
            let p = binding_probability(&BindingContext::unblocked(conc, model.transceiver_kappa(), n));
            let y = sample_bound_count(n, p, &mut rng);
            let node = &state.transceivers[i];
            let pattern = (1..=plan.downlink[i]).fold(0usize, |acc, l| acc | usize::from(node.decoded_relay.lag(l)) << (l - 1));
            heard[i] = threshold_decode(y, plan.transceiver_tau[i][pattern]);
            trace.medium.at_transceiver[i] = conc;
            trace.bound[2 + i] = y;
        }
        trace.transceiver_decoded = heard;
        let recovered = [transceiver_recover(bits[0], heard[0]), transceiver_recover(bits[1], heard[1])];
        trace.recovered = recovered;
        trace.errors = [recovered[0] != bits[1], recovered[1] != bits[0]];

        // feedback into node memories
        for i in 0..2 {
            let node = &mut state.transceivers[i];
            node.releases.push(x[i]);
            node.decoded_other.push(if plan.genie { bits[1 - i] } else { recovered[i] });
            node.decoded_relay.push(if plan.genie { sent } else { heard[i] });
        }
        relay_history.push(x3);

        if counted {
            stats.trials += 1;
            if sent != bits[0] ^ bits[1] {
                stats.relay_errors += 1;
            }
            for i in 0..2 {
                stats.errors[i] += u64::from(trace.errors[i]);
                stats.release_sum[i] += x[i];
                stats.max_release[i] = stats.max_release[i].max(x[i]);
                if plan.histogram {
                    *stats.histogram[i].entry(histogram_key(x[i], plan.x_max[i])).or_default() += 1;
                }
            }
            if stats.traces.len() < plan.trace_limit {
                stats.traces.push(trace);
            }
        }
    }
    Ok(stats)
}

fn block_sizes(trials: u64) -> Vec<u64> {
    let full = trials / BLOCK_SLOTS;
    let rest = trials % BLOCK_SLOTS;
    let mut v = vec![BLOCK_SLOTS; full as usize];
    if rest > 0 {
        v.push(rest);
    }
    v
}

fn finish(plan: &Plan, stats: BlockStats) -> SimReport {
    let n = stats.trials;
    let pe = stats.errors.map(|e| if n == 0 { 0.0 } else { e as f64 / n as f64 });
    let avg_bep = 0.5 * (pe[0] + pe[1]);
    SimReport {
        scheme: plan.scheme,
        trials: n,
        errors: stats.errors,
        relay_errors: stats.relay_errors,
        pe,
        avg_bep,
        stderr: pe.map(|p| binomial_stderr(p, n)),
        avg_stderr: binomial_stderr(avg_bep, n),
        mean_release: stats.release_sum.map(|s| if n == 0 { 0.0 } else { s / n as f64 }),
        max_release: stats.max_release,
        x_max: plan.x_max,
        histogram: plan.histogram.then_some(stats.histogram),
        traces: stats.traces,
    }
}

fn merge_all(plan: &Plan, parts: Vec<Result<BlockStats>>) -> Result<SimReport> {
    let mut total = BlockStats::default();
    for part in parts {
        total.merge(part?, plan.trace_limit);
    }
    Ok(finish(plan, total))
}

/// Runs the blocks one after another on the calling thread.
pub fn simulate(model: &SystemModel, scheme: Scheme, opts: &SimOptions) -> Result<SimReport> {
    let plan = Plan::new(model, scheme, opts)?;
    let parts = block_sizes(opts.trials)
        .into_iter()
        .enumerate()
        .map(|(b, n)| run_block(&plan, b as u64, n, opts.seed))
        .collect();
    merge_all(&plan, parts)
}

/// Same result as [`simulate`], spreading blocks over the current thread pool.
pub fn simulate_in_current_pool(model: &SystemModel, scheme: Scheme, opts: &SimOptions) -> Result<SimReport> {
    let plan = Plan::new(model, scheme, opts)?;
    let parts = block_sizes(opts.trials)
        .par_iter()
        .enumerate()
        .map(|(b, n)| run_block(&plan, b as u64, *n, opts.seed))
        .collect::<Vec<_>>();
    merge_all(&plan, parts)
}

/// Same result as [`simulate`], with blocks spread over `workers` threads.
pub fn simulate_parallel(model: &SystemModel, scheme: Scheme, opts: &SimOptions, workers: usize) -> Result<SimReport> {
    if workers <= 1 {
        return simulate(model, scheme, opts);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?;
    pool.install(|| simulate_in_current_pool(model, scheme, opts))
}
