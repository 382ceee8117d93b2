//! Monte Carlo estimates of the time-average error.
//!
//! Trial `i` draws its bits from ChaCha8 seeded with `seed` on stream `i`, so
//! the per-trial sequence does not depend on how trials are split across
//! threads. Each 32-bit output is one Bernoulli draw: the bit is 1 when the
//! output is below `theta * 2^32`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::model::{Hypothesis, HypothesisPair, Machine};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub empirical_pe: f64,
    pub std_error: f64,
    pub steps: u64,
    pub trials: u64,
    pub seed: u64,
}

/// Equal-prior estimate together with its two conditional runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BayesReport {
    #[serde(flatten)]
    pub combined: SimulationReport,
    pub h0: SimulationReport,
    pub h1: SimulationReport,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed used for the run under hypothesis `h` in [`simulate_bayes`].
pub fn derived_seed(seed: u64, h: Hypothesis) -> u64 {
    splitmix64(seed ^ splitmix64(h.index() as u64 + 1))
}

/// Sum with a fixed binary split, so the rounding depends only on the order
/// of `xs`.
fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn summarize(averages: &[f64], steps: u64, seed: u64) -> SimulationReport {
    let t = averages.len() as f64;
    let mean = pairwise_sum(averages) / t;
    let std_error = if averages.len() < 2 {
        0.0
    } else {
        let dev: Vec<f64> = averages.iter().map(|a| (a - mean) * (a - mean)).collect();
        (pairwise_sum(&dev) / (t - 1.0)).sqrt() / t.sqrt()
    };
    SimulationReport { empirical_pe: mean, std_error, steps, trials: averages.len() as u64, seed }
}

struct Kernel {
    next: Vec<[u32; 2]>,
    wrong: Vec<bool>,
    initial: u32,
    threshold: u64,
}

impl Kernel {
    fn trial(&self, seed: u64, trial: u64, steps: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        let mut state = self.initial as usize;
        let mut errors = 0u64;
        let mut step = |word: u32| {
            let bit = (word as u64) < self.threshold;
            state = self.next[state][bit as usize] as usize;
            errors += self.wrong[state] as u64;
        };
        for _ in 0..steps / 2 {
            let w = rng.next_u64();
            step(w as u32);
            step((w >> 32) as u32);
        }
        if steps % 2 == 1 {
            step(rng.next_u32());
        }
        errors as f64 / steps as f64
    }
}

/// Average of `1{d(M_i) != truth}` over `i = 1..steps` for i.i.d.
/// Bernoulli(`theta`) input, estimated from `trials` independent runs.
pub fn simulate_time_average(
    m: &Machine,
    theta: f64,
    truth: Hypothesis,
    steps: u64,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<SimulationReport> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::invalid(format!("theta must lie in [0, 1], got {theta}")));
    }
    if steps == 0 || trials == 0 {
        return Err(Error::invalid("steps and trials must both be at least 1"));
    }
    if m.num_states() > u32::MAX as usize {
        return Err(Error::ResourceLimit("machine too large to simulate".into()));
    }
    let kernel = Kernel {
        next: m.transitions().iter().map(|r| [r[0] as u32, r[1] as u32]).collect(),
        wrong: m.decision().iter().map(|&d| d != truth).collect(),
        initial: m.initial() as u32,
        // theta = 1 gives 2^32, above every u32
        threshold: (theta * 4_294_967_296.0) as u64,
    };

    let mut averages = vec![0.0; trials as usize];
    let workers = workers.max(1);
    let chunk = averages.len().div_ceil(workers).max(1);
    std::thread::scope(|scope| {
        for (c, out) in averages.chunks_mut(chunk).enumerate() {
            let kernel = &kernel;
            scope.spawn(move || {
                let base = (c * chunk) as u64;
                for (k, slot) in out.iter_mut().enumerate() {
                    *slot = kernel.trial(seed, base + k as u64, steps);
                }
            });
        }
    });
    Ok(summarize(&averages, steps, seed))
}

/// Equal-prior error: half the `H0` run plus half the `H1` run, each with its
/// own [`derived_seed`].
pub fn simulate_bayes(
    m: &Machine,
    pair: &HypothesisPair,
    steps: u64,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<BayesReport> {
    let run = |h: Hypothesis| simulate_time_average(m, pair.theta(h), h, steps, trials, derived_seed(seed, h), workers);
    let h0 = run(Hypothesis::H0)?;
    let h1 = run(Hypothesis::H1)?;
    let combined = SimulationReport {
        empirical_pe: 0.5 * (h0.empirical_pe + h1.empirical_pe),
        std_error: 0.5 * h0.std_error.hypot(h1.std_error),
        steps,
        trials,
        seed,
    };
    Ok(BayesReport { combined, h0, h1 })
}
