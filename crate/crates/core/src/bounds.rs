//! Closed-form bounds and exponents. All logarithms are base 2.
//!
//! Quantities that decay exponentially in the number of states are evaluated
//! in the log domain and only exponentiated at the end, so they stay
//! comparable well past the point where a direct product would underflow.

use serde::Serialize;

use crate::builders::s_star;
use crate::model::HypothesisPair;
use crate::{Error, Result};

/// Logarithm base used by every exponent in this crate.
pub const LOG_BASE: u32 = 2;

/// `log2(2^a + 2^b)`, exact when either side is `-inf`.
fn log2_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (1.0 + (lo - hi).exp2()).log2()
}

/// `log2(1 - 2^x)` for `x <= 0`.
fn log2_one_minus_exp2(x: f64) -> f64 {
    (-(x * std::f64::consts::LN_2).exp_m1()).ln() / std::f64::consts::LN_2
}

/// Upper bound exponent on deterministic machines:
/// `-(log a * log b) / (log a + log b)` with `a = min(p,1-p)`, `b = min(q,1-q)`.
pub fn d_exponent(pair: &HypothesisPair) -> f64 {
    let a = pair.min_step_h0().log2();
    let b = pair.min_step_h1().log2();
    -(a * b) / (a + b)
}

/// Exponent achieved by the run machine:
/// `(log p log(1-q) - log q log(1-p)) / (log p(1-p) + log q(1-q))`.
pub fn r_exponent(pair: &HypothesisPair) -> f64 {
    let (p, q) = (pair.p(), pair.q());
    let num = p.log2() * (1.0 - q).log2() - q.log2() * (1.0 - p).log2();
    let den = (p * (1.0 - p)).log2() + (q * (1.0 - q)).log2();
    num / den
}

/// `log2` of `(1 + gamma^((S-1)/2))^-1`.
pub fn randomized_lower_bound_log2(states: usize, pair: &HypothesisPair) -> f64 {
    let y = 0.5 * (states as f64 - 1.0) * pair.gamma().log2();
    -log2_add(0.0, y)
}

/// Best error any `S`-state machine can reach, even with randomized
/// transitions.
pub fn randomized_lower_bound(states: usize, pair: &HypothesisPair) -> f64 {
    randomized_lower_bound_log2(states, pair).exp2()
}

/// `log2` of the irreducible-machine converse, maximized by a direct scan
/// over the split index.
pub fn ergodic_converse_bound_log2(states: usize, pair: &HypothesisPair) -> f64 {
    let a = pair.min_step_h0().log2();
    let b = pair.min_step_h1().log2();
    let best =
        (1..=states).map(|i| ((i - 1) as f64 * a).min((states - i) as f64 * b)).fold(f64::NEG_INFINITY, f64::max);
    best - (states as f64).log2()
}

/// `(1/S) max_i min{ min(p,1-p)^(i-1), min(q,1-q)^(S-i) }`.
pub fn ergodic_converse_bound(states: usize, pair: &HypothesisPair) -> f64 {
    ergodic_converse_bound_log2(states, pair).exp2()
}

/// Absorption probabilities of the run machine started at `s` (1-indexed),
/// and its error.
///
/// `p00`/`p01`: absorbed in the top state (decide `H0`) under `H0`/`H1`;
/// `p10`/`p11`: absorbed in the bottom state under `H0`/`H1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunClosedForm {
    pub p00: f64,
    pub p10: f64,
    pub p01: f64,
    pub p11: f64,
    pub pe: f64,
    pub log2_pe: f64,
}

/// `(log2 Pr(a ones first), log2 Pr(b zeros first))` for `Bern(x)` bits.
fn run_race_log2(x: f64, a: usize, b: usize) -> (f64, f64) {
    let lx = x.log2();
    let ly = (1.0 - x).log2();
    let ea = (a - 1) as f64 * lx;
    let eb = (b - 1) as f64 * ly;
    // x^(a-1) + y^(b-1) - x^(a-1) y^(b-1) = x^(a-1) + y^(b-1) (1 - x^(a-1))
    let den = log2_add(ea, eb + log2_one_minus_exp2(ea));
    let ones_first = ea + log2_one_minus_exp2(b as f64 * ly) - den;
    let zeros_first = eb + log2_one_minus_exp2(a as f64 * lx) - den;
    (ones_first, zeros_first)
}

pub fn run_machine_closed_form(states: usize, s: usize, pair: &HypothesisPair) -> Result<RunClosedForm> {
    if states < 3 || s < 2 || s > states - 1 {
        return Err(Error::invalid(format!("run machine needs S >= 3 and 2 <= s <= S-1, got S={states}, s={s}")));
    }
    let a = states - s;
    let b = s - 1;
    let (l00, l10) = run_race_log2(pair.p(), a, b);
    let (l01, l11) = run_race_log2(pair.q(), a, b);
    let log2_pe = log2_add(l01, l10) - 1.0;
    Ok(RunClosedForm {
        p00: l00.exp2(),
        p10: l10.exp2(),
        p01: l01.exp2(),
        p11: l11.exp2(),
        pe: log2_pe.exp2(),
        log2_pe,
    })
}

/// `c = log2[ (1-p)^2 (1-q)^2 log q(1-q) / (p q log p(1-p)) ]`.
pub fn c_constant(pair: &HypothesisPair) -> f64 {
    let (p, q) = (pair.p(), pair.q());
    let lp = (p * (1.0 - p)).log2();
    let lq = (q * (1.0 - q)).log2();
    ((1.0 - p).powi(2) * (1.0 - q).powi(2) * lq / (p * q * lp)).log2()
}

/// Unclamped `log2` of the run machine upper bound at `S` states.
pub fn theorem2_upper_bound_log2(states: usize, pair: &HypothesisPair) -> f64 {
    let (p, q) = (pair.p(), pair.q());
    let c = c_constant(pair);
    let first = (1.0 + c) * p.log2() - (2.0 - c) * (1.0 - p).log2();
    let second = (1.0 + c) * (1.0 - q).log2() - (2.0 - c) * q.log2();
    first.max(second) - r_exponent(pair) * (states as f64 - 1.0)
}

/// Upper bound on the error of the run machine at `s*`, clamped at 1.
pub fn theorem2_upper_bound(states: usize, pair: &HypothesisPair) -> f64 {
    theorem2_upper_bound_log2(states, pair).min(0.0).exp2()
}

/// Chernoff information between `Bern(p)` and `Bern(q)` in bits, for any
/// `p, q` in `(0, 1)`.
pub fn bernoulli_chernoff(p: f64, q: f64) -> f64 {
    let f = |l: f64| -(p.powf(l) * q.powf(1.0 - l) + (1.0 - p).powf(l) * (1.0 - q).powf(1.0 - l)).log2();
    // f is concave in lambda
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-10 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    f(0.5 * (lo + hi)).max(0.0)
}

pub fn chernoff_information(pair: &HypothesisPair) -> f64 {
    bernoulli_chernoff(pair.p(), pair.q())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapRow {
    pub p: f64,
    pub q: f64,
    pub d_exp: f64,
    pub r_exp: f64,
    pub target: f64,
}

/// Both exponents along `p -> 1` with `q < 1/2` fixed; the limit is `-log2 q`.
pub fn corollary_gap(q_fixed: f64, p_sequence: &[f64]) -> Result<Vec<GapRow>> {
    if !(q_fixed > 0.0 && q_fixed < 0.5) {
        return Err(Error::invalid(format!("fixed q must lie in (0, 1/2), got {q_fixed}")));
    }
    check_increasing(p_sequence)?;
    p_sequence
        .iter()
        .map(|&p| {
            let pair = HypothesisPair::new(p, q_fixed)?;
            Ok(GapRow { p, q: q_fixed, d_exp: d_exponent(&pair), r_exp: r_exponent(&pair), target: -q_fixed.log2() })
        })
        .collect()
}

/// Mirror image: `p > 1/2` fixed, `q -> 0`; the limit is `-log2 (1-p)`.
pub fn corollary_gap_mirrored(p_fixed: f64, q_sequence: &[f64]) -> Result<Vec<GapRow>> {
    if !(p_fixed > 0.5 && p_fixed < 1.0) {
        return Err(Error::invalid(format!("fixed p must lie in (1/2, 1), got {p_fixed}")));
    }
    let reversed: Vec<f64> = q_sequence.iter().rev().copied().collect();
    check_increasing(&reversed)?;
    q_sequence
        .iter()
        .map(|&q| {
            let pair = HypothesisPair::new(p_fixed, q)?;
            Ok(GapRow {
                p: p_fixed,
                q,
                d_exp: d_exponent(&pair),
                r_exp: r_exponent(&pair),
                target: -(1.0 - p_fixed).log2(),
            })
        })
        .collect()
}

fn check_increasing(xs: &[f64]) -> Result<()> {
    if xs.windows(2).all(|w| w[0] < w[1]) {
        Ok(())
    } else {
        Err(Error::invalid("sequence must move strictly toward the limit"))
    }
}

/// Every bound evaluated at one `(S, p, q)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    #[serde(rename = "S")]
    pub states: usize,
    pub p: f64,
    pub q: f64,
    pub d_exp: f64,
    pub r_exp: f64,
    pub randomized_lb: f64,
    pub ergodic_lb: f64,
    /// Exact error of the run machine at `s*`; absent for `S < 3`.
    pub run_ub_exact: Option<f64>,
    pub theorem2_ub: Option<f64>,
    pub s_star: Option<usize>,
    pub c_const: f64,
    pub chernoff: f64,
    pub log_base: u32,
}

pub fn bound_report(states: usize, pair: &HypothesisPair) -> Result<BoundReport> {
    if states == 0 {
        return Err(Error::invalid("S must be at least 1"));
    }
    let (run_ub_exact, theorem2_ub, star) = if states >= 3 {
        let s = s_star(states, pair)?;
        let cf = run_machine_closed_form(states, s, pair)?;
        (Some(cf.pe), Some(theorem2_upper_bound(states, pair)), Some(s))
    } else {
        (None, None, None)
    };
    Ok(BoundReport {
        states,
        p: pair.p(),
        q: pair.q(),
        d_exp: d_exponent(pair),
        r_exp: r_exponent(pair),
        randomized_lb: randomized_lower_bound(states, pair),
        ergodic_lb: ergodic_converse_bound(states, pair),
        run_ub_exact,
        theorem2_ub,
        s_star: star,
        c_const: c_constant(pair),
        chernoff: chernoff_information(pair),
        log_base: LOG_BASE,
    })
}
