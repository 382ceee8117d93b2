//! Concrete machines: run races, one-counting, prefix storage and the
//! two-state last-bit tester.

use crate::model::{Hypothesis, HypothesisPair, Machine};
use crate::{Error, Result};

use Hypothesis::{H0, H1};

/// Largest prefix depth accepted by [`store_bits_machine`].
pub const MAX_STORED_BITS: usize = 20;

/// Race between `a = S - s` consecutive ones and `b = s - 1` consecutive
/// zeros.
///
/// `s` is the 1-indexed starting label; in the returned machine label `j`
/// is state `j - 1`. The top state (label `S`) decides `H0`, the bottom
/// state (label 1) decides `H1`, and the transient interior decides `H0`.
pub fn run_machine(states: usize, s: usize) -> Result<Machine> {
    if states < 3 || s < 2 || s > states - 1 {
        return Err(Error::invalid(format!("run machine needs S >= 3 and 2 <= s <= S-1, got S={states}, s={s}")));
    }
    let idx = |label: usize| label - 1;
    let mut transitions = vec![[0usize; 2]; states];
    transitions[idx(1)] = [idx(1), idx(1)];
    transitions[idx(states)] = [idx(states), idx(states)];
    // zero run in progress (or at the start): 0 extends it, 1 starts a one run
    for j in 2..=s {
        transitions[idx(j)] = [idx(j - 1), idx(s + 1)];
    }
    // one run in progress: 1 extends it, 0 starts a zero run
    for j in s + 1..states {
        transitions[idx(j)] = [idx(s - 1), idx(j + 1)];
    }
    let mut decision = vec![H0; states];
    decision[idx(1)] = H1;
    Machine::new(transitions, decision, idx(s))
}

/// Unrounded starting label that balances the two error terms of the run
/// machine (base-2 logarithms).
pub fn s_star_raw(states: usize, pair: &HypothesisPair) -> f64 {
    let (p, q) = (pair.p(), pair.q());
    let lp = (p * (1.0 - p)).log2();
    let lq = (q * (1.0 - q)).log2();
    let slope = (p * q).log2() / (lp + lq);
    let offset = (((1.0 - q).powi(2) / q * lq) / (p / (1.0 - p).powi(2) * lp)).log2();
    slope * states as f64 + offset
}

/// [`s_star_raw`] rounded half away from zero and clamped to `[2, S-1]`.
pub fn s_star(states: usize, pair: &HypothesisPair) -> Result<usize> {
    if states < 3 {
        return Err(Error::invalid(format!("run machine needs S >= 3, got {states}")));
    }
    let r = s_star_raw(states, pair).round();
    Ok(r.clamp(2.0, (states - 1) as f64) as usize)
}

/// A counting machine and its state count.
#[derive(Debug, Clone, PartialEq)]
pub struct CountOnes {
    pub machine: Machine,
    /// Number of ones that triggers acceptance, `t k - 1`.
    pub threshold: usize,
    pub num_states: usize,
}

/// Decide whether `k` bits contain at least `t k - 1` ones.
///
/// States `(n, j)` record `n` bits seen and `j < threshold` ones among them,
/// laid out by `n` then `j`, followed by the accept (`H0`) and reject (`H1`)
/// absorbers. Reaching the threshold jumps to accept; finishing `k` bits
/// below it jumps to reject.
pub fn count_ones_machine(k: usize, t: f64) -> Result<CountOnes> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be at least 2, got {k}")));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::invalid(format!("t must lie in (0, 1), got {t}")));
    }
    let tk = t * k as f64;
    let tk_int = tk.round();
    if (tk - tk_int).abs() > 1e-9 {
        return Err(Error::invalid(format!("t k must be an integer, got {tk}")));
    }
    let threshold = (tk_int as usize).checked_sub(1).ok_or_else(|| Error::invalid("threshold t k - 1 is negative"))?;

    // offset[n] = index of (n, 0)
    let width = |n: usize| if threshold == 0 { 0 } else { n.min(threshold - 1) + 1 };
    let mut offset = Vec::with_capacity(k + 1);
    let mut layered = 0;
    for n in 0..k {
        offset.push(layered);
        layered += width(n);
    }
    let accept = layered;
    let reject = layered + 1;
    let total = layered + 2;

    let mut transitions = vec![[0usize; 2]; total];
    for n in 0..k {
        for j in 0..width(n) {
            let next = |ones: usize| {
                if ones == threshold {
                    accept
                } else if n + 1 == k {
                    reject
                } else {
                    offset[n + 1] + ones
                }
            };
            transitions[offset[n] + j] = [next(j), next(j + 1)];
        }
    }
    transitions[accept] = [accept, accept];
    transitions[reject] = [reject, reject];
    let mut decision = vec![H0; total];
    decision[reject] = H1;
    let initial = if threshold == 0 { accept } else { 0 };
    let machine = Machine::new(transitions, decision, initial)?;
    Ok(CountOnes { machine, threshold, num_states: total })
}

/// Likelihood-ratio label for a prefix with `ones` ones out of `len` bits;
/// ties go to `H1`.
fn lrt_label(ones: usize, len: usize, pair: &HypothesisPair) -> Hypothesis {
    let zeros = (len - ones) as f64;
    let ones = ones as f64;
    let l0 = ones * pair.p().ln() + zeros * (1.0 - pair.p()).ln();
    let l1 = ones * pair.q().ln() + zeros * (1.0 - pair.q()).ln();
    let tol = 1e-12 * (l0.abs() + l1.abs());
    if l0 > l1 + tol {
        H0
    } else {
        H1
    }
}

/// Store the first `k` bits verbatim, then decide by likelihood ratio.
///
/// One state per prefix in heap order: the prefix of length `n` with value
/// `v` (first bit most significant) is state `2^n - 1 + v`. Leaves absorb.
pub fn store_bits_machine(k: usize, pair: &HypothesisPair) -> Result<Machine> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > MAX_STORED_BITS {
        return Err(Error::ResourceLimit(format!(
            "storing {k} bits needs 2^{} states; limit is k <= {MAX_STORED_BITS}",
            k + 1
        )));
    }
    let total = (1usize << (k + 1)) - 1;
    let first_leaf = (1usize << k) - 1;
    let mut transitions = Vec::with_capacity(total);
    let mut decision = Vec::with_capacity(total);
    for i in 0..total {
        let len = (usize::BITS - 1 - (i + 1).leading_zeros()) as usize;
        let value = i + 1 - (1 << len);
        transitions.push(if i >= first_leaf { [i, i] } else { [2 * i + 1, 2 * i + 2] });
        decision.push(lrt_label(value.count_ones() as usize, len, pair));
    }
    Machine::new(transitions, decision, 0)
}

/// Two states remembering the most recent bit; a 1 decides `H0`.
pub fn last_bit_machine() -> Machine {
    Machine::new(vec![[0, 1], [0, 1]], vec![H1, H0], 0).expect("static machine is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_bits;

    fn pair(p: f64, q: f64) -> HypothesisPair {
        HypothesisPair::new(p, q).unwrap()
    }

    #[test]
    fn run_machine_layout() {
        let m = run_machine(3, 2).unwrap();
        assert_eq!(m.transitions(), &[[0, 0], [0, 2], [2, 2]]);
        assert_eq!(m.initial(), 1);
        assert_eq!(m.step(1, true).unwrap(), 2);

        let m = run_machine(4, 2).unwrap();
        assert_eq!(m.run_prefix(parse_bits("11").unwrap()), (3, H0));
        assert_eq!(m.run_prefix(parse_bits("0").unwrap()), (0, H1));
        assert_eq!(m.run_prefix(parse_bits("10").unwrap()), (0, H1));
        assert_eq!(m.run_prefix(parse_bits("1").unwrap()), (2, H0));

        // a = 2 ones vs b = 3 zeros from label 4 of 6
        let m = run_machine(6, 4).unwrap();
        assert_eq!(m.run_prefix(parse_bits("000").unwrap()).0, 0);
        assert_eq!(m.run_prefix(parse_bits("0011").unwrap()).0, 5);
        assert_eq!(m.run_prefix(parse_bits("00100").unwrap()).1, H0);
        assert_eq!(m.run_prefix(parse_bits("001000").unwrap()).0, 0);

        assert!(run_machine(2, 2).is_err());
        assert!(run_machine(5, 1).is_err());
        assert!(run_machine(5, 5).is_err());
    }

    #[test]
    fn s_star_values() {
        assert_eq!(s_star(20, &pair(0.9, 0.1)).unwrap(), 7);
        assert_eq!(s_star(10, &pair(0.75, 0.25)).unwrap(), 3);
        // raw value is negative here
        assert!(s_star_raw(6, &pair(0.9, 0.1)) < 0.0);
        assert_eq!(s_star(6, &pair(0.9, 0.1)).unwrap(), 2);
        assert!((s_star_raw(20, &pair(0.9, 0.1)) - (10.0 + 0.09f64.log2())).abs() < 1e-12);
        assert!(s_star(2, &pair(0.9, 0.1)).is_err());
    }

    #[test]
    fn count_ones_sizes() {
        let c = count_ones_machine(10, 0.5).unwrap();
        assert_eq!(c.threshold, 4);
        assert_eq!(c.num_states, 36);
        assert_eq!(count_ones_machine(6, 0.5).unwrap().num_states, 13);
        assert_eq!(count_ones_machine(14, 0.5).unwrap().num_states, 71);
        assert!(count_ones_machine(10, 0.25).is_err());
        assert!(count_ones_machine(1, 0.5).is_err());
        assert!(count_ones_machine(10, 1.0).is_err());
    }

    #[test]
    fn count_ones_decides_by_threshold() {
        let c = count_ones_machine(10, 0.5).unwrap();
        let m = &c.machine;
        // exhaustive over all 10-bit strings
        for v in 0u32..1 << 10 {
            let bits: Vec<bool> = (0..10).map(|i| v >> i & 1 == 1).collect();
            let (_, d) = m.run_prefix(bits);
            let expect = if v.count_ones() >= 4 { H0 } else { H1 };
            assert_eq!(d, expect, "input {v:010b}");
        }
    }

    #[test]
    fn count_ones_threshold_zero() {
        let c = count_ones_machine(2, 0.5).unwrap();
        assert_eq!(c.threshold, 0);
        let m = &c.machine;
        assert_eq!(m.run_prefix([]).1, H0);
        assert_eq!(m.run_prefix([false, false]).1, H0);
        assert_eq!(m.step(m.initial(), false).unwrap(), m.initial());
    }

    #[test]
    fn store_bits_layout() {
        let m = store_bits_machine(1, &pair(0.9, 0.1)).unwrap();
        assert_eq!(m.num_states(), 3);
        assert_eq!(m.run_prefix([true]).1, H0);
        assert_eq!(m.run_prefix([false]).1, H1);

        let m = store_bits_machine(2, &pair(0.9, 0.1)).unwrap();
        assert_eq!(m.num_states(), 7);
        assert_eq!(m.run_prefix(parse_bits("11").unwrap()).1, H0);
        assert_eq!(m.run_prefix(parse_bits("00").unwrap()).1, H1);
        assert_eq!(m.run_prefix(parse_bits("10").unwrap()).1, H1);
        assert_eq!(m.run_prefix(parse_bits("01").unwrap()).1, H1);
        // leaves absorb
        assert_eq!(m.run_prefix(parse_bits("110000").unwrap()).1, H0);
        assert!(m.is_canonical());

        assert!(store_bits_machine(0, &pair(0.9, 0.1)).is_err());
        assert!(matches!(store_bits_machine(21, &pair(0.9, 0.1)), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn last_bit() {
        let m = last_bit_machine();
        assert_eq!(m.run_prefix(parse_bits("0110").unwrap()), (0, H1));
    }
}
