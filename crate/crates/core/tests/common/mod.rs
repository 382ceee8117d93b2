//! Test-side reference computations, written without the library's solvers.
#![allow(dead_code)]

use detmem::{Hypothesis, HypothesisPair, Machine};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn dense_p(m: &Machine, theta: f64) -> Vec<Vec<f64>> {
    let n = m.num_states();
    let mut p = vec![vec![0.0; n]; n];
    for (i, row) in m.transitions().iter().enumerate() {
        p[i][row[0]] += 1.0 - theta;
        p[i][row[1]] += theta;
    }
    p
}

/// Gauss-Jordan elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        assert!(d.abs() > 0.0, "singular system in oracle");
        for r in 0..n {
            if r != col {
                let f = a[r][col] / d;
                if f != 0.0 {
                    let pivot_row = a[col].clone();
                    for (x, y) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                        *x -= f * y;
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    (0..n).map(|i| b[i] / a[i][i]).collect()
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] != 0.0 {
                for j in 0..n {
                    c[i][j] += a[i][k] * b[k][j];
                }
            }
        }
    }
    c
}

fn normalize_rows(a: &mut [Vec<f64>]) {
    for row in a {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= s);
    }
}

/// Row `init` of the Cesaro average `(1/n) sum_{k<n} P^k` with `n = 2^80`,
/// built by doubling: `A_2n = (A_n + A_n P^n) / 2`.
pub fn cesaro_limit(p: &[Vec<f64>], init: usize) -> Vec<f64> {
    let n = p.len();
    let mut avg: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let mut power = p.to_vec();
    for _ in 0..80 {
        let shifted = mat_mul(&avg, &power);
        for (row, srow) in avg.iter_mut().zip(&shifted) {
            for (x, y) in row.iter_mut().zip(srow) {
                *x = 0.5 * (*x + y);
            }
        }
        normalize_rows(&mut avg);
        power = mat_mul(&power, &power);
        normalize_rows(&mut power);
    }
    avg[init].clone()
}

/// Long-run Bayes error of `m` with its own decisions.
pub fn oracle_error(m: &Machine, pair: &HypothesisPair) -> f64 {
    let w0 = cesaro_limit(&dense_p(m, pair.p()), m.initial());
    let w1 = cesaro_limit(&dense_p(m, pair.q()), m.initial());
    let mut e = 0.0;
    for i in 0..m.num_states() {
        match m.decision_of(i) {
            Hypothesis::H0 => e += w1[i],
            Hypothesis::H1 => e += w0[i],
        }
    }
    0.5 * e
}

/// Best decision for `m`: `0.5 * sum_i min(w0_i, w1_i)`.
pub fn oracle_optimal_error(m: &Machine, pair: &HypothesisPair) -> f64 {
    let w0 = cesaro_limit(&dense_p(m, pair.p()), m.initial());
    let w1 = cesaro_limit(&dense_p(m, pair.q()), m.initial());
    0.5 * w0.iter().zip(&w1).map(|(a, b)| a.min(*b)).sum::<f64>()
}

/// Stationary vector of an irreducible chain from the linear system.
pub fn oracle_stationary(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    let mut a: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| p[j][i] - f64::from(u8::from(i == j))).collect()).collect();
    a[n - 1] = vec![1.0; n];
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    gauss_solve(a, b)
}

/// Strong connectivity by forward and reverse reachability from state 0.
pub fn is_irreducible(m: &Machine) -> bool {
    let n = m.num_states();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut stack = vec![0];
        while let Some(v) = stack.pop() {
            for (u, seen_u) in seen.iter_mut().enumerate() {
                let edge = if forward { m.transitions()[v].contains(&u) } else { m.transitions()[u].contains(&v) };
                if edge && !*seen_u {
                    *seen_u = true;
                    stack.push(u);
                }
            }
        }
        seen.iter().all(|&s| s)
    };
    reach(true) && reach(false)
}

pub fn random_machine(rng: &mut ChaCha8Rng, states: usize) -> Machine {
    let transitions = (0..states).map(|_| [rng.random_range(0..states), rng.random_range(0..states)]).collect();
    let decision = (0..states).map(|_| if rng.random_bool(0.5) { Hypothesis::H1 } else { Hypothesis::H0 }).collect();
    let initial = rng.random_range(0..states);
    Machine::new(transitions, decision, initial).unwrap()
}

pub fn random_irreducible(rng: &mut ChaCha8Rng, states: usize) -> Machine {
    loop {
        let m = random_machine(rng, states);
        if is_irreducible(&m) {
            return m;
        }
    }
}

pub fn random_pair(rng: &mut ChaCha8Rng) -> HypothesisPair {
    loop {
        let a: f64 = rng.random_range(0.02..0.98);
        let b: f64 = rng.random_range(0.02..0.98);
        if (a - b).abs() > 0.02 {
            return HypothesisPair::new(a.max(b), a.min(b)).unwrap();
        }
    }
}

/// Binomial-tail error of the likelihood-ratio test on `k` bits.
pub fn lrt_error(k: u32, pair: &HypothesisPair) -> f64 {
    let (p, q) = (pair.p(), pair.q());
    let mut binom = 1.0;
    let mut e = 0.0;
    for ones in 0..=k {
        if ones > 0 {
            binom = binom * f64::from(k - ones + 1) / f64::from(ones);
        }
        let zeros = (k - ones) as i32;
        let a = p.powi(ones as i32) * (1.0 - p).powi(zeros);
        let b = q.powi(ones as i32) * (1.0 - q).powi(zeros);
        e += binom * a.min(b);
    }
    0.5 * e
}

/// Probability that `a` consecutive ones appear before `b` consecutive
/// zeros, from first-step analysis on the current run.
pub fn run_race_oracle(x: f64, a: usize, b: usize) -> f64 {
    let y = 1.0 - x;
    let xa = x.powi(a as i32 - 1);
    let yb = y.powi(b as i32 - 1);
    // u: win probability right after a one that starts a run
    let u = xa / (1.0 - (1.0 - xa) * (1.0 - yb));
    // from the start a zero must not already finish the zero run
    x * u + y * (1.0 - yb) * u
}
