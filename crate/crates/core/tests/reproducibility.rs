use detmem::builders::{last_bit_machine, run_machine};
use detmem::chain::error_probability;
use detmem::search::optimal_error;
use detmem::sim::{simulate_bayes, simulate_time_average};
use detmem::{Hypothesis, HypothesisPair, Machine};

fn pair(p: f64, q: f64) -> HypothesisPair {
    HypothesisPair::new(p, q).unwrap()
}

#[test]
fn search_is_identical_across_worker_counts() {
    for (p, q) in [(0.9, 0.1), (0.75, 0.25)] {
        for s in 1..=4 {
            let one = optimal_error(s, &pair(p, q), 1).unwrap();
            for workers in [4, 8] {
                let other = optimal_error(s, &pair(p, q), workers).unwrap();
                assert_eq!(one, other);
                assert_eq!(one.pstar.to_bits(), other.pstar.to_bits());
                assert_eq!(
                    serde_json::to_string(&one.best_machine).unwrap(),
                    serde_json::to_string(&other.best_machine).unwrap()
                );
            }
        }
    }
}

#[test]
fn search_witness_reproduces_its_error() {
    let pr = pair(0.9, 0.1);
    let r = optimal_error(2, &pr, 1).unwrap();
    let exact = error_probability(&r.best_machine, &pr).unwrap().pe;
    assert!((exact - r.pstar).abs() < 1e-12);
    // behaves like the last-bit tester on every short input
    let lb = last_bit_machine();
    for v in 0u32..1 << 6 {
        let bits: Vec<bool> = (0..6).map(|i| v >> i & 1 == 1).collect();
        assert_eq!(r.best_machine.run_prefix(bits.clone()).1, lb.run_prefix(bits).1);
    }
}

#[test]
fn last_bit_under_h0() {
    let m = last_bit_machine();
    let r = simulate_time_average(&m, 0.9, Hypothesis::H0, 1_000_000, 20, 3, 2).unwrap();
    assert!((r.empirical_pe - 0.1).abs() <= 3.0 * r.std_error);
}

#[test]
fn run_machine_under_h1() {
    let m = run_machine(3, 2).unwrap();
    let r = simulate_time_average(&m, 0.1, Hypothesis::H1, 100_000, 400, 5, 2).unwrap();
    assert!((r.empirical_pe - 0.1).abs() <= 3.0 * r.std_error);
}

#[test]
fn bayes_estimates() {
    let lb = simulate_bayes(&last_bit_machine(), &pair(0.9, 0.1), 100_000, 20, 9, 1).unwrap();
    assert!((lb.combined.empirical_pe - 0.1).abs() <= 3.0 * lb.combined.std_error);

    let parity = Machine::new(vec![[0, 1], [1, 0]], vec![Hypothesis::H1, Hypothesis::H0], 0).unwrap();
    let r = simulate_bayes(&parity, &pair(0.7, 0.2), 100_000, 20, 9, 1).unwrap();
    assert!((r.combined.empirical_pe - 0.5).abs() <= 3.0 * r.combined.std_error);

    let run = run_machine(6, 3).unwrap();
    let r = simulate_bayes(&run, &pair(0.9, 0.1), 100_000, 400, 9, 1).unwrap();
    assert!((r.combined.empirical_pe - 0.017399).abs() <= 3.0 * r.combined.std_error);
}

#[test]
fn constant_machine_is_always_wrong_under_h1() {
    let m = Machine::new(vec![[0, 0]], vec![Hypothesis::H0], 0).unwrap();
    let r = simulate_time_average(&m, 0.3, Hypothesis::H1, 10_000, 5, 1, 1).unwrap();
    assert_eq!(r.empirical_pe, 1.0);
}

#[test]
fn same_seed_same_report() {
    let m = run_machine(5, 3).unwrap();
    let a = simulate_bayes(&m, &pair(0.8, 0.3), 5_000, 17, 77, 1).unwrap();
    let b = simulate_bayes(&m, &pair(0.8, 0.3), 5_000, 17, 77, 1).unwrap();
    assert_eq!(a, b);
}
