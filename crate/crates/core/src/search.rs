//! Exhaustive search for the best deterministic `S`-state machine.
//!
//! Only transition tables in canonical (BFS from state 0) form with all `S`
//! states reachable are enumerated. Decision tables are not enumerated: for
//! a fixed transition table the optimal labeling follows from the long-run
//! occupancies.
//!
//! A flattened table `t = [f(0,0), f(0,1), f(1,0), ...]` is canonical with
//! all states reachable iff every entry is at most one more than the largest
//! label seen before it, and state `k` has been seen before row `k` starts.

use std::cmp::Ordering;

use serde::Serialize;

use crate::chain;
use crate::model::{HypothesisPair, Machine};
use crate::{Error, Result};

/// Default ceiling on `S` for exhaustive enumeration.
pub const DEFAULT_STATE_LIMIT: usize = 5;

/// Largest `S` accepted by [`naive_optimal_error`].
pub const NAIVE_STATE_LIMIT: usize = 3;

/// Canonical transition tables with exactly `S` reachable states, in
/// lexicographic order of the flattened table.
#[derive(Debug, Clone)]
pub struct CanonicalTables {
    states: usize,
    table: Vec<usize>,
    /// `prefix_max[j]` = largest label among `table[..j]` (and state 0).
    prefix_max: Vec<usize>,
    started: bool,
    done: bool,
}

impl CanonicalTables {
    fn new(states: usize) -> Self {
        CanonicalTables {
            states,
            table: vec![0; 2 * states],
            prefix_max: vec![0; 2 * states + 1],
            started: false,
            done: false,
        }
    }

    /// Move to the next complete table, starting by assigning position `j`
    /// (fresh when `fresh`, otherwise incrementing its current value).
    fn advance(&mut self, mut j: usize, mut fresh: bool) -> bool {
        let len = 2 * self.states;
        loop {
            if fresh {
                self.table[j] = 0;
            } else {
                self.table[j] += 1;
            }
            let cap = (self.prefix_max[j] + 1).min(self.states - 1);
            if self.table[j] > cap {
                if j == 0 {
                    return false;
                }
                j -= 1;
                fresh = false;
                continue;
            }
            self.prefix_max[j + 1] = self.prefix_max[j].max(self.table[j]);
            let next = j + 1;
            if next == len {
                return true;
            }
            // row `next / 2` is about to be read: its state must be discovered
            if next.is_multiple_of(2) && next / 2 > self.prefix_max[next] {
                fresh = false;
                continue;
            }
            j = next;
            fresh = true;
        }
    }
}

impl Iterator for CanonicalTables {
    type Item = Machine;

    fn next(&mut self) -> Option<Machine> {
        if self.done {
            return None;
        }
        let found = if self.started {
            self.advance(2 * self.states - 1, false)
        } else {
            self.started = true;
            self.advance(0, true)
        };
        if !found {
            self.done = true;
            return None;
        }
        let rows = self.table.chunks(2).map(|c| [c[0], c[1]]).collect();
        Some(Machine::unlabeled(rows, 0).expect("enumerated tables are valid"))
    }
}

/// Stream of canonical machines with exactly `states` reachable states.
/// Decisions are all `H0`; callers choose labels.
pub fn enumerate_canonical(states: usize, limit: usize) -> Result<CanonicalTables> {
    if states == 0 {
        return Err(Error::invalid("S must be at least 1"));
    }
    if states > limit {
        return Err(Error::ResourceLimit(format!(
            "exhaustive enumeration for S={states} exceeds the limit S <= {limit}"
        )));
    }
    Ok(CanonicalTables::new(states))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    #[serde(rename = "S")]
    pub states: usize,
    pub pstar: f64,
    /// Canonical witness carrying its optimal decision table.
    pub best_machine: Machine,
    /// Number of canonical machines evaluated.
    pub enumerated: u64,
}

/// Best (error, position) pair with a total order: lower error first, then
/// earlier position in the canonical stream.
#[derive(Debug, Clone, Copy)]
struct Best {
    pe: f64,
    position: usize,
}

impl Best {
    fn better(self, other: Best) -> Best {
        match self.pe.total_cmp(&other.pe).then(self.position.cmp(&other.position)) {
            Ordering::Greater => other,
            _ => self,
        }
    }
}

fn evaluate_chunk(machines: &[Machine], base: usize, pair: &HypothesisPair) -> Result<Option<Best>> {
    let mut best: Option<Best> = None;
    for (k, m) in machines.iter().enumerate() {
        let lr = chain::LongRun::compute(m, pair)?;
        let pe = lr.report(&lr.optimal_decision())?.pe;
        let cand = Best { pe, position: base + k };
        best = Some(match best {
            Some(b) => b.better(cand),
            None => cand,
        });
    }
    Ok(best)
}

/// `P*_e(S)` over all deterministic `S`-state machines, with a witness.
///
/// The canonical stream is split into `workers` contiguous chunks evaluated
/// on scoped threads; the merge is a total-order minimum, so the result is
/// identical for every worker count.
pub fn optimal_error_with_limit(
    states: usize,
    pair: &HypothesisPair,
    workers: usize,
    limit: usize,
) -> Result<SearchResult> {
    let machines: Vec<Machine> = enumerate_canonical(states, limit)?.collect();
    let workers = workers.max(1);
    let chunk = machines.len().div_ceil(workers).max(1);

    let partials: Vec<Result<Option<Best>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = machines
            .chunks(chunk)
            .enumerate()
            .map(|(c, slice)| scope.spawn(move || evaluate_chunk(slice, c * chunk, pair)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("search worker panicked")).collect()
    });

    let mut best: Option<Best> = None;
    for part in partials {
        if let Some(b) = part? {
            best = Some(match best {
                Some(cur) => cur.better(b),
                None => b,
            });
        }
    }
    let best = best.expect("at least one canonical machine exists for S >= 1");
    let (best_machine, report) = chain::optimize(&machines[best.position], pair)?;
    debug_assert_eq!(report.pe.to_bits(), best.pe.to_bits());
    Ok(SearchResult { states, pstar: best.pe, best_machine, enumerated: machines.len() as u64 })
}

pub fn optimal_error(states: usize, pair: &HypothesisPair, workers: usize) -> Result<SearchResult> {
    optimal_error_with_limit(states, pair, workers, DEFAULT_STATE_LIMIT)
}

/// Brute force over every transition table and every initial state, with no
/// canonical pruning. Used as an oracle for [`optimal_error`].
pub fn naive_optimal_error(states: usize, pair: &HypothesisPair) -> Result<f64> {
    if states == 0 {
        return Err(Error::invalid("S must be at least 1"));
    }
    if states > NAIVE_STATE_LIMIT {
        return Err(Error::ResourceLimit(format!("naive search is limited to S <= {NAIVE_STATE_LIMIT}, got {states}")));
    }
    let cells = 2 * states;
    let total = states.pow(cells as u32);
    let mut best = f64::INFINITY;
    for code in 0..total {
        let mut c = code;
        let mut rows = vec![[0usize; 2]; states];
        for cell in 0..cells {
            rows[cell / 2][cell % 2] = c % states;
            c /= states;
        }
        for init in 0..states {
            let m = Machine::unlabeled(rows.clone(), init)?;
            let (_, r) = chain::optimize(&m, pair)?;
            best = best.min(r.pe);
        }
    }
    Ok(best)
}
