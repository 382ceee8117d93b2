//! Total distance and occupancy for machines that end in one of two
//! decision-pure recurrent classes.
//!
//! For such a machine there is always a state `u` whose shortest paths to the
//! two classes have total length at most `S`, and which either walk visits
//! with probability at least `(1 - max(p0, p1)) / S`. This module computes
//! both quantities for every state and returns such a witness.

use std::collections::VecDeque;

use serde::Serialize;

use super::{absorption_profile, classify, pure_label, reachable_mask, transition_matrix, TransitionMatrix};
use crate::linalg::DenseMatrix;
use crate::model::{Hypothesis, HypothesisPair, Machine};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Recurrent class the `H0` decision settles in.
    pub h0_target: Vec<usize>,
    pub h1_target: Vec<usize>,
    /// `td(u)`: shortest distance to the `H1` class plus shortest distance to
    /// the `H0` class; `None` when either is unreachable from `u`.
    pub total_distance: Vec<Option<usize>>,
    /// `occ(u)`: smaller of the two probabilities that the walk ever visits `u`.
    pub occupancy: Vec<f64>,
    /// `Pr(H0 walk ends in the H1 class)`.
    pub p0: f64,
    /// `Pr(H1 walk ends in the H0 class)`.
    pub p1: f64,
    /// `(1 - max(p0, p1)) / S`.
    pub occupancy_bound: f64,
    pub witness: usize,
}

/// BFS distance from every state to the nearest state of `target` along
/// forward edges.
fn distance_to(m: &Machine, target: &[usize]) -> Vec<Option<usize>> {
    let n = m.num_states();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, row) in m.transitions().iter().enumerate() {
        for &j in row {
            preds[j].push(i);
        }
    }
    let mut dist = vec![None; n];
    let mut queue = VecDeque::new();
    for &t in target {
        dist[t] = Some(0);
        queue.push_back(t);
    }
    while let Some(v) = queue.pop_front() {
        let d = dist[v].unwrap();
        for &u in &preds[v] {
            if dist[u].is_none() {
                dist[u] = Some(d + 1);
                queue.push_back(u);
            }
        }
    }
    dist
}

/// Probability that the walk from `start` ever visits `target`.
fn hitting_probability(m: &Machine, p: &TransitionMatrix, start: usize, target: usize) -> Result<f64> {
    if start == target {
        return Ok(1.0);
    }
    // states that can reach `target`, excluding it
    let can_reach = distance_to(m, &[target]);
    if can_reach[start].is_none() {
        return Ok(0.0);
    }
    let set: Vec<usize> = (0..m.num_states()).filter(|&i| i != target && can_reach[i].is_some()).collect();
    let mut a = DenseMatrix::identity(set.len());
    let mut rhs = vec![0.0; set.len()];
    for (r, &i) in set.iter().enumerate() {
        for (c, &j) in set.iter().enumerate() {
            a[(r, c)] -= p.get(i, j);
        }
        rhs[r] = p.get(i, target);
    }
    let h = a.lu()?.solve(&rhs);
    let at = set.iter().position(|&i| i == start).unwrap();
    Ok(h[at])
}

pub fn structural_diagnostics(m: &Machine, pair: &HypothesisPair) -> Result<Diagnostics> {
    let structure = classify(m);
    let reachable = reachable_mask(m);
    let live: Vec<&Vec<usize>> = structure.recurrent_classes.iter().filter(|c| reachable[c[0]]).collect();
    let (h0_target, h1_target) = match live.as_slice() {
        [a, b] => match (pure_label(m, a), pure_label(m, b)) {
            (Some(Hypothesis::H0), Some(Hypothesis::H1)) => ((*a).clone(), (*b).clone()),
            (Some(Hypothesis::H1), Some(Hypothesis::H0)) => ((*b).clone(), (*a).clone()),
            _ => {
                return Err(Error::UnsupportedStructure(
                    "the two recurrent classes must each carry one decision label, and the labels must differ".into(),
                ))
            }
        },
        _ => {
            return Err(Error::UnsupportedStructure(format!(
                "expected exactly two reachable recurrent classes, found {}",
                live.len()
            )))
        }
    };

    let (p0, p1) =
        absorption_profile(m, pair)?.conditional_errors.expect("two decision-pure classes were just verified");

    let to_h1 = distance_to(m, &h1_target);
    let to_h0 = distance_to(m, &h0_target);
    let total_distance: Vec<Option<usize>> = to_h1.iter().zip(&to_h0).map(|(a, b)| Some((*a)? + (*b)?)).collect();

    let pp = transition_matrix(m, pair.p())?;
    let pq = transition_matrix(m, pair.q())?;
    let mut occupancy = vec![0.0; m.num_states()];
    for u in (0..m.num_states()).filter(|&u| reachable[u]) {
        let a = hitting_probability(m, &pp, m.initial(), u)?;
        let b = hitting_probability(m, &pq, m.initial(), u)?;
        occupancy[u] = a.min(b);
    }

    let s = m.num_states();
    let occupancy_bound = (1.0 - p0.max(p1)) / s as f64;
    let witness = (0..s)
        .filter(|&u| matches!(total_distance[u], Some(td) if td <= s))
        .filter(|&u| occupancy[u] >= occupancy_bound - 1e-12)
        .fold(None, |best: Option<usize>, u| match best {
            Some(b) if occupancy[b] >= occupancy[u] => Some(b),
            _ => Some(u),
        })
        .ok_or_else(|| {
            Error::NoWitness(format!(
                "no state with td <= {s} and occupancy >= {occupancy_bound:e} (p0={p0:e}, p1={p1:e})"
            ))
        })?;

    Ok(Diagnostics { h0_target, h1_target, total_distance, occupancy, p0, p1, occupancy_bound, witness })
}
