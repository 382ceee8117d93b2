//! Machines, hypothesis pairs and canonical relabeling.
//!
//! States are 0-indexed. Labels that are 1-indexed elsewhere (the run
//! machine's `1..=S`) are converted at the construction boundary.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One of the two hypotheses. `H0` is the `Bern(p)` source, `H1` the `Bern(q)` one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Hypothesis {
    H0,
    H1,
}

impl Hypothesis {
    pub fn index(self) -> u8 {
        match self {
            Hypothesis::H0 => 0,
            Hypothesis::H1 => 1,
        }
    }

    pub fn from_index(v: u8) -> Option<Self> {
        match v {
            0 => Some(Hypothesis::H0),
            1 => Some(Hypothesis::H1),
            _ => None,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Hypothesis::H0 => Hypothesis::H1,
            Hypothesis::H1 => Hypothesis::H0,
        }
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hypothesis::H0 => f.write_str("H0"),
            Hypothesis::H1 => f.write_str("H1"),
        }
    }
}

/// The two Bernoulli parameters, with `0 < q < p < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisPair {
    p: f64,
    q: f64,
}

impl HypothesisPair {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p.is_finite() && q.is_finite()) || !(0.0 < q && q < p && p < 1.0) {
            return Err(Error::invalid(format!("hypothesis pair requires 0 < q < p < 1, got p={p}, q={q}")));
        }
        Ok(HypothesisPair { p, q })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Likelihood-ratio constant `p(1-q) / (q(1-p))`, always `> 1`.
    pub fn gamma(&self) -> f64 {
        self.p * (1.0 - self.q) / (self.q * (1.0 - self.p))
    }

    /// Heads probability under the given hypothesis.
    pub fn theta(&self, h: Hypothesis) -> f64 {
        match h {
            Hypothesis::H0 => self.p,
            Hypothesis::H1 => self.q,
        }
    }

    /// `min(p, 1-p)`: the smallest nonzero transition probability under `H0`.
    pub fn min_step_h0(&self) -> f64 {
        self.p.min(1.0 - self.p)
    }

    /// `min(q, 1-q)`.
    pub fn min_step_h1(&self) -> f64 {
        self.q.min(1.0 - self.q)
    }
}

/// A deterministic `S`-state machine: transition table, decision labels and
/// initial state.
///
/// Decision labels on transient states never affect the long-run error;
/// they are kept so that finite-horizon runs are well defined.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "MachineJson", into = "MachineJson")]
pub struct Machine {
    transitions: Vec<[usize; 2]>,
    decision: Vec<Hypothesis>,
    initial: usize,
}

impl Machine {
    pub fn new(transitions: Vec<[usize; 2]>, decision: Vec<Hypothesis>, initial: usize) -> Result<Self> {
        let s = transitions.len();
        if s == 0 {
            return Err(Error::invalid("machine needs at least one state"));
        }
        if decision.len() != s {
            return Err(Error::invalid(format!("decision table has {} entries for {s} states", decision.len())));
        }
        if initial >= s {
            return Err(Error::invalid(format!("initial state {initial} out of range for {s} states")));
        }
        for (i, row) in transitions.iter().enumerate() {
            for (b, &t) in row.iter().enumerate() {
                if t >= s {
                    return Err(Error::invalid(format!("transition f({i}, {b}) = {t} out of range for {s} states")));
                }
            }
        }
        Ok(Machine { transitions, decision, initial })
    }

    /// Same transitions and initial state, every state labeled `H0`.
    pub fn unlabeled(transitions: Vec<[usize; 2]>, initial: usize) -> Result<Self> {
        let n = transitions.len();
        Machine::new(transitions, vec![Hypothesis::H0; n], initial)
    }

    pub fn num_states(&self) -> usize {
        self.transitions.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn transitions(&self) -> &[[usize; 2]] {
        &self.transitions
    }

    pub fn decision(&self) -> &[Hypothesis] {
        &self.decision
    }

    pub fn decision_of(&self, state: usize) -> Hypothesis {
        self.decision[state]
    }

    /// Replace the decision table.
    pub fn with_decision(&self, decision: Vec<Hypothesis>) -> Result<Self> {
        Machine::new(self.transitions.clone(), decision, self.initial)
    }

    pub fn with_initial(&self, initial: usize) -> Result<Self> {
        Machine::new(self.transitions.clone(), self.decision.clone(), initial)
    }

    pub fn step(&self, state: usize, bit: bool) -> Result<usize> {
        match self.transitions.get(state) {
            Some(row) => Ok(row[bit as usize]),
            None => Err(Error::invalid(format!("state {state} out of range for {} states", self.num_states()))),
        }
    }

    /// Feed `bits` from the initial state; returns the final state and its label.
    pub fn run_prefix<I>(&self, bits: I) -> (usize, Hypothesis)
    where
        I: IntoIterator<Item = bool>,
    {
        let state = bits.into_iter().fold(self.initial, |s, b| self.transitions[s][b as usize]);
        (state, self.decision[state])
    }

    /// Transition table flattened row-major: `[f(0,0), f(0,1), f(1,0), ...]`.
    pub fn table_key(&self) -> Vec<usize> {
        self.transitions.iter().flat_map(|r| r.iter().copied()).collect()
    }

    /// States reachable from the initial state, in breadth-first discovery
    /// order (input 0 explored before input 1).
    pub fn bfs_order(&self) -> Vec<usize> {
        let mut seen = vec![false; self.num_states()];
        let mut order = Vec::with_capacity(self.num_states());
        let mut queue = VecDeque::new();
        seen[self.initial] = true;
        queue.push_back(self.initial);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &v in &self.transitions[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        order
    }

    /// BFS relabeling from the initial state with unreachable states dropped.
    pub fn canonicalize(&self) -> CanonicalForm {
        let order = self.bfs_order();
        let mut relabel = vec![None; self.num_states()];
        for (new, &old) in order.iter().enumerate() {
            relabel[old] = Some(new);
        }
        let transitions = order
            .iter()
            .map(|&old| {
                let [a, b] = self.transitions[old];
                // targets of reachable states are reachable
                [relabel[a].unwrap(), relabel[b].unwrap()]
            })
            .collect();
        let decision = order.iter().map(|&old| self.decision[old]).collect();
        CanonicalForm { machine: Machine { transitions, decision, initial: 0 }, reachable_count: order.len(), relabel }
    }

    /// Whether the machine already equals its own canonical form.
    pub fn is_canonical(&self) -> bool {
        self.canonicalize().machine == *self
    }
}

/// Breadth-first relabeled representative of a machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalForm {
    pub machine: Machine,
    pub reachable_count: usize,
    /// Original state -> canonical state, `None` for unreachable states.
    pub relabel: Vec<Option<usize>>,
}

/// On-disk machine layout: `{"states", "initial", "transitions", "decision"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MachineJson {
    states: usize,
    initial: usize,
    transitions: Vec<[usize; 2]>,
    decision: Vec<u8>,
}

impl TryFrom<MachineJson> for Machine {
    type Error = Error;

    fn try_from(raw: MachineJson) -> Result<Self> {
        if raw.states != raw.transitions.len() {
            return Err(Error::invalid(format!(
                "\"states\" is {} but {} transition rows were given",
                raw.states,
                raw.transitions.len()
            )));
        }
        let decision = raw
            .decision
            .iter()
            .map(|&d| {
                Hypothesis::from_index(d).ok_or_else(|| Error::invalid(format!("decision label {d} is not 0 or 1")))
            })
            .collect::<Result<Vec<_>>>()?;
        Machine::new(raw.transitions, decision, raw.initial)
    }
}

impl From<Machine> for MachineJson {
    fn from(m: Machine) -> Self {
        MachineJson {
            states: m.num_states(),
            initial: m.initial,
            decision: m.decision.iter().map(|d| d.index()).collect(),
            transitions: m.transitions,
        }
    }
}

/// Parse a string of `0`/`1` characters into bits.
pub fn parse_bits(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::invalid(format!("'{other}' is not a bit"))),
        })
        .collect()
}
