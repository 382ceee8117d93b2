//! Markov chains induced by a machine under each hypothesis.
//!
//! The long-run error of a machine is a Cesàro average, so it is determined by
//! which recurrent class the walk ends up in and by the stationary vector of
//! that class. Periodic classes need no special handling: the time average
//! still converges to the unique stationary vector.

mod diagnostics;

pub use diagnostics::{structural_diagnostics, Diagnostics};

use serde::Serialize;

use crate::linalg::{DenseMatrix, Lu};
use crate::model::{Hypothesis, HypothesisPair, Machine};
use crate::{Error, Result};

/// Relative slack under which two occupancies count as equal.
const TIE_TOL: f64 = 1e-12;

/// Row-stochastic matrix of a machine driven by `Bern(theta)` input.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    matrix: DenseMatrix,
}

impl TransitionMatrix {
    pub fn size(&self) -> usize {
        self.matrix.size()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    pub fn as_dense(&self) -> &DenseMatrix {
        &self.matrix
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("bit probability must lie in (0, 1), got {theta}")))
    }
}

/// Entry `(i, j)` is `theta [f(i,1) = j] + (1 - theta) [f(i,0) = j]`.
pub fn transition_matrix(m: &Machine, theta: f64) -> Result<TransitionMatrix> {
    check_theta(theta)?;
    let mut matrix = DenseMatrix::zeros(m.num_states());
    for (i, &[on0, on1]) in m.transitions().iter().enumerate() {
        matrix[(i, on0)] += 1.0 - theta;
        matrix[(i, on1)] += theta;
    }
    Ok(TransitionMatrix { matrix })
}

/// Recurrent classes and transient states of the transition graph.
///
/// Classes are sorted by their smallest state; states inside a class and the
/// transient list are sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainStructure {
    pub recurrent_classes: Vec<Vec<usize>>,
    pub transient: Vec<usize>,
}

impl ChainStructure {
    pub fn num_classes(&self) -> usize {
        self.recurrent_classes.len()
    }

    pub fn class_of(&self, state: usize) -> Option<usize> {
        self.recurrent_classes.iter().position(|c| c.contains(&state))
    }

    pub fn is_irreducible(&self) -> bool {
        self.recurrent_classes.len() == 1 && self.transient.is_empty()
    }
}

/// Strongly connected components (iterative Tarjan); returns the component
/// id of every node.
fn scc_ids(adj: &[[usize; 2]]) -> (Vec<usize>, usize) {
    const UNSEEN: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut stack = Vec::new();
    let mut next = 0;
    let mut ncomp = 0;

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&(v, edge)) = call.last() {
            if edge < 2 {
                call.last_mut().unwrap().1 += 1;
                let w = adj[v][edge];
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp[w] = ncomp;
                        if w == v {
                            break;
                        }
                    }
                    ncomp += 1;
                }
            }
        }
    }
    (comp, ncomp)
}

/// Recurrent classes are the closed strongly connected components of the
/// graph with edges `i -> f(i,0)` and `i -> f(i,1)`.
pub fn classify(m: &Machine) -> ChainStructure {
    let adj = m.transitions();
    let (comp, ncomp) = scc_ids(adj);
    let mut closed = vec![true; ncomp];
    for (i, row) in adj.iter().enumerate() {
        if row.iter().any(|&j| comp[j] != comp[i]) {
            closed[comp[i]] = false;
        }
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
    let mut transient = Vec::new();
    for (i, &c) in comp.iter().enumerate() {
        if closed[c] {
            members[c].push(i);
        } else {
            transient.push(i);
        }
    }
    let mut recurrent_classes: Vec<Vec<usize>> = members.into_iter().filter(|c| !c.is_empty()).collect();
    recurrent_classes.sort_by_key(|c| c[0]);
    ChainStructure { recurrent_classes, transient }
}

/// Unique stationary vector of `p` restricted to `class`, in the order of
/// `class`. The class must be closed and irreducible under `p`.
pub fn stationary(p: &TransitionMatrix, class: &[usize]) -> Result<Vec<f64>> {
    let n = class.len();
    if n == 0 {
        return Err(Error::invalid("empty class"));
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }
    // (P_c^T - I) mu = 0 with the last equation replaced by sum(mu) = 1
    let mut a = DenseMatrix::zeros(n);
    for (r, &i) in class.iter().enumerate() {
        for (c, &j) in class.iter().enumerate() {
            a[(c, r)] = p.get(i, j);
        }
        a[(r, r)] -= 1.0;
    }
    for c in 0..n {
        a[(n - 1, c)] = 1.0;
    }
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    let mu =
        a.lu().map_err(|e| Error::NumericalFailure(format!("stationary solve on class {class:?}: {e}")))?.solve(&rhs);
    Ok(mu)
}

/// Factorization of `I - Q` over the transient states.
struct TransientSystem {
    index: Vec<Option<usize>>,
    lu: Option<Lu>,
}

impl TransientSystem {
    fn new(p: &TransitionMatrix, transient: &[usize]) -> Result<Self> {
        let mut index = vec![None; p.size()];
        for (k, &t) in transient.iter().enumerate() {
            index[t] = Some(k);
        }
        if transient.is_empty() {
            return Ok(TransientSystem { index, lu: None });
        }
        let mut a = DenseMatrix::identity(transient.len());
        for (r, &i) in transient.iter().enumerate() {
            for (c, &j) in transient.iter().enumerate() {
                a[(r, c)] -= p.get(i, j);
            }
        }
        let lu = a.lu().map_err(|e| Error::NumericalFailure(format!("absorption solve: {e}")))?;
        Ok(TransientSystem { index, lu: Some(lu) })
    }
}

fn absorption_from(p: &TransitionMatrix, s: &ChainStructure, start: usize) -> Result<Vec<f64>> {
    if let Some(k) = s.class_of(start) {
        let mut v = vec![0.0; s.num_classes()];
        v[k] = 1.0;
        return Ok(v);
    }
    let sys = TransientSystem::new(p, &s.transient)?;
    let lu = sys.lu.as_ref().expect("start state is transient");
    let at = sys.index[start].expect("start state is transient");
    Ok(s.recurrent_classes
        .iter()
        .map(|class| {
            let rhs: Vec<f64> = s.transient.iter().map(|&i| class.iter().map(|&j| p.get(i, j)).sum()).collect();
            lu.solve(&rhs)[at]
        })
        .collect())
}

/// Probability that the walk from the initial state is eventually absorbed
/// in each recurrent class of [`classify`], in the same order.
pub fn absorption(m: &Machine, theta: f64) -> Result<Vec<f64>> {
    let p = transition_matrix(m, theta)?;
    absorption_from(&p, &classify(m), m.initial())
}

/// Per-hypothesis absorption vectors, plus the conditional errors
/// `p0 = Pr(H0 walk ends in the H1 class)` and `p1 = Pr(H1 walk ends in the
/// H0 class)` when exactly two reachable classes exist and each carries a
/// single decision label, the two labels differing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbsorptionProfile {
    pub classes: Vec<Vec<usize>>,
    pub h0: Vec<f64>,
    pub h1: Vec<f64>,
    pub conditional_errors: Option<(f64, f64)>,
}

/// Label shared by every state of `class`, if any.
pub(crate) fn pure_label(m: &Machine, class: &[usize]) -> Option<Hypothesis> {
    let first = m.decision_of(class[0]);
    class.iter().all(|&i| m.decision_of(i) == first).then_some(first)
}

pub fn absorption_profile(m: &Machine, pair: &HypothesisPair) -> Result<AbsorptionProfile> {
    let structure = classify(m);
    let h0 = absorption(m, pair.p())?;
    let h1 = absorption(m, pair.q())?;
    let reachable = reachable_mask(m);
    let live: Vec<usize> =
        (0..structure.num_classes()).filter(|&k| reachable[structure.recurrent_classes[k][0]]).collect();
    let conditional_errors = match live.as_slice() {
        &[a, b] => {
            let la = pure_label(m, &structure.recurrent_classes[a]);
            let lb = pure_label(m, &structure.recurrent_classes[b]);
            match (la, lb) {
                (Some(x), Some(y)) if x != y => {
                    let (cls_h0, cls_h1) = if x == Hypothesis::H0 { (a, b) } else { (b, a) };
                    Some((h0[cls_h1], h1[cls_h0]))
                }
                _ => None,
            }
        }
        _ => None,
    };
    Ok(AbsorptionProfile { classes: structure.recurrent_classes, h0, h1, conditional_errors })
}

pub(crate) fn reachable_mask(m: &Machine) -> Vec<bool> {
    let mut mask = vec![false; m.num_states()];
    for s in m.bfs_order() {
        mask[s] = true;
    }
    mask
}

/// Long-run behavior of a machine under both hypotheses.
///
/// Everything is computed on the canonical (reachable, BFS-relabeled) form
/// and mapped back to the original labels, so any relabeling of a machine
/// yields bit-identical numbers.
#[derive(Debug, Clone)]
pub struct LongRun {
    num_states: usize,
    /// Reachable recurrent classes, original labels, sorted.
    classes: Vec<Vec<usize>>,
    transient: Vec<usize>,
    /// Indexed by hypothesis.
    absorb: [Vec<f64>; 2],
    /// Per class, stationary vector aligned with `classes[k]`.
    stationary: [Vec<Vec<f64>>; 2],
    /// Time-average occupancy per original state.
    occupancy: [Vec<f64>; 2],
}

impl LongRun {
    pub fn compute(m: &Machine, pair: &HypothesisPair) -> Result<Self> {
        let canon = m.canonicalize();
        let cm = &canon.machine;
        let structure = classify(cm);
        let mut back = vec![0; cm.num_states()];
        for (old, new) in canon.relabel.iter().enumerate() {
            if let Some(new) = new {
                back[*new] = old;
            }
        }

        let mut absorb: [Vec<f64>; 2] = Default::default();
        let mut stationary_c: [Vec<Vec<f64>>; 2] = Default::default();
        let mut occupancy: [Vec<f64>; 2] = [vec![0.0; m.num_states()], vec![0.0; m.num_states()]];
        for h in [Hypothesis::H0, Hypothesis::H1] {
            let hi = h.index() as usize;
            let p = transition_matrix(cm, pair.theta(h))?;
            let a = absorption_from(&p, &structure, cm.initial())?;
            let mut per_class = Vec::with_capacity(structure.num_classes());
            for (k, class) in structure.recurrent_classes.iter().enumerate() {
                let mu = stationary(&p, class)?;
                for (&state, &w) in class.iter().zip(&mu) {
                    occupancy[hi][back[state]] = a[k] * w;
                }
                per_class.push(mu);
            }
            absorb[hi] = a;
            stationary_c[hi] = per_class;
        }

        // Re-express classes in original labels, sorted, carrying the
        // stationary entries along.
        let mut order: Vec<usize> = (0..structure.num_classes()).collect();
        let mut classes: Vec<Vec<(usize, usize)>> = structure
            .recurrent_classes
            .iter()
            .map(|c| {
                let mut v: Vec<(usize, usize)> = c.iter().enumerate().map(|(pos, &s)| (back[s], pos)).collect();
                v.sort_unstable();
                v
            })
            .collect();
        order.sort_by_key(|&k| classes[k][0].0);
        let mut out_classes = Vec::with_capacity(order.len());
        let mut out_absorb: [Vec<f64>; 2] = Default::default();
        let mut out_stat: [Vec<Vec<f64>>; 2] = Default::default();
        for &k in &order {
            let members = std::mem::take(&mut classes[k]);
            for hi in 0..2 {
                out_absorb[hi].push(absorb[hi][k]);
                out_stat[hi].push(members.iter().map(|&(_, pos)| stationary_c[hi][k][pos]).collect());
            }
            out_classes.push(members.into_iter().map(|(s, _)| s).collect());
        }
        let mut transient: Vec<usize> = structure.transient.iter().map(|&s| back[s]).collect();
        transient.sort_unstable();

        Ok(LongRun {
            num_states: m.num_states(),
            classes: out_classes,
            transient,
            absorb: out_absorb,
            stationary: out_stat,
            occupancy,
        })
    }

    /// Reachable recurrent classes in original labels.
    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    /// Reachable transient states in original labels.
    pub fn transient(&self) -> &[usize] {
        &self.transient
    }

    pub fn absorption(&self, h: Hypothesis) -> &[f64] {
        &self.absorb[h.index() as usize]
    }

    pub fn class_stationary(&self, h: Hypothesis, class: usize) -> &[f64] {
        &self.stationary[h.index() as usize][class]
    }

    /// Long-run fraction of time spent in each state (zero for transient and
    /// unreachable states).
    pub fn occupancy(&self, h: Hypothesis) -> &[f64] {
        &self.occupancy[h.index() as usize]
    }

    /// Label each recurrent state with the hypothesis of larger occupancy,
    /// `H1` on ties (up to a relative `1e-12`); transient states get `H0`.
    pub fn optimal_decision(&self) -> Vec<Hypothesis> {
        // unreachable states are neither transient nor counted; with zero
        // occupancy on both sides they fall under the tie rule
        let mut transient = vec![false; self.num_states];
        for &t in &self.transient {
            transient[t] = true;
        }
        (0..self.num_states)
            .map(|i| {
                if transient[i] {
                    Hypothesis::H0
                } else if self.occupancy[1][i] >= self.occupancy[0][i] * (1.0 - TIE_TOL) {
                    Hypothesis::H1
                } else {
                    Hypothesis::H0
                }
            })
            .collect()
    }

    pub fn report(&self, decision: &[Hypothesis]) -> Result<ErrorReport> {
        if decision.len() != self.num_states {
            return Err(Error::invalid(format!(
                "decision table has {} entries for {} states",
                decision.len(),
                self.num_states
            )));
        }
        let mut classes = Vec::with_capacity(self.classes.len());
        let mut pe_h = [0.0; 2];
        for (k, class) in self.classes.iter().enumerate() {
            let mut err = [0.0; 2];
            for h in [Hypothesis::H0, Hypothesis::H1] {
                let hi = h.index() as usize;
                err[hi] =
                    class.iter().zip(&self.stationary[hi][k]).filter(|(&s, _)| decision[s] != h).map(|(_, &w)| w).sum();
                pe_h[hi] += self.absorb[hi][k] * err[hi];
            }
            classes.push(ClassReport {
                states: class.clone(),
                absorption_h0: self.absorb[0][k],
                absorption_h1: self.absorb[1][k],
                error_h0: err[0],
                error_h1: err[1],
            });
        }
        let per_state_min = self.occupancy[0].iter().zip(&self.occupancy[1]).map(|(a, b)| a.min(*b)).collect();
        Ok(ErrorReport {
            pe: 0.5 * (pe_h[0] + pe_h[1]),
            pe_h0: pe_h[0],
            pe_h1: pe_h[1],
            per_state_min,
            classes,
            transient: self.transient.clone(),
        })
    }
}

/// Error contribution of one recurrent class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub states: Vec<usize>,
    pub absorption_h0: f64,
    pub absorption_h1: f64,
    /// Long-run error under `H0` given the walk settled in this class.
    pub error_h0: f64,
    pub error_h1: f64,
}

/// Exact long-run Bayes error under equal priors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub pe: f64,
    pub pe_h0: f64,
    pub pe_h1: f64,
    /// `min(w0_i, w1_i)` of the long-run occupancies per state.
    pub per_state_min: Vec<f64>,
    pub classes: Vec<ClassReport>,
    pub transient: Vec<usize>,
}

/// Exact long-run error of `m` with its own decision table.
pub fn error_probability(m: &Machine, pair: &HypothesisPair) -> Result<ErrorReport> {
    LongRun::compute(m, pair)?.report(m.decision())
}

pub fn optimal_decision(m: &Machine, pair: &HypothesisPair) -> Result<Vec<Hypothesis>> {
    Ok(LongRun::compute(m, pair)?.optimal_decision())
}

/// `m` relabeled with its optimal decision table, and the resulting report.
pub fn optimize(m: &Machine, pair: &HypothesisPair) -> Result<(Machine, ErrorReport)> {
    let lr = LongRun::compute(m, pair)?;
    let d = lr.optimal_decision();
    let report = lr.report(&d)?;
    Ok((m.with_decision(d)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Hypothesis::{H0, H1};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn last_bit() -> Machine {
        Machine::new(vec![[0, 1], [0, 1]], vec![H1, H0], 0).unwrap()
    }

    fn parity() -> Machine {
        Machine::unlabeled(vec![[0, 1], [1, 0]], 0).unwrap()
    }

    fn run3() -> Machine {
        // states 0 and 2 absorbing, 1 interior
        Machine::new(vec![[0, 0], [0, 2], [2, 2]], vec![H1, H0, H0], 1).unwrap()
    }

    #[test]
    fn matrices() {
        let p = transition_matrix(&last_bit(), 0.9).unwrap();
        for i in 0..2 {
            assert!(close(p.get(i, 0), 0.1, 1e-15) && close(p.get(i, 1), 0.9, 1e-15));
        }
        let id = transition_matrix(&Machine::unlabeled(vec![[0, 0], [1, 1], [2, 2]], 0).unwrap(), 0.3).unwrap();
        assert_eq!(id.as_dense(), &DenseMatrix::identity(3));
        let r = transition_matrix(&run3(), 0.9).unwrap();
        assert!(close(r.get(1, 0), 0.1, 1e-15) && close(r.get(1, 2), 0.9, 1e-15));
        assert!(transition_matrix(&last_bit(), 1.0).is_err());
        assert!(transition_matrix(&last_bit(), 0.0).is_err());
    }

    #[test]
    fn structure() {
        let s = classify(&last_bit());
        assert_eq!(s.recurrent_classes, vec![vec![0, 1]]);
        assert!(s.is_irreducible());
        let s = classify(&run3());
        assert_eq!(s.recurrent_classes, vec![vec![0], vec![2]]);
        assert_eq!(s.transient, vec![1]);
        let s = classify(&Machine::unlabeled(vec![[0, 0], [1, 1], [2, 2]], 0).unwrap());
        assert_eq!(s.num_classes(), 3);
        assert!(s.transient.is_empty());
    }

    #[test]
    fn stationary_vectors() {
        let p = transition_matrix(&last_bit(), 0.9).unwrap();
        let mu = stationary(&p, &[0, 1]).unwrap();
        assert!(close(mu[0], 0.1, 1e-14) && close(mu[1], 0.9, 1e-14));

        let p = transition_matrix(&parity(), 0.37).unwrap();
        let mu = stationary(&p, &[0, 1]).unwrap();
        assert!(close(mu[0], 0.5, 1e-14) && close(mu[1], 0.5, 1e-14));

        let cyc = Machine::unlabeled(vec![[0, 1], [1, 2], [2, 0]], 0).unwrap();
        let p = transition_matrix(&cyc, 0.8).unwrap();
        for v in stationary(&p, &[0, 1, 2]).unwrap() {
            assert!(close(v, 1.0 / 3.0, 1e-14));
        }
    }

    #[test]
    fn absorption_vectors() {
        let a = absorption(&run3(), 0.9).unwrap();
        assert!(close(a[0], 0.1, 1e-15) && close(a[1], 0.9, 1e-15));
        let a = absorption(&run3().with_initial(2).unwrap(), 0.9).unwrap();
        assert_eq!(a, vec![0.0, 1.0]);
    }

    #[test]
    fn errors() {
        let pair = HypothesisPair::new(0.9, 0.1).unwrap();
        let r = error_probability(&last_bit(), &pair).unwrap();
        assert!(close(r.pe, 0.1, 1e-15));
        assert!(close(r.pe, 0.5 * (r.pe_h0 + r.pe_h1), 1e-15));
        assert_eq!(optimal_decision(&last_bit(), &pair).unwrap(), vec![H1, H0]);

        let (m, r) = optimize(&parity(), &pair).unwrap();
        assert_eq!(m.decision(), &[H1, H1]);
        assert!(close(r.pe, 0.5, 1e-15));

        let d = optimal_decision(&run3(), &pair).unwrap();
        assert_eq!(d, vec![H1, H0, H0]);
        let r = error_probability(&run3(), &pair).unwrap();
        assert!(close(r.pe, 0.1, 1e-15));
        assert_eq!(r.transient, vec![1]);
    }

    #[test]
    fn unreachable_states_carry_no_weight() {
        let pair = HypothesisPair::new(0.8, 0.3).unwrap();
        // state 2 is an unreachable absorber
        let m = Machine::new(vec![[0, 1], [0, 1], [2, 2]], vec![H1, H0, H0], 0).unwrap();
        let r = error_probability(&m, &pair).unwrap();
        assert_eq!(r.per_state_min[2], 0.0);
        assert_eq!(r.classes.len(), 1);
        let base = error_probability(&last_bit(), &pair).unwrap();
        assert_eq!(r.pe, base.pe);
    }

    #[test]
    fn conditional_errors_for_two_absorbers() {
        let pair = HypothesisPair::new(0.9, 0.1).unwrap();
        let prof = absorption_profile(&run3(), &pair).unwrap();
        let (p0, p1) = prof.conditional_errors.unwrap();
        assert!(close(p0, 0.1, 1e-15) && close(p1, 0.1, 1e-15));
        assert!(absorption_profile(&last_bit(), &pair).unwrap().conditional_errors.is_none());
    }
}
