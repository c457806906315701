//! Transition, reversal and history states of a reversible variable-time
//! subroutine, with the orthogonality, norm and error-bound verifiers.
//!
//! # Indexing
//!
//! The state space is `span{|d⟩|r⟩|a, z⟩|t⟩}` where `d ∈ {→, ←}`, `r` ranges
//! over the input register for `→` and the output register of `A` for `←`,
//! and `(a, z, t)` ranges over *slots*: `t ∈ 0..=T` and `time(z) ≥ t`. Slots
//! are ordered lexicographically by `(a, z, t)` and coordinates by
//! `(d, r, slot)`, so
//! `index = [d = ←]·n_in·S + r·S + slot` with `S` the slot count.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::config::check_dimension;
use crate::linalg::{self, real, CMatrix, CVector, Subspace, C64, ZERO};
use crate::subroutine::{AlphaWeights, Expectation, ReversibleExtension, VariableTimeSubroutine};
use crate::{Error, Result};

/// Sparse vector as `(index, amplitude)` pairs with distinct indices.
pub type Sparse = Vec<(usize, C64)>;

/// Ladder node `(kind, input, step)`.
pub type LadderNode = (StateKind, usize, usize);

pub fn sparse_to_dense(v: &Sparse, dim: usize) -> CVector {
    let mut out = linalg::zeros(dim);
    for &(k, x) in v {
        out[k] += x;
    }
    out
}

pub fn sparse_inner(a: &Sparse, b: &Sparse) -> C64 {
    let lookup: BTreeMap<usize, C64> = b.iter().copied().collect();
    a.iter().filter_map(|(k, x)| lookup.get(k).map(|y| x.conj() * y)).sum()
}

fn accumulate(entries: impl IntoIterator<Item = (usize, C64)>) -> Sparse {
    let mut map: BTreeMap<usize, C64> = BTreeMap::new();
    for (k, x) in entries {
        *map.entry(k).or_insert(ZERO) += x;
    }
    map.into_iter().filter(|(_, x)| x.norm() > 0.0).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// Coordinate bookkeeping for the transition-state space.
#[derive(Clone, Debug)]
pub struct StateLayout {
    inputs: usize,
    outputs: usize,
    workspace: usize,
    slots: Vec<(usize, usize, usize)>,
    slot_of: BTreeMap<(usize, usize, usize), usize>,
}

impl StateLayout {
    pub fn new(sub: &VariableTimeSubroutine, ext: &ReversibleExtension) -> Self {
        let halt_time = sub.halt_times().to_vec();
        let mut slots = Vec::new();
        for a in 0..sub.answers() {
            for (z, &tz) in halt_time.iter().enumerate() {
                for t in 0..=sub.horizon() {
                    if tz >= t {
                        slots.push((a, z, t));
                    }
                }
            }
        }
        let slot_of = slots.iter().enumerate().map(|(k, &s)| (s, k)).collect();
        Self { inputs: ext.input_dim(), outputs: ext.output_dim(), workspace: halt_time.len(), slots, slot_of }
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[(usize, usize, usize)] {
        &self.slots
    }

    pub fn slot(&self, a: usize, z: usize, t: usize) -> Option<usize> {
        self.slot_of.get(&(a, z, t)).copied()
    }

    pub fn dim(&self) -> usize {
        (self.inputs + self.outputs) * self.slots.len()
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn index(&self, d: Direction, reg: usize, slot: usize) -> usize {
        let base = match d {
            Direction::Forward => 0,
            Direction::Backward => self.inputs * self.slots.len(),
        };
        base + reg * self.slots.len() + slot
    }

    /// Inverse of [`StateLayout::index`]: `(d, r, a, z, t)`.
    pub fn decode(&self, index: usize) -> (Direction, usize, usize, usize, usize) {
        let s = self.slots.len();
        let (d, rest) = if index < self.inputs * s {
            (Direction::Forward, index)
        } else {
            (Direction::Backward, index - self.inputs * s)
        };
        let (a, z, t) = self.slots[rest % s];
        (d, rest / s, a, z, t)
    }

    /// Places a local vector `Σ c_{a,z}|a, z⟩` at step `t`, i.e. `Σ c_{a,z}|a, z, t⟩`.
    /// Components outside the live workspace at `t` must vanish.
    fn at_step(&self, local: &CVector, t: usize) -> Vec<(usize, C64)> {
        let mut out = Vec::new();
        for (k, &x) in local.iter().enumerate() {
            if x.norm() == 0.0 {
                continue;
            }
            let (a, z) = (k / self.workspace, k % self.workspace);
            match self.slot(a, z, t) {
                Some(s) => out.push((s, x)),
                None => debug_assert!(x.norm() < 1e-12, "amplitude on a halted state at step {t}"),
            }
        }
        out
    }

    /// `|d⟩ ⊗ reg ⊗ slot-vector` for a register vector given densely.
    fn tensor(&self, d: Direction, reg: &CVector, slot_vec: &[(usize, C64)]) -> Vec<(usize, C64)> {
        let mut out = Vec::new();
        for (r, &c) in reg.iter().enumerate() {
            if c.norm() == 0.0 {
                continue;
            }
            for &(s, x) in slot_vec {
                out.push((self.index(d, r, s), c * x));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Forward,
    Backward,
    Reversal,
}

/// One transition state with its label.
#[derive(Clone, Debug)]
pub struct TransitionState {
    pub kind: StateKind,
    pub input: usize,
    pub answer: usize,
    pub workspace: usize,
    pub step: usize,
    pub vector: Sparse,
}

impl TransitionState {
    /// Parity bucket `t mod 2`.
    pub fn bucket(&self) -> usize {
        self.step % 2
    }

    /// The node of the ladder overlap graph containing this state.
    pub fn node(&self) -> LadderNode {
        (self.kind, self.input, self.step)
    }
}

#[derive(Clone, Debug)]
pub struct TransitionStateSet {
    pub layout: StateLayout,
    pub alpha: AlphaWeights,
    pub states: Vec<TransitionState>,
}

fn check_alpha(sub: &VariableTimeSubroutine, alpha: &AlphaWeights) -> Result<()> {
    if alpha.horizon() < sub.horizon() {
        return Err(Error::InvalidWeights(format!(
            "weights cover steps 0..={} but the horizon is {}",
            alpha.horizon(),
            sub.horizon()
        )));
    }
    AlphaWeights::new(alpha.values().to_vec()).map(|_| ())
}

pub fn build_transition_states(
    sub: &VariableTimeSubroutine,
    ext: &ReversibleExtension,
    alpha: &AlphaWeights,
) -> Result<TransitionStateSet> {
    check_alpha(sub, alpha)?;
    if ext.input_dim() != sub.inputs() {
        return Err(Error::DimensionMismatch("extension and subroutine disagree on inputs".into()));
    }
    let layout = StateLayout::new(sub, ext);
    check_dimension(layout.dim())?;
    let nz = sub.workspace();
    let big_t = sub.horizon();
    let mut states = Vec::new();
    for i in 0..sub.inputs() {
        let e_i = linalg::basis_vector(sub.inputs(), i);
        let a_i = ext.apply(i);
        for t in 0..big_t {
            let (sa, sb) = (alpha.get(t).sqrt(), alpha.get(t + 1).sqrt());
            for a in 0..sub.answers() {
                for z in 0..nz {
                    if sub.halt_times()[z] <= t {
                        continue;
                    }
                    let here = layout.slot(a, z, t).expect("z is live at t");
                    let moved = sub.unitary(i, t + 1).column(sub.index(a, z)).into_owned();
                    let mut slot_vec = vec![(here, real(sa))];
                    slot_vec.extend(layout.at_step(&moved, t + 1).into_iter().map(|(s, x)| (s, -x * sb)));
                    for (kind, d, reg) in [
                        (StateKind::Forward, Direction::Forward, &e_i),
                        (StateKind::Backward, Direction::Backward, &a_i),
                    ] {
                        states.push(TransitionState {
                            kind,
                            input: i,
                            answer: a,
                            workspace: z,
                            step: t,
                            vector: accumulate(layout.tensor(d, reg, &slot_vec)),
                        });
                    }
                }
            }
        }
        for t in 1..=big_t {
            let s = alpha.get(t).sqrt();
            for a in 0..sub.answers() {
                let a_a = ext.apply_answer(a, i);
                for z in 0..nz {
                    if sub.halt_times()[z] != t {
                        continue;
                    }
                    let slot = [(layout.slot(a, z, t).expect("halting slot"), real(s))];
                    let mut v = layout.tensor(Direction::Forward, &e_i, &slot);
                    v.extend(layout.tensor(Direction::Backward, &a_a, &slot).into_iter().map(|(k, x)| (k, -x)));
                    states.push(TransitionState {
                        kind: StateKind::Reversal,
                        input: i,
                        answer: a,
                        workspace: z,
                        step: t,
                        vector: accumulate(v),
                    });
                }
            }
        }
    }
    Ok(TransitionStateSet { layout, alpha: alpha.clone(), states })
}

impl TransitionStateSet {
    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn bucket(&self, b: usize) -> impl Iterator<Item = &TransitionState> {
        self.states.iter().filter(move |s| s.bucket() == b)
    }

    pub fn bucket_vectors(&self, b: usize) -> Vec<CVector> {
        self.bucket(b).map(|s| sparse_to_dense(&s.vector, self.dim())).collect()
    }

    pub fn bucket_subspace(&self, b: usize, drop: f64) -> Subspace {
        Subspace::span(self.dim(), &self.bucket_vectors(b), drop)
    }

    /// Largest off-diagonal Gram entry within bucket `b`, relative to the norms.
    pub fn bucket_gram_residual(&self, b: usize) -> f64 {
        let members: Vec<&TransitionState> = self.bucket(b).collect();
        let mut worst: f64 = 0.0;
        for (x, s) in members.iter().enumerate() {
            for t in &members[x + 1..] {
                worst = worst.max(sparse_inner(&s.vector, &t.vector).norm());
            }
        }
        worst
    }

    /// Pairs of distinct ladder nodes with overlapping states.
    pub fn overlap_edges(&self, threshold: f64) -> BTreeSet<(LadderNode, LadderNode)> {
        let mut edges = BTreeSet::new();
        for (x, s) in self.states.iter().enumerate() {
            for t in &self.states[x + 1..] {
                if s.node() != t.node() && sparse_inner(&s.vector, &t.vector).norm() > threshold {
                    let (p, q) = if s.node() < t.node() { (s.node(), t.node()) } else { (t.node(), s.node()) };
                    edges.insert((p, q));
                }
            }
        }
        edges
    }

    /// Whether two ladder nodes are adjacent in the overlap graph.
    pub fn ladder_adjacent(p: LadderNode, q: LadderNode) -> bool {
        use StateKind::*;
        if p.1 != q.1 {
            return false;
        }
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        match (lo.0, hi.0) {
            (Forward, Forward) | (Backward, Backward) => hi.2 == lo.2 + 1,
            (Forward, Reversal) | (Backward, Reversal) => hi.2 == lo.2 + 1,
            _ => false,
        }
    }

    /// `2Π_{Ψ_b} − I` on the full state space.
    pub fn reflect_about_bucket(&self, b: usize, drop: f64) -> CMatrix {
        self.bucket_subspace(b, drop).reflection()
    }

    pub fn dump(&self) -> Vec<StateDump> {
        self.states
            .iter()
            .map(|s| StateDump {
                kind: s.kind,
                input: s.input,
                answer: s.answer,
                workspace: s.workspace,
                step: s.step,
                bucket: s.bucket(),
                entries: s
                    .vector
                    .iter()
                    .map(|&(k, x)| {
                        let (d, r, a, z, t) = self.layout.decode(k);
                        DumpEntry { index: k, d, r, a, z, t, re: x.re, im: x.im }
                    })
                    .collect(),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpEntry {
    pub index: usize,
    pub d: Direction,
    pub r: usize,
    pub a: usize,
    pub z: usize,
    pub t: usize,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub kind: StateKind,
    pub input: usize,
    pub answer: usize,
    pub workspace: usize,
    pub step: usize,
    pub bucket: usize,
    pub entries: Vec<DumpEntry>,
}

/// Positive and negative history states of every input.
#[derive(Clone, Debug)]
pub struct HistoryStates {
    pub positive: Vec<Sparse>,
    pub negative: Vec<Sparse>,
    /// `|w^t(i)⟩` for `t = 0..=T`, in `span{|a, z⟩}`.
    pub algorithm: Vec<Vec<CVector>>,
}

pub fn build_history_states(
    sub: &VariableTimeSubroutine,
    ext: &ReversibleExtension,
    alpha: &AlphaWeights,
) -> Result<HistoryStates> {
    check_alpha(sub, alpha)?;
    let layout = StateLayout::new(sub, ext);
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    let mut algorithm = Vec::new();
    for i in 0..sub.inputs() {
        let e_i = linalg::basis_vector(sub.inputs(), i);
        let a_i = ext.apply(i);
        let ws = sub.algorithm_states(i);
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for (t, w) in ws.iter().enumerate() {
            let slot_vec = layout.at_step(w, t);
            let pos: Vec<(usize, C64)> = slot_vec.iter().map(|&(s, x)| (s, x / alpha.get(t).sqrt())).collect();
            let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
            let neg: Vec<(usize, C64)> = slot_vec.iter().map(|&(s, x)| (s, x * (sign * alpha.get(t).sqrt()))).collect();
            plus.extend(layout.tensor(Direction::Forward, &e_i, &pos));
            plus.extend(layout.tensor(Direction::Backward, &a_i, &pos));
            minus.extend(layout.tensor(Direction::Forward, &e_i, &neg));
            minus.extend(layout.tensor(Direction::Backward, &a_i, &neg).into_iter().map(|(k, x)| (k, -x)));
        }
        positive.push(accumulate(plus));
        negative.push(accumulate(minus));
        algorithm.push(ws);
    }
    Ok(HistoryStates { positive, negative, algorithm })
}

/// Measured quantity against the bound it must respect.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub input: usize,
    pub measured: f64,
    pub bound: f64,
}

impl BoundCheck {
    pub fn holds(&self, slack: f64) -> bool {
        self.measured <= self.bound + slack
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositiveOrthogonality {
    /// `max |⟨ψ|w_+(i)⟩|` over forward, backward and correct-answer reversal states.
    pub max_overlap: f64,
    pub projections: Vec<BoundCheck>,
}

pub fn verify_positive_orthogonality(
    states: &TransitionStateSet,
    history: &HistoryStates,
    sub: &VariableTimeSubroutine,
    drop: f64,
) -> PositiveOrthogonality {
    let mut max_overlap: f64 = 0.0;
    for s in &states.states {
        if s.kind == StateKind::Reversal && s.answer != sub.target()[s.input] {
            continue;
        }
        for w in &history.positive {
            max_overlap = max_overlap.max(sparse_inner(&s.vector, w).norm());
        }
    }
    let buckets = [states.bucket_subspace(0, drop), states.bucket_subspace(1, drop)];
    let mut projections = Vec::new();
    for (i, w) in history.positive.iter().enumerate() {
        let dense = sparse_to_dense(w, states.dim());
        let bound = 2.0 * sub.stopping_profile(i).expectation(&states.alpha, Expectation::ErrorOverWeightAtStop);
        for (b, space) in buckets.iter().enumerate() {
            projections.push(BoundCheck {
                name: format!("|Pi_{b} w+|^2"),
                input: i,
                measured: linalg::norm_sqr(&space.project(&dense)),
                bound,
            });
        }
    }
    PositiveOrthogonality { max_overlap, projections }
}

pub fn verify_negative_projection(
    states: &TransitionStateSet,
    history: &HistoryStates,
    sub: &VariableTimeSubroutine,
    ext: &ReversibleExtension,
    drop: f64,
) -> Vec<BoundCheck> {
    let even = states.bucket_subspace(0, drop);
    let odd = states.bucket_subspace(1, drop);
    let layout = &states.layout;
    let start = layout.slot(0, 0, 0).expect("initial slot exists");
    let mut checks = Vec::new();
    for (i, w) in history.negative.iter().enumerate() {
        let dense = sparse_to_dense(w, states.dim());
        let bound = 2.0 * sub.stopping_profile(i).expectation(&states.alpha, Expectation::ErrorAtStop);
        checks.push(BoundCheck {
            name: "|(I-Pi_0) w-|^2".into(),
            input: i,
            measured: linalg::norm_sqr(&even.reject(&dense)),
            bound,
        });
        let mut shifted = dense.clone();
        shifted[layout.index(Direction::Forward, i, start)] -= real(1.0);
        for (r, x) in ext.apply(i).iter().enumerate() {
            shifted[layout.index(Direction::Backward, r, start)] += *x;
        }
        checks.push(BoundCheck {
            name: "|(I-Pi_1)(w- - start)|^2".into(),
            input: i,
            measured: linalg::norm_sqr(&odd.reject(&shifted)),
            bound,
        });
    }
    checks
}

/// `‖w_+(i)‖²` and `‖w_−(i)‖²` against `2E[Σ 1/α_t]` and `2E[Σ α_t]`.
pub fn history_norm_checks(
    history: &HistoryStates,
    sub: &VariableTimeSubroutine,
    alpha: &AlphaWeights,
) -> Vec<(f64, f64, f64, f64)> {
    history
        .positive
        .iter()
        .zip(&history.negative)
        .enumerate()
        .map(|(i, (p, n))| {
            let prof = sub.stopping_profile(i);
            let norm = |v: &Sparse| v.iter().map(|(_, x)| x.norm_sqr()).sum::<f64>();
            (
                norm(p),
                2.0 * prof.expectation(alpha, Expectation::SumInverse),
                norm(n),
                2.0 * prof.expectation(alpha, Expectation::SumDirect),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subroutine::{build_from_classical, AlphaSchedule, ClassicalInput, ClassicalSpec};

    fn single(t: usize, answer: usize) -> (VariableTimeSubroutine, ReversibleExtension) {
        build_from_classical(&ClassicalSpec { horizon: None, inputs: vec![ClassicalInput::deterministic(t, answer)] })
            .unwrap()
    }

    #[test]
    fn counts_for_single_step() {
        let (sub, ext) = single(1, 0);
        let alpha = AlphaWeights::schedule(AlphaSchedule::Const, 1);
        let set = build_transition_states(&sub, &ext, &alpha).unwrap();
        assert_eq!(set.bucket(0).count(), 4);
        assert_eq!(set.bucket(1).count(), 2);
    }

    #[test]
    fn forward_norms_follow_weights() {
        let (sub, ext) = single(3, 1);
        let alpha = AlphaWeights::schedule(AlphaSchedule::Linear, 3);
        let set = build_transition_states(&sub, &ext, &alpha).unwrap();
        for s in set.states.iter().filter(|s| s.kind == StateKind::Forward) {
            let n: f64 = s.vector.iter().map(|(_, x)| x.norm_sqr()).sum();
            assert!((n - alpha.get(s.step) - alpha.get(s.step + 1)).abs() < 1e-12);
        }
    }

    #[test]
    fn decode_inverts_index() {
        let (sub, ext) = single(3, 0);
        let layout = StateLayout::new(&sub, &ext);
        for k in 0..layout.dim() {
            let (d, r, a, z, t) = layout.decode(k);
            assert_eq!(layout.index(d, r, layout.slot(a, z, t).unwrap()), k);
        }
    }
}
