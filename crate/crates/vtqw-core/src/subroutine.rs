//! Explicit-matrix model of reversible variable-time subroutines.
//!
//! A subroutine acts on `span{|a, z⟩}` for answers `a` and workspace basis
//! states `z`. Each workspace state carries the step `t ∈ 1..=T` at which it
//! becomes a halting state, so `H_t = span{|a, z⟩ : time(z) ≤ t}`. The basis
//! index of `|a, z⟩` is `a · |Z| + z`, and the initial state is `|0, 0⟩`.

use serde::{Deserialize, Serialize};

use crate::config::{check_dimension, MAX_HORIZON};
use crate::linalg::{self, real, CMatrix, CVector, ONE, ZERO};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct VariableTimeSubroutine {
    horizon: usize,
    answers: usize,
    halt_time: Vec<usize>,
    /// `unitaries[i][t - 1] = U_t^i`.
    unitaries: Vec<Vec<CMatrix>>,
    target: Vec<usize>,
}

/// The maps `A` and `A_a` that let a subroutine be run forward, applied and
/// uncomputed. Matrices map the input register to the output register.
#[derive(Clone, Debug)]
pub struct ReversibleExtension {
    map: CMatrix,
    answer_maps: Vec<CMatrix>,
}

impl ReversibleExtension {
    pub fn new(map: CMatrix, answer_maps: Vec<CMatrix>) -> Result<Self> {
        if answer_maps.iter().any(|m| m.shape() != map.shape()) {
            return Err(Error::DimensionMismatch("answer maps must match the shape of A".into()));
        }
        Ok(Self { map, answer_maps })
    }

    /// `A|i⟩ = (−1)^{g(i)}|i⟩` with `A_a|i⟩ = (−1)^a|i⟩`, for bit-valued `g`.
    pub fn phase(target: &[usize]) -> Self {
        let n = target.len();
        let map = CMatrix::from_fn(n, n, |r, c| {
            if r == c {
                real(if target[r].is_multiple_of(2) { 1.0 } else { -1.0 })
            } else {
                ZERO
            }
        });
        let id = CMatrix::identity(n, n);
        Self { map, answer_maps: vec![id.clone(), -id] }
    }

    /// `A` is the identity between equally indexed registers, `A_0 = A` and
    /// `A_1 = −A`; used when the subroutine computes `g ≡ 0` and errors flip a phase.
    pub fn relabel(n: usize) -> Self {
        let id = CMatrix::identity(n, n);
        Self { map: id.clone(), answer_maps: vec![id.clone(), -id] }
    }

    pub fn map(&self) -> &CMatrix {
        &self.map
    }

    pub fn answer_map(&self, a: usize) -> &CMatrix {
        &self.answer_maps[a]
    }

    pub fn input_dim(&self) -> usize {
        self.map.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.map.nrows()
    }

    /// `A|i⟩` as a vector in the output register.
    pub fn apply(&self, i: usize) -> CVector {
        self.map.column(i).into_owned()
    }

    pub fn apply_answer(&self, a: usize, i: usize) -> CVector {
        self.answer_maps[a].column(i).into_owned()
    }
}

impl VariableTimeSubroutine {
    /// Assembles a subroutine; `unitaries[i][t-1]` is `U_t^i`. The horizon is
    /// padded to an odd number with identity steps.
    pub fn new(
        answers: usize,
        halt_time: Vec<usize>,
        mut unitaries: Vec<Vec<CMatrix>>,
        target: Vec<usize>,
    ) -> Result<Self> {
        if answers == 0 || halt_time.is_empty() {
            return Err(Error::InvalidSubroutine("answer and workspace sets must be nonempty".into()));
        }
        if unitaries.len() != target.len() || target.is_empty() {
            return Err(Error::DimensionMismatch("one unitary sequence and one target per input".into()));
        }
        let mut horizon = unitaries[0].len();
        if unitaries.iter().any(|u| u.len() != horizon) || horizon == 0 {
            return Err(Error::DimensionMismatch("every input needs the same nonzero horizon".into()));
        }
        if let Some(&t) = halt_time.iter().find(|&&t| t == 0 || t > horizon) {
            return Err(Error::InvalidSubroutine(format!("halting time {t} outside 1..={horizon}")));
        }
        if let Some(&a) = target.iter().find(|&&a| a >= answers) {
            return Err(Error::InvalidSubroutine(format!("target answer {a} out of range")));
        }
        let dim = answers * halt_time.len();
        check_dimension(dim)?;
        if unitaries.iter().flatten().any(|u| u.shape() != (dim, dim)) {
            return Err(Error::DimensionMismatch(format!("unitaries must be {dim}×{dim}")));
        }
        if horizon.is_multiple_of(2) {
            horizon += 1;
            for seq in &mut unitaries {
                seq.push(CMatrix::identity(dim, dim));
            }
        }
        if horizon > MAX_HORIZON {
            return Err(Error::HorizonCap { horizon, cap: MAX_HORIZON });
        }
        Ok(Self { horizon, answers, halt_time, unitaries, target })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn answers(&self) -> usize {
        self.answers
    }

    pub fn inputs(&self) -> usize {
        self.target.len()
    }

    pub fn workspace(&self) -> usize {
        self.halt_time.len()
    }

    /// Halting step of each workspace basis state.
    pub fn halt_times(&self) -> &[usize] {
        &self.halt_time
    }

    pub fn target(&self) -> &[usize] {
        &self.target
    }

    /// Dimension of `span{|a, z⟩}`.
    pub fn local_dim(&self) -> usize {
        self.answers * self.halt_time.len()
    }

    pub fn index(&self, a: usize, z: usize) -> usize {
        a * self.halt_time.len() + z
    }

    pub fn unitary(&self, i: usize, t: usize) -> &CMatrix {
        &self.unitaries[i][t - 1]
    }

    /// Diagonal of the projector onto `span{|a, z⟩ : pred(time(z))}`.
    fn mask(&self, pred: impl Fn(usize) -> bool) -> Vec<bool> {
        (0..self.local_dim()).map(|k| pred(self.halt_time[k % self.halt_time.len()])).collect()
    }

    fn masked(v: &CVector, mask: &[bool]) -> CVector {
        CVector::from_iterator(v.len(), v.iter().zip(mask).map(|(&x, &m)| if m { x } else { ZERO }))
    }

    /// `|w^t(i)⟩` for `t = 0..=T` via `w^t = U_t Π_{≥t} w^{t−1}`.
    pub fn algorithm_states(&self, i: usize) -> Vec<CVector> {
        let mut states = Vec::with_capacity(self.horizon + 1);
        let mut w = linalg::basis_vector(self.local_dim(), 0);
        states.push(w.clone());
        for t in 1..=self.horizon {
            let live = self.mask(|s| s >= t);
            w = self.unitary(i, t) * Self::masked(&w, &live);
            states.push(w.clone());
        }
        states
    }

    /// `Π_{≥t} U_t ⋯ U_1 |0,0⟩` for `t = 0..=T`, the unprojected form of the
    /// algorithm states.
    pub fn algorithm_states_unprojected(&self, i: usize) -> Vec<CVector> {
        let mut states = Vec::with_capacity(self.horizon + 1);
        let mut full = linalg::basis_vector(self.local_dim(), 0);
        states.push(full.clone());
        for t in 1..=self.horizon {
            full = self.unitary(i, t) * &full;
            states.push(Self::masked(&full, &self.mask(|s| s >= t)));
        }
        states
    }

    pub fn stopping_profile(&self, i: usize) -> StoppingProfile {
        let states = self.algorithm_states(i);
        let mut halt = vec![0.0; self.horizon + 1];
        let mut error = vec![0.0; self.horizon + 1];
        let nz = self.halt_time.len();
        for t in 1..=self.horizon {
            let w = &states[t];
            let mut total = 0.0;
            let mut wrong = 0.0;
            for (k, x) in w.iter().enumerate() {
                if self.halt_time[k % nz] == t {
                    total += x.norm_sqr();
                    if k / nz != self.target[i] {
                        wrong += x.norm_sqr();
                    }
                }
            }
            halt[t] = total;
            error[t] = if total > 0.0 { wrong / total } else { 0.0 };
        }
        StoppingProfile { halt, error }
    }

    /// `Ũ_t = Σ_i A|i⟩⟨i|A† ⊗ U_t^i` on the output register tensored with `span{|a,z⟩}`.
    pub fn tilde_unitary(&self, ext: &ReversibleExtension, t: usize) -> CMatrix {
        let d = self.local_dim();
        let n_out = ext.output_dim();
        let mut out = CMatrix::from_element(n_out * d, n_out * d, ZERO);
        for i in 0..self.inputs() {
            let ai = ext.apply(i);
            let proj = &ai * ai.adjoint();
            out += proj.kronecker(self.unitary(i, t));
        }
        out
    }

    /// Checks every structural invariant and reports the worst residual of each.
    pub fn validate(&self, ext: &ReversibleExtension, tol: f64) -> Result<ValidationReport> {
        if ext.input_dim() != self.inputs() {
            return Err(Error::DimensionMismatch(format!(
                "extension acts on {} inputs, subroutine has {}",
                ext.input_dim(),
                self.inputs()
            )));
        }
        if ext.answer_maps.len() != self.answers {
            return Err(Error::DimensionMismatch(format!(
                "{} answer maps for {} answers",
                ext.answer_maps.len(),
                self.answers
            )));
        }
        let mut report = ValidationReport::new(tol);
        let mut unitarity: f64 = 0.0;
        let mut invariance: f64 = 0.0;
        for i in 0..self.inputs() {
            for t in 1..=self.horizon {
                let u = self.unitary(i, t);
                unitarity = unitarity.max(linalg::unitarity_residual(u));
                let settled = self.mask(|s| s < t);
                for (k, &fixed) in settled.iter().enumerate() {
                    if fixed {
                        let col = u.column(k);
                        for (r, x) in col.iter().enumerate() {
                            let target = if r == k { ONE } else { ZERO };
                            invariance = invariance.max((x - target).norm());
                        }
                    }
                }
            }
        }
        report.push("unitarity", unitarity);
        report.push("halted subspace invariance", invariance);
        let law = (0..self.inputs())
            .map(|i| (self.stopping_profile(i).halt.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        report.push("stopping law normalization", law);
        report.push("odd horizon", if self.horizon % 2 == 1 { 0.0 } else { 1.0 });
        let a = &ext.map;
        report.push("A is an isometry", linalg::identity_residual(&(a.adjoint() * a)));
        let mut agree: f64 = 0.0;
        for (i, &g) in self.target.iter().enumerate() {
            agree = agree.max(linalg::max_abs(&(ext.apply_answer(g, i) - ext.apply(i))));
        }
        report.push("A_g(i)|i> = A|i>", agree);
        let mut cross: f64 = 0.0;
        for am in &ext.answer_maps {
            let m = a.adjoint() * am;
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    if r != c {
                        cross = cross.max(m[(r, c)].norm());
                    }
                }
            }
        }
        report.push("<i'|A^dag A_a|i> = 0", cross);
        Ok(report)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub tolerance: f64,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn new(tolerance: f64) -> Self {
        Self { tolerance, checks: Vec::new() }
    }

    pub fn push(&mut self, name: &str, residual: f64) {
        let passed = residual <= self.tolerance;
        self.checks.push(Check { name: name.to_owned(), residual, passed });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

/// Law of the stopping time `T_i` with the conditional error at each step.
/// Both vectors are indexed by `t = 0..=T`; entry 0 is always zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingProfile {
    pub halt: Vec<f64>,
    pub error: Vec<f64>,
}

impl StoppingProfile {
    pub fn horizon(&self) -> usize {
        self.halt.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.halt.iter().enumerate().map(|(t, p)| t as f64 * p).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.halt.iter().enumerate().map(|(t, p)| (t * t) as f64 * p).sum()
    }

    /// Total error `ε_i = Σ_t p̄(t) ε^t`.
    pub fn total_error(&self) -> f64 {
        self.halt.iter().zip(&self.error).map(|(p, e)| p * e).sum()
    }

    /// Probability of halting strictly before step `t`.
    pub fn halted_before(&self, t: usize) -> f64 {
        self.halt[..t].iter().sum()
    }

    /// `E[Σ_{t=0}^{T_i} f(t)]`.
    pub fn expected_sum(&self, f: impl Fn(usize) -> f64) -> f64 {
        let mut acc = 0.0;
        let mut prefix = 0.0;
        for (t, p) in self.halt.iter().enumerate() {
            prefix += f(t);
            acc += p * prefix;
        }
        acc
    }

    pub fn expectation(&self, alpha: &AlphaWeights, mode: Expectation) -> f64 {
        match mode {
            Expectation::SumDirect => self.expected_sum(|t| alpha.get(t)),
            Expectation::SumInverse => self.expected_sum(|t| 1.0 / alpha.get(t)),
            Expectation::ErrorAtStop => {
                self.halt.iter().enumerate().map(|(t, p)| p * alpha.get(t) * self.error[t]).sum()
            }
            Expectation::ErrorOverWeightAtStop => {
                self.halt.iter().enumerate().map(|(t, p)| p * self.error[t] / alpha.get(t)).sum()
            }
        }
    }
}

/// Which weighted stopping-time expectation to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    /// `E[Σ_{t=0}^{T_i} 1/α_t]`.
    SumInverse,
    /// `E[Σ_{t=0}^{T_i} α_t]`.
    SumDirect,
    /// `E[α_{T_i} ε_i^{T_i}]`.
    ErrorAtStop,
    /// `E[ε_i^{T_i} / α_{T_i}]`.
    ErrorOverWeightAtStop,
}

/// Named weight schedules for the history-state weights `α_t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaSchedule {
    /// `α_t = 1`.
    Const,
    /// `α_t = t + 1`.
    Linear,
    /// `α_t = 1/(t + 1)`.
    Inverse,
}

/// Positive weights `α_0..=α_T` with `α_0 = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaWeights(Vec<f64>);

impl AlphaWeights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.first() != Some(&1.0) {
            return Err(Error::InvalidWeights("α_0 must equal 1".into()));
        }
        if values.iter().any(|&a| !(a.is_finite() && a > 0.0)) {
            return Err(Error::InvalidWeights("weights must be positive and finite".into()));
        }
        Ok(Self(values))
    }

    pub fn schedule(kind: AlphaSchedule, horizon: usize) -> Self {
        Self(
            (0..=horizon)
                .map(|t| match kind {
                    AlphaSchedule::Const => 1.0,
                    AlphaSchedule::Linear => (t + 1) as f64,
                    AlphaSchedule::Inverse => 1.0 / (t + 1) as f64,
                })
                .collect(),
        )
    }

    pub fn get(&self, t: usize) -> f64 {
        self.0[t]
    }

    pub fn horizon(&self) -> usize {
        self.0.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// A per-input classical description: the law of the halting step, the
/// intended answer and the conditional error at each step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalInput {
    pub halt_law: Vec<(usize, f64)>,
    pub answer: usize,
    #[serde(default)]
    pub errors: Vec<(usize, f64)>,
}

impl ClassicalInput {
    pub fn deterministic(t: usize, answer: usize) -> Self {
        Self { halt_law: vec![(t, 1.0)], answer, errors: Vec::new() }
    }

    fn error_at(&self, t: usize) -> f64 {
        self.errors.iter().filter(|(s, _)| *s == t).map(|(_, e)| *e).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSpec {
    /// Minimum horizon; raised to the largest support time and padded to odd.
    #[serde(default, rename = "T")]
    pub horizon: Option<usize>,
    pub inputs: Vec<ClassicalInput>,
}

/// Realizes classical halting laws as explicit unitaries over a binary answer.
///
/// The workspace holds one state per time in the union of the supports; state 0
/// is the one for the latest time and carries the running amplitude. At each
/// support time a plane rotation moves the right share of amplitude onto that
/// step's halting state, split between the intended and the flipped answer.
pub fn build_classical_subroutine(spec: &ClassicalSpec) -> Result<VariableTimeSubroutine> {
    if spec.inputs.is_empty() {
        return Err(Error::InvalidSubroutine("no inputs".into()));
    }
    let mut support: Vec<usize> = Vec::new();
    for (i, input) in spec.inputs.iter().enumerate() {
        if input.answer > 1 {
            return Err(Error::InvalidSubroutine(format!("input {i}: answer must be a bit")));
        }
        let total: f64 = input.halt_law.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 || input.halt_law.iter().any(|&(_, p)| p.is_nan() || p < 0.0) {
            return Err(Error::InvalidSubroutine(format!("input {i}: halting law sums to {total}")));
        }
        for &(t, p) in &input.halt_law {
            if t == 0 {
                return Err(Error::InvalidSubroutine(format!("input {i}: halting time 0")));
            }
            if p > 0.0 && !support.contains(&t) {
                support.push(t);
            }
        }
        if input.errors.iter().any(|&(_, e)| !(0.0..=1.0).contains(&e)) {
            return Err(Error::InvalidSubroutine(format!("input {i}: error outside [0, 1]")));
        }
    }
    support.sort_unstable();
    let last = *support.last().expect("laws are normalized so the support is nonempty");
    let horizon = spec.horizon.unwrap_or(0).max(last);
    let padded = horizon + (1 - horizon % 2);
    if padded > MAX_HORIZON {
        return Err(Error::HorizonCap { horizon: padded, cap: MAX_HORIZON });
    }
    // Workspace order: the latest support time first, then the rest ascending.
    let mut times = vec![last];
    times.extend(support.iter().copied().filter(|&t| t != last));
    let nz = times.len();
    let dim = 2 * nz;
    let slot = |t: usize| times.iter().position(|&s| s == t);

    let mut unitaries = Vec::with_capacity(spec.inputs.len());
    for input in &spec.inputs {
        let law = |t: usize| -> f64 { input.halt_law.iter().filter(|(s, _)| *s == t).map(|(_, p)| p).sum() };
        let g = input.answer;
        let mut seq = Vec::with_capacity(horizon);
        let mut remaining = 1.0f64;
        for t in 1..=horizon {
            let mut u = CMatrix::identity(dim, dim);
            if let Some(z) = slot(t) {
                let eps = input.error_at(t);
                let (good, bad) = ((1.0 - eps).sqrt(), eps.sqrt());
                if t == last {
                    // Rotate the answer bit of the running state.
                    let (r_g, r_b) = (g * nz, (1 - g) * nz);
                    let mut col0 = vec![0.0; dim];
                    col0[r_g] += good;
                    col0[r_b] += bad;
                    let mut col1 = vec![0.0; dim];
                    col1[r_g] += -bad;
                    col1[r_b] += good;
                    // Columns 0 and nz span the answer qubit at the latest slot.
                    for r in 0..dim {
                        u[(r, 0)] = real(col0[r]);
                        u[(r, nz)] = real(col1[r]);
                    }
                } else {
                    let p = law(t);
                    let s2 = if remaining > 1e-300 { (p / remaining).clamp(0.0, 1.0) } else { 0.0 };
                    let (s, c) = (s2.sqrt(), (1.0 - s2).sqrt());
                    remaining -= p;
                    let mut phi = vec![0.0; dim];
                    phi[g * nz + z] = good;
                    phi[(1 - g) * nz + z] = bad;
                    // Rotation in span{|0,0⟩, φ}; identity on the complement.
                    for r in 0..dim {
                        for col in 0..dim {
                            let e0r = if r == 0 { 1.0 } else { 0.0 };
                            let e0c = if col == 0 { 1.0 } else { 0.0 };
                            let delta =
                                (c - 1.0) * (e0r * e0c + phi[r] * phi[col]) + s * (phi[r] * e0c - e0r * phi[col]);
                            u[(r, col)] += real(delta);
                        }
                    }
                }
            }
            seq.push(u);
        }
        unitaries.push(seq);
    }
    let halt_time: Vec<usize> = times.clone();
    let target: Vec<usize> = spec.inputs.iter().map(|x| x.answer).collect();
    VariableTimeSubroutine::new(2, halt_time, unitaries, target)
}

/// Classical builder with the phase extension `A|i⟩ = (−1)^{g(i)}|i⟩`.
pub fn build_from_classical(spec: &ClassicalSpec) -> Result<(VariableTimeSubroutine, ReversibleExtension)> {
    let sub = build_classical_subroutine(spec)?;
    let ext = ReversibleExtension::phase(sub.target());
    Ok((sub, ext))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(inputs: Vec<ClassicalInput>) -> ClassicalSpec {
        ClassicalSpec { horizon: None, inputs }
    }

    #[test]
    fn trivial_subroutine_validates() {
        let sub = VariableTimeSubroutine::new(2, vec![1], vec![vec![CMatrix::identity(2, 2)]], vec![0]).unwrap();
        let ext = ReversibleExtension::phase(&[0]);
        let report = sub.validate(&ext, 1e-9).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(sub.stopping_profile(0).halt, vec![0.0, 1.0]);
    }

    #[test]
    fn invariance_violation_is_named() {
        // Workspace {z0: t=1, z1: t=2}; U_2 swaps z0 and z1, disturbing H_1.
        let mut swap = CMatrix::identity(4, 4);
        swap.swap_columns(0, 1);
        swap.swap_columns(2, 3);
        let id = CMatrix::identity(4, 4);
        let sub = VariableTimeSubroutine::new(2, vec![1, 2], vec![vec![id, swap]], vec![0]).unwrap();
        let report = sub.validate(&ReversibleExtension::phase(&[0]), 1e-9).unwrap();
        assert_eq!(report.failures(), vec!["halted subspace invariance"]);
    }

    #[test]
    fn deterministic_halt_moments() {
        let sub = build_classical_subroutine(&spec(vec![ClassicalInput::deterministic(3, 0)])).unwrap();
        let prof = sub.stopping_profile(0);
        assert!((prof.halt[3] - 1.0).abs() < 1e-12);
        assert!((prof.mean() - 3.0).abs() < 1e-12);
        assert!((prof.second_moment() - 9.0).abs() < 1e-12);
        assert_eq!(prof.total_error(), 0.0);
    }

    #[test]
    fn single_step_law_pads_to_odd() {
        let (sub, ext) = build_from_classical(&spec(vec![ClassicalInput::deterministic(1, 1)])).unwrap();
        assert_eq!(sub.horizon(), 1);
        assert_eq!(ext.map()[(0, 0)], real(-1.0));
        let even = build_classical_subroutine(&spec(vec![ClassicalInput::deterministic(2, 0)])).unwrap();
        assert_eq!(even.horizon(), 3);
    }

    #[test]
    fn rejects_bad_laws() {
        let bad = ClassicalInput { halt_law: vec![(1, 0.5)], answer: 0, errors: vec![] };
        assert!(build_classical_subroutine(&spec(vec![bad])).is_err());
        let far = ClassicalInput::deterministic(64, 0);
        assert!(matches!(build_classical_subroutine(&spec(vec![far])), Err(Error::HorizonCap { .. })));
    }

    #[test]
    fn weighted_expectations() {
        let prof =
            build_classical_subroutine(&spec(vec![ClassicalInput::deterministic(3, 0)])).unwrap().stopping_profile(0);
        let one = AlphaWeights::schedule(AlphaSchedule::Const, 3);
        assert!((prof.expectation(&one, Expectation::SumDirect) - 4.0).abs() < 1e-12);
        let lin = AlphaWeights::schedule(AlphaSchedule::Linear, 3);
        assert!((prof.expectation(&lin, Expectation::SumDirect) - 10.0).abs() < 1e-12);
        assert!((prof.expectation(&lin, Expectation::SumInverse) - 25.0 / 12.0).abs() < 1e-12);
        assert_eq!(prof.expectation(&lin, Expectation::ErrorAtStop), 0.0);
        assert!(AlphaWeights::new(vec![2.0, 1.0]).is_err());
    }
}
