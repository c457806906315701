//! Composition of an outer query algorithm with a variable-time inner
//! subroutine answering its queries.
//!
//! # Outer algorithms
//!
//! An outer algorithm acts on `span{|i⟩|b, y⟩}` with `i ∈ {0} ∪ [n]`, an
//! output bit `b` and a workspace `y`. Coordinates are ordered by
//! `(i, b, y)`, so `index = (2i + b)·|Y| + y`. Step `ℓ` (0-based) applies
//! `V_{ℓ+1}`; a query step applies `O_g|i, b, y⟩ = (−1)^{g_i}|i, b, y⟩` with
//! `g_0 = 0`. Queries sit at even `ℓ` and `L` is even, which the constructor
//! enforces by inserting identities.
//!
//! # Composed space
//!
//! Coordinates are laid out in four blocks:
//!
//! * inner copies: one transition-state space per query level `ℓ ∈ Q` and
//!   per `(b, y)`;
//! * junction coordinates `(i, b, y, ℓ)` for `ℓ ∈ 0..=L`, where the outer
//!   state lives between queries;
//! * terminal coordinates `(i, b, y)` reached through the output weights;
//! * the initial coordinate, which is `ψ0`.
//!
//! Levels outside `Q` carry no inner copy: such coordinates would be
//! orthogonal to every state and to `ψ0`, so they only add phase-0
//! eigenvectors that `ψ0` never sees.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::linalg::{self, real, CMatrix, CVector, C64, ONE, ZERO};
use crate::phase_estimation::{
    audit_decision, decide_with_spectrum, verify_negative_witness, verify_positive_witness, Decision, DecisionConfig,
    MarginAudit, NegativeWitnessReport, PhaseEstimationInstance, PositiveWitnessReport, WitnessCertificate,
};
use crate::subroutine::{AlphaSchedule, AlphaWeights, ReversibleExtension, VariableTimeSubroutine};
use crate::vt_states::{build_history_states, build_transition_states, Direction, HistoryStates, Sparse, StateLayout};
use crate::{Error, Result};

/// Default `η` in the error condition `ε_avg ≤ η / (Q(L + Q·T_avg))`.
pub const DEFAULT_ETA: f64 = 1e-3;

/// Floor on the weight of the wrong-output terminal edges, relative to `w0`.
pub const OUTPUT_WEIGHT_FLOOR: f64 = 1e-6;

/// Positive-witness complexity guaranteed by the parameter choice.
pub const C_PLUS: f64 = 18.0;

#[derive(Clone, Debug)]
pub enum OuterStep {
    Unitary(CMatrix),
    Query,
}

#[derive(Clone, Debug)]
pub struct OuterAlgorithm {
    inputs: usize,
    workspace: usize,
    steps: Vec<OuterStep>,
    /// `f(g)` indexed by `Σ_k g_k 2^k`.
    truth_table: Vec<bool>,
    padding: usize,
}

fn bits(n: usize, index: usize) -> Vec<usize> {
    (0..n).map(|k| (index >> k) & 1).collect()
}

impl OuterAlgorithm {
    /// Validates the steps and pads with identities so that queries sit at
    /// even positions and the length is even.
    pub fn new(inputs: usize, workspace: usize, steps: Vec<OuterStep>, truth_table: Vec<bool>) -> Result<Self> {
        if inputs == 0 || workspace == 0 {
            return Err(Error::InvalidOuter("need at least one input and one workspace state".into()));
        }
        if inputs > 16 || truth_table.len() != 1 << inputs {
            return Err(Error::InvalidOuter(format!(
                "truth table has {} entries for {inputs} inputs",
                truth_table.len()
            )));
        }
        let dim = (inputs + 1) * 2 * workspace;
        for (k, step) in steps.iter().enumerate() {
            if let OuterStep::Unitary(v) = step {
                if v.shape() != (dim, dim) {
                    return Err(Error::InvalidOuter(format!("step {k} has shape {:?}, expected {dim}", v.shape())));
                }
                let residual = linalg::unitarity_residual(v);
                if residual > 1e-9 {
                    return Err(Error::InvalidOuter(format!("step {k} is not unitary (residual {residual:e})")));
                }
            }
        }
        let identity = || OuterStep::Unitary(CMatrix::identity(dim, dim));
        let mut padded = Vec::with_capacity(steps.len() + 2);
        let mut padding = 0;
        for step in steps {
            if matches!(step, OuterStep::Query) && padded.len() % 2 == 1 {
                padded.push(identity());
                padding += 1;
            }
            padded.push(step);
        }
        if padded.len() % 2 == 1 {
            padded.push(identity());
            padding += 1;
        }
        Ok(Self { inputs, workspace, steps: padded, truth_table, padding })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn workspace(&self) -> usize {
        self.workspace
    }

    /// `L`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[OuterStep] {
        &self.steps
    }

    /// Identities inserted by the constructor.
    pub fn padding(&self) -> usize {
        self.padding
    }

    /// Levels `ℓ` whose next step is a query.
    pub fn query_levels(&self) -> Vec<usize> {
        self.steps.iter().enumerate().filter(|(_, s)| matches!(s, OuterStep::Query)).map(|(l, _)| l).collect()
    }

    pub fn local_dim(&self) -> usize {
        (self.inputs + 1) * 2 * self.workspace
    }

    pub fn index(&self, i: usize, b: usize, y: usize) -> usize {
        (2 * i + b) * self.workspace + y
    }

    /// `(i, b, y)` of a local coordinate.
    pub fn decode(&self, k: usize) -> (usize, usize, usize) {
        let y = k % self.workspace;
        let ib = k / self.workspace;
        (ib / 2, ib % 2, y)
    }

    pub fn evaluate(&self, g: &[usize]) -> Result<bool> {
        self.check_oracle(g)?;
        let index: usize = g.iter().enumerate().map(|(k, &x)| x << k).sum();
        Ok(self.truth_table[index])
    }

    fn check_oracle(&self, g: &[usize]) -> Result<()> {
        if g.len() != self.inputs || g.iter().any(|&x| x > 1) {
            return Err(Error::InvalidOuter(format!("oracle must be {} bits, got {g:?}", self.inputs)));
        }
        Ok(())
    }

    pub fn run(&self, g: &[usize]) -> Result<OuterRun> {
        self.check_oracle(g)?;
        let mut state = linalg::basis_vector(self.local_dim(), 0);
        let mut states = vec![state.clone()];
        for step in &self.steps {
            state = match step {
                OuterStep::Unitary(v) => v * &state,
                OuterStep::Query => {
                    let mut next = state.clone();
                    for k in 0..next.len() {
                        let (i, _, _) = self.decode(k);
                        if i > 0 && g[i - 1] == 1 {
                            next[k] = -next[k];
                        }
                    }
                    next
                }
            };
            states.push(state.clone());
        }
        let output_one = (0..self.local_dim()).filter(|&k| self.decode(k).1 == 1).map(|k| state[k].norm_sqr()).sum();
        Ok(OuterRun { states, output_one })
    }

    /// `ε_O = max_g |Pr[output 1] − f(g)|`.
    pub fn error(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for index in 0..1usize << self.inputs {
            let g = bits(self.inputs, index);
            let run = self.run(&g)?;
            let want = if self.truth_table[index] { 1.0 } else { 0.0 };
            worst = worst.max((run.output_one - want).abs());
        }
        Ok(worst)
    }

    pub fn query_weights(&self, g: &[usize]) -> Result<QueryWeights> {
        let levels = self.query_levels();
        if levels.is_empty() {
            return Err(Error::InvalidOuter("the algorithm makes no queries".into()));
        }
        let run = self.run(g)?;
        let per_level: Vec<(usize, Vec<f64>)> = levels
            .iter()
            .map(|&l| {
                let mut q = vec![0.0; self.inputs + 1];
                for (k, x) in run.states[l].iter().enumerate() {
                    q[self.decode(k).0] += x.norm_sqr();
                }
                (l, q)
            })
            .collect();
        let count = levels.len() as f64;
        let average = (0..=self.inputs).map(|i| per_level.iter().map(|(_, q)| q[i]).sum::<f64>() / count).collect();
        Ok(QueryWeights { per_level, average })
    }

    /// `V_1 = I`, `V_2 = H` on `i ∈ {0, 1}`, query, `H`, then copy `i` into `b`.
    pub fn identity_bit() -> Self {
        let dim = 4;
        let h = hadamard_on(1, 1, 0, 1);
        let mut copy = CMatrix::zeros(dim, dim);
        let map = |i: usize, b: usize| 2 * i + b;
        for i in 0..2 {
            for b in 0..2 {
                copy[(map(i, b ^ i), map(i, b))] = ONE;
            }
        }
        Self::new(
            1,
            1,
            vec![OuterStep::Unitary(h.clone()), OuterStep::Query, OuterStep::Unitary(h), OuterStep::Unitary(copy)],
            vec![false, true],
        )
        .expect("the identity algorithm is valid")
    }

    /// Exact two-query algorithm for `OR(g_1, g_2)`.
    pub fn or2() -> Self {
        Self::two_bit(false)
    }

    /// Exact two-query algorithm for `AND(g_1, g_2)`.
    pub fn and2() -> Self {
        Self::two_bit(true)
    }

    /// Learns `g_1` into `y` by phase kickback on `{0, 1}`, moves that branch
    /// back to `i = 0`, then learns `g_2` on `{0, 2}` and combines.
    fn two_bit(conjunction: bool) -> Self {
        let (n, ny) = (2, 2);
        let dim = (n + 1) * 2 * ny;
        let idx = |i: usize, b: usize, y: usize| (2 * i + b) * ny + y;
        let permutation = |f: &dyn Fn(usize, usize, usize) -> (usize, usize, usize)| {
            let mut m = CMatrix::zeros(dim, dim);
            for i in 0..=n {
                for b in 0..2 {
                    for y in 0..ny {
                        let (i2, b2, y2) = f(i, b, y);
                        m[(idx(i2, b2, y2), idx(i, b, y))] = ONE;
                    }
                }
            }
            m
        };
        let first = hadamard_on(n, ny, 0, 1);
        let second = hadamard_on(n, ny, 0, 2);
        let record = permutation(&|i, b, y| (i, b, if i == 1 { y ^ 1 } else { y }));
        let merge = permutation(&|i, b, y| match (i, y) {
            (1, 1) => (0, b, 1),
            (0, 1) => (1, b, 1),
            _ => (i, b, y),
        });
        let combine = permutation(&|i, b, y| {
            let flip = if conjunction { y == 1 && i == 2 } else { y == 1 || i == 2 };
            (i, b ^ usize::from(flip), y)
        });
        let table = (0..4).map(|g| if conjunction { g == 3 } else { g != 0 }).collect();
        let u = OuterStep::Unitary;
        Self::new(
            n,
            ny,
            vec![
                u(first.clone()),
                OuterStep::Query,
                u(first),
                u(record),
                u(merge),
                u(second.clone()),
                OuterStep::Query,
                u(second),
                u(combine),
            ],
            table,
        )
        .expect("the two-bit algorithms are valid")
    }
}

/// Hadamard on the pair `{p, q}` of the `i` register, identity elsewhere.
fn hadamard_on(n: usize, ny: usize, p: usize, q: usize) -> CMatrix {
    let dim = (n + 1) * 2 * ny;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = CMatrix::identity(dim, dim);
    for b in 0..2 {
        for y in 0..ny {
            let (kp, kq) = ((2 * p + b) * ny + y, (2 * q + b) * ny + y);
            m[(kp, kp)] = real(s);
            m[(kp, kq)] = real(s);
            m[(kq, kp)] = real(s);
            m[(kq, kq)] = real(-s);
        }
    }
    m
}

#[derive(Clone, Debug)]
pub struct OuterRun {
    /// `w_O^ℓ` for `ℓ = 0..=L`.
    pub states: Vec<CVector>,
    pub output_one: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryWeights {
    /// `(ℓ, q_{·,ℓ})` for each query level, indexed by `i ∈ {0} ∪ [n]`.
    pub per_level: Vec<(usize, Vec<f64>)>,
    /// `q̄_i`, including the idle index `i = 0`.
    pub average: Vec<f64>,
}

impl QueryWeights {
    pub fn idle(&self) -> f64 {
        self.average[0]
    }

    /// `Σ_{i∈[n]} q̄_i x_i`.
    pub fn weighted(&self, per_input: &[f64]) -> f64 {
        self.average[1..].iter().zip(per_input).map(|(q, x)| q * x).sum()
    }
}

/// Outer algorithm in a scenario document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OuterSpec {
    Identity,
    Or2,
    And2,
    Explicit { inputs: usize, workspace: usize, steps: Vec<StepSpec>, truth_table: Vec<bool> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSpec {
    Query,
    /// Row-major real and optional imaginary parts.
    Unitary {
        re: Vec<Vec<f64>>,
        #[serde(default)]
        im: Option<Vec<Vec<f64>>>,
    },
}

impl OuterSpec {
    pub fn build(&self) -> Result<OuterAlgorithm> {
        match self {
            Self::Identity => Ok(OuterAlgorithm::identity_bit()),
            Self::Or2 => Ok(OuterAlgorithm::or2()),
            Self::And2 => Ok(OuterAlgorithm::and2()),
            Self::Explicit { inputs, workspace, steps, truth_table } => {
                let steps = steps
                    .iter()
                    .map(|s| match s {
                        StepSpec::Query => Ok(OuterStep::Query),
                        StepSpec::Unitary { re, im } => dense_matrix(re, im.as_ref()).map(OuterStep::Unitary),
                    })
                    .collect::<Result<Vec<_>>>()?;
                OuterAlgorithm::new(*inputs, *workspace, steps, truth_table.clone())
            }
        }
    }
}

fn dense_matrix(re: &[Vec<f64>], im: Option<&Vec<Vec<f64>>>) -> Result<CMatrix> {
    let n = re.len();
    let square = |rows: &[Vec<f64>]| rows.len() == n && rows.iter().all(|r| r.len() == n);
    if !square(re) || im.is_some_and(|m| !square(m)) {
        return Err(Error::InvalidOuter("unitary must be a square matrix".into()));
    }
    Ok(CMatrix::from_fn(n, n, |r, c| C64::new(re[r][c], im.map_or(0.0, |m| m[r][c]))))
}

/// Edge weights and the derived constants of a composition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionParameters {
    /// `L`.
    pub length: usize,
    /// `|Q|`.
    pub queries: usize,
    pub t_avg: f64,
    pub eps_avg: f64,
    pub eps_outer: f64,
    /// `q̄_0`, the average weight on the idle index.
    pub idle_weight: f64,
    /// `L + 1 + 2Q(T_avg + 1)`.
    pub scale: f64,
    pub w0: f64,
    pub w1_out: f64,
    pub w0_out: f64,
    /// `w0_out` was raised to its floor because `ε_O` is (nearly) zero.
    pub output_floor_applied: bool,
    pub c_minus: f64,
    pub c_plus: f64,
    /// `1 + w0(scale + ε_O/w0_out + (1 − ε_O)/w1_out)`.
    pub c_plus_bound: f64,
    /// `2Q·ε_avg·w0`.
    pub delta_target: f64,
    /// `(2Q·ε_avg + w1_out·ε_O + w0_out(1 − ε_O)) / w0`.
    pub delta_prime_target: f64,
    pub eta: f64,
    /// `η / (Q(L + Q·T_avg))`.
    pub error_threshold: f64,
    pub within_threshold: bool,
}

fn check_inner(outer: &OuterAlgorithm, sub: &VariableTimeSubroutine, ext: &ReversibleExtension) -> Result<()> {
    if sub.answers() != 2 {
        return Err(Error::InvalidSubroutine("inner answers must be bits".into()));
    }
    if sub.inputs() != outer.inputs() {
        return Err(Error::DimensionMismatch(format!(
            "inner subroutine has {} inputs, the outer algorithm queries {}",
            sub.inputs(),
            outer.inputs()
        )));
    }
    let phase = ReversibleExtension::phase(sub.target());
    let same = |a: &CMatrix, b: &CMatrix| a.shape() == b.shape() && (a - b).iter().all(|z| z.norm() <= 1e-12);
    if !same(ext.map(), phase.map()) || !(0..2).all(|a| same(ext.answer_map(a), phase.answer_map(a))) {
        return Err(Error::InvalidSubroutine("inner extension must be the answer phase (-1)^g".into()));
    }
    Ok(())
}

pub fn set_parameters(outer: &OuterAlgorithm, sub: &VariableTimeSubroutine, eta: f64) -> Result<CompositionParameters> {
    let g = sub.target().to_vec();
    let qw = outer.query_weights(&g)?;
    let profiles: Vec<_> = (0..sub.inputs()).map(|i| sub.stopping_profile(i)).collect();
    let means: Vec<f64> = profiles.iter().map(|p| p.mean()).collect();
    let errors: Vec<f64> = profiles.iter().map(|p| p.total_error()).collect();
    let t_avg = qw.weighted(&means);
    let eps_avg = qw.weighted(&errors);
    let eps_outer = outer.error()?;
    let mut params =
        CompositionParameters::from_averages(outer.len(), outer.query_levels().len(), t_avg, eps_avg, eps_outer, eta)?;
    params.idle_weight = qw.idle();
    Ok(params)
}

impl CompositionParameters {
    /// Parameter choice from the averaged quantities alone; `idle_weight` is left at 0.
    pub fn from_averages(
        length: usize,
        queries: usize,
        t_avg: f64,
        eps_avg: f64,
        eps_outer: f64,
        eta: f64,
    ) -> Result<Self> {
        if queries == 0 {
            return Err(Error::InvalidOuter("the algorithm makes no queries".into()));
        }
        if !(0.0..0.5).contains(&eps_outer) {
            return Err(Error::InvalidOuter(format!("outer error {eps_outer} is not in [0, 1/2)")));
        }
        let (l, q) = (length as f64, queries as f64);
        let scale = l + 1.0 + 2.0 * q * (t_avg + 1.0);
        let w0 = 1.0 / scale;
        let w1_out = (1.0 - eps_outer) * w0 / 8.0;
        let raw = eps_outer * w0 / 8.0;
        let floor = OUTPUT_WEIGHT_FLOOR * w0;
        let output_floor_applied = raw < floor;
        let w0_out = raw.max(floor);
        let error_threshold = eta / (q * (l + q * t_avg));
        Ok(Self {
            length,
            queries,
            t_avg,
            eps_avg,
            eps_outer,
            idle_weight: 0.0,
            scale,
            w0,
            w1_out,
            w0_out,
            output_floor_applied,
            c_minus: 4.0 * scale * scale,
            c_plus: C_PLUS,
            c_plus_bound: 1.0 + w0 * (scale + eps_outer / w0_out + (1.0 - eps_outer) / w1_out),
            delta_target: 2.0 * q * eps_avg * w0,
            delta_prime_target: (2.0 * q * eps_avg + w1_out * eps_outer + w0_out * (1.0 - eps_outer)) / w0,
            eta,
            error_threshold,
            within_threshold: eps_avg <= error_threshold,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// A non-query outer step between consecutive junction levels.
    OuterStep,
    /// The idle index `i = 0` passing a query level unchanged.
    PassThrough,
    /// Junction into the forward start of an inner copy.
    ConnectIn,
    /// Backward start of an inner copy out to the next junction level.
    ConnectOut,
    InnerEven,
    InnerOdd,
    Terminal,
    Initial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bucket {
    A,
    B,
}

#[derive(Clone, Debug)]
pub struct ComposedState {
    pub family: Family,
    pub bucket: Bucket,
    /// Junction level, or `L` for terminal states.
    pub level: usize,
    /// Outer coordinate `(2i + b)·|Y| + y`, or the copy `b·|Y| + y` for inner states.
    pub register: usize,
    pub vector: Sparse,
}

/// Sizes of the coordinate blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSizes {
    pub inner: usize,
    pub junction: usize,
    pub terminal: usize,
    pub initial: usize,
}

impl BlockSizes {
    pub fn total(&self) -> usize {
        self.inner + self.junction + self.terminal + self.initial
    }
}

#[derive(Clone, Debug)]
struct Coordinates {
    local: usize,
    /// `2|Y|`: one inner copy per `(b, y)`.
    copies: usize,
    inner_dim: usize,
    levels: usize,
    query_slot: BTreeMap<usize, usize>,
}

impl Coordinates {
    /// Inner coordinate `k` of the copy for `(b, y)` at a query level; the
    /// copy depends on the outer register only through `(b, y)`.
    fn inner(&self, level: usize, register: usize, k: usize) -> usize {
        (self.query_slot[&level] * self.copies + register % self.copies) * self.inner_dim + k
    }

    fn inner_block(&self) -> usize {
        self.query_slot.len() * self.copies * self.inner_dim
    }

    fn junction(&self, register: usize, level: usize) -> usize {
        self.inner_block() + level * self.local + register
    }

    fn terminal(&self, register: usize) -> usize {
        self.inner_block() + self.levels * self.local + register
    }

    fn initial(&self) -> usize {
        self.inner_block() + (self.levels + 1) * self.local
    }

    fn sizes(&self) -> BlockSizes {
        BlockSizes { inner: self.inner_block(), junction: self.levels * self.local, terminal: self.local, initial: 1 }
    }
}

#[derive(Clone, Debug)]
pub struct ComposedInstance {
    pub outer: OuterAlgorithm,
    /// The oracle `g` realized by the inner subroutine.
    pub oracle: Vec<usize>,
    pub w0: f64,
    pub w1_out: f64,
    pub w0_out: f64,
    pub blocks: BlockSizes,
    pub states: Vec<ComposedState>,
    /// Largest normalized off-diagonal Gram entry within `Ψ^A` and `Ψ^B`.
    pub gram_residual: (f64, f64),
    pub phase: PhaseEstimationInstance,
    pub outer_run: OuterRun,
    sub: VariableTimeSubroutine,
    layout: StateLayout,
    history: HistoryStates,
    coords: Coordinates,
}

fn push_state(
    states: &mut Vec<ComposedState>,
    family: Family,
    bucket: Bucket,
    level: usize,
    register: usize,
    v: Sparse,
) {
    states.push(ComposedState { family, bucket, level, register, vector: v });
}

/// Builds every state family and the phase-estimation instance.
pub fn assemble_composed(
    outer: &OuterAlgorithm,
    sub: &VariableTimeSubroutine,
    ext: &ReversibleExtension,
    w0: f64,
    w1_out: f64,
    w0_out: f64,
) -> Result<ComposedInstance> {
    check_inner(outer, sub, ext)?;
    if !(w0 > 0.0 && w0_out > 0.0 && w1_out > w0_out) {
        return Err(Error::InvalidInstance(format!(
            "need w0 > 0 and w1_out > w0_out > 0, got w0 = {w0}, w1_out = {w1_out}, w0_out = {w0_out}"
        )));
    }
    let alpha = AlphaWeights::schedule(AlphaSchedule::Const, sub.horizon());
    let inner = build_transition_states(sub, ext, &alpha)?;
    let history = build_history_states(sub, ext, &alpha)?;
    let layout = inner.layout.clone();
    let levels = outer.len();
    let coords = Coordinates {
        local: outer.local_dim(),
        copies: 2 * outer.workspace(),
        inner_dim: layout.dim(),
        levels: levels + 1,
        query_slot: outer.query_levels().into_iter().enumerate().map(|(k, l)| (l, k)).collect(),
    };
    let dim = coords.sizes().total();
    crate::config::check_dimension(dim)?;
    let start = layout.slot(0, 0, 0).expect("the initial slot always exists");
    let one = ONE;

    let mut states = Vec::new();
    for (l, step) in outer.steps().iter().enumerate() {
        match step {
            OuterStep::Unitary(v) => {
                let bucket = if l % 2 == 0 { Bucket::A } else { Bucket::B };
                for r in 0..coords.local {
                    let mut vec = vec![(coords.junction(r, l), one)];
                    for r2 in 0..coords.local {
                        let x = v[(r2, r)];
                        if x.norm() > 0.0 {
                            vec.push((coords.junction(r2, l + 1), -x));
                        }
                    }
                    push_state(&mut states, Family::OuterStep, bucket, l, r, vec);
                }
            }
            OuterStep::Query => {
                for r in 0..coords.local {
                    let (i, _, _) = outer.decode(r);
                    if i == 0 {
                        let vec = vec![(coords.junction(r, l), one), (coords.junction(r, l + 1), -one)];
                        push_state(&mut states, Family::PassThrough, Bucket::A, l, r, vec);
                        continue;
                    }
                    let fwd = coords.inner(l, r, layout.index(Direction::Forward, i - 1, start));
                    let bwd = coords.inner(l, r, layout.index(Direction::Backward, i - 1, start));
                    push_state(
                        &mut states,
                        Family::ConnectIn,
                        Bucket::A,
                        l,
                        r,
                        vec![(coords.junction(r, l), one), (fwd, -one)],
                    );
                    push_state(
                        &mut states,
                        Family::ConnectOut,
                        Bucket::A,
                        l,
                        r,
                        vec![(bwd, one), (coords.junction(r, l + 1), -one)],
                    );
                }
                for r in 0..coords.copies {
                    for s in &inner.states {
                        let (family, bucket) = if s.bucket() == 0 {
                            (Family::InnerEven, Bucket::B)
                        } else {
                            (Family::InnerOdd, Bucket::A)
                        };
                        let vec = s.vector.iter().map(|&(k, x)| (coords.inner(l, r, k), x)).collect();
                        push_state(&mut states, family, bucket, l, r, vec);
                    }
                }
            }
        }
    }
    for r in 0..coords.local {
        let (_, b, _) = outer.decode(r);
        let w = if b == 1 { w1_out } else { w0_out };
        let vec = vec![(coords.junction(r, levels), one), (coords.terminal(r), real(-w.sqrt()))];
        push_state(&mut states, Family::Terminal, Bucket::A, levels, r, vec);
    }
    push_state(
        &mut states,
        Family::Initial,
        Bucket::B,
        0,
        0,
        vec![(coords.initial(), real(w0.sqrt())), (coords.junction(0, 0), -one)],
    );

    let gram_residual = (bucket_gram_residual(&states, Bucket::A), bucket_gram_residual(&states, Bucket::B));
    let dense = |bucket: Bucket| -> Vec<CVector> {
        states
            .iter()
            .filter(|s| s.bucket == bucket)
            .map(|s| crate::vt_states::sparse_to_dense(&s.vector, dim))
            .collect()
    };
    let psi0 = linalg::basis_vector(dim, coords.initial());
    let phase = PhaseEstimationInstance::new(
        psi0,
        &dense(Bucket::A),
        &dense(Bucket::B),
        crate::config::Tolerances::default().drop,
    )?;
    let oracle = sub.target().to_vec();
    let outer_run = outer.run(&oracle)?;
    Ok(ComposedInstance {
        outer: outer.clone(),
        oracle,
        w0,
        w1_out,
        w0_out,
        blocks: coords.sizes(),
        states,
        gram_residual,
        phase,
        outer_run,
        sub: sub.clone(),
        layout,
        history,
        coords,
    })
}

/// Largest `|⟨u|v⟩| / (‖u‖‖v‖)` over distinct states of one bucket.
fn bucket_gram_residual(states: &[ComposedState], bucket: Bucket) -> f64 {
    let members: Vec<&ComposedState> = states.iter().filter(|s| s.bucket == bucket).collect();
    let norms: Vec<f64> =
        members.iter().map(|s| s.vector.iter().map(|(_, x)| x.norm_sqr()).sum::<f64>().sqrt()).collect();
    let mut by_coord: HashMap<usize, Vec<(usize, C64)>> = HashMap::new();
    for (k, s) in members.iter().enumerate() {
        for &(c, x) in &s.vector {
            by_coord.entry(c).or_default().push((k, x));
        }
    }
    let mut pairs: HashMap<(usize, usize), C64> = HashMap::new();
    for entries in by_coord.values() {
        for (a, &(p, x)) in entries.iter().enumerate() {
            for &(q, y) in &entries[a + 1..] {
                *pairs.entry((p.min(q), p.max(q))).or_insert(ZERO) += if p < q { x.conj() * y } else { y.conj() * x };
            }
        }
    }
    pairs.iter().map(|(&(p, q), z)| z.norm() / (norms[p] * norms[q])).fold(0.0, f64::max)
}

impl ComposedInstance {
    pub fn dim(&self) -> usize {
        self.blocks.total()
    }

    pub fn expected_output(&self) -> Result<bool> {
        self.outer.evaluate(&self.oracle)
    }

    /// Pairs of families with a nonzero overlap, with the buckets involved.
    pub fn overlap_pairs(&self, threshold: f64) -> Vec<((Family, Bucket), (Family, Bucket))> {
        let mut by_coord: HashMap<usize, Vec<usize>> = HashMap::new();
        for (k, s) in self.states.iter().enumerate() {
            for &(c, _) in &s.vector {
                by_coord.entry(c).or_default().push(k);
            }
        }
        let mut found = std::collections::BTreeSet::new();
        let mut seen = std::collections::HashSet::new();
        for members in by_coord.values() {
            for (a, &p) in members.iter().enumerate() {
                for &q in &members[a + 1..] {
                    if !seen.insert((p.min(q), p.max(q))) {
                        continue;
                    }
                    let z = crate::vt_states::sparse_inner(&self.states[p].vector, &self.states[q].vector);
                    if z.norm() > threshold {
                        let (x, y) = (&self.states[p], &self.states[q]);
                        let mut pair = [(x.family, x.bucket == Bucket::A), (y.family, y.bucket == Bucket::A)];
                        pair.sort();
                        found.insert(pair);
                    }
                }
            }
        }
        let bucket = |a: bool| if a { Bucket::A } else { Bucket::B };
        found.into_iter().map(|[(f, a), (g, b)]| ((f, bucket(a)), (g, bucket(b)))).collect()
    }

    fn junction_vector(&self, level: usize, amplitudes: &CVector, out: &mut CVector) {
        for (r, x) in amplitudes.iter().enumerate() {
            out[self.coords.junction(r, level)] += x;
        }
    }

    fn place_inner(&self, level: usize, register: usize, v: &Sparse, scale: C64, out: &mut CVector) {
        for &(k, x) in v {
            out[self.coords.inner(level, register, k)] += x * scale;
        }
    }

    fn dense(&self, v: &Sparse) -> CVector {
        crate::vt_states::sparse_to_dense(v, self.dim())
    }

    /// The witness for `f∘g = 1`: the outer history threaded through the inner
    /// positive history states and out through the terminal edges.
    pub fn positive_witness(&self) -> Result<ComposedPositive> {
        if !self.expected_output()? {
            return Err(Error::Promise("positive witness needs f(g) = 1".into()));
        }
        let outer = &self.outer;
        let run = &self.outer_run;
        let mut w = linalg::zeros(self.dim());
        w[self.coords.initial()] = real(1.0 / self.w0.sqrt());
        for (l, state) in run.states.iter().enumerate() {
            self.junction_vector(l, state, &mut w);
        }
        let mut beta_residual: f64 = 0.0;
        for l in outer.query_levels() {
            for (r, &x) in run.states[l].iter().enumerate() {
                let (i, _, _) = outer.decode(r);
                if i == 0 {
                    continue;
                }
                self.place_inner(l, r, &self.history.positive[i - 1], x, &mut w);
                let sign = if self.oracle[i - 1] == 1 { -1.0 } else { 1.0 };
                beta_residual = beta_residual.max((run.states[l + 1][r] - x * sign).norm());
            }
        }
        let last = run.states.last().expect("runs record the initial state");
        for (r, &x) in last.iter().enumerate() {
            let b = outer.decode(r).1;
            let wb = if b == 1 { self.w1_out } else { self.w0_out };
            w[self.coords.terminal(r)] += x / wb.sqrt();
        }
        let max_family_overlap = self
            .states
            .iter()
            .filter(|s| !matches!(s.family, Family::InnerEven | Family::InnerOdd))
            .map(|s| {
                let n = s.vector.iter().map(|(_, x)| x.norm_sqr()).sum::<f64>().sqrt();
                s.vector.iter().map(|&(k, x)| x.conj() * w[k]).sum::<C64>().norm() / n
            })
            .fold(0.0, f64::max);
        let report = verify_positive_witness(&self.phase, &w)?;
        let overlap = linalg::inner(self.phase.psi0(), &w);
        Ok(ComposedPositive {
            certificate: WitnessCertificate::Positive { w: w.clone(), delta: report.delta, c_plus: report.c_plus },
            overlap: overlap.re,
            max_family_overlap,
            beta_residual,
            report,
        })
    }

    /// The witness pair for `f∘g = 0`.
    pub fn negative_witness(&self) -> Result<ComposedNegative> {
        if self.expected_output()? {
            return Err(Error::Promise("negative witness needs f(g) = 0".into()));
        }
        let outer = &self.outer;
        let run = &self.outer_run;
        let dim = self.dim();
        let mut tilde_a = linalg::zeros(dim);
        let mut tilde_b = linalg::zeros(dim);
        let mut tally = 0.0;
        for (l, step) in outer.steps().iter().enumerate() {
            let target = match step {
                OuterStep::Unitary(_) if l % 2 == 1 => &mut tilde_b,
                _ => &mut tilde_a,
            };
            let mut here = linalg::zeros(dim);
            self.junction_vector(l, &run.states[l], &mut here);
            let mut next = linalg::zeros(dim);
            self.junction_vector(l + 1, &run.states[l + 1], &mut next);
            *target += here - next;
            if matches!(step, OuterStep::Query) {
                for (r, &x) in run.states[l].iter().enumerate() {
                    let (i, _, _) = outer.decode(r);
                    if i == 0 {
                        continue;
                    }
                    let minus = &self.history.negative[i - 1];
                    self.place_inner(l, r, minus, -x, &mut tilde_a);
                    self.place_inner(l, r, minus, x, &mut tilde_b);
                    tally += x.norm_sqr() * minus.iter().map(|(_, y)| y.norm_sqr()).sum::<f64>();
                }
            }
        }
        let error_tilde_a = linalg::norm_sqr(&self.phase.space_a().reject(&tilde_a));
        let error_tilde_b = linalg::norm_sqr(&self.phase.space_b().reject(&tilde_b));
        let scale = real(1.0 / self.w0.sqrt());
        let mut last = linalg::zeros(dim);
        self.junction_vector(outer.len(), run.states.last().expect("nonempty run"), &mut last);
        let w_a = (tilde_a + last) * scale;
        let mut initial =
            self.dense(&vec![(self.coords.initial(), real(self.w0.sqrt())), (self.coords.junction(0, 0), -ONE)]);
        initial += tilde_b;
        let w_b = initial * scale;
        let report = verify_negative_witness(&self.phase, &w_a, &w_b, 1e-9)?;
        let closed_form = (outer.len() as f64 + 1.0 + tally) / self.w0;
        Ok(ComposedNegative {
            certificate: WitnessCertificate::Negative {
                w_a,
                w_b,
                delta_prime: report.delta_prime,
                c_minus: report.c_minus,
            },
            closed_form,
            error_tilde_a,
            error_tilde_b,
            report,
        })
    }

    /// The certificate matching `f(g)`.
    pub fn certificate(&self) -> Result<WitnessCertificate> {
        if self.expected_output()? {
            Ok(self.positive_witness()?.certificate)
        } else {
            Ok(self.negative_witness()?.certificate)
        }
    }

    pub fn inner_subroutine(&self) -> &VariableTimeSubroutine {
        &self.sub
    }

    pub fn inner_layout(&self) -> &StateLayout {
        &self.layout
    }
}

#[derive(Clone, Debug)]
pub struct ComposedPositive {
    pub certificate: WitnessCertificate,
    pub report: PositiveWitnessReport,
    /// `⟨ψ0|w⟩`, which equals `1/√w0`.
    pub overlap: f64,
    /// Largest normalized overlap with an outer, connecting, terminal or initial state.
    pub max_family_overlap: f64,
    /// Largest deviation from `β^{ℓ+1} = (−1)^{g_i} β^ℓ` across query steps.
    pub beta_residual: f64,
}

#[derive(Clone, Debug)]
pub struct ComposedNegative {
    pub certificate: WitnessCertificate,
    pub report: NegativeWitnessReport,
    /// `(L + 1 + Σ_{ℓ∈Q, i∈[n]} q_{i,ℓ} ‖w_−(i)‖²) / w0`, which equals `‖w_A‖²`.
    pub closed_form: f64,
    /// `‖(I − Π_A) w̃_A‖²` and `‖(I − Π_B) w̃_B‖²` before rescaling.
    pub error_tilde_a: f64,
    pub error_tilde_b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComposeConfig {
    pub decision: DecisionConfig,
    pub eta: f64,
    /// Run even when `ε_avg` exceeds the error threshold.
    pub allow_large_error: bool,
    /// Build the witness for `f(g)` and audit the decision against it.
    pub audit: bool,
}

impl Default for ComposeConfig {
    fn default() -> Self {
        Self { decision: DecisionConfig::default(), eta: DEFAULT_ETA, allow_large_error: false, audit: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComposedDecision {
    pub output: bool,
    /// `f(g)` from the truth table.
    pub expected: bool,
    pub q_bar: Vec<f64>,
    pub parameters: CompositionParameters,
    pub dimension: usize,
    pub blocks: BlockSizes,
    pub gram_residual: (f64, f64),
    pub decision: Decision,
    /// `(L + Q·T_avg)·log₂(L·T)` in abstract units.
    pub cost_estimate: f64,
    pub audit: Option<MarginAudit>,
}

pub fn decide_composed(
    outer: &OuterAlgorithm,
    sub: &VariableTimeSubroutine,
    ext: &ReversibleExtension,
    config: &ComposeConfig,
) -> Result<ComposedDecision> {
    check_inner(outer, sub, ext)?;
    let params = set_parameters(outer, sub, config.eta)?;
    if !params.within_threshold && !config.allow_large_error {
        return Err(Error::Promise(format!(
            "average inner error {} exceeds the threshold {}",
            params.eps_avg, params.error_threshold
        )));
    }
    let inst = assemble_composed(outer, sub, ext, params.w0, params.w1_out, params.w0_out)?;
    let spectrum = inst.phase.spectrum();
    let decision = decide_with_spectrum(&spectrum, params.c_minus, &config.decision)?;
    let audit = if config.audit {
        let cert = inst.certificate()?;
        Some(audit_decision(&inst.phase, &spectrum, &decision, &cert, params.c_plus, params.c_minus)?)
    } else {
        None
    };
    let q_bar = outer.query_weights(&inst.oracle)?.average;
    let span = (params.length * sub.horizon()) as f64;
    let cost_estimate = (params.length as f64 + params.queries as f64 * params.t_avg) * span.log2().max(1.0);
    Ok(ComposedDecision {
        output: decision.positive,
        expected: inst.expected_output()?,
        q_bar,
        dimension: inst.dim(),
        blocks: inst.blocks,
        gram_residual: inst.gram_residual,
        parameters: params,
        decision,
        cost_estimate,
        audit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn padding_moves_queries_to_even_levels() {
        let h = hadamard_on(1, 1, 0, 1);
        let outer =
            OuterAlgorithm::new(1, 1, vec![OuterStep::Unitary(h), OuterStep::Query], vec![false, true]).unwrap();
        assert_eq!(outer.query_levels(), vec![2]);
        assert_eq!(outer.len(), 4);
        assert_eq!(outer.padding(), 2);
    }

    #[test]
    fn library_algorithms_are_exact() {
        for outer in [OuterAlgorithm::identity_bit(), OuterAlgorithm::or2(), OuterAlgorithm::and2()] {
            assert!(outer.error().unwrap() < 1e-12);
            assert!(outer.query_levels().iter().all(|l| l % 2 == 0));
            assert_eq!(outer.len() % 2, 0);
        }
    }
}
