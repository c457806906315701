//! Applications of the variable-time walk: search over a weighted domain,
//! walks with costly checking on the pendant graph `G′`, and the
//! check-with-probability-`p` reduction from stationary-distribution search.
//!
//! Logarithms inside reference complexity expressions are base 2 and floored
//! at 1, so the expressions stay meaningful for unit times.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::network::{Distribution, Flow, McEstimate, Network};
use crate::phase_estimation::DecisionConfig;
use crate::subroutine::{AlphaSchedule, AlphaWeights, ClassicalInput};
use crate::walk_compose::{edge_transitions, ConditionThresholds, VertexSets, WalkInstance, WalkRun, WalkWeights};
use crate::{Error, Result};

const REL_TOL: f64 = 1e-12;

fn law_expect(law: &ClassicalInput, f: impl Fn(usize) -> f64) -> f64 {
    law.halt_law.iter().map(|&(t, p)| p * f(t)).sum()
}

fn law_mean(law: &ClassicalInput) -> f64 {
    law_expect(law, |t| t as f64)
}

fn law_second(law: &ClassicalInput) -> f64 {
    law_expect(law, |t| (t * t) as f64)
}

fn law_max(law: &ClassicalInput) -> usize {
    law.halt_law.iter().filter(|(_, p)| *p > 0.0).map(|(t, _)| *t).max().unwrap_or(0)
}

/// `H_k = Σ_{j=1}^{k} 1/j`.
fn harmonic(k: usize) -> f64 {
    (1..=k).map(|j| 1.0 / j as f64).sum()
}

/// `E[H_{T+1}] = E[Σ_{t≤T} 1/(t+1)]`.
fn harmonic_mean(law: &ClassicalInput) -> f64 {
    law_expect(law, |t| harmonic(t + 1))
}

fn log_factor(x: f64) -> f64 {
    x.log2().max(1.0)
}

fn check_laws(laws: &[ClassicalInput], what: &str) -> Result<()> {
    for (k, law) in laws.iter().enumerate() {
        let total: f64 = law.halt_law.iter().map(|(_, p)| p).sum();
        if law.halt_law.iter().any(|&(t, p)| t == 0 || p.is_nan() || p < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSubroutine(format!("{what} law {k} is not a distribution on t ≥ 1")));
        }
    }
    Ok(())
}

fn unique_sorted(vertices: &[usize], n: usize) -> Result<Vec<usize>> {
    let set: BTreeSet<usize> = vertices.iter().copied().collect();
    if let Some(&u) = set.iter().find(|&&u| u >= n) {
        return Err(Error::InvalidInstance(format!("vertex {u} does not exist")));
    }
    Ok(set.into_iter().collect())
}

/// Search domain `[n]` with weights `π`, per-element checking-time laws and a
/// promised lower bound `ε` on the weight of the marked set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchInstance {
    pub pi: Distribution,
    pub laws: Vec<ClassicalInput>,
    pub epsilon: f64,
}

impl SearchInstance {
    pub fn new(pi: Distribution, laws: Vec<ClassicalInput>, epsilon: f64) -> Result<Self> {
        if pi.len() != laws.len() || laws.is_empty() {
            return Err(Error::InvalidInstance(format!("{} weights for {} laws", pi.len(), laws.len())));
        }
        if pi.0.iter().any(|&x| x <= 0.0) {
            return Err(Error::InvalidDistribution("search weights must be positive".into()));
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidInstance(format!("ε = {epsilon} must lie in (0, 1]")));
        }
        check_laws(&laws, "checking")?;
        Ok(Self { pi, laws, epsilon })
    }

    /// Instance with deterministic checking times.
    pub fn deterministic(pi: Vec<f64>, times: &[usize], epsilon: f64) -> Result<Self> {
        let laws = times.iter().map(|&t| ClassicalInput::deterministic(t, 0)).collect();
        Self::new(Distribution::new(pi)?, laws, epsilon)
    }

    pub fn len(&self) -> usize {
        self.laws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.laws.is_empty()
    }

    pub fn mean_time(&self, i: usize) -> f64 {
        law_mean(&self.laws[i])
    }

    pub fn second_moment(&self, i: usize) -> f64 {
        law_second(&self.laws[i])
    }

    pub fn is_zero_variance(&self) -> bool {
        self.laws.iter().all(|l| l.halt_law.iter().filter(|(_, p)| *p > 0.0).count() == 1)
    }

    fn mass(&self, set: &[usize]) -> f64 {
        set.iter().map(|&i| self.pi.get(i)).sum()
    }
}

/// The three search costs indexed by the history weighting that achieves them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchCosts {
    /// `α_t = t + 1`.
    pub linear: f64,
    /// `α_t = 1`.
    pub constant: f64,
    /// `α_t = 1/(t + 1)`.
    pub inverse: f64,
}

impl SearchCosts {
    pub fn get(&self, schedule: AlphaSchedule) -> f64 {
        match schedule {
            AlphaSchedule::Linear => self.linear,
            AlphaSchedule::Const => self.constant,
            AlphaSchedule::Inverse => self.inverse,
        }
    }

    /// The cheapest weighting; ties go to the earlier of linear, constant, inverse.
    pub fn fastest(&self) -> AlphaSchedule {
        let mut best = AlphaSchedule::Linear;
        for s in [AlphaSchedule::Const, AlphaSchedule::Inverse] {
            if self.get(s) < self.get(best) {
                best = s;
            }
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchComplexities {
    pub marked: Vec<usize>,
    /// Costs for the given marked set.
    pub general: SearchCosts,
    /// Costs in terms of `ε` when exactly one element is marked.
    pub singleton: Option<SearchCosts>,
    pub fastest: AlphaSchedule,
}

/// Evaluates the search costs `√(Σπ E[T²]/π(M))`, `√(Σπ E[T] / Σ_M π/E[T])`
/// and `1/√(Σ_M π/E[T²])`.
pub fn search_complexities(si: &SearchInstance, marked: &[usize]) -> Result<SearchComplexities> {
    let marked = unique_sorted(marked, si.len())?;
    if marked.is_empty() {
        return Err(Error::Promise("search costs need a nonempty marked set".into()));
    }
    let n = si.len();
    let mean_sq: f64 = (0..n).map(|i| si.pi.get(i) * si.second_moment(i)).sum();
    let mean: f64 = (0..n).map(|i| si.pi.get(i) * si.mean_time(i)).sum();
    let by_mean: f64 = marked.iter().map(|&i| si.pi.get(i) / si.mean_time(i)).sum();
    let by_second: f64 = marked.iter().map(|&i| si.pi.get(i) / si.second_moment(i)).sum();
    let general = SearchCosts {
        linear: (mean_sq / si.mass(&marked)).sqrt(),
        constant: (mean / by_mean).sqrt(),
        inverse: 1.0 / by_second.sqrt(),
    };
    let singleton = (marked.len() == 1).then(|| {
        let m = marked[0];
        let eps = si.epsilon;
        SearchCosts {
            linear: (mean_sq / eps).sqrt(),
            constant: (mean * si.mean_time(m) / eps).sqrt(),
            inverse: (si.second_moment(m) / eps).sqrt(),
        }
    });
    Ok(SearchComplexities { marked, fastest: general.fastest(), general, singleton })
}

/// Weightings predicted to be cheapest when only `m` is marked and every
/// checking time is deterministic. Two entries are returned on a boundary.
pub fn predicted_fastest(si: &SearchInstance, m: usize) -> Result<Vec<AlphaSchedule>> {
    if !si.is_zero_variance() {
        return Err(Error::Promise("the regime rule needs deterministic checking times".into()));
    }
    if m >= si.len() {
        return Err(Error::InvalidInstance(format!("element {m} does not exist")));
    }
    let n = si.len();
    let mean: f64 = (0..n).map(|i| si.pi.get(i) * si.mean_time(i)).sum();
    let ratio = (0..n).map(|i| si.pi.get(i) * si.second_moment(i)).sum::<f64>() / mean;
    let t = si.mean_time(m);
    let near = |x: f64| (t - x).abs() <= REL_TOL * x.max(1.0);
    let mut out = Vec::new();
    if t > ratio || near(ratio) {
        out.push(AlphaSchedule::Linear);
    }
    if (t < ratio || near(ratio)) && (t > mean || near(mean)) {
        out.push(AlphaSchedule::Const);
    }
    if t < mean || near(mean) {
        out.push(AlphaSchedule::Inverse);
    }
    Ok(out)
}

/// History weighting used by a search walk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Schedule(AlphaSchedule),
    /// Constant weights with edge weights scaled by the expected checking time.
    KnownTimes,
}

impl SearchMode {
    fn alpha(self) -> AlphaSchedule {
        match self {
            SearchMode::Schedule(s) => s,
            SearchMode::KnownTimes => AlphaSchedule::Const,
        }
    }
}

/// A star-shaped search walk with the flow used to certify it.
#[derive(Clone, Debug)]
pub struct SearchWalk {
    pub instance: WalkInstance,
    pub mode: SearchMode,
    pub flow: Option<Flow>,
    /// Positive-side bound valid for every marked set of weight at least `ε`.
    pub r: f64,
}

impl SearchWalk {
    pub fn run(&self, config: &DecisionConfig) -> Result<WalkRun> {
        self.instance.run(self.r, self.instance.n1_inclusive(), 0.0, config)
    }
}

/// Upper bound on the positive-side cost of the default search flow, using only `π(M) ≥ ε`.
pub fn search_r_bound(si: &SearchInstance, mode: SearchMode) -> f64 {
    let n = si.len();
    let eps = si.epsilon;
    let max_over = |f: &dyn Fn(usize) -> f64| (0..n).map(f).fold(0.0, f64::max);
    match mode {
        SearchMode::Schedule(AlphaSchedule::Linear) => max_over(&|i| harmonic_mean(&si.laws[i])) / eps,
        SearchMode::Schedule(AlphaSchedule::Const) => 2.0 * max_over(&|i| si.mean_time(i)) / eps,
        SearchMode::Schedule(AlphaSchedule::Inverse) => 3.0 * max_over(&|i| si.second_moment(i)) / eps,
        SearchMode::KnownTimes => 2.0 / eps,
    }
}

/// Star with centre 0 and leaf `i + 1` for element `i`; `σ` sits on the centre
/// and the leaves are checkable.
pub fn build_search_walk(si: &SearchInstance, marked: &[usize], mode: SearchMode) -> Result<SearchWalk> {
    let marked = unique_sorted(marked, si.len())?;
    let n = si.len();
    if !marked.is_empty() && si.mass(&marked) < si.epsilon * (1.0 - 1e-9) {
        return Err(Error::Promise(format!("π(M) = {} is below ε = {}", si.mass(&marked), si.epsilon)));
    }
    let edges: Vec<(usize, usize, f64)> = (0..n)
        .map(|i| {
            let w = match mode {
                SearchMode::KnownTimes => si.pi.get(i) * si.mean_time(i),
                SearchMode::Schedule(_) => si.pi.get(i),
            };
            (0, i + 1, w)
        })
        .collect();
    let net = Network::new(n + 1, &edges)?;
    let flow = (!marked.is_empty()).then(|| {
        let score = |i: usize| match mode {
            SearchMode::Schedule(AlphaSchedule::Const) => si.pi.get(i) / si.mean_time(i),
            SearchMode::Schedule(AlphaSchedule::Inverse) => si.pi.get(i) / si.second_moment(i),
            _ => si.pi.get(i),
        };
        let total: f64 = marked.iter().map(|&i| score(i)).sum();
        let mut values = vec![0.0; n];
        for &i in &marked {
            values[i] = score(i) / total;
        }
        Flow { values }
    });
    let r = search_r_bound(si, mode);
    let (sub, ext) = edge_transitions(&net, si.laws.clone())?;
    let alpha = AlphaWeights::schedule(mode.alpha(), sub.horizon());
    let sets =
        VertexSets { initial: vec![0], checkable: (1..=n).collect(), marked: marked.iter().map(|i| i + 1).collect() };
    let weights = WalkWeights { alpha, w0: 1.0 / r, w_marked: 1.0 / r };
    let instance = WalkInstance::assemble(net, sets, Distribution::point(n + 1, 0), sub, ext, weights)?;
    Ok(SearchWalk { instance, mode, flow, r })
}

/// `G` with a pendant vertex `n + u` attached to every `u` by an edge of weight `pendant[u]`.
/// Original edges keep their indices and pendant edges follow in vertex order.
pub fn pendant_network(net: &Network, pendant: &[f64]) -> Result<Network> {
    let n = net.vertex_count();
    if pendant.len() != n {
        return Err(Error::DimensionMismatch(format!("{} pendant weights for {n} vertices", pendant.len())));
    }
    let mut edges: Vec<(usize, usize, f64)> = net.edges().iter().map(|e| (e.tail, e.head, e.weight)).collect();
    edges.extend(pendant.iter().enumerate().map(|(u, &w)| (u, n + u, w)));
    Network::new(2 * n, &edges)
}

/// Weighting of the checking edges in `G′`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckWeighting {
    /// Checking edges copy the vertex weight; checking is assumed cheap.
    CopyWeights,
    /// Checking edges scale with `τ(u)` and the marked-flow cost `D_M`.
    FlowCost,
    /// `FlowCost` with `D_M = 1`, for at most one marked vertex.
    SingleMarked,
    /// Checking edges scale with `τ(u)` and the flow ends in `τ_M`.
    TargetFlow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckingSetup {
    pub network: Network,
    pub sigma: Distribution,
    /// Weighting of the checking edges, `τ(u)`.
    pub tau: Distribution,
    pub marked: Vec<usize>,
    /// Transition-time law per edge of `G`.
    pub transition_laws: Vec<ClassicalInput>,
    /// Checking-time law per vertex of `G`.
    pub check_laws: Vec<ClassicalInput>,
    pub known_times: bool,
    /// Lower bound on `τ(M)`; defaults to `τ(M)`.
    pub epsilon: Option<f64>,
    /// Upper bound `D_M` on `Σ_M θ(u)²/τ_M(u)`; defaults to the exact value.
    pub marked_cost: Option<f64>,
    /// Upper bound on the commute time `2W·R`; defaults to the exact value.
    pub commute_bound: Option<f64>,
}

/// The three quantities in `Σ_M θ(u)²/w_u ≤ Σ_M Σ_v θ(u,v)²/w_{uv} ≤ R_{σ,M}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JensenChain {
    pub pendant: f64,
    pub incident: f64,
    pub resistance: f64,
}

impl JensenChain {
    pub fn holds(&self, tol: f64) -> bool {
        self.pendant <= self.incident + tol && self.incident <= self.resistance + tol
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckingReport {
    pub weighting: CheckWeighting,
    pub known_times: bool,
    pub pendant_weights: Vec<f64>,
    pub resistance: f64,
    pub commute_bound: f64,
    pub epsilon: f64,
    pub marked_cost: f64,
    /// `√(Σ_e (w_e/2W) E[T_e²])`, or with `E[T_e]²` for known times.
    pub t_avg: f64,
    /// `√(Σ_u τ(u) E[C_u²])`, or with `E[C_u]²` for known times.
    pub c_avg: f64,
    /// Positive-side cost of the flow on `G′`.
    pub p3: f64,
    /// Inclusive negative-side weight of `G′`.
    pub n1: f64,
    /// Bounds with explicit constants, implied by the construction.
    pub r_bound: f64,
    pub w_bound: f64,
    /// The asymptotic forms, evaluated with unit constants.
    pub r_reference: f64,
    pub w_reference: f64,
    pub complexity: f64,
    pub jensen: Option<JensenChain>,
}

impl CheckingReport {
    pub fn holds(&self) -> bool {
        let ok = |x: f64, b: f64| x <= b * (1.0 + 1e-9) + 1e-12;
        ok(self.p3, self.r_bound) && ok(self.n1, self.w_bound) && self.jensen.is_none_or(|j| j.holds(1e-9))
    }

    /// `√(P3·N1)` against the reference complexity.
    pub fn complexity_ratio(&self) -> f64 {
        (self.p3 * self.n1).sqrt() / self.complexity
    }
}

/// The assembled pendant-graph walk together with its certifying flow.
#[derive(Clone, Debug)]
pub struct CheckingWalk {
    pub instance: WalkInstance,
    pub flow: Flow,
    pub report: CheckingReport,
}

impl CheckingWalk {
    pub fn run(&self, config: &DecisionConfig) -> Result<WalkRun> {
        self.instance.run(self.report.p3, self.report.n1, 0.0, config)
    }
}

struct GraphMoments {
    total: f64,
    t_avg_sq: f64,
    h_t: f64,
    h_c: f64,
    c_max: f64,
    t_max: f64,
}

fn graph_moments(net: &Network, t_laws: &[ClassicalInput], c_laws: &[ClassicalInput], known: bool) -> GraphMoments {
    let total = net.total_weight();
    let t_avg_sq = net
        .edges()
        .iter()
        .zip(t_laws)
        .map(|(e, l)| e.weight / (2.0 * total) * if known { law_mean(l).powi(2) } else { law_second(l) })
        .sum();
    GraphMoments {
        total,
        t_avg_sq,
        h_t: t_laws.iter().map(harmonic_mean).fold(0.0, f64::max),
        h_c: c_laws.iter().map(harmonic_mean).fold(0.0, f64::max),
        c_max: c_laws.iter().map(law_max).max().unwrap_or(1) as f64,
        t_max: t_laws.iter().map(law_max).max().unwrap_or(1) as f64,
    }
}

/// Assembles the walk on `G′` for `weighting` and evaluates its measured costs
/// against explicit-constant bounds.
pub fn checking_walk(setup: &CheckingSetup, weighting: CheckWeighting) -> Result<CheckingWalk> {
    let net = &setup.network;
    let n = net.vertex_count();
    if setup.transition_laws.len() != net.edges().len() || setup.check_laws.len() != n {
        return Err(Error::InvalidInstance("one transition law per edge and one check law per vertex".into()));
    }
    check_laws(&setup.transition_laws, "transition")?;
    check_laws(&setup.check_laws, "checking")?;
    if setup.sigma.len() != n || setup.tau.len() != n {
        return Err(Error::InvalidDistribution("σ and τ must cover the vertices of G".into()));
    }
    let marked = unique_sorted(&setup.marked, n)?;
    if marked.is_empty() {
        return Err(Error::Promise("checking bounds are measured on a marked instance".into()));
    }
    if weighting == CheckWeighting::SingleMarked && marked.len() > 1 {
        return Err(Error::Promise(format!("{} marked vertices; at most one is allowed", marked.len())));
    }
    let tau_m: f64 = marked.iter().map(|&u| setup.tau.get(u)).sum();
    if weighting != CheckWeighting::CopyWeights && tau_m <= 0.0 {
        return Err(Error::Promise("τ puts no weight on M".into()));
    }
    let mut tau_marked = vec![0.0; n];
    for &u in &marked {
        tau_marked[u] = setup.tau.get(u) / tau_m;
    }

    let g = graph_moments(net, &setup.transition_laws, &setup.check_laws, setup.known_times);
    let total = g.total;
    let flow_g = match weighting {
        CheckWeighting::TargetFlow => {
            let demand: Vec<f64> = setup.sigma.0.iter().zip(&tau_marked).map(|(s, t)| s - t).collect();
            net.min_energy_flow(&demand)?
        }
        _ => net.min_energy_flow_to_set(&setup.sigma, &marked)?,
    };
    let outflow = flow_g.net_outflow(net);
    let sink: Vec<f64> =
        (0..n).map(|u| if marked.contains(&u) { setup.sigma.get(u) - outflow[u] } else { 0.0 }).collect();
    let resistance = flow_g.energy(net);
    let exact_commute = 2.0 * total * resistance;
    let commute = setup.commute_bound.unwrap_or(exact_commute);
    if commute < exact_commute * (1.0 - 1e-9) {
        return Err(Error::Promise(format!("commute bound {commute} is below {exact_commute}")));
    }
    let epsilon = setup.epsilon.unwrap_or(tau_m);
    if weighting != CheckWeighting::CopyWeights && !(epsilon > 0.0 && epsilon <= tau_m * (1.0 + 1e-9)) {
        return Err(Error::Promise(format!("ε = {epsilon} must lie in (0, τ(M) = {tau_m}]")));
    }
    let exact_marked_cost: f64 =
        marked.iter().filter(|&&u| tau_marked[u] > 0.0).map(|&u| sink[u].powi(2) / tau_marked[u]).sum();
    let marked_cost = match weighting {
        CheckWeighting::SingleMarked => 1.0,
        CheckWeighting::FlowCost => setup.marked_cost.unwrap_or(exact_marked_cost),
        _ => exact_marked_cost,
    };
    if weighting == CheckWeighting::FlowCost && marked_cost < exact_marked_cost * (1.0 - 1e-9) {
        return Err(Error::Promise(format!("D_M = {marked_cost} is below {exact_marked_cost}")));
    }

    let vertex_weights = net.vertex_weights();
    let base_pendant: Vec<f64> = (0..n)
        .map(|u| match weighting {
            CheckWeighting::CopyWeights => vertex_weights[u],
            CheckWeighting::FlowCost | CheckWeighting::SingleMarked => {
                total * marked_cost * setup.tau.get(u) / (epsilon * commute)
            }
            CheckWeighting::TargetFlow => setup.tau.get(u) * total / (epsilon * commute),
        })
        .collect();
    if base_pendant.iter().any(|&w| w <= 0.0) {
        return Err(Error::Promise("every checking edge needs positive weight; τ must have full support".into()));
    }
    let scale_pendant = setup.known_times && weighting != CheckWeighting::CopyWeights;
    let pendant: Vec<f64> = base_pendant
        .iter()
        .zip(&setup.check_laws)
        .map(|(w, l)| if scale_pendant { w * law_mean(l) } else { *w })
        .collect();

    let scaled_net = if setup.known_times {
        let edges: Vec<_> = net
            .edges()
            .iter()
            .zip(&setup.transition_laws)
            .map(|(e, l)| (e.tail, e.head, e.weight * law_mean(l)))
            .collect();
        Network::new(n, &edges)?
    } else {
        net.clone()
    };
    let prime = pendant_network(&scaled_net, &pendant)?;
    let mut values = flow_g.values.clone();
    values.extend_from_slice(&sink);
    let flow = Flow { values };

    let c_avg_sq: f64 = (0..n)
        .map(|u| {
            let l = &setup.check_laws[u];
            setup.tau.get(u) * if setup.known_times { law_mean(l).powi(2) } else { law_second(l) }
        })
        .sum();
    let sum_w_t2: f64 = net
        .edges()
        .iter()
        .zip(&setup.transition_laws)
        .map(|(e, l)| e.weight * if setup.known_times { law_mean(l).powi(2) } else { law_second(l) })
        .sum();
    let pendant_c2: f64 = base_pendant
        .iter()
        .zip(&setup.check_laws)
        .map(|(w, l)| w * if setup.known_times { law_mean(l).powi(2) } else { law_second(l) })
        .sum();
    let c_over_w = commute / total;
    let mean_c_plus_one = setup.check_laws.iter().map(|l| law_mean(l) + 1.0).fold(0.0, f64::max);
    let (r_bound, w_bound) = match (weighting, setup.known_times) {
        (CheckWeighting::CopyWeights, false) => (resistance * (g.h_t + g.h_c), 3.0 * (sum_w_t2 + pendant_c2)),
        (CheckWeighting::CopyWeights, true) => {
            (resistance * (2.0 + mean_c_plus_one), 2.0 * sum_w_t2 + 2.0 * total * mean_c_plus_one)
        }
        (_, false) => (resistance * g.h_t + c_over_w * g.h_c, 3.0 * (sum_w_t2 + pendant_c2)),
        (_, true) => (2.0 * resistance + 2.0 * c_over_w, 2.0 * sum_w_t2 + 2.0 * pendant_c2),
    };
    let lt = log_factor(g.t_max);
    let ltc = log_factor(g.t_max * g.c_max);
    let t_avg = g.t_avg_sq.sqrt();
    let c_avg = c_avg_sq.sqrt();
    let check_coeff = match weighting {
        CheckWeighting::FlowCost | CheckWeighting::SingleMarked => total * marked_cost / (commute * epsilon),
        _ => total / (commute * epsilon),
    };
    let (r_reference, w_reference, complexity) = match (weighting, setup.known_times) {
        (CheckWeighting::CopyWeights, false) => {
            (4.0 * c_over_w * lt, 2.0 * total * g.t_avg_sq + 2.0 * total, commute.sqrt() * t_avg * lt.powf(1.5))
        }
        (CheckWeighting::CopyWeights, true) => {
            (4.0 * c_over_w, 4.0 * total * g.t_avg_sq + 2.0 * total, commute.sqrt() * t_avg * lt)
        }
        (weighting, known) => {
            let check_term = match weighting {
                CheckWeighting::TargetFlow => c_avg / epsilon.sqrt(),
                _ => (marked_cost / epsilon).sqrt() * c_avg,
            };
            let base = commute.sqrt() * t_avg + check_term;
            if known {
                (4.0 * c_over_w, 4.0 * total * g.t_avg_sq + 2.0 * check_coeff * c_avg_sq, base * ltc)
            } else {
                let t_coeff = if weighting == CheckWeighting::TargetFlow { 4.0 } else { 2.0 };
                (
                    2.0 * c_over_w * (log_factor(g.t_max) + log_factor(g.c_max)),
                    t_coeff * total * g.t_avg_sq + check_coeff * c_avg_sq,
                    base * ltc.powf(1.5),
                )
            }
        }
    };
    let jensen = (weighting != CheckWeighting::TargetFlow).then(|| {
        let pendant_energy: f64 = marked.iter().map(|&u| sink[u].powi(2) / vertex_weights[u]).sum();
        let incident: f64 = net
            .edges()
            .iter()
            .zip(&flow_g.values)
            .map(|(e, x)| {
                let hits = usize::from(marked.contains(&e.tail)) + usize::from(marked.contains(&e.head));
                hits as f64 * x * x / e.weight
            })
            .sum();
        JensenChain { pendant: pendant_energy, incident, resistance }
    });

    let schedule = if setup.known_times { AlphaSchedule::Const } else { AlphaSchedule::Linear };
    let laws: Vec<ClassicalInput> = setup.transition_laws.iter().chain(&setup.check_laws).cloned().collect();
    let (sub, ext) = edge_transitions(&prime, laws)?;
    let alpha = AlphaWeights::schedule(schedule, sub.horizon());
    let mut sigma = setup.sigma.0.clone();
    sigma.resize(2 * n, 0.0);
    let sets = VertexSets {
        initial: (0..n).collect(),
        checkable: (n..2 * n).collect(),
        marked: marked.iter().map(|u| n + u).collect(),
    };
    let w0 = 1.0 / r_bound;
    let instance =
        WalkInstance::assemble(prime, sets, Distribution(sigma), sub, ext, WalkWeights { alpha, w0, w_marked: w0 })?;
    let conditions = instance.check_conditions(Some(&flow), r_bound, w_bound, &ConditionThresholds::default());
    let positive = conditions.positive.expect("flow supplied");
    if let Err(msg) = positive.p1_p2 {
        return Err(Error::Promise(msg));
    }
    let report = CheckingReport {
        weighting,
        known_times: setup.known_times,
        pendant_weights: pendant,
        resistance,
        commute_bound: commute,
        epsilon,
        marked_cost,
        t_avg,
        c_avg,
        p3: positive.p3,
        n1: conditions.n1_inclusive,
        r_bound,
        w_bound,
        r_reference,
        w_reference,
        complexity,
        jensen,
    };
    Ok(CheckingWalk { instance, flow, report })
}

pub fn checking_bounds(setup: &CheckingSetup, weighting: CheckWeighting) -> Result<CheckingReport> {
    checking_walk(setup, weighting).map(|w| w.report)
}

/// Expected visit counts of the walk that starts at `π`, checks its current
/// vertex with probability `p` and halts on a marked check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MnrsFlow {
    pub halt_probability: f64,
    /// `E[N_u]`, the expected number of steps taken out of `u`.
    pub expected_leaves: Vec<f64>,
    /// Probability that the walk halts at `u`.
    pub absorption: Vec<f64>,
    /// `θ(u,v) = E[N_u]P_{uv} − E[N_v]P_{vu}`.
    pub flow: Flow,
    /// `Σ_u E[N_u]`.
    pub expected_steps: f64,
    /// Expected number of vertices visited, one more than the step count.
    pub expected_tau: f64,
    /// `Σ θ(u,v)²/(π(u)P_{uv})`.
    pub energy: f64,
    /// Closed form of `energy` from the visit equations.
    pub energy_identity: f64,
    /// `expected_steps − energy`.
    pub margin: f64,
}

fn marked_mask(n: usize, marked: &[usize]) -> Result<Vec<bool>> {
    let marked = unique_sorted(marked, n)?;
    if marked.is_empty() {
        return Err(Error::Promise("the check-and-walk process needs a marked vertex".into()));
    }
    let mut mask = vec![false; n];
    for u in marked {
        mask[u] = true;
    }
    Ok(mask)
}

pub fn mnrs_flow(net: &Network, marked: &[usize], p: f64) -> Result<MnrsFlow> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidInstance(format!("halting probability {p} must lie in (0, 1]")));
    }
    let n = net.vertex_count();
    let mask = marked_mask(n, marked)?;
    let pi = net.stationary_distribution()?;
    let pm = net.transition_matrix()?;
    let keep = |u: usize| if mask[u] { 1.0 - p } else { 1.0 };
    // x_u = keep(u)·(π(u) + Σ_v x_v P_{vu})
    let a = DMatrix::from_fn(n, n, |u, v| f64::from(u == v) - keep(u) * pm[(v, u)]);
    let b = DVector::from_fn(n, |u, _| keep(u) * pi.get(u));
    let x = a.clone().lu().solve(&b).ok_or_else(|| Error::Infeasible("visit equations are singular".into()))?;
    if (&a * &x - &b).amax() > 1e-9 * x.amax().max(1.0) {
        return Err(Error::Infeasible("visit equations are ill-conditioned".into()));
    }
    let inflow = pm.transpose() * &x;
    let absorption: Vec<f64> = (0..n).map(|u| if mask[u] { p * (pi.get(u) + inflow[u]) } else { 0.0 }).collect();
    // Per-edge transition probabilities keep parallel edges apart.
    let vw = net.vertex_weights();
    let values: Vec<f64> =
        net.edges().iter().map(|e| e.weight * (x[e.tail] / vw[e.tail] - x[e.head] / vw[e.head])).collect();
    let flow = Flow { values };
    let total = net.total_weight();
    let energy: f64 = net.edges().iter().zip(&flow.values).map(|(e, th)| th * th * 2.0 * total / e.weight).sum();
    let energy_identity: f64 =
        (0..n).map(|u| if mask[u] { x[u] * (1.0 - absorption[u] / pi.get(u)) } else { x[u] }).sum();
    let expected_steps = x.sum();
    Ok(MnrsFlow {
        halt_probability: p,
        expected_leaves: x.iter().copied().collect(),
        absorption,
        flow,
        expected_steps,
        expected_tau: expected_steps + 1.0,
        energy,
        energy_identity,
        margin: expected_steps - energy,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MnrsMonteCarlo {
    pub leaves: Vec<McEstimate>,
    pub steps: McEstimate,
}

/// Simulates the check-and-walk process; walks longer than `max_steps` are cut.
pub fn mnrs_monte_carlo(
    net: &Network,
    marked: &[usize],
    p: f64,
    walks: usize,
    seed: u64,
    max_steps: u64,
) -> Result<MnrsMonteCarlo> {
    if !(p > 0.0 && p <= 1.0) || walks < 2 {
        return Err(Error::InvalidInstance("need p in (0, 1] and at least two walks".into()));
    }
    let n = net.vertex_count();
    let mask = marked_mask(n, marked)?;
    let pi = net.stationary_distribution()?;
    let pm = net.transition_matrix()?;
    let cumulative = |row: Vec<f64>| {
        let mut acc = 0.0;
        row.into_iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect::<Vec<f64>>()
    };
    let start = cumulative(pi.0.clone());
    let rows: Vec<Vec<f64>> = (0..n).map(|u| cumulative(pm.row(u).iter().copied().collect())).collect();
    let draw = |cdf: &[f64], rng: &mut ChaCha8Rng| {
        let r: f64 = rng.gen::<f64>() * cdf[cdf.len() - 1];
        cdf.iter().position(|&c| r < c).unwrap_or(cdf.len() - 1)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = vec![0.0; n + 1];
    let mut sum_sq = vec![0.0; n + 1];
    let mut truncated = 0;
    let mut counts = vec![0u64; n];
    for _ in 0..walks {
        counts.iter_mut().for_each(|c| *c = 0);
        let mut u = draw(&start, &mut rng);
        let mut steps = 0u64;
        loop {
            if mask[u] && rng.gen::<f64>() < p {
                break;
            }
            if steps >= max_steps {
                truncated += 1;
                break;
            }
            counts[u] += 1;
            steps += 1;
            u = draw(&rows[u], &mut rng);
        }
        for (k, &c) in counts.iter().chain(std::iter::once(&steps)).enumerate() {
            sum[k] += c as f64;
            sum_sq[k] += (c * c) as f64;
        }
    }
    let k = walks as f64;
    let estimate = |s: f64, sq: f64| {
        let mean = s / k;
        let var = ((sq - k * mean * mean) / (k - 1.0)).max(0.0);
        McEstimate { mean, stderr: (var / k).sqrt(), samples: walks, seed, truncated }
    };
    let mut all: Vec<McEstimate> = sum.iter().zip(&sum_sq).map(|(&s, &q)| estimate(s, q)).collect();
    let steps = all.pop().expect("step total");
    Ok(MnrsMonteCarlo { leaves: all, steps })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MnrsSetup {
    pub network: Network,
    pub marked: Vec<usize>,
    pub transition_laws: Vec<ClassicalInput>,
    pub check_laws: Vec<ClassicalInput>,
    pub known_times: bool,
    /// Lower bound on `π(M)`; defaults to `π(M)` and is required when `M = ∅`.
    pub epsilon: Option<f64>,
    /// Lower bound on the spectral gap; defaults to the exact gap.
    pub gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MnrsReport {
    pub gap: f64,
    pub epsilon: f64,
    pub pi_min: f64,
    /// `p = δ / ln(2/π_min²)`.
    pub halt_probability: f64,
    pub t_avg: f64,
    pub c_avg: f64,
    /// `√ln(1/π_min)`.
    pub mixing_factor: f64,
    /// `(1/√ε)((1/√δ)T_avg + C_avg)·√ln(1/π_min)·log^{3/2}(TC)`, with one log
    /// power dropped for known times.
    pub complexity: f64,
    /// `R` used to configure the walk.
    pub r: f64,
    /// Inclusive negative-side weight of `G′`.
    pub n1: f64,
    pub flow: Option<MnrsFlow>,
    /// `√(R·N1)/complexity` when a marked flow exists.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct MnrsWalk {
    pub instance: WalkInstance,
    pub flow: Option<Flow>,
    pub report: MnrsReport,
}

impl MnrsWalk {
    pub fn run(&self, config: &DecisionConfig) -> Result<WalkRun> {
        self.instance.run(self.report.r, self.report.n1, 0.0, config)
    }
}

/// Builds `G′` with checking-edge weights `δ w_u` from `σ = π`, and the flow
/// of the check-and-walk process when `M` is nonempty.
pub fn mnrs_walk(setup: &MnrsSetup) -> Result<MnrsWalk> {
    let net = &setup.network;
    let n = net.vertex_count();
    if setup.transition_laws.len() != net.edges().len() || setup.check_laws.len() != n {
        return Err(Error::InvalidInstance("one transition law per edge and one check law per vertex".into()));
    }
    check_laws(&setup.transition_laws, "transition")?;
    check_laws(&setup.check_laws, "checking")?;
    let marked = unique_sorted(&setup.marked, n)?;
    let pi = net.stationary_distribution()?;
    let mass: f64 = marked.iter().map(|&u| pi.get(u)).sum();
    let epsilon = match setup.epsilon {
        Some(e) => e,
        None if !marked.is_empty() => mass,
        None => return Err(Error::Promise("ε must be given when M is empty".into())),
    };
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Promise("ε must be positive".into()));
    }
    if !marked.is_empty() && mass < epsilon * (1.0 - 1e-9) {
        return Err(Error::Promise(format!("π(M) = {mass} is below ε = {epsilon}")));
    }
    let gap = match setup.gap {
        Some(d) => d,
        None => net.spectral_gap()?,
    };
    if !(gap > 0.0 && gap <= 2.0) {
        return Err(Error::Promise(format!("spectral gap bound {gap} must lie in (0, 2]")));
    }
    let pi_min = pi.0.iter().copied().fold(f64::INFINITY, f64::min);
    let p = gap / (2.0 / (pi_min * pi_min)).ln();

    let g = graph_moments(net, &setup.transition_laws, &setup.check_laws, setup.known_times);
    let t_avg = g.t_avg_sq.sqrt();
    let c_avg: f64 = (0..n)
        .map(|u| {
            let l = &setup.check_laws[u];
            pi.get(u) * if setup.known_times { law_mean(l).powi(2) } else { law_second(l) }
        })
        .sum::<f64>()
        .sqrt();
    let mixing_factor = (1.0 / pi_min).ln().sqrt();
    let ltc = log_factor(g.t_max * g.c_max);
    let log_power = if setup.known_times { ltc } else { ltc.powf(1.5) };
    let complexity = (t_avg / gap.sqrt() + c_avg) / epsilon.sqrt() * mixing_factor * log_power;

    let vw = net.vertex_weights();
    let pendant: Vec<f64> = (0..n)
        .map(|u| {
            let w = gap * vw[u];
            if setup.known_times {
                w * law_mean(&setup.check_laws[u])
            } else {
                w
            }
        })
        .collect();
    let scaled_net = if setup.known_times {
        let edges: Vec<_> = net
            .edges()
            .iter()
            .zip(&setup.transition_laws)
            .map(|(e, l)| (e.tail, e.head, e.weight * law_mean(l)))
            .collect();
        Network::new(n, &edges)?
    } else {
        net.clone()
    };
    let prime = pendant_network(&scaled_net, &pendant)?;
    let schedule = if setup.known_times { AlphaSchedule::Const } else { AlphaSchedule::Linear };
    let process = (!marked.is_empty()).then(|| mnrs_flow(net, &marked, p)).transpose()?;
    let flow = process.as_ref().map(|f| {
        let mut values = f.flow.values.clone();
        values.extend_from_slice(&f.absorption);
        Flow { values }
    });
    let laws: Vec<ClassicalInput> = setup.transition_laws.iter().chain(&setup.check_laws).cloned().collect();
    let inverse_sum = |l: &ClassicalInput| {
        if setup.known_times {
            law_mean(l) + 1.0
        } else {
            harmonic_mean(l)
        }
    };
    let r = match &flow {
        Some(theta) => prime
            .edges()
            .iter()
            .zip(&theta.values)
            .zip(&laws)
            .map(|((e, x), l)| x * x / e.weight * inverse_sum(l))
            .sum(),
        None => (g.h_t / p + g.h_c / gap) / (2.0 * g.total * epsilon),
    };
    let (sub, ext) = edge_transitions(&prime, laws)?;
    let alpha = AlphaWeights::schedule(schedule, sub.horizon());
    let mut sigma = pi.0.clone();
    sigma.resize(2 * n, 0.0);
    let sets = VertexSets {
        initial: (0..n).collect(),
        checkable: (n..2 * n).collect(),
        marked: marked.iter().map(|u| n + u).collect(),
    };
    let w0 = 1.0 / r;
    let instance =
        WalkInstance::assemble(prime, sets, Distribution(sigma), sub, ext, WalkWeights { alpha, w0, w_marked: w0 })?;
    let n1 = instance.n1_inclusive();
    if let Some(theta) = &flow {
        let check = instance.check_conditions(Some(theta), r, n1, &ConditionThresholds::default());
        if let Err(msg) = check.positive.expect("flow supplied").p1_p2 {
            return Err(Error::Promise(msg));
        }
    }
    let ratio = flow.as_ref().map(|_| (r * n1).sqrt() / complexity);
    let report = MnrsReport {
        gap,
        epsilon,
        pi_min,
        halt_probability: p,
        t_avg,
        c_avg,
        mixing_factor,
        complexity,
        r,
        n1,
        flow: process,
        ratio,
    };
    Ok(MnrsWalk { instance, flow, report })
}

pub fn mnrs_bound(setup: &MnrsSetup) -> Result<MnrsReport> {
    mnrs_walk(setup).map(|w| w.report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_element_search_costs() {
        let si = SearchInstance::deterministic(vec![0.5, 0.5], &[2, 4], 0.5).unwrap();
        let c = search_complexities(&si, &[1]).unwrap();
        let single = c.singleton.unwrap();
        for (got, want) in [(single.linear, 20.0f64), (single.constant, 24.0), (single.inverse, 32.0)] {
            assert!((got - want.sqrt()).abs() < 1e-12);
        }
        assert!((c.general.linear - single.linear).abs() < 1e-12);
        assert_eq!(c.fastest, AlphaSchedule::Linear);
        assert_eq!(predicted_fastest(&si, 1).unwrap(), vec![AlphaSchedule::Linear]);
    }

    #[test]
    fn constant_times_coincide() {
        let si = SearchInstance::deterministic(vec![0.25; 4], &[3; 4], 0.25).unwrap();
        let c = search_complexities(&si, &[2]).unwrap().general;
        let want = (9.0f64 / 0.25).sqrt();
        assert!([c.linear, c.constant, c.inverse].iter().all(|x| (x - want).abs() < 1e-12));
    }

    #[test]
    fn process_on_single_edge_with_certain_check() {
        let net = Network::new(2, &[(0, 1, 1.0)]).unwrap();
        let f = mnrs_flow(&net, &[1], 1.0).unwrap();
        // Start at 0 w.p. 1/2, step once to 1 and halt.
        assert!((f.expected_leaves[0] - 0.5).abs() < 1e-12 && f.expected_leaves[1].abs() < 1e-12);
        assert!((f.flow.values[0] - 0.5).abs() < 1e-12);
        assert!((f.energy - 0.5).abs() < 1e-12 && f.margin >= 0.0);
        assert!((f.energy - f.energy_identity).abs() < 1e-12);
    }

    #[test]
    fn fully_marked_graph_has_no_flow() {
        let net = Network::new(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap();
        let f = mnrs_flow(&net, &[0, 1, 2], 0.3).unwrap();
        assert!(f.flow.values.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn single_marked_weighting_rejects_two_marked() {
        let net = Network::new(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let setup = CheckingSetup {
            network: net,
            sigma: Distribution::point(3, 0),
            tau: Distribution(vec![1.0 / 3.0; 3]),
            marked: vec![1, 2],
            transition_laws: vec![ClassicalInput::deterministic(1, 0); 2],
            check_laws: vec![ClassicalInput::deterministic(1, 0); 3],
            known_times: false,
            epsilon: None,
            marked_cost: None,
            commute_bound: None,
        };
        assert!(matches!(checking_bounds(&setup, CheckWeighting::SingleMarked), Err(Error::Promise(_))));
        assert!(checking_bounds(&setup, CheckWeighting::FlowCost).unwrap().holds());
    }
}
