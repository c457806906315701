//! Quantum walks whose edge transitions are implemented by a variable-time
//! subroutine.
//!
//! The subroutine has one input per oriented edge, in edge order, and its
//! extension maps input `e` (the out-label at the tail) to output `e` (the
//! in-label at the head). The walk space is the subroutine's transition-state
//! space plus one coordinate `|→, u, 0⟩` per vertex of `V0 ∪ M`, standing for
//! the edge from `u` to the auxiliary vertex.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::linalg::{self, real, CVector, C64};
use crate::network::{Distribution, Flow, Network};
use crate::phase_estimation::{
    self, DecisionConfig, NegativeWitnessReport, PhaseEstimationInstance, PositiveWitnessReport, WitnessCertificate,
};
use crate::subroutine::{
    AlphaWeights, ClassicalInput, ClassicalSpec, Expectation, ReversibleExtension, StoppingProfile,
    VariableTimeSubroutine,
};
use crate::vt_states::{
    build_history_states, build_transition_states, sparse_to_dense, Direction, HistoryStates, TransitionStateSet,
};
use crate::{Error, Result};

/// Builds the edge-transition subroutine from per-edge classical halting laws.
/// The computed bit is always 0, so an error flips the phase of the uncompute step.
pub fn edge_transitions(
    net: &Network,
    laws: Vec<ClassicalInput>,
) -> Result<(VariableTimeSubroutine, ReversibleExtension)> {
    if laws.len() != net.edges().len() {
        return Err(Error::InvalidSubroutine(format!("{} laws for {} edges", laws.len(), net.edges().len())));
    }
    let inputs = laws.into_iter().map(|law| ClassicalInput { answer: 0, ..law }).collect();
    let sub = crate::subroutine::build_classical_subroutine(&ClassicalSpec { horizon: None, inputs })?;
    let ext = ReversibleExtension::relabel(net.edges().len());
    Ok((sub, ext))
}

/// Vertex sets: initial vertices `V0`, checkable vertices `V_M`, marked `M ⊆ V_M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexSets {
    pub initial: Vec<usize>,
    pub checkable: Vec<usize>,
    pub marked: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkWeights {
    pub alpha: AlphaWeights,
    /// Weight scale `w0` of the auxiliary edges into `V0`.
    pub w0: f64,
    /// Weight `w_M` of the auxiliary edges into `M`.
    pub w_marked: f64,
}

#[derive(Clone, Debug)]
pub struct WalkInstance {
    network: Network,
    sets: VertexSets,
    sigma: Distribution,
    sub: VariableTimeSubroutine,
    ext: ReversibleExtension,
    weights: WalkWeights,
    states: TransitionStateSet,
    history: HistoryStates,
    profiles: Vec<StoppingProfile>,
    /// Coordinate of `|→, u, 0⟩` for each `u ∈ V0 ∪ M`.
    auxiliary: BTreeMap<usize, usize>,
    stars: Vec<CVector>,
    pe: PhaseEstimationInstance,
    orthogonality_residual: f64,
}

fn check_extension(ext: &ReversibleExtension, edges: usize, tol: f64) -> Result<()> {
    if ext.input_dim() != edges || ext.output_dim() != edges {
        return Err(Error::InvalidSubroutine(format!("extension must act on {edges} edge labels")));
    }
    for e in 0..edges {
        let col = ext.apply(e);
        for (r, x) in col.iter().enumerate() {
            let want = if r == e { 1.0 } else { 0.0 };
            if (x - real(want)).norm() > tol {
                return Err(Error::InvalidSubroutine(format!("A must send edge {e} to its head label")));
            }
        }
        for a in 0..2 {
            let col = ext.apply_answer(a, e);
            let leak = col.iter().enumerate().filter(|(r, _)| *r != e).map(|(_, x)| x.norm()).fold(0.0, f64::max);
            if leak > tol {
                return Err(Error::InvalidSubroutine(format!("A_{a} moves edge {e} off its head label")));
            }
        }
    }
    Ok(())
}

impl WalkInstance {
    pub fn assemble(
        network: Network,
        sets: VertexSets,
        sigma: Distribution,
        sub: VariableTimeSubroutine,
        ext: ReversibleExtension,
        weights: WalkWeights,
    ) -> Result<Self> {
        let n = network.vertex_count();
        let m = network.edges().len();
        let tol = crate::Tolerances::default();
        if sets.initial.iter().chain(&sets.checkable).any(|&u| u >= n) {
            return Err(Error::InvalidInstance("vertex set refers to a missing vertex".into()));
        }
        if sets.initial.iter().any(|u| sets.checkable.contains(u)) {
            return Err(Error::InvalidInstance("V0 and V_M must be disjoint".into()));
        }
        if sets.marked.iter().any(|u| !sets.checkable.contains(u)) {
            return Err(Error::InvalidInstance("marked vertices must be checkable".into()));
        }
        if sigma.len() != n {
            return Err(Error::InvalidDistribution(format!("{} entries for {n} vertices", sigma.len())));
        }
        if let Some(u) = sigma.support().into_iter().find(|u| !sets.initial.contains(u)) {
            return Err(Error::InvalidDistribution(format!("σ is supported on {u}, outside V0")));
        }
        if !(weights.w0 > 0.0 && weights.w_marked > 0.0) {
            return Err(Error::InvalidWeights("auxiliary weights must be positive".into()));
        }
        if sub.inputs() != m {
            return Err(Error::InvalidSubroutine(format!("{} inputs for {m} edges", sub.inputs())));
        }
        check_extension(&ext, m, tol.construction)?;
        let report = sub.validate(&ext, tol.construction)?;
        if !report.passed() {
            return Err(Error::InvalidSubroutine(format!("failed checks: {:?}", report.failures())));
        }

        let states = build_transition_states(&sub, &ext, &weights.alpha)?;
        let history = build_history_states(&sub, &ext, &weights.alpha)?;
        let base = states.dim();
        let mut auxiliary = BTreeMap::new();
        for &u in sets.initial.iter().chain(&sets.marked) {
            let next = base + auxiliary.len();
            auxiliary.entry(u).or_insert(next);
        }
        let dim = base + auxiliary.len();
        crate::config::check_dimension(dim)?;

        let layout = &states.layout;
        let start = layout.slot(0, 0, 0).expect("initial slot");
        let mut stars = Vec::with_capacity(n);
        for u in 0..n {
            let mut v = linalg::zeros(dim);
            for (k, e) in network.edges().iter().enumerate() {
                let s = e.weight.sqrt();
                if e.tail == u {
                    v[layout.index(Direction::Forward, k, start)] += real(s);
                }
                if e.head == u {
                    v[layout.index(Direction::Backward, k, start)] -= real(s);
                }
            }
            if sets.initial.contains(&u) {
                v[auxiliary[&u]] += real((weights.w0 * sigma.get(u)).sqrt());
            }
            if sets.marked.contains(&u) {
                v[auxiliary[&u]] += real(weights.w_marked.sqrt());
            }
            stars.push(v);
        }

        let widen = |v: CVector| {
            let mut out = linalg::zeros(dim);
            out.rows_mut(0, base).copy_from(&v);
            out
        };
        let a_states: Vec<CVector> = states.bucket_vectors(0).into_iter().map(widen).collect();
        let mut b_states: Vec<CVector> = states.bucket_vectors(1).into_iter().map(widen).collect();
        let odd_count = b_states.len();

        let mut psi0 = linalg::zeros(dim);
        for u in sigma.support() {
            psi0[auxiliary[&u]] = real(sigma.get(u).sqrt());
        }
        let orthogonality_residual = pairwise_residual(&a_states).max(pairwise_residual(
            &b_states.iter().cloned().chain(stars.iter().filter(|s| s.norm() > 0.0).cloned()).collect::<Vec<_>>(),
        ));
        if orthogonality_residual > 1e-10 {
            return Err(Error::InvalidInstance(format!("bucket orthogonality residual {orthogonality_residual:e}")));
        }
        b_states.extend(stars.iter().cloned());
        debug_assert!(b_states.len() == odd_count + n);
        let pe = PhaseEstimationInstance::new(psi0, &a_states, &b_states, tol.drop)?;
        let profiles = (0..m).map(|e| sub.stopping_profile(e)).collect();
        Ok(Self {
            network,
            sets,
            sigma,
            sub,
            ext,
            weights,
            states,
            history,
            profiles,
            auxiliary,
            stars,
            pe,
            orthogonality_residual,
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn sets(&self) -> &VertexSets {
        &self.sets
    }

    pub fn sigma(&self) -> &Distribution {
        &self.sigma
    }

    pub fn weights(&self) -> &WalkWeights {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.pe.dim()
    }

    pub fn phase_instance(&self) -> &PhaseEstimationInstance {
        &self.pe
    }

    pub fn transition_states(&self) -> &TransitionStateSet {
        &self.states
    }

    pub fn star_states(&self) -> &[CVector] {
        &self.stars
    }

    pub fn subroutine(&self) -> (&VariableTimeSubroutine, &ReversibleExtension) {
        (&self.sub, &self.ext)
    }

    /// Largest normalized off-diagonal Gram entry within `Ψ^A` and within `Ψ^B`.
    pub fn orthogonality_residual(&self) -> f64 {
        self.orthogonality_residual
    }

    pub fn profile(&self, edge: usize) -> &StoppingProfile {
        &self.profiles[edge]
    }

    fn edge_expectation(&self, mode: Expectation) -> Vec<f64> {
        self.profiles.iter().map(|p| p.expectation(&self.weights.alpha, mode)).collect()
    }

    /// The network with edge weights `w_e / E[Σ_{t≤T_e} 1/α_t]`, whose flow
    /// energy equals the positive-side cost `Σ θ_e²/w_e · E[Σ_{t≤T_e} 1/α_t]`.
    pub fn cost_network(&self) -> Result<Network> {
        let inv = self.edge_expectation(Expectation::SumInverse);
        let edges: Vec<_> =
            self.network.edges().iter().zip(&inv).map(|(e, s)| (e.tail, e.head, e.weight / s)).collect();
        Network::new(self.network.vertex_count(), &edges)
    }

    /// The `σ`-to-`M` flow of least positive-side cost.
    pub fn optimal_flow(&self) -> Result<Flow> {
        if self.sets.marked.is_empty() {
            return Err(Error::Infeasible("no marked vertices".into()));
        }
        self.cost_network()?.min_energy_flow_to_set(&self.sigma, &self.sets.marked)
    }

    fn check_flow(&self, theta: &Flow) -> Result<Vec<f64>> {
        if theta.values.len() != self.network.edges().len() {
            return Err(Error::InvalidInstance("flow has the wrong number of edges".into()));
        }
        let outflow = theta.net_outflow(&self.network);
        let tol = 1e-9;
        for (u, &x) in outflow.iter().enumerate() {
            if x.abs() > tol && !self.sets.initial.contains(&u) && !self.sets.marked.contains(&u) {
                return Err(Error::Promise(format!("P1: flow has boundary at {u} outside V0 ∪ M")));
            }
        }
        let source: f64 = self.sets.initial.iter().map(|&u| outflow[u]).sum();
        if (source - 1.0).abs() > tol {
            return Err(Error::Promise(format!("P1: flow out of V0 is {source}, not 1")));
        }
        let p2 = self.p2_value(&outflow);
        if !(1.0 / 3.0 - tol..=3.0 + tol).contains(&p2) {
            return Err(Error::Promise(format!("P2: Σ θ(u)²/σ(u) = {p2} outside [1/3, 3]")));
        }
        Ok(outflow)
    }

    fn p2_value(&self, outflow: &[f64]) -> f64 {
        self.sets
            .initial
            .iter()
            .map(|&u| {
                let s = self.sigma.get(u);
                if outflow[u].abs() <= 1e-12 {
                    0.0
                } else if s == 0.0 {
                    f64::INFINITY
                } else {
                    outflow[u] * outflow[u] / s
                }
            })
            .sum()
    }

    pub fn positive_witness(&self, theta: &Flow) -> Result<PositiveWalkWitness> {
        let outflow = self.check_flow(theta)?;
        let dim = self.dim();
        let mut w = linalg::zeros(dim);
        for (k, e) in self.network.edges().iter().enumerate() {
            let c = theta.values[k] / e.weight.sqrt();
            if c == 0.0 {
                continue;
            }
            for &(idx, x) in &self.history.positive[k] {
                w[idx] += x * c;
            }
        }
        // The auxiliary edge carries θ(u, v0) = −θ(u), closing the flow into a circulation.
        for (&u, &idx) in &self.auxiliary {
            let weight = self.auxiliary_weight(u);
            if outflow[u] != 0.0 {
                w[idx] -= real(outflow[u] / weight.sqrt());
            }
        }
        // Fix the global sign so that ⟨ψ0|w⟩ = +1/√w0.
        let overlap = linalg::inner(self.pe.psi0(), &w);
        if overlap.re < 0.0 {
            w.neg_mut();
        }
        let overlap = linalg::inner(self.pe.psi0(), &w);
        let report = phase_estimation::verify_positive_witness(&self.pe, &w)?;
        let star_overlap = self.stars.iter().map(|s| linalg::inner(s, &w).norm()).fold(0.0, f64::max);

        let inv = self.edge_expectation(Expectation::SumInverse);
        let err = self.edge_expectation(Expectation::ErrorOverWeightAtStop);
        let edges = self.network.edges();
        let p3: f64 = edges.iter().enumerate().map(|(k, e)| theta.values[k].powi(2) / e.weight * inv[k]).sum();
        let p4: f64 = edges.iter().enumerate().map(|(k, e)| theta.values[k].powi(2) / e.weight * err[k]).sum();
        let marked_term: f64 =
            self.sets.marked.iter().map(|&u| outflow[u].powi(2)).sum::<f64>() / self.weights.w_marked;
        let w0 = self.weights.w0;
        let norm_closed = 2.0 * p3 + self.p2_value(&outflow) / w0 + marked_term;
        Ok(PositiveWalkWitness {
            certificate: WitnessCertificate::Positive { w, delta: report.delta, c_plus: report.c_plus },
            overlap,
            star_overlap,
            norm_sqr_closed_form: norm_closed,
            delta_bound: 3.0 * w0 * p4,
            c_plus_bound: 2.0 * w0 * p3 + 4.0,
            report,
        })
    }

    fn auxiliary_weight(&self, u: usize) -> f64 {
        let mut w = 0.0;
        if self.sets.initial.contains(&u) {
            w += self.weights.w0 * self.sigma.get(u);
        }
        if self.sets.marked.contains(&u) {
            w += self.weights.w_marked;
        }
        w
    }

    pub fn negative_witness(&self) -> Result<NegativeWalkWitness> {
        if !self.sets.marked.is_empty() {
            return Err(Error::Promise("negative witness requires M = ∅".into()));
        }
        let dim = self.dim();
        let scale = 1.0 / self.weights.w0.sqrt();
        let layout = &self.states.layout;
        let start = layout.slot(0, 0, 0).expect("initial slot");
        let mut w_a = linalg::zeros(dim);
        let mut w_b = linalg::zeros(dim);
        for (k, e) in self.network.edges().iter().enumerate() {
            let c = e.weight.sqrt() * scale;
            let minus = sparse_to_dense(&self.history.negative[k], self.states.dim());
            for (idx, x) in minus.iter().enumerate() {
                w_a[idx] -= x * c;
                w_b[idx] += x * c;
            }
            w_b[layout.index(Direction::Forward, k, start)] -= real(c);
            for (r, x) in self.ext.apply(k).iter().enumerate() {
                w_b[layout.index(Direction::Backward, r, start)] += x * c;
            }
        }
        for s in &self.stars {
            w_b.axpy(real(scale), s, C64::new(1.0, 0.0));
        }
        let report = phase_estimation::verify_negative_witness(&self.pe, &w_a, &w_b, 1e-9)?;
        let n1_inclusive = self.n1_inclusive();
        Ok(NegativeWalkWitness {
            certificate: WitnessCertificate::Negative {
                w_a,
                w_b,
                delta_prime: report.delta_prime,
                c_minus: report.c_minus,
            },
            c_minus_closed_form: 2.0 * n1_inclusive / self.weights.w0,
            delta_prime_bound: 2.0 / self.weights.w0 * self.n2(),
            report,
        })
    }

    /// `Σ_e w_e E[Σ_{t<T_e} α_t]`.
    pub fn n1(&self) -> f64 {
        let alpha = &self.weights.alpha;
        self.network
            .edges()
            .iter()
            .zip(&self.profiles)
            .map(|(e, p)| {
                let at_stop: f64 = p.halt.iter().enumerate().map(|(t, q)| q * alpha.get(t)).sum();
                e.weight * (p.expected_sum(|t| alpha.get(t)) - at_stop)
            })
            .sum()
    }

    /// `Σ_e w_e E[Σ_{t≤T_e} α_t]`, the weight that enters the negative witness norm.
    pub fn n1_inclusive(&self) -> f64 {
        let direct = self.edge_expectation(Expectation::SumDirect);
        self.network.edges().iter().zip(&direct).map(|(e, d)| e.weight * d).sum()
    }

    /// `Σ_e w_e E[α_{T_e} ε_e]`.
    pub fn n2(&self) -> f64 {
        let err = self.edge_expectation(Expectation::ErrorAtStop);
        self.network.edges().iter().zip(&err).map(|(e, d)| e.weight * d).sum()
    }

    pub fn check_conditions(
        &self,
        theta: Option<&Flow>,
        r: f64,
        w: f64,
        thresholds: &ConditionThresholds,
    ) -> ConditionReport {
        let positive = theta.map(|theta| {
            let flow_ok = self.check_flow(theta);
            let outflow = theta.net_outflow(&self.network);
            let inv = self.edge_expectation(Expectation::SumInverse);
            let err = self.edge_expectation(Expectation::ErrorOverWeightAtStop);
            let edges = self.network.edges();
            let p3: f64 = edges.iter().enumerate().map(|(k, e)| theta.values[k].powi(2) / e.weight * inv[k]).sum();
            let p4: f64 = edges.iter().enumerate().map(|(k, e)| theta.values[k].powi(2) / e.weight * err[k]).sum();
            PositiveConditions {
                p1_p2: flow_ok.as_ref().map(|_| ()).map_err(|e| e.to_string()),
                p2: self.p2_value(&outflow),
                p3,
                p3_holds: p3 <= r * (1.0 + 1e-12),
                p4,
                p4_holds: p4 * w <= thresholds.p4_ratio,
            }
        });
        let n1 = self.n1();
        let n2 = self.n2();
        ConditionReport {
            r,
            w,
            positive,
            n1,
            n1_inclusive: self.n1_inclusive(),
            n1_holds: n1 <= w * (1.0 + 1e-12),
            n2,
            n2_holds: n2 * r <= thresholds.n2_ratio,
        }
    }

    /// Runs phase estimation with `C₋ = 2RW`.
    pub fn run(&self, r: f64, w: f64, setup_cost: f64, config: &DecisionConfig) -> Result<WalkRun> {
        if !(r > 0.0 && w > 0.0) {
            return Err(Error::InvalidInstance("R and W must be positive".into()));
        }
        let c_minus = 2.0 * r * w;
        let decision = phase_estimation::decide(&self.pe, c_minus, config)?;
        let log_t = (self.sub.horizon() as f64).log2().max(1.0);
        Ok(WalkRun { c_minus, cost_estimate: setup_cost + (r * w).sqrt() * log_t, decision })
    }
}

fn pairwise_residual(vectors: &[CVector]) -> f64 {
    let mut worst: f64 = 0.0;
    for (p, a) in vectors.iter().enumerate() {
        for b in &vectors[p + 1..] {
            let denom = a.norm() * b.norm();
            if denom > 0.0 {
                worst = worst.max(linalg::inner(a, b).norm() / denom);
            }
        }
    }
    worst
}

#[derive(Clone, Debug)]
pub struct PositiveWalkWitness {
    pub certificate: WitnessCertificate,
    pub report: PositiveWitnessReport,
    /// `⟨ψ0|w⟩`, equal to `1/√w0` when the flow leaves `V0` with unit mass.
    pub overlap: C64,
    /// `max_u |⟨ψ⋆(u)|w⟩|`.
    pub star_overlap: f64,
    /// `2·P3 + Σ_{V0} θ(u)²/(w0 σ(u)) + Σ_M θ(u)²/w_M`.
    pub norm_sqr_closed_form: f64,
    /// `3 w0 Σ_e θ_e²/w_e · E[ε/α]`.
    pub delta_bound: f64,
    /// `2 w0 P3 + 4`.
    pub c_plus_bound: f64,
}

#[derive(Clone, Debug)]
pub struct NegativeWalkWitness {
    pub certificate: WitnessCertificate,
    pub report: NegativeWitnessReport,
    /// `(2/w0) Σ_e w_e E[Σ_{t≤T_e} α_t]`.
    pub c_minus_closed_form: f64,
    /// `(2/w0) Σ_e w_e E[α ε]`.
    pub delta_prime_bound: f64,
}

/// Concrete surrogates for the vanishing-error conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionThresholds {
    /// Pass when `P4 · W` is at most this.
    pub p4_ratio: f64,
    /// Pass when `N2 · R` is at most this.
    pub n2_ratio: f64,
}

impl Default for ConditionThresholds {
    fn default() -> Self {
        Self { p4_ratio: 0.01, n2_ratio: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositiveConditions {
    /// Boundary and normalization checks, with the failure message.
    pub p1_p2: std::result::Result<(), String>,
    pub p2: f64,
    pub p3: f64,
    pub p3_holds: bool,
    pub p4: f64,
    pub p4_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub r: f64,
    pub w: f64,
    pub positive: Option<PositiveConditions>,
    pub n1: f64,
    pub n1_inclusive: f64,
    pub n1_holds: bool,
    pub n2: f64,
    pub n2_holds: bool,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        let pos = self.positive.as_ref().is_none_or(|p| p.p1_p2.is_ok() && p.p3_holds && p.p4_holds);
        pos && self.n1_holds && self.n2_holds
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkRun {
    pub c_minus: f64,
    /// `S + √(RW)·log₂ T` in abstract units.
    pub cost_estimate: f64,
    pub decision: phase_estimation::Decision,
}

/// Bounds used to configure a walk: `R` from the best flow of the marked
/// variant and `W` from the inclusive negative-side weight.
pub fn default_bounds(marked: &WalkInstance) -> Result<(f64, f64)> {
    let theta = marked.optimal_flow()?;
    let report = marked.check_conditions(Some(&theta), f64::INFINITY, f64::INFINITY, &ConditionThresholds::default());
    let p3 = report.positive.expect("flow supplied").p3;
    Ok((p3, marked.n1_inclusive()))
}
