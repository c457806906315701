//! Phase-estimation algorithms: an initial state, two vector sets `Ψ^A` and
//! `Ψ^B`, the walk operator `U = (2Π_A − I)(2Π_B − I)`, witness verification
//! and the phase-estimation decision.
//!
//! Eigenphases of `U` come in pairs `±θ`, and `(U + U†)/2` has eigenvalue
//! `cos θ` on the sum of both eigenspaces. Every statistic used here depends
//! only on `|θ|`, so the decision works with that Hermitian matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, real, CMatrix, CVector, Subspace};
use crate::{Error, Result};

/// Which of the two sets the initial state is orthogonal to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrthogonalSide {
    A,
    B,
}

#[derive(Clone, Debug)]
pub struct PhaseEstimationInstance {
    psi0: CVector,
    space_a: Subspace,
    space_b: Subspace,
    side: OrthogonalSide,
    overlap_a: f64,
    overlap_b: f64,
}

impl PhaseEstimationInstance {
    /// Validates `‖ψ0‖ = 1` and that `ψ0` is orthogonal to `span Ψ^B`, or failing
    /// that to `span Ψ^A` (the two roles are exchanged by `U ↦ U†`, which leaves
    /// every `|θ|`-statistic unchanged).
    pub fn new(psi0: CVector, a_states: &[CVector], b_states: &[CVector], drop: f64) -> Result<Self> {
        let dim = psi0.len();
        if a_states.iter().chain(b_states).any(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch("state vectors must match the initial state".into()));
        }
        crate::config::check_dimension(dim)?;
        let n = psi0.norm();
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInstance(format!("initial state has norm {n}")));
        }
        let space_a = Subspace::span(dim, a_states, drop);
        let space_b = Subspace::span(dim, b_states, drop);
        let overlap_a = space_a.project(&psi0).norm();
        let overlap_b = space_b.project(&psi0).norm();
        let side = if overlap_b <= 1e-10 {
            OrthogonalSide::B
        } else if overlap_a <= 1e-10 {
            OrthogonalSide::A
        } else {
            return Err(Error::InvalidInstance(format!(
                "initial state overlaps both sets (|Pi_A psi0| = {overlap_a:e}, |Pi_B psi0| = {overlap_b:e})"
            )));
        };
        Ok(Self { psi0, space_a, space_b, side, overlap_a, overlap_b })
    }

    pub fn dim(&self) -> usize {
        self.psi0.len()
    }

    pub fn psi0(&self) -> &CVector {
        &self.psi0
    }

    pub fn space_a(&self) -> &Subspace {
        &self.space_a
    }

    pub fn space_b(&self) -> &Subspace {
        &self.space_b
    }

    pub fn orthogonal_side(&self) -> OrthogonalSide {
        self.side
    }

    /// `(‖Π_A ψ0‖, ‖Π_B ψ0‖)`.
    pub fn initial_overlaps(&self) -> (f64, f64) {
        (self.overlap_a, self.overlap_b)
    }

    pub fn walk_operator(&self) -> CMatrix {
        self.space_a.reflection() * self.space_b.reflection()
    }

    /// Eigen-decomposition of `(U + U†)/2` with the weight of `ψ0` on each eigenvector.
    pub fn spectrum(&self) -> Spectrum {
        let (values, vectors, unitarity_residual) = if self.space_a.is_real() && self.space_b.is_real() {
            // Real reflections make U orthogonal and the symmetric part real.
            let u = self.space_a.real_reflection() * self.space_b.real_reflection();
            let h = (&u + u.transpose()) * 0.5;
            let mut gram = u.transpose() * &u;
            for k in 0..gram.nrows() {
                gram[(k, k)] -= 1.0;
            }
            let residual = gram.amax();
            let eig = h.symmetric_eigen();
            (eig.eigenvalues.iter().copied().collect::<Vec<f64>>(), eig.eigenvectors.map(real), residual)
        } else {
            let u = self.walk_operator();
            let h = (&u + u.adjoint()) * real(0.5);
            let (values, vectors) = linalg::hermitian_eigen(&h);
            (values, vectors, linalg::unitarity_residual(&u))
        };
        let phases =
            values.iter().map(|&c| if 1.0 - c <= PHASE_SNAP { 0.0 } else { c.clamp(-1.0, 1.0).acos() }).collect();
        let weights = (0..values.len()).map(|k| vectors.column(k).dotc(&self.psi0).norm_sqr()).collect();
        Spectrum { phases, weights, vectors, unitarity_residual }
    }
}

/// Cosines within this distance of 1 are treated as phase exactly 0.
pub const PHASE_SNAP: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct Spectrum {
    /// `|θ_k| ∈ [0, π]` per eigenvector.
    pub phases: Vec<f64>,
    /// `|⟨v_k|ψ0⟩|²`.
    pub weights: Vec<f64>,
    pub vectors: CMatrix,
    pub unitarity_residual: f64,
}

impl Spectrum {
    /// `‖P_{|θ|≤Δ} ψ0‖²`.
    pub fn weight_within(&self, delta: f64) -> f64 {
        self.phases.iter().zip(&self.weights).filter(|(p, _)| **p <= delta).map(|(_, w)| w).sum()
    }

    /// `‖P_{|θ|>Δ} v‖`.
    pub fn norm_beyond(&self, v: &CVector, delta: f64) -> f64 {
        self.phases
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > delta)
            .map(|(k, _)| self.vectors.column(k).dotc(v).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Weight of `ψ0` in `bins` equal bins of `|θ| ∈ [0, π]`.
    pub fn histogram(&self, bins: usize) -> Vec<f64> {
        let mut h = vec![0.0; bins];
        for (p, w) in self.phases.iter().zip(&self.weights) {
            let k = ((p / std::f64::consts::PI) * bins as f64).floor() as usize;
            h[k.min(bins - 1)] += w;
        }
        h
    }

    /// Probability that phase estimation with `N = 2^bits` outcomes reads `0`.
    pub fn zero_outcome_probability(&self, bits: u32) -> f64 {
        let n = f64::from(1u32 << bits);
        self.phases.iter().zip(&self.weights).map(|(&p, &w)| w * fejer(p, n)).sum()
    }
}

/// `sin²(Nθ/2) / (N² sin²(θ/2))`, the probability of outcome 0 on eigenphase `θ`.
pub fn fejer(theta: f64, n: f64) -> f64 {
    let s = (theta / 2.0).sin();
    if s.abs() < 1e-300 {
        1.0
    } else {
        let num = (n * theta / 2.0).sin();
        (num * num) / (n * n * s * s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositiveWitnessReport {
    /// `max(‖Π_A w‖², ‖Π_B w‖²) / ‖w‖²`.
    pub delta: f64,
    /// `‖w‖² / |⟨w|ψ0⟩|²`.
    pub c_plus: f64,
    /// `|⟨w|ψ0⟩|`.
    pub overlap: f64,
    pub norm_sqr: f64,
}

pub fn verify_positive_witness(inst: &PhaseEstimationInstance, w: &CVector) -> Result<PositiveWitnessReport> {
    if w.len() != inst.dim() {
        return Err(Error::DimensionMismatch("witness dimension".into()));
    }
    let norm_sqr = linalg::norm_sqr(w);
    let overlap = linalg::inner(w, &inst.psi0).norm();
    if norm_sqr == 0.0 || overlap <= 1e-12 * norm_sqr.sqrt() {
        return Err(Error::Witness("positive witness is orthogonal to the initial state".into()));
    }
    let pa = linalg::norm_sqr(&inst.space_a.project(w));
    let pb = linalg::norm_sqr(&inst.space_b.project(w));
    Ok(PositiveWitnessReport {
        delta: pa.max(pb) / norm_sqr,
        c_plus: norm_sqr / (overlap * overlap),
        overlap,
        norm_sqr,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NegativeWitnessReport {
    /// `max(‖(I−Π_A)w_A‖², ‖(I−Π_B)w_B‖²)`.
    pub delta_prime: f64,
    /// `‖w_A‖²`.
    pub c_minus: f64,
    pub error_a: f64,
    pub error_b: f64,
    /// `‖Π_A w_A‖` and `‖Π_B w_B‖`.
    pub in_span_a: f64,
    pub in_span_b: f64,
    /// `‖w_A + w_B − ψ0‖`.
    pub decomposition_residual: f64,
}

pub fn verify_negative_witness(
    inst: &PhaseEstimationInstance,
    w_a: &CVector,
    w_b: &CVector,
    tol: f64,
) -> Result<NegativeWitnessReport> {
    if w_a.len() != inst.dim() || w_b.len() != inst.dim() {
        return Err(Error::DimensionMismatch("witness dimension".into()));
    }
    let residual = (w_a + w_b - &inst.psi0).norm();
    if residual > tol {
        return Err(Error::Witness(format!("w_A + w_B differs from the initial state by {residual:e}")));
    }
    let pa = inst.space_a.project(w_a);
    let pb = inst.space_b.project(w_b);
    let error_a = linalg::norm_sqr(&(w_a - &pa));
    let error_b = linalg::norm_sqr(&(w_b - &pb));
    Ok(NegativeWitnessReport {
        delta_prime: error_a.max(error_b),
        c_minus: linalg::norm_sqr(w_a),
        error_a,
        error_b,
        in_span_a: pa.norm(),
        in_span_b: pb.norm(),
        decomposition_residual: residual,
    })
}

impl NegativeWitnessReport {
    /// Certified upper bound on `‖P_{|θ|≤Δ} ψ0‖²` from the effective spectral gap
    /// lemma. With `ψ0 ⊥ B`, `ψ0 = (I−Π_B)ψ0` and only the `A`-part of `w_A`
    /// contributes a `Δ/2` term; with `ψ0 ⊥ A` the roles swap.
    pub fn weight_bound(&self, side: OrthogonalSide, delta: f64) -> f64 {
        let main = match side {
            OrthogonalSide::B => self.in_span_a,
            OrthogonalSide::A => self.in_span_b,
        };
        let root = 0.5 * delta * main + self.error_a.sqrt() + self.error_b.sqrt();
        root * root
    }

    /// Hypotheses `δ′ ≤ (3/4)π⁻⁴/c₊` and `‖w_A‖² ≤ C₋` of the decision theorem.
    pub fn hypotheses_met(&self, c_plus: f64, c_minus: f64) -> bool {
        self.delta_prime <= 0.75 * std::f64::consts::PI.powi(-4) / c_plus && self.c_minus <= c_minus * (1.0 + 1e-12)
    }
}

impl PositiveWitnessReport {
    /// Hypotheses `c₊ ≤ 50` and `δ ≤ (8c₊)⁻³π⁻⁸/C₋` of the decision theorem.
    pub fn hypotheses_met(&self, c_plus: f64, c_minus: f64) -> bool {
        self.c_plus <= c_plus * (1.0 + 1e-12)
            && c_plus <= 50.0
            && self.delta <= (8.0 * c_plus).powi(-3) * std::f64::consts::PI.powi(-8) / c_minus
    }
}

/// Lower bound on `‖P_{|θ|≤Δ} ψ0‖²` from a positive witness and the spectrum:
/// `(|⟨ŵ|ψ0⟩| − ‖P_{|θ|>Δ} ŵ‖)²`, clamped at 0.
pub fn positive_weight_bound(inst: &PhaseEstimationInstance, spectrum: &Spectrum, w: &CVector, delta: f64) -> f64 {
    let unit = w.unscale(w.norm());
    let gap = linalg::inner(&unit, &inst.psi0).norm() - spectrum.norm_beyond(&unit, delta);
    gap.max(0.0).powi(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Spectral,
    Circuit,
}

/// Decision parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionConfig {
    /// `Δ = κ/√C₋`.
    pub kappa: f64,
    /// Accept when the phase-zero weight is at least this.
    pub tau_accept: f64,
    pub mode: Mode,
    pub seed: u64,
    /// Shots per repetition in circuit mode.
    pub shots: usize,
    /// Repetitions for the majority vote in circuit mode.
    pub repetitions: usize,
    pub histogram_bins: usize,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        Self {
            kappa: 1.0 / 64.0,
            tau_accept: 1.0 / (2.0 * 50.0),
            mode: Mode::Spectral,
            seed: 0,
            shots: 2000,
            repetitions: 5,
            histogram_bins: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitRun {
    pub ancilla_bits: u32,
    /// Probability of reading outcome 0.
    pub zero_probability: f64,
    pub accept_fractions: Vec<f64>,
    pub queries_per_shot: u64,
    pub total_queries: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub positive: bool,
    pub mode: Mode,
    pub delta: f64,
    pub m_delta: f64,
    pub tau_accept: f64,
    /// `m(Δ) − τ`.
    pub margin: f64,
    pub phase_histogram: Vec<f64>,
    /// Applications of `U` needed to resolve phases at scale `Δ`.
    pub query_estimate: u64,
    pub unitarity_residual: f64,
    pub circuit: Option<CircuitRun>,
    pub spectral_positive: bool,
}

/// Runs the decision at `Δ = κ/√C₋`.
pub fn decide(inst: &PhaseEstimationInstance, c_minus: f64, config: &DecisionConfig) -> Result<Decision> {
    let spectrum = inst.spectrum();
    decide_with_spectrum(&spectrum, c_minus, config)
}

pub fn decide_with_spectrum(spectrum: &Spectrum, c_minus: f64, config: &DecisionConfig) -> Result<Decision> {
    if !(c_minus.is_finite() && c_minus > 0.0) {
        return Err(Error::InvalidInstance(format!("C- must be positive, got {c_minus}")));
    }
    let delta = config.kappa / c_minus.sqrt();
    let m_delta = spectrum.weight_within(delta);
    let spectral_positive = m_delta >= config.tau_accept;
    let (positive, circuit, query_estimate) = match config.mode {
        Mode::Spectral => (spectral_positive, None, (1.0 / delta).ceil() as u64),
        Mode::Circuit => {
            let bits = (1.0 / delta).log2().ceil().max(0.0) as u32 + 2;
            let p0 = spectrum.zero_outcome_probability(bits);
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let fractions: Vec<f64> = (0..config.repetitions)
                .map(|_| {
                    let hits = (0..config.shots).filter(|_| rng.gen::<f64>() < p0).count();
                    hits as f64 / config.shots.max(1) as f64
                })
                .collect();
            let votes = fractions.iter().filter(|&&f| f >= config.tau_accept).count();
            let per_shot = (1u64 << bits) - 1;
            let run = CircuitRun {
                ancilla_bits: bits,
                zero_probability: p0,
                accept_fractions: fractions,
                queries_per_shot: per_shot,
                total_queries: per_shot * (config.shots * config.repetitions) as u64,
            };
            (2 * votes > config.repetitions, Some(run), per_shot)
        }
    };
    Ok(Decision {
        positive,
        mode: config.mode,
        delta,
        m_delta,
        tau_accept: config.tau_accept,
        margin: m_delta - config.tau_accept,
        phase_histogram: spectrum.histogram(config.histogram_bins.max(1)),
        query_estimate,
        unitarity_residual: spectrum.unitarity_residual,
        circuit,
        spectral_positive,
    })
}

/// A witness together with the quantities recorded when it was built.
#[derive(Clone, Debug)]
pub enum WitnessCertificate {
    Positive { w: CVector, delta: f64, c_plus: f64 },
    Negative { w_a: CVector, w_b: CVector, delta_prime: f64, c_minus: f64 },
}

impl WitnessCertificate {
    /// Recomputes the stored quantities against `inst`; errors if they disagree beyond `tol`.
    pub fn verify(&self, inst: &PhaseEstimationInstance, tol: f64) -> Result<()> {
        let close = |x: f64, y: f64| (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0);
        match self {
            Self::Positive { w, delta, c_plus } => {
                let r = verify_positive_witness(inst, w)?;
                if close(r.delta, *delta) && close(r.c_plus, *c_plus) {
                    Ok(())
                } else {
                    Err(Error::Witness(format!(
                        "recorded (δ, c₊) = ({delta}, {c_plus}), measured ({}, {})",
                        r.delta, r.c_plus
                    )))
                }
            }
            Self::Negative { w_a, w_b, delta_prime, c_minus } => {
                let r = verify_negative_witness(inst, w_a, w_b, tol)?;
                if close(r.delta_prime, *delta_prime) && close(r.c_minus, *c_minus) {
                    Ok(())
                } else {
                    Err(Error::Witness(format!(
                        "recorded (δ′, C₋) = ({delta_prime}, {c_minus}), measured ({}, {})",
                        r.delta_prime, r.c_minus
                    )))
                }
            }
        }
    }
}

/// Comparison of a decision with what its witness certifies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginAudit {
    pub expected_positive: bool,
    /// Upper bound on `m(Δ)` for negative certificates, lower bound for positive ones.
    pub certified_bound: f64,
    /// The certified bound lies on the correct side of the threshold.
    pub certified_separated: bool,
    pub decision_correct: bool,
    /// Raised when the decision is wrong or the certificate fails to separate.
    pub margin_violation: bool,
    /// The witness also meets the decision theorem's hypotheses.
    pub theorem_hypotheses_met: bool,
}

pub fn audit_decision(
    inst: &PhaseEstimationInstance,
    spectrum: &Spectrum,
    decision: &Decision,
    certificate: &WitnessCertificate,
    c_plus_bound: f64,
    c_minus_bound: f64,
) -> Result<MarginAudit> {
    let (expected_positive, certified_bound, separated, hypotheses) = match certificate {
        WitnessCertificate::Positive { w, .. } => {
            let r = verify_positive_witness(inst, w)?;
            let bound = positive_weight_bound(inst, spectrum, w, decision.delta);
            (true, bound, bound >= decision.tau_accept, r.hypotheses_met(c_plus_bound, c_minus_bound))
        }
        WitnessCertificate::Negative { w_a, w_b, .. } => {
            let r = verify_negative_witness(inst, w_a, w_b, 1e-9)?;
            let bound = r.weight_bound(inst.orthogonal_side(), decision.delta);
            (false, bound, bound < decision.tau_accept, r.hypotheses_met(c_plus_bound, c_minus_bound))
        }
    };
    let decision_correct = decision.positive == expected_positive;
    Ok(MarginAudit {
        expected_positive,
        certified_bound,
        certified_separated: separated,
        decision_correct,
        margin_violation: !(decision_correct && separated),
        theorem_hypotheses_met: hypotheses,
    })
}

/// Random instance with a planted exact witness, in a real space of dimension `dim`.
pub fn random_planted_instance(
    dim: usize,
    positive: bool,
    rng: &mut impl Rng,
) -> (PhaseEstimationInstance, WitnessCertificate) {
    assert!(dim >= 6, "need room for two subspaces and a witness");
    let gaussian_vec =
        |rng: &mut dyn rand::RngCore| CVector::from_iterator(dim, (0..dim).map(|_| real(rng.gen::<f64>() * 2.0 - 1.0)));
    let k_a = rng.gen_range(1..=(dim - 2) / 2);
    let k_b = rng.gen_range(1..=(dim - 2) / 2);
    let a_states: Vec<CVector> = (0..k_a).map(|_| gaussian_vec(rng)).collect();
    let b_states: Vec<CVector> = (0..k_b).map(|_| gaussian_vec(rng)).collect();
    let a = Subspace::span(dim, &a_states, 1e-12);
    let b = Subspace::span(dim, &b_states, 1e-12);
    if positive {
        let mut spanning = a_states.clone();
        spanning.extend(b_states.iter().cloned());
        let both = Subspace::span(dim, &spanning, 1e-12);
        let mut w = both.reject(&gaussian_vec(rng));
        w.unscale_mut(w.norm());
        let mut x = b.reject(&gaussian_vec(rng));
        x -= &w * linalg::inner(&w, &x);
        x.unscale_mut(x.norm());
        let c: f64 = rng.gen_range(0.2..1.0);
        let psi0 = &w * real(c) + &x * real((1.0 - c * c).sqrt());
        let inst = PhaseEstimationInstance::new(psi0, &a_states, &b_states, 1e-12).expect("planted instance");
        let r = verify_positive_witness(&inst, &w).expect("planted witness");
        (inst, WitnessCertificate::Positive { w, delta: r.delta, c_plus: r.c_plus })
    } else {
        let v = a.project(&gaussian_vec(rng));
        let psi = b.reject(&v);
        let n = psi.norm();
        let psi0 = psi.unscale(n);
        let w_a = v.unscale(n);
        let w_b = &psi0 - &w_a;
        let inst = PhaseEstimationInstance::new(psi0, &a_states, &b_states, 1e-12).expect("planted instance");
        let r = verify_negative_witness(&inst, &w_a, &w_b, 1e-9).expect("planted witness");
        (inst, WitnessCertificate::Negative { w_a, w_b, delta_prime: r.delta_prime, c_minus: r.c_minus })
    }
}
