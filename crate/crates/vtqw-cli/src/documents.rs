//! Input document formats.

use serde::{Deserialize, Serialize};
use vtqw_core::alg_compose::OuterSpec;
use vtqw_core::linalg::{CVector, C64};
use vtqw_core::network::{Distribution, Edge, Network};
use vtqw_core::subroutine::{AlphaSchedule, ClassicalInput, ClassicalSpec};

use crate::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub u: usize,
    pub v: usize,
    pub w: f64,
    #[serde(default)]
    pub label_u: Option<usize>,
    #[serde(default)]
    pub label_v: Option<usize>,
}

/// A weighted graph with optional initial, checkable and marked sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub vertices: usize,
    pub edges: Vec<EdgeDoc>,
    #[serde(default, rename = "V0")]
    pub initial: Option<Vec<usize>>,
    #[serde(default, rename = "VM")]
    pub checkable: Option<Vec<usize>>,
    #[serde(default, rename = "M")]
    pub marked: Option<Vec<usize>>,
    #[serde(default)]
    pub sigma: Option<Vec<f64>>,
}

impl GraphDoc {
    /// Edge labels must be given for every endpoint or for none.
    pub fn network(&self) -> CliResult<Network> {
        let labelled = self.edges.iter().filter(|e| e.label_u.is_some() && e.label_v.is_some()).count();
        if labelled == 0 {
            let edges: Vec<(usize, usize, f64)> = self.edges.iter().map(|e| (e.u, e.v, e.w)).collect();
            return Ok(Network::new(self.vertices, &edges)?);
        }
        if labelled != self.edges.len() || self.edges.iter().any(|e| e.label_u.is_none() != e.label_v.is_none()) {
            return Err(CliError::Scenario("edge labels must be given for all edges or none".into()));
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                tail: e.u,
                head: e.v,
                weight: e.w,
                tail_label: e.label_u.expect("checked"),
                head_label: e.label_v.expect("checked"),
            })
            .collect();
        Ok(Network::with_labels(self.vertices, edges)?)
    }

    pub fn marked(&self) -> Vec<usize> {
        self.marked.clone().unwrap_or_default()
    }

    pub fn initial(&self) -> Vec<usize> {
        self.initial.clone().unwrap_or_else(|| vec![0])
    }

    /// `σ`, defaulting to uniform on `V0`.
    pub fn sigma(&self) -> CliResult<Distribution> {
        match &self.sigma {
            Some(s) => Ok(Distribution::new(s.clone())?),
            None => Ok(Distribution::uniform_on(self.vertices, &self.initial())?),
        }
    }
}

/// A real number or a `[re, im]` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Amplitude {
    Real(f64),
    Complex([f64; 2]),
}

pub fn vector(entries: &[Amplitude]) -> CVector {
    CVector::from_iterator(
        entries.len(),
        entries.iter().map(|a| match *a {
            Amplitude::Real(x) => C64::new(x, 0.0),
            Amplitude::Complex([re, im]) => C64::new(re, im),
        }),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDoc {
    pub psi0: Vec<Amplitude>,
    pub a_states: Vec<Vec<Amplitude>>,
    pub b_states: Vec<Vec<Amplitude>>,
    pub c_minus: f64,
    #[serde(default)]
    pub expect: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkDoc {
    pub graph: GraphDoc,
    /// Halting law of the transition subroutine on each edge.
    pub transitions: Vec<ClassicalInput>,
    #[serde(default)]
    pub alpha: Option<AlphaSchedule>,
    #[serde(default)]
    pub w0: Option<f64>,
    #[serde(default)]
    pub w_marked: Option<f64>,
    /// Required when `M` is empty.
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub w: Option<f64>,
    #[serde(default)]
    pub setup_cost: f64,
    /// Defaults to "positive iff M is nonempty".
    #[serde(default)]
    pub expect: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchDoc {
    pub pi: Vec<f64>,
    /// Deterministic checking times; alternative to `laws`.
    #[serde(default)]
    pub times: Option<Vec<usize>>,
    #[serde(default)]
    pub laws: Option<Vec<ClassicalInput>>,
    pub marked: usize,
    /// Defaults to `π(marked)`.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Checking times of the marked element to sweep over.
    #[serde(default)]
    pub sweep: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MnrsDoc {
    pub graph: GraphDoc,
    pub transition_laws: Vec<ClassicalInput>,
    pub check_laws: Vec<ClassicalInput>,
    #[serde(default)]
    pub known_times: bool,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub gap: Option<f64>,
    /// Simulated walks for the visit-count comparison; 0 skips it.
    #[serde(default)]
    pub monte_carlo_walks: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComposeDoc {
    pub outer: OuterSpec,
    pub inner: ClassicalSpec,
    #[serde(default)]
    pub allow_large_error: bool,
}
