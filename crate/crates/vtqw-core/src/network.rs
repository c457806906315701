//! Weighted networks: random-walk quantities, flows and electric quantities.
//!
//! Weights are conductances. Every undirected edge is stored once with a fixed
//! orientation `tail → head`; the tail sees it through an outgoing label and
//! the head through an incoming label. Label `0` is reserved for the auxiliary
//! boundary edge used when a network is embedded in a walk instance.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub weight: f64,
    pub tail_label: usize,
    pub head_label: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Out,
    In,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabelEntry {
    pub edge: usize,
    pub side: Side,
}

/// Serialized form of a [`Network`]; labels are rebuilt and validated on load.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkData {
    pub vertex_count: usize,
    pub edges: Vec<Edge>,
}

impl TryFrom<NetworkData> for Network {
    type Error = Error;

    fn try_from(data: NetworkData) -> Result<Self> {
        Network::with_labels(data.vertex_count, data.edges)
    }
}

impl From<Network> for NetworkData {
    fn from(net: Network) -> Self {
        Self { vertex_count: net.vertex_count, edges: net.edges }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkData", into = "NetworkData")]
pub struct Network {
    vertex_count: usize,
    edges: Vec<Edge>,
    labels: Vec<BTreeMap<usize, LabelEntry>>,
}

impl Network {
    /// Builds a network from `(tail, head, weight)` triples, labelling edge `k`
    /// with `k + 1` at both endpoints.
    pub fn new(vertex_count: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let edges = edges
            .iter()
            .enumerate()
            .map(|(k, &(tail, head, weight))| Edge { tail, head, weight, tail_label: k + 1, head_label: k + 1 })
            .collect();
        Self::with_labels(vertex_count, edges)
    }

    pub fn with_labels(vertex_count: usize, edges: Vec<Edge>) -> Result<Self> {
        let mut labels = vec![BTreeMap::new(); vertex_count];
        for (k, e) in edges.iter().enumerate() {
            if e.tail >= vertex_count || e.head >= vertex_count {
                return Err(Error::InvalidNetwork(format!("edge {k} references a missing vertex")));
            }
            if e.tail == e.head {
                return Err(Error::InvalidNetwork(format!("edge {k} is a self-loop")));
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(Error::InvalidNetwork(format!("edge {k} has non-positive weight {}", e.weight)));
            }
            if e.tail_label == 0 || e.head_label == 0 {
                return Err(Error::InvalidNetwork(format!("edge {k} uses the reserved label 0")));
            }
            for (v, label, side) in [(e.tail, e.tail_label, Side::Out), (e.head, e.head_label, Side::In)] {
                if labels[v].insert(label, LabelEntry { edge: k, side }).is_some() {
                    return Err(Error::InvalidNetwork(format!("label {label} is used twice at vertex {v}")));
                }
            }
        }
        Ok(Self { vertex_count, edges, labels })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, k: usize) -> &Edge {
        &self.edges[k]
    }

    /// The label set `L(u)` with the edge each label names.
    pub fn labels(&self, u: usize) -> &BTreeMap<usize, LabelEntry> {
        &self.labels[u]
    }

    /// `L⁺(u)` as `(label, edge)` pairs.
    pub fn out_labels(&self, u: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.labels[u].iter().filter(|(_, e)| e.side == Side::Out).map(|(&l, e)| (l, e.edge))
    }

    /// `L⁻(u)` as `(label, edge)` pairs.
    pub fn in_labels(&self, u: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.labels[u].iter().filter(|(_, e)| e.side == Side::In).map(|(&l, e)| (l, e.edge))
    }

    /// `f_u(label)`.
    pub fn neighbor(&self, u: usize, label: usize) -> Option<usize> {
        self.labels[u].get(&label).map(|entry| {
            let e = &self.edges[entry.edge];
            if entry.side == Side::Out {
                e.head
            } else {
                e.tail
            }
        })
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// `w_u`, the summed weight of edges at each vertex.
    pub fn vertex_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.vertex_count];
        for e in &self.edges {
            w[e.tail] += e.weight;
            w[e.head] += e.weight;
        }
        w
    }

    /// Connected-component id of every vertex, numbered in order of first appearance.
    pub fn components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.vertex_count];
        let adjacency = self.adjacency_lists();
        let mut next = 0;
        for s in 0..self.vertex_count {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = next;
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for &(v, _) in &adjacency[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn is_connected(&self) -> bool {
        self.components().iter().all(|&c| c == 0)
    }

    fn adjacency_lists(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.vertex_count];
        for e in &self.edges {
            adj[e.tail].push((e.head, e.weight));
            adj[e.head].push((e.tail, e.weight));
        }
        adj
    }

    fn require_connected(&self) -> Result<()> {
        if self.vertex_count == 0 || !self.is_connected() {
            Err(Error::Disconnected)
        } else {
            Ok(())
        }
    }

    /// `π(u) = w_u / 2W`.
    pub fn stationary_distribution(&self) -> Result<Distribution> {
        self.require_connected()?;
        let two_w = 2.0 * self.total_weight();
        if two_w == 0.0 {
            return Err(Error::Disconnected);
        }
        Ok(Distribution(self.vertex_weights().into_iter().map(|w| w / two_w).collect()))
    }

    /// Row-stochastic `P_{u,v} = w_{u,v} / w_u` (parallel edges add).
    pub fn transition_matrix(&self) -> Result<DMatrix<f64>> {
        let w = self.vertex_weights();
        if let Some(u) = w.iter().position(|&x| x == 0.0) {
            return Err(Error::IsolatedVertex(u));
        }
        let mut p = DMatrix::zeros(self.vertex_count, self.vertex_count);
        for e in &self.edges {
            p[(e.tail, e.head)] += e.weight / w[e.tail];
            p[(e.head, e.tail)] += e.weight / w[e.head];
        }
        Ok(p)
    }

    /// Smallest eigenvalue of `I − P` above `1e−9`.
    pub fn spectral_gap(&self) -> Result<f64> {
        self.require_connected()?;
        let w = self.vertex_weights();
        let n = self.vertex_count;
        // D^{-1/2} A D^{-1/2} is symmetric and similar to P.
        let mut s = DMatrix::<f64>::zeros(n, n);
        for e in &self.edges {
            let x = e.weight / (w[e.tail] * w[e.head]).sqrt();
            s[(e.tail, e.head)] += x;
            s[(e.head, e.tail)] += x;
        }
        let gaps = s.symmetric_eigenvalues().map(|mu| 1.0 - mu);
        Ok(gaps.iter().copied().filter(|&g| g > 1e-9).fold(f64::INFINITY, f64::min))
    }

    /// Weighted Laplacian `D − A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.vertex_count, self.vertex_count);
        for e in &self.edges {
            let (a, b, w) = (e.tail, e.head, e.weight);
            l[(a, a)] += w;
            l[(b, b)] += w;
            l[(a, b)] -= w;
            l[(b, a)] -= w;
        }
        l
    }

    /// The unique flow with net outflow `demand(u)` at every vertex and minimal energy.
    pub fn min_energy_flow(&self, demand: &[f64]) -> Result<Flow> {
        if demand.len() != self.vertex_count {
            return Err(Error::DimensionMismatch(format!(
                "demand has {} entries for {} vertices",
                demand.len(),
                self.vertex_count
            )));
        }
        let groups: Vec<usize> = (0..self.vertex_count).collect();
        self.solve_grouped(demand, &groups)
    }

    /// Solves the Laplacian system on the quotient where vertices sharing a
    /// `group` id are merged (used for contracting a target set).
    fn solve_grouped(&self, demand: &[f64], group_of: &[usize]) -> Result<Flow> {
        let comp = self.components();
        let scale = demand.iter().map(|d| d.abs()).fold(1.0, f64::max);
        let mut comp_sum: BTreeMap<usize, f64> = BTreeMap::new();
        for (u, &d) in demand.iter().enumerate() {
            *comp_sum.entry(comp[u]).or_default() += d;
        }
        if let Some((c, s)) = comp_sum.iter().find(|(_, s)| s.abs() > 1e-9 * scale) {
            return Err(Error::Infeasible(format!("demand in component {c} sums to {s}, not 0")));
        }
        let mut index: BTreeMap<usize, usize> = BTreeMap::new();
        for &g in group_of {
            let next = index.len();
            index.entry(g).or_insert(next);
        }
        let k = index.len();
        let node = |u: usize| index[&group_of[u]];
        let mut l = DMatrix::<f64>::zeros(k, k);
        for e in &self.edges {
            let (a, b) = (node(e.tail), node(e.head));
            if a == b {
                continue;
            }
            l[(a, a)] += e.weight;
            l[(b, b)] += e.weight;
            l[(a, b)] -= e.weight;
            l[(b, a)] -= e.weight;
        }
        let mut rhs = DVector::<f64>::zeros(k);
        for (u, &d) in demand.iter().enumerate() {
            rhs[node(u)] += d;
        }
        let max_entry = l.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        let pinv = l.clone().pseudo_inverse(1e-12 * max_entry).map_err(|e| Error::Infeasible(e.to_string()))?;
        let potential = &pinv * &rhs;
        let residual = (&l * &potential - &rhs).amax();
        if residual > 1e-8 * scale {
            return Err(Error::Infeasible(format!("Laplacian residual {residual:e}")));
        }
        let values =
            self.edges.iter().map(|e| e.weight * (potential[node(e.tail)] - potential[node(e.head)])).collect();
        Ok(Flow { values })
    }

    /// Minimum-energy flow from `sigma` into the set `target`, with the sink
    /// distribution on `target` chosen optimally.
    pub fn min_energy_flow_to_set(&self, sigma: &Distribution, target: &[usize]) -> Result<Flow> {
        self.check_distribution(sigma)?;
        if target.is_empty() {
            return Err(Error::Infeasible("target set is empty".into()));
        }
        if let Some(&m) = target.iter().find(|&&m| m >= self.vertex_count) {
            return Err(Error::InvalidNetwork(format!("target vertex {m} does not exist")));
        }
        let comp = self.components();
        let sink = usize::MAX;
        let group_of: Vec<usize> = (0..self.vertex_count).map(|u| if target.contains(&u) { sink } else { u }).collect();
        let mut demand = sigma.0.clone();
        // Route each component's mass to an arbitrary target vertex inside it;
        // the contraction makes the choice irrelevant.
        let mut comp_mass: BTreeMap<usize, f64> = BTreeMap::new();
        for (u, &s) in sigma.0.iter().enumerate() {
            *comp_mass.entry(comp[u]).or_default() += s;
        }
        let target_comps: Vec<usize> = target.iter().map(|&m| comp[m]).collect();
        for (&c, &mass) in &comp_mass {
            if mass.abs() <= 1e-15 {
                continue;
            }
            match target.iter().zip(&target_comps).find(|(_, &tc)| tc == c) {
                Some((&m, _)) => demand[m] -= mass,
                None => {
                    return Err(Error::Infeasible(format!(
                        "component {c} carries mass {mass} but contains no target vertex"
                    )))
                }
            }
        }
        // Distinct target components must not be merged.
        let group_of: Vec<usize> =
            group_of.iter().enumerate().map(|(u, &g)| if g == sink { usize::MAX - comp[u] } else { g }).collect();
        self.solve_grouped(&demand, &group_of)
    }

    pub fn effective_resistance(&self, sigma: &Distribution, target: &Target) -> Result<f64> {
        let flow = match target {
            Target::Distribution(tau) => {
                self.check_distribution(sigma)?;
                self.check_distribution(tau)?;
                let demand: Vec<f64> = sigma.0.iter().zip(&tau.0).map(|(s, t)| s - t).collect();
                self.min_energy_flow(&demand)?
            }
            Target::Set(m) => self.min_energy_flow_to_set(sigma, m)?,
        };
        Ok(flow.energy(self))
    }

    /// `C_{σ,M} = 2·W·R_{σ,M}`.
    pub fn commute_time(&self, sigma: &Distribution, target: &[usize]) -> Result<f64> {
        let r = self.effective_resistance(sigma, &Target::Set(target.to_vec()))?;
        Ok(2.0 * self.total_weight() * r)
    }

    /// Replaces edge `k` by a path of `segments[k]` edges, each of the original
    /// weight. Original vertices keep their ids; path interiors are appended.
    pub fn subdivided(&self, segments: &[usize]) -> Result<Network> {
        if segments.len() != self.edges.len() || segments.contains(&0) {
            return Err(Error::InvalidNetwork("one positive segment count per edge is required".into()));
        }
        let mut next = self.vertex_count;
        let mut edges = Vec::new();
        for (e, &len) in self.edges.iter().zip(segments) {
            let mut prev = e.tail;
            for step in 1..=len {
                let here = if step == len {
                    e.head
                } else {
                    next += 1;
                    next - 1
                };
                edges.push((prev, here, e.weight));
                prev = here;
            }
        }
        Network::new(next, &edges)
    }

    fn check_distribution(&self, d: &Distribution) -> Result<()> {
        if d.0.len() != self.vertex_count {
            return Err(Error::InvalidDistribution(format!(
                "{} entries for {} vertices",
                d.0.len(),
                self.vertex_count
            )));
        }
        Ok(())
    }

    fn sampler(&self) -> Result<WalkSampler> {
        let adj = self.adjacency_lists();
        let mut cumulative = Vec::with_capacity(self.vertex_count);
        for (u, list) in adj.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::IsolatedVertex(u));
            }
            let mut acc = 0.0;
            let row: Vec<(f64, usize)> = list
                .iter()
                .map(|&(v, w)| {
                    acc += w;
                    (acc, v)
                })
                .collect();
            cumulative.push(row);
        }
        Ok(WalkSampler { cumulative })
    }

    /// Monte Carlo estimate of the expected number of steps for a walk started
    /// from `start` to reach `target`. Walks longer than `max_steps` are cut
    /// and counted in `truncated`.
    pub fn hitting_time_mc(
        &self,
        start: &Distribution,
        target: &[usize],
        walks: usize,
        seed: u64,
        max_steps: u64,
    ) -> Result<McEstimate> {
        self.check_distribution(start)?;
        if target.is_empty() {
            return Err(Error::Infeasible("target set is empty".into()));
        }
        let sampler = self.sampler()?;
        let mut in_target = vec![false; self.vertex_count];
        for &m in target {
            in_target[m] = true;
        }
        let start_cdf = cumulative_of(&start.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = Accumulator::default();
        for _ in 0..walks {
            let mut u = sample_index(&start_cdf, &mut rng);
            let mut steps = 0u64;
            while !in_target[u] && steps < max_steps {
                u = sampler.step(u, &mut rng);
                steps += 1;
            }
            acc.push(steps as f64, !in_target[u]);
        }
        Ok(acc.finish(seed))
    }

    /// Monte Carlo estimate of the commute time from `source` to `target` and back.
    pub fn commute_time_mc(
        &self,
        source: usize,
        target: &[usize],
        walks: usize,
        seed: u64,
        max_steps: u64,
    ) -> Result<McEstimate> {
        if target.is_empty() {
            return Err(Error::Infeasible("target set is empty".into()));
        }
        let sampler = self.sampler()?;
        let mut in_target = vec![false; self.vertex_count];
        for &m in target {
            in_target[m] = true;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = Accumulator::default();
        for _ in 0..walks {
            let mut u = source;
            let mut steps = 0u64;
            while !in_target[u] && steps < max_steps {
                u = sampler.step(u, &mut rng);
                steps += 1;
            }
            let mut cut = !in_target[u];
            if !cut {
                loop {
                    u = sampler.step(u, &mut rng);
                    steps += 1;
                    if u == source {
                        break;
                    }
                    if steps >= max_steps {
                        cut = true;
                        break;
                    }
                }
            }
            acc.push(steps as f64, cut);
        }
        Ok(acc.finish(seed))
    }
}

struct WalkSampler {
    cumulative: Vec<Vec<(f64, usize)>>,
}

impl WalkSampler {
    fn step(&self, u: usize, rng: &mut impl Rng) -> usize {
        let row = &self.cumulative[u];
        let x = rng.gen::<f64>() * row[row.len() - 1].0;
        let k = row.partition_point(|&(c, _)| c <= x).min(row.len() - 1);
        row[k].1
    }
}

fn cumulative_of(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|&w| {
            acc += w;
            acc
        })
        .collect()
}

fn sample_index(cdf: &[f64], rng: &mut impl Rng) -> usize {
    let x = rng.gen::<f64>() * cdf[cdf.len() - 1];
    cdf.partition_point(|&c| c <= x).min(cdf.len() - 1)
}

#[derive(Default)]
struct Accumulator {
    n: usize,
    mean: f64,
    m2: f64,
    truncated: usize,
}

impl Accumulator {
    fn push(&mut self, x: f64, truncated: bool) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
        self.truncated += usize::from(truncated);
    }

    fn finish(self, seed: u64) -> McEstimate {
        let var = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        McEstimate {
            mean: self.mean,
            stderr: (var / self.n.max(1) as f64).sqrt(),
            samples: self.n,
            seed,
            truncated: self.truncated,
        }
    }
}

/// A seeded Monte Carlo estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
    /// Number of samples cut at the step cap.
    pub truncated: usize,
}

impl McEstimate {
    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr + 1e-12 * value.abs().max(1.0)
    }
}

/// Sink for effective resistance.
#[derive(Clone, Debug)]
pub enum Target {
    Distribution(Distribution),
    Set(Vec<usize>),
}

/// Probability vector over the vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution(pub Vec<f64>);

impl Distribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|&w| !(w.is_finite() && w >= 0.0)) {
            return Err(Error::InvalidDistribution("negative or non-finite entry".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
        }
        Ok(Self(weights))
    }

    pub fn point(n: usize, u: usize) -> Self {
        let mut w = vec![0.0; n];
        w[u] = 1.0;
        Self(w)
    }

    pub fn uniform_on(n: usize, support: &[usize]) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        let mut w = vec![0.0; n];
        for &u in support {
            w[u] = 1.0 / support.len() as f64;
        }
        Ok(Self(w))
    }

    pub fn support(&self) -> Vec<usize> {
        self.0.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(u, _)| u).collect()
    }

    pub fn get(&self, u: usize) -> f64 {
        self.0[u]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Antisymmetric edge function, stored once per oriented edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub values: Vec<f64>,
}

impl Flow {
    pub fn zero(net: &Network) -> Self {
        Self { values: vec![0.0; net.edges.len()] }
    }

    /// `θ(u, v)` along edge `k`, read in the direction starting at `from`.
    pub fn along(&self, net: &Network, k: usize, from: usize) -> f64 {
        if net.edges[k].tail == from {
            self.values[k]
        } else {
            -self.values[k]
        }
    }

    /// Net outflow `θ(u)` at each vertex.
    pub fn net_outflow(&self, net: &Network) -> Vec<f64> {
        let mut out = vec![0.0; net.vertex_count];
        for (e, &x) in net.edges.iter().zip(&self.values) {
            out[e.tail] += x;
            out[e.head] -= x;
        }
        out
    }

    pub fn boundary(&self, net: &Network, tol: f64) -> Vec<usize> {
        self.net_outflow(net).iter().enumerate().filter(|(_, x)| x.abs() > tol).map(|(u, _)| u).collect()
    }

    pub fn is_circulation(&self, net: &Network, tol: f64) -> bool {
        self.boundary(net, tol).is_empty()
    }

    /// `Σ θ(e)² / w_e`.
    pub fn energy(&self, net: &Network) -> f64 {
        net.edges.iter().zip(&self.values).map(|(e, x)| x * x / e.weight).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { values: self.values.iter().map(|x| x * factor).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Network {
        Network::new(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap()
    }

    #[test]
    fn totals_and_stationary() {
        assert_eq!(triangle().total_weight(), 3.0);
        let path = Network::new(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let pi = path.stationary_distribution().unwrap();
        assert_eq!(pi.0, vec![0.25, 0.5, 0.25]);
        let star = Network::new(4, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]).unwrap();
        let pi = star.stationary_distribution().unwrap();
        assert!((pi.0[0] - 0.5).abs() < 1e-15 && (pi.0[1] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(matches!(Network::new(2, &[(0, 1, 0.0)]), Err(Error::InvalidNetwork(_))));
        assert!(matches!(Network::new(2, &[(0, 0, 1.0)]), Err(Error::InvalidNetwork(_))));
    }

    #[test]
    fn transition_rows() {
        let net = Network::new(2, &[(0, 1, 1.0)]).unwrap();
        let p = net.transition_matrix().unwrap();
        assert_eq!(p, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let path = Network::new(3, &[(0, 1, 1.0), (1, 2, 2.0)]).unwrap();
        let p = path.transition_matrix().unwrap();
        assert!((p[(1, 0)] - 1.0 / 3.0).abs() < 1e-15 && (p[(1, 2)] - 2.0 / 3.0).abs() < 1e-15);
        let lonely = Network::new(3, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(lonely.transition_matrix(), Err(Error::IsolatedVertex(2)));
    }

    #[test]
    fn gap_of_single_edge() {
        let net = Network::new(2, &[(0, 1, 1.0)]).unwrap();
        assert!((net.spectral_gap().unwrap() - 2.0).abs() < 1e-12);
        let split = Network::new(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert_eq!(split.spectral_gap(), Err(Error::Disconnected));
    }

    #[test]
    fn zero_demand_gives_zero_flow() {
        let f = triangle().min_energy_flow(&[0.0; 3]).unwrap();
        assert!(f.values.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn resistance_to_self_is_zero() {
        let net = triangle();
        let p = Distribution::point(3, 1);
        let r = net.effective_resistance(&p, &Target::Distribution(p.clone())).unwrap();
        assert!(r.abs() < 1e-15);
    }

    #[test]
    fn disconnected_demand_is_infeasible() {
        let net = Network::new(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert!(matches!(net.min_energy_flow(&[1.0, 0.0, -1.0, 0.0]), Err(Error::Infeasible(_))));
        let sigma = Distribution::point(4, 0);
        assert!(matches!(net.min_energy_flow_to_set(&sigma, &[3]), Err(Error::Infeasible(_))));
        assert!(matches!(net.min_energy_flow_to_set(&sigma, &[]), Err(Error::Infeasible(_))));
    }

    #[test]
    fn single_edge_commute() {
        let net = Network::new(2, &[(0, 1, 1.0)]).unwrap();
        let c = net.commute_time(&Distribution::point(2, 0), &[1]).unwrap();
        assert!((c - 2.0).abs() < 1e-12);
        let mc = net.hitting_time_mc(&Distribution::point(2, 0), &[1], 100, 7, 1000).unwrap();
        assert_eq!((mc.mean, mc.stderr), (1.0, 0.0));
        let inside = net.hitting_time_mc(&Distribution::point(2, 1), &[1], 100, 7, 1000).unwrap();
        assert_eq!((inside.mean, inside.stderr), (0.0, 0.0));
    }

    #[test]
    fn neighbor_map_follows_labels() {
        let net = triangle();
        assert_eq!(net.neighbor(0, 1), Some(1));
        assert_eq!(net.neighbor(1, 1), Some(0));
        assert_eq!(net.neighbor(0, 3), Some(2));
        assert_eq!(net.neighbor(0, 2), None);
    }
}
