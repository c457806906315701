//! Seeded generators of random instances for property checks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::linalg::{real, CMatrix, C64};
use crate::network::Network;
use crate::subroutine::{ClassicalInput, ClassicalSpec, ReversibleExtension, VariableTimeSubroutine};
use crate::Result;

fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box–Muller; the open interval avoids ln(0).
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

/// Haar-distributed unitary of size `n` (QR of a complex Gaussian matrix with
/// the phases of `R`'s diagonal absorbed).
pub fn haar_unitary(n: usize, rng: &mut impl Rng) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| C64::new(gaussian(rng), gaussian(rng)));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for k in 0..n {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { real(1.0) };
        let col = q.column(k) * phase;
        q.set_column(k, &col);
    }
    q
}

/// Random isometry from `cols` into `rows` dimensions.
pub fn random_isometry(rows: usize, cols: usize, rng: &mut impl Rng) -> CMatrix {
    haar_unitary(rows, rng).columns(0, cols).into_owned()
}

/// Random subroutine whose step `t` is Haar on the not-yet-halted block and
/// the identity on the halted one.
pub fn random_subroutine(inputs: usize, horizon: usize, rng: &mut impl Rng) -> Result<VariableTimeSubroutine> {
    let mut halt_time: Vec<usize> = Vec::new();
    for t in 1..=horizon {
        let count = if t == horizon { rng.gen_range(1..=2) } else { rng.gen_range(0..=2) };
        halt_time.extend(std::iter::repeat_n(t, count));
    }
    halt_time.shuffle(rng);
    let nz = halt_time.len();
    let dim = 2 * nz;
    let mut unitaries = Vec::with_capacity(inputs);
    for _ in 0..inputs {
        let mut seq = Vec::with_capacity(horizon);
        for t in 1..=horizon {
            let live: Vec<usize> = (0..dim).filter(|&k| halt_time[k % nz] >= t).collect();
            let block = haar_unitary(live.len(), rng);
            let mut u = CMatrix::identity(dim, dim);
            for (x, &r) in live.iter().enumerate() {
                for (y, &c) in live.iter().enumerate() {
                    u[(r, c)] = block[(x, y)];
                }
            }
            seq.push(u);
        }
        unitaries.push(seq);
    }
    let target = (0..inputs).map(|_| rng.gen_range(0..2)).collect();
    VariableTimeSubroutine::new(2, halt_time, unitaries, target)
}

/// Extension `A_a|i⟩ = (−1)^{a + g(i)} A|i⟩` around a random isometry `A`.
pub fn random_extension(target: &[usize], outputs: usize, rng: &mut impl Rng) -> ReversibleExtension {
    let n = target.len();
    assert!(outputs >= n, "an isometry needs at least {n} output dimensions, got {outputs}");
    let map = random_isometry(outputs, n, rng);
    let answer_maps = (0..2)
        .map(|a| {
            let mut m = map.clone();
            for (i, &g) in target.iter().enumerate() {
                if (a + g) % 2 == 1 {
                    let col = -m.column(i);
                    m.set_column(i, &col);
                }
            }
            m
        })
        .collect();
    ReversibleExtension::new(map, answer_maps).expect("shapes agree by construction")
}

/// Random classical halting law on `1..=horizon` with per-step errors up to `max_error`.
pub fn random_classical_input(horizon: usize, answer: usize, max_error: f64, rng: &mut impl Rng) -> ClassicalInput {
    let mut weights: Vec<f64> = (0..horizon).map(|_| if rng.gen_bool(0.6) { rng.gen::<f64>() } else { 0.0 }).collect();
    if weights.iter().all(|&w| w == 0.0) {
        weights[rng.gen_range(0..horizon)] = 1.0;
    }
    let total: f64 = weights.iter().sum();
    let halt_law: Vec<(usize, f64)> =
        weights.iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(k, &w)| (k + 1, w / total)).collect();
    let errors = if max_error > 0.0 {
        halt_law.iter().map(|&(t, _)| (t, rng.gen_range(0.0..max_error))).collect()
    } else {
        Vec::new()
    };
    ClassicalInput { halt_law, answer, errors }
}

/// Random classical spec with independent laws, answers and errors per input.
pub fn random_classical_spec(inputs: usize, horizon: usize, max_error: f64, rng: &mut impl Rng) -> ClassicalSpec {
    ClassicalSpec {
        horizon: None,
        inputs: (0..inputs)
            .map(|_| {
                let answer = rng.gen_range(0..2);
                random_classical_input(horizon, answer, max_error, rng)
            })
            .collect(),
    }
}

/// Random connected network: a random spanning tree plus extra edges, with
/// weights drawn from `[lo, hi)`.
pub fn random_connected_network(
    vertices: usize,
    extra_edges: usize,
    (lo, hi): (f64, f64),
    rng: &mut impl Rng,
) -> Network {
    let mut order: Vec<usize> = (0..vertices).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for k in 1..vertices {
        let parent = order[rng.gen_range(0..k)];
        let w = if hi > lo { rng.gen_range(lo..hi) } else { lo };
        edges.push(orient(order[k], parent, w, rng));
    }
    for _ in 0..extra_edges {
        let a = rng.gen_range(0..vertices);
        let mut b = rng.gen_range(0..vertices);
        while b == a && vertices > 1 {
            b = rng.gen_range(0..vertices);
        }
        if a != b {
            let w = if hi > lo { rng.gen_range(lo..hi) } else { lo };
            edges.push(orient(a, b, w, rng));
        }
    }
    Network::new(vertices, &edges).expect("generated edges are valid")
}

fn orient(a: usize, b: usize, w: f64, rng: &mut impl Rng) -> (usize, usize, f64) {
    if rng.gen_bool(0.5) {
        (a, b, w)
    } else {
        (b, a, w)
    }
}
