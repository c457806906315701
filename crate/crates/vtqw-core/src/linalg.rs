//! Dense complex linear-algebra helpers: orthonormal bases, projections,
//! reflections and Hermitian spectra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn zeros(dim: usize) -> CVector {
    CVector::from_element(dim, ZERO)
}

pub fn basis_vector(dim: usize, index: usize) -> CVector {
    let mut v = zeros(dim);
    v[index] = ONE;
    v
}

pub fn norm_sqr(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Largest entry modulus.
pub fn max_abs(v: &CVector) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// `⟨a|b⟩`, antilinear in the first argument.
pub fn inner(a: &CVector, b: &CVector) -> C64 {
    a.dotc(b)
}

/// Orthonormal basis of `span(vectors)` by twice-iterated modified Gram–Schmidt.
///
/// A candidate is dropped when its residual norm falls below `drop` times its
/// original norm (or is below `drop` outright).
pub fn orthonormal_basis(vectors: &[CVector], drop: f64) -> Vec<CVector> {
    let mut basis: Vec<CVector> = Vec::new();
    for v in vectors {
        let scale = v.norm();
        if scale <= drop {
            continue;
        }
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dotc(&r);
                if c != ZERO {
                    r.axpy(-c, q, ONE);
                }
            }
        }
        let n = r.norm();
        if n > drop * scale.max(1.0) {
            basis.push(r.unscale(n));
        }
    }
    basis
}

/// Orthogonal projection onto a subspace given by an orthonormal basis.
#[derive(Clone, Debug)]
pub struct Subspace {
    dim: usize,
    basis: Vec<CVector>,
}

impl Subspace {
    pub fn span(dim: usize, vectors: &[CVector], drop: f64) -> Self {
        Self { dim, basis: orthonormal_basis(vectors, drop) }
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[CVector] {
        &self.basis
    }

    pub fn project(&self, v: &CVector) -> CVector {
        let mut out = zeros(self.dim);
        for q in &self.basis {
            let c = q.dotc(v);
            out.axpy(c, q, ONE);
        }
        out
    }

    /// `v − Πv`.
    pub fn reject(&self, v: &CVector) -> CVector {
        v - self.project(v)
    }

    pub fn projector(&self) -> CMatrix {
        if self.basis.is_empty() {
            return CMatrix::from_element(self.dim, self.dim, ZERO);
        }
        let q = CMatrix::from_columns(&self.basis);
        &q * q.adjoint()
    }

    /// Every basis vector has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.basis.iter().all(|q| q.iter().all(|z| z.im == 0.0))
    }

    /// `2Π − I` over the reals; meaningful only when [`Subspace::is_real`].
    pub fn real_reflection(&self) -> DMatrix<f64> {
        let mut r = if self.basis.is_empty() {
            DMatrix::zeros(self.dim, self.dim)
        } else {
            let q = DMatrix::from_fn(self.dim, self.basis.len(), |r, c| self.basis[c][r].re);
            &q * q.transpose() * 2.0
        };
        for k in 0..self.dim {
            r[(k, k)] -= 1.0;
        }
        r
    }

    /// `2Π − I`.
    pub fn reflection(&self) -> CMatrix {
        let mut r = self.projector() * real(2.0);
        for k in 0..self.dim {
            r[(k, k)] -= ONE;
        }
        r
    }
}

/// Largest entrywise modulus of `m − I`.
pub fn identity_residual(m: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for ((r, c), z) in m.iter().enumerate().map(|(k, z)| ((k % m.nrows(), k / m.nrows()), z)) {
        let target = if r == c { ONE } else { ZERO };
        worst = worst.max((z - target).norm());
    }
    worst
}

/// `max |(U†U − I)_{jk}|`.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    identity_residual(&(u.adjoint() * u))
}

/// Eigen-decomposition of a Hermitian matrix. Takes a real symmetric path
/// when every imaginary part is negligible.
pub fn hermitian_eigen(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = h.nrows();
    let max_im = h.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
    if max_im < 1e-14 {
        let re = DMatrix::from_fn(n, n, |r, c| 0.5 * (h[(r, c)].re + h[(c, r)].re));
        let eig = re.symmetric_eigen();
        let vecs = eig.eigenvectors.map(real);
        (eig.eigenvalues.iter().copied().collect(), vecs)
    } else {
        let sym = (h + h.adjoint()) * real(0.5);
        let eig = sym.symmetric_eigen();
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_schmidt_drops_dependent_vectors() {
        let a = CVector::from_vec(vec![ONE, ONE, ZERO]);
        let b = CVector::from_vec(vec![real(2.0), real(2.0), ZERO]);
        let c = CVector::from_vec(vec![ZERO, ONE, ONE]);
        let basis = orthonormal_basis(&[a, b, c], 1e-12);
        assert_eq!(basis.len(), 2);
        assert!(inner(&basis[0], &basis[1]).norm() < 1e-14);
    }

    #[test]
    fn reflection_is_involution() {
        let v = CVector::from_vec(vec![real(0.3), C64::new(0.1, 0.4), real(-1.0)]);
        let s = Subspace::span(3, std::slice::from_ref(&v), 1e-12);
        let r = s.reflection();
        assert!(identity_residual(&(&r * &r)) < 1e-12);
        assert!((r * &v - v).norm() < 1e-12);
    }

    #[test]
    fn hermitian_eigen_reconstructs() {
        let h = CMatrix::from_row_slice(2, 2, &[real(1.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0), real(1.0)]);
        let (vals, vecs) = hermitian_eigen(&h);
        let mut sorted = vals.clone();
        sorted.sort_by(f64::total_cmp);
        assert!((sorted[0]).abs() < 1e-12 && (sorted[1] - 2.0).abs() < 1e-12);
        let d = CMatrix::from_diagonal(&CVector::from_iterator(2, vals.iter().map(|&x| real(x))));
        assert!((&vecs * d * vecs.adjoint() - h).norm() < 1e-12);
    }
}
