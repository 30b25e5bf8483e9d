//! Small dense helpers over `nalgebra` complex matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cis(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

/// Eigenvalues in ascending order with matching eigenvector columns.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    // symmetrise away rounding before handing to the solver
    let h = (m + m.adjoint()).scale(0.5);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

pub fn eigh_real(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Principal square root of a unitary (normal) matrix via complex Schur form.
pub fn unitary_sqrt(w: &CMat) -> Result<CMat> {
    let n = w.nrows();
    let schur = w
        .clone()
        .try_schur(1e-14, 10_000)
        .ok_or_else(|| Error::NoConvergence("complex Schur of direct-rotation product".into()))?;
    let (q, t) = schur.unpack();
    let mut off = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            off = off.max(t[(i, j)].norm());
        }
    }
    if off > 1e-8 {
        return Err(Error::Contract(format!(
            "matrix is not normal (Schur off-diagonal {off:e})"
        )));
    }
    let mut d = CMat::zeros(n, n);
    for i in 0..n {
        let lam = t[(i, i)];
        if (lam + ONE).norm() < 1e-10 {
            return Err(Error::GapCollapse(
                "eigenvalue -1 in reflection product: subspaces contain orthogonal directions".into(),
            ));
        }
        d[(i, i)] = lam.sqrt();
    }
    Ok(&q * d * q.adjoint())
}

/// Modified Gram-Schmidt (two passes). Vectors whose residual norm drops below
/// `tol` relative to their input norm are discarded.
pub fn orthonormalize(vectors: &[CVec], tol: f64) -> Vec<CVec> {
    let mut out: Vec<CVec> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let n0 = v.norm();
        if n0 == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let proj = q.dotc(&w);
                w.axpy(-proj, q, ONE);
            }
        }
        let n1 = w.norm();
        if n1 > tol * n0 {
            out.push(w.unscale(n1));
        }
    }
    out
}

pub fn columns_to_matrix(cols: &[CVec], nrows: usize) -> CMat {
    let mut m = CMat::zeros(nrows, cols.len());
    for (j, v) in cols.iter().enumerate() {
        m.set_column(j, v);
    }
    m
}

/// Largest entry modulus.
pub trait MaxModulus {
    fn max_mod(&self) -> f64;
}

impl MaxModulus for CMat {
    fn max_mod(&self) -> f64 {
        self.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl MaxModulus for CVec {
    fn max_mod(&self) -> f64 {
        self.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    (m - m.adjoint()).max_mod() < tol
}

/// `m - tr(m)/n * I`
pub fn traceless(m: &CMat) -> CMat {
    let n = m.nrows();
    let shift = m.trace() / n as f64;
    let mut out = m.clone();
    for i in 0..n {
        out[(i, i)] -= shift;
    }
    out
}

/// Frobenius inner product `tr(a^† b)`.
pub fn frob_inner(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Angle between two matrices viewed as vectors in the Frobenius geometry,
/// insensitive to a complex scale factor.
pub fn frob_angle(a: &CMat, b: &CMat) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return if na == nb { 0.0 } else { std::f64::consts::FRAC_PI_2 };
    }
    // atan2 of the orthogonal residual keeps precision for tiny angles
    let coef = frob_inner(a, b) / (na * na);
    let along = a.map(|x| x * coef);
    let resid = b - &along;
    resid.norm().atan2(along.norm())
}

/// Least-squares solution of `a x = b` with rank detection.
/// Returns (x, residual norm, numerical rank).
pub fn lstsq(a: &CMat, b: &CVec, rcond: f64) -> (CVec, f64, usize) {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = rcond * smax.max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let x = svd.solve(b, eps).expect("SVD computed with both factors");
    let r = (a * &x - b).norm();
    (x, r, rank)
}

/// Reproducible pseudo-random complex vector, normalised.
pub fn random_state(dim: usize, seed: u64) -> CVec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = CVec::from_fn(dim, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let n = v.norm();
    v.unscale(n)
}

pub fn random_hermitian(dim: usize, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = CMat::from_fn(dim, dim, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    (&m + m.adjoint()).scale(0.5)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).max_mod()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_sorts_ascending() {
        let h = random_hermitian(6, 3);
        let (vals, vecs) = eigh(&h);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let recon = &vecs * CMat::from_diagonal(&CVec::from_iterator(6, vals.iter().map(|&x| c(x, 0.0)))) * vecs.adjoint();
        assert!(max_abs_diff(&recon, &h) < 1e-12);
    }

    #[test]
    fn sqrt_of_unitary_squares_back() {
        let h = random_hermitian(5, 11);
        let (vals, vecs) = eigh(&h);
        let d = CVec::from_iterator(5, vals.iter().map(|&x| cis(0.7 * x)));
        let u = &vecs * CMat::from_diagonal(&d) * vecs.adjoint();
        let r = unitary_sqrt(&u).unwrap();
        assert!(max_abs_diff(&(&r * &r), &u) < 1e-10);
    }

    #[test]
    fn gram_schmidt_drops_dependent() {
        let a = random_state(5, 1);
        let b = random_state(5, 2);
        let sum = &a + &b;
        let q = orthonormalize(&[a, b, sum], 1e-10);
        assert_eq!(q.len(), 2);
        assert!(q[0].dotc(&q[1]).norm() < 1e-14);
    }

    #[test]
    fn angle_ignores_phase() {
        let h = random_hermitian(3, 5);
        let g = h.map(|x| x * cis(1.2) * 3.0);
        assert!(frob_angle(&h, &g) < 1e-7);
    }
}
