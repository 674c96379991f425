//! Jacobi eigen- and singular-value kernels for small complex matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{c, CMatrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order (ties keep their original index
/// order) and the matching orthonormal eigenvectors as columns. Only the
/// Hermitian part `(a + a†)/2` is used.
pub fn hermitian_eigen(a: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidArgument(format!(
            "eigen-decomposition of a non-square {}x{} matrix",
            n,
            a.ncols()
        )));
    }
    let mut m = (a + a.adjoint()) * c(0.5);
    let mut v = CMatrix::identity(n, n);
    let fro = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if fro == 0.0 || n <= 1 {
        return Ok(sorted(m, v));
    }

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| m[(p, q)].norm_sqr())
            .sum();
        if off.sqrt() <= 1e-15 * fro {
            return Ok(sorted(m, v));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let g = apq.norm();
                if g <= 1e-300 || g <= 1e-18 * fro {
                    m[(p, q)] = Complex64::new(0.0, 0.0);
                    m[(q, p)] = Complex64::new(0.0, 0.0);
                    continue;
                }
                let phase = apq / g;
                let (cs, sn) = rotation(m[(p, p)].re, m[(q, q)].re, g);
                rotate_cols(&mut m, p, q, cs, sn, phase);
                rotate_rows(&mut m, p, q, cs, sn, phase);
                rotate_cols(&mut v, p, q, cs, sn, phase);
                m[(p, q)] = Complex64::new(0.0, 0.0);
                m[(q, p)] = Complex64::new(0.0, 0.0);
                m[(p, p)] = c(m[(p, p)].re);
                m[(q, q)] = c(m[(q, q)].re);
            }
        }
    }
    Err(Error::Numeric(format!(
        "Jacobi eigen-decomposition did not converge in {MAX_SWEEPS} sweeps (n = {n})"
    )))
}

/// Jacobi angle zeroing the real off-diagonal `g` of `[[app, g], [g, aqq]]`.
#[inline]
fn rotation(app: f64, aqq: f64, g: f64) -> (f64, f64) {
    let theta = (aqq - app) / (2.0 * g);
    let t = if theta == 0.0 {
        1.0
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let cs = 1.0 / (t * t + 1.0).sqrt();
    (cs, t * cs)
}

// m <- m J with J = [[c, s e^{iφ}], [-s e^{-iφ}, c]] on (p, q).
#[inline]
fn rotate_cols(m: &mut CMatrix, p: usize, q: usize, cs: f64, sn: f64, phase: Complex64) {
    for k in 0..m.nrows() {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = mkp * cs - mkq * (phase.conj() * sn);
        m[(k, q)] = mkp * (phase * sn) + mkq * cs;
    }
}

// m <- J† m.
#[inline]
fn rotate_rows(m: &mut CMatrix, p: usize, q: usize, cs: f64, sn: f64, phase: Complex64) {
    for k in 0..m.ncols() {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = mpk * cs - mqk * (phase * sn);
        m[(q, k)] = mpk * (phase.conj() * sn) + mqk * cs;
    }
}

fn sorted(m: CMatrix, v: CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let vals: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap_or(std::cmp::Ordering::Equal));
    let out_vals = order.iter().map(|&i| vals[i]).collect();
    let out_vecs = CMatrix::from_fn(n, n, |r, col| v[(r, order[col])]);
    (out_vals, out_vecs)
}

/// Thin singular-value decomposition `a = u · diag(sigma) · v†`.
#[derive(Clone, Debug)]
pub struct Svd {
    /// `m x n`; columns for zero singular values are completed to an
    /// orthonormal set when `m >= n`.
    pub u: CMatrix,
    /// Descending, length `n`.
    pub sigma: Vec<f64>,
    /// `n x n` unitary.
    pub v: CMatrix,
}

/// One-sided Jacobi SVD of an `m x n` matrix with `m >= n`.
pub fn svd(a: &CMatrix) -> Result<Svd> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::InvalidArgument(format!(
            "svd expects rows >= cols, got {m}x{n}; decompose the adjoint instead"
        )));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidArgument("svd of a non-finite matrix".into()));
    }
    let mut u = a.clone();
    let mut v = CMatrix::identity(n, n);
    let fro2: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let mut converged = n <= 1 || fro2 == 0.0;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(Error::Numeric(format!(
                "one-sided Jacobi SVD did not converge in {MAX_SWEEPS} sweeps ({m}x{n})"
            )));
        }
        sweeps += 1;
        converged = true;
        for i in 0..n {
            for j in i + 1..n {
                let (alpha, beta, gamma) = gram(&u, i, j);
                let g = gamma.norm();
                if g <= 1e-300 || g <= 1e-15 * (alpha * beta).sqrt() || g <= 1e-32 * fro2 {
                    continue;
                }
                converged = false;
                let phase = gamma / g;
                let (cs, sn) = rotation(alpha, beta, g);
                rotate_cols(&mut u, i, j, cs, sn, phase);
                rotate_cols(&mut v, i, j, cs, sn, phase);
            }
        }
    }

    let norms: Vec<f64> = (0..n).map(|j| u.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap_or(std::cmp::Ordering::Equal));
    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let v_sorted = CMatrix::from_fn(n, n, |r, col| v[(r, order[col])]);

    let scale = sigma.first().copied().unwrap_or(0.0);
    let cutoff = (1e-13 * scale).max(1e-300);
    let mut basis: Vec<nalgebra::DVector<Complex64>> = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        if norms[j] > cutoff {
            basis.push(u.column(j) / c(norms[j]));
        } else {
            missing.push(k);
        }
    }
    let mut u_sorted = CMatrix::zeros(m, n);
    let mut filled = 0;
    for k in 0..n {
        if !missing.contains(&k) {
            u_sorted.set_column(k, &basis[filled]);
            filled += 1;
        }
    }
    if !missing.is_empty() {
        let completion = complete_orthonormal(&basis, m, missing.len());
        for (slot, col) in missing.iter().zip(completion) {
            u_sorted.set_column(*slot, &col);
        }
    }
    Ok(Svd {
        u: u_sorted,
        sigma,
        v: v_sorted,
    })
}

fn gram(u: &CMatrix, i: usize, j: usize) -> (f64, f64, Complex64) {
    let ci = u.column(i);
    let cj = u.column(j);
    let alpha = ci.norm_squared();
    let beta = cj.norm_squared();
    let gamma = ci.dotc(&cj);
    (alpha, beta, gamma)
}

/// `count` unit vectors in `C^dim` orthogonal to `existing` and to each
/// other, built by Gram-Schmidt over the standard basis.
pub fn complete_orthonormal(
    existing: &[nalgebra::DVector<Complex64>],
    dim: usize,
    count: usize,
) -> Vec<nalgebra::DVector<Complex64>> {
    let mut all: Vec<nalgebra::DVector<Complex64>> = existing.to_vec();
    let mut out = Vec::with_capacity(count);
    let mut k = 0;
    while out.len() < count && k < dim {
        let mut cand = nalgebra::DVector::<Complex64>::zeros(dim);
        cand[k] = c(1.0);
        k += 1;
        for _ in 0..2 {
            for b in &all {
                let proj = b.dotc(&cand);
                cand -= b * proj;
            }
        }
        let nrm = cand.norm();
        if nrm > 1e-6 {
            let unit = cand / c(nrm);
            all.push(unit.clone());
            out.push(unit);
        }
    }
    assert_eq!(out.len(), count, "cannot complete {count} vectors in dimension {dim}");
    out
}

/// Singular values of any matrix, descending.
pub fn singular_values(a: &CMatrix) -> Result<Vec<f64>> {
    if a.nrows() >= a.ncols() {
        Ok(svd(a)?.sigma)
    } else {
        Ok(svd(&a.adjoint())?.sigma)
    }
}

/// Whether `a` is Hermitian within `tol` entrywise.
pub fn is_hermitian(a: &CMatrix, tol: f64) -> bool {
    let n = a.nrows();
    if n != a.ncols() {
        return false;
    }
    (0..n).all(|i| (i..n).all(|j| (a[(i, j)] - a[(j, i)].conj()).norm() <= tol))
}

/// `f(a)` for Hermitian `a` through its eigen-decomposition.
pub fn hermitian_fn(a: &CMatrix, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    let (vals, vecs) = hermitian_eigen(a)?;
    let n = vals.len();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        vals.iter().map(|&x| c(f(x))),
    ));
    Ok(&vecs * d * vecs.adjoint())
}

/// Square root of a PSD matrix; eigenvalues below zero are clamped.
pub fn sqrt_psd(a: &CMatrix) -> Result<CMatrix> {
    hermitian_fn(a, |x| x.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{max_abs_diff, random};
    use crate::SimRng;

    #[test]
    fn eigen_reconstructs_random_hermitian() {
        let mut rng = SimRng::new(11);
        for n in [1, 2, 3, 5, 8, 16] {
            let h = random::hermitian(n, &mut rng);
            let (vals, vecs) = hermitian_eigen(&h).unwrap();
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                n,
                vals.iter().map(|&x| c(x)),
            ));
            let rebuilt = &vecs * d * vecs.adjoint();
            assert!(max_abs_diff(&rebuilt, &h) < 1e-12, "n = {n}");
            let gram = vecs.adjoint() * &vecs;
            assert!(max_abs_diff(&gram, &CMatrix::identity(n, n)) < 1e-12);
            assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn eigen_handles_degenerate_spectrum() {
        let (vals, _) = hermitian_eigen(&CMatrix::identity(4, 4)).unwrap();
        assert_eq!(vals, vec![1.0; 4]);
        let (vals, _) = hermitian_eigen(&CMatrix::zeros(3, 3)).unwrap();
        assert_eq!(vals, vec![0.0; 3]);
    }

    #[test]
    fn svd_reconstructs_and_completes() {
        let mut rng = SimRng::new(5);
        for (m, n) in [(4, 4), (6, 3), (8, 8)] {
            let a = random::ginibre(m, n, &mut rng);
            let s = svd(&a).unwrap();
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                n,
                s.sigma.iter().map(|&x| c(x)),
            ));
            assert!(max_abs_diff(&(&s.u * d * s.v.adjoint()), &a) < 1e-12);
            assert!(max_abs_diff(&(s.u.adjoint() * &s.u), &CMatrix::identity(n, n)) < 1e-12);
        }
        // Rank-one square matrix: u must still be unitary.
        let x = random::ginibre(5, 1, &mut rng);
        let rank1 = &x * x.adjoint();
        let s = svd(&rank1).unwrap();
        assert!(max_abs_diff(&(s.u.adjoint() * &s.u), &CMatrix::identity(5, 5)) < 1e-10);
        assert!(s.sigma[1..].iter().all(|&v| v < 1e-12));
    }

    #[test]
    fn svd_rejects_bad_input() {
        assert!(svd(&CMatrix::zeros(2, 3)).is_err());
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(f64::NAN);
        assert!(svd(&m).is_err());
    }
}
