//! Random matrices and states for tests, examples and probes.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::channel::KrausChannel;
use super::state::DensityOperator;
use super::{c, CMatrix, CVector};

fn gauss<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

/// `m x n` matrix of i.i.d. standard complex Gaussians.
pub fn ginibre<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> CMatrix {
    DMatrix::from_fn(m, n, |_, _| gauss(rng))
}

/// Random Hermitian matrix `(G + G†)/2`.
pub fn hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(n, n, rng);
    (&g + g.adjoint()) * c(0.5)
}

/// Haar-random unitary (QR of a Ginibre matrix with phase correction).
pub fn unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let qr = ginibre(n, n, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { c(1.0) };
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// Random isometry from `d_in` into `d_out` dimensions (`d_in <= d_out`).
pub fn isometry<R: Rng + ?Sized>(d_in: usize, d_out: usize, rng: &mut R) -> CMatrix {
    assert!(d_in <= d_out, "isometry needs d_in <= d_out");
    unitary(d_out, rng).columns(0, d_in).into_owned()
}

/// Haar-random unit vector.
pub fn pure<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    let v = CVector::from_fn(n, |_, _| gauss(rng));
    let norm = v.norm();
    v / c(norm)
}

/// Random density operator of the given rank (induced measure).
pub fn density<R: Rng + ?Sized>(dims: &[usize], labels: &[String], rank: usize, rng: &mut R) -> DensityOperator {
    let d: usize = dims.iter().product();
    let g = ginibre(d, rank.max(1), rng);
    let mut m = &g * g.adjoint();
    let tr: f64 = m.trace().re;
    m /= c(tr);
    let m = (&m + m.adjoint()) * c(0.5);
    DensityOperator::new(dims.to_vec(), labels.to_vec(), m).expect("random density operator is valid")
}

/// Random channel with `n_kraus` Kraus operators, built from a random isometry.
pub fn channel<R: Rng + ?Sized>(
    d_in: usize,
    out_dims: &[usize],
    out_labels: &[String],
    n_kraus: usize,
    rng: &mut R,
) -> KrausChannel {
    let d_out: usize = out_dims.iter().product();
    let v = isometry(d_in, d_out * n_kraus, rng);
    let kraus = (0..n_kraus)
        .map(|k| v.rows(k * d_out, d_out).into_owned())
        .collect();
    KrausChannel::new(kraus, out_dims.to_vec(), out_labels.to_vec()).expect("random channel is valid")
}

/// Random effect `0 <= E <= I`.
pub fn povm_effect<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let u = unitary(n, rng);
    let diag = CMatrix::from_diagonal(&CVector::from_fn(n, |_, _| c(rng.random::<f64>())));
    let e = &u * diag * u.adjoint();
    (&e + e.adjoint()) * c(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::max_abs_diff;
    use crate::SimRng;

    #[test]
    fn unitaries_and_isometries_are_orthonormal() {
        let mut rng = SimRng::new(8);
        for n in 1..6 {
            let u = unitary(n, &mut rng);
            assert!(max_abs_diff(&(u.adjoint() * &u), &CMatrix::identity(n, n)) < 1e-12);
            let v = isometry(n, n + 2, &mut rng);
            assert!(max_abs_diff(&(v.adjoint() * &v), &CMatrix::identity(n, n)) < 1e-12);
        }
    }

    #[test]
    fn random_channels_are_trace_preserving() {
        let mut rng = SimRng::new(9);
        let ch = channel(3, &[2], &["A".to_string()], 4, &mut rng);
        assert_eq!(ch.kraus().len(), 4);
        let rho = density(&[3], &["B".to_string()], 3, &mut rng);
        let out = ch.apply(&rho).unwrap();
        assert!((out.trace() - 1.0).abs() < 1e-12);
    }
}
