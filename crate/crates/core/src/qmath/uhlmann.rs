//! Purifications and Uhlmann unitaries.

use super::linalg::{hermitian_eigen, svd};
use super::measures::partial_trace;
use super::state::DensityOperator;
use super::{c, max_abs_diff, CMatrix, CVector, DERIVED_TOL, STATE_TOL};
use crate::error::{invalid, Error, Result};

/// Purify `rho` onto `rho ⊗ R` with `dim(R) = ref_dim`.
///
/// The vector is `Σ_i √λ_i |v_i⟩ ⊗ |i⟩` over the eigenbasis in descending
/// order (ties by index). Eigenvalues in `(-1e-9, 0)` are clamped.
pub fn purify(rho: &DensityOperator, ref_dim: usize) -> Result<CVector> {
    let (vals, vecs) = hermitian_eigen(rho.matrix())?;
    let d = rho.dim();
    let mut psi = CVector::zeros(d * ref_dim);
    for (i, &lam) in vals.iter().enumerate() {
        if lam < -STATE_TOL {
            return Err(Error::Numeric(format!("eigenvalue {lam:.3e} is below the clamp range")));
        }
        if lam <= 0.0 {
            continue;
        }
        if i >= ref_dim {
            if lam > STATE_TOL {
                return invalid(format!("reference dimension {ref_dim} is below the rank of the state"));
            }
            continue;
        }
        let s = lam.sqrt();
        for a in 0..d {
            psi[a * ref_dim + i] += vecs[(a, i)] * c(s);
        }
    }
    Ok(psi)
}

fn as_matrix(v: &CVector, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |i, j| v[i * cols + j])
}

/// Unitary `U` on the reference with `|⟨psi|(I ⊗ U)|phi⟩|` maximal, i.e.
/// equal to the fidelity of the system marginals.
///
/// Both vectors live on `sys ⊗ ref` with `sys` the leading factor.
pub fn uhlmann_unitary(psi: &CVector, phi: &CVector, sys_dim: usize, ref_dim: usize) -> Result<CMatrix> {
    let n = sys_dim * ref_dim;
    if psi.len() != n || phi.len() != n {
        return invalid(format!("vectors must have length {n}"));
    }
    let p = as_matrix(psi, sys_dim, ref_dim);
    let f = as_matrix(phi, sys_dim, ref_dim);
    // (I ⊗ U)|phi⟩ has coefficient matrix F Uᵀ, and the overlap is tr(P† F Uᵀ).
    let overlap = p.adjoint() * f;
    let dec = svd(&overlap)?;
    Ok((&dec.v * dec.u.adjoint()).transpose())
}

/// Extend `xi_a` to a state on `A ⊗ B` whose fidelity with `rho_ab` equals
/// `F(rho_a, xi_a)`.
///
/// The labels of `rho_a` must be the leading labels of `rho_ab`.
pub fn uhlmann_extension(
    rho_a: &DensityOperator,
    xi_a: &DensityOperator,
    rho_ab: &DensityOperator,
) -> Result<DensityOperator> {
    let k = rho_a.labels().len();
    if rho_ab.labels().len() <= k
        || rho_ab.labels()[..k] != *rho_a.labels()
        || rho_ab.dims()[..k] != *rho_a.dims()
    {
        return invalid("rho_a must be the leading factors of rho_ab");
    }
    if xi_a.dims() != rho_a.dims() || xi_a.labels() != rho_a.labels() {
        return invalid("xi_a and rho_a have different layouts");
    }
    let keep: Vec<&str> = rho_a.labels().iter().map(String::as_str).collect();
    let marginal = partial_trace(rho_ab, &keep)?;
    let dev = max_abs_diff(marginal.matrix(), rho_a.matrix());
    if dev > DERIVED_TOL {
        return invalid(format!("rho_a is not the marginal of rho_ab (deviation {dev:.3e})"));
    }

    let d_a = rho_a.dim();
    let d_ab = rho_ab.dim();
    let d_b = d_ab / d_a;
    let d_ref = d_b * d_ab;
    // psi on A ⊗ (B ⊗ R), viewed as a purification of rho_a.
    let psi = purify(rho_ab, d_ab)?;
    let phi = purify(xi_a, d_ref)?;
    let u = uhlmann_unitary(&psi, &phi, d_a, d_ref)?;
    let rotated = as_matrix(&phi, d_a, d_ref) * u.transpose();
    // Regroup coefficients as (A B) x R and trace out R.
    let m = CMatrix::from_fn(d_ab, d_ab, |row, r| {
        let a = row / d_b;
        let b = row % d_b;
        rotated[(a, b * d_ab + r)]
    });
    let xi = &m * m.adjoint();
    let xi = (&xi + xi.adjoint()) * c(0.5);
    let (dims, labels) = (rho_ab.dims().to_vec(), rho_ab.labels().to_vec());
    if xi_a.is_subnormalized() {
        DensityOperator::new_subnormalized(dims, labels, xi)
    } else {
        DensityOperator::new(dims, labels, xi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{fidelity, random};
    use crate::SimRng;

    fn l(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn purification_reduces_to_state() {
        let mut rng = SimRng::new(5);
        let rho = random::density(&[3], &l(&["A"]), 2, &mut rng);
        let psi = purify(&rho, 3).unwrap();
        let pure = DensityOperator::from_pure(vec![3, 3], l(&["A", "R"]), &psi).unwrap();
        let back = partial_trace(&pure, &["A"]).unwrap();
        assert!(max_abs_diff(back.matrix(), rho.matrix()) < 1e-12);
        assert!(purify(&rho, 1).is_err());
    }

    #[test]
    fn equal_purifications_give_identity() {
        let mut rng = SimRng::new(6);
        let rho = random::density(&[2], &l(&["A"]), 2, &mut rng);
        let psi = purify(&rho, 2).unwrap();
        let u = uhlmann_unitary(&psi, &psi, 2, 2).unwrap();
        assert!(max_abs_diff(&u, &CMatrix::identity(2, 2)) < 1e-10);
    }

    #[test]
    fn extension_examples() {
        let mut rng = SimRng::new(7);
        let rho_ab = random::density(&[2, 2], &l(&["A", "B"]), 4, &mut rng);
        let rho_a = partial_trace(&rho_ab, &["A"]).unwrap();
        let same = uhlmann_extension(&rho_a, &rho_a, &rho_ab).unwrap();
        assert!((fidelity(&same, &rho_ab).unwrap() - 1.0).abs() < 1e-7);

        let xi_a = random::density(&[2], &l(&["A"]), 2, &mut rng);
        let ext = uhlmann_extension(&rho_a, &xi_a, &rho_ab).unwrap();
        let m = partial_trace(&ext, &["A"]).unwrap();
        assert!(max_abs_diff(m.matrix(), xi_a.matrix()) < 1e-7);
        let f_ab = fidelity(&rho_ab, &ext).unwrap();
        let f_a = fidelity(&rho_a, &xi_a).unwrap();
        assert!((f_ab - f_a).abs() < 1e-7, "{f_ab} vs {f_a}");

        let other = random::density(&[2], &l(&["A"]), 2, &mut rng);
        assert!(uhlmann_extension(&other, &xi_a, &rho_ab).is_err());
    }
}
