use std::collections::HashSet;

use num_complex::Complex64;

use super::linalg::{hermitian_eigen, is_hermitian};
use super::{c, CMatrix, CVector, MAX_DIM, STATE_TOL};
use crate::error::{invalid, Result};

/// A density operator on a labelled tensor product of subsystems.
///
/// Normalized states have trace one within [`STATE_TOL`]; subnormalized
/// ones (post-selected branches such as an accepted-run state) carry a flag
/// and may have any trace in `[0, 1]`.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    dims: Vec<usize>,
    labels: Vec<String>,
    matrix: CMatrix,
    subnormalized: bool,
}

impl DensityOperator {
    pub fn new(dims: Vec<usize>, labels: Vec<String>, matrix: CMatrix) -> Result<Self> {
        Self::build(dims, labels, matrix, false)
    }

    pub fn new_subnormalized(dims: Vec<usize>, labels: Vec<String>, matrix: CMatrix) -> Result<Self> {
        Self::build(dims, labels, matrix, true)
    }

    fn build(dims: Vec<usize>, labels: Vec<String>, matrix: CMatrix, sub: bool) -> Result<Self> {
        check_layout(&dims, &labels)?;
        let total: usize = dims.iter().product();
        if matrix.shape() != (total, total) {
            return invalid(format!(
                "matrix is {}x{} but subsystem dims {:?} need {total}x{total}",
                matrix.nrows(),
                matrix.ncols(),
                dims
            ));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("density matrix has non-finite entries");
        }
        if !is_hermitian(&matrix, STATE_TOL) {
            return invalid("density matrix is not Hermitian within 1e-9");
        }
        let tr = matrix.trace().re;
        if sub {
            if !(-STATE_TOL..=1.0 + STATE_TOL).contains(&tr) {
                return invalid(format!("subnormalized trace {tr} outside [0, 1]"));
            }
        } else if (tr - 1.0).abs() > STATE_TOL {
            return invalid(format!("trace {tr} is not 1 within 1e-9"));
        }
        let (vals, _) = hermitian_eigen(&matrix)?;
        if let Some(&min) = vals.last() {
            if min < -STATE_TOL {
                return invalid(format!("density matrix has eigenvalue {min} < -1e-9"));
            }
        }
        Ok(Self {
            dims,
            labels,
            matrix,
            subnormalized: sub,
        })
    }

    /// Skips spectral validation; used for outputs of operations that
    /// preserve positivity by construction.
    pub(crate) fn from_parts(dims: Vec<usize>, labels: Vec<String>, matrix: CMatrix, sub: bool) -> Self {
        debug_assert_eq!(matrix.nrows(), dims.iter().product::<usize>());
        Self {
            dims,
            labels,
            matrix,
            subnormalized: sub,
        }
    }

    /// `|psi><psi|` for a unit vector.
    pub fn from_pure(dims: Vec<usize>, labels: Vec<String>, psi: &CVector) -> Result<Self> {
        let nrm = psi.norm();
        if (nrm - 1.0).abs() > STATE_TOL {
            return invalid(format!("state vector has norm {nrm}"));
        }
        Self::new(dims, labels, psi * psi.adjoint())
    }

    pub fn maximally_mixed(dims: Vec<usize>, labels: Vec<String>) -> Result<Self> {
        let total: usize = dims.iter().product();
        let m = CMatrix::identity(total, total) * c(1.0 / total as f64);
        Self::new(dims, labels, m)
    }

    /// Computational basis state `|k><k|` of a single subsystem.
    pub fn basis(dim: usize, label: &str, k: usize) -> Result<Self> {
        if k >= dim {
            return invalid(format!("basis index {k} out of range for dimension {dim}"));
        }
        let mut m = CMatrix::zeros(dim, dim);
        m[(k, k)] = c(1.0);
        Self::new(vec![dim], vec![label.to_string()], m)
    }

    /// Diagonal (classical) state with the given probabilities.
    pub fn diagonal(dims: Vec<usize>, labels: Vec<String>, probs: &[f64]) -> Result<Self> {
        let m = CMatrix::from_diagonal(&CVector::from_iterator(probs.len(), probs.iter().map(|&p| c(p))));
        Self::new(dims, labels, m)
    }

    /// `self ⊗ other`; labels must stay distinct.
    pub fn tensor(&self, other: &DensityOperator) -> Result<Self> {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        check_layout(&dims, &labels)?;
        Ok(Self::from_parts(
            dims,
            labels,
            self.matrix.kronecker(&other.matrix),
            self.subnormalized || other.subnormalized,
        ))
    }

    pub fn relabel(mut self, labels: Vec<String>) -> Result<Self> {
        check_layout(&self.dims, &labels)?;
        self.labels = labels;
        Ok(self)
    }

    /// Multiply by a nonnegative weight; the result is subnormalized.
    pub fn scaled(&self, w: f64) -> Result<Self> {
        if !(0.0..=1.0 + STATE_TOL).contains(&w) {
            return invalid(format!("weight {w} outside [0, 1]"));
        }
        Ok(Self::from_parts(self.dims.clone(), self.labels.clone(), &self.matrix * c(w), true))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn is_subnormalized(&self) -> bool {
        self.subnormalized
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(hermitian_eigen(&self.matrix)?.0)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Re-run every invariant check.
    pub fn validate(&self) -> Result<()> {
        Self::build(
            self.dims.clone(),
            self.labels.clone(),
            self.matrix.clone(),
            self.subnormalized,
        )
        .map(|_| ())
    }
}

pub(crate) fn check_layout(dims: &[usize], labels: &[String]) -> Result<()> {
    if dims.len() != labels.len() {
        return invalid(format!("{} dims but {} labels", dims.len(), labels.len()));
    }
    if dims.is_empty() {
        return invalid("a state needs at least one subsystem");
    }
    if dims.iter().any(|&d| d == 0) {
        return invalid(format!("subsystem dimensions must be >= 1, got {dims:?}"));
    }
    let total = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d).filter(|&t| t <= MAX_DIM));
    if total.is_none() {
        return Err(crate::Error::ResourceLimit(format!(
            "total dimension of {dims:?} exceeds {MAX_DIM}"
        )));
    }
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return invalid(format!("duplicate subsystem label {l:?}"));
        }
    }
    Ok(())
}

/// A classical-quantum state `sum_x p_x |x><x| ⊗ rho^x`.
#[derive(Clone, Debug)]
pub struct CqState {
    classical_label: String,
    probs: Vec<f64>,
    conditionals: Vec<DensityOperator>,
}

impl CqState {
    pub fn new(classical_label: &str, probs: Vec<f64>, conditionals: Vec<DensityOperator>) -> Result<Self> {
        if probs.is_empty() || probs.len() != conditionals.len() {
            return invalid(format!(
                "{} probabilities for {} conditional states",
                probs.len(),
                conditionals.len()
            ));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return invalid("probabilities must be finite and nonnegative");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > STATE_TOL {
            return invalid(format!("probabilities sum to {total}, not 1"));
        }
        let first = &conditionals[0];
        for (x, rho) in conditionals.iter().enumerate() {
            if rho.dims() != first.dims() || rho.labels() != first.labels() {
                return invalid(format!("conditional state for x = {x} has a different layout"));
            }
            if rho.is_subnormalized() {
                return invalid(format!("conditional state for x = {x} is subnormalized"));
            }
        }
        if first.index_of(classical_label).is_some() {
            return invalid(format!("classical label {classical_label:?} reused by a quantum factor"));
        }
        let mut dims = vec![probs.len()];
        dims.extend_from_slice(first.dims());
        check_layout(&dims, &std::iter::once(classical_label.to_string()).chain(first.labels().iter().cloned()).collect::<Vec<_>>())?;
        Ok(Self {
            classical_label: classical_label.to_string(),
            probs,
            conditionals,
        })
    }

    pub fn classical_label(&self) -> &str {
        &self.classical_label
    }

    pub fn classical_dim(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn conditionals(&self) -> &[DensityOperator] {
        &self.conditionals
    }

    pub fn quantum_dims(&self) -> &[usize] {
        self.conditionals[0].dims()
    }

    pub fn quantum_labels(&self) -> &[String] {
        self.conditionals[0].labels()
    }

    /// The block-diagonal operator `sum_x p_x |x><x| ⊗ rho^x`.
    pub fn to_density(&self) -> DensityOperator {
        let q = self.conditionals[0].dim();
        let n = self.probs.len();
        let mut m = CMatrix::zeros(n * q, n * q);
        for (x, (p, rho)) in self.probs.iter().zip(&self.conditionals).enumerate() {
            let block = rho.matrix() * Complex64::new(*p, 0.0);
            m.view_mut((x * q, x * q), (q, q)).copy_from(&block);
        }
        let mut dims = vec![n];
        dims.extend_from_slice(self.quantum_dims());
        let mut labels = vec![self.classical_label.clone()];
        labels.extend(self.quantum_labels().iter().cloned());
        DensityOperator::from_parts(dims, labels, m, false)
    }

    /// `sum_x p_x rho^x`, the quantum marginal.
    pub fn quantum_marginal(&self) -> DensityOperator {
        let q = self.conditionals[0].dim();
        let mut m = CMatrix::zeros(q, q);
        for (p, rho) in self.probs.iter().zip(&self.conditionals) {
            m += rho.matrix() * Complex64::new(*p, 0.0);
        }
        DensityOperator::from_parts(self.quantum_dims().to_vec(), self.quantum_labels().to_vec(), m, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn rejects_invalid_states() {
        let mut m = CMatrix::identity(2, 2) * c(0.5);
        m[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(DensityOperator::new(vec![2], labels(&["A"]), m).is_err());
        let neg = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.5), c(-0.5)]));
        assert!(DensityOperator::new(vec![2], labels(&["A"]), neg).is_err());
        let half = CMatrix::identity(2, 2) * c(0.25);
        assert!(DensityOperator::new(vec![2], labels(&["A"]), half.clone()).is_err());
        assert!(DensityOperator::new_subnormalized(vec![2], labels(&["A"]), half).is_ok());
        assert!(DensityOperator::maximally_mixed(vec![2, 2], labels(&["A", "A"])).is_err());
        assert!(matches!(
            DensityOperator::maximally_mixed(vec![64, 128], labels(&["A", "B"])),
            Err(crate::Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn cq_expansion_is_block_diagonal() {
        let r0 = DensityOperator::basis(2, "E", 0).unwrap();
        let r1 = DensityOperator::maximally_mixed(vec![2], labels(&["E"])).unwrap();
        let cq = CqState::new("X", vec![0.25, 0.75], vec![r0, r1]).unwrap();
        let rho = cq.to_density();
        rho.validate().unwrap();
        assert_eq!(rho.dims(), &[2, 2]);
        assert!((rho.matrix()[(0, 0)].re - 0.25).abs() < 1e-15);
        assert!((rho.matrix()[(2, 2)].re - 0.375).abs() < 1e-15);
        assert_eq!(rho.matrix()[(0, 2)], c(0.0));
        assert!(CqState::new("X", vec![0.5, 0.6], cq.conditionals().to_vec()).is_err());
    }
}
