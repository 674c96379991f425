use super::linalg::{hermitian_eigen, is_hermitian, singular_values, sqrt_psd};
use super::state::{CqState, DensityOperator};
use super::{c, CMatrix, STATE_TOL};
use crate::error::{invalid, Result};

/// Sum of singular values.
pub fn trace_norm(a: &CMatrix) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return invalid(format!("trace norm of a non-square {}x{} matrix", a.nrows(), a.ncols()));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return invalid("trace norm of a non-finite matrix");
    }
    if is_hermitian(a, 1e-14) {
        let (vals, _) = hermitian_eigen(a)?;
        Ok(vals.iter().map(|v| v.abs()).sum())
    } else {
        Ok(singular_values(a)?.iter().sum())
    }
}

/// `||rho0 - rho1||_tr`, in `[0, 2]` for normalized states.
pub fn trace_distance(rho0: &DensityOperator, rho1: &DensityOperator) -> Result<f64> {
    same_layout(rho0, rho1)?;
    trace_norm(&(rho0.matrix() - rho1.matrix()))
}

/// `F(rho0, rho1) = || sqrt(rho0) sqrt(rho1) ||_tr`.
pub fn fidelity(rho0: &DensityOperator, rho1: &DensityOperator) -> Result<f64> {
    same_layout(rho0, rho1)?;
    let s0 = sqrt_psd(rho0.matrix())?;
    let s1 = sqrt_psd(rho1.matrix())?;
    let f = singular_values(&(s0 * s1))?.iter().sum::<f64>();
    Ok(f.clamp(0.0, 1.0))
}

fn same_layout(a: &DensityOperator, b: &DensityOperator) -> Result<()> {
    if a.dims() != b.dims() {
        return invalid(format!("dimension mismatch: {:?} vs {:?}", a.dims(), b.dims()));
    }
    Ok(())
}

/// Reduce `rho` to the subsystems named in `keep` (kept in their original
/// order).
pub fn partial_trace(rho: &DensityOperator, keep: &[&str]) -> Result<DensityOperator> {
    for k in keep {
        if rho.index_of(k).is_none() {
            return invalid(format!("unknown subsystem label {k:?} (have {:?})", rho.labels()));
        }
    }
    if keep.is_empty() {
        return invalid("partial trace must keep at least one subsystem");
    }
    let keep_idx: Vec<usize> = (0..rho.dims().len())
        .filter(|&i| keep.contains(&rho.labels()[i].as_str()))
        .collect();
    let m = partial_trace_matrix(rho.matrix(), rho.dims(), &keep_idx);
    let dims = keep_idx.iter().map(|&i| rho.dims()[i]).collect();
    let labels = keep_idx.iter().map(|&i| rho.labels()[i].clone()).collect();
    Ok(DensityOperator::from_parts(dims, labels, m, rho.is_subnormalized()))
}

/// Partial trace of a raw operator with factor dimensions `dims`, keeping
/// the factor indices in `keep` (ascending).
pub(crate) fn partial_trace_matrix(m: &CMatrix, dims: &[usize], keep: &[usize]) -> CMatrix {
    let n = dims.len();
    let traced: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
    let dk: usize = keep.iter().map(|&i| dims[i]).product();
    let dt: usize = traced.iter().map(|&i| dims[i]).product();
    // stride of each factor in the full index
    let mut stride = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        stride[i] = stride[i + 1] * dims[i + 1];
    }
    let offsets = |which: &[usize], count: usize| -> Vec<usize> {
        (0..count)
            .map(|mut r| {
                let mut off = 0;
                for &f in which.iter().rev() {
                    off += (r % dims[f]) * stride[f];
                    r /= dims[f];
                }
                off
            })
            .collect()
    };
    let kept_off = offsets(keep, dk);
    let traced_off = offsets(&traced, dt);
    let mut out = CMatrix::zeros(dk, dk);
    for (i, &oi) in kept_off.iter().enumerate() {
        for (j, &oj) in kept_off.iter().enumerate() {
            let mut acc = c(0.0);
            for &t in &traced_off {
                acc += m[(oi + t, oj + t)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// A joint probability table `p[x][e]`.
#[derive(Clone, Debug)]
pub struct JointTable {
    pub p: Vec<Vec<f64>>,
}

impl JointTable {
    pub fn new(p: Vec<Vec<f64>>) -> Result<Self> {
        if p.is_empty() || p[0].is_empty() {
            return invalid("empty probability table");
        }
        let cols = p[0].len();
        if p.iter().any(|row| row.len() != cols) {
            return invalid("ragged probability table");
        }
        if p.iter().flatten().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return invalid("probability table has negative or non-finite entries");
        }
        let total: f64 = p.iter().flatten().sum();
        if (total - 1.0).abs() > STATE_TOL {
            return invalid(format!("probability table sums to {total}"));
        }
        Ok(Self { p })
    }

    pub fn x_count(&self) -> usize {
        self.p.len()
    }

    pub fn e_count(&self) -> usize {
        self.p[0].len()
    }

    /// `max_x p(x, e)` for each `e`.
    pub fn column_max(&self) -> Vec<f64> {
        (0..self.e_count())
            .map(|e| self.p.iter().map(|row| row[e]).fold(0.0, f64::max))
            .collect()
    }

    /// The table as a cq-state with diagonal conditionals on `E`.
    pub fn to_cq(&self, x_label: &str, e_label: &str) -> Result<CqState> {
        let mut probs = Vec::with_capacity(self.x_count());
        let mut conds = Vec::with_capacity(self.x_count());
        for row in &self.p {
            let px: f64 = row.iter().sum();
            probs.push(px);
            let cond: Vec<f64> = if px > 0.0 {
                row.iter().map(|v| v / px).collect()
            } else {
                let mut u = vec![0.0; row.len()];
                u[0] = 1.0;
                u
            };
            conds.push(DensityOperator::diagonal(vec![row.len()], vec![e_label.into()], &cond)?);
        }
        CqState::new(x_label, probs, conds)
    }
}

/// `H_min(X|E) = -log2 sum_e max_x p(x, e)` for classical side information.
pub fn cond_min_entropy_cc(table: &JointTable) -> Result<f64> {
    let guess: f64 = table.column_max().iter().sum();
    Ok(-guess.log2())
}

/// Whether `2^{-lambda} id_X ⊗ sigma >= rho_XE`, i.e. `sigma` witnesses
/// `H_min(X|E) >= lambda`.
pub fn check_min_entropy_witness(rho: &CqState, lambda: f64, sigma: &DensityOperator) -> Result<bool> {
    if sigma.dims() != rho.quantum_dims() {
        return invalid(format!(
            "witness dims {:?} do not match side-information dims {:?}",
            sigma.dims(),
            rho.quantum_dims()
        ));
    }
    if !lambda.is_finite() {
        return invalid("lambda must be finite");
    }
    let scale = c(2f64.powf(-lambda));
    for (p, cond) in rho.probs().iter().zip(rho.conditionals()) {
        let diff = sigma.matrix() * scale - cond.matrix() * c(*p);
        let (vals, _) = hermitian_eigen(&diff)?;
        if vals.last().copied().unwrap_or(0.0) < -STATE_TOL {
            return Ok(false);
        }
    }
    Ok(true)
}
