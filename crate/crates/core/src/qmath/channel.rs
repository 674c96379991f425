use super::state::{check_layout, CqState, DensityOperator};
use super::{c, max_abs_diff, CMatrix, STATE_TOL};
use crate::error::{invalid, Result};

/// A completely positive trace-preserving map in operator-sum form.
///
/// Input dimension is the column count of the Kraus operators; the output
/// is described by `output_dims` / `output_labels`.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    kraus: Vec<CMatrix>,
    output_dims: Vec<usize>,
    output_labels: Vec<String>,
}

impl KrausChannel {
    pub fn new(kraus: Vec<CMatrix>, output_dims: Vec<usize>, output_labels: Vec<String>) -> Result<Self> {
        if kraus.is_empty() {
            return invalid("a channel needs at least one Kraus operator");
        }
        check_layout(&output_dims, &output_labels)?;
        let d_out: usize = output_dims.iter().product();
        let d_in = kraus[0].ncols();
        for (k, op) in kraus.iter().enumerate() {
            if op.shape() != (d_out, d_in) {
                return invalid(format!(
                    "Kraus operator {k} is {}x{}, expected {d_out}x{d_in}",
                    op.nrows(),
                    op.ncols()
                ));
            }
        }
        let mut sum = CMatrix::zeros(d_in, d_in);
        for op in &kraus {
            sum += op.adjoint() * op;
        }
        let dev = max_abs_diff(&sum, &CMatrix::identity(d_in, d_in));
        if dev > STATE_TOL {
            return invalid(format!("Kraus operators are not trace preserving (deviation {dev:.3e})"));
        }
        Ok(Self {
            kraus,
            output_dims,
            output_labels,
        })
    }

    pub fn identity(dims: Vec<usize>, labels: Vec<String>) -> Result<Self> {
        let d: usize = dims.iter().product();
        Self::new(vec![CMatrix::identity(d, d)], dims, labels)
    }

    pub fn unitary(u: CMatrix, dims: Vec<usize>, labels: Vec<String>) -> Result<Self> {
        Self::new(vec![u], dims, labels)
    }

    /// Trace out the factor at `position` of a space with factor `dims`.
    pub fn trace_out(dims: &[usize], labels: &[String], position: usize) -> Result<Self> {
        check_layout(dims, labels)?;
        if position >= dims.len() {
            return invalid(format!("no factor at position {position}"));
        }
        let left: usize = dims[..position].iter().product();
        let mid = dims[position];
        let right: usize = dims[position + 1..].iter().product();
        let mut kraus = Vec::with_capacity(mid);
        for j in 0..mid {
            let mut bra = CMatrix::zeros(1, mid);
            bra[(0, j)] = c(1.0);
            let op = CMatrix::identity(left, left)
                .kronecker(&bra)
                .kronecker(&CMatrix::identity(right, right));
            kraus.push(op);
        }
        let mut out_dims = dims.to_vec();
        let mut out_labels = labels.to_vec();
        out_dims.remove(position);
        out_labels.remove(position);
        if out_dims.is_empty() {
            out_dims.push(1);
            out_labels.push("trivial".into());
        }
        Self::new(kraus, out_dims, out_labels)
    }

    /// `id_left ⊗ self`.
    pub fn lift(&self, left_dims: &[usize], left_labels: &[String]) -> Result<Self> {
        let dl: usize = left_dims.iter().product();
        let id = CMatrix::identity(dl, dl);
        let kraus = self.kraus.iter().map(|k| id.kronecker(k)).collect();
        let mut dims = left_dims.to_vec();
        dims.extend_from_slice(&self.output_dims);
        let mut labels = left_labels.to_vec();
        labels.extend(self.output_labels.iter().cloned());
        Self::new(kraus, dims, labels)
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &KrausChannel) -> Result<Self> {
        if next.input_dim() != self.output_dim() {
            return invalid(format!(
                "cannot compose: output dimension {} feeds input dimension {}",
                self.output_dim(),
                next.input_dim()
            ));
        }
        let mut kraus = Vec::with_capacity(self.kraus.len() * next.kraus.len());
        for b in &next.kraus {
            for a in &self.kraus {
                kraus.push(b * a);
            }
        }
        Self::new(kraus, next.output_dims.clone(), next.output_labels.clone())
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn input_dim(&self) -> usize {
        self.kraus[0].ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.kraus[0].nrows()
    }

    pub fn output_dims(&self) -> &[usize] {
        &self.output_dims
    }

    pub fn output_labels(&self) -> &[String] {
        &self.output_labels
    }

    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        if rho.dim() != self.input_dim() {
            return invalid(format!(
                "channel expects dimension {}, state has {}",
                self.input_dim(),
                rho.dim()
            ));
        }
        let m = self.apply_matrix(rho.matrix());
        Ok(DensityOperator::from_parts(
            self.output_dims.clone(),
            self.output_labels.clone(),
            m,
            rho.is_subnormalized(),
        ))
    }

    /// The map applied to an arbitrary (not necessarily positive) operator.
    pub fn apply_matrix(&self, m: &CMatrix) -> CMatrix {
        let d = self.output_dim();
        let mut out = CMatrix::zeros(d, d);
        for k in &self.kraus {
            out += k * m * k.adjoint();
        }
        out
    }
}

/// A classically controlled channel: value `x` of the control register
/// selects `per_value_channels[x]` on the target.
#[derive(Clone, Debug)]
pub struct ControlledOperation {
    per_value_channels: Vec<KrausChannel>,
}

impl ControlledOperation {
    pub fn new(per_value_channels: Vec<KrausChannel>) -> Result<Self> {
        let first = per_value_channels
            .first()
            .ok_or_else(|| crate::Error::InvalidArgument("controlled operation with no branches".into()))?;
        for (x, ch) in per_value_channels.iter().enumerate() {
            if ch.input_dim() != first.input_dim()
                || ch.output_dims() != first.output_dims()
                || ch.output_labels() != first.output_labels()
            {
                return invalid(format!("branch {x} has a different input/output layout"));
            }
        }
        Ok(Self { per_value_channels })
    }

    pub fn uniform(channel: KrausChannel, control_dim: usize) -> Result<Self> {
        Self::new(vec![channel; control_dim])
    }

    pub fn control_dim(&self) -> usize {
        self.per_value_channels.len()
    }

    pub fn channels(&self) -> &[KrausChannel] {
        &self.per_value_channels
    }

    /// The branch maps applied blockwise to an arbitrary block operator given
    /// as per-value blocks.
    pub fn apply_blocks(&self, blocks: &[CMatrix]) -> Result<Vec<CMatrix>> {
        if blocks.len() != self.control_dim() {
            return invalid(format!(
                "{} blocks for a {}-valued control",
                blocks.len(),
                self.control_dim()
            ));
        }
        Ok(blocks
            .iter()
            .zip(&self.per_value_channels)
            .map(|(b, ch)| ch.apply_matrix(b))
            .collect())
    }
}

/// Apply `op` to each conditional state; probabilities are untouched.
pub fn apply_controlled(op: &ControlledOperation, state: &CqState) -> Result<CqState> {
    if op.control_dim() != state.classical_dim() {
        return invalid(format!(
            "control dimension {} does not match classical dimension {}",
            op.control_dim(),
            state.classical_dim()
        ));
    }
    let conds = state
        .conditionals()
        .iter()
        .zip(op.channels())
        .map(|(rho, ch)| ch.apply(rho))
        .collect::<Result<Vec<_>>>()?;
    CqState::new(state.classical_label(), state.probs().to_vec(), conds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{partial_trace, random};
    use crate::SimRng;

    fn l(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identity_channels_leave_state_unchanged() {
        let mut rng = SimRng::new(2);
        let conds: Vec<_> = (0..3).map(|_| random::density(&[2, 2], &l(&["D", "E"]), 4, &mut rng)).collect();
        let cq = CqState::new("X", vec![0.2, 0.3, 0.5], conds).unwrap();
        let id = KrausChannel::identity(vec![2, 2], l(&["D", "E"])).unwrap();
        let op = ControlledOperation::uniform(id, 3).unwrap();
        let out = apply_controlled(&op, &cq).unwrap();
        for (a, b) in out.conditionals().iter().zip(cq.conditionals()) {
            assert!(crate::qmath::max_abs_diff(a.matrix(), b.matrix()) < 1e-15);
        }
        assert_eq!(out.probs(), cq.probs());
    }

    #[test]
    fn trace_out_channel_matches_partial_trace() {
        let mut rng = SimRng::new(4);
        let conds: Vec<_> = (0..2).map(|_| random::density(&[2, 3], &l(&["D", "E"]), 6, &mut rng)).collect();
        let cq = CqState::new("X", vec![0.5, 0.5], conds).unwrap();
        let tr = KrausChannel::trace_out(&[2, 3], &l(&["D", "E"]), 1).unwrap();
        let op = ControlledOperation::uniform(tr, 2).unwrap();
        let out = apply_controlled(&op, &cq).unwrap();
        for (a, b) in out.conditionals().iter().zip(cq.conditionals()) {
            let expect = partial_trace(b, &["D"]).unwrap();
            assert!(crate::qmath::max_abs_diff(a.matrix(), expect.matrix()) < 1e-14);
            assert_eq!(a.labels(), expect.labels());
        }
    }

    #[test]
    fn rejects_non_trace_preserving_and_mismatch() {
        let half = CMatrix::identity(2, 2) * c(0.5);
        assert!(KrausChannel::new(vec![half], vec![2], l(&["A"])).is_err());
        let id = KrausChannel::identity(vec![2], l(&["E"])).unwrap();
        let op = ControlledOperation::uniform(id, 3).unwrap();
        let cq = CqState::new("X", vec![0.5, 0.5], vec![DensityOperator::basis(2, "E", 0).unwrap(); 2]).unwrap();
        assert!(apply_controlled(&op, &cq).is_err());
    }
}
