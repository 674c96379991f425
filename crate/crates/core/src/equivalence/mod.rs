//! Device-uniform versus globally uniform sources, numerically.
//!
//! A physical system is a cq-state on `X ⊗ D ⊗ (adversary)`. It is
//! *globally uniform* when every conditional is the same state, and
//! *device-uniform* when only the device marginals agree. Any
//! device-uniform state is an `X`-controlled operation on the adversary
//! applied to a globally uniform one; [`decompose_via_uhlmann`] builds that
//! baseline and operation, and [`acceptance_invariance_check`] confirms a
//! decision made on `X ⊗ D` cannot tell the two apart.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::qmath::{
    apply_controlled, c, max_abs_diff, partial_trace, purify, random, trace_norm, uhlmann_extension, uhlmann_unitary,
    CMatrix, ControlledOperation, CqState, DensityOperator, KrausChannel, DERIVED_TOL, MAX_DIM,
};
use crate::rng::SimRng;

pub const DEVICE: &str = "D";
pub const ADVERSARY: &str = "E";
pub const PURIFIER: &str = "E'";
const SOURCE: &str = "X";

/// A cq-state over `X ⊗ D ⊗ adversary`. The first quantum factor of every
/// conditional is the device.
#[derive(Clone, Debug)]
pub struct PhysicalSystemState {
    x_bits: usize,
    state: CqState,
    device_uniform: bool,
    global_uniform: bool,
}

fn l(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl PhysicalSystemState {
    fn from_conditionals(x_bits: usize, conditionals: Vec<DensityOperator>) -> Result<Self> {
        if x_bits > 12 {
            return Err(Error::ResourceLimit(format!("2^{x_bits} source values")));
        }
        let nx = 1usize << x_bits;
        if conditionals.len() != nx {
            return invalid(format!("{} conditionals for {nx} source values", conditionals.len()));
        }
        let total = nx * conditionals[0].dim();
        if total > MAX_DIM {
            return Err(Error::ResourceLimit(format!("total dimension {total} exceeds {MAX_DIM}")));
        }
        if conditionals[0].labels().first().map(String::as_str) != Some(DEVICE) {
            return invalid(format!("the first factor of each conditional must be labelled {DEVICE}"));
        }
        let state = CqState::new(SOURCE, vec![1.0 / nx as f64; nx], conditionals)?;
        let device_uniform = check_device_uniform(&state)?.is_none();
        let first = &state.conditionals()[0];
        let global_uniform = state
            .conditionals()
            .iter()
            .all(|r| max_abs_diff(r.matrix(), first.matrix()) <= DERIVED_TOL);
        Ok(Self {
            x_bits,
            state,
            device_uniform,
            global_uniform,
        })
    }

    pub fn x_bits(&self) -> usize {
        self.x_bits
    }

    pub fn x_dim(&self) -> usize {
        1 << self.x_bits
    }

    pub fn state(&self) -> &CqState {
        &self.state
    }

    pub fn device_dim(&self) -> usize {
        self.state.quantum_dims()[0]
    }

    pub fn adversary_dims(&self) -> &[usize] {
        &self.state.quantum_dims()[1..]
    }

    pub fn adversary_labels(&self) -> &[String] {
        &self.state.quantum_labels()[1..]
    }

    /// `ρ_XD = U_X ⊗ ρ_D`.
    pub fn is_device_uniform(&self) -> bool {
        self.device_uniform
    }

    /// `ρ_XDE = U_X ⊗ ρ_DE`.
    pub fn is_global_uniform(&self) -> bool {
        self.global_uniform
    }

    /// The common device marginal (of the first conditional).
    pub fn device_marginal(&self) -> Result<DensityOperator> {
        partial_trace(&self.state.conditionals()[0], &[DEVICE])
    }
}

/// First `x` whose device marginal differs from that of `x = 0`.
fn check_device_uniform(state: &CqState) -> Result<Option<(usize, f64)>> {
    let marginals = state
        .conditionals()
        .iter()
        .map(|r| partial_trace(r, &[DEVICE]))
        .collect::<Result<Vec<_>>>()?;
    for (x, m) in marginals.iter().enumerate().skip(1) {
        let dev = trace_norm(&(m.matrix() - marginals[0].matrix()))?;
        if dev > DERIVED_TOL {
            return Ok(Some((x, dev)));
        }
    }
    Ok(None)
}

/// `Σ_x |x⟩⟨x| ⊗ φ` with uniform `x`.
pub fn make_global_uniform(x_bits: usize, phi_de: &DensityOperator) -> Result<PhysicalSystemState> {
    if x_bits > 12 {
        return Err(Error::ResourceLimit(format!("2^{x_bits} source values")));
    }
    PhysicalSystemState::from_conditionals(x_bits, vec![phi_de.clone(); 1 << x_bits])
}

/// Uniform `x` with the given conditionals, which must share their device
/// marginal.
pub fn make_device_uniform(x_bits: usize, conditionals: Vec<DensityOperator>) -> Result<PhysicalSystemState> {
    let s = PhysicalSystemState::from_conditionals(x_bits, conditionals)?;
    if let Some((x, dev)) = check_device_uniform(&s.state)? {
        return invalid(format!(
            "conditional for x = {x} has a different device marginal (trace distance {dev:.3e})"
        ));
    }
    Ok(s)
}

/// `ρ_x = ρ_D ⊗ |x⟩⟨x|_E`: the adversary holds a copy of the source.
pub fn classical_copy_target(x_bits: usize, rho_d: &DensityOperator) -> Result<PhysicalSystemState> {
    let nx = 1usize << x_bits;
    let conds = (0..nx)
        .map(|x| rho_d.tensor(&DensityOperator::basis(nx, ADVERSARY, x)?))
        .collect::<Result<Vec<_>>>()?;
    make_device_uniform(x_bits, conds)
}

/// Random device-uniform target: per-`x` extensions of one random `ρ_D`.
pub fn random_device_uniform(x_bits: usize, d_dim: usize, e_dim: usize, rng: &mut SimRng) -> Result<PhysicalSystemState> {
    let rho_d = random::density(&[d_dim], &l(&[DEVICE]), d_dim, rng);
    let conds = (0..1usize << x_bits)
        .map(|_| {
            let seed = random::density(&[d_dim, e_dim], &l(&[DEVICE, ADVERSARY]), d_dim * e_dim, rng);
            let marginal = partial_trace(&seed, &[DEVICE])?;
            uhlmann_extension(&marginal, &rho_d, &seed)
        })
        .collect::<Result<Vec<_>>>()?;
    make_device_uniform(x_bits, conds)
}

/// Globally uniform baseline on `X ⊗ D ⊗ E ⊗ E'` plus the `X`-controlled
/// operation (a unitary on `E E'`, then discard `E'`) mapping it to `target`.
pub fn decompose_via_uhlmann(target: &PhysicalSystemState) -> Result<(PhysicalSystemState, ControlledOperation)> {
    if !target.is_device_uniform() {
        return invalid("target is not device-uniform");
    }
    let d_dim = target.device_dim();
    let adv_dims = target.adversary_dims().to_vec();
    let adv_labels = target.adversary_labels().to_vec();
    let e_dim: usize = adv_dims.iter().product();
    let de = d_dim * e_dim;
    if de * de > MAX_DIM {
        return Err(Error::ResourceLimit(format!(
            "baseline dimension {} exceeds {MAX_DIM}",
            de * de
        )));
    }
    let reference = e_dim * de;
    let purifications = target
        .state
        .conditionals()
        .iter()
        .map(|r| purify(r, de))
        .collect::<Result<Vec<_>>>()?;
    let phi = purifications[0].clone();

    let mut dims = vec![d_dim];
    dims.extend(&adv_dims);
    dims.push(de);
    let mut labels = vec![DEVICE.to_string()];
    labels.extend(adv_labels.iter().cloned());
    labels.push(PURIFIER.to_string());
    let phi_state = DensityOperator::from_pure(dims, labels, &phi)?;
    let baseline = make_global_uniform(target.x_bits, &phi_state)?;

    let mut out_dims = vec![d_dim];
    out_dims.extend(&adv_dims);
    let mut out_labels = vec![DEVICE.to_string()];
    out_labels.extend(adv_labels.iter().cloned());
    let id_d = CMatrix::identity(d_dim, d_dim);
    let channels = purifications
        .iter()
        .map(|psi_x| {
            let u = uhlmann_unitary(psi_x, &phi, d_dim, reference)?;
            let full = id_d.kronecker(&u);
            let kraus = (0..de)
                .map(|j| {
                    let mut bra = CMatrix::zeros(1, de);
                    bra[(0, j)] = c(1.0);
                    let discard = CMatrix::identity(de, de).kronecker(&bra);
                    discard * &full
                })
                .collect();
            KrausChannel::new(kraus, out_dims.clone(), out_labels.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((baseline, ControlledOperation::new(channels)?))
}

/// `Σ_x ‖p_x ρ_x − q_x σ_x‖_tr`, the trace distance of block-diagonal cq-states.
pub fn cq_distance(a: &CqState, b: &CqState) -> Result<f64> {
    if a.classical_dim() != b.classical_dim() || a.quantum_dims() != b.quantum_dims() {
        return invalid("cq-states have different layouts");
    }
    let mut total = 0.0;
    for x in 0..a.classical_dim() {
        let m = a.conditionals()[x].matrix() * c(a.probs()[x]) - b.conditionals()[x].matrix() * c(b.probs()[x]);
        total += trace_norm(&m)?;
    }
    Ok(total)
}

/// Apply `attack` and measure the distance to `target`.
pub fn reconstruction_error(
    baseline: &PhysicalSystemState,
    attack: &ControlledOperation,
    target: &PhysicalSystemState,
) -> Result<f64> {
    let rebuilt = apply_controlled(attack, &baseline.state)?;
    cq_distance(&rebuilt, &target.state)
}

/// An `X`-controlled two-outcome measurement on the device: `effects[x]`
/// is the accept effect, applied as a Lüders instrument.
#[derive(Clone, Debug)]
pub struct DecisionChannel {
    effects: Vec<CMatrix>,
    accept_ops: Vec<CMatrix>,
    reject_ops: Vec<CMatrix>,
}

impl DecisionChannel {
    pub fn new(effects: Vec<CMatrix>) -> Result<Self> {
        let mut accept_ops = Vec::with_capacity(effects.len());
        let mut reject_ops = Vec::with_capacity(effects.len());
        for (x, e) in effects.iter().enumerate() {
            let n = e.nrows();
            if e.ncols() != n || !crate::qmath::linalg::is_hermitian(e, 1e-12) {
                return invalid(format!("effect {x} is not a Hermitian square matrix"));
            }
            let (vals, _) = crate::qmath::linalg::hermitian_eigen(e)?;
            if vals[0] > 1.0 + 1e-9 || vals[n - 1] < -1e-9 {
                return invalid(format!("effect {x} is not between 0 and I"));
            }
            accept_ops.push(crate::qmath::linalg::sqrt_psd(e)?);
            reject_ops.push(crate::qmath::linalg::sqrt_psd(&(CMatrix::identity(n, n) - e))?);
        }
        Ok(Self {
            effects,
            accept_ops,
            reject_ops,
        })
    }

    pub fn random(x_dim: usize, d_dim: usize, rng: &mut SimRng) -> Result<Self> {
        Self::new((0..x_dim).map(|_| random::povm_effect(d_dim, rng)).collect())
    }

    fn lift(op: &CMatrix, rest: usize) -> CMatrix {
        op.kronecker(&CMatrix::identity(rest, rest))
    }

    /// `Pr[A = 1] = Σ_x p_x tr((E_x ⊗ I) ρ_x)`.
    pub fn accept_probability(&self, state: &CqState) -> Result<f64> {
        self.check(state)?;
        let mut p = 0.0;
        for (x, (px, rho)) in state.probs().iter().zip(state.conditionals()).enumerate() {
            let rest = rho.dim() / self.effects[x].nrows();
            p += px * (Self::lift(&self.effects[x], rest) * rho.matrix()).trace().re;
        }
        Ok(p)
    }

    fn check(&self, state: &CqState) -> Result<()> {
        if state.classical_dim() != self.effects.len() || state.quantum_dims()[0] != self.effects[0].nrows() {
            return invalid("decision channel does not match the state's X or D dimension");
        }
        Ok(())
    }

    /// Post-measurement blocks `(accepted, rejected)` per `x`, each weighted by `p_x`.
    pub fn apply(&self, state: &CqState) -> Result<Vec<(CMatrix, CMatrix)>> {
        self.check(state)?;
        Ok(state
            .probs()
            .iter()
            .zip(state.conditionals())
            .enumerate()
            .map(|(x, (px, rho))| {
                let rest = rho.dim() / self.effects[x].nrows();
                let ka = Self::lift(&self.accept_ops[x], rest);
                let kr = Self::lift(&self.reject_ops[x], rest);
                let m = rho.matrix() * c(*px);
                (&ka * &m * ka.adjoint(), &kr * &m * kr.adjoint())
            })
            .collect())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub accept_baseline: f64,
    pub accept_attacked: f64,
    pub accept_target: f64,
    /// `|Pr_baseline[A] − Pr_attacked[A]|`.
    pub discrepancy: f64,
    /// `‖Φ(M(ρ)) − M(Φ(ρ))‖_tr`.
    pub commutation: f64,
    /// `‖M(γ^A) − M(δ)‖_tr − ‖γ^A − δ‖_tr` for a reference `δ` (should be `<= 0`).
    pub monotonicity_slack: f64,
}

/// Compare the decision statistics of `baseline` and `attack(baseline)`.
pub fn acceptance_invariance_check(
    decision: &DecisionChannel,
    baseline: &PhysicalSystemState,
    attack: &ControlledOperation,
    target: &PhysicalSystemState,
) -> Result<InvarianceReport> {
    let attacked = apply_controlled(attack, &baseline.state)?;
    let rec = cq_distance(&attacked, &target.state)?;
    if rec > 1e-6 {
        return invalid(format!("target is not attack(baseline): distance {rec:.3e}"));
    }
    let accept_baseline = decision.accept_probability(&baseline.state)?;
    let accept_attacked = decision.accept_probability(&attacked)?;
    let accept_target = decision.accept_probability(&target.state)?;

    // Φ then M versus M then Φ, per source value and outcome.
    let phi_first = decision.apply(&baseline.state)?;
    let m_first = decision.apply(&attacked)?;
    let mut commutation = 0.0;
    let mut gamma_vs_delta = 0.0;
    let mut m_gamma_vs_m_delta = 0.0;
    let d_dim = baseline.device_dim();
    for (x, ((acc_b, rej_b), (acc_a, rej_a))) in phi_first.iter().zip(&m_first).enumerate() {
        let ch = &attack.channels()[x];
        commutation += trace_norm(&(ch.apply_matrix(acc_b) - acc_a))?;
        commutation += trace_norm(&(ch.apply_matrix(rej_b) - rej_a))?;
        // δ: device maximally mixed, adversary marginal and weight kept.
        let dims = baseline.state.quantum_dims();
        let adv = crate::qmath::measures::partial_trace_matrix(acc_b, dims, &(1..dims.len()).collect::<Vec<_>>());
        let delta = CMatrix::identity(d_dim, d_dim).kronecker(&adv) * c(1.0 / d_dim as f64);
        gamma_vs_delta += trace_norm(&(acc_b - &delta))?;
        m_gamma_vs_m_delta += trace_norm(&(ch.apply_matrix(acc_b) - ch.apply_matrix(&delta)))?;
    }
    Ok(InvarianceReport {
        accept_baseline,
        accept_attacked,
        accept_target,
        discrepancy: (accept_baseline - accept_attacked).abs(),
        commutation,
        monotonicity_slack: m_gamma_vs_m_delta - gamma_vs_delta,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BatteryRow {
    pub case: usize,
    pub x_bits: usize,
    pub d_dim: usize,
    pub e_dim: usize,
    pub reconstruction: f64,
    pub discrepancy: f64,
    pub commutation: f64,
    pub monotonicity_slack: f64,
    /// Largest of the checked discrepancies.
    pub max_discrepancy: f64,
}

/// Random device-uniform targets at the given `(x_bits, D, E)` shapes,
/// decomposed and checked against a random decision channel each.
pub fn run_battery(shapes: &[(usize, usize, usize)], seed: u64) -> Result<Vec<BatteryRow>> {
    let root = SimRng::new(seed);
    shapes
        .par_iter()
        .enumerate()
        .map(|(case, &(x_bits, d_dim, e_dim))| {
            let mut rng = root.fork(case as u64);
            let target = random_device_uniform(x_bits, d_dim, e_dim, &mut rng)?;
            let (baseline, attack) = decompose_via_uhlmann(&target)?;
            let reconstruction = reconstruction_error(&baseline, &attack, &target)?;
            let decision = DecisionChannel::random(1 << x_bits, d_dim, &mut rng)?;
            let r = acceptance_invariance_check(&decision, &baseline, &attack, &target)?;
            Ok(BatteryRow {
                case,
                x_bits,
                d_dim,
                e_dim,
                reconstruction,
                discrepancy: r.discrepancy,
                commutation: r.commutation,
                monotonicity_slack: r.monotonicity_slack,
                max_discrepancy: r.discrepancy.max(r.commutation),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn global_uniform_examples() {
        let phi = DensityOperator::basis(2, DEVICE, 0)
            .unwrap()
            .tensor(&DensityOperator::basis(2, ADVERSARY, 0).unwrap())
            .unwrap();
        let s = make_global_uniform(1, &phi).unwrap();
        assert!(s.is_global_uniform() && s.is_device_uniform());
        assert_eq!(s.state().classical_dim(), 2);
        let mut rng = SimRng::new(1);
        let phi = random::density(&[2, 2], &l(&[DEVICE, ADVERSARY]), 4, &mut rng);
        let s = make_global_uniform(2, &phi).unwrap();
        assert!(s.is_device_uniform() && s.is_global_uniform());
    }

    #[test]
    fn device_uniform_examples() {
        let mut rng = SimRng::new(2);
        let rho_d = random::density(&[2], &l(&[DEVICE]), 2, &mut rng);
        let copy = classical_copy_target(1, &rho_d).unwrap();
        assert!(copy.is_device_uniform() && !copy.is_global_uniform());
        let fam = random_device_uniform(2, 2, 2, &mut rng).unwrap();
        assert!(fam.is_device_uniform());
        let a = random::density(&[2, 2], &l(&[DEVICE, ADVERSARY]), 4, &mut rng);
        let b = random::density(&[2, 2], &l(&[DEVICE, ADVERSARY]), 4, &mut rng);
        let e = make_device_uniform(1, vec![a, b]).unwrap_err().to_string();
        assert!(e.contains("x = 1"), "{e}");
    }

    #[test]
    fn global_uniform_target_needs_no_attack() {
        let mut rng = SimRng::new(3);
        let phi = random::density(&[2, 2], &l(&[DEVICE, ADVERSARY]), 4, &mut rng);
        let target = make_global_uniform(1, &phi).unwrap();
        let (baseline, attack) = decompose_via_uhlmann(&target).unwrap();
        // Discarding E' from the baseline is the identity-equivalent action.
        let discard = KrausChannel::trace_out(
            baseline.state().quantum_dims(),
            baseline.state().quantum_labels(),
            2,
        )
        .unwrap();
        let plain = apply_controlled(&ControlledOperation::uniform(discard, 2).unwrap(), baseline.state()).unwrap();
        let attacked = apply_controlled(&attack, baseline.state()).unwrap();
        assert!(cq_distance(&plain, &attacked).unwrap() <= 1e-6);
        assert!(reconstruction_error(&baseline, &attack, &target).unwrap() <= 1e-6);
    }

    #[test]
    fn classical_copy_round_trip_and_invariance() {
        let mut rng = SimRng::new(4);
        let rho_d = random::density(&[2], &l(&[DEVICE]), 2, &mut rng);
        let target = classical_copy_target(1, &rho_d).unwrap();
        let (baseline, attack) = decompose_via_uhlmann(&target).unwrap();
        assert!(baseline.is_global_uniform());
        assert!(reconstruction_error(&baseline, &attack, &target).unwrap() <= 1e-6);
        let decision = DecisionChannel::random(2, 2, &mut rng).unwrap();
        let r = acceptance_invariance_check(&decision, &baseline, &attack, &target).unwrap();
        assert!(r.discrepancy < 1e-12, "{}", r.discrepancy);
        assert!((r.accept_target - r.accept_attacked).abs() < 1e-9);
        assert!(r.commutation < 1e-9);
        assert!(r.monotonicity_slack <= 1e-9);
    }

    #[test]
    fn invariance_rejects_unrelated_target() {
        let mut rng = SimRng::new(5);
        let a = random_device_uniform(1, 2, 2, &mut rng).unwrap();
        let b = random_device_uniform(1, 2, 2, &mut rng).unwrap();
        let (baseline, attack) = decompose_via_uhlmann(&a).unwrap();
        let decision = DecisionChannel::random(2, 2, &mut rng).unwrap();
        assert!(acceptance_invariance_check(&decision, &baseline, &attack, &b).is_err());
    }

    #[test]
    fn small_battery() {
        let rows = run_battery(&[(1, 2, 2), (2, 2, 2), (1, 3, 2)], 6).unwrap();
        for r in rows {
            assert!(r.reconstruction <= 1e-6 && r.max_discrepancy <= 1e-9, "{r:?}");
            assert!(r.monotonicity_slack <= 1e-9);
        }
    }
}
