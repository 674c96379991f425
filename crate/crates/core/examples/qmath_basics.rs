//! Distances, fidelity and purification on small random states.

use physrand::qmath::{fidelity, partial_trace, purify, random, trace_distance, uhlmann_unitary, CMatrix};
use physrand::SimRng;

fn main() -> physrand::Result<()> {
    let mut rng = SimRng::new(2024);
    let labels = vec!["A".to_string(), "B".to_string()];
    let rho = random::density(&[2, 2], &labels, 2, &mut rng);
    let sigma = random::density(&[2, 2], &labels, 4, &mut rng);

    let d = trace_distance(&rho, &sigma)?;
    let f = fidelity(&rho, &sigma)?;
    println!("trace distance  {d:.6}");
    println!("fidelity        {f:.6}");
    println!("1 - F <= D/2 <= sqrt(1 - F^2): {:.4} <= {:.4} <= {:.4}", 1.0 - f, d / 2.0, (1.0 - f * f).sqrt());

    let rho_a = partial_trace(&rho, &["A"])?;
    println!("tr_B(rho) =\n{:.4}", rho_a.matrix());

    let psi = purify(&rho, 4)?;
    let phi = purify(&sigma, 4)?;
    let u = uhlmann_unitary(&psi, &phi, 4, 4)?;
    let overlap = psi.dotc(&(CMatrix::identity(4, 4).kronecker(&u) * &phi)).norm();
    println!("|<psi|(I x U)|phi>| = {overlap:.6} (fidelity {f:.6})");
    Ok(())
}
