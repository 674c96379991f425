//! CHSH win rates for honest, noisy and deterministic device pairs, and the
//! noise distance between two implementations.

use physrand::device::{
    best_deterministic, deterministic_pair, make_chsh_pair, noise_distance_with, play_chsh, quantum_win,
    InputDistribution,
};
use physrand::SimRng;

fn main() -> physrand::Result<()> {
    let uniform = InputDistribution::uniform();
    let rounds = 100_000;
    for eta in [0.0, 0.05, 0.2] {
        let mut imp = make_chsh_pair(eta, 1)?;
        let s = play_chsh(&mut imp, &uniform, rounds, &mut SimRng::new(2));
        println!("honest pair, noise {eta:<4}  win rate {:.4}", s.win_rate);
    }
    let (f, g, w) = best_deterministic(&uniform);
    let mut det = deterministic_pair(f, g);
    let s = play_chsh(&mut det, &uniform, rounds, &mut SimRng::new(3));
    println!("best deterministic {f:?} {g:?}  win rate {:.4} (exact {w})", s.win_rate);
    println!("quantum optimum {:.4}", quantum_win());

    let a = make_chsh_pair(0.0, 4)?;
    let b = make_chsh_pair(0.1, 5)?;
    let v = noise_distance_with(&a, &b, &[uniform], 50_000, 6, None)?;
    println!("noise distance ideal vs 0.1: {:.4}", v.value());
    Ok(())
}
