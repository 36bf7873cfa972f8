//! Adam with a negative first-moment coefficient on a game with limit cycles.

use mmhb::discrete::{run_adam, AdamParams, Scheme};
use mmhb::game::BuiltinGame;
use nalgebra::dvector;

pub fn example() -> mmhb::Result<()> {
    let game = BuiltinGame::LimitCycle2D;
    for beta1 in [-0.5, 0.0, 0.5] {
        for scheme in Scheme::BOTH {
            let a = AdamParams::new(1e-3, beta1, 0.999, 1e-8)?;
            let t = run_adam(&game, &a, scheme, &dvector![1.0], &dvector![1.0], 20_000)?;
            let peak = t.points().map(|p| p.max_abs()).fold(0.0, f64::max);
            println!(
                "β₁={beta1:+.1} {scheme}: max |coord| {peak:.3}, final ‖z‖ {:.4}",
                t.last().norm()
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> mmhb::Result<()> {
    example()
}
