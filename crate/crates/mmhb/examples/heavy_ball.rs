//! Sim-HB diverges on a bilinear game for every (h, β); Alt-HB with negative
//! momentum converges.

use mmhb::discrete::{run, HBParams, HeavyBall, Scheme};
use mmhb::game::{BuiltinGame, GamePoint};
use nalgebra::dvector;

pub fn example() -> mmhb::Result<()> {
    let game = BuiltinGame::XY;
    for beta in [-0.5, 0.0, 0.5] {
        for scheme in Scheme::BOTH {
            let p = HBParams::new(0.1, beta, scheme)?;
            let t = run(&game, &p, &dvector![1.0], &dvector![1.0], 5000)?;
            println!(
                "β={beta:+.1} {scheme}: ‖z‖ after {} steps = {:.3e}{}",
                t.states[t.len() - 1].index,
                t.last().norm(),
                if t.diverged() { " (diverged)" } else { "" }
            );
        }
    }

    // stepping by hand
    let p = HBParams::new(0.1, -0.5, Scheme::Alternating)?;
    let mut hb = HeavyBall::new(&game, p, GamePoint::from_slices(&[1.0], &[1.0]))?;
    for _ in 0..3 {
        let z = hb.advance()?.clone();
        println!("k={} x={:+.5} y={:+.5}", hb.index(), z.x[0], z.y[0]);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> mmhb::Result<()> {
    example()
}
