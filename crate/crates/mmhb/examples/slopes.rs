//! Implicit regularisation: smaller momentum keeps trajectories in flatter
//! regions, and alternating updates do so more than simultaneous ones.

use mmhb::discrete::{run, HBParams, Scheme};
use mmhb::game::{BuiltinGame, Game};
use mmhb::regularization::{avg_slope, avg_slope_tail};
use nalgebra::dvector;

pub fn example() -> mmhb::Result<()> {
    let betas = [-0.5, -0.3, 0.0, 0.3, 0.5];
    for (game, tail) in [
        (BuiltinGame::NegXY2, None),
        (BuiltinGame::LimitCycle2D, Some(0.5)),
    ] {
        println!("{}:", game.label());
        for scheme in Scheme::BOTH {
            let mut row = Vec::new();
            for beta in betas {
                let p = HBParams::new(0.01, beta, scheme)?;
                let t = run(&game, &p, &dvector![1.0], &dvector![1.0], 20_000)?;
                let r = match tail {
                    Some(f) => avg_slope_tail(&game, &t, f)?,
                    None => avg_slope(&game, &t)?,
                };
                row.push(format!("{:9.3}", r.avg_slope));
            }
            println!("  {scheme}: {}", row.join(" "));
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> mmhb::Result<()> {
    example()
}
