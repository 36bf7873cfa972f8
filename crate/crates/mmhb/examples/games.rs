//! Built-in payoffs, a seeded random quadratic game and its JSON form.

use mmhb::game::{grad, random_quadratic, BuiltinGame, Game, GamePoint, QuadraticGame};
use mmhb::spectral::{check_assumptions, eigenvalues, LocalModel};

pub fn example() -> mmhb::Result<()> {
    let p = GamePoint::from_slices(&[0.5], &[-0.25]);
    for g in [
        BuiltinGame::XY,
        BuiltinGame::NegXY2,
        BuiltinGame::LimitCycle2D,
        BuiltinGame::AppendixA1,
        BuiltinGame::AppendixA2,
        BuiltinGame::example_i1(),
    ] {
        let (gx, gy) = grad(&g, &p)?;
        println!(
            "{:<16} f={:+.5}  grad=({:+.5}, {:+.5})",
            g.label(),
            g.value(&p.x, &p.y),
            gx[0],
            gy[0]
        );
    }

    let q = random_quadratic(6, 6, 3, 3, 0.05, 11)?;
    let model = LocalModel::quadratic(&q);
    let asm = check_assumptions(&model.j(), &model.decomposition())?;
    println!(
        "random 6x6 game: interaction={} generic={}",
        asm.interaction, asm.generic
    );
    for l in eigenvalues(&model.j())?.iter().take(3) {
        println!("  λ = {:+.4} {:+.4}i", l.re, l.im);
    }

    let text = q.to_json()?;
    assert_eq!(QuadraticGame::from_json(&text)?, q);
    println!("JSON round-trip ok ({} bytes)", text.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> mmhb::Result<()> {
    example()
}
