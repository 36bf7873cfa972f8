//! Discrete heavy ball against its continuous models: the O(h³) modified
//! flow, the O(h²) baseline and the n-indexed transient field.

use mmhb::continuous::{
    field_alt, field_sim, gamma_n, one_step_deviation, warmup_steps, TransientConvention,
};
use mmhb::discrete::{HBParams, Scheme};
use mmhb::experiments::compare_models;
use mmhb::game::{BuiltinGame, GamePoint};

pub fn example() -> mmhb::Result<()> {
    let game = BuiltinGame::AppendixA2;
    let start = GamePoint::from_slices(&[0.5], &[0.5]);

    let p = HBParams::new(0.01, -0.5, Scheme::Simultaneous)?;
    let (fs, fa) = (field_sim(&game, &p, &start), field_alt(&game, &p, &start));
    println!(
        "sim field {:+.5?}  alt field {:+.5?}",
        (fs.x[0], fs.y[0]),
        (fa.x[0], fa.y[0])
    );
    println!(
        "γ_n at β=-0.5: n=0 {:.4}, n=10 {:.4}, limit {:.4}; leading coeff n=3 (proof) {:.5}",
        gamma_n(-0.5, 0),
        gamma_n(-0.5, 10),
        (1.0 + -0.5) / (1.0 - -0.5),
        TransientConvention::Proof.leading(-0.5, 3)
    );

    // local error: ~h³, so halving h cuts it roughly eightfold
    for h in [4e-3, 2e-3, 1e-3] {
        let p = HBParams::new(h, -0.5, Scheme::Simultaneous)?;
        let d = one_step_deviation(&game, &p, &start, 10)?;
        println!("h={h:.0e}: one-step deviation {d:.3e}");
    }

    for scheme in Scheme::BOTH {
        let p = HBParams::new(1e-3, -0.5, scheme)?;
        let d = compare_models(&game, &p, &start, 10_000, false, 10)?;
        println!(
            "{scheme}: warm-up {} steps, terminal distance O(h³) {:.2e} vs O(h²) {:.2e}",
            warmup_steps(1e-3, -0.5),
            d.terminal_o3(),
            d.terminal_o2()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> mmhb::Result<()> {
    example()
}
