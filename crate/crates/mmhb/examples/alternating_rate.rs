//! Alternating vs simultaneous updates: the first-order prediction of the
//! J_A spectrum, and a discrete rate race on a 100-dimensional game.

use mmhb::experiments::{rate_race, Context, GameInstance, InitSpec, RateMode};
use mmhb::game::{random_quadratic, Matrix, QuadraticGame};
use mmhb::spectral::{alt_rate_prediction, spectral_abscissa, LocalModel};

pub fn example() -> mmhb::Result<()> {
    let a = 0.05;
    let q = QuadraticGame::new(
        Matrix::from_element(1, 1, a),
        Matrix::from_element(1, 1, -a),
        Matrix::from_element(1, 1, 1.0),
    )?;
    for h in [1e-3, 5e-4, 2.5e-4] {
        let pred = alt_rate_prediction(&q, h, 0.4)?;
        let exact = spectral_abscissa(&LocalModel::quadratic(&q).ja(h, 0.4))?;
        println!(
            "2D h={h:.2e}: exact {exact:.8}, predicted {:.8}, literal {:.8}",
            pred.predicted_abscissa, pred.predicted_abscissa_literal
        );
    }

    let game = GameInstance::Quadratic(random_quadratic(100, 100, 90, 90, 0.5, 1)?);
    let start = InitSpec::Random {
        seed: Some(1),
        scale: 1.0,
    }
    .build(&game, &Context::default())?;
    let r = rate_race(&game, 0.01, 0.4, &start, 3000, &RateMode::Discrete, 10)?;
    println!(
        "100-dim race: fitted rate sim {:.3} alt {:.3}; spectral sim {:.3} alt {:.3}",
        r.rate_sim.unwrap_or(f64::NAN),
        r.rate_alt.unwrap_or(f64::NAN),
        r.spectral_rate_sim.unwrap_or(f64::NAN),
        r.spectral_rate_alt.unwrap_or(f64::NAN)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> mmhb::Result<()> {
    example()
}
