//! Local stability of Sim-HB: the Theorem 4.1 step-size bound, the bilinear
//! closed forms and an (h, β) heatmap of the spectral abscissa of J_S.

use mmhb::discrete::Scheme;
use mmhb::game::random_quadratic;
use mmhb::spectral::{
    bilinear_eigs, hmax_bound, min_hb_stability, spectral_abscissa, stability_heatmap, LocalModel,
};

pub fn example() -> mmhb::Result<()> {
    for scheme in Scheme::BOTH {
        let (a, b) = bilinear_eigs(1.0, 0.1, -0.5, scheme);
        println!("bilinear ρ=1 h=0.1 β=-0.5 {scheme}: {a:.5} / {b:.5}");
    }

    let q = random_quadratic(20, 20, 10, 10, 0.01, 1)?;
    let model = LocalModel::quadratic(&q);
    let j = model.j();
    for beta in [-0.5, 0.0, 0.5] {
        let hmax = hmax_bound(&j, beta)?;
        let inside = spectral_abscissa(&model.js(0.9 * hmax, beta))?;
        println!("β={beta:+.1}: hmax={hmax:.4e}, abscissa at 0.9·hmax = {inside:.3e}");
    }

    let hs: Vec<f64> = (1..=8).map(|k| k as f64 * 1.5e-3).collect();
    let betas = [-0.6, -0.3, 0.0, 0.3, 0.6];
    let cells = stability_heatmap(&model, &hs, &betas, Scheme::Simultaneous)?;
    println!("stable cells ('.') vs divergent ('#'), h across, β down:");
    for row in cells.chunks(hs.len()) {
        let s: String = row
            .iter()
            .map(|c| if c.abscissa < 0.0 { '.' } else { '#' })
            .collect();
        println!("  β={:+.1} {s}", row[0].beta);
    }

    // minimisation contrast: larger momentum widens the stable range
    println!(
        "min-HB with αλ=2.5: β=0.1 stable={}, β=0.5 stable={}",
        min_hb_stability(2.5, 0.1, 1.0),
        min_hb_stability(2.5, 0.5, 1.0)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> mmhb::Result<()> {
    example()
}
