//! Optimal momentum for Sim-HB: the per-eigenvalue closed form against a grid
//! search over β. Small steps favour positive momentum.

use mmhb::game::random_quadratic;
use mmhb::spectral::{optimal_beta, LocalModel};

pub fn example() -> mmhb::Result<()> {
    let q = random_quadratic(20, 20, 10, 10, 0.01, 1)?;
    let j = LocalModel::quadratic(&q).j();
    for h in [1e-4, 2.7e-4, 1e-3, 5e-3] {
        let o = optimal_beta(&j, h)?;
        println!(
            "h={h:.1e}: grid β*={:+.3} (abscissa {:.4e}), binding eigenvalue β*={:+.4}{}",
            o.global,
            o.global_abscissa,
            o.binding.1,
            if o.binding_is_unique() {
                ""
            } else {
                " (not unique)"
            }
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> mmhb::Result<()> {
    example()
}
