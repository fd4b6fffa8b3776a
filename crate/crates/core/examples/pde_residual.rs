//! Residual of the fourth-order parabolic equation on a space-time grid.

use btp::harness::{exact_solution_residual, residual_halving};
use btp::pde::{parabolic_residual, ResidualOptions, SpaceTimeGrid};
use btp::{Builtin, GeneratorSpec};

fn main() -> btp::Result<()> {
    for order in [2, 4, 6, 8] {
        println!("exact solution, time order {order}: max residual {:.3e}", exact_solution_residual(order)?);
    }

    // A wrong candidate leaves an O(1) residual.
    let grid = SpaceTimeGrid::new(-1.0, 1.0, 0.05, 0.2, 1.0, 0.01)?;
    let wrong = grid.tabulate(|t, x| x * x + t);
    let r = parabolic_residual(&wrong, &grid, &Builtin::Square, &GeneratorSpec::HalfLaplacian, ResidualOptions::default())?;
    println!("u = x^2 + t: max residual {:.3}", r.max_abs());

    let study = residual_halving(&Builtin::Gauss, 0.2)?;
    println!(
        "quadrature-built u for exp(-y^2): residual {:.3e} -> {:.3e}, ratio {:.2}",
        study.coarse,
        study.fine,
        study.ratio()
    );
    Ok(())
}
