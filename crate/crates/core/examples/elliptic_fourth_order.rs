//! Right-hand-side candidates of the elliptic fourth-order problem against
//! the discrete bi-Laplacian of the solution.

use btp::exit::{fourth_order_candidates, ito_truncation_check};
use btp::pde::Domain;
use btp::{Builtin, TestFunction};

fn main() -> btp::Result<()> {
    let interval = Domain::interval(-1.0, 1.0)?;
    for f in [Builtin::Square, Builtin::Cube] {
        println!("f = {}", f.name());
        for x in [-0.5, 0.0, 0.5] {
            let c = fourth_order_candidates(&interval, &f, &[x], 0.05)?;
            println!(
                "  x = {x:+.1}: bilaplacian u = {:9.4}  derived = {:9.4}  printed = {:9.4}  4 lap f = {:9.4}",
                c.bilaplacian_u, c.derived, c.printed, c.reduced
            );
        }
    }

    let disk = Domain::centered_ball(1.0, 2)?;
    let c = fourth_order_candidates(&disk, &Builtin::Square, &[0.2, -0.1], 0.05)?;
    println!("disk, f = |y|^2: bilaplacian u = {:.4}, 4 lap f = {:.4}", c.bilaplacian_u, c.reduced);

    let r = ito_truncation_check(&Builtin::Cube, 0.7, &[0.4], 1e-8)?;
    let row = &r.rows[0];
    println!("E f(x + W_t) = {:.12}, f + t lap f / 2 = {:.12}", row.estimate.value, row.theoretical);
    Ok(())
}
