//! Half-derivative generator by quadrature and by Monte Carlo difference
//! quotients.

use btp::halfgen::{halfgen_mc, halfgen_quadrature, reversed_generator, HalfGenQuery};
use btp::quadrature::QuadratureSettings;
use btp::{Builtin, Seed, TestFunction};

fn main() -> btp::Result<()> {
    let settings = QuadratureSettings::default();
    println!("reversed generator, f = y, y = 2, xi = 1, x0 = 0: {}", reversed_generator(&Builtin::Linear, 2.0, 1.0, 0.0)?);
    for (f, xi) in [(Builtin::Square, 0.0), (Builtin::Linear, 1.0), (Builtin::Square, 1.0)] {
        let q = HalfGenQuery { s: 1.0, xi, x0: 0.0, f: &f };
        let quad = halfgen_quadrature(&q, &settings)?;
        let mc = halfgen_mc(&q, &[0.01, 0.005, 0.0025, 0.00125], 400_000, 0.05, Seed::new(3))?;
        println!(
            "f = {:<6} xi = {xi}: quadrature {quad:+.6}  Monte Carlo {:+.4} +/- {:.4} (delta^{} extrapolation)",
            f.name(),
            mc.estimate.value,
            mc.estimate.stderr,
            mc.exponent
        );
    }
    Ok(())
}
