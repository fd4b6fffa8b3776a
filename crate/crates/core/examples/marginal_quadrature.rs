//! One-time marginals by quadrature against closed forms and Monte Carlo.

use btp::harness::btbm_marginal_closed_form;
use btp::kernels::{btp_marginal, heat_kernel, reflected_kernel};
use btp::quadrature::QuadratureSettings;
use btp::{Builtin, Seed};
use btp::compose::BtpSampler;
use btp::stats::mean;
use btp::{TestFunction, TimeGrid};

fn main() -> btp::Result<()> {
    println!("heat kernel p(0,1;0,0) = {:.10}", heat_kernel(0.0, 1.0, &[0.0], &[0.0])?);
    println!("reflected kernel p(0,1; 0, 0.5) = {:.10}", reflected_kernel(0.0, 1.0, 0.0, 0.5)?);

    let settings = QuadratureSettings::default();
    for f in [Builtin::Square, Builtin::Cube, Builtin::Cosine, Builtin::Gauss] {
        let x = [0.3];
        let quad = btp_marginal(&f, &x, 1.0, &settings)?;
        let exact = btbm_marginal_closed_form(&f, &x, 1.0);
        match exact {
            Some(e) => println!("{:>8}: quadrature {quad:.12}  closed form {e:.12}", f.name()),
            None => println!("{:>8}: quadrature {quad:.12}", f.name()),
        }
    }

    let sampler = BtpSampler::brownian(vec![0.0], TimeGrid::uniform(1.0, 16)?);
    let v: Vec<f64> = (0..50_000)
        .map(|i| sampler.btp(Seed::new(5).derive(i)).map(|c| c.path.terminal()[0].powi(2)))
        .collect::<btp::Result<_>>()?;
    println!("Monte Carlo E X(1)^2 = {:.4}  vs sqrt(2/pi) = {:.4}", mean(&v), (2.0 / std::f64::consts::PI).sqrt());
    Ok(())
}
