//! Two parameterizations of a quadratic depth profile: powers of depth and
//! quadratics centred at knots. The coefficients differ, the fitted curve
//! does not.
//!
//! `cargo run --example polynomial_bases`

use autocorr_basis::basis::{polynomial_basis, shifted_quadratic_basis};
use autocorr_basis::diagnose::max_pairwise_r2;
use autocorr_basis::lmm::ols;
use autocorr_basis::numkernel::RandomStream;
use nalgebra::DVector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let depth: Vec<f64> = (0..51).map(|i| 500.0 + 90.0 * i as f64).collect();
    let mut s = RandomStream::new(17);
    let y = DVector::from_fn(51, |i, _| {
        let d = depth[i] / 1000.0;
        40.0 * (-0.5 * (d - 1.5).powi(2)).exp() + 2.0 + s.next_gaussian()
    });

    let powers = polynomial_basis(&depth, 2)?;
    let shifted = shifted_quadratic_basis(&depth, &[1140.0, 2620.0, 3420.0])?;
    let a = ols(powers.matrix(), &y)?;
    let b = ols(shifted.matrix(), &y)?;
    println!("power coefficients:   {:?}", a.beta.as_slice());
    println!("shifted coefficients: {:?}", b.beta.as_slice());
    println!(
        "max fitted difference {:.2e}",
        (&a.fitted - &b.fitted).amax()
    );

    for (name, basis) in [("powers", &powers), ("shifted", &shifted)] {
        let r2 = max_pairwise_r2(basis)?;
        println!(
            "{name}: largest pairwise R^2 between columns {:.4} at {:?}",
            r2.max, r2.pair
        );
    }
    Ok(())
}
