//! Kriging a noisy 1-D profile three ways: the Gaussian correlation model,
//! a Gaussian kernel basis at a handful of knots and a dense one.
//!
//! `cargo run --example kriging`

use autocorr_basis::basis::grid_knots;
use autocorr_basis::corr::{Coordinates, Family};
use autocorr_basis::lmm::{fit_ml, predict, FirstOrderBasis, LmmSpec, RandomEffect};
use autocorr_basis::numkernel::RandomStream;
use nalgebra::{DMatrix, DVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // light intensity against depth: two peaks plus measurement noise
    let n = 60;
    let depth: Vec<f64> = (0..n).map(|i| 10.0 * i as f64 / (n - 1) as f64).collect();
    let mut s = RandomStream::new(5);
    let y = DVector::from_fn(n, |i, _| {
        depth[i].sin() + 0.5 * (0.7 * depth[i]).cos() + 0.2 * s.next_gaussian()
    });
    let coords = Coordinates::from_1d(&depth)?;
    let x = DMatrix::from_element(n, 1, 1.0);

    let new_depth: Vec<f64> = (0..=8).map(|k| 0.6 + 1.1 * k as f64).collect();
    let new_coords = Coordinates::from_1d(&new_depth)?;
    let new_x = DMatrix::from_element(new_depth.len(), 1, 1.0);

    let mut models = vec![(
        "gaussian correlation".to_string(),
        RandomEffect::SecondOrder(Family::Gaussian),
    )];
    for m in [5, 17] {
        let knots = grid_knots(&coords, m)?;
        models.push((
            format!("{m} gaussian kernels"),
            RandomEffect::FirstOrder(FirstOrderBasis::GaussianKernel { knots }),
        ));
    }

    print!("{:<22}", "depth");
    for d in &new_depth {
        print!("{d:>7.2}");
    }
    println!();
    print!("{:<22}", "truth");
    for d in &new_depth {
        print!("{:>7.3}", d.sin() + 0.5 * (0.7 * d).cos());
    }
    println!();
    for (name, random) in models {
        let spec = LmmSpec::new(x.clone(), vec!["intercept".into()], coords.clone(), random)?;
        let fit = fit_ml(&y, &spec)?;
        let p = predict(&fit, &new_coords, &new_x)?;
        print!("{name:<22}");
        for v in p.iter() {
            print!("{v:>7.3}");
        }
        println!("   (phi {:.3}, loglik {:.2})", fit.phi, fit.loglik);
    }
    Ok(())
}
