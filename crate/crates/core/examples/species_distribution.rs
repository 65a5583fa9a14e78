//! Spatial probit model for presence/absence on a square study area, fitted
//! with full-rank spatial effects and with a 36-knot predictive process, then
//! mapped on a coarse grid.
//!
//! `cargo run --release --example species_distribution`

use std::time::Instant;

use autocorr_basis::basis::grid_knots;
use autocorr_basis::corr::Coordinates;
use autocorr_basis::numkernel::RandomStream;
use autocorr_basis::probit::{
    gibbs_fit, posterior_predict, simulate_probit, ProbitRandom, ProbitSpec,
};
use nalgebra::{DMatrix, DVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 200;
    let mut s = RandomStream::new(808);
    let pts: Vec<[f64; 2]> = (0..n)
        .map(|_| [10.0 * s.next_uniform(), 10.0 * s.next_uniform()])
        .collect();
    let coords = Coordinates::from_points(&pts)?;
    // elevation-like covariate increasing to the north-east
    let x = DMatrix::from_fn(n, 2, |i, j| {
        if j == 0 {
            1.0
        } else {
            (pts[i][0] + pts[i][1]) / 10.0 - 1.0
        }
    });
    let y = simulate_probit(
        &coords,
        &x,
        &DVector::from_vec(vec![-0.3, 0.8]),
        1.0,
        2.0,
        &mut s,
    )?;
    println!(
        "{} presences out of {n}",
        y.iter().filter(|&&v| v == 1.0).count()
    );

    let knots = grid_knots(&coords, 36)?;
    for (label, random) in [
        ("full rank", ProbitRandom::FullRank),
        (
            "36-knot predictive process",
            ProbitRandom::PredictiveProcess { knots },
        ),
    ] {
        let spec = ProbitSpec::new(&y, x.clone(), coords.clone(), random)?
            .with_x_names(vec!["intercept".into(), "elevation".into()])?;
        let start = Instant::now();
        let samples = gibbs_fit(&spec, 3_000, 1_000, 1)?;
        let summary = samples.summary();
        println!("\n{label} ({:.1} s)", start.elapsed().as_secs_f64());
        for (name, b) in spec.x_names().iter().zip(&summary.beta) {
            println!(
                "  {name:<10} mean {:+.3}  sd {:.3}  mcse {:.3}",
                b.mean, b.sd, b.mcse
            );
        }
        println!("  sigma2     mean {:.3}", summary.sigma2_alpha.mean);
        println!("  phi        mean {:.3}", summary.phi.mean);

        let side = 6;
        let grid: Vec<[f64; 2]> = (0..side * side)
            .map(|k| {
                [
                    0.5 + 9.0 * (k % side) as f64 / (side - 1) as f64,
                    9.5 - 9.0 * (k / side) as f64 / (side - 1) as f64,
                ]
            })
            .collect();
        let gx = DMatrix::from_fn(grid.len(), 2, |i, j| {
            if j == 0 {
                1.0
            } else {
                (grid[i][0] + grid[i][1]) / 10.0 - 1.0
            }
        });
        let p = posterior_predict(&samples, &spec, &Coordinates::from_points(&grid)?, &gx)?;
        println!("  occurrence probability (north at top):");
        for row in 0..side {
            let cells: Vec<String> = (0..side)
                .map(|c| format!("{:.2}", p[row * side + c]))
                .collect();
            println!("    {}", cells.join(" "));
        }
    }
    Ok(())
}
