//! Annual counts with a declining trend and autocorrelated year effects.
//! Compares the trend interval with and without the AR(1) term, then checks
//! the residual autocorrelation and the collinearity between the implied
//! eigen basis and the year covariate.
//!
//! `cargo run --example population_trend`

use autocorr_basis::corr::{Coordinates, CorrelationModel, Family};
use autocorr_basis::diagnose::{default_max_lag, diagnose};
use autocorr_basis::lmm::{
    fit_ml, simulate_lmm, wald_ci, Estimation, LmmSpec, RandomEffect, Theta,
};
use autocorr_basis::numkernel::RandomStream;
use nalgebra::{DMatrix, DVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let years: Vec<f64> = (1..=43).map(f64::from).collect();
    let n = years.len();
    let coords = Coordinates::from_1d(&years)?;
    let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { years[i] });
    let names = vec!["intercept".to_string(), "year".to_string()];

    let mut s = RandomStream::new(43);
    let y = simulate_lmm(
        &x,
        &DVector::from_vec(vec![20.0, -0.2]),
        &coords,
        &CorrelationModel::new(Family::Ar1, 0.7)?,
        &Theta::new(0.1, 2.0, 0.7),
        &mut s,
    )?;

    for (label, random) in [
        ("independent errors", RandomEffect::None),
        ("AR(1)", RandomEffect::SecondOrder(Family::Ar1)),
    ] {
        let spec = LmmSpec::new(x.clone(), names.clone(), coords.clone(), random)?
            .with_estimation(Estimation::Reml);
        let fit = fit_ml(&y, &spec)?;
        let (lo, hi) = wald_ci(&fit, 1, 0.95)?;
        println!(
            "{label:<20} slope {:+.4}  95% CI [{lo:+.4}, {hi:+.4}]  width {:.4}",
            fit.beta[1],
            hi - lo
        );
        if let Ok(report) = diagnose(&fit, default_max_lag(n)) {
            let acf: Vec<String> = report
                .fixed_residual_acf
                .iter()
                .skip(1)
                .take(4)
                .map(|v| format!("{v:+.2}"))
                .collect();
            println!(
                "{:<20} ACF of y - X beta at lags 1-4: {}",
                "",
                acf.join(" ")
            );
            if let Some((col, _, r2)) = report.max_collinearity {
                println!(
                    "{:<20} eigen column {} explains R^2 = {r2:.2} of year",
                    "",
                    col + 1
                );
            }
            println!("{:<20} condition number {:.1}", "", report.condition_number);
        }
    }
    Ok(())
}
