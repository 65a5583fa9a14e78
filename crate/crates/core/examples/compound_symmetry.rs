//! Group indicators as a basis: ZZ' is block diagonal, the compound-symmetric
//! correlation of a random intercept model. Fitting the indicator basis
//! estimates the between-group variance.
//!
//! `cargo run --example compound_symmetry`

use autocorr_basis::basis::{gram, grouping_basis};
use autocorr_basis::corr::Coordinates;
use autocorr_basis::lmm::{blup_alpha, fit_ml, FirstOrderBasis, LmmSpec, RandomEffect};
use autocorr_basis::numkernel::RandomStream;
use nalgebra::{DMatrix, DVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let z = grouping_basis(&["a", "a", "b", "b", "c", "c"])?;
    println!(
        "ZZ' for six observations in three groups:\n{}",
        gram(&z).matrix()
    );

    // 12 plots with 8 observations each, plot effects with variance 4
    let (groups, per) = (12, 8);
    let n = groups * per;
    let mut s = RandomStream::new(3);
    let effects: Vec<f64> = (0..groups).map(|_| 2.0 * s.next_gaussian()).collect();
    let labels: Vec<String> = (0..n).map(|i| format!("plot{:02}", i / per)).collect();
    let y = DVector::from_fn(n, |i, _| 10.0 + effects[i / per] + s.next_gaussian());

    let basis = grouping_basis(&labels)?;
    let coords = Coordinates::from_1d(&(0..n).map(|i| i as f64).collect::<Vec<_>>())?;
    let spec = LmmSpec::new(
        DMatrix::from_element(n, 1, 1.0),
        vec!["intercept".into()],
        coords,
        RandomEffect::FirstOrder(FirstOrderBasis::Fixed(basis)),
    )?;
    let fit = fit_ml(&y, &spec)?;
    println!(
        "intercept {:.3}, between-plot variance {:.3}, residual variance {:.3}",
        fit.beta[0], fit.sigma2_alpha, fit.sigma2_eps
    );
    let alpha = blup_alpha(&fit)?;
    for g in 0..4 {
        println!(
            "plot{g:02}: true effect {:+.3}, BLUP {:+.3}",
            effects[g], alpha[g]
        );
    }
    Ok(())
}
