//! Eigen basis of an AR(1) correlation matrix and how many columns it takes
//! to reproduce the matrix.
//!
//! `cargo run --example eigen_decomposition`

use autocorr_basis::basis::{eigen_basis, gram, ColumnKind};
use autocorr_basis::corr::{corr_matrix, Coordinates, CorrelationModel, Family};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t = Coordinates::from_1d(&[1.0, 2.0, 3.0])?;
    let r = corr_matrix(&t, &CorrelationModel::new(Family::Ar1, 0.5)?);
    println!("R =\n{}", r.matrix());

    let z = eigen_basis(&r)?;
    println!("Z = Q Lambda^(1/2) =\n{}", z.matrix());
    for (j, c) in z.columns().iter().enumerate() {
        if let ColumnKind::Eigen { eigenvalue } = c {
            println!("column {}: eigenvalue {eigenvalue:.4}", j + 1);
        }
    }
    let diff = (gram(&z).matrix() - r.matrix()).amax();
    println!("max |ZZ' - R| = {diff:.2e}");

    // a longer, strongly correlated series is captured by a few columns
    let t = Coordinates::from_1d(&(1..=40).map(f64::from).collect::<Vec<_>>())?;
    let r = corr_matrix(&t, &CorrelationModel::new(Family::Ar1, 0.9)?);
    let z = eigen_basis(&r)?;
    for k in [1, 5, 10, 20, 40] {
        let err = (gram(&z.truncate(k)?).matrix() - r.matrix()).amax();
        println!("n = 40, leading {k:>2} columns: max reconstruction error {err:.3}");
    }
    Ok(())
}
