//! Residual autocorrelation and basis/covariate collinearity diagnostics.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::basis::{eigen_basis, BasisExpansion};
use crate::corr::{corr_matrix, CorrelationModel};
use crate::error::{Error, Result};
use crate::lmm::{LmmFit, RandomEffect};
use crate::numkernel::SpdFactor;

/// Sample autocorrelation at lags `0..=max_lag` with the biased (1/n) normalization.
pub fn residual_acf(residuals: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = residuals.len();
    if n < 2 || 2 * max_lag >= n {
        return Err(Error::InvalidInput(format!(
            "max_lag must be below n / 2 (n = {n}, max_lag = {max_lag})"
        )));
    }
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = residuals.iter().map(|r| r - mean).collect();
    let c0: f64 = centered.iter().map(|v| v * v).sum();
    if zero_variance(c0, residuals) {
        return Err(Error::UndefinedAcf);
    }
    let mut acf = Vec::with_capacity(max_lag + 1);
    acf.push(1.0);
    for lag in 1..=max_lag {
        let ck: f64 = centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum();
        acf.push(ck / c0);
    }
    Ok(acf)
}

fn zero_variance(centered_ss: f64, raw: &[f64]) -> bool {
    let raw_ss: f64 = raw.iter().map(|v| v * v).sum();
    centered_ss <= 1e-24 * raw_ss || centered_ss == 0.0
}

struct Centered {
    values: Vec<f64>,
    ss: f64,
}

fn center(col: impl Iterator<Item = f64>) -> Option<Centered> {
    let raw: Vec<f64> = col.collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let values: Vec<f64> = raw.iter().map(|v| v - mean).collect();
    let ss = values.iter().map(|v| v * v).sum();
    if zero_variance(ss, &raw) {
        None
    } else {
        Some(Centered { values, ss })
    }
}

fn r2(a: &Centered, b: &Centered) -> f64 {
    let cross: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    (cross * cross / (a.ss * b.ss)).clamp(0.0, 1.0)
}

/// Pairwise R² between each basis column (rows) and each covariate (columns).
///
/// Entries involving a zero-variance column are `None`.
#[derive(Debug, Clone, Serialize)]
pub struct R2Matrix {
    pub values: Vec<Vec<Option<f64>>>,
}

impl R2Matrix {
    /// Largest entry as `(basis column, covariate column, R²)`.
    pub fn max_entry(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (j, row) in self.values.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                if let Some(v) = *v {
                    if best.is_none_or(|b| v > b.2) {
                        best = Some((j, k, v));
                    }
                }
            }
        }
        best
    }
}

pub fn collinearity_r2(z: &BasisExpansion, x: &DMatrix<f64>) -> Result<R2Matrix> {
    if z.nrows() != x.nrows() {
        return Err(Error::InvalidInput(format!(
            "basis has {} rows, covariates have {}",
            z.nrows(),
            x.nrows()
        )));
    }
    let covs: Vec<Option<Centered>> = x.column_iter().map(|c| center(c.iter().copied())).collect();
    let values = z
        .matrix()
        .column_iter()
        .map(|zc| {
            let zc = center(zc.iter().copied());
            covs.iter()
                .map(|xc| match (&zc, xc) {
                    (Some(a), Some(b)) => Some(r2(a, b)),
                    _ => None,
                })
                .collect()
        })
        .collect();
    Ok(R2Matrix { values })
}

#[derive(Debug, Clone, Serialize)]
pub struct PairwiseR2 {
    pub max: f64,
    pub pair: (usize, usize),
    /// Zero-variance columns left out of the comparison.
    pub excluded: Vec<usize>,
}

/// Largest squared correlation between any two basis columns.
pub fn max_pairwise_r2(z: &BasisExpansion) -> Result<PairwiseR2> {
    if z.ncols() < 2 {
        return Err(Error::InvalidInput(
            "need at least two basis columns".into(),
        ));
    }
    let cols: Vec<Option<Centered>> = z
        .matrix()
        .column_iter()
        .map(|c| center(c.iter().copied()))
        .collect();
    let excluded: Vec<usize> = cols
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_none())
        .map(|(j, _)| j)
        .collect();
    let mut best: Option<(f64, (usize, usize))> = None;
    for a in 0..cols.len() {
        for b in (a + 1)..cols.len() {
            if let (Some(ca), Some(cb)) = (&cols[a], &cols[b]) {
                let v = r2(ca, cb);
                if best.is_none_or(|(m, _)| v > m) {
                    best = Some((v, (a, b)));
                }
            }
        }
    }
    let (max, pair) = best.ok_or_else(|| {
        Error::InvalidInput("fewer than two basis columns have non-zero variance".into())
    })?;
    Ok(PairwiseR2 {
        max,
        pair,
        excluded,
    })
}

/// 2-norm condition number of the column-normalized design `[X Z]`.
///
/// Zero columns are dropped; more columns than rows gives infinity.
pub fn condition_number(x: &DMatrix<f64>, z: Option<&DMatrix<f64>>) -> f64 {
    let n = x.nrows();
    let mut cols: Vec<DVector<f64>> = x.column_iter().map(|c| c.into_owned()).collect();
    if let Some(z) = z {
        cols.extend(z.column_iter().map(|c| c.into_owned()));
    }
    let cols: Vec<DVector<f64>> = cols
        .into_iter()
        .filter_map(|c| {
            let norm = c.norm();
            (norm > 0.0).then(|| c / norm)
        })
        .collect();
    if cols.is_empty() {
        return f64::NAN;
    }
    if cols.len() > n {
        return f64::INFINITY;
    }
    let design = DMatrix::from_columns(&cols);
    let sv = design.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if lo <= f64::EPSILON * hi {
        f64::INFINITY
    } else {
        hi / lo
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    /// Autocorrelation of `y - X beta_hat - eta_hat`, indexed by lag.
    pub residual_acf: Vec<f64>,
    /// Autocorrelation of the fixed-effect-only residuals `y - X beta_hat`.
    pub fixed_residual_acf: Vec<f64>,
    /// R² between each basis column and each covariate. Second-order fits
    /// use the eigen basis of `R(phi_hat)`, exposing collinearity that the
    /// correlation matrix otherwise hides.
    pub collinearity_r2: Option<R2Matrix>,
    /// `(basis column, covariate column, R²)` of the largest entry above.
    pub max_collinearity: Option<(usize, usize, f64)>,
    pub max_pairwise_basis_r2: Option<f64>,
    /// Condition number of `[X Z]` when it has no more columns than rows,
    /// otherwise of the GLS-whitened design `L^{-1} X` with `Sigma_hat = L L'`.
    pub condition_number: f64,
}

/// Default ACF horizon: ten lags or just under half the series.
pub fn default_max_lag(n: usize) -> usize {
    10.min(n.saturating_sub(1) / 2)
}

pub fn diagnose(fit: &LmmFit, max_lag: usize) -> Result<DiagnosticsReport> {
    let spec = fit.spec();
    let basis = match spec.random() {
        RandomEffect::None => None,
        RandomEffect::SecondOrder(f) => Some(eigen_basis(&corr_matrix(
            spec.coords(),
            &CorrelationModel::new(*f, fit.phi)?,
        ))?),
        RandomEffect::FirstOrder(_) => spec.basis_at(fit.phi)?,
    };
    let resid = fit.residuals()?;
    let fixed_resid = fit.response() - fit.fixed_part();
    let acf_or_flat = |r: &DVector<f64>| match residual_acf(r.as_slice(), max_lag) {
        Err(Error::UndefinedAcf) => Ok(vec![]),
        other => other,
    };
    let collinearity = basis
        .as_ref()
        .map(|z| collinearity_r2(z, spec.x()))
        .transpose()?;
    let max_collinearity = collinearity.as_ref().and_then(R2Matrix::max_entry);
    let max_pairwise = basis
        .as_ref()
        .filter(|z| z.ncols() >= 2)
        .and_then(|z| max_pairwise_r2(z).ok())
        .map(|p| p.max);
    let p = spec.x().ncols();
    let condition = match &basis {
        Some(z) if z.ncols() + p > spec.n() => {
            let sigma = spec.marginal_covariance(&fit.theta())?;
            let l = SpdFactor::new(&sigma, "marginal covariance")?;
            condition_number(&l.whiten(spec.x()), None)
        }
        other => condition_number(spec.x(), other.as_ref().map(|b| b.matrix())),
    };
    Ok(DiagnosticsReport {
        residual_acf: acf_or_flat(&resid)?,
        fixed_residual_acf: acf_or_flat(&fixed_resid)?,
        collinearity_r2: collinearity,
        max_collinearity,
        max_pairwise_basis_r2: max_pairwise,
        condition_number: condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{eigen_basis, polynomial_basis};
    use crate::corr::{Coordinates, Family};
    use crate::numkernel::RandomStream;
    use proptest::prelude::*;

    #[test]
    fn white_noise_within_band() {
        let mut s = RandomStream::new(99);
        let n = 400;
        let r: Vec<f64> = (0..n).map(|_| s.next_gaussian()).collect();
        let acf = residual_acf(&r, 20).unwrap();
        let band = 2.0 / (n as f64).sqrt();
        let inside = acf[1..].iter().filter(|a| a.abs() < band).count();
        assert!(inside as f64 >= 0.9 * 20.0);
    }

    #[test]
    fn alternating_sequence() {
        let r: Vec<f64> = (0..200)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let acf = residual_acf(&r, 3).unwrap();
        assert!((acf[1] + 1.0).abs() < 0.01);
    }

    #[test]
    fn ar1_simulation() {
        let mut s = RandomStream::new(5);
        let mut r = vec![0.0; 500];
        r[0] = s.next_gaussian() / (1.0f64 - 0.64).sqrt();
        for i in 1..500 {
            r[i] = 0.8 * r[i - 1] + s.next_gaussian();
        }
        let acf = residual_acf(&r, 5).unwrap();
        assert!((acf[1] - 0.8).abs() < 0.15);
    }

    #[test]
    fn acf_errors() {
        assert!(matches!(
            residual_acf(&[2.0; 10], 2),
            Err(Error::UndefinedAcf)
        ));
        assert!(residual_acf(&[1.0, 2.0, 3.0, 4.0], 2).is_err());
    }

    #[test]
    fn identical_and_orthogonal_columns() {
        let v = [1.0, 3.0, 2.0, 5.0, 4.0];
        let z = BasisExpansion::from_matrix(
            DMatrix::from_row_slice(5, 1, &v),
            vec![crate::basis::ColumnKind::PolynomialPower { power: 1 }],
        )
        .unwrap();
        let x = DMatrix::from_fn(5, 2, |i, j| if j == 0 { 1.0 } else { v[i] });
        let m = collinearity_r2(&z, &x).unwrap();
        assert_eq!(m.values[0][0], None);
        assert!((m.values[0][1].unwrap() - 1.0).abs() < 1e-12);

        let a = [1.0, -1.0, 1.0, -1.0];
        let b = [1.0, 1.0, -1.0, -1.0];
        let z = BasisExpansion::from_matrix(
            DMatrix::from_row_slice(4, 1, &a),
            vec![crate::basis::ColumnKind::PolynomialPower { power: 1 }],
        )
        .unwrap();
        let m = collinearity_r2(&z, &DMatrix::from_row_slice(4, 1, &b)).unwrap();
        assert!(m.values[0][0].unwrap() < 1e-12);
    }

    #[test]
    fn pairwise_on_eigen_duplicate_and_polynomial() {
        let t = Coordinates::from_1d(&(1..=10).map(f64::from).collect::<Vec<_>>()).unwrap();
        let e = eigen_basis(&corr_matrix(
            &t,
            &CorrelationModel::new(Family::Ar1, 0.6).unwrap(),
        ))
        .unwrap();
        // eigenvectors are orthogonal but not mean-zero, so correlations are small rather than zero
        let p = max_pairwise_r2(&e).unwrap();
        assert!(p.max <= 1.0);

        let dup = BasisExpansion::from_matrix(
            DMatrix::from_fn(6, 2, |i, _| (i * i) as f64),
            vec![
                crate::basis::ColumnKind::PolynomialPower { power: 2 },
                crate::basis::ColumnKind::PolynomialPower { power: 2 },
            ],
        )
        .unwrap();
        assert!((max_pairwise_r2(&dup).unwrap().max - 1.0).abs() < 1e-12);

        let x: Vec<f64> = (0..21).map(|i| -1.0 + i as f64 * 0.1).collect();
        let poly = polynomial_basis(&x, 2).unwrap();
        let p = max_pairwise_r2(&poly).unwrap();
        assert_eq!(p.excluded, vec![0]);
        assert_eq!(p.pair, (1, 2));
        // direct correlation oracle between x and x^2
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
        let mx2 = x2.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(&x2).map(|(a, b)| (a - mx) * (b - mx2)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let syy: f64 = x2.iter().map(|b| (b - mx2).powi(2)).sum();
        let want = sxy * sxy / (sxx * syy);
        assert!((p.max - want).abs() < 1e-10);
        assert!(p.max < 1e-10);
    }

    #[test]
    fn orthonormal_mean_zero_columns_have_zero_r2() {
        let z = BasisExpansion::from_matrix(
            DMatrix::from_row_slice(4, 2, &[1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0, -1.0]) / 2.0,
            vec![
                crate::basis::ColumnKind::Eigen { eigenvalue: 1.0 },
                crate::basis::ColumnKind::Eigen { eigenvalue: 1.0 },
            ],
        )
        .unwrap();
        assert!(max_pairwise_r2(&z).unwrap().max < 1e-10);
    }

    #[test]
    fn ar1_second_eigenvector_tracks_trend() {
        let years: Vec<f64> = (1..=43).map(f64::from).collect();
        let t = Coordinates::from_1d(&years).unwrap();
        let e = eigen_basis(&corr_matrix(
            &t,
            &CorrelationModel::new(Family::Ar1, 0.9).unwrap(),
        ))
        .unwrap();
        let x = DMatrix::from_fn(43, 2, |i, j| if j == 0 { 1.0 } else { years[i] });
        let m = collinearity_r2(&e, &x).unwrap();
        let (col, cov, r2) = m.max_entry().unwrap();
        assert_eq!((col, cov), (1, 1));
        assert!(r2 > 0.5);
    }

    #[test]
    fn condition_numbers() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!((condition_number(&x, None) - 1.0).abs() < 1e-12);
        let z = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]);
        assert!(condition_number(&x, Some(&z)).is_infinite());
    }

    #[test]
    fn second_order_condition_uses_whitened_design() {
        use crate::lmm::{LmmSpec, Theta};
        let years: Vec<f64> = (1..=20).map(f64::from).collect();
        let t = Coordinates::from_1d(&years).unwrap();
        let x = DMatrix::from_fn(20, 2, |i, j| if j == 0 { 1.0 } else { years[i] });
        let y = DVector::from_fn(20, |i, _| (i as f64 * 0.7).sin() + 0.1 * i as f64);
        let spec = LmmSpec::new(
            x.clone(),
            vec!["a".into(), "b".into()],
            t.clone(),
            RandomEffect::SecondOrder(Family::Ar1),
        )
        .unwrap();
        let theta = Theta::new(0.3, 1.0, 0.6);
        let fit = LmmFit::at_theta(&y, &spec, &theta).unwrap();
        let got = diagnose(&fit, 3).unwrap().condition_number;

        let sigma = DMatrix::from_fn(20, 20, |i, j| {
            1.0 * 0.6f64.powi((i as i32 - j as i32).abs()) + if i == j { 0.3 } else { 0.0 }
        });
        let l = sigma.cholesky().unwrap();
        let w = l.l().solve_lower_triangular(&x).unwrap();
        let w = DMatrix::from_columns(&w.column_iter().map(|c| c / c.norm()).collect::<Vec<_>>());
        let sv = w.singular_values();
        assert!(got.is_finite());
        assert!((got - sv.max() / sv.min()).abs() < 1e-8 * got);
    }

    proptest! {
        #[test]
        fn r2_affine_invariant_and_bounded(
            v in prop::collection::vec(-5.0f64..5.0, 6..30),
            a in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0],
            b in -10.0f64..10.0,
            seed in any::<u64>(),
        ) {
            let n = v.len();
            let mut s = RandomStream::new(seed);
            let x = DMatrix::from_fn(n, 1, |_, _| s.next_gaussian());
            let kinds = vec![crate::basis::ColumnKind::PolynomialPower { power: 1 }];
            let z1 = BasisExpansion::from_matrix(DMatrix::from_row_slice(n, 1, &v), kinds.clone()).unwrap();
            let shifted: Vec<f64> = v.iter().map(|u| a * u + b).collect();
            let z2 = BasisExpansion::from_matrix(DMatrix::from_row_slice(n, 1, &shifted), kinds).unwrap();
            let r1 = collinearity_r2(&z1, &x).unwrap().values[0][0];
            let r2v = collinearity_r2(&z2, &x).unwrap().values[0][0];
            match (r1, r2v) {
                (Some(p), Some(q)) => {
                    prop_assert!((p - q).abs() < 1e-9);
                    prop_assert!((0.0..=1.0).contains(&p));
                }
                (None, None) => {}
                _ => prop_assert!(false, "flagging differs"),
            }
        }

        #[test]
        fn acf_lag_zero_is_one(v in prop::collection::vec(-5.0f64..5.0, 4..50)) {
            if let Ok(acf) = residual_acf(&v, 1) {
                prop_assert_eq!(acf[0], 1.0);
            }
        }
    }
}
