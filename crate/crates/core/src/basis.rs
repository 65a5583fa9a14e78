//! Basis expansions: polynomial, eigen, kernel, grouping and predictive-process.
//!
//! A [`BasisExpansion`] is the `n x m` matrix `Z` together with per-column
//! metadata and the covariance assumed for the coefficients `alpha`. The
//! implied covariance of `Z alpha` (up to `sigma_alpha^2`) is [`gram`].

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::corr::{
    corr_matrix, corr_value, cross_corr_matrix, Coordinates, CorrelationModel, Family,
};
use crate::error::{Error, Result};
use crate::numkernel::{spd_solve, sym_eigen, SymMatrix};

pub const MAX_POLYNOMIAL_DEGREE: usize = 10;

/// Negative eigenvalues down to this fraction of the largest are rounding noise.
const PSD_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnKind {
    PolynomialPower { power: u32 },
    ShiftedQuadratic { knot: f64 },
    Eigen { eigenvalue: f64 },
    GaussianKernel { knot: Vec<f64>, phi: f64 },
    UniformKernel { knot: Vec<f64>, bandwidth: f64 },
    GroupIndicator { label: String },
    PredictiveProcess { knot: Vec<f64> },
}

impl ColumnKind {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ColumnKind::PolynomialPower { .. } => "polynomial-power",
            ColumnKind::ShiftedQuadratic { .. } => "shifted-quadratic",
            ColumnKind::Eigen { .. } => "eigen",
            ColumnKind::GaussianKernel { .. } => "gaussian-kernel",
            ColumnKind::UniformKernel { .. } => "uniform-kernel",
            ColumnKind::GroupIndicator { .. } => "group-indicator",
            ColumnKind::PredictiveProcess { .. } => "predictive-process",
        }
    }

    /// Short human-readable column label.
    pub fn label(&self, index: usize) -> String {
        match self {
            ColumnKind::PolynomialPower { power } => format!("x^{power}"),
            ColumnKind::ShiftedQuadratic { knot } => format!("(x-{knot})^2"),
            ColumnKind::GroupIndicator { label } => format!("group[{label}]"),
            other => format!("{}[{index}]", other.kind_name()),
        }
    }
}

/// Prior covariance of the basis coefficients, up to the factor `sigma_alpha^2`.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientCovariance {
    Iid,
    /// Diagonal eigenvalue weights (Z = Q).
    EigenWeighted(DVector<f64>),
    /// Knot correlation matrix `R*` of a predictive process.
    KnotCorrelated {
        r_star: SymMatrix,
        model: CorrelationModel,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisExpansion {
    matrix: DMatrix<f64>,
    columns: Vec<ColumnKind>,
    coefficient_covariance: CoefficientCovariance,
}

impl BasisExpansion {
    fn build(
        matrix: DMatrix<f64>,
        columns: Vec<ColumnKind>,
        coefficient_covariance: CoefficientCovariance,
    ) -> Result<Self> {
        debug_assert_eq!(matrix.ncols(), columns.len());
        if matrix.ncols() == 0 {
            return Err(Error::InvalidInput(
                "a basis expansion needs at least one column".into(),
            ));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "basis expansion has non-finite entries".into(),
            ));
        }
        Ok(BasisExpansion {
            matrix,
            columns,
            coefficient_covariance,
        })
    }

    /// An arbitrary user-supplied matrix with iid coefficients.
    pub fn from_matrix(matrix: DMatrix<f64>, columns: Vec<ColumnKind>) -> Result<Self> {
        if columns.len() != matrix.ncols() {
            return Err(Error::InvalidInput(format!(
                "{} column descriptors for {} columns",
                columns.len(),
                matrix.ncols()
            )));
        }
        BasisExpansion::build(matrix, columns, CoefficientCovariance::Iid)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn columns(&self) -> &[ColumnKind] {
        &self.columns
    }

    pub fn coefficient_covariance(&self) -> &CoefficientCovariance {
        &self.coefficient_covariance
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    /// The `m x m` coefficient covariance (I, diag(Lambda) or R*).
    pub fn coefficient_cov_matrix(&self) -> SymMatrix {
        match &self.coefficient_covariance {
            CoefficientCovariance::Iid => SymMatrix::identity(self.ncols()),
            CoefficientCovariance::EigenWeighted(w) => {
                SymMatrix::from_upper_fn(w.len(), |i, j| if i == j { w[i] } else { 0.0 })
            }
            CoefficientCovariance::KnotCorrelated { r_star, .. } => r_star.clone(),
        }
    }

    /// Keeps only the first `k` columns (eigen bases are ordered by eigenvalue).
    pub fn truncate(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.ncols() {
            return Err(Error::InvalidInput(format!(
                "cannot keep {k} of {} columns",
                self.ncols()
            )));
        }
        let cov = match &self.coefficient_covariance {
            CoefficientCovariance::Iid => CoefficientCovariance::Iid,
            CoefficientCovariance::EigenWeighted(w) => {
                CoefficientCovariance::EigenWeighted(w.rows(0, k).into_owned())
            }
            CoefficientCovariance::KnotCorrelated { .. } => {
                return Err(Error::InvalidInput(
                    "predictive-process bases cannot be truncated; choose fewer knots".into(),
                ))
            }
        };
        BasisExpansion::build(
            self.matrix.columns(0, k).into_owned(),
            self.columns[..k].to_vec(),
            cov,
        )
    }

    /// Evaluates the basis functions at new locations.
    ///
    /// Polynomial and shifted-quadratic columns use the first coordinate axis.
    /// Eigen and group-indicator columns have no functional form outside the
    /// training set and are rejected.
    pub fn evaluate_at(&self, coords: &Coordinates) -> Result<DMatrix<f64>> {
        if let CoefficientCovariance::KnotCorrelated { r_star, model } =
            &self.coefficient_covariance
        {
            let knots = knot_coordinates(&self.columns)?;
            let c = cross_corr_matrix(coords, &knots, model)?;
            let z_t = spd_solve(r_star, &c.transpose(), "R* (knot correlation)")?.x;
            return Ok(z_t.transpose());
        }
        let n = coords.len();
        let mut out = DMatrix::zeros(n, self.ncols());
        for (j, col) in self.columns.iter().enumerate() {
            for i in 0..n {
                let p = coords.point(i);
                out[(i, j)] = match col {
                    ColumnKind::PolynomialPower { power } => p[0].powi(*power as i32),
                    ColumnKind::ShiftedQuadratic { knot } => (p[0] - knot).powi(2),
                    ColumnKind::GaussianKernel { knot, phi } => {
                        check_dim(knot, p)?;
                        gaussian_kernel(crate::corr::euclidean(p, knot), *phi)
                    }
                    ColumnKind::UniformKernel { knot, bandwidth } => {
                        check_dim(knot, p)?;
                        uniform_kernel(crate::corr::euclidean(p, knot), *bandwidth)
                    }
                    ColumnKind::Eigen { .. } | ColumnKind::GroupIndicator { .. } => {
                        return Err(Error::InvalidInput(format!(
                            "{} columns cannot be evaluated at new locations",
                            col.kind_name()
                        )))
                    }
                    ColumnKind::PredictiveProcess { .. } => unreachable!("handled above"),
                };
            }
        }
        Ok(out)
    }
}

fn check_dim(knot: &[f64], p: &[f64]) -> Result<()> {
    if knot.len() != p.len() {
        return Err(Error::InvalidInput(format!(
            "knot is {}-D but point is {}-D",
            knot.len(),
            p.len()
        )));
    }
    Ok(())
}

fn knot_coordinates(columns: &[ColumnKind]) -> Result<Coordinates> {
    let mut dim = 0;
    let mut data = Vec::new();
    for c in columns {
        match c {
            ColumnKind::PredictiveProcess { knot } => {
                dim = knot.len();
                data.extend_from_slice(knot);
            }
            other => {
                return Err(Error::InvalidInput(format!(
                    "unexpected {} column in a predictive-process basis",
                    other.kind_name()
                )))
            }
        }
    }
    Coordinates::new(dim, data)
}

fn gaussian_kernel(d: f64, phi: f64) -> f64 {
    // exp(-2 d^2 / phi) is the Gaussian correlation with range phi / 2
    let m = CorrelationModel::new(Family::Gaussian, phi / 2.0).expect("phi checked positive");
    corr_value(d, &m).expect("distance is non-negative")
}

fn uniform_kernel(d: f64, bandwidth: f64) -> f64 {
    if d <= bandwidth / 2.0 {
        1.0
    } else {
        0.0
    }
}

/// Columns `x^0, x^1, ..., x^degree`.
pub fn polynomial_basis(x: &[f64], degree: usize) -> Result<BasisExpansion> {
    if degree > MAX_POLYNOMIAL_DEGREE {
        return Err(Error::UnsupportedDegree(degree));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("x must be finite".into()));
    }
    let m = DMatrix::from_fn(x.len(), degree + 1, |i, j| x[i].powi(j as i32));
    let cols = (0..=degree as u32)
        .map(|power| ColumnKind::PolynomialPower { power })
        .collect();
    BasisExpansion::build(m, cols, CoefficientCovariance::Iid)
}

/// Columns `(x - k_j)^2`, one per knot.
pub fn shifted_quadratic_basis(x: &[f64], knots: &[f64]) -> Result<BasisExpansion> {
    if knots.len() < 3 {
        return Err(Error::InvalidKnots(format!(
            "need at least 3 knots, got {}",
            knots.len()
        )));
    }
    for (i, a) in knots.iter().enumerate() {
        if !a.is_finite() {
            return Err(Error::InvalidKnots("knots must be finite".into()));
        }
        if knots[i + 1..].contains(a) {
            return Err(Error::InvalidKnots(format!(
                "knot {a} appears more than once"
            )));
        }
    }
    let m = DMatrix::from_fn(x.len(), knots.len(), |i, j| (x[i] - knots[j]).powi(2));
    let cols = knots
        .iter()
        .map(|&knot| ColumnKind::ShiftedQuadratic { knot })
        .collect();
    BasisExpansion::build(m, cols, CoefficientCovariance::Iid)
}

fn checked_eigen(r: &SymMatrix) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let e = sym_eigen(r)?;
    let n = e.values.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty correlation matrix".into()));
    }
    let top = e.values[0];
    let bottom = e.values[n - 1];
    if bottom < -PSD_TOLERANCE * top.abs().max(f64::MIN_POSITIVE) || top < 0.0 {
        return Err(Error::NotPsd {
            min_eigenvalue: bottom,
            max_eigenvalue: top,
        });
    }
    let values = e.clamped_values();
    Ok((e.vectors, values))
}

/// `Z = Q Lambda^{1/2}` with iid coefficients, so that `Z Z' = R`.
pub fn eigen_basis(r: &SymMatrix) -> Result<BasisExpansion> {
    let (mut q, values) = checked_eigen(r)?;
    for (j, mut col) in q.column_iter_mut().enumerate() {
        col *= values[j].sqrt();
    }
    let cols = values
        .iter()
        .map(|&eigenvalue| ColumnKind::Eigen { eigenvalue })
        .collect();
    BasisExpansion::build(q, cols, CoefficientCovariance::Iid)
}

/// `Z = Q` with coefficient covariance `Lambda`.
pub fn eigenvector_basis(r: &SymMatrix) -> Result<BasisExpansion> {
    let (q, values) = checked_eigen(r)?;
    let cols = values
        .iter()
        .map(|&eigenvalue| ColumnKind::Eigen { eigenvalue })
        .collect();
    BasisExpansion::build(q, cols, CoefficientCovariance::EigenWeighted(values))
}

fn check_knots(coords: &Coordinates, knots: &Coordinates) -> Result<()> {
    if knots.is_empty() {
        return Err(Error::InvalidKnots("no knots supplied".into()));
    }
    if coords.dim() != knots.dim() {
        return Err(Error::InvalidInput(format!(
            "points are {}-D but knots are {}-D",
            coords.dim(),
            knots.dim()
        )));
    }
    Ok(())
}

/// Gaussian kernel columns `exp(-2 d^2 / phi)` anchored at each knot.
pub fn gaussian_kernel_basis(
    coords: &Coordinates,
    knots: &Coordinates,
    phi: f64,
) -> Result<BasisExpansion> {
    check_knots(coords, knots)?;
    if !(phi > 0.0 && phi.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "kernel phi must be positive, got {phi}"
        )));
    }
    let m = DMatrix::from_fn(coords.len(), knots.len(), |i, j| {
        gaussian_kernel(coords.distance(i, knots, j), phi)
    });
    let cols = knots
        .points()
        .map(|k| ColumnKind::GaussianKernel {
            knot: k.to_vec(),
            phi,
        })
        .collect();
    BasisExpansion::build(m, cols, CoefficientCovariance::Iid)
}

/// Compactly supported indicator columns: 1 within `bandwidth / 2` of the knot.
pub fn uniform_kernel_basis(
    coords: &Coordinates,
    knots: &Coordinates,
    bandwidth: f64,
) -> Result<BasisExpansion> {
    check_knots(coords, knots)?;
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let m = DMatrix::from_fn(coords.len(), knots.len(), |i, j| {
        uniform_kernel(coords.distance(i, knots, j), bandwidth)
    });
    let cols = knots
        .points()
        .map(|k| ColumnKind::UniformKernel {
            knot: k.to_vec(),
            bandwidth,
        })
        .collect();
    BasisExpansion::build(m, cols, CoefficientCovariance::Iid)
}

/// One indicator column per distinct label, in order of first appearance.
pub fn grouping_basis<S: AsRef<str>>(labels: &[S]) -> Result<BasisExpansion> {
    if labels.is_empty() {
        return Err(Error::InvalidInput(
            "grouping needs at least one label".into(),
        ));
    }
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut names = Vec::new();
    let mut assignment = Vec::with_capacity(labels.len());
    for l in labels {
        let l = l.as_ref();
        let next = index.len();
        let j = *index.entry(l).or_insert_with(|| {
            names.push(l.to_string());
            next
        });
        assignment.push(j);
    }
    let m = DMatrix::from_fn(labels.len(), names.len(), |i, j| {
        if assignment[i] == j {
            1.0
        } else {
            0.0
        }
    });
    let cols = names
        .into_iter()
        .map(|label| ColumnKind::GroupIndicator { label })
        .collect();
    BasisExpansion::build(m, cols, CoefficientCovariance::Iid)
}

/// Reduced-rank basis `Z = C R*^{-1}` with coefficients correlated by `R*`.
pub fn predictive_process_basis(
    coords: &Coordinates,
    knots: &Coordinates,
    model: &CorrelationModel,
) -> Result<BasisExpansion> {
    check_knots(coords, knots)?;
    if !knots.all_distinct() {
        return Err(Error::InvalidKnots(
            "predictive-process knots must be distinct".into(),
        ));
    }
    let r_star = corr_matrix(knots, model);
    let c = cross_corr_matrix(coords, knots, model)?;
    let z = spd_solve(&r_star, &c.transpose(), "R* (knot correlation)")?
        .x
        .transpose();
    let cols = knots
        .points()
        .map(|k| ColumnKind::PredictiveProcess { knot: k.to_vec() })
        .collect();
    BasisExpansion::build(
        z,
        cols,
        CoefficientCovariance::KnotCorrelated {
            r_star,
            model: *model,
        },
    )
}

/// Implied correlation `Z K Z'` where `K` is the coefficient covariance.
pub fn gram(z: &BasisExpansion) -> SymMatrix {
    let zm = z.matrix();
    let product = match &z.coefficient_covariance {
        CoefficientCovariance::Iid => zm * zm.transpose(),
        CoefficientCovariance::EigenWeighted(w) => {
            let mut scaled = zm.clone();
            for (j, mut col) in scaled.column_iter_mut().enumerate() {
                col *= w[j];
            }
            scaled * zm.transpose()
        }
        CoefficientCovariance::KnotCorrelated { r_star, .. } => {
            zm * r_star.matrix() * zm.transpose()
        }
    };
    SymMatrix::symmetrize_upper(product)
}

/// `m` equally spaced knots spanning the data range, endpoints included.
///
/// For 2-D coordinates the knots form an `a x b` grid over the bounding box
/// with `a * b = m`, choosing the factorization whose cell shape is closest
/// to square.
pub fn grid_knots(coords: &Coordinates, m: usize) -> Result<Coordinates> {
    if m == 0 {
        return Err(Error::InvalidKnots("knot count must be positive".into()));
    }
    if coords.is_empty() {
        return Err(Error::InvalidInput(
            "no coordinates to place knots over".into(),
        ));
    }
    let bounds = coords.bounds();
    match coords.dim() {
        1 => Coordinates::from_1d(&linspace(bounds[0].0, bounds[0].1, m)),
        2 => {
            let (w, h) = (bounds[0].1 - bounds[0].0, bounds[1].1 - bounds[1].0);
            let aspect = if h > 0.0 && w > 0.0 { w / h } else { 1.0 };
            let target = (m as f64 * aspect).sqrt();
            let nx = (1..=m)
                .filter(|a| m.is_multiple_of(*a))
                .min_by(|&a, &b| {
                    let da = (a as f64 / target).ln().abs();
                    let db = (b as f64 / target).ln().abs();
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            let ny = m / nx;
            let xs = linspace(bounds[0].0, bounds[0].1, nx);
            let ys = linspace(bounds[1].0, bounds[1].1, ny);
            let data = ys
                .iter()
                .flat_map(|&y| xs.iter().flat_map(move |&x| [x, y]))
                .collect();
            Coordinates::new(2, data)
        }
        d => Err(Error::InvalidInput(format!(
            "grid knots are only defined for 1-D and 2-D coordinates, got {d}-D"
        ))),
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![(lo + hi) / 2.0],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::RandomStream;
    use proptest::prelude::*;

    fn ar1_3() -> SymMatrix {
        let t = Coordinates::from_1d(&[1.0, 2.0, 3.0]).unwrap();
        corr_matrix(&t, &CorrelationModel::new(Family::Ar1, 0.5).unwrap())
    }

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax()
    }

    fn random_psd(n: usize, rank: usize, seed: u64) -> SymMatrix {
        let mut s = RandomStream::new(seed);
        let a = DMatrix::from_fn(n, rank, |_, _| s.next_gaussian());
        SymMatrix::symmetrize_upper(&a * a.transpose())
    }

    /// Residual of projecting the columns of `target` onto span(`basis`).
    fn projection_residual(basis: &DMatrix<f64>, target: &DMatrix<f64>) -> f64 {
        let svd = basis.clone().svd(true, true);
        let coef = svd.solve(target, 1e-12).unwrap();
        (basis * coef - target).amax()
    }

    #[test]
    fn polynomial_hand_values() {
        let b = polynomial_basis(&[2.0, 3.0], 2).unwrap();
        assert_eq!(
            b.matrix(),
            &DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 4.0, 1.0, 3.0, 9.0])
        );
        let c = polynomial_basis(&[2.0, 3.0, -1.0], 0).unwrap();
        assert_eq!(c.matrix(), &DMatrix::from_element(3, 1, 1.0));
        assert!(matches!(
            polynomial_basis(&[1.0], 11),
            Err(Error::UnsupportedDegree(11))
        ));
    }

    #[test]
    fn polynomial_fit_matches_normal_equations() {
        let mut s = RandomStream::new(5);
        let x: Vec<f64> = (0..100).map(|_| s.next_uniform() * 4.0 - 2.0).collect();
        let y = DVector::from_iterator(
            100,
            x.iter()
                .map(|v| 1.0 - 0.5 * v + 0.3 * v * v + 0.1 * s.next_gaussian()),
        );
        let z = polynomial_basis(&x, 2).unwrap();
        let fitted = crate::lmm::ols(z.matrix(), &y).unwrap().fitted;
        // normal equations by explicit 3x3 inverse
        let zm = z.matrix();
        let xtx = zm.transpose() * zm;
        let beta = xtx.try_inverse().unwrap() * zm.transpose() * &y;
        let oracle = zm * beta;
        assert!((fitted - oracle).amax() < 1e-8);
    }

    #[test]
    fn shifted_quadratic_row() {
        let b = shifted_quadratic_basis(&[1140.0], &[1140.0, 2620.0, 3420.0]).unwrap();
        assert_eq!(
            b.matrix().row(0).iter().copied().collect::<Vec<_>>(),
            vec![0.0, 1480.0f64.powi(2), 2280.0f64.powi(2)]
        );
        let k = [1.0, 4.0, 9.0];
        let b = shifted_quadratic_basis(&k, &k).unwrap();
        for i in 0..3 {
            assert_eq!(b.matrix()[(i, i)], 0.0);
        }
        assert!(matches!(
            shifted_quadratic_basis(&[1.0], &[1.0, 2.0, 1.0]),
            Err(Error::InvalidKnots(_))
        ));
    }

    #[test]
    fn shifted_quadratic_spans_quadratics() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.37 - 2.0).collect();
        let b = shifted_quadratic_basis(&x, &[-1.0, 0.5, 3.0]).unwrap();
        let target = polynomial_basis(&x, 2).unwrap();
        assert!(projection_residual(b.matrix(), target.matrix()) < 1e-8);
    }

    #[test]
    fn eigen_basis_of_identity() {
        let b = eigen_basis(&SymMatrix::identity(4)).unwrap();
        assert!(max_abs_diff(&b.matrix().abs(), &DMatrix::identity(4, 4)) < 1e-14);
    }

    #[test]
    fn eigen_basis_matches_published_three_by_three() {
        let b = eigen_basis(&ar1_3()).unwrap();
        let want = DMatrix::from_row_slice(
            3,
            3,
            &[-0.74, -0.61, 0.29, -0.87, 0.0, -0.49, -0.74, 0.61, 0.29],
        );
        assert!(max_abs_diff(&b.matrix().abs(), &want.abs()) <= 0.01);
        let v = eigenvector_basis(&ar1_3()).unwrap();
        match v.coefficient_covariance() {
            CoefficientCovariance::EigenWeighted(w) => {
                for (got, want) in w.iter().zip([1.84, 0.75, 0.41]) {
                    assert!((got - want).abs() < 0.005);
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn not_psd_rejected() {
        let m = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        assert!(matches!(eigen_basis(&m), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn kernel_values() {
        let c = Coordinates::from_1d(&[0.0, 1.0]).unwrap();
        let k = Coordinates::from_1d(&[0.0]).unwrap();
        let b = gaussian_kernel_basis(&c, &k, 2.0).unwrap();
        assert_eq!(b.matrix()[(0, 0)], 1.0);
        assert!((b.matrix()[(1, 0)] - (-1.0f64).exp()).abs() < 1e-15);
        let empty = Coordinates::new(1, vec![]).unwrap();
        assert!(matches!(
            gaussian_kernel_basis(&c, &empty, 1.0),
            Err(Error::InvalidKnots(_))
        ));
        let knots = grid_knots(
            &Coordinates::from_1d(&linspace(0.0, 4000.0, 51)).unwrap(),
            17,
        )
        .unwrap();
        let b = gaussian_kernel_basis(&c, &knots, 1.0).unwrap();
        assert_eq!(b.ncols(), 17);
    }

    #[test]
    fn uniform_kernel_support() {
        let knots = Coordinates::from_1d(&[5.0]).unwrap();
        let c = Coordinates::from_1d(&[5.0, 6.0, 7.0]).unwrap();
        let b = uniform_kernel_basis(&c, &knots, 2.0).unwrap();
        assert_eq!(b.matrix().column(0).as_slice(), &[1.0, 1.0, 0.0]);
        let years: Vec<f64> = (1..=43).map(f64::from).collect();
        let t = Coordinates::from_1d(&years).unwrap();
        let b = uniform_kernel_basis(&t, &t, 2.0).unwrap();
        for row in b.matrix().row_iter() {
            let nz = row.iter().filter(|v| **v != 0.0).count();
            assert!((2..=3).contains(&nz));
        }
    }

    #[test]
    fn grouping_reproduces_compound_symmetry() {
        let b = grouping_basis(&["a", "a", "b", "b", "c", "c"]).unwrap();
        let z = DMatrix::from_row_slice(
            6,
            3,
            &[
                1., 0., 0., 1., 0., 0., 0., 1., 0., 0., 1., 0., 0., 0., 1., 0., 0., 1.,
            ],
        );
        assert_eq!(b.matrix(), &z);
        let g = gram(&b);
        let want = DMatrix::from_fn(6, 6, |i, j| if i / 2 == j / 2 { 1.0 } else { 0.0 });
        assert_eq!(g.matrix(), &want);
        let one = grouping_basis(&["x", "x", "x"]).unwrap();
        assert_eq!(one.matrix(), &DMatrix::from_element(3, 1, 1.0));
    }

    #[test]
    fn predictive_process_with_knots_at_data() {
        let mut s = RandomStream::new(11);
        let pts: Vec<[f64; 2]> = (0..12)
            .map(|_| [s.next_uniform() * 5.0, s.next_uniform() * 5.0])
            .collect();
        let c = Coordinates::from_points(&pts).unwrap();
        let m = CorrelationModel::new(Family::Exponential, 1.5).unwrap();
        let b = predictive_process_basis(&c, &c, &m).unwrap();
        assert!(max_abs_diff(b.matrix(), &DMatrix::identity(12, 12)) < 1e-8);
        assert!(max_abs_diff(gram(&b).matrix(), corr_matrix(&c, &m).matrix()) < 1e-8);
    }

    #[test]
    fn predictive_process_knot_count_and_duplicates() {
        let mut s = RandomStream::new(3);
        let pts: Vec<[f64; 2]> = (0..80)
            .map(|_| [s.next_uniform(), s.next_uniform()])
            .collect();
        let c = Coordinates::from_points(&pts).unwrap();
        let knots = grid_knots(&c, 50).unwrap();
        let m = CorrelationModel::new(Family::Exponential, 0.3).unwrap();
        let b = predictive_process_basis(&c, &knots, &m).unwrap();
        assert_eq!(b.ncols(), 50);
        let dup = Coordinates::from_points(&[[0.0, 0.0], [0.0, 0.0]]).unwrap();
        assert!(matches!(
            predictive_process_basis(&c, &dup, &m),
            Err(Error::InvalidKnots(_))
        ));
        // evaluating at the training points reproduces Z
        let again = b.evaluate_at(&c).unwrap();
        assert!(max_abs_diff(&again, b.matrix()) < 1e-10);
    }

    #[test]
    fn evaluate_at_matches_construction() {
        let c = Coordinates::from_1d(&[0.0, 0.4, 1.3, 2.2]).unwrap();
        let k = Coordinates::from_1d(&[0.0, 1.0, 2.0]).unwrap();
        for b in [
            gaussian_kernel_basis(&c, &k, 0.7).unwrap(),
            uniform_kernel_basis(&c, &k, 1.0).unwrap(),
            polynomial_basis(&c.first_axis(), 3).unwrap(),
            shifted_quadratic_basis(&c.first_axis(), &[0.0, 1.0, 2.0]).unwrap(),
        ] {
            assert_eq!(&b.evaluate_at(&c).unwrap(), b.matrix());
        }
        let e = eigen_basis(&ar1_3()).unwrap();
        assert!(e.evaluate_at(&k).is_err());
    }

    #[test]
    fn grid_knots_layout() {
        let c = Coordinates::from_1d(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(grid_knots(&c, 3).unwrap().as_slice(), &[1.0, 2.0, 3.0]);
        let sq = Coordinates::from_points(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let k = grid_knots(&sq, 50).unwrap();
        assert_eq!(k.len(), 50);
        assert!(k.all_distinct());
    }

    proptest! {
        #[test]
        fn eigen_round_trip(n in 1usize..30, rank_frac in 0.2f64..1.0, seed in any::<u64>()) {
            let rank = ((n as f64 * rank_frac).ceil() as usize).max(1);
            let r = random_psd(n, rank, seed);
            let scale = r.max_abs();
            let g1 = gram(&eigen_basis(&r).unwrap());
            prop_assert!(max_abs_diff(g1.matrix(), r.matrix()) <= 1e-10 * scale.max(1.0));
            let g2 = gram(&eigenvector_basis(&r).unwrap());
            prop_assert!(max_abs_diff(g2.matrix(), r.matrix()) <= 1e-10 * scale.max(1.0));
        }

        #[test]
        fn kernel_is_half_range_gaussian_correlation(d in 0.0f64..10.0, phi in 0.01f64..10.0) {
            let c = Coordinates::from_1d(&[d]).unwrap();
            let k = Coordinates::from_1d(&[0.0]).unwrap();
            let z = gaussian_kernel_basis(&c, &k, phi).unwrap().matrix()[(0, 0)];
            let r = corr_value(d, &CorrelationModel::new(Family::Gaussian, phi / 2.0).unwrap()).unwrap();
            prop_assert_eq!(z, r);
        }

        #[test]
        fn predictive_process_never_exceeds_unit_variance(
            n in 3usize..25, m in 1usize..8, phi in 0.1f64..3.0, seed in any::<u64>(), fam in 0usize..2,
        ) {
            let mut s = RandomStream::new(seed);
            let pts: Vec<[f64; 2]> = (0..n).map(|_| [s.next_uniform() * 4.0, s.next_uniform() * 4.0]).collect();
            let kn: Vec<[f64; 2]> = (0..m).map(|_| [s.next_uniform() * 4.0, s.next_uniform() * 4.0]).collect();
            let c = Coordinates::from_points(&pts).unwrap();
            let k = Coordinates::from_points(&kn).unwrap();
            let family = [Family::Gaussian, Family::Exponential][fam];
            let model = CorrelationModel::new(family, phi).unwrap();
            let b = predictive_process_basis(&c, &k, &model).unwrap();
            let g = gram(&b);
            for i in 0..n {
                prop_assert!(g.matrix()[(i, i)] <= 1.0 + 1e-8);
            }
        }

        #[test]
        fn group_rows_sum_to_one(labels in prop::collection::vec(0u8..5, 1..40)) {
            let names: Vec<String> = labels.iter().map(|l| format!("g{l}")).collect();
            let b = grouping_basis(&names).unwrap();
            for row in b.matrix().row_iter() {
                prop_assert_eq!(row.sum(), 1.0);
            }
            let g = gram(&b);
            for i in 0..names.len() {
                for j in 0..names.len() {
                    let same = if names[i] == names[j] { 1.0 } else { 0.0 };
                    prop_assert_eq!(g.matrix()[(i, j)], same);
                }
            }
        }

        #[test]
        fn polynomial_and_shifted_quadratic_fit_identically(
            n in 4usize..40, seed in any::<u64>(), k1 in -3.0f64..-1.0, k2 in -0.5f64..0.5, k3 in 1.0f64..3.0,
        ) {
            let mut s = RandomStream::new(seed);
            let x: Vec<f64> = (0..n).map(|i| i as f64 / n as f64 * 4.0 - 2.0 + 0.01 * s.next_uniform()).collect();
            let y = DVector::from_iterator(n, (0..n).map(|_| s.next_gaussian()));
            let a = crate::lmm::ols(polynomial_basis(&x, 2).unwrap().matrix(), &y).unwrap().fitted;
            let b = crate::lmm::ols(shifted_quadratic_basis(&x, &[k1, k2, k3]).unwrap().matrix(), &y).unwrap().fitted;
            prop_assert!((a - b).amax() < 1e-6);
        }
    }
}
