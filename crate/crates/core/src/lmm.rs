//! Gaussian linear mixed models with autocorrelated random effects.
//!
//! The random effect enters either through the covariance (second-order,
//! `y ~ N(X beta, s2_eps I + s2_alpha R(phi))`) or through the mean with
//! random basis coefficients (first-order, `y ~ N(X beta + Z alpha, s2_eps I)`
//! with `alpha ~ N(0, s2_alpha K)`). Integrating `alpha` out gives the
//! second-order form with `R = Z K Z'`, so both share one marginal
//! likelihood. Fixed effects are profiled out by generalized least squares
//! and the variance parameters are fitted by maximum likelihood.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::basis::{
    eigen_basis, gaussian_kernel_basis, gram, predictive_process_basis, BasisExpansion,
};
use crate::corr::{corr_matrix, cross_corr_matrix, Coordinates, CorrelationModel, Family};
use crate::error::{Error, Result};
use crate::numkernel::{sym_eigen, RandomStream, SpdFactor, SymMatrix};
use crate::optimize::{nelder_mead, SimplexOptions};

/// Lower guard on variance components so the marginal covariance stays invertible.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Relative singular-value threshold for declaring X rank deficient.
const RANK_TOL: f64 = 1e-10;

const AR1_PHI_LIMIT: f64 = 0.999;

/// Basis used by a first-order specification.
#[derive(Debug, Clone)]
pub enum FirstOrderBasis {
    /// A basis that does not depend on `phi`.
    Fixed(BasisExpansion),
    /// `Q Lambda^{1/2}` of the correlation matrix of the family at `phi`.
    Eigen(Family),
    /// Gaussian kernels with range `phi` anchored at the knots.
    GaussianKernel { knots: Coordinates },
    /// Predictive process on the knots for the family at `phi`.
    PredictiveProcess { knots: Coordinates, family: Family },
}

#[derive(Debug, Clone)]
pub enum RandomEffect {
    /// Independent errors only.
    None,
    SecondOrder(Family),
    FirstOrder(FirstOrderBasis),
}

/// How `phi` is treated during fitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiControl {
    /// Estimate within the default bounds for the family.
    Estimate,
    /// Estimate within `[lo, hi]`.
    Bounded(f64, f64),
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct LmmSpec {
    x: DMatrix<f64>,
    x_names: Vec<String>,
    coords: Coordinates,
    random: RandomEffect,
    include_nugget: bool,
    phi: PhiControl,
    estimation: Estimation,
}

/// Criterion maximized over the variance parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimation {
    #[default]
    Ml,
    /// Restricted likelihood of the GLS residual contrasts; less biased
    /// variance estimates in short series.
    Reml,
}

/// Variance parameters `(sigma_eps^2, sigma_alpha^2, phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theta {
    pub sigma2_eps: f64,
    pub sigma2_alpha: f64,
    pub phi: f64,
}

impl Theta {
    pub fn new(sigma2_eps: f64, sigma2_alpha: f64, phi: f64) -> Self {
        Theta {
            sigma2_eps,
            sigma2_alpha,
            phi,
        }
    }
}

impl LmmSpec {
    pub fn new(
        x: DMatrix<f64>,
        x_names: Vec<String>,
        coords: Coordinates,
        random: RandomEffect,
    ) -> Result<Self> {
        let (n, p) = x.shape();
        if x_names.len() != p {
            return Err(Error::InvalidInput(format!(
                "{} names for {p} covariate columns",
                x_names.len()
            )));
        }
        if coords.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} coordinates for {n} observations",
                coords.len()
            )));
        }
        if p == 0 || n <= p {
            return Err(Error::InvalidInput(format!(
                "need more observations than covariates (n = {n}, p = {p})"
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("covariates must be finite".into()));
        }
        let collinear = collinear_columns(&x);
        if !collinear.is_empty() {
            let names: Vec<&str> = collinear.iter().map(|&j| x_names[j].as_str()).collect();
            return Err(Error::InvalidInput(format!(
                "covariate matrix is rank deficient; collinear columns: {}",
                names.join(", ")
            )));
        }
        if let RandomEffect::FirstOrder(b) = &random {
            match b {
                FirstOrderBasis::Fixed(z) if z.nrows() != n => {
                    return Err(Error::InvalidInput(format!(
                        "basis has {} rows for {n} observations",
                        z.nrows()
                    )))
                }
                FirstOrderBasis::GaussianKernel { knots }
                | FirstOrderBasis::PredictiveProcess { knots, .. }
                    if knots.dim() != coords.dim() =>
                {
                    return Err(Error::InvalidInput(
                        "knot and data dimensions differ".into(),
                    ))
                }
                _ => {}
            }
        }
        Ok(LmmSpec {
            x,
            x_names,
            coords,
            random,
            include_nugget: true,
            phi: PhiControl::Estimate,
            estimation: Estimation::Ml,
        })
    }

    pub fn with_estimation(mut self, estimation: Estimation) -> Self {
        self.estimation = estimation;
        self
    }

    pub fn estimation(&self) -> Estimation {
        self.estimation
    }

    pub fn with_nugget(mut self, include: bool) -> Self {
        self.include_nugget = include;
        self
    }

    pub fn with_phi(mut self, phi: PhiControl) -> Result<Self> {
        if let Some(f) = self.phi_family() {
            let ok = match phi {
                PhiControl::Estimate => true,
                PhiControl::Fixed(v) => f.phi_is_valid(v),
                PhiControl::Bounded(lo, hi) => lo < hi && f.phi_is_valid(lo) && f.phi_is_valid(hi),
            };
            if !ok {
                return Err(Error::InvalidInput(format!("{phi:?} is not valid for {f}")));
            }
        }
        self.phi = phi;
        Ok(self)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn x_names(&self) -> &[String] {
        &self.x_names
    }

    pub fn coords(&self) -> &Coordinates {
        &self.coords
    }

    pub fn random(&self) -> &RandomEffect {
        &self.random
    }

    pub fn include_nugget(&self) -> bool {
        self.include_nugget
    }

    pub fn phi_control(&self) -> PhiControl {
        self.phi
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Family whose parameter space `phi` lives in, if the model depends on `phi`.
    pub fn phi_family(&self) -> Option<Family> {
        match &self.random {
            RandomEffect::None => None,
            RandomEffect::SecondOrder(f) => Some(*f),
            RandomEffect::FirstOrder(b) => match b {
                FirstOrderBasis::Fixed(_) => None,
                FirstOrderBasis::Eigen(f) => Some(*f),
                FirstOrderBasis::GaussianKernel { .. } => Some(Family::Gaussian),
                FirstOrderBasis::PredictiveProcess { family, .. } => Some(*family),
            },
        }
    }

    fn estimates_phi(&self) -> bool {
        self.phi_family().is_some() && !matches!(self.phi, PhiControl::Fixed(_))
    }

    /// The `phi` actually used when evaluating at `theta`.
    pub fn effective_phi(&self, theta: &Theta) -> f64 {
        match self.phi {
            PhiControl::Fixed(v) => v,
            _ => theta.phi,
        }
    }

    /// Search interval for `phi`.
    ///
    /// AR(1): `[-0.999, 0.999]`. Exponential: `[1e-3, 10] * d_max`. Gaussian
    /// correlation and kernels measure `phi` in squared distance, so the
    /// interval is `[(1e-3 d_max)^2, (10 d_max)^2]`.
    pub fn phi_bounds(&self) -> Option<(f64, f64)> {
        let family = self.phi_family()?;
        if let PhiControl::Bounded(lo, hi) = self.phi {
            return Some((lo, hi));
        }
        let d = self.coords.max_distance();
        let d = if d > 0.0 { d } else { 1.0 };
        Some(match family {
            Family::Ar1 => (-AR1_PHI_LIMIT, AR1_PHI_LIMIT),
            Family::Exponential => (1e-3 * d, 10.0 * d),
            Family::Gaussian => ((1e-3 * d).powi(2), (10.0 * d).powi(2)),
        })
    }

    /// The first-order basis at `phi` (`None` for second-order or no random effect).
    pub fn basis_at(&self, phi: f64) -> Result<Option<BasisExpansion>> {
        let b = match &self.random {
            RandomEffect::FirstOrder(b) => b,
            _ => return Ok(None),
        };
        let phi = match self.phi {
            PhiControl::Fixed(v) => v,
            _ => phi,
        };
        Ok(Some(match b {
            FirstOrderBasis::Fixed(z) => z.clone(),
            FirstOrderBasis::Eigen(f) => {
                eigen_basis(&corr_matrix(&self.coords, &CorrelationModel::new(*f, phi)?))?
            }
            FirstOrderBasis::GaussianKernel { knots } => {
                gaussian_kernel_basis(&self.coords, knots, phi)?
            }
            FirstOrderBasis::PredictiveProcess { knots, family } => predictive_process_basis(
                &self.coords,
                knots,
                &CorrelationModel::new(*family, phi)?,
            )?,
        }))
    }

    /// Implied correlation `G(phi)` of the random effect: `R(phi)` or `gram(Z(phi))`.
    pub fn random_correlation(&self, phi: f64) -> Result<Option<SymMatrix>> {
        match &self.random {
            RandomEffect::None => Ok(None),
            RandomEffect::SecondOrder(f) => {
                let phi = match self.phi {
                    PhiControl::Fixed(v) => v,
                    _ => phi,
                };
                Ok(Some(corr_matrix(
                    &self.coords,
                    &CorrelationModel::new(*f, phi)?,
                )))
            }
            RandomEffect::FirstOrder(_) => Ok(self.basis_at(phi)?.map(|z| gram(&z))),
        }
    }

    pub(crate) fn marginal_covariance(&self, theta: &Theta) -> Result<SymMatrix> {
        let n = self.n();
        let eps = if self.include_nugget {
            theta.sigma2_eps.max(VARIANCE_FLOOR)
        } else {
            VARIANCE_FLOOR
        };
        Ok(match self.random_correlation(theta.phi)? {
            Some(g) => g.scaled_plus_diagonal(theta.sigma2_alpha, eps),
            None => SymMatrix::identity(n).scaled_plus_diagonal(0.0, eps),
        })
    }
}

/// Indices of columns that are (numerically) linear combinations of earlier ones.
pub fn collinear_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut kept: Vec<DVector<f64>> = Vec::new();
    let mut bad = Vec::new();
    for (j, col) in x.column_iter().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            bad.push(j);
            continue;
        }
        let mut v: DVector<f64> = col.into_owned() / norm;
        // two passes of Gram-Schmidt for stability
        for _ in 0..2 {
            for q in &kept {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let r = v.norm();
        if r < RANK_TOL {
            bad.push(j);
        } else {
            kept.push(v / r);
        }
    }
    bad
}

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub beta: DVector<f64>,
    pub fitted: DVector<f64>,
    pub rss: f64,
}

/// Ordinary least squares via SVD.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    if x.nrows() != y.len() {
        return Err(Error::InvalidInput(format!(
            "design has {} rows, response has {}",
            x.nrows(),
            y.len()
        )));
    }
    let svd = x.clone().svd(true, true);
    let tol = RANK_TOL * svd.singular_values.max();
    let beta = svd
        .solve(y, tol)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let fitted = x * &beta;
    let rss = (y - &fitted).norm_squared();
    Ok(OlsFit { beta, fitted, rss })
}

/// Generalized least squares at a fixed marginal covariance.
struct Gls {
    beta: DVector<f64>,
    beta_cov: DMatrix<f64>,
    nll: f64,
    /// Negative restricted log-likelihood.
    reml_nll: f64,
    /// Sigma^{-1} (y - X beta)
    weighted_resid: DVector<f64>,
}

fn gls(y: &DVector<f64>, x: &DMatrix<f64>, sigma: &SymMatrix) -> Result<Gls> {
    let n = y.len();
    let factor = SpdFactor::new(sigma, "marginal covariance")?;
    let xw = factor.whiten(x);
    let yw = factor.whiten_vec(y);
    let qr = xw.qr();
    let r = qr.r();
    let qty = qr.q().transpose() * &yw;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("whitened covariate matrix".into()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(r.nrows(), r.nrows()))
        .ok_or_else(|| Error::Singular("whitened covariate matrix".into()))?;
    let beta_cov = &r_inv * r_inv.transpose();
    let beta_cov = SymMatrix::symmetrize_upper(beta_cov).into_matrix();
    let resid = y - x * &beta;
    let weighted_resid = factor.solve_vec(&resid);
    let quad = resid.dot(&weighted_resid);
    let nll = 0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + factor.log_det() + quad);
    let log_det_xsx: f64 = (0..r.nrows()).map(|j| 2.0 * r[(j, j)].abs().ln()).sum();
    let reml_nll =
        nll + 0.5 * log_det_xsx - 0.5 * r.nrows() as f64 * (2.0 * std::f64::consts::PI).ln();
    Ok(Gls {
        beta,
        beta_cov,
        nll,
        reml_nll,
        weighted_resid,
    })
}

fn check_response(y: &DVector<f64>, spec: &LmmSpec) -> Result<()> {
    if y.len() != spec.n() {
        return Err(Error::InvalidInput(format!(
            "response has {} values, spec has {} rows",
            y.len(),
            spec.n()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("response must be finite".into()));
    }
    Ok(())
}

fn check_theta(spec: &LmmSpec, theta: &Theta) -> Result<()> {
    if theta.sigma2_eps.is_nan()
        || theta.sigma2_alpha.is_nan()
        || theta.sigma2_eps < 0.0
        || theta.sigma2_alpha < 0.0
    {
        return Err(Error::InvalidInput(format!(
            "variance components must be non-negative: {theta:?}"
        )));
    }
    if let Some(f) = spec.phi_family() {
        let phi = spec.effective_phi(theta);
        if !f.phi_is_valid(phi) {
            return Err(Error::InvalidInput(format!(
                "phi = {phi} is invalid for {f}"
            )));
        }
    }
    Ok(())
}

/// Negative log marginal likelihood with `beta` profiled out by GLS.
pub fn marginal_nll(y: &DVector<f64>, spec: &LmmSpec, theta: &Theta) -> Result<f64> {
    check_response(y, spec)?;
    check_theta(spec, theta)?;
    let sigma = spec.marginal_covariance(theta)?;
    Ok(gls(y, spec.x(), &sigma)?.nll)
}

/// Negative restricted log-likelihood, `(n - p) / 2 ln 2 pi + (ln|Sigma| + ln|X' Sigma^{-1} X| + r' Sigma^{-1} r) / 2`.
pub fn restricted_nll(y: &DVector<f64>, spec: &LmmSpec, theta: &Theta) -> Result<f64> {
    check_response(y, spec)?;
    check_theta(spec, theta)?;
    let sigma = spec.marginal_covariance(theta)?;
    Ok(gls(y, spec.x(), &sigma)?.reml_nll)
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry {
    pub restart: usize,
    pub iteration: usize,
    pub neg_loglik: f64,
}

#[derive(Debug, Clone)]
pub struct LmmFit {
    spec: LmmSpec,
    y: DVector<f64>,
    pub beta: DVector<f64>,
    pub beta_cov: DMatrix<f64>,
    pub sigma2_eps: f64,
    pub sigma2_alpha: f64,
    /// Estimated (or fixed) `phi`; `NaN` when the model has no `phi`.
    pub phi: f64,
    pub loglik: f64,
    pub converged: bool,
    pub optimizer_trace: Vec<TraceEntry>,
    weighted_resid: DVector<f64>,
}

impl LmmFit {
    /// Evaluates the model at fixed variance parameters (GLS for `beta`, no optimization).
    pub fn at_theta(y: &DVector<f64>, spec: &LmmSpec, theta: &Theta) -> Result<Self> {
        check_response(y, spec)?;
        check_theta(spec, theta)?;
        let sigma = spec.marginal_covariance(theta)?;
        let g = gls(y, spec.x(), &sigma)?;
        let phi = if spec.phi_family().is_some() {
            spec.effective_phi(theta)
        } else {
            f64::NAN
        };
        let has_random = !matches!(spec.random, RandomEffect::None);
        Ok(LmmFit {
            spec: spec.clone(),
            y: y.clone(),
            beta: g.beta,
            beta_cov: g.beta_cov,
            sigma2_eps: if spec.include_nugget {
                theta.sigma2_eps
            } else {
                0.0
            },
            sigma2_alpha: if has_random { theta.sigma2_alpha } else { 0.0 },
            phi,
            loglik: -g.nll,
            converged: true,
            optimizer_trace: Vec::new(),
            weighted_resid: g.weighted_resid,
        })
    }

    pub fn spec(&self) -> &LmmSpec {
        &self.spec
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn theta(&self) -> Theta {
        Theta::new(self.sigma2_eps, self.sigma2_alpha, self.phi)
    }

    pub fn neg_loglik(&self) -> f64 {
        -self.loglik
    }

    /// `X beta_hat`.
    pub fn fixed_part(&self) -> DVector<f64> {
        self.spec.x() * &self.beta
    }

    /// `X beta_hat + eta_hat`.
    pub fn fitted(&self) -> Result<DVector<f64>> {
        Ok(self.fixed_part() + blup_eta(self)?)
    }

    pub fn residuals(&self) -> Result<DVector<f64>> {
        Ok(&self.y - self.fitted()?)
    }
}

fn log_transform_bounds(lo: f64, hi: f64) -> (f64, f64) {
    (lo.ln(), hi.ln())
}

/// Maximum-likelihood fit of the variance parameters by bounded simplex search.
///
/// Works on `(ln s2_eps, ln s2_alpha, t(phi))` with `t = atanh` for AR(1)
/// and `t = ln` otherwise. Three dispersed starting points are tried and the
/// best converged optimum is kept. Under [`Estimation::Reml`] the restricted
/// likelihood is maximized instead; `loglik` is always the full likelihood.
pub fn fit_ml(y: &DVector<f64>, spec: &LmmSpec) -> Result<LmmFit> {
    check_response(y, spec)?;
    let n = spec.n() as f64;
    let ols_fit = ols(spec.x(), y)?;
    let s2 = (ols_fit.rss / n).max(VARIANCE_FLOOR);

    if matches!(spec.random, RandomEffect::None) {
        if !spec.include_nugget {
            return Err(Error::InvalidInput(
                "a model without random effect needs the nugget term".into(),
            ));
        }
        let dof = match spec.estimation {
            Estimation::Ml => n,
            Estimation::Reml => n - spec.x.ncols() as f64,
        };
        let s2 = (ols_fit.rss / dof).max(VARIANCE_FLOOR);
        return LmmFit::at_theta(y, spec, &Theta::new(s2, 0.0, f64::NAN));
    }

    let ybar = y.mean();
    let var_y = (y.iter().map(|v| (v - ybar).powi(2)).sum::<f64>() / n).max(VARIANCE_FLOOR);
    let (lv_lo, lv_hi) = (VARIANCE_FLOOR.ln(), (1e6 * var_y).ln());

    let phi_setup = if spec.estimates_phi() {
        let family = spec.phi_family().expect("estimates_phi implies a family");
        let (lo, hi) = spec.phi_bounds().expect("family implies bounds");
        Some(match family {
            Family::Ar1 => (family, lo.atanh(), hi.atanh()),
            _ => {
                let (a, b) = log_transform_bounds(lo, hi);
                (family, a, b)
            }
        })
    } else {
        None
    };
    let fixed_phi = match spec.phi {
        PhiControl::Fixed(v) => v,
        _ => f64::NAN,
    };

    let decode = |p: &[f64]| -> Theta {
        let mut k = 0;
        let s2e = if spec.include_nugget {
            k += 1;
            p[0].exp()
        } else {
            0.0
        };
        let s2a = p[k].exp();
        k += 1;
        let phi = match phi_setup {
            Some((Family::Ar1, ..)) => p[k].tanh(),
            Some(_) => p[k].exp(),
            None => fixed_phi,
        };
        Theta::new(s2e, s2a, phi)
    };

    let mut lo = Vec::new();
    let mut hi = Vec::new();
    if spec.include_nugget {
        lo.push(lv_lo);
        hi.push(lv_hi);
    }
    lo.push(lv_lo);
    hi.push(lv_hi);
    if let Some((_, a, b)) = phi_setup {
        lo.push(a);
        hi.push(b);
    }

    // (share of s2 given to the nugget, share to the random effect, phi position)
    let starts: Vec<Vec<f64>> = [(0.5, 0.5, 0.5), (0.9, 0.1, 0.25), (0.1, 0.9, 0.75)]
        .iter()
        .map(|&(fe, fa, frac)| {
            let mut s = Vec::new();
            if spec.include_nugget {
                s.push((fe * s2).max(VARIANCE_FLOOR).ln());
            }
            s.push((fa * s2).max(VARIANCE_FLOOR).ln());
            if let Some((family, a, b)) = phi_setup {
                s.push(match family {
                    // maps 0.25 / 0.5 / 0.75 to phi = 0.0 / 0.45 / 0.9
                    Family::Ar1 => ((frac - 0.25) * 1.8f64).min(0.9).atanh(),
                    _ => a + frac * (b - a),
                });
            }
            s
        })
        .collect();

    let objective = |p: &[f64]| -> f64 {
        let theta = decode(p);
        match spec
            .marginal_covariance(&theta)
            .and_then(|sigma| gls(y, spec.x(), &sigma))
        {
            Ok(g) => match spec.estimation {
                Estimation::Ml => g.nll,
                Estimation::Reml => g.reml_nll,
            },
            Err(_) => f64::INFINITY,
        }
    };

    let mut trace = Vec::new();
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    for (restart, start) in starts.iter().enumerate() {
        let first = nelder_mead(objective, start, &lo, &hi, SimplexOptions::default());
        // polish from the optimum with a fresh, smaller simplex
        let polished = nelder_mead(
            objective,
            &first.x,
            &lo,
            &hi,
            SimplexOptions {
                initial_step: 0.1,
                ..Default::default()
            },
        );
        let converged = first.converged && polished.converged;
        for (i, v) in first.history.iter().chain(&polished.history).enumerate() {
            trace.push(TraceEntry {
                restart,
                iteration: i,
                neg_loglik: *v,
            });
        }
        let (f, x) = if polished.f <= first.f {
            (polished.f, polished.x)
        } else {
            (first.f, first.x)
        };
        let better = match &best {
            None => true,
            Some((bf, _, bconv)) => (converged && !bconv) || (converged == *bconv && f < *bf),
        };
        if better {
            best = Some((f, x, converged));
        }
    }

    let (_, x, converged) = best.expect("at least one start");
    let mut fit = LmmFit::at_theta(y, spec, &decode(&x))?;
    fit.converged = converged;
    fit.optimizer_trace = trace;
    if !converged {
        return Err(Error::NonConvergence {
            best: Box::new(fit),
        });
    }
    Ok(fit)
}

/// Best linear unbiased predictor of the random effect at the observed locations.
///
/// `eta_hat = s2_alpha G (s2_eps I + s2_alpha G)^{-1} (y - X beta_hat)` with
/// `G = R(phi_hat)` or `gram(Z(phi_hat))`.
pub fn blup_eta(fit: &LmmFit) -> Result<DVector<f64>> {
    match fit.spec.random_correlation(fit.phi)? {
        None => Ok(DVector::zeros(fit.spec.n())),
        Some(g) => Ok(g.matrix() * &fit.weighted_resid * fit.sigma2_alpha),
    }
}

/// Predicted basis coefficients of a first-order fit.
///
/// `alpha_hat = s2_alpha K Z' Sigma^{-1} (y - X beta_hat)`, where `K` is the
/// coefficient covariance (identity, eigenvalues or knot correlation).
pub fn blup_alpha(fit: &LmmFit) -> Result<DVector<f64>> {
    let z = fit.spec.basis_at(fit.phi)?.ok_or_else(|| {
        Error::InvalidInput("basis coefficients need a first-order specification".into())
    })?;
    let k = z.coefficient_cov_matrix();
    let zt_w = z.matrix().transpose() * &fit.weighted_resid;
    Ok(k.matrix() * zt_w * fit.sigma2_alpha)
}

/// Per-column contributions `z_j * alpha_j` (n x m), whose row sums are `eta_hat`.
pub fn basis_contributions(fit: &LmmFit) -> Result<Option<(BasisExpansion, DMatrix<f64>)>> {
    let Some(z) = fit.spec.basis_at(fit.phi)? else {
        return Ok(None);
    };
    let alpha = blup_alpha(fit)?;
    let mut out = z.matrix().clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= alpha[j];
    }
    Ok(Some((z, out)))
}

/// Predictions at new locations with covariates `new_x`.
///
/// Second-order (and eigen first-order) fits krige with the cross-correlation
/// to the training locations; other first-order fits evaluate the basis at
/// the new locations and apply `alpha_hat`.
pub fn predict(
    fit: &LmmFit,
    new_coords: &Coordinates,
    new_x: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let spec = &fit.spec;
    if new_coords.dim() != spec.coords().dim() {
        return Err(Error::InvalidInput(format!(
            "new coordinates are {}-D, training coordinates are {}-D",
            new_coords.dim(),
            spec.coords().dim()
        )));
    }
    if new_x.ncols() != spec.x().ncols() || new_x.nrows() != new_coords.len() {
        return Err(Error::InvalidInput(format!(
            "new covariates are {}x{}, expected {}x{}",
            new_x.nrows(),
            new_x.ncols(),
            new_coords.len(),
            spec.x().ncols()
        )));
    }
    let mean = new_x * &fit.beta;
    let krige = |family: Family| -> Result<DVector<f64>> {
        let phi = match spec.phi {
            PhiControl::Fixed(v) => v,
            _ => fit.phi,
        };
        let c = cross_corr_matrix(
            new_coords,
            spec.coords(),
            &CorrelationModel::new(family, phi)?,
        )?;
        Ok(&mean + c * &fit.weighted_resid * fit.sigma2_alpha)
    };
    match &spec.random {
        RandomEffect::None => Ok(mean),
        RandomEffect::SecondOrder(f) => krige(*f),
        RandomEffect::FirstOrder(FirstOrderBasis::Eigen(f)) => krige(*f),
        RandomEffect::FirstOrder(_) => {
            let z = spec
                .basis_at(fit.phi)?
                .expect("first-order spec has a basis");
            let z_new = z.evaluate_at(new_coords)?;
            Ok(mean + z_new * blup_alpha(fit)?)
        }
    }
}

/// Wald interval `beta_k -/+ z_{(1+level)/2} * se_k` with a standard-normal quantile.
pub fn wald_ci(fit: &LmmFit, coef_index: usize, level: f64) -> Result<(f64, f64)> {
    if coef_index >= fit.beta.len() {
        return Err(Error::InvalidInput(format!(
            "coefficient index {coef_index} out of range (p = {})",
            fit.beta.len()
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!(
            "level must be in (0, 1), got {level}"
        )));
    }
    let se = fit.beta_cov[(coef_index, coef_index)].max(0.0).sqrt();
    Ok(wald_interval(fit.beta[coef_index], se, level))
}

pub fn wald_interval(estimate: f64, se: f64, level: f64) -> (f64, f64) {
    let z = normal_quantile((1.0 + level) / 2.0);
    (estimate - z * se, estimate + z * se)
}

pub(crate) fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Draws `y = X beta + eta + e` with `eta ~ N(0, s2_alpha R(phi))` and
/// `e ~ N(0, s2_eps I)`; `s2_alpha = 0` skips the correlated part.
pub fn simulate_lmm(
    x: &DMatrix<f64>,
    beta: &DVector<f64>,
    coords: &Coordinates,
    model: &CorrelationModel,
    theta: &Theta,
    stream: &mut RandomStream,
) -> Result<DVector<f64>> {
    let n = x.nrows();
    if x.ncols() != beta.len() || coords.len() != n {
        return Err(Error::InvalidInput(
            "X, beta and coordinates disagree in size".into(),
        ));
    }
    if theta.sigma2_eps < 0.0 || theta.sigma2_alpha < 0.0 {
        return Err(Error::InvalidInput("variances must be non-negative".into()));
    }
    let mut y = x * beta;
    if theta.sigma2_alpha > 0.0 {
        let eig = sym_eigen(&corr_matrix(coords, model))?;
        let lambda = eig.clamped_values();
        let mut root = eig.vectors;
        for (j, mut col) in root.column_iter_mut().enumerate() {
            col *= lambda[j].sqrt();
        }
        y += root * stream.gaussian_vector(n) * theta.sigma2_alpha.sqrt();
    }
    if theta.sigma2_eps > 0.0 {
        y += stream.gaussian_vector(n) * theta.sigma2_eps.sqrt();
    }
    Ok(y)
}

/// Converts a second-order specification into the equivalent first-order one
/// with the eigen basis of `R(phi)`; `phi` is held fixed in the result.
pub fn to_first_order(spec: &LmmSpec, phi: f64) -> Result<LmmSpec> {
    let family = match spec.random {
        RandomEffect::SecondOrder(f) => f,
        _ => {
            return Err(Error::InvalidInput(
                "only second-order specifications can be converted".into(),
            ))
        }
    };
    // validate eagerly so errors surface here rather than at first use
    eigen_basis(&corr_matrix(
        spec.coords(),
        &CorrelationModel::new(family, phi)?,
    ))?;
    let mut out = spec.clone();
    out.random = RandomEffect::FirstOrder(FirstOrderBasis::Eigen(family));
    out.phi = PhiControl::Fixed(phi);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::RandomStream;

    fn intercept_trend(t: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(t.len(), 2, |i, j| if j == 0 { 1.0 } else { t[i] })
    }

    fn names2() -> Vec<String> {
        vec!["intercept".into(), "t".into()]
    }

    fn times(n: usize) -> Vec<f64> {
        (1..=n).map(|i| i as f64).collect()
    }

    /// Dense Gaussian elimination with partial pivoting; independent of nalgebra's solvers.
    fn explicit_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let mut m: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut r: Vec<f64> = (0..n).map(|j| a[(i, j)]).collect();
                r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
                r
            })
            .collect();
        for c in 0..n {
            let p = (c..n)
                .max_by(|&x, &y| m[x][c].abs().partial_cmp(&m[y][c].abs()).unwrap())
                .unwrap();
            m.swap(c, p);
            let d = m[c][c];
            for v in m[c].iter_mut() {
                *v /= d;
            }
            for r in 0..n {
                if r != c {
                    let f = m[r][c];
                    let row_c = m[c].clone();
                    for (v, w) in m[r].iter_mut().zip(row_c) {
                        *v -= f * w;
                    }
                }
            }
        }
        DMatrix::from_fn(n, n, |i, j| m[i][n + j])
    }

    fn det_by_elimination(a: &DMatrix<f64>) -> f64 {
        let n = a.nrows();
        let mut m = a.clone();
        let mut det = 1.0;
        for c in 0..n {
            let p = (c..n)
                .max_by(|&x, &y| m[(x, c)].abs().partial_cmp(&m[(y, c)].abs()).unwrap())
                .unwrap();
            if p != c {
                m.swap_rows(p, c);
                det = -det;
            }
            det *= m[(c, c)];
            for r in (c + 1)..n {
                let f = m[(r, c)] / m[(c, c)];
                for k in c..n {
                    m[(r, k)] -= f * m[(c, k)];
                }
            }
        }
        det
    }

    fn ar1_spec(t: &[f64]) -> LmmSpec {
        LmmSpec::new(
            intercept_trend(t),
            names2(),
            Coordinates::from_1d(t).unwrap(),
            RandomEffect::SecondOrder(Family::Ar1),
        )
        .unwrap()
    }

    #[test]
    fn no_random_effect_matches_ols_likelihood() {
        let t = times(12);
        let mut s = RandomStream::new(1);
        let y = DVector::from_iterator(12, t.iter().map(|v| 2.0 - 0.3 * v + s.next_gaussian()));
        let spec = ar1_spec(&t);
        let theta = Theta::new(1.7, 0.0, 0.4);
        let nll = marginal_nll(&y, &spec, &theta).unwrap();
        let o = ols(spec.x(), &y).unwrap();
        let n = 12.0;
        let want = 0.5 * (n * (2.0 * std::f64::consts::PI * 1.7).ln() + o.rss / 1.7);
        assert!((nll - want).abs() < 1e-10);
    }

    #[test]
    fn nll_matches_explicit_density() {
        let t = times(5);
        let y = DVector::from_row_slice(&[1.3, 0.2, -0.4, 0.9, 2.1]);
        let spec = ar1_spec(&t);
        let theta = Theta::new(0.6, 1.4, 0.5);
        let nll = marginal_nll(&y, &spec, &theta).unwrap();
        // oracle: explicit inverse and determinant of the 5x5 covariance
        let r = DMatrix::from_fn(5, 5, |i, j| 0.5f64.powi((i as i32 - j as i32).abs()));
        let sigma = DMatrix::identity(5, 5) * 0.6 + r * 1.4;
        let si = explicit_inverse(&sigma);
        let x = intercept_trend(&t);
        let beta = explicit_inverse(&(x.transpose() * &si * &x)) * x.transpose() * &si * &y;
        let e = &y - &x * beta;
        let quad = (e.transpose() * &si * &e)[(0, 0)];
        let want = 0.5
            * (5.0 * (2.0 * std::f64::consts::PI).ln() + det_by_elimination(&sigma).ln() + quad);
        assert!((nll - want).abs() < 1e-10, "{nll} vs {want}");
    }

    #[test]
    fn restricted_nll_matches_explicit_formula() {
        let t = times(5);
        let y = DVector::from_row_slice(&[1.3, 0.2, -0.4, 0.9, 2.1]);
        let spec = ar1_spec(&t);
        let theta = Theta::new(0.6, 1.4, 0.5);
        let got = restricted_nll(&y, &spec, &theta).unwrap();
        let r = DMatrix::from_fn(5, 5, |i, j| 0.5f64.powi((i as i32 - j as i32).abs()));
        let sigma = DMatrix::identity(5, 5) * 0.6 + r * 1.4;
        let si = explicit_inverse(&sigma);
        let x = intercept_trend(&t);
        let xsx = x.transpose() * &si * &x;
        let beta = explicit_inverse(&xsx) * x.transpose() * &si * &y;
        let e = &y - &x * beta;
        let quad = (e.transpose() * &si * &e)[(0, 0)];
        let want = 0.5
            * (3.0 * (2.0 * std::f64::consts::PI).ln()
                + det_by_elimination(&sigma).ln()
                + det_by_elimination(&xsx).ln()
                + quad);
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn reml_without_random_effect_uses_n_minus_p() {
        let t = times(10);
        let mut s = RandomStream::new(12);
        let y = DVector::from_iterator(10, t.iter().map(|v| 1.0 + 0.5 * v + s.next_gaussian()));
        let spec = LmmSpec::new(
            intercept_trend(&t),
            names2(),
            Coordinates::from_1d(&t).unwrap(),
            RandomEffect::None,
        )
        .unwrap()
        .with_estimation(Estimation::Reml);
        let fit = fit_ml(&y, &spec).unwrap();
        let o = ols(spec.x(), &y).unwrap();
        assert!((fit.sigma2_eps - o.rss / 8.0).abs() < 1e-12);
    }

    #[test]
    fn reml_inflates_ar1_variance() {
        let t = times(30);
        let mut s = RandomStream::new(21);
        let x = intercept_trend(&t);
        let model = CorrelationModel::new(Family::Ar1, 0.6).unwrap();
        let y = simulate_lmm(
            &x,
            &DVector::from_vec(vec![1.0, 0.1]),
            &Coordinates::from_1d(&t).unwrap(),
            &model,
            &Theta::new(0.0, 1.0, 0.6),
            &mut s,
        )
        .unwrap();
        let spec = ar1_spec(&t).with_nugget(false);
        let ml = fit_ml(&y, &spec).unwrap();
        let reml = fit_ml(&y, &spec.clone().with_estimation(Estimation::Reml)).unwrap();
        assert!(reml.beta_cov[(1, 1)] > ml.beta_cov[(1, 1)]);
        // ML maximizes the full likelihood
        assert!(ml.loglik >= reml.loglik - 1e-9);
    }

    #[test]
    fn first_and_second_order_agree() {
        let t = times(9);
        let mut s = RandomStream::new(3);
        let y = s.gaussian_vector(9);
        let second = ar1_spec(&t);
        let first = to_first_order(&second, 0.6).unwrap();
        for theta in [Theta::new(0.5, 1.0, 0.6), Theta::new(2.0, 0.1, 0.6)] {
            let a = marginal_nll(&y, &second, &theta).unwrap();
            let b = marginal_nll(&y, &first, &theta).unwrap();
            assert!((a - b).abs() < 1e-8);
        }
        let g = first.random_correlation(0.0).unwrap().unwrap();
        let r = corr_matrix(
            first.coords(),
            &CorrelationModel::new(Family::Ar1, 0.6).unwrap(),
        );
        assert!((g.matrix() - r.matrix()).amax() < 1e-10);
    }

    #[test]
    fn blup_eta_matches_explicit_formula() {
        let t = [0.0, 0.7, 1.9, 3.2];
        let y = DVector::from_row_slice(&[0.4, 1.1, -0.3, 0.8]);
        let x = DMatrix::from_element(4, 1, 1.0);
        let spec = LmmSpec::new(
            x.clone(),
            vec!["intercept".into()],
            Coordinates::from_1d(&t).unwrap(),
            RandomEffect::SecondOrder(Family::Gaussian),
        )
        .unwrap();
        let theta = Theta::new(0.3, 1.2, 2.0);
        let fit = LmmFit::at_theta(&y, &spec, &theta).unwrap();
        let eta = blup_eta(&fit).unwrap();
        let r = DMatrix::from_fn(4, 4, |i, j| (-(t[i] - t[j]).powi(2) / 2.0).exp());
        let sigma = DMatrix::identity(4, 4) * 0.3 + &r * 1.2;
        let si = explicit_inverse(&sigma);
        let beta = explicit_inverse(&(x.transpose() * &si * &x)) * x.transpose() * &si * &y;
        let want = &r * 1.2 * &si * (&y - &x * beta);
        assert!((eta - want).amax() < 1e-10);
    }

    #[test]
    fn zero_residual_and_zero_variance_give_zero_blup() {
        let t = times(6);
        let x = intercept_trend(&t);
        let y = &x * DVector::from_row_slice(&[3.0, -0.5]);
        let spec = ar1_spec(&t);
        let fit = LmmFit::at_theta(&y, &spec, &Theta::new(0.5, 1.0, 0.3)).unwrap();
        assert!(blup_eta(&fit).unwrap().amax() < 1e-12);
        let y2 = DVector::from_row_slice(&[1.0, 0.0, 2.0, 1.0, 3.0, 2.0]);
        let fit = LmmFit::at_theta(&y2, &spec, &Theta::new(0.5, 0.0, 0.3)).unwrap();
        assert_eq!(blup_eta(&fit).unwrap().amax(), 0.0);
        let first = to_first_order(&spec, 0.3).unwrap();
        let fit = LmmFit::at_theta(&y, &first, &Theta::new(0.5, 1.0, 0.3)).unwrap();
        assert!(blup_alpha(&fit).unwrap().amax() < 1e-12);
    }

    #[test]
    fn group_blup_is_shrunken_group_mean() {
        let labels = ["a", "a", "b", "b", "c", "c"];
        let y = DVector::from_row_slice(&[1.0, 2.0, 4.0, 5.0, 0.5, -0.5]);
        let z = crate::basis::grouping_basis(&labels).unwrap();
        let spec = LmmSpec::new(
            DMatrix::from_element(6, 1, 1.0),
            vec!["intercept".into()],
            Coordinates::from_1d(&times(6)).unwrap(),
            RandomEffect::FirstOrder(FirstOrderBasis::Fixed(z)),
        )
        .unwrap();
        let (s2e, s2a) = (0.8, 1.5);
        let fit = LmmFit::at_theta(&y, &spec, &Theta::new(s2e, s2a, f64::NAN)).unwrap();
        let alpha = blup_alpha(&fit).unwrap();
        // balanced one-way layout: beta is the grand mean and each group
        // effect shrinks its mean deviation by n_g s2a / (n_g s2a + s2e)
        let grand = y.mean();
        assert!((fit.beta[0] - grand).abs() < 1e-10);
        let shrink = 2.0 * s2a / (2.0 * s2a + s2e);
        for (g, idx) in [(0, [0, 1]), (1, [2, 3]), (2, [4, 5])] {
            let mean = (y[idx[0]] + y[idx[1]]) / 2.0;
            assert!((alpha[g] - shrink * (mean - grand)).abs() < 1e-8);
        }
    }

    #[test]
    fn noiseless_fit() {
        let t = times(20);
        let x = intercept_trend(&t);
        let beta0 = DVector::from_row_slice(&[4.0, 0.25]);
        let y = &x * &beta0;
        let fit = fit_ml(&y, &ar1_spec(&t)).unwrap();
        assert!((&fit.beta - &beta0).amax() < 1e-8);
        assert!(fit.sigma2_eps < 1e-6 && fit.sigma2_alpha < 1e-6);
    }

    #[test]
    fn constant_response_fits() {
        let t = times(10);
        let spec = LmmSpec::new(
            DMatrix::from_element(10, 1, 1.0),
            vec!["intercept".into()],
            Coordinates::from_1d(&t).unwrap(),
            RandomEffect::SecondOrder(Family::Ar1),
        )
        .unwrap();
        let fit = fit_ml(&DVector::from_element(10, 2.5), &spec).unwrap();
        assert!((fit.beta[0] - 2.5).abs() < 1e-8);
        assert!(fit.sigma2_eps < 1e-6 && fit.sigma2_alpha < 1e-6);
    }

    #[test]
    fn white_noise_trend_recovered() {
        let t = times(60);
        let x = intercept_trend(&t);
        let mut s = RandomStream::new(17);
        let beta0 = DVector::from_row_slice(&[1.0, -0.2]);
        let y = &x * &beta0 + s.gaussian_vector(60);
        let fit = fit_ml(&y, &ar1_spec(&t)).unwrap();
        for k in 0..2 {
            let se = fit.beta_cov[(k, k)].sqrt();
            assert!((fit.beta[k] - beta0[k]).abs() < 3.0 * se);
        }
        let total = fit.sigma2_eps + fit.sigma2_alpha;
        assert!((total - 1.0).abs() < 0.5, "total variance {total}");
    }

    #[test]
    fn predict_at_training_points_is_fitted() {
        let mut s = RandomStream::new(8);
        let t: Vec<f64> = (0..15)
            .map(|i| i as f64 * 0.5 + 0.1 * s.next_uniform())
            .collect();
        let y = DVector::from_iterator(15, t.iter().map(|v| v.sin() + 0.1 * s.next_gaussian()));
        let spec = LmmSpec::new(
            DMatrix::from_element(15, 1, 1.0),
            vec!["intercept".into()],
            Coordinates::from_1d(&t).unwrap(),
            RandomEffect::SecondOrder(Family::Gaussian),
        )
        .unwrap();
        let fit = LmmFit::at_theta(&y, &spec, &Theta::new(0.05, 1.0, 1.5)).unwrap();
        let p = predict(&fit, spec.coords(), spec.x()).unwrap();
        assert!((p - fit.fitted().unwrap()).amax() < 1e-10);
    }

    #[test]
    fn predict_interpolates_as_nugget_vanishes() {
        let t = [0.0, 1.0, 2.5, 4.0];
        let y = DVector::from_row_slice(&[1.0, 3.0, -1.0, 0.5]);
        let spec = LmmSpec::new(
            DMatrix::from_element(4, 1, 1.0),
            vec!["intercept".into()],
            Coordinates::from_1d(&t).unwrap(),
            RandomEffect::SecondOrder(Family::Exponential),
        )
        .unwrap();
        let fit = LmmFit::at_theta(&y, &spec, &Theta::new(1e-9, 2.0, 1.0)).unwrap();
        let p = predict(
            &fit,
            &Coordinates::from_1d(&[2.5]).unwrap(),
            &DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        assert!((p[0] + 1.0).abs() < 1e-4);
    }

    #[test]
    fn predict_without_random_effect_is_intercept() {
        let t = times(8);
        let spec = LmmSpec::new(
            DMatrix::from_element(8, 1, 1.0),
            vec!["intercept".into()],
            Coordinates::from_1d(&t).unwrap(),
            RandomEffect::SecondOrder(Family::Ar1),
        )
        .unwrap();
        let y = DVector::from_row_slice(&[1., 2., 3., 2., 1., 2., 3., 2.]);
        let fit = LmmFit::at_theta(&y, &spec, &Theta::new(1.0, 0.0, 0.5)).unwrap();
        let p = predict(
            &fit,
            &Coordinates::from_1d(&[100.0]).unwrap(),
            &DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        assert!((p[0] - fit.beta[0]).abs() < 1e-12);
        assert!(predict(
            &fit,
            &Coordinates::from_points(&[[0.0, 0.0]]).unwrap(),
            &DMatrix::from_element(1, 1, 1.0)
        )
        .is_err());
    }

    #[test]
    fn wald_standard_normal() {
        let (lo, hi) = wald_interval(0.0, 1.0, 0.95);
        assert!((lo + 1.959964).abs() < 1e-6 && (hi - 1.959964).abs() < 1e-6);
    }

    #[test]
    fn wald_matches_ols_z_interval() {
        let t = times(30);
        let x = intercept_trend(&t);
        let mut s = RandomStream::new(4);
        let y = &x * DVector::from_row_slice(&[2.0, 0.1]) + s.gaussian_vector(30);
        let spec = LmmSpec::new(
            x.clone(),
            names2(),
            Coordinates::from_1d(&t).unwrap(),
            RandomEffect::None,
        )
        .unwrap();
        let fit = fit_ml(&y, &spec).unwrap();
        // normal-equations oracle with ML variance RSS / n
        let xtx_inv = explicit_inverse(&(x.transpose() * &x));
        let b = &xtx_inv * x.transpose() * &y;
        let rss = (&y - &x * &b).norm_squared();
        let se = (rss / 30.0 * xtx_inv[(1, 1)]).sqrt();
        let (lo, hi) = wald_ci(&fit, 1, 0.95).unwrap();
        let z = 1.959963984540054;
        assert!((lo - (b[1] - z * se)).abs() < 1e-8);
        assert!((hi - (b[1] + z * se)).abs() < 1e-8);
        assert!(wald_ci(&fit, 2, 0.95).is_err());
    }

    #[test]
    fn rank_deficient_design_names_columns() {
        let t = times(6);
        let x = DMatrix::from_fn(6, 3, |i, j| match j {
            0 => 1.0,
            1 => t[i],
            _ => 2.0 * t[i] + 1.0,
        });
        let err = LmmSpec::new(
            x,
            vec!["one".into(), "t".into(), "t2".into()],
            Coordinates::from_1d(&t).unwrap(),
            RandomEffect::None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("t2"), "{err}");
    }

    #[test]
    fn compound_symmetry_has_three_nonzero_eigen_columns() {
        let z = crate::basis::grouping_basis(&["a", "a", "b", "b", "c", "c"]).unwrap();
        let e = eigen_basis(&gram(&z)).unwrap();
        let nonzero = e.matrix().column_iter().filter(|c| c.norm() > 1e-8).count();
        assert_eq!(nonzero, 3);
    }

    #[test]
    fn published_eigen_basis_via_conversion() {
        let spec = ar1_spec(&[1.0, 2.0, 3.0]);
        let first = to_first_order(&spec, 0.5).unwrap();
        let z = first.basis_at(0.5).unwrap().unwrap();
        let want: [f64; 9] = [-0.74, -0.61, 0.29, -0.87, 0.0, -0.49, -0.74, 0.61, 0.29];
        for i in 0..3 {
            for j in 0..3 {
                assert!((z.matrix()[(i, j)].abs() - want[i * 3 + j].abs()).abs() <= 0.01);
            }
        }
    }
}
