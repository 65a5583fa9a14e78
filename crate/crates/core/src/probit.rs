//! Bayesian probit regression with a spatial random effect.
//!
//! The latent-utility Gibbs sampler works on either the full-rank random
//! effect `eta ~ N(0, sigma2_alpha R(phi))` or a predictive process
//! `eta = C R*^{-1} alpha` with `alpha ~ N(0, sigma2_alpha R*(phi))`, both
//! with the exponential correlation family.
//!
//! ```
//! use autocorr_basis::corr::Coordinates;
//! use autocorr_basis::probit::{gibbs_fit, ProbitRandom, ProbitSpec};
//! use nalgebra::DMatrix;
//!
//! let pts: Vec<[f64; 2]> = (0..12).map(|i| [(i % 4) as f64, (i / 4) as f64]).collect();
//! let coords = Coordinates::from_points(&pts).unwrap();
//! let y: Vec<f64> = (0..12).map(|i| ((i % 4) >= 2) as u8 as f64).collect();
//! let x = DMatrix::from_element(12, 1, 1.0);
//! let spec = ProbitSpec::new(&y, x, coords, ProbitRandom::FullRank).unwrap();
//! let draws = gibbs_fit(&spec, 60, 20, 7).unwrap();
//! assert_eq!(draws.beta_draws.nrows(), 40);
//! assert_eq!(draws.latent_sign_violations, 0);
//! ```

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::function::erf::{erfc, erfc_inv};

use crate::basis::linspace;
use crate::corr::{corr_matrix, cross_corr_matrix, Coordinates, CorrelationModel, Family};
use crate::error::{Error, Result};
use crate::numkernel::{sym_eigen, RandomStream, SpdFactor, SymMatrix};

const FAMILY: Family = Family::Exponential;
const EIGEN_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum ProbitRandom {
    /// `eta` has one coefficient per observation.
    FullRank,
    PredictiveProcess {
        knots: Coordinates,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaPrior {
    InverseGamma {
        shape: f64,
        scale: f64,
    },
    /// Holds the variance at a fixed value; `Fixed(0.0)` removes the random effect.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbitPriors {
    /// Prior variance of each regression coefficient (zero mean).
    pub beta_variance: f64,
    pub sigma2_alpha: SigmaPrior,
    /// Support of the discrete uniform prior on phi.
    pub phi_grid: Vec<f64>,
}

impl ProbitPriors {
    /// `beta ~ N(0, 100 I)`, `sigma2_alpha ~ IG(2, 1)` and 20 phi values
    /// evenly spaced over `(0.05 d_max, d_max]`.
    pub fn defaults(coords: &Coordinates) -> Self {
        let dmax = coords.max_distance();
        let g = 20;
        let lo = 0.05 * dmax;
        let step = (dmax - lo) / g as f64;
        ProbitPriors {
            beta_variance: 100.0,
            sigma2_alpha: SigmaPrior::InverseGamma {
                shape: 2.0,
                scale: 1.0,
            },
            phi_grid: (1..=g).map(|k| lo + step * k as f64).collect(),
        }
    }

    /// Inclusive evenly spaced grid.
    pub fn with_phi_grid(mut self, lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo > 0.0 && hi >= lo && n >= 1) || (n > 1 && hi == lo) {
            return Err(Error::InvalidInput(format!(
                "phi grid {lo}:{hi}:{n} must satisfy 0 < lo < hi and n >= 1"
            )));
        }
        self.phi_grid = if n == 1 {
            vec![lo]
        } else {
            linspace(lo, hi, n)
        };
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta_variance > 0.0 && self.beta_variance.is_finite()) {
            return Err(Error::InvalidInput(
                "beta prior variance must be positive".into(),
            ));
        }
        match self.sigma2_alpha {
            SigmaPrior::InverseGamma { shape, scale } if shape > 0.0 && scale > 0.0 => {}
            SigmaPrior::Fixed(v) if v >= 0.0 && v.is_finite() => {}
            other => {
                return Err(Error::InvalidInput(format!(
                    "invalid sigma2_alpha prior {other:?}"
                )))
            }
        }
        if self.phi_grid.is_empty() || self.phi_grid.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidInput(
                "phi grid must hold positive finite values".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ProbitSpec {
    y: Vec<bool>,
    x: DMatrix<f64>,
    x_names: Vec<String>,
    coords: Coordinates,
    random: ProbitRandom,
    priors: ProbitPriors,
}

impl ProbitSpec {
    /// Default priors from [`ProbitPriors::defaults`]; covariates are named `x0, x1, ...`.
    pub fn new(
        y: &[f64],
        x: DMatrix<f64>,
        coords: Coordinates,
        random: ProbitRandom,
    ) -> Result<Self> {
        let n = y.len();
        if x.nrows() != n || coords.len() != n {
            return Err(Error::InvalidInput(format!(
                "y has {n} entries, X has {} rows, coordinates have {} points",
                x.nrows(),
                coords.len()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::InvalidInput("X needs at least one column".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("X has non-finite entries".into()));
        }
        let y = y
            .iter()
            .enumerate()
            .map(|(i, &v)| match v {
                0.0 => Ok(false),
                1.0 => Ok(true),
                _ => Err(Error::InvalidInput(format!("y[{i}] = {v} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if let ProbitRandom::PredictiveProcess { knots } = &random {
            if knots.dim() != coords.dim() || knots.is_empty() {
                return Err(Error::InvalidKnots(
                    "knots must be non-empty and share the data's dimension".into(),
                ));
            }
            if !knots.all_distinct() {
                return Err(Error::InvalidKnots(
                    "predictive-process knots must be distinct".into(),
                ));
            }
        }
        let priors = ProbitPriors::defaults(&coords);
        let x_names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
        let spec = ProbitSpec {
            y,
            x,
            x_names,
            coords,
            random,
            priors,
        };
        if spec.separated() {
            log::warn!("all responses are identical; the posterior is dominated by the prior");
        }
        Ok(spec)
    }

    pub fn with_priors(mut self, priors: ProbitPriors) -> Result<Self> {
        priors.validate()?;
        self.priors = priors;
        Ok(self)
    }

    pub fn with_x_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.x.ncols() {
            return Err(Error::InvalidInput(format!(
                "{} names for {} covariates",
                names.len(),
                self.x.ncols()
            )));
        }
        self.x_names = names;
        Ok(self)
    }

    /// True when every response is 0 or every response is 1.
    pub fn separated(&self) -> bool {
        self.y.iter().all(|&v| v) || self.y.iter().all(|&v| !v)
    }

    pub fn y(&self) -> &[bool] {
        &self.y
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

    pub fn random(&self) -> &ProbitRandom {
        &self.random
    }

    pub fn priors(&self) -> &ProbitPriors {
        &self.priors
    }

    /// Locations carrying the random-effect coefficients.
    fn latent_coords(&self) -> &Coordinates {
        match &self.random {
            ProbitRandom::FullRank => &self.coords,
            ProbitRandom::PredictiveProcess { knots } => knots,
        }
    }
}

/// Retained draws (after burn-in) from one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub beta_draws: DMatrix<f64>,
    /// `eta` for a full-rank fit, `alpha` (one column per knot) for a predictive process.
    pub alpha_or_eta_draws: DMatrix<f64>,
    pub sigma2_alpha_draws: Vec<f64>,
    pub phi_draws: Vec<f64>,
    pub phi_grid: Vec<f64>,
    pub seed: u64,
    pub n_iter: usize,
    pub n_burn: usize,
    /// Latent utilities on the wrong side of zero, summed over all iterations.
    pub latent_sign_violations: usize,
}

/// Spectral square root `L = Q diag(lambda)^{1/2}` of a correlation matrix and
/// the posterior geometry of the whitened coefficients `u = L^{-1} alpha`.
struct GridTerm {
    lambda: DVector<f64>,
    sqrt_k: DMatrix<f64>,
    /// `C R*^{-1}` for a predictive process; identity (absent) for full rank.
    z: Option<DMatrix<f64>>,
    /// Eigenvectors of `B'B` with `B = Z L`; absent when `B'B` is already diagonal.
    v: Option<DMatrix<f64>>,
    d: DVector<f64>,
    half_log_det: f64,
}

fn spectral_root(k: &SymMatrix) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let eig = sym_eigen(k)?;
    let top = eig.values[0];
    if top.is_nan() || top <= 0.0 {
        return Err(Error::Singular("random-effect correlation".into()));
    }
    let lambda = eig.values.map(|v| v.max(EIGEN_FLOOR * top));
    let mut root = eig.vectors;
    for (j, mut col) in root.column_iter_mut().enumerate() {
        col *= lambda[j].sqrt();
    }
    Ok((lambda, root))
}

impl GridTerm {
    fn new(spec: &ProbitSpec, phi: f64) -> Result<Self> {
        let model = CorrelationModel::new(FAMILY, phi)?;
        let latent = spec.latent_coords();
        let k = corr_matrix(latent, &model);
        let (lambda, sqrt_k) = spectral_root(&k)?;
        let half_log_det = 0.5 * lambda.iter().map(|l| l.ln()).sum::<f64>();
        match &spec.random {
            ProbitRandom::FullRank => Ok(GridTerm {
                d: lambda.clone(),
                lambda,
                sqrt_k,
                z: None,
                v: None,
                half_log_det,
            }),
            ProbitRandom::PredictiveProcess { knots } => {
                let c = cross_corr_matrix(&spec.coords, knots, &model)?;
                let k_inv = inverse_from_root(&lambda, &sqrt_k);
                let z = &c * &k_inv;
                let b = &z * &sqrt_k;
                let btb = sym_eigen(&SymMatrix::symmetrize_upper(b.transpose() * &b))?;
                Ok(GridTerm {
                    lambda,
                    sqrt_k,
                    z: Some(z),
                    v: Some(btb.vectors),
                    d: btb.values.map(|x| x.max(0.0)),
                    half_log_det,
                })
            }
        }
    }

    fn eta(&self, alpha: &DVector<f64>) -> DVector<f64> {
        match &self.z {
            Some(z) => z * alpha,
            None => alpha.clone(),
        }
    }

    fn whiten(&self, alpha: &DVector<f64>) -> DVector<f64> {
        (self.sqrt_k.tr_mul(alpha)).component_div(&self.lambda)
    }
}

/// `Q diag(lambda)^{-1} Q'` from `L = Q diag(lambda)^{1/2}`.
fn inverse_from_root(lambda: &DVector<f64>, root: &DMatrix<f64>) -> DMatrix<f64> {
    let mut scaled = root.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col /= lambda[j] * lambda[j];
    }
    scaled * root.transpose()
}

pub(crate) fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn std_normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Draws `mean + e` with `e ~ N(0, 1)` conditioned on the sign of the result.
fn truncated_latent(mean: f64, positive: bool, s: &mut RandomStream) -> f64 {
    let u = s.next_uniform();
    let z = if positive {
        // e >= -mean
        let tail = std_normal_cdf(mean);
        mean - std_normal_quantile(u * tail)
    } else {
        // e < -mean
        let tail = std_normal_cdf(-mean);
        mean + std_normal_quantile(u * tail)
    };
    match (positive, z.is_finite()) {
        (true, true) => z.max(0.0),
        (false, true) if z < 0.0 => z,
        (true, false) => 0.0,
        (false, _) => -f64::MIN_POSITIVE,
    }
}

fn sample_grid(logp: &[f64], s: &mut RandomStream) -> usize {
    let top = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logp.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    let target = s.next_uniform() * total;
    let mut acc = 0.0;
    for (k, wk) in w.iter().enumerate() {
        acc += wk;
        if target < acc {
            return k;
        }
    }
    w.len() - 1
}

/// Runs one Gibbs chain of `n_iter` iterations and keeps the last `n_iter - n_burn`.
pub fn gibbs_fit(
    spec: &ProbitSpec,
    n_iter: usize,
    n_burn: usize,
    seed: u64,
) -> Result<PosteriorSamples> {
    if n_iter <= n_burn {
        return Err(Error::InvalidInput(format!(
            "n_iter ({n_iter}) must exceed n_burn ({n_burn})"
        )));
    }
    let n = spec.y.len();
    let p = spec.x.ncols();
    let priors = &spec.priors;
    let grid = &priors.phi_grid;
    let terms: Vec<GridTerm> = grid
        .iter()
        .map(|&phi| GridTerm::new(spec, phi))
        .collect::<Result<_>>()?;
    let m = spec.latent_coords().len();

    // beta | z, eta ~ N(S X'(z - eta), S) with S = (X'X + I / v)^{-1}
    let mut prec = spec.x.tr_mul(&spec.x);
    for j in 0..p {
        prec[(j, j)] += 1.0 / priors.beta_variance;
    }
    let s_beta = SpdFactor::new(
        &SymMatrix::symmetrize_upper(prec),
        "beta posterior precision",
    )?
    .inverse();
    let s_beta_factor = SpdFactor::new(
        &SymMatrix::symmetrize_upper(s_beta.clone()),
        "beta posterior covariance",
    )?;
    let s_beta_xt = &s_beta * spec.x.transpose();

    let mut stream = RandomStream::new(seed);
    let mut beta = DVector::zeros(p);
    let mut alpha = DVector::zeros(m);
    let mut eta = DVector::zeros(n);
    let mut sigma2 = match priors.sigma2_alpha {
        SigmaPrior::Fixed(v) => v,
        SigmaPrior::InverseGamma { shape, scale } => scale / (shape + 1.0),
    };
    let mut g = grid.len() / 2;
    let mut z = DVector::zeros(n);

    let keep = n_iter - n_burn;
    let mut beta_draws = DMatrix::zeros(keep, p);
    let mut latent_draws = DMatrix::zeros(keep, m);
    let mut sigma2_draws = Vec::with_capacity(keep);
    let mut phi_draws = Vec::with_capacity(keep);
    let mut violations = 0;

    for it in 0..n_iter {
        let mean = &spec.x * &beta + &eta;
        for i in 0..n {
            z[i] = truncated_latent(mean[i], spec.y[i], &mut stream);
            if spec.y[i] != (z[i] >= 0.0) {
                violations += 1;
            }
        }

        let b_mean = &s_beta_xt * (&z - &eta);
        beta = b_mean + s_beta_factor.lower_mul(&stream.gaussian_vector(p));

        if sigma2 > 0.0 {
            let t = &terms[g];
            let r = &z - &spec.x * &beta;
            let zt_r = match &t.z {
                Some(zm) => zm.tr_mul(&r),
                None => r,
            };
            let bt_r = t.sqrt_k.tr_mul(&zt_r);
            let w = match &t.v {
                Some(v) => v.tr_mul(&bt_r),
                None => bt_r,
            };
            let eps = stream.gaussian_vector(m);
            let u_rot = DVector::from_fn(m, |k, _| {
                let pk = t.d[k] + 1.0 / sigma2;
                w[k] / pk + eps[k] / pk.sqrt()
            });
            let u = match &t.v {
                Some(v) => v * u_rot,
                None => u_rot,
            };
            alpha = &t.sqrt_k * &u;

            if let SigmaPrior::InverseGamma { shape, scale } = priors.sigma2_alpha {
                let a = shape + 0.5 * m as f64;
                let b = scale + 0.5 * u.norm_squared();
                sigma2 = b / stream.next_gamma(a);
            }

            let logp: Vec<f64> = terms
                .iter()
                .map(|tg| -tg.half_log_det - tg.whiten(&alpha).norm_squared() / (2.0 * sigma2))
                .collect();
            g = sample_grid(&logp, &mut stream);
            eta = terms[g].eta(&alpha);
        } else {
            // without a random effect phi is not identified and follows its prior
            g = sample_grid(&vec![0.0; grid.len()], &mut stream);
        }

        if it >= n_burn {
            let row = it - n_burn;
            beta_draws.row_mut(row).tr_copy_from(&beta);
            latent_draws
                .row_mut(row)
                .tr_copy_from(if spec.random == ProbitRandom::FullRank {
                    &eta
                } else {
                    &alpha
                });
            sigma2_draws.push(sigma2);
            phi_draws.push(grid[g]);
        }
    }

    Ok(PosteriorSamples {
        beta_draws,
        alpha_or_eta_draws: latent_draws,
        sigma2_alpha_draws: sigma2_draws,
        phi_draws,
        phi_grid: grid.clone(),
        seed,
        n_iter,
        n_burn,
        latent_sign_violations: violations,
    })
}

/// Independent chains with the given seeds, run concurrently and returned in seed order.
pub fn gibbs_fit_chains(
    spec: &ProbitSpec,
    n_iter: usize,
    n_burn: usize,
    seeds: &[u64],
) -> Result<Vec<PosteriorSamples>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| scope.spawn(move || gibbs_fit(spec, n_iter, n_burn, seed)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sampler thread panicked"))
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParameterSummary {
    pub mean: f64,
    pub sd: f64,
    /// Monte Carlo standard error of the mean by non-overlapping batch means.
    pub mcse: f64,
}

impl ParameterSummary {
    pub fn of(draws: &[f64]) -> Self {
        let n = draws.len();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let batches = 20.min(n / 2).max(1);
        let size = n / batches;
        let mcse = if batches < 2 {
            sd / (n as f64).sqrt()
        } else {
            let means: Vec<f64> = (0..batches)
                .map(|b| draws[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
                .collect();
            let bm = means.iter().sum::<f64>() / batches as f64;
            let var = means.iter().map(|v| (v - bm).powi(2)).sum::<f64>() / (batches - 1) as f64;
            (var / batches as f64).sqrt()
        };
        ParameterSummary { mean, sd, mcse }
    }

    /// Pools chain summaries: averaged means, combined standard errors.
    fn pool(parts: &[ParameterSummary], pooled_sd: f64) -> Self {
        let k = parts.len() as f64;
        ParameterSummary {
            mean: parts.iter().map(|p| p.mean).sum::<f64>() / k,
            sd: pooled_sd,
            mcse: parts.iter().map(|p| p.mcse * p.mcse).sum::<f64>().sqrt() / k,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PosteriorSummary {
    pub beta: Vec<ParameterSummary>,
    pub sigma2_alpha: ParameterSummary,
    pub phi: ParameterSummary,
    pub draws: usize,
    pub seeds: Vec<u64>,
    pub latent_sign_violations: usize,
}

impl PosteriorSamples {
    pub fn draws(&self) -> usize {
        self.beta_draws.nrows()
    }

    pub fn beta_column(&self, j: usize) -> Vec<f64> {
        self.beta_draws.column(j).iter().copied().collect()
    }

    pub fn summary(&self) -> PosteriorSummary {
        summarize(std::slice::from_ref(self))
    }
}

/// Merges chains in the order given.
pub fn summarize(chains: &[PosteriorSamples]) -> PosteriorSummary {
    assert!(!chains.is_empty(), "summarize needs at least one chain");
    let pool = |get: &dyn Fn(&PosteriorSamples) -> Vec<f64>| {
        let parts: Vec<ParameterSummary> = chains
            .iter()
            .map(|c| ParameterSummary::of(&get(c)))
            .collect();
        let all: Vec<f64> = chains.iter().flat_map(get).collect();
        ParameterSummary::pool(&parts, ParameterSummary::of(&all).sd)
    };
    let p = chains[0].beta_draws.ncols();
    PosteriorSummary {
        beta: (0..p).map(|j| pool(&|c| c.beta_column(j))).collect(),
        sigma2_alpha: pool(&|c| c.sigma2_alpha_draws.clone()),
        phi: pool(&|c| c.phi_draws.clone()),
        draws: chains.iter().map(PosteriorSamples::draws).sum(),
        seeds: chains.iter().map(|c| c.seed).collect(),
        latent_sign_violations: chains.iter().map(|c| c.latent_sign_violations).sum(),
    }
}

/// Posterior mean occurrence probability at each new location.
///
/// For each retained draw the random effect at a new site is normal given
/// the sampled coefficients: the kriging conditional for a full-rank fit and
/// the point mass `c' R*^{-1} alpha` for a predictive process. The normal is
/// integrated analytically, `E Phi(a + e) = Phi(a / sqrt(1 + v))`.
pub fn posterior_predict(
    samples: &PosteriorSamples,
    spec: &ProbitSpec,
    grid: &Coordinates,
    grid_x: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    if grid.dim() != spec.coords.dim() {
        return Err(Error::InvalidInput(format!(
            "prediction coordinates are {}-D, training coordinates {}-D",
            grid.dim(),
            spec.coords.dim()
        )));
    }
    if grid_x.nrows() != grid.len() || grid_x.ncols() != spec.x.ncols() {
        return Err(Error::InvalidInput(format!(
            "prediction covariates are {}x{}, expected {}x{}",
            grid_x.nrows(),
            grid_x.ncols(),
            grid.len(),
            spec.x.ncols()
        )));
    }
    let n_new = grid.len();
    let latent = spec.latent_coords();
    let full_rank = spec.random == ProbitRandom::FullRank;

    // weights W = C_new K^{-1} and conditional variances, per distinct phi
    let mut cache: Vec<Option<(DMatrix<f64>, DVector<f64>)>> = vec![None; samples.phi_grid.len()];
    let fixed = grid_x * samples.beta_draws.transpose();
    let mut prob = DVector::zeros(n_new);
    for (d, (&phi, &s2)) in samples
        .phi_draws
        .iter()
        .zip(&samples.sigma2_alpha_draws)
        .enumerate()
    {
        if s2 == 0.0 {
            for i in 0..n_new {
                prob[i] += std_normal_cdf(fixed[(i, d)]);
            }
            continue;
        }
        let g = samples
            .phi_grid
            .iter()
            .position(|&v| v == phi)
            .ok_or_else(|| {
                Error::InvalidInput(format!("phi draw {phi} is not on the prior grid"))
            })?;
        if cache[g].is_none() {
            let model = CorrelationModel::new(FAMILY, phi)?;
            let (lambda, root) = spectral_root(&corr_matrix(latent, &model))?;
            let c_new = cross_corr_matrix(grid, latent, &model)?;
            let w = &c_new * inverse_from_root(&lambda, &root);
            let var = if full_rank {
                let a = &c_new * &root;
                DVector::from_fn(n_new, |i, _| {
                    let q: f64 = (0..lambda.len())
                        .map(|k| (a[(i, k)] / lambda[k]).powi(2))
                        .sum();
                    (1.0 - q).max(0.0)
                })
            } else {
                DVector::zeros(n_new)
            };
            cache[g] = Some((w, var));
        }
        let (w, var) = cache[g].as_ref().unwrap();
        let coef = samples.alpha_or_eta_draws.row(d).transpose();
        let eta = w * coef;
        for i in 0..n_new {
            prob[i] += std_normal_cdf((fixed[(i, d)] + eta[i]) / (1.0 + s2 * var[i]).sqrt());
        }
    }
    Ok(prob / samples.draws() as f64)
}

/// Binary responses `1[x'beta + eta + e > 0]` with `eta ~ N(0, sigma2_alpha R(phi))`
/// under the exponential correlation family.
pub fn simulate_probit(
    coords: &Coordinates,
    x: &DMatrix<f64>,
    beta: &DVector<f64>,
    sigma2_alpha: f64,
    phi: f64,
    stream: &mut RandomStream,
) -> Result<Vec<f64>> {
    if x.nrows() != coords.len() || x.ncols() != beta.len() {
        return Err(Error::InvalidInput(
            "X, beta and coordinates disagree in size".into(),
        ));
    }
    let n = coords.len();
    let eta = if sigma2_alpha > 0.0 {
        let r = corr_matrix(coords, &CorrelationModel::new(FAMILY, phi)?);
        let (_, root) = spectral_root(&r)?;
        root * stream.gaussian_vector(n) * sigma2_alpha.sqrt()
    } else {
        DVector::zeros(n)
    };
    let mean = x * beta + eta;
    Ok(mean
        .iter()
        .map(|m| {
            if m + stream.next_gaussian() > 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect())
}
