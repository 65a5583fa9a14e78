use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::table::{num, read_json, write_csv, write_json, Table};
use super::{sibling, usage, BasisArg, FitArgs, KnotsArg, PredictArgs};
use crate::basis::{
    grid_knots, grouping_basis, polynomial_basis, shifted_quadratic_basis, uniform_kernel_basis,
};
use crate::corr::{Coordinates, Family};
use crate::diagnose::{default_max_lag, diagnose, DiagnosticsReport};
use crate::error::{Error, Result};
use crate::lmm::{
    basis_contributions, blup_alpha, blup_eta, fit_ml, predict as lmm_predict, wald_ci, Estimation,
    FirstOrderBasis, LmmFit, LmmSpec, PhiControl, RandomEffect, Theta,
};

const DEFAULT_KERNEL_KNOTS: usize = 17;
const DEFAULT_PP_KNOTS: usize = 50;

/// Everything needed to rebuild the model from the training table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(super) struct ModelConfig {
    pub input: PathBuf,
    pub y: String,
    pub coords: Vec<String>,
    pub x: Vec<String>,
    pub intercept: bool,
    pub group: Option<String>,
    pub family: Option<String>,
    pub basis: Option<BasisArg>,
    /// Resolved knot locations, one inner vector per knot.
    pub knots: Option<Vec<Vec<f64>>>,
    pub bandwidth: Option<f64>,
    pub degree: usize,
    pub nugget: bool,
    pub reml: bool,
    pub phi_fixed: Option<f64>,
    pub phi_bounds: Option<(f64, f64)>,
}

pub(super) fn resolve_knots(
    arg: &KnotsArg,
    coords: &Coordinates,
    names: &[String],
) -> Result<Coordinates> {
    match arg {
        KnotsArg::Count(m) => grid_knots(coords, (*m).min(coords.len().max(1))),
        KnotsArg::Values(v) => {
            if coords.dim() != 1 {
                return Err(usage(
                    "a knot list is only valid for 1-D coordinates; pass a CSV for 2-D",
                ));
            }
            Coordinates::from_1d(v)
        }
        KnotsArg::File(path) => Table::read(path)?.coordinates(names),
    }
}

fn knots_coords(cfg: &ModelConfig, dim: usize) -> Result<Option<Coordinates>> {
    cfg.knots
        .as_ref()
        .map(|k| Coordinates::new(dim, k.iter().flatten().copied().collect()))
        .transpose()
}

impl ModelConfig {
    fn family(&self) -> Result<Option<Family>> {
        self.family.as_deref().map(str::parse).transpose()
    }

    fn shifted(&self) -> bool {
        self.basis == Some(BasisArg::Poly) && self.knots.is_some()
    }

    /// Covariates plus any polynomial terms in the first coordinate.
    fn design(&self, table: &Table, coords: &Coordinates) -> Result<(DMatrix<f64>, Vec<String>)> {
        let (base, mut names) = table.design(&self.x, self.intercept && !self.shifted())?;
        if self.basis != Some(BasisArg::Poly) {
            return Ok((base, names));
        }
        let t = coords.first_axis();
        let axis = &self.coords[0];
        let poly = match &self.knots {
            Some(k) => {
                let knots: Vec<f64> = k.iter().map(|p| p[0]).collect();
                names.extend(knots.iter().map(|k| format!("({axis}-{k})^2")));
                shifted_quadratic_basis(&t, &knots)?.matrix().clone()
            }
            None => {
                let b = polynomial_basis(&t, self.degree)?;
                names.extend((1..=self.degree).map(|d| format!("{axis}^{d}")));
                b.matrix().columns(1, self.degree).into_owned()
            }
        };
        let mut x = DMatrix::zeros(base.nrows(), base.ncols() + poly.ncols());
        x.columns_mut(0, base.ncols()).copy_from(&base);
        x.columns_mut(base.ncols(), poly.ncols()).copy_from(&poly);
        Ok((x, names))
    }

    fn random(&self, table: &Table, coords: &Coordinates) -> Result<RandomEffect> {
        let family = self.family()?;
        let knots = knots_coords(self, coords.dim())?;
        let need_knots = || knots.clone().ok_or_else(|| usage("this basis needs knots"));
        Ok(match self.basis {
            None | Some(BasisArg::Poly) => match family {
                None => RandomEffect::None,
                Some(f) => RandomEffect::SecondOrder(f),
            },
            Some(BasisArg::Eigen) => RandomEffect::FirstOrder(FirstOrderBasis::Eigen(
                family.ok_or_else(|| usage("--basis eigen needs --family"))?,
            )),
            Some(BasisArg::GaussKernel) => {
                RandomEffect::FirstOrder(FirstOrderBasis::GaussianKernel {
                    knots: need_knots()?,
                })
            }
            Some(BasisArg::Pp) => RandomEffect::FirstOrder(FirstOrderBasis::PredictiveProcess {
                knots: need_knots()?,
                family: family.unwrap_or(Family::Exponential),
            }),
            Some(BasisArg::UniformKernel) => {
                let bw = self
                    .bandwidth
                    .ok_or_else(|| usage("--basis uniform-kernel needs a bandwidth"))?;
                RandomEffect::FirstOrder(FirstOrderBasis::Fixed(uniform_kernel_basis(
                    coords,
                    &need_knots()?,
                    bw,
                )?))
            }
            Some(BasisArg::Group) => {
                let col = self
                    .group
                    .as_ref()
                    .ok_or_else(|| usage("--basis group needs --group COLUMN"))?;
                RandomEffect::FirstOrder(FirstOrderBasis::Fixed(grouping_basis(&table.text(col)?)?))
            }
        })
    }

    fn spec(&self, table: &Table) -> Result<LmmSpec> {
        let coords = table.coordinates(&self.coords)?;
        let (x, names) = self.design(table, &coords)?;
        let random = self.random(table, &coords)?;
        let mut spec = LmmSpec::new(x, names, coords, random)
            .map_err(|e| match e {
                Error::InvalidInput(m) => usage(m),
                other => other,
            })?
            .with_nugget(self.nugget)
            .with_estimation(if self.reml {
                Estimation::Reml
            } else {
                Estimation::Ml
            });
        if let Some(v) = self.phi_fixed {
            spec = spec.with_phi(PhiControl::Fixed(v))?;
        } else if let Some((lo, hi)) = self.phi_bounds {
            spec = spec.with_phi(PhiControl::Bounded(lo, hi))?;
        }
        Ok(spec)
    }
}

fn config_from_args(a: &FitArgs, coords: &Coordinates) -> Result<ModelConfig> {
    let family = a.family.map(|f| Family::from(f).name().to_string());
    let knots = match (a.basis, &a.knots) {
        (Some(BasisArg::Poly), Some(KnotsArg::Count(_))) => {
            return Err(usage(
                "--basis poly takes --degree, or a knot list for shifted quadratics",
            ))
        }
        (Some(BasisArg::Poly), Some(k)) => Some(resolve_knots(k, coords, &a.data.coords)?),
        (Some(BasisArg::GaussKernel), k) => Some(resolve_knots(
            k.as_ref().unwrap_or(&KnotsArg::Count(DEFAULT_KERNEL_KNOTS)),
            coords,
            &a.data.coords,
        )?),
        (Some(BasisArg::Pp), k) => Some(resolve_knots(
            k.as_ref().unwrap_or(&KnotsArg::Count(DEFAULT_PP_KNOTS)),
            coords,
            &a.data.coords,
        )?),
        (Some(BasisArg::UniformKernel), Some(k)) => Some(resolve_knots(k, coords, &a.data.coords)?),
        (Some(BasisArg::UniformKernel), None) => {
            if coords.dim() != 1 {
                return Err(usage("2-D uniform kernels need --knots"));
            }
            let mut t = coords.first_axis();
            t.sort_by(f64::total_cmp);
            t.dedup();
            Some(Coordinates::from_1d(&t)?)
        }
        (_, Some(_)) => return Err(usage("--knots only applies to kernel, poly and pp bases")),
        _ => None,
    };
    let bandwidth = match (a.basis, a.bandwidth, &knots) {
        (Some(BasisArg::UniformKernel), None, Some(k)) if k.dim() == 1 => {
            // twice the smallest knot spacing, so neighbouring kernels overlap
            let mut t = k.first_axis();
            t.sort_by(f64::total_cmp);
            let gap = t
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min);
            Some(if gap.is_finite() { 2.0 * gap } else { 1.0 })
        }
        (Some(BasisArg::UniformKernel), None, _) => {
            return Err(usage("2-D uniform kernels need --bandwidth"))
        }
        (_, b, _) => b,
    };
    Ok(ModelConfig {
        input: a.data.input.clone(),
        y: a.data.y.clone(),
        coords: a.data.coords.clone(),
        x: a.data.x.clone(),
        intercept: !a.data.no_intercept,
        group: a.group.clone(),
        family,
        basis: a.basis,
        knots: knots.map(|k| k.points().map(<[f64]>::to_vec).collect()),
        bandwidth,
        degree: a.degree,
        nugget: !a.no_nugget,
        reml: a.reml,
        phi_fixed: a.phi,
        phi_bounds: a.phi_grid.map(|g| (g.lo, g.hi)),
    })
}

#[derive(Serialize)]
struct Coefficient {
    name: String,
    estimate: f64,
    std_error: f64,
    ci_lower: f64,
    ci_upper: f64,
}

#[derive(Serialize)]
struct FitSummary<'a> {
    model: &'a ModelConfig,
    mode: &'static str,
    n: usize,
    estimation: Estimation,
    level: f64,
    coefficients: Vec<Coefficient>,
    sigma2_eps: f64,
    sigma2_alpha: f64,
    phi: f64,
    loglik: f64,
    converged: bool,
    optimizer_evaluations: usize,
    basis_columns: Option<Vec<String>>,
    alpha_hat: Option<Vec<f64>>,
    diagnostics: Option<DiagnosticsReport>,
    fitted_csv: PathBuf,
}

#[derive(Deserialize)]
pub(super) struct SavedFit {
    pub model: ModelConfig,
    pub sigma2_eps: Option<f64>,
    pub sigma2_alpha: Option<f64>,
    pub phi: Option<f64>,
    pub fitted_csv: PathBuf,
}

fn mode(spec: &LmmSpec) -> &'static str {
    match spec.random() {
        RandomEffect::None => "ols",
        RandomEffect::SecondOrder(_) => "second-order",
        RandomEffect::FirstOrder(_) => "first-order",
    }
}

pub(super) fn run(a: &FitArgs) -> Result<()> {
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(usage(format!("--level must be in (0, 1), got {}", a.level)));
    }
    let table = Table::read(&a.data.input)?;
    let coords = table.coordinates(&a.data.coords)?;
    let cfg = config_from_args(a, &coords)?;
    let spec = cfg.spec(&table)?;
    let y = DVector::from_vec(table.numeric(&cfg.y)?);

    let (fit, failure) = match fit_ml(&y, &spec) {
        Ok(f) => (f, None),
        Err(Error::NonConvergence { best }) => {
            log::warn!("optimizer did not converge; writing the best fit found");
            let fit = (*best).clone();
            (fit, Some(Error::NonConvergence { best }))
        }
        Err(e) => return Err(e),
    };

    let fitted_path = a
        .fitted
        .clone()
        .unwrap_or_else(|| sibling(&a.output, "csv"));
    write_fitted(&fitted_path, &fit, &cfg, &table)?;

    let coefficients = (0..fit.beta.len())
        .map(|j| {
            let (lo, hi) = wald_ci(&fit, j, a.level)?;
            Ok(Coefficient {
                name: spec.x_names()[j].clone(),
                estimate: fit.beta[j],
                std_error: fit.beta_cov[(j, j)].max(0.0).sqrt(),
                ci_lower: lo,
                ci_upper: hi,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let basis = spec.basis_at(fit.phi)?;
    let diagnostics = match diagnose(&fit, default_max_lag(spec.n())) {
        Ok(d) => Some(d),
        Err(e) => {
            log::warn!("diagnostics unavailable: {e}");
            None
        }
    };
    let summary = FitSummary {
        model: &cfg,
        mode: mode(&spec),
        n: spec.n(),
        estimation: spec.estimation(),
        level: a.level,
        coefficients,
        sigma2_eps: fit.sigma2_eps,
        sigma2_alpha: fit.sigma2_alpha,
        phi: fit.phi,
        loglik: fit.loglik,
        converged: fit.converged,
        optimizer_evaluations: fit.optimizer_trace.len(),
        basis_columns: basis.as_ref().map(|b| {
            b.columns()
                .iter()
                .enumerate()
                .map(|(j, c)| c.label(j))
                .collect()
        }),
        alpha_hat: if basis.is_some() {
            Some(blup_alpha(&fit)?.iter().copied().collect())
        } else {
            None
        },
        diagnostics,
        fitted_csv: fitted_path,
    };
    write_json(&a.output, &summary)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Per-row values plus `comp_*` columns that sum to `fitted`.
fn write_fitted(
    path: &std::path::Path,
    fit: &LmmFit,
    cfg: &ModelConfig,
    table: &Table,
) -> Result<()> {
    let spec = fit.spec();
    let n = spec.n();
    let fixed = fit.fixed_part();
    let eta = blup_eta(fit)?;
    let fitted = &fixed + &eta;
    let y = fit.response();

    let mut headers: Vec<String> = cfg.coords.clone();
    headers.extend(["y", "fitted", "fixed", "eta", "residual"].map(String::from));
    let mut comps: Vec<DVector<f64>> = Vec::new();
    for (j, name) in spec.x_names().iter().enumerate() {
        headers.push(format!("comp_x:{name}"));
        comps.push(spec.x().column(j) * fit.beta[j]);
    }
    match basis_contributions(fit)? {
        Some((z, contrib)) => {
            for (j, c) in z.columns().iter().enumerate() {
                headers.push(format!("comp_z:{}", c.label(j)));
                comps.push(contrib.column(j).into_owned());
            }
        }
        None if !matches!(spec.random(), RandomEffect::None) => {
            headers.push("comp_eta".into());
            comps.push(eta.clone());
        }
        None => {}
    }
    let coord_cols = cfg
        .coords
        .iter()
        .map(|c| table.numeric(c))
        .collect::<Result<Vec<_>>>()?;
    let rows = (0..n).map(|i| {
        let mut row: Vec<String> = coord_cols.iter().map(|c| num(c[i])).collect();
        row.extend([y[i], fitted[i], fixed[i], eta[i], y[i] - fitted[i]].map(num));
        row.extend(comps.iter().map(|c| num(c[i])));
        row
    });
    write_csv(path, &headers, rows)
}

pub(super) fn predict(a: &PredictArgs) -> Result<()> {
    let saved: SavedFit = read_json(&a.fit)?;
    let cfg = &saved.model;
    let train = Table::read(a.train.as_ref().unwrap_or(&cfg.input))?;
    let spec = cfg.spec(&train)?;
    let y = DVector::from_vec(train.numeric(&cfg.y)?);
    let theta = Theta::new(
        saved.sigma2_eps.unwrap_or(0.0),
        saved.sigma2_alpha.unwrap_or(0.0),
        saved.phi.unwrap_or(f64::NAN),
    );
    let fit = LmmFit::at_theta(&y, &spec, &theta)?;

    let new = Table::read(&a.input)?;
    let coords = new.coordinates(&cfg.coords)?;
    let (x, _) = cfg.design(&new, &coords)?;
    let pred = lmm_predict(&fit, &coords, &x)?;

    let mut headers = cfg.coords.clone();
    headers.push("prediction".into());
    let rows = (0..coords.len()).map(|i| {
        let mut row: Vec<String> = coords.point(i).iter().map(|v| num(*v)).collect();
        row.push(num(pred[i]));
        row
    });
    write_csv(&a.output, &headers, rows)
}
