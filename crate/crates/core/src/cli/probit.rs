use serde::Serialize;

use super::fit::resolve_knots;
use super::table::{num, write_csv, write_json, Table};
use super::{sibling, usage, FitProbitArgs};
use crate::basis::linspace;
use crate::corr::Coordinates;
use crate::error::{Error, Result};
use crate::probit::{
    gibbs_fit_chains, posterior_predict, summarize, ParameterSummary, PosteriorSummary,
    ProbitPriors, ProbitRandom, ProbitSpec, SigmaPrior,
};

#[derive(Serialize)]
struct Coefficient<'a> {
    name: &'a str,
    #[serde(flatten)]
    summary: ParameterSummary,
}

#[derive(Serialize)]
struct ProbitReport<'a> {
    n: usize,
    random: &'static str,
    knots: Option<usize>,
    iters: usize,
    burn: usize,
    coefficients: Vec<Coefficient<'a>>,
    posterior: &'a PosteriorSummary,
    phi_grid: &'a [f64],
    separated: bool,
    predictions_csv: Option<std::path::PathBuf>,
}

fn invalid_as_usage(e: Error) -> Error {
    match e {
        Error::InvalidInput(m) => usage(m),
        other => other,
    }
}

pub(super) fn run(a: &FitProbitArgs) -> Result<()> {
    if a.iters == 0 || a.burn >= a.iters {
        return Err(usage("--iters must exceed --burn"));
    }
    if a.chains == 0 {
        return Err(usage("--chains must be at least 1"));
    }
    let table = Table::read(&a.data.input)?;
    let coords = table.coordinates(&a.data.coords)?;
    let (x, names) = table.design(&a.data.x, !a.data.no_intercept)?;
    let y = table.numeric(&a.data.y)?;

    let random = match &a.knots {
        None => ProbitRandom::FullRank,
        Some(k) => ProbitRandom::PredictiveProcess {
            knots: resolve_knots(k, &coords, &a.data.coords)?,
        },
    };
    let knot_count = match &random {
        ProbitRandom::PredictiveProcess { knots } => Some(knots.len()),
        ProbitRandom::FullRank => None,
    };
    let mut priors = ProbitPriors::defaults(&coords);
    if let Some(g) = a.phi_grid {
        priors = priors
            .with_phi_grid(g.lo, g.hi, g.n)
            .map_err(invalid_as_usage)?;
    }
    priors.beta_variance = a.beta_variance;
    if let Some(v) = a.fixed_sigma2 {
        priors.sigma2_alpha = SigmaPrior::Fixed(v);
    }
    let spec = ProbitSpec::new(&y, x, coords, random)
        .and_then(|s| s.with_priors(priors))
        .and_then(|s| s.with_x_names(names))
        .map_err(invalid_as_usage)?;

    let seeds: Vec<u64> = (0..a.chains as u64)
        .map(|k| a.seed.wrapping_add(k))
        .collect();
    let chains = gibbs_fit_chains(&spec, a.iters, a.burn, &seeds)?;
    let posterior = summarize(&chains);

    let predictions_csv = match prediction_grid(a, &spec)? {
        Some((grid, grid_x)) => {
            let mut prob = nalgebra::DVector::zeros(grid.len());
            for c in &chains {
                prob += posterior_predict(c, &spec, &grid, &grid_x)?;
            }
            prob /= chains.len() as f64;
            let path = a
                .predictions
                .clone()
                .unwrap_or_else(|| sibling(&a.output, "csv"));
            let mut headers = a.data.coords.clone();
            headers.push("probability".into());
            let rows = (0..grid.len()).map(|i| {
                let mut row: Vec<String> = grid.point(i).iter().map(|v| num(*v)).collect();
                row.push(num(prob[i]));
                row
            });
            write_csv(&path, &headers, rows)?;
            Some(path)
        }
        None => None,
    };

    let report = ProbitReport {
        n: spec.y().len(),
        random: if knot_count.is_some() {
            "predictive-process"
        } else {
            "full-rank"
        },
        knots: knot_count,
        iters: a.iters,
        burn: a.burn,
        coefficients: spec
            .x_names()
            .iter()
            .zip(&posterior.beta)
            .map(|(name, s)| Coefficient { name, summary: *s })
            .collect(),
        posterior: &posterior,
        phi_grid: &spec.priors().phi_grid,
        separated: spec.separated(),
        predictions_csv,
    };
    write_json(&a.output, &report)
}

/// Locations and design rows to predict at, if any.
fn prediction_grid(
    a: &FitProbitArgs,
    spec: &ProbitSpec,
) -> Result<Option<(Coordinates, nalgebra::DMatrix<f64>)>> {
    if let Some(path) = &a.grid {
        let t = Table::read(path)?;
        let coords = t.coordinates(&a.data.coords)?;
        let (x, _) = t.design(&a.data.x, !a.data.no_intercept)?;
        return Ok(Some((coords, x)));
    }
    if !a.data.x.is_empty() {
        log::warn!("no --grid given and the model has covariates; skipping predictions");
        return Ok(None);
    }
    if a.grid_size < 2 {
        return Err(usage("--grid-size must be at least 2"));
    }
    let bounds = spec.coords().bounds();
    let axes: Vec<Vec<f64>> = bounds
        .iter()
        .map(|&(lo, hi)| linspace(lo, hi, a.grid_size))
        .collect();
    let coords = match axes.as_slice() {
        [t] => Coordinates::from_1d(t)?,
        [u, v] => {
            let pts: Vec<[f64; 2]> = v
                .iter()
                .flat_map(|&b| u.iter().map(move |&a| [a, b]))
                .collect();
            Coordinates::from_points(&pts)?
        }
        _ => unreachable!("coordinates are 1-D or 2-D"),
    };
    let x = nalgebra::DMatrix::from_element(coords.len(), spec.x().ncols(), 1.0);
    Ok(Some((coords, x)))
}
