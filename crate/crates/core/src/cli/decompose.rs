use serde::Serialize;

use super::table::{num, write_csv, write_json, Table};
use super::{sibling, usage, DecomposeArgs};
use crate::basis::{eigen_basis, gram, ColumnKind};
use crate::corr::{corr_matrix, CorrelationModel, Family};
use crate::error::Result;

#[derive(Serialize)]
struct Summary {
    family: &'static str,
    phi: f64,
    n: usize,
    eigenvalues: Vec<f64>,
    /// max |Z Z' - R| over all entries
    reconstruction_max_abs_diff: f64,
}

pub(super) fn run(a: &DecomposeArgs) -> Result<()> {
    let table = Table::read(&a.input)?;
    let coords = table.coordinates(&a.coords)?;
    let family: Family = a.family.into();
    let model = CorrelationModel::new(family, a.phi).map_err(|e| usage(e.to_string()))?;
    let r = corr_matrix(&coords, &model);
    let z = eigen_basis(&r)?;
    let diff = (gram(&z).matrix() - r.matrix()).amax();

    let m = z.matrix();
    let headers: Vec<String> = (1..=m.ncols()).map(|j| format!("z{j}")).collect();
    let rows = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| num(m[(i, j)])).collect());
    write_csv(&a.output, &headers, rows)?;

    let eigenvalues = z
        .columns()
        .iter()
        .map(|c| match c {
            ColumnKind::Eigen { eigenvalue } => *eigenvalue,
            _ => f64::NAN,
        })
        .collect();
    let summary_path = a
        .summary
        .clone()
        .unwrap_or_else(|| sibling(&a.output, "json"));
    write_json(
        &summary_path,
        &Summary {
            family: family.name(),
            phi: a.phi,
            n: coords.len(),
            eigenvalues,
            reconstruction_max_abs_diff: diff,
        },
    )
}
