use nalgebra::{DMatrix, DVector};

use super::table::{num, write_csv};
use super::{usage, SimModel, SimulateArgs};
use crate::corr::{Coordinates, CorrelationModel, Family};
use crate::error::Result;
use crate::lmm::{simulate_lmm, Theta};
use crate::numkernel::RandomStream;
use crate::probit::simulate_probit;

pub(super) fn run(a: &SimulateArgs) -> Result<()> {
    if a.n < 2 {
        return Err(usage("--n must be at least 2"));
    }
    if a.beta.is_empty() {
        return Err(usage("--beta needs at least the intercept"));
    }
    if !(a.extent > 0.0 && a.extent.is_finite()) {
        return Err(usage("--extent must be positive"));
    }
    let family: Family = a.family.into();
    if a.model == SimModel::Probit && family != Family::Exponential {
        return Err(usage("the probit model uses --family exponential"));
    }
    let model = CorrelationModel::new(family, a.phi).map_err(|e| usage(e.to_string()))?;
    let mut s = RandomStream::new(a.seed);
    let n = a.n;

    let (coords, coord_names) = match a.dim {
        1 => (
            Coordinates::from_1d(&(1..=n).map(|t| t as f64).collect::<Vec<_>>())?,
            vec!["t".to_string()],
        ),
        2 => {
            let pts: Vec<[f64; 2]> = (0..n)
                .map(|_| [a.extent * s.next_uniform(), a.extent * s.next_uniform()])
                .collect();
            (
                Coordinates::from_points(&pts)?,
                vec!["s1".into(), "s2".into()],
            )
        }
        d => return Err(usage(format!("--dim must be 1 or 2, got {d}"))),
    };

    let p = a.beta.len();
    let mut x = DMatrix::from_element(n, p, 1.0);
    for j in 1..p {
        for i in 0..n {
            x[(i, j)] = if j == 1 && a.dim == 1 {
                coords.point(i)[0]
            } else {
                s.next_gaussian()
            };
        }
    }
    let beta = DVector::from_column_slice(&a.beta);
    let y: Vec<f64> = match a.model {
        SimModel::Lmm => simulate_lmm(
            &x,
            &beta,
            &coords,
            &model,
            &Theta::new(a.sigma2_eps, a.sigma2_alpha, a.phi),
            &mut s,
        )?
        .iter()
        .copied()
        .collect(),
        SimModel::Probit => simulate_probit(&coords, &x, &beta, a.sigma2_alpha, a.phi, &mut s)?,
    };

    let mut headers = coord_names;
    headers.extend((1..p).map(|j| format!("x{j}")));
    headers.push("y".into());
    let rows = (0..n).map(|i| {
        let mut row: Vec<String> = coords.point(i).iter().map(|v| num(*v)).collect();
        row.extend((1..p).map(|j| num(x[(i, j)])));
        row.push(num(y[i]));
        row
    });
    write_csv(&a.output, &headers, rows)
}
