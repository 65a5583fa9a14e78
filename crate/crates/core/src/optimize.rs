//! Box-constrained Nelder-Mead simplex search.

#[derive(Debug, Clone)]
pub(crate) struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
    /// Best objective value after each iteration.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SimplexOptions {
    pub initial_step: f64,
    pub max_iterations: usize,
    /// Converged once every vertex lies within this (max-norm) distance of the best.
    pub diameter_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            initial_step: 1.0,
            max_iterations: 500,
            diameter_tol: 1e-8,
        }
    }
}

fn clamp(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

/// Minimizes `f` over the box `[lo, hi]`, starting from `x0`.
///
/// Every trial point is projected onto the box. Non-finite objective values
/// are treated as `+inf`. Besides the diameter test, the search also stops
/// when the objective is flat across the simplex to within 1e-14 relative,
/// which happens when a coordinate no longer affects the objective.
pub(crate) fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: SimplexOptions,
) -> SimplexResult {
    let dim = x0.len();
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut start = x0.to_vec();
    clamp(&mut start, lo, hi);
    let mut simplex: Vec<Vec<f64>> = vec![start.clone()];
    for k in 0..dim {
        let mut v = start.clone();
        v[k] += opts.initial_step;
        clamp(&mut v, lo, hi);
        if v[k] == start[k] {
            v[k] -= opts.initial_step;
            clamp(&mut v, lo, hi);
        }
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let diameter = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0_f64, f64::max);
        let spread = values[dim] - values[0];
        if diameter < opts.diameter_tol
            || (values[0].is_finite()
                && iterations > 2 * dim
                && spread <= 1e-14 * values[0].abs().max(1.0))
        {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..dim)
            .map(|k| simplex[..dim].iter().map(|v| v[k]).sum::<f64>() / dim as f64)
            .collect();
        let toward = |coef: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[dim])
                .map(|(c, w)| c + coef * (c - w))
                .collect();
            clamp(&mut p, lo, hi);
            p
        };

        let reflected = toward(1.0);
        let fr = eval(&reflected);
        if fr < values[0] {
            let expanded = toward(2.0);
            let fe = eval(&expanded);
            if fe < fr {
                simplex[dim] = expanded;
                values[dim] = fe;
            } else {
                simplex[dim] = reflected;
                values[dim] = fr;
            }
        } else if fr < values[dim - 1] {
            simplex[dim] = reflected;
            values[dim] = fr;
        } else {
            let (contracted, fc) = if fr < values[dim] {
                let p = toward(0.5);
                let v = eval(&p);
                (p, v)
            } else {
                let p = toward(-0.5);
                let v = eval(&p);
                (p, v)
            };
            if fc < values[dim].min(fr) {
                simplex[dim] = contracted;
                values[dim] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=dim {
                    for k in 0..dim {
                        simplex[i][k] = best[k] + 0.5 * (simplex[i][k] - best[k]);
                    }
                    values[i] = eval(&simplex[i]);
                }
            }
        }
        history.push(values.iter().cloned().fold(f64::INFINITY, f64::min));
    }

    let best = (0..=dim)
        .min_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap())
        .unwrap();
    SimplexResult {
        x: simplex[best].clone(),
        f: values[best],
        converged,
        history,
    }
}
