//! Nelder-Mead downhill simplex.

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_evals: usize,
    /// Stop when the spread of function values falls below
    /// `f_tol·(|f_best| + f_tol)`.
    pub f_tol: f64,
    /// Stop when every vertex lies within `x_tol` of the best one.
    pub x_tol: f64,
    /// Initial edge length along each coordinate.
    pub initial_step: f64,
    /// Restart the simplex around the optimum this many times.
    pub restarts: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_evals: 20_000,
            f_tol: 1e-14,
            x_tol: 1e-10,
            initial_step: 0.1,
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimize `f` starting from `x0`. Non-finite function values are treated as
/// `+∞`.
pub fn minimize<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: &SimplexOptions) -> SimplexResult {
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut best = run(&eval, x0.to_vec(), opts, opts.max_evals);
    let mut used = best.evals;
    for _ in 0..opts.restarts {
        if used >= opts.max_evals {
            break;
        }
        let again = run(&eval, best.x.clone(), opts, opts.max_evals - used);
        used += again.evals;
        let improved = again.f < best.f;
        let converged = again.converged;
        if improved {
            best = again;
        }
        best.converged = converged;
        if !improved {
            break;
        }
    }
    best.evals = used;
    best
}

fn run<F: Fn(&[f64]) -> f64>(f: &F, x0: Vec<f64>, opts: &SimplexOptions, budget: usize) -> SimplexResult {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.clone());
    for i in 0..n {
        let mut p = x0.clone();
        let step = if p[i] != 0.0 {
            opts.initial_step * p[i].abs().max(1.0)
        } else {
            opts.initial_step
        };
        p[i] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut evals = n + 1;
    let mut converged = false;

    while evals < budget {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let f_spread = (vals[n] - vals[0]).abs();
        let x_spread = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if vals[0].is_finite()
            && x_spread <= opts.x_tol
            && f_spread <= opts.f_tol * (vals[0].abs() + opts.f_tol)
        {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&pts[n])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let xr = along(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let x = along(-0.5);
            let v = f(&x);
            (x, v)
        } else {
            let x = along(0.5);
            let v = f(&x);
            (x, v)
        };
        evals += 1;
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..=n {
            let p: Vec<f64> = pts[i]
                .iter()
                .zip(&pts[0])
                .map(|(a, b)| b + 0.5 * (a - b))
                .collect();
            vals[i] = f(&p);
            pts[i] = p;
        }
        evals += n;
    }

    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    SimplexResult {
        x: pts[best].clone(),
        f: vals[best],
        evals,
        converged,
    }
}
