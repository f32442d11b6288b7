//! Derivative-free scalar and simplex minimizers.

/// Minimizes a unimodal `f` on `[a, b]` by golden-section search.
///
/// Returns `(x, f(x))` once the bracket is narrower than `tol`.
pub fn golden_section(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[derive(Clone, Debug)]
pub struct NelderMeadOptions {
    /// Hard cap on objective evaluations.
    pub max_evals: usize,
    /// Stop once the best value falls to or below this.
    pub target: f64,
    /// Stop once the spread of simplex values drops below this.
    pub f_tol: f64,
    /// Per-coordinate size of the initial simplex.
    pub initial_step: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    /// Best value after every evaluation, for convergence logs.
    pub history: Vec<f64>,
}

/// Standard Nelder-Mead with coefficients (1, 2, 1/2, 1/2).
///
/// The initial simplex is `x0` plus one axis step per coordinate, so the
/// run is fully deterministic.
pub fn nelder_mead(
    x0: &[f64],
    opts: &NelderMeadOptions,
    mut f: impl FnMut(&[f64]) -> f64,
) -> NelderMeadResult {
    let n = x0.len();
    assert_eq!(opts.initial_step.len(), n);
    let mut history = Vec::new();
    let mut best = f64::INFINITY;
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize, history: &mut Vec<f64>| {
        let v = f(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        *evals += 1;
        best = best.min(v);
        history.push(best);
        v
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(x0, &mut evals, &mut history);
    simplex.push((x0.to_vec(), v0));
    for i in 0..n {
        if evals >= opts.max_evals || v0 <= opts.target {
            break;
        }
        let mut x = x0.to_vec();
        x[i] += opts.initial_step[i];
        let v = eval(&x, &mut evals, &mut history);
        simplex.push((x, v));
    }

    if simplex.len() == n + 1 {
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (lo, hi) = (simplex[0].1, simplex[n].1);
            if lo <= opts.target || evals >= opts.max_evals || (hi - lo).abs() < opts.f_tol {
                break;
            }
            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|p| p.0[j]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };
            let xr = along(1.0);
            let fr = eval(&xr, &mut evals, &mut history);
            if fr < simplex[0].1 {
                if evals >= opts.max_evals {
                    simplex[n] = (xr, fr);
                    continue;
                }
                let xe = along(2.0);
                let fe = eval(&xe, &mut evals, &mut history);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                if evals >= opts.max_evals {
                    continue;
                }
                let (xc, fc) = if fr < simplex[n].1 {
                    let xc = along(0.5);
                    let fc = eval(&xc, &mut evals, &mut history);
                    (xc, fc)
                } else {
                    let xc = along(-0.5);
                    let fc = eval(&xc, &mut evals, &mut history);
                    (xc, fc)
                };
                if fc < fr.min(simplex[n].1) {
                    simplex[n] = (xc, fc);
                } else {
                    let x_best = simplex[0].0.clone();
                    for p in simplex.iter_mut().skip(1) {
                        if evals >= opts.max_evals {
                            break;
                        }
                        let x: Vec<f64> =
                            x_best.iter().zip(&p.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                        let v = eval(&x, &mut evals, &mut history);
                        *p = (x, v);
                    }
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    NelderMeadResult {
        x,
        value,
        evals,
        history,
    }
}
