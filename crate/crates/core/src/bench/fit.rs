//! Exponential RB decay fits with a fixed asymptote.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AsymptoteMode {
    /// Decay to 0; `p` is the return-probability retention per gate.
    Raw,
    /// Decay to 1/4, the fully mixed two-qubit value.
    Corrected,
}

impl AsymptoteMode {
    pub fn asymptote(self) -> f64 {
        match self {
            AsymptoteMode::Raw => 0.0,
            AsymptoteMode::Corrected => 0.25,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AsymptoteMode::Raw => "raw",
            AsymptoteMode::Corrected => "corrected",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub n: f64,
    pub y: f64,
    pub std_err: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub amplitude: f64,
    pub p: f64,
    pub p_std_err: f64,
    pub amplitude_std_err: f64,
    pub chi2: f64,
    pub iterations: usize,
}

const MAX_ITER: usize = 500;

fn chi2(points: &[DecayPoint], c: f64, a: f64, p: f64) -> f64 {
    points
        .iter()
        .map(|q| ((q.y - a * p.powf(q.n) - c) / q.std_err).powi(2))
        .sum()
}

/// Weighted least squares of `a·pᴺ + c` with `c` fixed by `mode`, weights
/// `1/std_err²`, and `p` kept in `[0, 1]`. The standard error of `p` comes
/// from the inverse curvature `(JᵀWJ)⁻¹` at the optimum.
pub fn fit_decay(points: &[DecayPoint], mode: AsymptoteMode, initial_amplitude: Option<f64>) -> Result<DecayFit> {
    if points.len() < 3 {
        return Err(Error::FitFailure(format!("need at least 3 points, got {}", points.len())));
    }
    if points.iter().any(|q| !(q.std_err > 0.0) || !q.y.is_finite() || !q.n.is_finite()) {
        return Err(Error::FitFailure("points need finite values and positive std_err".into()));
    }
    let c = mode.asymptote();
    let (mut a, mut p) = initial_guess(points, c);
    if let Some(a0) = initial_amplitude {
        a = a0;
    }
    let mut cost = chi2(points, c, a, p);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITER {
        iterations += 1;
        let (jtj, jtr) = normal_equations(points, c, a, p);
        let damped = [
            [jtj[0][0] * (1.0 + lambda), jtj[0][1]],
            [jtj[1][0], jtj[1][1] * (1.0 + lambda)],
        ];
        let Some(step) = solve2(&damped, &jtr) else {
            lambda *= 10.0;
            continue;
        };
        let a_new = a + step[0];
        let p_new = (p + step[1]).clamp(0.0, 1.0);
        let cost_new = chi2(points, c, a_new, p_new);
        if cost_new <= cost {
            let done = (a_new - a).abs() <= 1e-15 * a.abs().max(1.0)
                && (p_new - p).abs() <= 1e-15
                || cost - cost_new <= 1e-15 * cost.max(1e-300);
            a = a_new;
            p = p_new;
            cost = cost_new;
            lambda = (lambda / 10.0).max(1e-12);
            if done {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                // No downhill step exists: we are at a (possibly bounded) minimum.
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(Error::FitFailure(format!("no convergence after {MAX_ITER} iterations")));
    }
    let (jtj, _) = normal_equations(points, c, a, p);
    let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
    let (a_err, p_err) = if det > 0.0 {
        ((jtj[1][1] / det).sqrt(), (jtj[0][0] / det).sqrt())
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok(DecayFit {
        amplitude: a,
        p,
        p_std_err: p_err,
        amplitude_std_err: a_err,
        chi2: cost,
        iterations,
    })
}

fn normal_equations(points: &[DecayPoint], c: f64, a: f64, p: f64) -> ([[f64; 2]; 2], [f64; 2]) {
    let mut jtj = [[0.0; 2]; 2];
    let mut jtr = [0.0; 2];
    for q in points {
        let w = 1.0 / (q.std_err * q.std_err);
        let pn = p.powf(q.n);
        let dp = if q.n == 0.0 { 0.0 } else { a * q.n * p.powf(q.n - 1.0) };
        let j = [pn, dp];
        let r = q.y - a * pn - c;
        for i in 0..2 {
            jtr[i] += w * j[i] * r;
            for k in 0..2 {
                jtj[i][k] += w * j[i] * j[k];
            }
        }
    }
    (jtj, jtr)
}

fn solve2(m: &[[f64; 2]; 2], v: &[f64; 2]) -> Option<[f64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < 1e-300 || !det.is_finite() {
        return None;
    }
    Some([(v[0] * m[1][1] - m[0][1] * v[1]) / det, (m[0][0] * v[1] - m[1][0] * v[0]) / det])
}

/// Weighted line through `ln(y − c)` versus `N`.
fn initial_guess(points: &[DecayPoint], c: f64) -> (f64, f64) {
    let usable: Vec<(f64, f64, f64)> = points
        .iter()
        .filter(|q| q.y - c > 1e-6)
        .map(|q| {
            let z = q.y - c;
            (q.n, z.ln(), (z / q.std_err).powi(2))
        })
        .collect();
    let sw: f64 = usable.iter().map(|u| u.2).sum();
    if usable.len() < 2 || sw == 0.0 {
        return (1.0 - c, 0.99);
    }
    let mx = usable.iter().map(|u| u.2 * u.0).sum::<f64>() / sw;
    let my = usable.iter().map(|u| u.2 * u.1).sum::<f64>() / sw;
    let sxx: f64 = usable.iter().map(|u| u.2 * (u.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|u| u.2 * (u.0 - mx) * (u.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let p = slope.exp().clamp(0.5, 1.0);
    let a = (my - slope * mx).exp();
    (a, p)
}

/// Fidelity implied by a fitted decay: `p` itself in raw mode, and the
/// two-qubit depolarizing relation `1 − (3/4)(1 − p)` in corrected mode.
pub fn fidelity_from_decay(p: f64, mode: AsymptoteMode) -> f64 {
    match mode {
        AsymptoteMode::Raw => p,
        AsymptoteMode::Corrected => 1.0 - 0.75 * (1.0 - p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Binomial, Distribution};

    fn exact(p: f64, a: f64, c: f64) -> Vec<DecayPoint> {
        [0.0, 10.0, 20.0, 40.0, 80.0, 160.0]
            .iter()
            .map(|&n| DecayPoint {
                n,
                y: a * p.powf(n) + c,
                std_err: 0.01,
            })
            .collect()
    }

    #[test]
    fn recovers_exact_model() {
        let f = fit_decay(&exact(0.99, 0.75, 0.25), AsymptoteMode::Corrected, None).unwrap();
        assert!((f.p - 0.99).abs() < 1e-9);
        assert!((f.amplitude - 0.75).abs() < 1e-9);
    }

    #[test]
    fn constant_data_gives_unit_decay() {
        let f = fit_decay(&exact(1.0, 1.0, 0.0), AsymptoteMode::Raw, None).unwrap();
        assert_eq!(f.p, 1.0);
        let g = fit_decay(&exact(1.0, 0.75, 0.25), AsymptoteMode::Corrected, Some(0.5)).unwrap();
        assert_eq!(g.p, 1.0);
    }

    #[test]
    fn weight_scale_invariance() {
        let mut pts = exact(0.995, 0.7, 0.25);
        pts[2].y += 0.01;
        pts[4].y -= 0.007;
        let f = fit_decay(&pts, AsymptoteMode::Corrected, None).unwrap();
        for q in &mut pts {
            q.std_err *= 37.0;
        }
        let g = fit_decay(&pts, AsymptoteMode::Corrected, None).unwrap();
        assert!((f.p - g.p).abs() < 1e-12);
        assert!((g.p_std_err / f.p_std_err - 37.0).abs() < 1e-6);
    }

    #[test]
    fn error_bars_cover_truth() {
        let p: f64 = 0.996;
        let shots = 2000u64;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ns = [0.0, 20.0, 50.0, 100.0, 200.0, 400.0];
        let mut covered = 0;
        for _ in 0..200 {
            let pts: Vec<DecayPoint> = ns
                .iter()
                .map(|&n| {
                    let truth = 0.75 * p.powf(n) + 0.25;
                    let k = Binomial::new(shots, truth).unwrap().sample(&mut rng);
                    let y = k as f64 / shots as f64;
                    let q = (k as f64 + 0.5) / (shots as f64 + 1.0);
                    DecayPoint {
                        n,
                        y,
                        std_err: (q * (1.0 - q) / shots as f64).sqrt(),
                    }
                })
                .collect();
            let f = fit_decay(&pts, AsymptoteMode::Corrected, None).unwrap();
            if (f.p - p).abs() <= 3.0 * f.p_std_err {
                covered += 1;
            }
        }
        assert!(covered >= 190, "{covered}/200");
    }

    #[test]
    fn conversion() {
        for m in [AsymptoteMode::Raw, AsymptoteMode::Corrected] {
            assert_eq!(fidelity_from_decay(1.0, m), 1.0);
        }
        assert!((fidelity_from_decay(0.99747, AsymptoteMode::Corrected) - 0.99810).abs() < 1e-5);
        assert_eq!(fidelity_from_decay(0.996, AsymptoteMode::Raw), 0.996);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(fit_decay(&exact(0.9, 1.0, 0.0)[..2], AsymptoteMode::Raw, None), Err(Error::FitFailure(_))));
    }
}
