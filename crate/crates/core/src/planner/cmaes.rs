//! Covariance matrix adaptation evolution strategy (maximization).
//!
//! Standard (μ/μ_w, λ) update with cumulative step-size adaptation and
//! rank-one plus rank-μ covariance updates. Candidates are drawn
//! sequentially from a seeded stream and evaluated through [`Exec`], so the
//! result does not depend on the execution mode. Box bounds are handled by
//! evaluating the clamped point and subtracting a quadratic penalty on the
//! clamp distance.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::par::Exec;

#[derive(Debug, Clone, PartialEq)]
pub struct CmaSettings {
    /// Population size; `4 + ⌊3 ln n⌋` when unset.
    pub lambda: Option<usize>,
    pub max_iter: usize,
    pub sigma0: f64,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmaOutcome {
    /// Best point evaluated, inside the bounds.
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
}

pub fn default_lambda(dim: usize) -> usize {
    4 + (3.0 * (dim.max(1) as f64).ln()).floor() as usize
}

fn clamp(x: &DVector<f64>, s: &CmaSettings) -> DVector<f64> {
    let mut c = x.clone();
    for i in 0..c.len() {
        if let Some(lo) = &s.lower {
            c[i] = c[i].max(lo[i]);
        }
        if let Some(hi) = &s.upper {
            c[i] = c[i].min(hi[i]);
        }
    }
    c
}

/// Maximize `f` starting from `x0`. `f0`, if given, must equal `f(x0)`; the
/// returned value is never below it.
pub fn maximize<F>(f: F, x0: &[f64], f0: Option<f64>, s: &CmaSettings, exec: Exec) -> CmaOutcome
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let n = x0.len();
    let mut best_x = x0.to_vec();
    let mut best_f = f0.unwrap_or_else(|| f(x0));
    let mut evaluations = usize::from(f0.is_none());
    if n == 0 || s.max_iter == 0 {
        return CmaOutcome {
            x: best_x,
            value: best_f,
            evaluations,
            iterations: 0,
        };
    }

    let nf = n as f64;
    let lambda = s.lambda.unwrap_or_else(|| default_lambda(n)).max(2);
    let mu = lambda / 2;
    let raw: Vec<f64> = (1..=mu).map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln()).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
    let cc = (4.0 + mueff / nf) / (nf + 4.0 + 2.0 * mueff / nf);
    let cs = (mueff + 2.0) / (nf + mueff + 5.0);
    let c1 = 2.0 / ((nf + 1.3).powi(2) + mueff);
    let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nf + 2.0).powi(2) + mueff));
    let damps = 1.0 + 2.0 * (((mueff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + cs;
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut mean = DVector::from_column_slice(x0);
    let mut sigma = s.sigma0;
    let mut cov = DMatrix::<f64>::identity(n, n);
    let mut basis = DMatrix::<f64>::identity(n, n);
    let mut scales = DVector::<f64>::from_element(n, 1.0);
    let mut pc = DVector::<f64>::zeros(n);
    let mut ps = DVector::<f64>::zeros(n);
    let mut iterations = 0;

    for gen in 0..s.max_iter {
        iterations = gen + 1;
        let steps: Vec<DVector<f64>> = (0..lambda)
            .map(|_| {
                let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
                &basis * z.component_mul(&scales)
            })
            .collect();
        let points: Vec<DVector<f64>> = steps.iter().map(|y| &mean + y * sigma).collect();
        let scored = exec.map(&points, |x| {
            let xc = clamp(x, s);
            let v = f(xc.as_slice());
            let out = (x - &xc).norm_squared();
            (xc, v, v - (1.0 + v.abs()) * out)
        });
        evaluations += lambda;
        for (xc, v, _) in &scored {
            if *v > best_f {
                best_f = *v;
                best_x = xc.as_slice().to_vec();
            }
        }
        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&a, &b| scored[b].2.total_cmp(&scored[a].2).then(a.cmp(&b)));

        let old = mean.clone();
        let mut y_w = DVector::zeros(n);
        for (w, &k) in weights.iter().zip(&order) {
            y_w += &steps[k] * *w;
        }
        mean = &old + &y_w * sigma;

        let inv_sqrt = &basis * DMatrix::from_diagonal(&scales.map(|d| 1.0 / d)) * basis.transpose();
        ps = &ps * (1.0 - cs) + &inv_sqrt * &y_w * (cs * (2.0 - cs) * mueff).sqrt();
        let ps_norm = ps.norm();
        let hsig = ps_norm / (1.0 - (1.0 - cs).powi(2 * (gen as i32 + 1))).sqrt() / chi_n < 1.4 + 2.0 / (nf + 1.0);
        let h = if hsig { 1.0 } else { 0.0 };
        pc = &pc * (1.0 - cc) + &y_w * (h * (cc * (2.0 - cc) * mueff).sqrt());
        let mut rank_mu = DMatrix::zeros(n, n);
        for (w, &k) in weights.iter().zip(&order) {
            rank_mu += &steps[k] * steps[k].transpose() * *w;
        }
        cov = &cov * (1.0 - c1 - cmu)
            + (&pc * pc.transpose() + &cov * ((1.0 - h) * cc * (2.0 - cc))) * c1
            + rank_mu * cmu;
        cov = (&cov + cov.transpose()) * 0.5;
        sigma *= ((cs / damps) * (ps_norm / chi_n - 1.0)).exp();

        let eig = cov.clone().symmetric_eigen();
        basis = eig.eigenvectors;
        scales = eig.eigenvalues.map(|v| v.max(1e-20).sqrt());
        if !sigma.is_finite() || sigma * scales.max() < 1e-12 * s.sigma0 {
            break;
        }
    }
    CmaOutcome {
        x: best_x,
        value: best_f,
        evaluations,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(sigma0: f64, max_iter: usize, seed: u64) -> CmaSettings {
        CmaSettings {
            lambda: None,
            max_iter,
            sigma0,
            lower: None,
            upper: None,
            seed,
        }
    }

    #[test]
    fn lambda_defaults() {
        assert_eq!(default_lambda(12), 11);
        assert_eq!(default_lambda(3), 7);
        assert_eq!(default_lambda(1), 4);
    }

    #[test]
    fn sphere() {
        let f = |x: &[f64]| -x.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>();
        let out = maximize(f, &[5.0, -3.0, 2.0, 0.0], None, &settings(2.0, 300, 1), Exec::Sequential);
        assert!(out.value > -1e-10, "{out:?}");
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| -(100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2));
        let out = maximize(f, &[-1.2, 1.0], None, &settings(0.5, 1000, 3), Exec::Sequential);
        assert!((out.x[0] - 1.0).abs() < 1e-4 && (out.x[1] - 1.0).abs() < 1e-4, "{out:?}");
    }

    #[test]
    fn respects_bounds_and_seed() {
        let f = |x: &[f64]| x[0] + x[1];
        let s = CmaSettings {
            lower: Some(vec![-1.0, -1.0]),
            upper: Some(vec![2.0, 0.5]),
            ..settings(1.0, 100, 7)
        };
        let a = maximize(f, &[0.0, 0.0], None, &s, Exec::Sequential);
        let b = maximize(f, &[0.0, 0.0], None, &s, Exec::default());
        assert_eq!(a, b);
        assert!(a.x[0] <= 2.0 && a.x[1] <= 0.5);
        assert!(a.value > 2.49);
    }

    #[test]
    fn never_worse_than_start() {
        // start at the global max; any step makes it worse
        let f = |x: &[f64]| -x[0].abs() - x[1].abs();
        let out = maximize(f, &[0.0, 0.0], Some(0.0), &settings(1.0, 20, 5), Exec::Sequential);
        assert_eq!(out.value, 0.0);
        assert_eq!(out.x, vec![0.0, 0.0]);
    }
}
