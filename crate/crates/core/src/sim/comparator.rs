//! Parametric Gaussian-random-intercept comparators.
//!
//! The benchmark rows of the regression study assume the intercept law is
//! Gaussian with unknown mean and variance. The linear model has a closed
//! form per-subject marginal; the logistic model integrates the intercept
//! with a 20-point Gauss-Hermite rule. Both are maximized with the shared
//! optimizer and report observed-information Wald intervals.

use crate::error::{Error, Result};
use crate::inference::{fit_objective, FitOptions, FitResult, Transform};
use crate::kernel::Observation;
use crate::optimize::FnObjective;

const LN_2PI: f64 = 1.8378770664093453;

fn unpack(obs: &Observation) -> Result<(&[f64], usize, &[f64])> {
    match obs {
        Observation::Replicated { x, xdim, y } => Ok((x, *xdim, y)),
        _ => Err(Error::argument("comparator takes replicated observations")),
    }
}

/// Subject log marginal of the linear model: residuals against
/// `x'beta + mu` under covariance `sigma^2 I + tau^2 1 1'`, evaluated via
/// the rank-one Woodbury identity.
fn lmm_subject_loglik(obs: &Observation, beta: &[f64], sigma: f64, mu: f64, tau: f64) -> Result<f64> {
    let (x, xdim, y) = unpack(obs)?;
    let r = y.len();
    let s2 = sigma * sigma;
    let t2 = tau * tau;
    let mut ss = 0.0;
    let mut sum = 0.0;
    for j in 0..r {
        let mut res = y[j] - mu;
        for (k, b) in beta.iter().enumerate() {
            res -= x[j * xdim + k] * b;
        }
        ss += res * res;
        sum += res;
    }
    let denom = s2 + r as f64 * t2;
    let log_det = (r - 1) as f64 * s2.ln() + denom.ln();
    let quad = ss / s2 - t2 * sum * sum / (s2 * denom);
    Ok(-0.5 * (r as f64 * LN_2PI + log_det + quad))
}

/// Maximum likelihood for the Gaussian-intercept linear model. Parameter
/// order: `(beta_1, ..., beta_d, sigma, mu, tau)`.
pub fn lmm_gaussian_fit(data: &[Observation], xdim: usize) -> Result<FitResult> {
    let obj = FnObjective(|p: &[f64]| {
        let (beta, rest) = p.split_at(xdim);
        let (sigma, mu, tau) = (rest[0], rest[1], rest[2]);
        let mut total = 0.0;
        for obs in data {
            total += lmm_subject_loglik(obs, beta, sigma, mu, tau)?;
        }
        Ok(total)
    });
    let mut bounds = vec![(-20.0, 20.0); xdim];
    bounds.push((0.05, 20.0)); // sigma
    bounds.push((-20.0, 20.0)); // mu
    bounds.push((0.05, 20.0)); // tau
    let mut transforms = vec![Transform::Identity; xdim];
    transforms.extend([Transform::Log, Transform::Identity, Transform::Log]);
    fit_objective(
        &obj,
        &bounds,
        &FitOptions {
            transforms: Some(transforms),
            ..Default::default()
        },
    )
}

/// Gauss-Hermite nodes and weights for `integral e^{-x^2} g(x) dx`, by the
/// Golub-Welsch eigendecomposition of the Jacobi matrix.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    use nalgebra::DMatrix;
    let mut jac = DMatrix::zeros(n, n);
    for i in 1..n {
        let b = (i as f64 / 2.0).sqrt();
        jac[(i - 1, i)] = b;
        jac[(i, i - 1)] = b;
    }
    let eig = nalgebra::SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let w = std::f64::consts::PI.sqrt() * eig.eigenvectors[(0, i)].powi(2);
            (eig.eigenvalues[i], w)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// Maximum likelihood for the Gaussian-intercept logistic model.
/// Parameter order: `(beta_1, ..., beta_d, mu, tau)`.
pub fn glmm_gaussian_fit(data: &[Observation], xdim: usize, gh_points: usize) -> Result<FitResult> {
    let (nodes, weights) = gauss_hermite(gh_points);
    let obj = FnObjective(|p: &[f64]| {
        let (beta, rest) = p.split_at(xdim);
        let (mu, tau) = (rest[0], rest[1]);
        let mut total = 0.0;
        for obs in data {
            let (x, xd, y) = unpack(obs)?;
            // integral Prod_j Bern(y_j | sigmoid(u + x'beta)) N(u | mu, 2 tau^2? no)
            // substitute u = mu + sqrt(2) tau z against weight e^{-z^2}.
            let mut acc = 0.0;
            let mut max_log = f64::NEG_INFINITY;
            let mut logs = Vec::with_capacity(nodes.len());
            for &z in &nodes {
                let u = mu + std::f64::consts::SQRT_2 * tau * z;
                let mut lp = 0.0;
                for j in 0..y.len() {
                    let mut eta = u;
                    for (k, b) in beta.iter().enumerate() {
                        eta += x[j * xd + k] * b;
                    }
                    // log Bernoulli through the logit link.
                    lp += y[j] * eta - softplus(eta);
                }
                logs.push(lp);
                if lp > max_log {
                    max_log = lp;
                }
            }
            for (lp, &w) in logs.iter().zip(&weights) {
                acc += w * (lp - max_log).exp();
            }
            if !(acc > 0.0) {
                return Err(Error::domain("vanishing subject likelihood"));
            }
            total += max_log + (acc / std::f64::consts::PI.sqrt()).ln();
        }
        Ok(total)
    });
    let mut bounds = vec![(-20.0, 20.0); xdim];
    bounds.push((-20.0, 20.0)); // mu
    bounds.push((0.05, 20.0)); // tau
    let mut transforms = vec![Transform::Identity; xdim + 1];
    transforms.push(Transform::Log);
    fit_objective(
        &obj,
        &bounds,
        &FitOptions {
            transforms: Some(transforms),
            ..Default::default()
        },
    )
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}
