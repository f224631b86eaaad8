//! Point estimation and interval inference for the structural parameter.
//!
//! The fit maximizes one of the PR-based log likelihoods over the theta
//! box, optionally on a transformed internal scale (log for scale
//! parameters, logit for proportions), then reports on the natural scale
//! with a finite-difference Hessian, a covariance matrix, and Wald
//! intervals.

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::kernel::Theta;
use crate::likelihood::{Likelihood, ObjectiveKind};
use crate::optimize::{maximize, Objective, OptimOptions};

/// Internal optimization scale for one theta component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// Optimize on the natural scale.
    Identity,
    /// Optimize log x; for positive scale parameters.
    Log,
    /// Optimize logit of the position within the box; for proportions.
    Logit,
}

impl Transform {
    fn forward(self, x: f64, lo: f64, hi: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Log => x.ln(),
            Transform::Logit => {
                let p = ((x - lo) / (hi - lo)).clamp(1e-12, 1.0 - 1e-12);
                (p / (1.0 - p)).ln()
            }
        }
    }

    fn inverse(self, z: f64, lo: f64, hi: f64) -> f64 {
        match self {
            Transform::Identity => z,
            Transform::Log => z.exp(),
            Transform::Logit => lo + (hi - lo) / (1.0 + (-z).exp()),
        }
    }

    /// dx/dz at the natural-scale point x.
    fn dinverse(self, x: f64, lo: f64, hi: f64) -> f64 {
        match self {
            Transform::Identity => 1.0,
            Transform::Log => x,
            Transform::Logit => {
                let p = (x - lo) / (hi - lo);
                (hi - lo) * p * (1.0 - p)
            }
        }
    }

    fn bound_map(self, lo: f64, hi: f64) -> Result<(f64, f64)> {
        match self {
            Transform::Identity => Ok((lo, hi)),
            Transform::Log => {
                if lo <= 0.0 {
                    return Err(Error::argument("log transform needs a positive lower bound"));
                }
                Ok((lo.ln(), hi.ln()))
            }
            // The logit box is clipped just inside the open interval.
            Transform::Logit => Ok((-27.0, 27.0)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub objective: ObjectiveKind,
    pub transforms: Option<Vec<Transform>>,
    /// Number of starting points; beyond `init` they spread through the box.
    pub starts: usize,
    /// Optional data-informed starting point, tried first.
    pub init: Option<Vec<f64>>,
    pub optim: OptimOptions,
    /// Two-sided interval level, e.g. 0.95.
    pub level: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            objective: ObjectiveKind::Prml,
            transforms: None,
            starts: 3,
            init: None,
            optim: OptimOptions::default(),
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConfInterval {
    pub lo: f64,
    pub hi: f64,
    /// False when the variance estimate was unusable (negative diagonal).
    pub valid: bool,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta_hat: Theta,
    pub loglik_at_max: f64,
    pub objective: ObjectiveKind,
    /// Hessian of the negative log likelihood at the maximum.
    pub neg_hessian: Vec<Vec<f64>>,
    pub cov: Vec<Vec<f64>>,
    pub intervals: Vec<ConfInterval>,
    pub iterations: usize,
    pub converged: bool,
    /// True when a component sits on the edge of the box.
    pub boundary: bool,
    /// True when the Hessian was not positive definite and the covariance
    /// fell back to a pseudo-inverse.
    pub pd_warning: bool,
}

struct TransformedObjective<'a> {
    inner: &'a dyn Objective,
    transforms: &'a [Transform],
    bounds: &'a [(f64, f64)],
}

impl TransformedObjective<'_> {
    fn to_natural(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.transforms)
            .zip(self.bounds)
            .map(|((&zi, &t), &(lo, hi))| t.inverse(zi, lo, hi).clamp(lo, hi))
            .collect()
    }
}

impl Objective for TransformedObjective<'_> {
    fn value(&self, z: &[f64]) -> Result<f64> {
        self.inner.value(&self.to_natural(z))
    }

    fn value_grad(&self, z: &[f64]) -> Option<Result<(f64, Vec<f64>)>> {
        let x = self.to_natural(z);
        let r = self.inner.value_grad(&x)?;
        Some(r.map(|(v, mut g)| {
            for ((gk, (&t, &xk)), &(lo, hi)) in g
                .iter_mut()
                .zip(self.transforms.iter().zip(&x))
                .zip(self.bounds)
            {
                *gk *= t.dinverse(xk, lo, hi);
            }
            (v, g)
        }))
    }

    fn has_gradient(&self) -> bool {
        self.inner.has_gradient()
    }
}

/// Deterministic multi-start points: box quantiles 1/2, 1/4, 3/4, then an
/// alternating ladder for larger counts.
fn start_points(bounds: &[(f64, f64)], count: usize) -> Vec<Vec<f64>> {
    let fracs = [0.5, 0.25, 0.75, 0.1, 0.9, 0.4, 0.6];
    (0..count.max(1))
        .map(|s| {
            let q = fracs[s % fracs.len()];
            bounds.iter().map(|&(lo, hi)| lo + q * (hi - lo)).collect()
        })
        .collect()
}

/// Maximize a generic objective over the theta box and assemble the full
/// inference report.
pub fn fit_objective(
    obj: &dyn Objective,
    bounds: &[(f64, f64)],
    opts: &FitOptions,
) -> Result<FitResult> {
    let d = bounds.len();
    let transforms = match &opts.transforms {
        Some(t) if t.len() != d => {
            return Err(Error::argument("transform list dimension mismatch"))
        }
        Some(t) => t.clone(),
        None => vec![Transform::Identity; d],
    };
    let zbounds: Vec<(f64, f64)> = transforms
        .iter()
        .zip(bounds)
        .map(|(&t, &(lo, hi))| t.bound_map(lo, hi))
        .collect::<Result<_>>()?;
    let tobj = TransformedObjective {
        inner: obj,
        transforms: &transforms,
        bounds,
    };

    let mut starts = Vec::new();
    if let Some(init) = &opts.init {
        if init.len() != d {
            return Err(Error::argument("starting point dimension mismatch"));
        }
        let clamped: Vec<f64> = init
            .iter()
            .zip(bounds)
            .map(|(&x, &(lo, hi))| x.clamp(lo, hi))
            .collect();
        starts.push(clamped);
    }
    starts.extend(start_points(bounds, opts.starts.saturating_sub(starts.len())));
    starts.truncate(opts.starts.max(1));

    let mut best: Option<crate::optimize::OptimResult> = None;
    let mut total_iter = 0;
    for start in starts {
        let z0: Vec<f64> = start
            .iter()
            .zip(&transforms)
            .zip(bounds)
            .map(|((&x, &t), &(lo, hi))| t.forward(x, lo, hi))
            .collect();
        let r = maximize(&tobj, &z0, &zbounds, &opts.optim)?;
        total_iter += r.iterations;
        if best.as_ref().map_or(true, |b| r.value > b.value) {
            best = Some(r);
        }
    }
    let best = best.expect("at least one start");
    let theta = tobj.to_natural(&best.x);
    let converged = best.converged;

    let boundary = theta.iter().zip(bounds).any(|(&x, &(lo, hi))| {
        let span = hi - lo;
        x - lo < 1e-6 * span || hi - x < 1e-6 * span
    });

    let neg_hessian = neg_hessian_at(obj, &theta, bounds)?;
    let (cov, pd_warning) = covariance_from_neg_hessian(&neg_hessian)?;
    let intervals = wald_intervals(&theta, &cov, opts.level)?;

    Ok(FitResult {
        theta_hat: Theta::new(theta, bounds.to_vec())?,
        loglik_at_max: best.value,
        objective: opts.objective,
        neg_hessian,
        cov,
        intervals,
        iterations: total_iter,
        converged,
        boundary,
        pd_warning,
    })
}

/// Fit the structural parameter of a bound likelihood.
pub fn fit(lik: &Likelihood<'_>, bounds: &[(f64, f64)], opts: &FitOptions) -> Result<FitResult> {
    struct LikObjective<'a, 'b> {
        lik: &'a Likelihood<'b>,
        bounds: &'a [(f64, f64)],
        kind: ObjectiveKind,
        grad: bool,
    }
    impl Objective for LikObjective<'_, '_> {
        fn value(&self, x: &[f64]) -> Result<f64> {
            let theta = Theta::new(x.to_vec(), self.bounds.to_vec())?;
            self.lik.loglik(&theta, self.kind)
        }
        fn value_grad(&self, x: &[f64]) -> Option<Result<(f64, Vec<f64>)>> {
            if !self.grad {
                return None;
            }
            let theta = match Theta::new(x.to_vec(), self.bounds.to_vec()) {
                Ok(t) => t,
                Err(e) => return Some(Err(e)),
            };
            Some(self.lik.prml_with_grad(&theta))
        }
        fn has_gradient(&self) -> bool {
            self.grad
        }
    }
    let obj = LikObjective {
        lik,
        bounds,
        kind: opts.objective,
        // The exact gradient recursion covers the marginal form only.
        grad: opts.objective == ObjectiveKind::Prml && lik.has_gradient(),
    };
    fit_objective(&obj, bounds, opts)
}

/// Central finite-difference Hessian of the negative objective, with steps
/// shortened one-sidedly at the box edge. Symmetrized.
pub fn neg_hessian_at(
    obj: &dyn Objective,
    x: &[f64],
    bounds: &[(f64, f64)],
) -> Result<Vec<Vec<f64>>> {
    let d = x.len();
    let f0 = obj.value(x)?;
    // Per-coordinate steps, shrunk so the stencil stays in the box.
    let steps: Vec<f64> = (0..d)
        .map(|j| {
            let (lo, hi) = bounds[j];
            let h = 1e-4 * (1.0 + x[j].abs());
            h.min(((hi - x[j]).max(0.0)).max(1e-12))
                .min(((x[j] - lo).max(0.0)).max(1e-12))
                .max(1e-9 * (hi - lo))
        })
        .collect();
    let at = |shift: &[(usize, f64)]| -> Result<f64> {
        let mut p = x.to_vec();
        for &(j, s) in shift {
            p[j] = (p[j] + s).clamp(bounds[j].0, bounds[j].1);
        }
        obj.value(&p)
    };
    let mut h = vec![vec![0.0; d]; d];
    for j in 0..d {
        let hj = steps[j];
        let fp = at(&[(j, hj)])?;
        let fm = at(&[(j, -hj)])?;
        h[j][j] = -((fp - 2.0 * f0 + fm) / (hj * hj));
        for k in (j + 1)..d {
            let hk = steps[k];
            let fpp = at(&[(j, hj), (k, hk)])?;
            let fpm = at(&[(j, hj), (k, -hk)])?;
            let fmp = at(&[(j, -hj), (k, hk)])?;
            let fmm = at(&[(j, -hj), (k, -hk)])?;
            let v = -((fpp - fpm - fmp + fmm) / (4.0 * hj * hk));
            h[j][k] = v;
            h[k][j] = v;
        }
    }
    for row in &h {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(x.to_vec()));
        }
    }
    Ok(h)
}

/// Invert the negative Hessian into a covariance matrix. Falls back to the
/// Moore-Penrose pseudo-inverse (flagged) when it is not positive definite.
pub fn covariance_from_neg_hessian(neg_h: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, bool)> {
    let d = neg_h.len();
    let m = DMatrix::from_fn(d, d, |i, j| neg_h[i][j]);
    let to_rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..d).map(|i| (0..d).map(|j| m[(i, j)]).collect()).collect()
    };
    if let Some(chol) = m.clone().cholesky() {
        return Ok((to_rows(&chol.inverse()), false));
    }
    let pinv = m
        .svd(true, true)
        .pseudo_inverse(1e-12)
        .map_err(Error::domain)?;
    Ok((to_rows(&pinv), true))
}

/// Wald intervals `theta_j +/- z * sqrt(cov_jj)` at the given level.
pub fn wald_intervals(
    theta: &[f64],
    cov: &[Vec<f64>],
    level: f64,
) -> Result<Vec<ConfInterval>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::argument("interval level must lie in (0, 1)"));
    }
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(0.5 + level / 2.0);
    Ok(theta
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let v = cov[j][j];
            if v >= 0.0 {
                let half = z * v.sqrt();
                ConfInterval { lo: t - half, hi: t + half, valid: true }
            } else {
                ConfInterval { lo: f64::NAN, hi: f64::NAN, valid: false }
            }
        })
        .collect())
}
