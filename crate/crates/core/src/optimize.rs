//! Box-constrained maximization of smooth scalar objectives.
//!
//! Primary method is BFGS with projection onto the box and a backtracking
//! line search; when no gradient is available, or BFGS stalls, a clamped
//! Nelder-Mead simplex takes over. Objectives are maximized.

use crate::error::{Error, Result};

/// A scalar objective over a box. `value_grad` returns `None` when no
/// gradient is available, in which case optimization is derivative-free.
pub trait Objective {
    fn value(&self, x: &[f64]) -> Result<f64>;

    fn value_grad(&self, _x: &[f64]) -> Option<Result<(f64, Vec<f64>)>> {
        None
    }

    fn has_gradient(&self) -> bool {
        false
    }
}

/// Plain closure objective without a gradient.
pub struct FnObjective<F: Fn(&[f64]) -> Result<f64>>(pub F);

impl<F: Fn(&[f64]) -> Result<f64>> Objective for FnObjective<F> {
    fn value(&self, x: &[f64]) -> Result<f64> {
        (self.0)(x)
    }
}

/// Closure objective with a gradient.
pub struct GradObjective<F, G>
where
    F: Fn(&[f64]) -> Result<f64>,
    G: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    pub f: F,
    pub fg: G,
}

impl<F, G> Objective for GradObjective<F, G>
where
    F: Fn(&[f64]) -> Result<f64>,
    G: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn value(&self, x: &[f64]) -> Result<f64> {
        (self.f)(x)
    }

    fn value_grad(&self, x: &[f64]) -> Option<Result<(f64, Vec<f64>)>> {
        Some((self.fg)(x))
    }

    fn has_gradient(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub struct OptimOptions {
    pub max_iter: usize,
    /// Convergence tolerance on the projected gradient norm (BFGS) or the
    /// simplex value spread (Nelder-Mead).
    pub tol: f64,
    /// Minimum relative step before declaring convergence.
    pub step_tol: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            max_iter: 200,
            tol: 1e-7,
            step_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn clamp_to_box(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *xi = xi.clamp(lo, hi);
    }
}

fn check_finite(v: f64, x: &[f64]) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(x.to_vec()))
    }
}

/// Maximize `obj` over the box from `x0`, picking BFGS or Nelder-Mead by
/// gradient availability. A BFGS run that fails to converge is polished by
/// Nelder-Mead from its best point.
pub fn maximize(
    obj: &dyn Objective,
    x0: &[f64],
    bounds: &[(f64, f64)],
    opts: &OptimOptions,
) -> Result<OptimResult> {
    if x0.len() != bounds.len() {
        return Err(Error::argument("start point and box dimension mismatch"));
    }
    for (k, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::argument(format!("invalid box for component {k}")));
        }
    }
    let mut start = x0.to_vec();
    clamp_to_box(&mut start, bounds);
    if obj.has_gradient() {
        let r = bfgs(obj, &start, bounds, opts)?;
        if r.converged {
            return Ok(r);
        }
        let polished = nelder_mead(obj, &r.x, bounds, opts)?;
        if polished.value >= r.value {
            return Ok(OptimResult {
                iterations: r.iterations + polished.iterations,
                ..polished
            });
        }
        Ok(r)
    } else {
        nelder_mead(obj, &start, bounds, opts)
    }
}

/// Projected BFGS with Armijo backtracking.
pub fn bfgs(
    obj: &dyn Objective,
    x0: &[f64],
    bounds: &[(f64, f64)],
    opts: &OptimOptions,
) -> Result<OptimResult> {
    let d = x0.len();
    let mut x = x0.to_vec();
    let grad_at = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let (v, g) = obj
            .value_grad(x)
            .ok_or_else(|| Error::Capability("a gradient-based objective".into()))??;
        check_finite(v, x)?;
        if g.iter().any(|gi| !gi.is_finite()) {
            return Err(Error::NonFinite(x.to_vec()));
        }
        Ok((v, g))
    };
    let (mut fx, mut g) = grad_at(&x)?;
    // Inverse Hessian approximation, stored dense row-major.
    let mut h = identity(d);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        iterations += 1;
        if projected_grad_norm(&x, &g, bounds) < opts.tol {
            converged = true;
            break;
        }
        // Ascent direction d = H g (H approximates the inverse of -Hessian).
        let mut dir = mat_vec(&h, &g, d);
        if dot(&dir, &g) <= 0.0 {
            h = identity(d);
            dir = g.clone();
        }

        // Backtracking on the projected path.
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut xt: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + t * di).collect();
            clamp_to_box(&mut xt, bounds);
            let actual_step: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
            let slen = norm(&actual_step);
            if slen < opts.step_tol * (1.0 + norm(&x)) {
                break;
            }
            if let Ok(ft) = obj.value(&xt) {
                if ft.is_finite() && ft >= fx + 1e-4 * dot(&g, &actual_step).max(0.0) && ft > fx {
                    accepted = Some((xt, ft, actual_step));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((x_new, f_new, s)) = accepted else {
            // No uphill step found along this direction.
            converged = projected_grad_norm(&x, &g, bounds) < opts.tol * 100.0;
            break;
        };
        let (_, g_new) = grad_at(&x_new)?;
        // BFGS update on the ascent problem: y = g_old - g_new keeps the
        // curvature condition s.y > 0 for a concave stretch.
        let y: Vec<f64> = g.iter().zip(&g_new).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * norm(&s) * norm(&y) {
            bfgs_update(&mut h, &s, &y, sy, d);
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }
    Ok(OptimResult {
        x,
        value: fx,
        iterations,
        converged,
    })
}

/// Norm of the gradient with components pointing out of the box zeroed.
fn projected_grad_norm(x: &[f64], g: &[f64], bounds: &[(f64, f64)]) -> f64 {
    let mut s = 0.0;
    for ((&xi, &gi), &(lo, hi)) in x.iter().zip(g).zip(bounds) {
        let blocked_low = xi <= lo && gi < 0.0;
        let blocked_high = xi >= hi && gi > 0.0;
        if !(blocked_low || blocked_high) {
            s += gi * gi;
        }
    }
    s.sqrt()
}

fn identity(d: usize) -> Vec<f64> {
    let mut h = vec![0.0; d * d];
    for i in 0..d {
        h[i * d + i] = 1.0;
    }
    h
}

fn mat_vec(m: &[f64], v: &[f64], d: usize) -> Vec<f64> {
    (0..d).map(|i| dot(&m[i * d..(i + 1) * d], v)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64, d: usize) {
    let hy = mat_vec(h, y, d);
    let yhy = dot(y, &hy);
    let c1 = (sy + yhy) / (sy * sy);
    for i in 0..d {
        for j in 0..d {
            h[i * d + j] += c1 * s[i] * s[j] - (hy[i] * s[j] + s[i] * hy[j]) / sy;
        }
    }
}

/// Nelder-Mead simplex with iterates clamped to the box.
pub fn nelder_mead(
    obj: &dyn Objective,
    x0: &[f64],
    bounds: &[(f64, f64)],
    opts: &OptimOptions,
) -> Result<OptimResult> {
    let d = x0.len();
    let eval = |x: &[f64]| -> Result<f64> { check_finite(obj.value(x)?, x) };

    // Initial simplex: start point plus per-coordinate nudges scaled to
    // the box, reflected inward at an edge.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.to_vec(), eval(x0)?));
    for k in 0..d {
        let (lo, hi) = bounds[k];
        let h = 0.05 * (hi - lo);
        let mut p = x0.to_vec();
        p[k] = if p[k] + h <= hi { p[k] + h } else { p[k] - h };
        let v = eval(&p)?;
        simplex.push((p, v));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    let mut converged = false;
    let max_iter = opts.max_iter.max(200) * 5;
    while iterations < max_iter {
        iterations += 1;
        // Sort descending by value (maximization).
        simplex.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let best = simplex[0].1;
        let worst = simplex[d].1;
        let spread: f64 = simplex
            .iter()
            .flat_map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (best - worst).abs() < opts.tol * (1.0 + best.abs()) && spread < 1e-8 {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..d].iter().map(|(p, _)| p[j]).sum::<f64>() / d as f64)
            .collect();
        let move_from_worst = |coef: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[d].0)
                .map(|(c, w)| c + coef * (c - w))
                .collect();
            clamp_to_box(&mut p, bounds);
            p
        };

        let xr = move_from_worst(alpha);
        let fr = eval(&xr)?;
        if fr > simplex[0].1 {
            let xe = move_from_worst(gamma);
            let fe = eval(&xe)?;
            simplex[d] = if fe > fr { (xe, fe) } else { (xr, fr) };
        } else if fr > simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let xc = move_from_worst(-rho);
            let fc = eval(&xc)?;
            if fc > simplex[d].1 {
                simplex[d] = (xc, fc);
            } else {
                // Shrink toward the best vertex.
                let best_p = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    for (pj, bj) in entry.0.iter_mut().zip(&best_p) {
                        *pj = bj + sigma * (*pj - bj);
                    }
                    entry.1 = eval(&entry.0)?;
                }
            }
        }
    }
    simplex.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let (x, value) = simplex.swap_remove(0);
    Ok(OptimResult {
        x,
        value,
        iterations,
        converged,
    })
}
