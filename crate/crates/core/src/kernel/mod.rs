//! Likelihood kernels `p(y | theta, u)` and their gradients.
//!
//! A kernel evaluates the sampling density of one observation given the
//! structural parameter `theta` and a latent mixing point `u`. All
//! evaluation happens on the log scale; the recursion exponentiates after
//! shifting by the grid maximum.

mod ar1;
mod gaussian;
mod linear;
mod logistic;

pub use ar1::Ar1MixKernel;
pub use gaussian::GaussianLocationKernel;
pub use linear::LinearRiKernel;
pub use logistic::LogisticRiKernel;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Structural parameter with its box Theta.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    values: Vec<f64>,
    bounds: Vec<(f64, f64)>,
}

impl Theta {
    pub fn new(values: Vec<f64>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if values.len() != bounds.len() {
            return Err(Error::argument("theta and box dimension mismatch"));
        }
        for (k, (&v, &(lo, hi))) in values.iter().zip(&bounds).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::argument(format!("invalid box for component {k}")));
            }
            if !(v >= lo && v <= hi) {
                return Err(Error::argument(format!(
                    "theta[{k}] = {v} outside box [{lo}, {hi}]"
                )));
            }
        }
        Ok(Theta { values, bounds })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }
}

/// A single data point, in one of the three shapes the kernels accept.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    /// One real response.
    Scalar(f64),
    /// `r` replicates of a subject: covariate rows (flattened, `xdim`
    /// entries per replicate) and responses.
    Replicated {
        x: Vec<f64>,
        xdim: usize,
        y: Vec<f64>,
    },
    /// A time series of length `T >= 2`.
    Series(Vec<f64>),
}

impl Observation {
    pub fn replicated(rows: &[&[f64]], y: &[f64]) -> Result<Self> {
        if rows.len() != y.len() || rows.is_empty() {
            return Err(Error::argument("replicated observation shape mismatch"));
        }
        let xdim = rows[0].len();
        if rows.iter().any(|r| r.len() != xdim) {
            return Err(Error::argument("ragged covariate rows"));
        }
        let mut x = Vec::with_capacity(rows.len() * xdim);
        for r in rows {
            x.extend_from_slice(r);
        }
        Ok(Observation::Replicated {
            x,
            xdim,
            y: y.to_vec(),
        })
    }

    pub fn series(y: Vec<f64>) -> Result<Self> {
        if y.len() < 2 {
            return Err(Error::argument("series needs length >= 2"));
        }
        Ok(Observation::Series(y))
    }
}

/// A likelihood kernel. Implementations are stateless and freely shareable.
pub trait Kernel: Sync + Send {
    fn name(&self) -> &'static str;

    fn theta_dim(&self) -> usize;

    /// `log p(obs | theta, u)`.
    fn log_density(&self, theta: &[f64], u: &[f64], obs: &Observation) -> Result<f64>;

    /// Gradient of `log p` with respect to `theta`, written into `out`.
    fn grad_log_density(
        &self,
        _theta: &[f64],
        _u: &[f64],
        _obs: &Observation,
        _out: &mut [f64],
    ) -> Result<()> {
        Err(Error::Capability("a theta-gradient".into()))
    }

    fn has_gradient(&self) -> bool {
        false
    }

    /// Log density of the null component (AR mixture only); theta-free.
    fn log_null_density(&self, _u: &[f64], _obs: &Observation) -> Result<f64> {
        Err(Error::Capability("a null-component evaluator".into()))
    }

    fn has_null(&self) -> bool {
        false
    }

    /// Per-dataset preparation hook: kernels whose theta-dependence
    /// factors out of an expensive part (the AR mixture) cache it here.
    /// `None` means evaluation has nothing to cache; use [`prepare`].
    fn try_prepare<'a>(
        &'a self,
        _grid: &'a Grid,
        _data: &'a [Observation],
    ) -> Result<Option<Box<dyn PreparedKernel + 'a>>> {
        Ok(None)
    }

    /// `p(obs | theta, u)` on the natural scale.
    fn density(&self, theta: &[f64], u: &[f64], obs: &Observation) -> Result<f64> {
        Ok(self.log_density(theta, u, obs)?.exp())
    }

    /// Gradient of the density value (not its log) with respect to theta.
    fn grad_density(&self, theta: &[f64], u: &[f64], obs: &Observation) -> Result<Vec<f64>> {
        let p = self.density(theta, u, obs)?;
        let mut g = vec![0.0; self.theta_dim()];
        self.grad_log_density(theta, u, obs, &mut g)?;
        for gk in &mut g {
            *gk *= p;
        }
        Ok(g)
    }
}

/// Kernel bound to one dataset and grid, evaluated row-wise (all grid nodes
/// for one observation at a time).
pub trait PreparedKernel: Sync {
    fn theta_dim(&self) -> usize;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn has_gradient(&self) -> bool;

    /// Fills `out[j] = log p(Y_i | theta, u_j)` for the grid nodes.
    fn log_row(&self, theta: &[f64], obs_idx: usize, out: &mut [f64]) -> Result<()>;

    /// Fills `out[k][j]` with the k-th component of `grad log p` at node j.
    fn grad_log_row(&self, theta: &[f64], obs_idx: usize, out: &mut [Vec<f64>]) -> Result<()>;
}

/// Binds a kernel to a dataset and grid for row-wise evaluation, taking a
/// kernel-specific cache when one exists.
pub fn prepare<'a>(
    kernel: &'a dyn Kernel,
    grid: &'a Grid,
    data: &'a [Observation],
) -> Result<Box<dyn PreparedKernel + 'a>> {
    if let Some(prepared) = kernel.try_prepare(grid, data)? {
        return Ok(prepared);
    }
    Ok(Box::new(DirectPrepared { kernel, grid, data }))
}

struct DirectPrepared<'a> {
    kernel: &'a dyn Kernel,
    grid: &'a Grid,
    data: &'a [Observation],
}

impl PreparedKernel for DirectPrepared<'_> {
    fn theta_dim(&self) -> usize {
        self.kernel.theta_dim()
    }

    fn len(&self) -> usize {
        self.data.len()
    }

    fn has_gradient(&self) -> bool {
        self.kernel.has_gradient()
    }

    fn log_row(&self, theta: &[f64], obs_idx: usize, out: &mut [f64]) -> Result<()> {
        let obs = &self.data[obs_idx];
        for j in 0..self.grid.len() {
            out[j] = self.kernel.log_density(theta, self.grid.node(j), obs)?;
        }
        Ok(())
    }

    fn grad_log_row(&self, theta: &[f64], obs_idx: usize, out: &mut [Vec<f64>]) -> Result<()> {
        let obs = &self.data[obs_idx];
        let k = self.kernel.theta_dim();
        let mut buf = vec![0.0; k];
        for j in 0..self.grid.len() {
            self.kernel
                .grad_log_density(theta, self.grid.node(j), obs, &mut buf)?;
            for (c, row) in buf.iter().zip(out.iter_mut()) {
                row[j] = *c;
            }
        }
        Ok(())
    }
}

pub(crate) const LN_2PI: f64 = 1.8378770664093453;

/// log(exp(a) + exp(b)), tolerating -inf arguments.
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// Central finite-difference gradient of `log p` in theta.
    pub fn fd_grad_log(
        kernel: &dyn Kernel,
        theta: &[f64],
        u: &[f64],
        obs: &Observation,
    ) -> Vec<f64> {
        let mut g = vec![0.0; theta.len()];
        for k in 0..theta.len() {
            let h = 1e-5 * (1.0 + theta[k].abs());
            let mut tp = theta.to_vec();
            let mut tm = theta.to_vec();
            tp[k] += h;
            tm[k] -= h;
            let fp = kernel.log_density(&tp, u, obs).unwrap();
            let fm = kernel.log_density(&tm, u, obs).unwrap();
            g[k] = (fp - fm) / (2.0 * h);
        }
        g
    }

    pub fn assert_grad_matches(kernel: &dyn Kernel, theta: &[f64], u: &[f64], obs: &Observation) {
        let mut analytic = vec![0.0; theta.len()];
        kernel
            .grad_log_density(theta, u, obs, &mut analytic)
            .unwrap();
        let numeric = fd_grad_log(kernel, theta, u, obs);
        for (a, n) in analytic.iter().zip(&numeric) {
            let scale = 1.0 + a.abs().max(n.abs());
            assert!(
                (a - n).abs() / scale < 1e-5,
                "gradient mismatch: analytic {a}, numeric {n} (theta {theta:?}, u {u:?})"
            );
        }
    }
}
