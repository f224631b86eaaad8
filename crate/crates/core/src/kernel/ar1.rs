//! Two-component AR(1) mixture kernel for multiple testing in time series.
//!
//! For a series `y` of length `T` and mixing point `u = (sigma2, phi)`,
//! the covariance is `Sigma_{u,jk} = sigma2 / (1 - phi) * phi^{|j-k|}` and
//! the kernel is `theta * N(y | 0, Sigma_u) + (1 - theta) * N(y | 0,
//! Sigma_u + 1 1')`, the signal mean having been integrated out.
//!
//! Both normal log densities run in O(T): the null via the AR(1)
//! innovations decomposition, the signal via a rank-one update of the
//! tridiagonal inverse (Sherman-Morrison plus the matrix-determinant
//! lemma).

use super::{log_add_exp, Kernel, Observation, PreparedKernel, LN_2PI};
use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy)]
pub struct Ar1MixKernel {
    series_len: usize,
}

impl Ar1MixKernel {
    pub fn new(series_len: usize) -> Self {
        Ar1MixKernel { series_len }
    }

    fn unpack<'a>(&self, u: &[f64], obs: &'a Observation) -> Result<(f64, f64, &'a [f64])> {
        let (sigma2, phi) = (u[0], u[1]);
        if !(sigma2 > 0.0) {
            return Err(Error::domain(format!("sigma2 = {sigma2} must be positive")));
        }
        if !(phi.abs() < 1.0) {
            return Err(Error::domain(format!("|phi| = |{phi}| must be < 1")));
        }
        match obs {
            Observation::Series(y) if y.len() == self.series_len => Ok((sigma2, phi, y)),
            Observation::Series(y) => Err(Error::argument(format!(
                "series length {} does not match kernel length {}",
                y.len(),
                self.series_len
            ))),
            _ => Err(Error::argument("AR mixture kernel takes series observations")),
        }
    }

    /// Log density of the signal component `N(y | 0, Sigma_u + 1 1')`.
    pub fn log_signal_density(&self, u: &[f64], obs: &Observation) -> Result<f64> {
        let (sigma2, phi, y) = self.unpack(u, obs)?;
        Ok(log_components(sigma2, phi, y).1)
    }
}

/// Log densities of the null component `N(y | 0, Sigma_u)` and the signal
/// component `N(y | 0, Sigma_u + 1 1')`.
fn log_components(sigma2: f64, phi: f64, y: &[f64]) -> (f64, f64) {
    let t_len = y.len();
    // Stationary variance as written in the covariance definition.
    let v = sigma2 / (1.0 - phi);
    let vi = v * (1.0 - phi * phi);
    let log_det = v.ln() + (t_len - 1) as f64 * vi.ln();

    // Whitened inner products through Sigma^{-1}: quadratic form q = y'S y,
    // cross term s = 1'S y, and c = 1'S 1, with S = Sigma_u^{-1}.
    let mut q = y[0] * y[0] / v;
    let mut s = y[0] / v;
    let mut c = 1.0 / v;
    let one_w = 1.0 - phi; // whitened value of the all-ones vector, t >= 2
    for t in 1..t_len {
        let e = y[t] - phi * y[t - 1];
        q += e * e / vi;
        s += e * one_w / vi;
        c += one_w * one_w / vi;
    }

    let base = -0.5 * t_len as f64 * LN_2PI;
    let log_null = base - 0.5 * (log_det + q);
    let log_signal = base - 0.5 * (log_det + (1.0 + c).ln() + q - s * s / (1.0 + c));
    (log_null, log_signal)
}

fn check_theta(theta: &[f64]) -> Result<f64> {
    let t = theta[0];
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("mixing proportion theta = {t} outside [0, 1]")));
    }
    Ok(t)
}

fn log_mix(theta: f64, log_null: f64, log_signal: f64) -> f64 {
    if theta == 0.0 {
        log_signal
    } else if theta == 1.0 {
        log_null
    } else {
        log_add_exp(theta.ln() + log_null, (1.0 - theta).ln() + log_signal)
    }
}

impl Kernel for Ar1MixKernel {
    fn name(&self) -> &'static str {
        "ar1_mix"
    }

    fn theta_dim(&self) -> usize {
        1
    }

    fn log_density(&self, theta: &[f64], u: &[f64], obs: &Observation) -> Result<f64> {
        let t = check_theta(theta)?;
        let (sigma2, phi, y) = self.unpack(u, obs)?;
        let (a, b) = log_components(sigma2, phi, y);
        Ok(log_mix(t, a, b))
    }

    fn grad_log_density(
        &self,
        theta: &[f64],
        u: &[f64],
        obs: &Observation,
        out: &mut [f64],
    ) -> Result<()> {
        let t = check_theta(theta)?;
        let (sigma2, phi, y) = self.unpack(u, obs)?;
        let (a, b) = log_components(sigma2, phi, y);
        let lp = log_mix(t, a, b);
        // d/dtheta p = N_null - N_signal, so d/dtheta log p = e^{a-lp} - e^{b-lp}.
        out[0] = (a - lp).exp() - (b - lp).exp();
        Ok(())
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn log_null_density(&self, u: &[f64], obs: &Observation) -> Result<f64> {
        let (sigma2, phi, y) = self.unpack(u, obs)?;
        Ok(log_components(sigma2, phi, y).0)
    }

    fn has_null(&self) -> bool {
        true
    }

    fn try_prepare<'a>(
        &'a self,
        grid: &'a Grid,
        data: &'a [Observation],
    ) -> Result<Option<Box<dyn PreparedKernel + 'a>>> {
        if grid.dim() != 2 {
            return Err(Error::argument("AR mixture kernel needs a 2-D (sigma2, phi) grid"));
        }
        let j = grid.len();
        let mut log_null = vec![0.0; data.len() * j];
        let mut log_signal = vec![0.0; data.len() * j];
        for (i, obs) in data.iter().enumerate() {
            for jx in 0..j {
                let node = grid.node(jx);
                let (sigma2, phi, y) = self.unpack(node, obs)?;
                let (a, b) = log_components(sigma2, phi, y);
                log_null[i * j + jx] = a;
                log_signal[i * j + jx] = b;
            }
        }
        Ok(Some(Box::new(PreparedAr1 {
            nodes: j,
            n: data.len(),
            log_null,
            log_signal,
        })))
    }
}

/// Component log densities tabulated per (observation, node); theta enters
/// only through the cheap two-term mixture.
struct PreparedAr1 {
    nodes: usize,
    n: usize,
    log_null: Vec<f64>,
    log_signal: Vec<f64>,
}

impl PreparedKernel for PreparedAr1 {
    fn theta_dim(&self) -> usize {
        1
    }

    fn len(&self) -> usize {
        self.n
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn log_row(&self, theta: &[f64], obs_idx: usize, out: &mut [f64]) -> Result<()> {
        let t = check_theta(theta)?;
        let base = obs_idx * self.nodes;
        for jx in 0..self.nodes {
            out[jx] = log_mix(t, self.log_null[base + jx], self.log_signal[base + jx]);
        }
        Ok(())
    }

    fn grad_log_row(&self, theta: &[f64], obs_idx: usize, out: &mut [Vec<f64>]) -> Result<()> {
        let t = check_theta(theta)?;
        let base = obs_idx * self.nodes;
        for jx in 0..self.nodes {
            let (a, b) = (self.log_null[base + jx], self.log_signal[base + jx]);
            let lp = log_mix(t, a, b);
            out[0][jx] = (a - lp).exp() - (b - lp).exp();
        }
        Ok(())
    }
}
