//! Random-intercept linear regression kernel.
//!
//! For a subject with `r` replicates, covariate rows `x_j` and responses
//! `y_j`, the conditional density given the intercept `u` is
//! `(2 pi sigma^2)^{-r/2} exp{-sum_j (y_j - x_j'beta - u)^2 / (2 sigma^2)}`
//! with `theta = (beta_1..beta_d, sigma)`. The covariate density factor is
//! a theta-free multiplicative constant and is never represented.

use super::{Kernel, Observation, LN_2PI};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LinearRiKernel {
    xdim: usize,
    replicates: usize,
}

impl LinearRiKernel {
    pub fn new(xdim: usize, replicates: usize) -> Self {
        LinearRiKernel { xdim, replicates }
    }

    fn unpack<'a>(
        &self,
        theta: &[f64],
        obs: &'a Observation,
    ) -> Result<(&'a [f64], &'a [f64], f64)> {
        let sigma = theta[self.xdim];
        if !(sigma > 0.0) {
            return Err(Error::domain(format!("sigma = {sigma} must be positive")));
        }
        match obs {
            Observation::Replicated { x, xdim, y } => {
                if *xdim != self.xdim || y.len() != self.replicates {
                    return Err(Error::argument(format!(
                        "expected {} replicates of dimension {}, got {} of {}",
                        self.replicates,
                        self.xdim,
                        y.len(),
                        xdim
                    )));
                }
                Ok((x, y, sigma))
            }
            _ => Err(Error::argument("linear RI kernel takes replicated observations")),
        }
    }
}

impl Kernel for LinearRiKernel {
    fn name(&self) -> &'static str {
        "linear_ri"
    }

    fn theta_dim(&self) -> usize {
        self.xdim + 1
    }

    fn log_density(&self, theta: &[f64], u: &[f64], obs: &Observation) -> Result<f64> {
        let (x, y, sigma) = self.unpack(theta, obs)?;
        let d = self.xdim;
        let mut ss = 0.0;
        for j in 0..y.len() {
            let row = &x[j * d..(j + 1) * d];
            let mut mean = u[0];
            for (xk, bk) in row.iter().zip(&theta[..d]) {
                mean += xk * bk;
            }
            let res = y[j] - mean;
            ss += res * res;
        }
        let r = y.len() as f64;
        Ok(-0.5 * r * (LN_2PI + 2.0 * sigma.ln()) - 0.5 * ss / (sigma * sigma))
    }

    fn grad_log_density(
        &self,
        theta: &[f64],
        u: &[f64],
        obs: &Observation,
        out: &mut [f64],
    ) -> Result<()> {
        let (x, y, sigma) = self.unpack(theta, obs)?;
        let d = self.xdim;
        let s2 = sigma * sigma;
        out.fill(0.0);
        let mut ss = 0.0;
        for j in 0..y.len() {
            let row = &x[j * d..(j + 1) * d];
            let mut mean = u[0];
            for (xk, bk) in row.iter().zip(&theta[..d]) {
                mean += xk * bk;
            }
            let res = y[j] - mean;
            ss += res * res;
            for k in 0..d {
                out[k] += res * row[k] / s2;
            }
        }
        out[d] = -(y.len() as f64) / sigma + ss / (s2 * sigma);
        Ok(())
    }

    fn has_gradient(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::testutil::assert_grad_matches;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    const SQRT_2PI: f64 = 2.5066282746310002;

    #[test]
    fn zero_residual_single_replicate() {
        // y1 = x1 * beta + u, sigma = 2 -> density 1 / (2 sqrt(2 pi)).
        let k = LinearRiKernel::new(1, 1);
        let obs = Observation::replicated(&[&[1.5]], &[1.5 * 3.0 + 0.4]).unwrap();
        let v = k.density(&[3.0, 2.0], &[0.4], &obs).unwrap();
        assert_abs_diff_eq!(v, 1.0 / (2.0 * SQRT_2PI), epsilon = 1e-12);
    }

    #[test]
    fn zero_residual_four_replicates() {
        // All residuals zero, r = 4, sigma = 2 -> (2 pi * 4)^{-2}.
        let k = LinearRiKernel::new(1, 4);
        let rows: Vec<Vec<f64>> = (0..4).map(|j| vec![j as f64]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let y: Vec<f64> = (0..4).map(|j| j as f64 * 3.0 + 0.4).collect();
        let obs = Observation::replicated(&refs, &y).unwrap();
        let v = k.density(&[3.0, 2.0], &[0.4], &obs).unwrap();
        assert_abs_diff_eq!(v, (2.0 * std::f64::consts::PI * 4.0).powi(-2), epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let k = LinearRiKernel::new(2, 4);
        let obs = Observation::replicated(&[&[1.0]], &[0.0]).unwrap();
        assert!(k.log_density(&[1.0, 1.0, 1.0], &[0.0], &obs).is_err());
        let obs = Observation::replicated(&[&[1.0, 2.0]], &[0.0]).unwrap();
        assert!(k.log_density(&[1.0, 1.0, 0.0], &[0.0], &obs).is_err());
    }

    #[test]
    fn gradient_matches_central_difference() {
        let k = LinearRiKernel::new(2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let rows: Vec<Vec<f64>> = (0..4)
                .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
                .collect();
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            let y: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..8.0)).collect();
            let obs = Observation::replicated(&refs, &y).unwrap();
            let theta = [
                rng.gen_range(1.0..3.0),
                rng.gen_range(4.0..6.0),
                rng.gen_range(1.0..3.0),
            ];
            let u = [rng.gen_range(-2.0..2.0)];
            assert_grad_matches(&k, &theta, &u, &obs);
        }
    }

    #[test]
    fn integrates_to_one_for_single_replicate() {
        let k = LinearRiKernel::new(1, 1);
        let g = crate::grid::make_legendre_grid(-15.0, 25.0, 301).unwrap();
        let total = g.integrate_fn(|y| {
            let obs = Observation::replicated(&[&[1.0]], &[y[0]]).unwrap();
            k.density(&[2.0, 2.0], &[0.5], &obs).unwrap()
        });
        assert!((total - 1.0).abs() < 5e-4, "total = {total}");
    }
}
