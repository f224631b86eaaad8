//! Gaussian location kernel for density estimation: `p(y | sigma, u) =
//! N(y | u, sigma^2)` with the bandwidth `sigma` as the structural
//! parameter.

use super::{Kernel, Observation, LN_2PI};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianLocationKernel;

impl GaussianLocationKernel {
    pub fn new() -> Self {
        GaussianLocationKernel
    }

    fn unpack(theta: &[f64], obs: &Observation) -> Result<(f64, f64)> {
        let sigma = theta[0];
        if !(sigma > 0.0) {
            return Err(Error::domain(format!("bandwidth sigma = {sigma} must be positive")));
        }
        match obs {
            Observation::Scalar(y) => Ok((sigma, *y)),
            _ => Err(Error::argument("Gaussian location kernel takes scalar observations")),
        }
    }
}

impl Kernel for GaussianLocationKernel {
    fn name(&self) -> &'static str {
        "density"
    }

    fn theta_dim(&self) -> usize {
        1
    }

    fn log_density(&self, theta: &[f64], u: &[f64], obs: &Observation) -> Result<f64> {
        let (sigma, y) = Self::unpack(theta, obs)?;
        let z = (y - u[0]) / sigma;
        Ok(-0.5 * LN_2PI - sigma.ln() - 0.5 * z * z)
    }

    fn grad_log_density(
        &self,
        theta: &[f64],
        u: &[f64],
        obs: &Observation,
        out: &mut [f64],
    ) -> Result<()> {
        let (sigma, y) = Self::unpack(theta, obs)?;
        let d = y - u[0];
        out[0] = -1.0 / sigma + d * d / (sigma * sigma * sigma);
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

    #[test]
    fn standard_normal_mode() {
        let k = GaussianLocationKernel::new();
        let v = k.density(&[1.0], &[0.3], &Observation::Scalar(0.3)).unwrap();
        assert_abs_diff_eq!(v, 1.0 / (2.0 * std::f64::consts::PI).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn one_sd_point() {
        // y = u + sigma: N(1; 0, 1) / sigma.
        let k = GaussianLocationKernel::new();
        let sigma = 0.1;
        let v = k.density(&[sigma], &[0.0], &Observation::Scalar(sigma)).unwrap();
        let expect = (-0.5f64).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        assert_abs_diff_eq!(v, expect, epsilon = 1e-10);
        assert_abs_diff_eq!(v, 2.41971, epsilon = 1e-5);
    }

    #[test]
    fn rejects_nonpositive_sigma() {
        let k = GaussianLocationKernel::new();
        assert!(k.log_density(&[0.0], &[0.0], &Observation::Scalar(0.0)).is_err());
        assert!(k.log_density(&[-1.0], &[0.0], &Observation::Scalar(0.0)).is_err());
    }

    #[test]
    fn gradient_matches_central_difference() {
        let k = GaussianLocationKernel::new();
        assert_grad_matches(&k, &[0.1], &[0.5], &Observation::Scalar(0.6));

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let sigma = rng.gen_range(0.05..2.0);
            let u = rng.gen_range(0.0..1.0);
            let y = rng.gen_range(-1.0..2.0);
            assert_grad_matches(&k, &[sigma], &[u], &Observation::Scalar(y));
        }
    }

    #[test]
    fn integrates_to_one_over_wide_quadrature() {
        let k = GaussianLocationKernel::new();
        let g = crate::grid::make_legendre_grid(-10.0, 10.0, 201).unwrap();
        let total = g.integrate_fn(|y| {
            k.density(&[0.7], &[0.4], &Observation::Scalar(y[0])).unwrap()
        });
        assert!((total - 1.0).abs() < 5e-4, "total = {total}");
    }
}
