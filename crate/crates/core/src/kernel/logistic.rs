//! Random-intercept logistic regression kernel:
//! `logit P(Y_j = 1) = u + x_j'beta`, with `theta = beta`. Products over
//! replicates are accumulated in log space with softplus stabilization.

use super::{Kernel, Observation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LogisticRiKernel {
    xdim: usize,
    replicates: usize,
}

impl LogisticRiKernel {
    pub fn new(xdim: usize, replicates: usize) -> Self {
        LogisticRiKernel { xdim, replicates }
    }

    fn unpack<'a>(&self, obs: &'a Observation) -> Result<(&'a [f64], &'a [f64])> {
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
                if y.iter().any(|v| *v != 0.0 && *v != 1.0) {
                    return Err(Error::argument("logistic responses must be 0/1"));
                }
                Ok((x, y))
            }
            _ => Err(Error::argument("logistic RI kernel takes replicated observations")),
        }
    }
}

fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

impl Kernel for LogisticRiKernel {
    fn name(&self) -> &'static str {
        "logistic_ri"
    }

    fn theta_dim(&self) -> usize {
        self.xdim
    }

    fn log_density(&self, theta: &[f64], u: &[f64], obs: &Observation) -> Result<f64> {
        let (x, y) = self.unpack(obs)?;
        let d = self.xdim;
        let mut ll = 0.0;
        for j in 0..y.len() {
            let row = &x[j * d..(j + 1) * d];
            let mut eta = u[0];
            for (xk, bk) in row.iter().zip(&theta[..d]) {
                eta += xk * bk;
            }
            ll += y[j] * eta - softplus(eta);
        }
        Ok(ll)
    }

    fn grad_log_density(
        &self,
        theta: &[f64],
        u: &[f64],
        obs: &Observation,
        out: &mut [f64],
    ) -> Result<()> {
        let (x, y) = self.unpack(obs)?;
        let d = self.xdim;
        out.fill(0.0);
        for j in 0..y.len() {
            let row = &x[j * d..(j + 1) * d];
            let mut eta = u[0];
            for (xk, bk) in row.iter().zip(&theta[..d]) {
                eta += xk * bk;
            }
            let resid = y[j] - sigmoid(eta);
            for k in 0..d {
                out[k] += resid * row[k];
            }
        }
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
    fn logistic_at_zero() {
        let k = LogisticRiKernel::new(1, 1);
        // u + x'beta = 0, y = 1 -> 0.5.
        let obs = Observation::replicated(&[&[1.0]], &[1.0]).unwrap();
        let v = k.density(&[2.0], &[-2.0], &obs).unwrap();
        assert_abs_diff_eq!(v, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn four_replicates_at_zero() {
        let k = LogisticRiKernel::new(1, 4);
        let rows = [[1.0], [1.0], [1.0], [1.0]];
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        for y in [[0.0, 0.0, 0.0, 0.0], [1.0, 0.0, 1.0, 0.0], [1.0, 1.0, 1.0, 1.0]] {
            let obs = Observation::replicated(&refs, &y).unwrap();
            let v = k.density(&[2.0], &[-2.0], &obs).unwrap();
            assert_abs_diff_eq!(v, 0.0625, epsilon = 1e-14);
        }
    }

    #[test]
    fn rejects_non_binary_response() {
        let k = LogisticRiKernel::new(1, 1);
        let obs = Observation::replicated(&[&[1.0]], &[0.5]).unwrap();
        assert!(k.log_density(&[1.0], &[0.0], &obs).is_err());
    }

    #[test]
    fn stable_at_extreme_linear_predictor() {
        let k = LogisticRiKernel::new(1, 4);
        let rows = [[8.0], [8.0], [8.0], [8.0]];
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let obs = Observation::replicated(&refs, &[0.0, 0.0, 0.0, 0.0]).unwrap();
        let lp = k.log_density(&[5.0], &[8.0], &obs).unwrap();
        assert!(lp.is_finite() && lp < -100.0);
    }

    #[test]
    fn gradient_matches_central_difference() {
        let k = LogisticRiKernel::new(2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let rows: Vec<Vec<f64>> = (0..4)
                .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(0.0..1.0)])
                .collect();
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            let y: Vec<f64> = (0..4).map(|_| f64::from(rng.gen_bool(0.5))).collect();
            let obs = Observation::replicated(&refs, &y).unwrap();
            let theta = [rng.gen_range(0.5..3.0), rng.gen_range(3.0..6.0)];
            let u = [rng.gen_range(-4.0..4.0)];
            assert_grad_matches(&k, &theta, &u, &obs);
        }
    }

    #[test]
    fn sums_to_one_over_binary_outcomes() {
        let k = LogisticRiKernel::new(1, 2);
        let rows = [[0.3], [-0.8]];
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let mut total = 0.0;
        for y0 in [0.0, 1.0] {
            for y1 in [0.0, 1.0] {
                let obs = Observation::replicated(&refs, &[y0, y1]).unwrap();
                total += k.density(&[1.7], &[0.4], &obs).unwrap();
            }
        }
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }
}
