//! Seeded data generators for the simulation studies.
//!
//! Every generator is a pure function of its seed: a fixed seed yields a
//! bit-identical dataset no matter how many workers consume it later.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Exp, StandardNormal, StudentT};

use crate::error::{Error, Result};
use crate::kernel::Observation;

/// Mixing distribution for the density-estimation study. All live on
/// (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityMix {
    /// Beta(2, 6).
    Beta26,
    /// Beta(10, 30).
    Beta1030,
    /// Equal mixture of point masses at 1/4 and 3/4.
    TwoPoint,
    /// Equal mixture of Beta(2, 6) and a point mass at 3/4.
    BetaPoint,
}

impl std::str::FromStr for DensityMix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta26" => Ok(DensityMix::Beta26),
            "beta1030" => Ok(DensityMix::Beta1030),
            "two_point" => Ok(DensityMix::TwoPoint),
            "beta_point" => Ok(DensityMix::BetaPoint),
            other => Err(Error::argument(format!("unknown mixing choice '{other}'"))),
        }
    }
}

fn draw_mix(mix: DensityMix, rng: &mut ChaCha8Rng) -> f64 {
    match mix {
        DensityMix::Beta26 => Beta::new(2.0, 6.0).expect("valid shapes").sample(rng),
        DensityMix::Beta1030 => Beta::new(10.0, 30.0).expect("valid shapes").sample(rng),
        DensityMix::TwoPoint => {
            if rng.gen_bool(0.5) {
                0.25
            } else {
                0.75
            }
        }
        DensityMix::BetaPoint => {
            if rng.gen_bool(0.5) {
                Beta::new(2.0, 6.0).expect("valid shapes").sample(rng)
            } else {
                0.75
            }
        }
    }
}

/// Gaussian location mixture data: `u` from the mixing choice,
/// `y = u + sigma * N(0, 1)`.
pub fn gen_density(mix: DensityMix, sigma: f64, n: usize, seed: u64) -> Result<Vec<Observation>> {
    if !(sigma > 0.0) {
        return Err(Error::argument("sigma must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let u = draw_mix(mix, &mut rng);
            let e: f64 = StandardNormal.sample(&mut rng);
            Observation::Scalar(u + sigma * e)
        })
        .collect())
}

/// Shifted and scaled Student-t data: `y = 0.5 + 0.1 * t`, five degrees of
/// freedom. The exact density is available for likelihood-deficiency
/// computations.
pub fn gen_studentt(n: usize, seed: u64) -> Vec<Observation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = StudentT::new(5.0).expect("valid dof");
    (0..n)
        .map(|_| Observation::Scalar(0.5 + 0.1 * t.sample(&mut rng)))
        .collect()
}

/// Exact log density of `0.5 + 0.1 * t_5`.
pub fn scaled_t5_log_density(y: f64) -> f64 {
    use statrs::distribution::{Continuous, StudentsT};
    let t = StudentsT::new(0.0, 1.0, 5.0).expect("valid t");
    t.ln_pdf((y - 0.5) / 0.1) - 0.1f64.ln()
}

/// Random-intercept law for the regression studies; each has mean 0 and
/// variance 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterceptLaw {
    /// N(0, 4).
    Gaussian,
    /// Exponential rate 0.5 shifted to support (-2, inf).
    Exponential,
    /// Point masses at -2 and +2.
    TwoPoint,
}

impl std::str::FromStr for InterceptLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(InterceptLaw::Gaussian),
            "exponential" => Ok(InterceptLaw::Exponential),
            "uniform2pt" | "two_point" => Ok(InterceptLaw::TwoPoint),
            other => Err(Error::argument(format!("unknown intercept law '{other}'"))),
        }
    }
}

fn draw_intercept(law: InterceptLaw, rng: &mut ChaCha8Rng) -> f64 {
    match law {
        InterceptLaw::Gaussian => 2.0 * {
            let z: f64 = StandardNormal.sample(rng);
            z
        },
        InterceptLaw::Exponential => Exp::new(0.5).expect("valid rate").sample(rng) - 2.0,
        InterceptLaw::TwoPoint => {
            if rng.gen_bool(0.5) {
                -2.0
            } else {
                2.0
            }
        }
    }
}

/// True regression coefficients of both regression studies.
pub const REG_BETA: [f64; 2] = [2.0, 5.0];
/// True residual scale of the linear study.
pub const LMM_SIGMA: f64 = 2.0;

/// Generated regression dataset with the latent intercepts kept for
/// diagnostics.
#[derive(Debug, Clone)]
pub struct RegressionData {
    pub data: Vec<Observation>,
    pub intercepts: Vec<f64>,
}

/// Covariate rows for one subject: `x1 ~ N(0,1)` per replicate and
/// `x2 = J + 0.1 z` with a subject-level fair coin `J`.
fn draw_covariates(r: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let group = if rng.gen_bool(0.5) { 0.0 } else { 1.0 };
    (0..r)
        .map(|_| {
            let x1: f64 = StandardNormal.sample(rng);
            let z: f64 = StandardNormal.sample(rng);
            [x1, group + 0.1 * z]
        })
        .collect()
}

/// Linear random-intercept data: `y = u + x'beta + sigma * eps`.
pub fn gen_lmm(n: usize, r: usize, law: InterceptLaw, seed: u64) -> Result<RegressionData> {
    if n == 0 || r == 0 {
        return Err(Error::argument("need at least one subject and replicate"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n);
    let mut intercepts = Vec::with_capacity(n);
    for _ in 0..n {
        let u = draw_intercept(law, &mut rng);
        let x = draw_covariates(r, &mut rng);
        let y: Vec<f64> = x
            .iter()
            .map(|row| {
                let e: f64 = StandardNormal.sample(&mut rng);
                u + row[0] * REG_BETA[0] + row[1] * REG_BETA[1] + LMM_SIGMA * e
            })
            .collect();
        let rows: Vec<&[f64]> = x.iter().map(|row| row.as_slice()).collect();
        data.push(Observation::replicated(&rows, &y)?);
        intercepts.push(u);
    }
    Ok(RegressionData { data, intercepts })
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Logistic random-intercept data with explicit coefficients.
pub fn gen_glmm_beta(
    n: usize,
    r: usize,
    law: InterceptLaw,
    beta: [f64; 2],
    seed: u64,
) -> Result<RegressionData> {
    if n == 0 || r == 0 {
        return Err(Error::argument("need at least one subject and replicate"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n);
    let mut intercepts = Vec::with_capacity(n);
    for _ in 0..n {
        let u = draw_intercept(law, &mut rng);
        let x = draw_covariates(r, &mut rng);
        let y: Vec<f64> = x
            .iter()
            .map(|row| {
                let p = sigmoid(u + row[0] * beta[0] + row[1] * beta[1]);
                if rng.gen_bool(p) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let rows: Vec<&[f64]> = x.iter().map(|row| row.as_slice()).collect();
        data.push(Observation::replicated(&rows, &y)?);
        intercepts.push(u);
    }
    Ok(RegressionData { data, intercepts })
}

/// Logistic random-intercept data at the study's true coefficients.
pub fn gen_glmm(n: usize, r: usize, law: InterceptLaw, seed: u64) -> Result<RegressionData> {
    gen_glmm_beta(n, r, law, REG_BETA, seed)
}

/// Latent box of the AR mixture study: `(sigma^2, phi)` supports of the
/// product-beta mixing law.
pub const ARMIX_BOX: [(f64, f64); 2] = [(0.5, 2.0), (0.05, 0.95)];

/// Density of the product-beta mixing law on [`ARMIX_BOX`]: both factors
/// are Beta(2, 2) bodies rescaled to their supports.
pub fn armix_true_f(u: &[f64]) -> f64 {
    fn scaled_beta22(x: f64, lo: f64, hi: f64) -> f64 {
        let z = (x - lo) / (hi - lo);
        if !(0.0..=1.0).contains(&z) {
            return 0.0;
        }
        6.0 * z * (1.0 - z) / (hi - lo)
    }
    scaled_beta22(u[0], ARMIX_BOX[0].0, ARMIX_BOX[0].1)
        * scaled_beta22(u[1], ARMIX_BOX[1].0, ARMIX_BOX[1].1)
}

/// AR mixture dataset with truth labels.
#[derive(Debug, Clone)]
pub struct ArmixData {
    pub data: Vec<Observation>,
    /// True non-null indicators (`xi != 0`).
    pub signal: Vec<bool>,
    pub xi: Vec<f64>,
    /// Latent `(sigma^2, phi)` per series.
    pub u: Vec<(f64, f64)>,
}

/// One stationary AR(1) path with marginal variance `sigma2 / (1 - phi)`,
/// matching the covariance the test kernel assumes.
pub(crate) fn ar1_path(rng: &mut ChaCha8Rng, sigma2: f64, phi: f64, t: usize) -> Vec<f64> {
    let v = sigma2 / (1.0 - phi);
    let innov_sd = (v * (1.0 - phi * phi)).sqrt();
    let mut y = Vec::with_capacity(t);
    let z0: f64 = StandardNormal.sample(rng);
    y.push(v.sqrt() * z0);
    for s in 1..t {
        let z: f64 = StandardNormal.sample(rng);
        y.push(phi * y[s - 1] + innov_sd * z);
    }
    y
}

/// AR(1) signal-mixture data: each series is null (mean zero) with
/// probability `theta`, otherwise shifted by a standard normal draw; the
/// AR parameters come from the product-beta law.
pub fn gen_armix(n: usize, t: usize, theta: f64, seed: u64) -> Result<ArmixData> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::argument("null proportion outside [0, 1]"));
    }
    if t < 2 {
        return Err(Error::argument("series length must be at least 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta22 = Beta::new(2.0, 2.0).expect("valid shapes");
    let mut data = Vec::with_capacity(n);
    let mut signal = Vec::with_capacity(n);
    let mut xis = Vec::with_capacity(n);
    let mut us = Vec::with_capacity(n);
    for _ in 0..n {
        let is_null = rng.gen_bool(theta);
        let xi = if is_null {
            0.0
        } else {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        };
        let (s_lo, s_hi) = ARMIX_BOX[0];
        let (p_lo, p_hi) = ARMIX_BOX[1];
        let sigma2 = s_lo + (s_hi - s_lo) * beta22.sample(&mut rng);
        let phi = p_lo + (p_hi - p_lo) * beta22.sample(&mut rng);
        let mut y = ar1_path(&mut rng, sigma2, phi, t);
        for v in &mut y {
            *v += xi;
        }
        data.push(Observation::series(y)?);
        signal.push(!is_null);
        xis.push(xi);
        us.push((sigma2, phi));
    }
    Ok(ArmixData {
        data,
        signal,
        xi: xis,
        u: us,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kl::YQuadrature;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};

    fn scalars(data: &[Observation]) -> Vec<f64> {
        data.iter()
            .map(|o| match o {
                Observation::Scalar(y) => *y,
                _ => unreachable!(),
            })
            .collect()
    }

    #[test]
    fn generators_are_seed_deterministic() {
        assert_eq!(
            gen_density(DensityMix::BetaPoint, 0.1, 100, 7).unwrap(),
            gen_density(DensityMix::BetaPoint, 0.1, 100, 7).unwrap()
        );
        assert_eq!(gen_studentt(100, 7), gen_studentt(100, 7));
        assert_eq!(
            gen_lmm(20, 4, InterceptLaw::Exponential, 7).unwrap().data,
            gen_lmm(20, 4, InterceptLaw::Exponential, 7).unwrap().data
        );
        assert_eq!(
            gen_armix(20, 5, 0.75, 7).unwrap().data,
            gen_armix(20, 5, 0.75, 7).unwrap().data
        );
        // Different seeds differ.
        assert_ne!(gen_studentt(100, 7), gen_studentt(100, 8));
    }

    #[test]
    fn two_point_mix_collapses_as_noise_vanishes() {
        let ys = scalars(&gen_density(DensityMix::TwoPoint, 1e-12, 200, 3).unwrap());
        for y in ys {
            assert!((y - 0.25).abs() < 1e-9 || (y - 0.75).abs() < 1e-9);
        }
    }

    #[test]
    fn beta26_mean_matches() {
        let n = 100_000;
        let ys = scalars(&gen_density(DensityMix::Beta26, 1e-9, n, 5).unwrap());
        let mean = ys.iter().sum::<f64>() / n as f64;
        // Beta(2,6) mean 0.25, variance ~0.0208 -> SE ~ 4.6e-4.
        assert_abs_diff_eq!(mean, 0.25, epsilon = 3.0 * 4.6e-4);
    }

    #[test]
    fn student_t_location_scale_and_coverage() {
        let n = 100_000;
        let mut ys = scalars(&gen_studentt(n, 11));
        ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = ys[n / 2];
        // Median SE ~ 1/(2 m(0.5) sqrt(n)) with density 10*t5(0) ~ 3.8.
        assert_abs_diff_eq!(median, 0.5, epsilon = 3.0 * 1.4e-3);

        let mean = ys.iter().sum::<f64>() / n as f64;
        let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n as f64;
        // Var(0.1 t5) = 0.01 * 5/3; heavy tails make the variance estimate
        // noisy, so the tolerance is loose.
        assert_abs_diff_eq!(var, 0.01 * 5.0 / 3.0, epsilon = 0.002);

        let yq = YQuadrature::legendre(-0.5, 1.5, 101).unwrap();
        assert!(yq.coverage(&|y| scaled_t5_log_density(y).exp()) >= 0.99);
    }

    #[test]
    fn intercept_laws_have_mean_zero_variance_four() {
        let n = 100_000;
        for law in [InterceptLaw::Gaussian, InterceptLaw::Exponential, InterceptLaw::TwoPoint] {
            let gen = gen_lmm(n, 1, law, 13).unwrap();
            let u = &gen.intercepts;
            let mean = u.iter().sum::<f64>() / n as f64;
            let var = u.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            assert_abs_diff_eq!(mean, 0.0, epsilon = 3.0 * 2.0 / (n as f64).sqrt());
            // SE of the variance is at most ~sqrt(E[u^4])/sqrt(n) ~ 0.1.
            assert_abs_diff_eq!(var, 4.0, epsilon = 0.3);
            if law == InterceptLaw::Exponential {
                assert!(u.iter().all(|&v| v >= -2.0));
            }
            if law == InterceptLaw::TwoPoint {
                assert!(u.iter().all(|&v| v == -2.0 || v == 2.0));
            }
        }
    }

    #[test]
    fn least_squares_recovers_lmm_coefficients() {
        // U is independent of X, so plain OLS of y on (1, x1, x2) is
        // consistent for (0, beta1, beta2).
        let gen = gen_lmm(3000, 4, InterceptLaw::Gaussian, 17).unwrap();
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for obs in &gen.data {
            if let Observation::Replicated { x, xdim, y } = obs {
                for (j, yy) in y.iter().enumerate() {
                    rows.push([1.0, x[j * xdim], x[j * xdim + 1]]);
                    ys.push(*yy);
                }
            }
        }
        let n = rows.len();
        let xm = DMatrix::from_fn(n, 3, |i, j| rows[i][j]);
        let yv = DVector::from_vec(ys);
        let beta = (xm.transpose() * &xm)
            .try_inverse()
            .unwrap()
            * xm.transpose()
            * yv;
        assert_abs_diff_eq!(beta[1], REG_BETA[0], epsilon = 0.15);
        assert_abs_diff_eq!(beta[2], REG_BETA[1], epsilon = 0.35);
        assert_abs_diff_eq!(beta[0], 0.0, epsilon = 0.35);
    }

    #[test]
    fn glmm_rates_behave() {
        // Zero coefficients with the symmetric two-point intercept law:
        // overall response rate is (sigmoid(2) + sigmoid(-2)) / 2 = 1/2.
        let gen = gen_glmm_beta(20_000, 2, InterceptLaw::TwoPoint, [0.0, 0.0], 19).unwrap();
        let (mut ones, mut total) = (0.0, 0.0);
        for obs in &gen.data {
            if let Observation::Replicated { y, .. } = obs {
                ones += y.iter().sum::<f64>();
                total += y.len() as f64;
            }
        }
        assert_abs_diff_eq!(ones / total, 0.5, epsilon = 3.0 * 0.5 / total.sqrt());

        // Raising beta1 raises the mean response among positive x1.
        let rate_at = |b1: f64| {
            let gen = gen_glmm_beta(20_000, 2, InterceptLaw::Gaussian, [b1, 0.0], 23).unwrap();
            let (mut ones, mut total) = (0.0, 0.0);
            for obs in &gen.data {
                if let Observation::Replicated { x, xdim, y } = obs {
                    for (j, yy) in y.iter().enumerate() {
                        if x[j * xdim] > 0.0 {
                            ones += yy;
                            total += 1.0;
                        }
                    }
                }
            }
            ones / total
        };
        assert!(rate_at(3.0) > rate_at(1.0) + 0.05);
    }

    #[test]
    fn armix_truths_and_dynamics() {
        let all_null = gen_armix(200, 4, 1.0, 29).unwrap();
        assert!(all_null.signal.iter().all(|&s| !s));
        assert!(all_null.xi.iter().all(|&x| x == 0.0));

        let n = 20_000;
        let mixed = gen_armix(n, 2, 0.75, 31).unwrap();
        let null_frac = mixed.signal.iter().filter(|&&s| !s).count() as f64 / n as f64;
        let se = (0.75f64 * 0.25 / n as f64).sqrt();
        assert_abs_diff_eq!(null_frac, 0.75, epsilon = 3.0 * se);

        // Lag-1 autocorrelation of a long stationary path matches phi.
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let (sigma2, phi) = (1.2, 0.6);
        let path = ar1_path(&mut rng, sigma2, phi, 200_000);
        let mean = path.iter().sum::<f64>() / path.len() as f64;
        let var: f64 = path.iter().map(|y| (y - mean) * (y - mean)).sum();
        let cov: f64 = path.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        assert_abs_diff_eq!(cov / var, phi, epsilon = 0.01);
    }

    #[test]
    fn armix_true_density_normalizes() {
        // Product of two rescaled Beta(2,2) densities integrates to 1.
        let g1 = crate::grid::make_legendre_grid(ARMIX_BOX[0].0, ARMIX_BOX[0].1, 21).unwrap();
        let g2 = crate::grid::make_legendre_grid(ARMIX_BOX[1].0, ARMIX_BOX[1].1, 21).unwrap();
        let grid = crate::grid::make_product_grid(&g1, &g2).unwrap();
        let total: f64 = (0..grid.len())
            .map(|j| grid.weights()[j] * armix_true_f(grid.node(j)))
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
    }
}
