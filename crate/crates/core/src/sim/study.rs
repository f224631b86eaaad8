//! Replication driver for the simulation studies.
//!
//! Each study loops seeded replications (seed + replication index), fits
//! the model, and aggregates estimate rows into RMSE, coverage, and — for
//! the testing study — realized error rates. Replications run across
//! workers; the derived seeds make results identical for any worker count.

use rayon::prelude::*;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::fdr::{classify, local_fdr_all, metrics, oracle_lfdr, TestMetrics};
use crate::grid::{make_legendre_grid, make_product_grid, make_trapezoid_grid, Grid, GridDensity};
use crate::inference::{fit, FitOptions, Transform};
use crate::kernel::{Ar1MixKernel, GaussianLocationKernel, LinearRiKernel, LogisticRiKernel, Observation, Theta};
use crate::kl::{kstar_curve, YQuadrature};
use crate::likelihood::{Likelihood, ObjectiveKind, PermutationSpec};
use crate::pr::WeightSequence;
use crate::sim::generators::{
    armix_true_f, gen_armix, gen_glmm, gen_lmm, gen_studentt, scaled_t5_log_density, InterceptLaw,
    ARMIX_BOX, LMM_SIGMA, REG_BETA,
};

/// One replication's outcome.
#[derive(Debug, Clone)]
pub struct RepRow {
    pub rep: usize,
    pub estimate: Vec<f64>,
    pub covered: Vec<bool>,
    pub converged: bool,
    pub boundary: bool,
    /// Plug-in and oracle error rates (testing study only).
    pub test: Option<(TestMetrics, TestMetrics)>,
}

/// Aggregated study outcome; every aggregate is recomputable from `rows`.
#[derive(Debug, Clone)]
pub struct StudyReport {
    pub truth: Vec<f64>,
    pub rows: Vec<RepRow>,
    pub failures: Vec<(usize, String)>,
    pub elapsed_secs: f64,
}

impl StudyReport {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Root mean-square error of component `j` against the truth.
    pub fn rmse(&self, j: usize) -> f64 {
        let mse = self
            .rows
            .iter()
            .map(|r| (r.estimate[j] - self.truth[j]).powi(2))
            .sum::<f64>()
            / self.rows.len() as f64;
        mse.sqrt()
    }

    /// Coverage of component `j` in percent.
    pub fn coverage(&self, j: usize) -> f64 {
        100.0 * self.rows.iter().filter(|r| r.covered[j]).count() as f64 / self.rows.len() as f64
    }

    pub fn mean(&self, j: usize) -> f64 {
        self.rows.iter().map(|r| r.estimate[j]).sum::<f64>() / self.rows.len() as f64
    }

    pub fn sd(&self, j: usize) -> f64 {
        let m = self.mean(j);
        let n = self.rows.len() as f64;
        (self.rows.iter().map(|r| (r.estimate[j] - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0))
            .sqrt()
    }

    /// Mean plug-in and oracle (FDR, MP) over replications, when present.
    pub fn mean_test_rates(&self) -> Option<((f64, f64), (f64, f64))> {
        let pairs: Vec<&(TestMetrics, TestMetrics)> =
            self.rows.iter().filter_map(|r| r.test.as_ref()).collect();
        if pairs.is_empty() {
            return None;
        }
        let n = pairs.len() as f64;
        let avg = |f: &dyn Fn(&TestMetrics) -> f64, oracle: bool| {
            pairs
                .iter()
                .map(|(p, o)| f(if oracle { o } else { p }))
                .sum::<f64>()
                / n
        };
        Some((
            (avg(&|m| m.fdr, false), avg(&|m| m.mp, false)),
            (avg(&|m| m.fdr, true), avg(&|m| m.mp, true)),
        ))
    }
}

fn collect_rows<F>(reps: usize, run: F) -> (Vec<RepRow>, Vec<(usize, String)>)
where
    F: Fn(usize) -> Result<RepRow> + Sync,
{
    let outcomes: Vec<(usize, Result<RepRow>)> =
        (0..reps).into_par_iter().map(|i| (i, run(i))).collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in outcomes {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    (rows, failures)
}

fn covered(fit: &crate::inference::FitResult, truth: &[f64]) -> Vec<bool> {
    fit.intervals
        .iter()
        .zip(truth)
        .map(|(ci, &t)| ci.valid && ci.lo <= t && t <= ci.hi)
        .collect()
}

/// Linear random-intercept study (Table-1 Study I layout).
#[derive(Debug, Clone)]
pub struct LmmStudyConfig {
    pub subjects: usize,
    pub replicates: usize,
    pub law: InterceptLaw,
    pub reps: usize,
    pub seed: u64,
    pub objective: ObjectiveKind,
    pub grid_points: usize,
    pub permutations: usize,
}

impl Default for LmmStudyConfig {
    fn default() -> Self {
        LmmStudyConfig {
            subjects: 50,
            replicates: 4,
            law: InterceptLaw::Gaussian,
            reps: 200,
            seed: 0,
            objective: ObjectiveKind::Prml,
            grid_points: 201,
            permutations: 1,
        }
    }
}

/// Support for the intercept grid: sample mean of all responses plus and
/// minus three sample standard deviations.
fn response_support(data: &[Observation]) -> Result<(f64, f64)> {
    let mut ys = Vec::new();
    for obs in data {
        match obs {
            Observation::Replicated { y, .. } => ys.extend_from_slice(y),
            Observation::Scalar(y) => ys.push(*y),
            Observation::Series(y) => ys.extend_from_slice(y),
        }
    }
    if ys.len() < 2 {
        return Err(Error::argument("too few responses for a data-driven support"));
    }
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let sd = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    Ok((mean - 3.0 * sd, mean + 3.0 * sd))
}

/// Ordinary least squares of the stacked responses on an intercept and the
/// covariates; returns (slopes, residual sd).
fn ols_start(data: &[Observation], xdim: usize) -> Result<(Vec<f64>, f64)> {
    use nalgebra::{DMatrix, DVector};
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    for obs in data {
        if let Observation::Replicated { x, xdim: xd, y } = obs {
            for (j, yy) in y.iter().enumerate() {
                let mut row = vec![1.0];
                row.extend_from_slice(&x[j * xd..(j + 1) * xd]);
                rows.push(row);
                ys.push(*yy);
            }
        }
    }
    let n = rows.len();
    let p = xdim + 1;
    let xm = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let yv = DVector::from_vec(ys);
    let xtx = xm.transpose() * &xm;
    let beta = xtx
        .try_inverse()
        .ok_or_else(|| Error::domain("singular design in least-squares start"))?
        * xm.transpose()
        * &yv;
    let resid = &yv - xm * &beta;
    let s = (resid.norm_squared() / (n - p) as f64).sqrt();
    Ok((beta.as_slice()[1..].to_vec(), s))
}

pub fn run_lmm_study(cfg: &LmmStudyConfig) -> Result<StudyReport> {
    if cfg.reps == 0 {
        return Err(Error::argument("replication count must be at least 1"));
    }
    let start = Instant::now();
    let truth = vec![REG_BETA[0], REG_BETA[1], LMM_SIGMA];
    let truth_for_rows = truth.clone();
    let (rows, failures) = collect_rows(cfg.reps, move |rep| {
        let gen = gen_lmm(cfg.subjects, cfg.replicates, cfg.law, cfg.seed + rep as u64)?;
        let (lo, hi) = response_support(&gen.data)?;
        let grid = make_trapezoid_grid(lo, hi, cfg.grid_points)?;
        let f0 = GridDensity::uniform(&grid);
        let kernel = LinearRiKernel::new(2, cfg.replicates);
        let lik = Likelihood::new(
            &kernel,
            &grid,
            f0,
            WeightSequence::default(),
            &gen.data,
            &PermutationSpec::averaged(cfg.permutations, cfg.seed + rep as u64),
        )?;
        let (slopes, s) = ols_start(&gen.data, 2)?;
        let bounds = [(-20.0, 20.0), (-20.0, 20.0), (0.05, 20.0)];
        let r = fit(
            &lik,
            &bounds,
            &FitOptions {
                objective: cfg.objective,
                transforms: Some(vec![Transform::Identity, Transform::Identity, Transform::Log]),
                starts: 2,
                init: Some(vec![slopes[0], slopes[1], s]),
                ..Default::default()
            },
        )?;
        Ok(RepRow {
            rep,
            estimate: r.theta_hat.values().to_vec(),
            covered: covered(&r, &truth_for_rows),
            converged: r.converged,
            boundary: r.boundary,
            test: None,
        })
    });
    Ok(StudyReport {
        truth,
        rows,
        failures,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// Logistic random-intercept study (Table-1 Study II layout).
#[derive(Debug, Clone)]
pub struct GlmmStudyConfig {
    pub subjects: usize,
    pub replicates: usize,
    pub law: InterceptLaw,
    pub reps: usize,
    pub seed: u64,
    pub objective: ObjectiveKind,
    pub grid_points: usize,
    pub permutations: usize,
}

impl Default for GlmmStudyConfig {
    fn default() -> Self {
        GlmmStudyConfig {
            subjects: 500,
            replicates: 4,
            law: InterceptLaw::Gaussian,
            reps: 100,
            seed: 0,
            objective: ObjectiveKind::Prml,
            grid_points: 201,
            permutations: 1,
        }
    }
}

pub fn run_glmm_study(cfg: &GlmmStudyConfig) -> Result<StudyReport> {
    if cfg.reps == 0 {
        return Err(Error::argument("replication count must be at least 1"));
    }
    let start = Instant::now();
    let truth = vec![REG_BETA[0], REG_BETA[1]];
    let truth_for_rows = truth.clone();
    let (rows, failures) = collect_rows(cfg.reps, move |rep| {
        let gen = gen_glmm(cfg.subjects, cfg.replicates, cfg.law, cfg.seed + rep as u64)?;
        // Estimation support for the intercept follows the model spec.
        let grid = make_trapezoid_grid(-8.0, 8.0, cfg.grid_points)?;
        let f0 = GridDensity::uniform(&grid);
        let kernel = LogisticRiKernel::new(2, cfg.replicates);
        let lik = Likelihood::new(
            &kernel,
            &grid,
            f0,
            WeightSequence::default(),
            &gen.data,
            &PermutationSpec::averaged(cfg.permutations, cfg.seed + rep as u64),
        )?;
        // Linear-probability slopes times four approximate logistic slopes
        // at a balanced response rate.
        let (slopes, _) = ols_start(&gen.data, 2)?;
        let bounds = [(-20.0, 20.0), (-20.0, 20.0)];
        let r = fit(
            &lik,
            &bounds,
            &FitOptions {
                objective: cfg.objective,
                starts: 2,
                init: Some(vec![4.0 * slopes[0], 4.0 * slopes[1]]),
                ..Default::default()
            },
        )?;
        Ok(RepRow {
            rep,
            estimate: r.theta_hat.values().to_vec(),
            covered: covered(&r, &truth_for_rows),
            converged: r.converged,
            boundary: r.boundary,
            test: None,
        })
    });
    Ok(StudyReport {
        truth,
        rows,
        failures,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// AR(1) signal-mixture testing study (Table-2 layout).
#[derive(Debug, Clone)]
pub struct ArmixStudyConfig {
    pub series: usize,
    pub len: usize,
    pub theta: f64,
    pub reps: usize,
    pub seed: u64,
    pub permutations: usize,
    /// Nodes per latent dimension of the product Legendre grid.
    pub grid_points: usize,
    pub cutoff: f64,
}

impl Default for ArmixStudyConfig {
    fn default() -> Self {
        ArmixStudyConfig {
            series: 1000,
            len: 50,
            theta: 0.75,
            reps: 20,
            seed: 0,
            permutations: 5,
            grid_points: 21,
            cutoff: crate::fdr::DEFAULT_CUTOFF,
        }
    }
}

/// The latent grid the AR study estimates on: product Legendre rule over
/// the true support box.
pub fn armix_grid(points: usize) -> Result<Grid> {
    let g1 = make_legendre_grid(ARMIX_BOX[0].0, ARMIX_BOX[0].1, points)?;
    let g2 = make_legendre_grid(ARMIX_BOX[1].0, ARMIX_BOX[1].1, points)?;
    make_product_grid(&g1, &g2)
}

pub fn run_armix_study(cfg: &ArmixStudyConfig) -> Result<StudyReport> {
    if cfg.reps == 0 {
        return Err(Error::argument("replication count must be at least 1"));
    }
    let start = Instant::now();
    let truth = vec![cfg.theta];
    let truth_for_rows = truth.clone();
    let (rows, failures) = collect_rows(cfg.reps, move |rep| {
        let gen = gen_armix(cfg.series, cfg.len, cfg.theta, cfg.seed + rep as u64)?;
        let grid = armix_grid(cfg.grid_points)?;
        let f0 = GridDensity::uniform(&grid);
        let kernel = Ar1MixKernel::new(cfg.len);
        let lik = Likelihood::new(
            &kernel,
            &grid,
            f0,
            WeightSequence::default(),
            &gen.data,
            &PermutationSpec::averaged(cfg.permutations, cfg.seed + rep as u64),
        )?;
        let bounds = [(0.001, 0.999)];
        let r = fit(
            &lik,
            &bounds,
            &FitOptions {
                transforms: Some(vec![Transform::Logit]),
                starts: 2,
                init: Some(vec![0.5]),
                ..Default::default()
            },
        )?;
        let theta_hat = r.theta_hat.values()[0];
        let f_hat = lik.mixing_density(&r.theta_hat)?;

        let lfdrs = local_fdr_all(&gen.data, theta_hat, &grid, &f_hat, &kernel)?;
        let plug = metrics(&classify(&lfdrs, cfg.cutoff, Some(&gen.signal))?)?;

        let oracle_vals: Result<Vec<f64>> = gen
            .data
            .iter()
            .map(|obs| oracle_lfdr(obs, cfg.theta, &grid, &armix_true_f, &kernel))
            .collect();
        let oracle = metrics(&classify(&oracle_vals?, cfg.cutoff, Some(&gen.signal))?)?;

        Ok(RepRow {
            rep,
            estimate: vec![theta_hat],
            covered: covered(&r, &truth_for_rows),
            converged: r.converged,
            boundary: r.boundary,
            test: Some((plug, oracle)),
        })
    });
    Ok(StudyReport {
        truth,
        rows,
        failures,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// Likelihood-deficiency study against the misspecified Student-t truth
/// (Figure-1 layout).
#[derive(Debug, Clone)]
pub struct KlLimitConfig {
    pub sigmas: Vec<f64>,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    /// Legendre order for the mixing grid and the response quadrature.
    pub grid_points: usize,
}

impl Default for KlLimitConfig {
    fn default() -> Self {
        KlLimitConfig {
            sigmas: vec![0.05, 0.10, 0.15, 0.20, 0.30],
            n: 2000,
            reps: 20,
            seed: 0,
            grid_points: 101,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KlLimitReport {
    pub sigmas: Vec<f64>,
    /// `kn[rep][s]` for sigma index `s`.
    pub kn: Vec<Vec<f64>>,
    pub kstar: Vec<f64>,
    pub elapsed_secs: f64,
}

impl KlLimitReport {
    pub fn mean_kn(&self) -> Vec<f64> {
        let reps = self.kn.len() as f64;
        (0..self.sigmas.len())
            .map(|s| self.kn.iter().map(|row| row[s]).sum::<f64>() / reps)
            .collect()
    }

    /// Index of the smallest deficiency per replication; equals the index
    /// of the largest marginal log likelihood.
    pub fn argmin_kn_per_rep(&self) -> Vec<usize> {
        self.kn
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(i, _)| i)
                    .unwrap()
            })
            .collect()
    }

    pub fn argmin_kstar(&self) -> usize {
        self.kstar
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap()
    }
}

pub fn run_kl_limit_study(cfg: &KlLimitConfig) -> Result<KlLimitReport> {
    if cfg.reps == 0 || cfg.sigmas.is_empty() {
        return Err(Error::argument("need at least one replication and sigma"));
    }
    let start = Instant::now();
    let grid = make_legendre_grid(0.0, 1.0, cfg.grid_points)?;
    // Wide enough to capture the heavy-tail contribution to the divergence
    // at small bandwidths; wider still underflows the mixture density.
    let yq = YQuadrature::legendre(-1.5, 2.5, cfg.grid_points)?;
    let kernel = GaussianLocationKernel::new();
    let bounds = vec![(1e-4, 5.0)];

    let kstar: Vec<f64> = kstar_curve(
        &|y| scaled_t5_log_density(y).exp(),
        &kernel,
        &bounds,
        &cfg.sigmas,
        &grid,
        &yq,
        1e-9,
        10000,
    )?
    .into_iter()
    .map(|(_, k)| k)
    .collect();

    let kn: Result<Vec<Vec<f64>>> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let data = gen_studentt(cfg.n, cfg.seed + rep as u64);
            let f0 = GridDensity::uniform(&grid);
            let lik = Likelihood::new(
                &kernel,
                &grid,
                f0,
                WeightSequence::default(),
                &data,
                &PermutationSpec::as_given(),
            )?;
            cfg.sigmas
                .iter()
                .map(|&s| {
                    let theta = Theta::new(vec![s], bounds.clone())?;
                    lik.kn_normalized(&theta, &|obs| match obs {
                        Observation::Scalar(y) => scaled_t5_log_density(*y),
                        _ => unreachable!("study generates scalar data"),
                    })
                })
                .collect()
        })
        .collect();

    Ok(KlLimitReport {
        sigmas: cfg.sigmas.clone(),
        kn: kn?,
        kstar,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}
