//! Empirical-Bayes multiple testing for the AR(1) signal mixture.
//!
//! Each series gets a local false discovery rate: the posterior
//! probability that it carries no signal, computed from the fitted null
//! proportion and mixing density. Series with lfdr at or below the cutoff
//! are flagged non-null. A Bayes oracle built from the true parameters
//! provides the comparison benchmark in simulations.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridDensity};
use crate::kernel::{Kernel, Observation};
use crate::pr::log_dot_shifted;

/// One tested series.
#[derive(Debug, Clone, PartialEq)]
pub struct TestDecision {
    pub index: usize,
    pub lfdr: f64,
    pub flagged: bool,
    /// True non-null status, when known (simulations).
    pub truth: Option<bool>,
}

/// Realized error rates over a decision set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestMetrics {
    /// False discoveries over max(1, discoveries).
    pub fdr: f64,
    /// Misclassification probability: all errors over n.
    pub mp: f64,
    pub discoveries: usize,
    pub false_discoveries: usize,
    pub missed: usize,
}

/// Posterior null probability of one series under the plug-in rule:
/// `theta * integral of N0(obs | u) f(u) du / m(obs)` where m mixes the
/// null and signal components with weights theta and 1 - theta.
pub fn local_fdr(
    obs: &Observation,
    theta_hat: f64,
    grid: &Grid,
    f_hat: &GridDensity,
    kernel: &dyn Kernel,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta_hat) {
        return Err(Error::argument("null proportion outside [0, 1]"));
    }
    if !kernel.has_null() {
        return Err(Error::Capability("a null-component evaluator".into()));
    }
    if theta_hat == 0.0 {
        return Ok(0.0);
    }
    let mut null_row = vec![0.0; grid.len()];
    let mut mix_row = vec![0.0; grid.len()];
    let theta = [theta_hat];
    for j in 0..grid.len() {
        let u = grid.node(j);
        null_row[j] = kernel.log_null_density(u, obs)?;
        mix_row[j] = kernel.log_density(&theta, u, obs)?;
    }
    let log_num = theta_hat.ln() + log_dot_shifted(grid, &null_row, f_hat.values());
    let log_den = log_dot_shifted(grid, &mix_row, f_hat.values());
    if !log_den.is_finite() {
        return Err(Error::domain("mixture density vanishes for a test series"));
    }
    let ratio = (log_num - log_den).exp();
    if ratio > 1.0 + 1e-12 {
        return Err(Error::domain(format!(
            "posterior null probability {ratio} exceeds 1 beyond roundoff"
        )));
    }
    Ok(ratio.clamp(0.0, 1.0))
}

/// Plug-in lfdr for every series, evaluated concurrently.
pub fn local_fdr_all(
    data: &[Observation],
    theta_hat: f64,
    grid: &Grid,
    f_hat: &GridDensity,
    kernel: &dyn Kernel,
) -> Result<Vec<f64>> {
    data.par_iter()
        .map(|obs| local_fdr(obs, theta_hat, grid, f_hat, kernel))
        .collect()
}

/// Bayes-oracle lfdr: the plug-in rule evaluated at the true null
/// proportion and true mixing density, quadratured on `grid`.
pub fn oracle_lfdr(
    obs: &Observation,
    theta_true: f64,
    grid: &Grid,
    f_true: &dyn Fn(&[f64]) -> f64,
    kernel: &dyn Kernel,
) -> Result<f64> {
    let vals: Vec<f64> = (0..grid.len()).map(|j| f_true(grid.node(j))).collect();
    let f = GridDensity::new(grid, vals)?;
    local_fdr(obs, theta_true, grid, &f, kernel)
}

/// Threshold the lfdr values; a series is flagged non-null when its lfdr
/// is at or below the cutoff. `truths` marks which series truly carry
/// signal.
pub fn classify(
    lfdrs: &[f64],
    cutoff: f64,
    truths: Option<&[bool]>,
) -> Result<Vec<TestDecision>> {
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(Error::argument("cutoff must lie in (0, 1)"));
    }
    if let Some(t) = truths {
        if t.len() != lfdrs.len() {
            return Err(Error::argument("truth vector length mismatch"));
        }
    }
    Ok(lfdrs
        .iter()
        .enumerate()
        .map(|(index, &lfdr)| TestDecision {
            index,
            lfdr,
            flagged: lfdr <= cutoff,
            truth: truths.map(|t| t[index]),
        })
        .collect())
}

pub const DEFAULT_CUTOFF: f64 = 0.5;

/// Realized FDR and misclassification rate; needs every truth present.
pub fn metrics(decisions: &[TestDecision]) -> Result<TestMetrics> {
    if decisions.is_empty() {
        return Err(Error::argument("no decisions to score"));
    }
    let mut discoveries = 0;
    let mut false_discoveries = 0;
    let mut missed = 0;
    for d in decisions {
        let truth = d
            .truth
            .ok_or_else(|| Error::argument(format!("decision {} lacks a truth label", d.index)))?;
        if d.flagged {
            discoveries += 1;
            if !truth {
                false_discoveries += 1;
            }
        } else if truth {
            missed += 1;
        }
    }
    let fdr = false_discoveries as f64 / discoveries.max(1) as f64;
    let mp = (false_discoveries + missed) as f64 / decisions.len() as f64;
    Ok(TestMetrics {
        fdr,
        mp,
        discoveries,
        false_discoveries,
        missed,
    })
}
