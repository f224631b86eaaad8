//! Quadrature Kullback-Leibler oracle for the large-sample limit.
//!
//! Approximates K(m, m_{f,theta}) by a double Gauss-Legendre quadrature
//! (over the response and over the mixing grid) and minimizes it over grid
//! densities f with a monotone multiplicative fixed point. The minimum
//! K*(theta) is the limit that the normalized likelihood deficiency
//! K_n(theta) approaches, so it serves as an independent reference in
//! convergence checks.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{make_legendre_grid, Grid, GridDensity};
use crate::kernel::{Kernel, Observation, Theta};

/// Gauss-Legendre rule over the response interval, paired with coverage
/// checking for a candidate true density.
#[derive(Debug, Clone)]
pub struct YQuadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl YQuadrature {
    pub fn legendre(lo: f64, hi: f64, r: usize) -> Result<Self> {
        let g = make_legendre_grid(lo, hi, r)?;
        let nodes = (0..g.len()).map(|j| g.node(j)[0]).collect();
        Ok(YQuadrature {
            nodes,
            weights: g.weights().to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Quadrature mass of `m` over the interval; the truncation check
    /// requires at least 0.99 so tail error cannot distort the KL value.
    pub fn coverage(&self, m: &dyn Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&y, &b)| b * m(y))
            .sum()
    }

    pub fn check_coverage(&self, m: &dyn Fn(f64) -> f64) -> Result<()> {
        let c = self.coverage(m);
        if c < 0.99 {
            return Err(Error::domain(format!(
                "true density mass {c:.4} on the quadrature interval is below 0.99"
            )));
        }
        Ok(())
    }
}

/// Kernel values `p(y_r | theta, u_j)` tabulated over both quadratures.
fn kernel_table(
    kernel: &dyn Kernel,
    theta: &Theta,
    grid: &Grid,
    yq: &YQuadrature,
) -> Result<Vec<Vec<f64>>> {
    yq.nodes()
        .iter()
        .map(|&y| {
            let obs = Observation::Scalar(y);
            (0..grid.len())
                .map(|j| kernel.density(theta.values(), grid.node(j), &obs))
                .collect()
        })
        .collect()
}

fn mixture_at_nodes(grid: &Grid, f: &GridDensity, table: &[Vec<f64>]) -> Vec<f64> {
    table
        .iter()
        .map(|row| {
            row.iter()
                .zip(grid.weights())
                .zip(f.values())
                .map(|((&p, &a), &fj)| a * p * fj)
                .sum()
        })
        .collect()
}

fn kl_from_mixture(m_vals: &[f64], mix: &[f64], yq: &YQuadrature) -> Result<f64> {
    let mut kl = 0.0;
    for (r, ((&mv, &mx), &b)) in m_vals.iter().zip(mix).zip(yq.weights()).enumerate() {
        if mv < 0.0 || !mv.is_finite() {
            return Err(Error::domain(format!("true density invalid at node {r}")));
        }
        if mv == 0.0 {
            continue;
        }
        if !(mx > 0.0) {
            return Err(Error::domain(format!(
                "mixture density vanishes at quadrature node {r} (y = {})",
                yq.nodes()[r]
            )));
        }
        kl += b * mv * (mv / mx).ln();
    }
    Ok(kl)
}

/// Double-quadrature KL divergence between the true density `m` and the
/// grid mixture `m_{f,theta}`.
pub fn kl_quadrature(
    m: &dyn Fn(f64) -> f64,
    f: &GridDensity,
    kernel: &dyn Kernel,
    theta: &Theta,
    grid: &Grid,
    yq: &YQuadrature,
) -> Result<f64> {
    let table = kernel_table(kernel, theta, grid, yq)?;
    let m_vals: Vec<f64> = yq.nodes().iter().map(|&y| m(y)).collect();
    let mix = mixture_at_nodes(grid, f, &table);
    kl_from_mixture(&m_vals, &mix, yq)
}

/// Outcome of the simplex-constrained KL minimization.
#[derive(Debug, Clone)]
pub struct KlMinimization {
    pub f: GridDensity,
    pub kstar: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize the quadrature KL over grid densities by the multiplicative
/// fixed point `f_j <- f_j * sum_r b_r m(y_r) p(y_r | u_j) / m_f(y_r)`,
/// renormalized each sweep. Monotone in the objective; stops when the
/// decrease falls below `tol`.
pub fn minimize_kl(
    m: &dyn Fn(f64) -> f64,
    kernel: &dyn Kernel,
    theta: &Theta,
    grid: &Grid,
    yq: &YQuadrature,
    tol: f64,
    max_iter: usize,
) -> Result<KlMinimization> {
    if !(tol > 0.0) {
        return Err(Error::argument("tolerance must be positive"));
    }
    yq.check_coverage(m)?;
    let table = kernel_table(kernel, theta, grid, yq)?;
    let m_vals: Vec<f64> = yq.nodes().iter().map(|&y| m(y)).collect();
    let bm: Vec<f64> = m_vals
        .iter()
        .zip(yq.weights())
        .map(|(&mv, &b)| b * mv)
        .collect();

    let mut f = GridDensity::uniform(grid);
    let mut kl = kl_from_mixture(&m_vals, &mixture_at_nodes(grid, &f, &table), yq)?;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mix = mixture_at_nodes(grid, &f, &table);
        let mut next = vec![0.0; grid.len()];
        for j in 0..grid.len() {
            let mut s = 0.0;
            for r in 0..yq.len() {
                if bm[r] > 0.0 {
                    s += bm[r] * table[r][j] / mix[r];
                }
            }
            next[j] = f.values()[j] * s;
        }
        let f_new = GridDensity::new(grid, next)?;
        let kl_new = kl_from_mixture(&m_vals, &mixture_at_nodes(grid, &f_new, &table), yq)?;
        debug_assert!(
            kl_new <= kl + 1e-10,
            "KL increased at iteration {iterations}: {kl} -> {kl_new}"
        );
        let decrease = kl - kl_new;
        f = f_new;
        kl = kl_new;
        if decrease.abs() < tol {
            converged = true;
            break;
        }
    }
    Ok(KlMinimization {
        f,
        kstar: kl,
        iterations,
        converged,
    })
}

/// K*(sigma) over a grid of scalar theta values; independent points run
/// concurrently.
pub fn kstar_curve(
    m: &(dyn Fn(f64) -> f64 + Sync),
    kernel: &dyn Kernel,
    bounds: &[(f64, f64)],
    sigma_grid: &[f64],
    grid: &Grid,
    yq: &YQuadrature,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<(f64, f64)>> {
    sigma_grid
        .par_iter()
        .map(|&s| {
            let theta = Theta::new(vec![s], bounds.to_vec())?;
            let r = minimize_kl(m, kernel, &theta, grid, yq, tol, max_iter)?;
            Ok((s, r.kstar))
        })
        .collect()
}

/// Scaled-t density of the reference simulation setting: the location is
/// 0.5 and the scale 0.1 on five degrees of freedom.
pub fn scaled_t5_density(y: f64) -> f64 {
    use statrs::distribution::{Continuous, StudentsT};
    let t = StudentsT::new(0.0, 1.0, 5.0).expect("valid t");
    t.pdf((y - 0.5) / 0.1) / 0.1
}
