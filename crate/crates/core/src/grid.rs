//! Quadrature grids over the mixing space and densities carried on them.
//!
//! The mixing space is a box in one or two dimensions with Lebesgue
//! dominating measure. A [`Grid`] holds node/weight pairs of a quadrature
//! rule on that box; a [`GridDensity`] holds nonnegative values on the nodes
//! normalized so the quadrature integral is one.

use crate::error::{Error, Result};

/// Finite quadrature rule on a box. Nodes are stored flattened
/// (`dim` coordinates per node); weights are strictly positive and sum to
/// the box volume.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    bounds: Vec<(f64, f64)>,
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, j: usize) -> &[f64] {
        &self.nodes[j * self.dim..(j + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|&(lo, hi)| hi - lo).product()
    }

    /// Quadrature integral of a function sampled on the nodes.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::argument(format!(
                "integrate: {} values for {} nodes",
                values.len(),
                self.len()
            )));
        }
        Ok(dot(&self.weights, values))
    }

    /// Integral of `f` evaluated at the nodes.
    pub fn integrate_fn(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        (0..self.len()).map(|j| self.weights[j] * f(self.node(j))).sum()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Composite trapezoid rule with `j_nodes` equally spaced nodes on `[lo, hi]`.
pub fn make_trapezoid_grid(lo: f64, hi: f64, j_nodes: usize) -> Result<Grid> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::argument(format!("invalid bounds [{lo}, {hi}]")));
    }
    if j_nodes < 2 {
        return Err(Error::argument("trapezoid rule needs at least 2 nodes"));
    }
    let h = (hi - lo) / (j_nodes - 1) as f64;
    let nodes: Vec<f64> = (0..j_nodes).map(|i| lo + h * i as f64).collect();
    let mut weights = vec![h; j_nodes];
    weights[0] = 0.5 * h;
    weights[j_nodes - 1] = 0.5 * h;
    Ok(Grid {
        dim: 1,
        nodes,
        weights,
        bounds: vec![(lo, hi)],
    })
}

/// Gauss-Legendre rule of order `j_nodes` mapped affinely onto `[lo, hi]`.
/// Exact for polynomials of degree up to `2 * j_nodes - 1`.
pub fn make_legendre_grid(lo: f64, hi: f64, j_nodes: usize) -> Result<Grid> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::argument(format!("invalid bounds [{lo}, {hi}]")));
    }
    if j_nodes == 0 {
        return Err(Error::argument("Legendre rule needs at least 1 node"));
    }
    let (x, w) = legendre_nodes_weights(j_nodes);
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let nodes: Vec<f64> = x.iter().map(|&xi| mid + half * xi).collect();
    let weights: Vec<f64> = w.iter().map(|&wi| half * wi).collect();
    Ok(Grid {
        dim: 1,
        nodes,
        weights,
        bounds: vec![(lo, hi)],
    })
}

/// Tensor product of two one-dimensional grids.
pub fn make_product_grid(g1: &Grid, g2: &Grid) -> Result<Grid> {
    if g1.dim != 1 || g2.dim != 1 {
        return Err(Error::argument("product grid requires 1-D factors"));
    }
    let mut nodes = Vec::with_capacity(g1.len() * g2.len() * 2);
    let mut weights = Vec::with_capacity(g1.len() * g2.len());
    for j1 in 0..g1.len() {
        for j2 in 0..g2.len() {
            nodes.push(g1.nodes[j1]);
            nodes.push(g2.nodes[j2]);
            weights.push(g1.weights[j1] * g2.weights[j2]);
        }
    }
    Ok(Grid {
        dim: 2,
        nodes,
        weights,
        bounds: vec![g1.bounds[0], g2.bounds[0]],
    })
}

/// Legendre polynomial value and derivative at `x` by the three-term
/// recurrence.
fn legendre_p_dp(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Nodes and weights of the order-`n` Gauss-Legendre rule on `[-1, 1]`,
/// by Newton iteration on the Legendre polynomial roots.
fn legendre_nodes_weights(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess for the i-th root (descending order).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_p_dp(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_p_dp(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        let (_, dp) = legendre_p_dp(n, 0.0);
        nodes[n / 2] = 0.0;
        weights[n / 2] = 2.0 / (dp * dp);
    }
    (nodes, weights)
}

/// Density values on the nodes of a grid, normalized so the quadrature
/// integral equals one.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    values: Vec<f64>,
}

impl GridDensity {
    /// Builds a density from nonnegative values, renormalizing them.
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::argument(format!(
                "density has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::argument("density values must be finite and nonnegative"));
        }
        let mut d = GridDensity { values };
        d.renormalize(grid)?;
        Ok(d)
    }

    /// Uniform density on the grid's box.
    pub fn uniform(grid: &Grid) -> Self {
        let v = 1.0 / grid.volume();
        GridDensity {
            values: vec![v; grid.len()],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn integral(&self, grid: &Grid) -> f64 {
        grid.integrate(&self.values).expect("length fixed at construction")
    }

    /// Divides by the current quadrature integral. Errors on a zero or
    /// non-finite integral (an all-zero vector cannot form a density).
    pub fn renormalize(&mut self, grid: &Grid) -> Result<f64> {
        let total = self.integral(grid);
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::domain(format!(
                "cannot normalize density with integral {total}"
            )));
        }
        for v in &mut self.values {
            *v /= total;
        }
        Ok(total)
    }
}
