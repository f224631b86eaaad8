//! The predictive recursion filter and its gradient-carrying variant.
//!
//! One pass over the data updates a mixing density on the grid:
//!
//! ```text
//! f_i(u) = (1 - w_i) f_{i-1}(u) + w_i p(Y_i | theta, u) f_{i-1}(u) / lambda_i,
//! lambda_i = integral of p(Y_i | theta, .) f_{i-1} dmu,
//! ```
//!
//! accumulating `sum_i log lambda_i` as the marginal log likelihood of
//! `theta`. The gradient variant additionally propagates the per-node
//! theta-gradient of `f_i` and returns the exact gradient of the log
//! likelihood.
//!
//! Kernel values are computed in log space and shifted by their grid
//! maximum before exponentiation, so long-series kernels cannot underflow
//! the update.

use crate::error::{Error, Result};
use crate::grid::{Grid, GridDensity};
use crate::kernel::{Kernel, Observation, PreparedKernel, Theta};

/// Step-size sequence for the recursion.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSequence {
    /// `w_i = (i + 1)^{-gamma}` for `i = 1, 2, ...`, `gamma` in (1/2, 1].
    PowerDecay { gamma: f64 },
    /// Dirichlet-process precision schedule: `w_i = 1 / (1 + alpha_{i-1})`.
    DirichletPrecision { alphas: Vec<f64> },
}

impl WeightSequence {
    pub fn power(gamma: f64) -> Result<Self> {
        if !(gamma > 0.5 && gamma <= 1.0) {
            return Err(Error::argument(format!(
                "weight exponent gamma = {gamma} must lie in (1/2, 1]"
            )));
        }
        Ok(WeightSequence::PowerDecay { gamma })
    }

    pub fn dirichlet(alphas: Vec<f64>) -> Result<Self> {
        if alphas.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::argument("precision parameters must be positive"));
        }
        Ok(WeightSequence::DirichletPrecision { alphas })
    }

    /// Weight for the `step`-th update (zero-based; `step = 0` is `w_1`).
    pub fn weight(&self, step: usize) -> Result<f64> {
        match self {
            WeightSequence::PowerDecay { gamma } => Ok(((step + 2) as f64).powf(-gamma)),
            WeightSequence::DirichletPrecision { alphas } => alphas
                .get(step)
                .map(|a| 1.0 / (1.0 + a))
                .ok_or_else(|| Error::argument(format!("weight sequence shorter than data ({step})"))),
        }
    }
}

impl Default for WeightSequence {
    /// The rate-motivated default `gamma = 2/3`.
    fn default() -> Self {
        WeightSequence::PowerDecay { gamma: 2.0 / 3.0 }
    }
}

/// State of one recursion pass: the current mixing density, the one-step
/// predictive values, and optionally the theta-gradient fields.
#[derive(Debug, Clone)]
pub struct PrState {
    f: GridDensity,
    log_predictives: Vec<f64>,
    loglik: f64,
    grad_f: Option<Vec<Vec<f64>>>,
    grad_loglik: Option<Vec<f64>>,
}

impl PrState {
    pub fn new(f: GridDensity) -> Self {
        PrState {
            f,
            log_predictives: Vec::new(),
            loglik: 0.0,
            grad_f: None,
            grad_loglik: None,
        }
    }

    fn with_gradient(f: GridDensity, theta_dim: usize, nodes: usize) -> Self {
        PrState {
            f,
            log_predictives: Vec::new(),
            loglik: 0.0,
            // f0 is theta-free, so grad f0 = 0.
            grad_f: Some(vec![vec![0.0; nodes]; theta_dim]),
            grad_loglik: Some(vec![0.0; theta_dim]),
        }
    }

    pub fn density(&self) -> &GridDensity {
        &self.f
    }

    /// `log lambda_i` for each processed observation, in processing order.
    pub fn log_predictives(&self) -> &[f64] {
        &self.log_predictives
    }

    pub fn predictives(&self) -> Vec<f64> {
        self.log_predictives.iter().map(|l| l.exp()).collect()
    }

    /// Running `sum_i log lambda_i`.
    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    pub fn grad_loglik(&self) -> Option<&[f64]> {
        self.grad_loglik.as_deref()
    }

    /// Per-node gradient of the final mixing density, one row per theta
    /// component.
    pub fn grad_density(&self) -> Option<&[Vec<f64>]> {
        self.grad_f.as_deref()
    }
}

/// One filter update with explicit weight `w`.
pub fn pr_step(
    state: &mut PrState,
    grid: &Grid,
    kernel: &dyn Kernel,
    theta: &Theta,
    obs: &Observation,
    w: f64,
) -> Result<()> {
    if !(w > 0.0 && w < 1.0) {
        return Err(Error::argument(format!("weight w = {w} outside (0, 1)")));
    }
    let data = std::slice::from_ref(obs);
    let prep = crate::kernel::prepare(kernel, grid, data)?;
    let index = state.log_predictives.len();
    step_prepared(state, grid, prep.as_ref(), theta.values(), 0, index, w)
}

/// Full recursion over `data` in the given order.
pub fn pr_run(
    kernel: &dyn Kernel,
    theta: &Theta,
    grid: &Grid,
    f0: &GridDensity,
    weights: &WeightSequence,
    data: &[Observation],
) -> Result<PrState> {
    let prep = crate::kernel::prepare(kernel, grid, data)?;
    let order: Vec<usize> = (0..data.len()).collect();
    run_prepared(grid, prep.as_ref(), theta.values(), f0, weights, &order, false)
}

/// As [`pr_run`], but also propagates the theta-gradient recursion and
/// returns the exact gradient of the log likelihood.
pub fn pr_run_grad(
    kernel: &dyn Kernel,
    theta: &Theta,
    grid: &Grid,
    f0: &GridDensity,
    weights: &WeightSequence,
    data: &[Observation],
) -> Result<PrState> {
    if !kernel.has_gradient() {
        return Err(Error::Capability("a theta-gradient".into()));
    }
    let prep = crate::kernel::prepare(kernel, grid, data)?;
    let order: Vec<usize> = (0..data.len()).collect();
    run_prepared(grid, prep.as_ref(), theta.values(), f0, weights, &order, true)
}

/// Mixture density `integral of p(obs | theta, .) f dmu` for a density on
/// the grid.
pub fn mixture_density(
    grid: &Grid,
    f: &GridDensity,
    kernel: &dyn Kernel,
    theta: &Theta,
    obs: &Observation,
) -> Result<f64> {
    Ok(log_mixture_density(grid, f, kernel, theta, obs)?.exp())
}

/// Log of [`mixture_density`], computed with a max-shift.
pub fn log_mixture_density(
    grid: &Grid,
    f: &GridDensity,
    kernel: &dyn Kernel,
    theta: &Theta,
    obs: &Observation,
) -> Result<f64> {
    let mut row = vec![0.0; grid.len()];
    for j in 0..grid.len() {
        row[j] = kernel.log_density(theta.values(), grid.node(j), obs)?;
    }
    Ok(log_dot_shifted(grid, &row, f.values()))
}

/// `log integral exp(log_row) * f dmu` with the row shifted by its maximum.
pub(crate) fn log_dot_shifted(grid: &Grid, log_row: &[f64], f: &[f64]) -> f64 {
    let c = log_row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !c.is_finite() {
        return f64::NEG_INFINITY;
    }
    let mut total = 0.0;
    for j in 0..log_row.len() {
        total += grid.weights()[j] * (log_row[j] - c).exp() * f[j];
    }
    if total > 0.0 {
        c + total.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Recursion over a prepared kernel; `order` gives the dataset indices in
/// processing order. Used directly by the likelihood layer so that a
/// dataset is prepared once across permutations and theta values.
pub(crate) fn run_prepared(
    grid: &Grid,
    prep: &dyn PreparedKernel,
    theta: &[f64],
    f0: &GridDensity,
    weights: &WeightSequence,
    order: &[usize],
    want_grad: bool,
) -> Result<PrState> {
    let mut state = if want_grad {
        PrState::with_gradient(f0.clone(), prep.theta_dim(), grid.len())
    } else {
        PrState::new(f0.clone())
    };
    for (step, &obs_idx) in order.iter().enumerate() {
        let w = weights.weight(step)?;
        step_prepared(&mut state, grid, prep, theta, obs_idx, obs_idx, w)?;
    }
    Ok(state)
}

/// One update against a prepared kernel. `report_idx` names the
/// observation in degenerate-observation errors (its dataset index, not
/// the permuted position).
fn step_prepared(
    state: &mut PrState,
    grid: &Grid,
    prep: &dyn PreparedKernel,
    theta: &[f64],
    obs_idx: usize,
    report_idx: usize,
    w: f64,
) -> Result<()> {
    let nodes = grid.len();
    let mut log_row = vec![0.0; nodes];
    prep.log_row(theta, obs_idx, &mut log_row)?;

    let c = log_row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !c.is_finite() {
        return Err(Error::DegenerateObservation { index: report_idx });
    }
    // Shifted kernel values q_j = p_j * exp(-c).
    let q: Vec<f64> = log_row.iter().map(|l| (l - c).exp()).collect();
    let f = state.f.values();
    let mut lam_shift = 0.0;
    for j in 0..nodes {
        lam_shift += grid.weights()[j] * q[j] * f[j];
    }
    if !(lam_shift > 0.0) || !lam_shift.is_finite() {
        return Err(Error::DegenerateObservation { index: report_idx });
    }
    let log_lambda = c + lam_shift.ln();

    // Gradient recursion first: it reads the pre-update f.
    if let Some(grad_f) = state.grad_f.as_mut() {
        let k = prep.theta_dim();
        let mut grad_rows: Vec<Vec<f64>> = vec![vec![0.0; nodes]; k];
        prep.grad_log_row(theta, obs_idx, &mut grad_rows)?;
        let grad_ll = state.grad_loglik.as_mut().expect("paired with grad_f");
        let f = state.f.values();
        for kk in 0..k {
            // G_j (shifted) = q_j * (grad f_j + grad log p_j * f_j).
            let mut dlam = 0.0;
            for j in 0..nodes {
                let g = q[j] * (grad_f[kk][j] + grad_rows[kk][j] * f[j]);
                grad_rows[kk][j] = g; // reuse the buffer for G
                dlam += grid.weights()[j] * g;
            }
            let dloglam = dlam / lam_shift;
            grad_ll[kk] += dloglam;
            for j in 0..nodes {
                grad_f[kk][j] = (1.0 - w) * grad_f[kk][j]
                    + w * (grad_rows[kk][j] - q[j] * f[j] * dloglam) / lam_shift;
            }
        }
    }

    let f = state.f.values_mut();
    for j in 0..nodes {
        f[j] = (1.0 - w) * f[j] + w * q[j] * f[j] / lam_shift;
    }

    // The convex combination is exactly normalized in continuous math;
    // quadrature drift is removed every step to keep the density invariant
    // tight over thousands of updates.
    let total = state.f.integral(grid);
    debug_assert!((total - 1.0).abs() <= 1e-8, "normalization drift {total}");
    if (total - 1.0).abs() > 1e-12 {
        state.f.renormalize(grid)?;
        if let Some(grad_f) = state.grad_f.as_mut() {
            for row in grad_f.iter_mut() {
                for v in row.iter_mut() {
                    *v /= total;
                }
            }
        }
    }

    state.log_predictives.push(log_lambda);
    state.loglik += log_lambda;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_trapezoid_grid, GridDensity};
    use crate::kernel::GaussianLocationKernel;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Kernel constant in u; optionally constant in theta as well.
    struct FlatKernel {
        value: f64,
        theta_scales: bool,
    }

    impl Kernel for FlatKernel {
        fn name(&self) -> &'static str {
            "flat"
        }
        fn theta_dim(&self) -> usize {
            1
        }
        fn log_density(&self, theta: &[f64], _u: &[f64], _obs: &Observation) -> Result<f64> {
            let v = if self.theta_scales {
                self.value * theta[0]
            } else {
                self.value
            };
            Ok(v.ln())
        }
        fn grad_log_density(
            &self,
            theta: &[f64],
            _u: &[f64],
            _obs: &Observation,
            out: &mut [f64],
        ) -> Result<()> {
            out[0] = if self.theta_scales { 1.0 / theta[0] } else { 0.0 };
            Ok(())
        }
        fn has_gradient(&self) -> bool {
            true
        }
    }

    fn unit_setup() -> (Grid, GridDensity, Theta) {
        let grid = make_trapezoid_grid(0.0, 1.0, 101).unwrap();
        let f0 = GridDensity::uniform(&grid);
        let theta = Theta::new(vec![0.1], vec![(0.01, 1.0)]).unwrap();
        (grid, f0, theta)
    }

    #[test]
    fn flat_kernel_leaves_density_unchanged() {
        let (grid, f0, theta) = unit_setup();
        let k = FlatKernel { value: 0.37, theta_scales: false };
        let mut state = PrState::new(f0.clone());
        pr_step(&mut state, &grid, &k, &theta, &Observation::Scalar(0.5), 0.4).unwrap();
        for (a, b) in state.density().values().iter().zip(f0.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(state.predictives()[0], 0.37, epsilon = 1e-14);
    }

    #[test]
    fn vanishing_weight_leaves_density_unchanged() {
        let (grid, f0, theta) = unit_setup();
        let k = GaussianLocationKernel::new();
        let mut state = PrState::new(f0.clone());
        pr_step(&mut state, &grid, &k, &theta, &Observation::Scalar(0.5), 1e-12).unwrap();
        for (a, b) in state.density().values().iter().zip(f0.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn step_rejects_weight_outside_unit_interval() {
        let (grid, f0, theta) = unit_setup();
        let k = GaussianLocationKernel::new();
        let mut state = PrState::new(f0);
        for w in [0.0, 1.0, -0.1, 1.5] {
            assert!(pr_step(&mut state, &grid, &k, &theta, &Observation::Scalar(0.5), w).is_err());
        }
    }

    #[test]
    fn one_step_matches_hand_quadrature() {
        // Direct evaluation of the update formula as the oracle.
        let (grid, f0, theta) = unit_setup();
        let k = GaussianLocationKernel::new();
        let (w, y) = (0.5, 0.5);

        let p: Vec<f64> = (0..grid.len())
            .map(|j| k.density(theta.values(), grid.node(j), &Observation::Scalar(y)).unwrap())
            .collect();
        let pf: Vec<f64> = p.iter().zip(f0.values()).map(|(a, b)| a * b).collect();
        let lambda = grid.integrate(&pf).unwrap();
        let expected: Vec<f64> = (0..grid.len())
            .map(|j| (1.0 - w) * f0.values()[j] + w * pf[j] / lambda)
            .collect();

        let mut state = PrState::new(f0);
        pr_step(&mut state, &grid, &k, &theta, &Observation::Scalar(y), w).unwrap();
        assert_abs_diff_eq!(state.predictives()[0], lambda, epsilon = 1e-12);
        for (a, b) in state.density().values().iter().zip(&expected) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn empty_data_is_identity() {
        let (grid, f0, theta) = unit_setup();
        let k = GaussianLocationKernel::new();
        let state = pr_run(&k, &theta, &grid, &f0, &WeightSequence::default(), &[]).unwrap();
        assert_eq!(state.loglik(), 0.0);
        assert_eq!(state.density().values(), f0.values());
    }

    #[test]
    fn single_observation_loglik_is_log_initial_mixture() {
        let (grid, f0, theta) = unit_setup();
        let k = GaussianLocationKernel::new();
        let obs = Observation::Scalar(0.42);
        let state =
            pr_run(&k, &theta, &grid, &f0, &WeightSequence::default(), &[obs.clone()]).unwrap();
        let m0 = mixture_density(&grid, &f0, &k, &theta, &obs).unwrap();
        assert_abs_diff_eq!(state.loglik(), m0.ln(), epsilon = 1e-12);
    }

    #[test]
    fn one_step_reproduces_polya_urn_posterior_mean() {
        let (grid, f0, theta) = unit_setup();
        let k = GaussianLocationKernel::new();
        let alpha0 = 1.0;
        let obs = Observation::Scalar(0.3);
        let weights = WeightSequence::dirichlet(vec![alpha0]).unwrap();
        let state =
            pr_run(&k, &theta, &grid, &f0, &weights, std::slice::from_ref(&obs)).unwrap();

        // Posterior-mean density of the single-observation Dirichlet
        // process update, computed independently.
        let p: Vec<f64> = (0..grid.len())
            .map(|j| k.density(theta.values(), grid.node(j), &obs).unwrap())
            .collect();
        let pf: Vec<f64> = p.iter().zip(f0.values()).map(|(a, b)| a * b).collect();
        let norm = grid.integrate(&pf).unwrap();
        for j in 0..grid.len() {
            let urn = alpha0 / (alpha0 + 1.0) * f0.values()[j] + 1.0 / (alpha0 + 1.0) * pf[j] / norm;
            assert_abs_diff_eq!(state.density().values()[j], urn, epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_observation_names_index() {
        // A kernel that vanishes identically on the grid.
        struct ZeroKernel;
        impl Kernel for ZeroKernel {
            fn name(&self) -> &'static str {
                "zero"
            }
            fn theta_dim(&self) -> usize {
                1
            }
            fn log_density(&self, _t: &[f64], _u: &[f64], _o: &Observation) -> Result<f64> {
                Ok(f64::NEG_INFINITY)
            }
        }
        let (grid, f0, theta) = unit_setup();
        let data = vec![Observation::Scalar(0.1), Observation::Scalar(0.2)];
        let err = pr_run(&ZeroKernel, &theta, &grid, &f0, &WeightSequence::default(), &data)
            .unwrap_err();
        match err {
            Error::DegenerateObservation { index } => assert_eq!(index, 0),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn theta_free_kernel_has_zero_gradient() {
        let (grid, f0, theta) = unit_setup();
        let k = FlatKernel { value: 0.8, theta_scales: false };
        let data = vec![Observation::Scalar(0.1); 5];
        let state =
            pr_run_grad(&k, &theta, &grid, &f0, &WeightSequence::default(), &data).unwrap();
        assert_abs_diff_eq!(state.grad_loglik().unwrap()[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn single_step_gradient_formula() {
        // With grad f0 = 0: grad log lambda_1 = int grad p * f0 / lambda_1.
        let (grid, f0, theta) = unit_setup();
        let k = GaussianLocationKernel::new();
        let obs = Observation::Scalar(0.55);
        let state = pr_run_grad(
            &k,
            &theta,
            &grid,
            &f0,
            &WeightSequence::default(),
            std::slice::from_ref(&obs),
        )
        .unwrap();
        let num: f64 = (0..grid.len())
            .map(|j| {
                grid.weights()[j]
                    * k.grad_density(theta.values(), grid.node(j), &obs).unwrap()[0]
                    * f0.values()[j]
            })
            .sum();
        let lambda = mixture_density(&grid, &f0, &k, &theta, &obs).unwrap();
        assert_abs_diff_eq!(state.grad_loglik().unwrap()[0], num / lambda, epsilon = 1e-10);
    }

    #[test]
    fn gradient_matches_finite_differences_over_run() {
        let (grid, f0, _) = unit_setup();
        let k = GaussianLocationKernel::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<Observation> =
            (0..25).map(|_| Observation::Scalar(rng.gen_range(0.0..1.0))).collect();
        let w = WeightSequence::default();
        let sigma = 0.12;
        let theta = Theta::new(vec![sigma], vec![(0.01, 1.0)]).unwrap();
        let state = pr_run_grad(&k, &theta, &grid, &f0, &w, &data).unwrap();

        let h = 1e-5 * (1.0 + sigma);
        let lp = pr_run(
            &k,
            &Theta::new(vec![sigma + h], vec![(0.01, 1.0)]).unwrap(),
            &grid,
            &f0,
            &w,
            &data,
        )
        .unwrap()
        .loglik();
        let lm = pr_run(
            &k,
            &Theta::new(vec![sigma - h], vec![(0.01, 1.0)]).unwrap(),
            &grid,
            &f0,
            &w,
            &data,
        )
        .unwrap()
        .loglik();
        let fd = (lp - lm) / (2.0 * h);
        let g = state.grad_loglik().unwrap()[0];
        assert!((g - fd).abs() / (1.0 + fd.abs()) < 1e-5, "grad {g} vs fd {fd}");
    }

    #[test]
    fn gradient_of_density_integrates_to_zero() {
        let (grid, f0, theta) = unit_setup();
        let k = GaussianLocationKernel::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<Observation> =
            (0..50).map(|_| Observation::Scalar(rng.gen_range(0.0..1.0))).collect();
        let state =
            pr_run_grad(&k, &theta, &grid, &f0, &WeightSequence::default(), &data).unwrap();
        let total = grid.integrate(&state.grad_density().unwrap()[0]).unwrap();
        assert!(total.abs() < 1e-6, "grad f integral {total}");
    }

    #[test]
    fn density_stays_normalized_and_positive_over_run() {
        let (grid, f0, theta) = unit_setup();
        let k = GaussianLocationKernel::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data: Vec<Observation> =
            (0..500).map(|_| Observation::Scalar(rng.gen_range(0.0..1.0))).collect();
        let state = pr_run(&k, &theta, &grid, &f0, &WeightSequence::default(), &data).unwrap();
        assert_abs_diff_eq!(state.density().integral(&grid), 1.0, epsilon = 1e-10);
        assert!(state.density().values().iter().all(|v| *v > 0.0));
        assert!(state.log_predictives().iter().all(|l| l.is_finite()));
    }

    #[test]
    fn order_dependence_is_real() {
        let (grid, f0, theta) = unit_setup();
        let k = GaussianLocationKernel::new();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let data: Vec<Observation> =
            (0..20).map(|_| Observation::Scalar(rng.gen_range(0.0..1.0))).collect();
        let mut reversed = data.clone();
        reversed.reverse();
        let w = WeightSequence::default();
        let a = pr_run(&k, &theta, &grid, &f0, &w, &data).unwrap().loglik();
        let b = pr_run(&k, &theta, &grid, &f0, &w, &reversed).unwrap().loglik();
        assert!((a - b).abs() > 1e-10, "permutations unexpectedly agree: {a}");
    }

    #[test]
    fn mixture_density_basics() {
        let (grid, f0, theta) = unit_setup();
        let flat = FlatKernel { value: 0.73, theta_scales: false };
        let m = mixture_density(&grid, &f0, &flat, &theta, &Observation::Scalar(0.0)).unwrap();
        assert_abs_diff_eq!(m, 0.73, epsilon = 1e-13);

        // Near-delta mixing density: all mass at one node.
        let mut v = vec![0.0; grid.len()];
        v[50] = 1.0;
        let delta = GridDensity::new(&grid, v).unwrap();
        let k = GaussianLocationKernel::new();
        let obs = Observation::Scalar(0.5);
        let m = mixture_density(&grid, &delta, &k, &theta, &obs).unwrap();
        let at_node = k.density(theta.values(), grid.node(50), &obs).unwrap();
        assert_abs_diff_eq!(m, at_node, epsilon = 1e-9 * at_node);
    }

    #[test]
    fn mixture_density_stable_under_grid_refinement() {
        let coarse = make_trapezoid_grid(0.0, 1.0, 201).unwrap();
        let fine = make_trapezoid_grid(0.0, 1.0, 2001).unwrap();
        let k = GaussianLocationKernel::new();
        let theta = Theta::new(vec![0.05], vec![(0.01, 1.0)]).unwrap();
        let obs = Observation::Scalar(0.37);
        let mc = mixture_density(&coarse, &GridDensity::uniform(&coarse), &k, &theta, &obs).unwrap();
        let mf = mixture_density(&fine, &GridDensity::uniform(&fine), &k, &theta, &obs).unwrap();
        assert!((mc - mf).abs() < 1e-6, "coarse {mc} vs fine {mf}");
    }

    #[test]
    fn weight_sequences() {
        let w = WeightSequence::power(2.0 / 3.0).unwrap();
        assert_abs_diff_eq!(w.weight(0).unwrap(), 2f64.powf(-2.0 / 3.0), epsilon = 1e-15);
        assert!(WeightSequence::power(0.4).is_err());
        assert!(WeightSequence::power(1.2).is_err());

        let w = WeightSequence::dirichlet(vec![1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(w.weight(0).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(w.weight(1).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert!(w.weight(2).is_err());
        assert!(WeightSequence::dirichlet(vec![0.0]).is_err());
    }
}
