//! Marginal and profile log likelihoods of the structural parameter.
//!
//! The marginal form is the running sum of one-step-ahead predictive log
//! densities from the recursion; the profile form plugs the final mixing
//! density into every observation. Both depend on the data order, so the
//! evaluator can average them over seeded random permutations.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridDensity};
use crate::kernel::{prepare, Kernel, Observation, PreparedKernel, Theta};
use crate::pr::{log_dot_shifted, run_prepared, PrState, WeightSequence};

/// Which PR-based log likelihood to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    Prml,
    Profile,
}

impl std::fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ObjectiveKind::Prml => write!(f, "prml"),
            ObjectiveKind::Profile => write!(f, "profile"),
        }
    }
}

/// How the data enter the recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataOrder {
    /// First pass in the given order; any further passes permuted.
    AsGiven,
    /// All passes on seeded random permutations.
    Permuted,
}

/// Permutation-averaging configuration.
#[derive(Debug, Clone)]
pub struct PermutationSpec {
    pub count: usize,
    pub seed: u64,
    pub order: DataOrder,
}

impl Default for PermutationSpec {
    fn default() -> Self {
        PermutationSpec {
            count: 1,
            seed: 0,
            order: DataOrder::AsGiven,
        }
    }
}

impl PermutationSpec {
    pub fn as_given() -> Self {
        Self::default()
    }

    pub fn averaged(count: usize, seed: u64) -> Self {
        PermutationSpec {
            count,
            seed,
            order: DataOrder::AsGiven,
        }
    }
}

/// Likelihood evaluator bound to one dataset. The kernel is prepared once
/// and the permutation set is frozen at construction, so evaluations at
/// different theta values are pure functions.
pub struct Likelihood<'a> {
    grid: &'a Grid,
    prep: Box<dyn PreparedKernel + 'a>,
    f0: GridDensity,
    weights: WeightSequence,
    data: &'a [Observation],
    orders: Vec<Vec<usize>>,
    log_m0: OnceLock<Vec<f64>>,
}

impl<'a> Likelihood<'a> {
    pub fn new(
        kernel: &'a dyn Kernel,
        grid: &'a Grid,
        f0: GridDensity,
        weights: WeightSequence,
        data: &'a [Observation],
        perm: &PermutationSpec,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::argument("likelihood needs nonempty data"));
        }
        if perm.count == 0 {
            return Err(Error::argument("permutation count M must be >= 1"));
        }
        let prep = prepare(kernel, grid, data)?;
        let mut rng = ChaCha8Rng::seed_from_u64(perm.seed);
        let identity: Vec<usize> = (0..data.len()).collect();
        let mut orders = Vec::with_capacity(perm.count);
        let skip_identity = matches!(perm.order, DataOrder::AsGiven);
        if skip_identity {
            orders.push(identity.clone());
        }
        while orders.len() < perm.count {
            let mut o = identity.clone();
            o.shuffle(&mut rng);
            orders.push(o);
        }
        Ok(Likelihood {
            grid,
            prep,
            f0,
            weights,
            data,
            orders,
            log_m0: OnceLock::new(),
        })
    }

    pub fn data_len(&self) -> usize {
        self.data.len()
    }

    pub fn permutations(&self) -> usize {
        self.orders.len()
    }

    /// Whether the exact theta-gradient recursion is available.
    pub fn has_gradient(&self) -> bool {
        self.prep.has_gradient()
    }

    fn run(&self, theta: &[f64], order: &[usize], want_grad: bool) -> Result<PrState> {
        run_prepared(
            self.grid,
            self.prep.as_ref(),
            theta,
            &self.f0,
            &self.weights,
            order,
            want_grad,
        )
    }

    /// Permutation-averaged marginal log likelihood. Averaging happens on
    /// the log scale.
    pub fn prml(&self, theta: &Theta) -> Result<f64> {
        let mut total = 0.0;
        for order in &self.orders {
            total += self.run(theta.values(), order, false)?.loglik();
        }
        Ok(total / self.orders.len() as f64)
    }

    /// Marginal log likelihood and its exact theta-gradient.
    pub fn prml_with_grad(&self, theta: &Theta) -> Result<(f64, Vec<f64>)> {
        if !self.prep.has_gradient() {
            return Err(Error::Capability("a theta-gradient".into()));
        }
        let k = self.prep.theta_dim();
        let mut total = 0.0;
        let mut grad = vec![0.0; k];
        for order in &self.orders {
            let state = self.run(theta.values(), order, true)?;
            total += state.loglik();
            for (g, s) in grad.iter_mut().zip(state.grad_loglik().expect("requested")) {
                *g += s;
            }
        }
        let m = self.orders.len() as f64;
        for g in &mut grad {
            *g /= m;
        }
        Ok((total / m, grad))
    }

    /// Permutation-averaged profile log likelihood: run to completion,
    /// then score every observation against the final mixing density.
    pub fn profile(&self, theta: &Theta) -> Result<f64> {
        let mut total = 0.0;
        let mut row = vec![0.0; self.grid.len()];
        for order in &self.orders {
            let state = self.run(theta.values(), order, false)?;
            let f = state.density();
            for i in 0..self.data.len() {
                self.prep.log_row(theta.values(), i, &mut row)?;
                let lm = log_dot_shifted(self.grid, &row, f.values());
                if !lm.is_finite() {
                    return Err(Error::DegenerateObservation { index: i });
                }
                total += lm;
            }
        }
        Ok(total / self.orders.len() as f64)
    }

    pub fn loglik(&self, theta: &Theta, which: ObjectiveKind) -> Result<f64> {
        match which {
            ObjectiveKind::Prml => self.prml(theta),
            ObjectiveKind::Profile => self.profile(theta),
        }
    }

    /// Mixing-density estimate at `theta`: the average of the final
    /// recursion densities across the permutation set.
    pub fn mixing_density(&self, theta: &Theta) -> Result<GridDensity> {
        let mut acc = vec![0.0; self.grid.len()];
        for order in &self.orders {
            let state = self.run(theta.values(), order, false)?;
            for (a, v) in acc.iter_mut().zip(state.density().values()) {
                *a += v;
            }
        }
        let m = self.orders.len() as f64;
        for a in &mut acc {
            *a /= m;
        }
        GridDensity::new(self.grid, acc)
    }

    fn log_m0(&self, true_logm: &dyn Fn(&Observation) -> f64) -> &[f64] {
        self.log_m0
            .get_or_init(|| self.data.iter().map(|o| true_logm(o)).collect())
    }

    /// Normalized likelihood deficiency `K_n(theta)`: the sample-average
    /// log ratio of the true density to the one-step-ahead predictive.
    /// Requires the true log density (simulation settings).
    pub fn kn_normalized(
        &self,
        theta: &Theta,
        true_logm: &dyn Fn(&Observation) -> f64,
    ) -> Result<f64> {
        let (per_step, from_totals) = self.kn_both_forms(theta, true_logm)?;
        debug_assert!(
            (per_step - from_totals).abs() < 1e-12,
            "K_n forms disagree: {per_step} vs {from_totals}"
        );
        Ok(per_step)
    }

    /// Both algebraic forms of `K_n(theta)`: the per-step average of
    /// `log m(Y_i) - log lambda_i`, and `-(l_n - l_0n) / n` from the run
    /// totals. They agree up to floating-point roundoff.
    pub fn kn_both_forms(
        &self,
        theta: &Theta,
        true_logm: &dyn Fn(&Observation) -> f64,
    ) -> Result<(f64, f64)> {
        let n = self.data.len() as f64;
        let log_m0 = self.log_m0(true_logm);
        let l0n: f64 = log_m0.iter().sum();

        let mut per_step_total = 0.0;
        let mut loglik_total = 0.0;
        for order in &self.orders {
            let state = self.run(theta.values(), order, false)?;
            loglik_total += state.loglik();
            for (pos, &idx) in order.iter().enumerate() {
                per_step_total += log_m0[idx] - state.log_predictives()[pos];
            }
        }
        let m = self.orders.len() as f64;
        let per_step = per_step_total / (m * n);
        let from_totals = -(loglik_total / m - l0n) / n;
        Ok((per_step, from_totals))
    }
}
