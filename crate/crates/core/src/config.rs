//! TOML configuration for the command-line driver.
//!
//! A config file is organized in sections; each command reads the sections
//! it needs and ignores the rest:
//!
//! ```toml
//! [kernel]
//! name = "linear"        # gaussian | linear | logistic | ar1_mix
//! xdim = 2               # linear, logistic
//! replicates = 4         # linear, logistic
//! series_len = 50        # ar1_mix
//!
//! [grid]
//! kind = "trapezoid"     # trapezoid | legendre
//! lower = [0.05]
//! upper = [20.0]
//! points = [201]         # two-element vectors build a product grid
//!
//! [weights]
//! gamma = 0.6666666666666666
//!
//! [likelihood]
//! objective = "prml"     # prml | profile
//! permutations = 1
//! seed = 0
//!
//! [theta]
//! lower = [-20.0, -20.0, 0.05]
//! upper = [20.0, 20.0, 20.0]
//! init = [2.0, 5.0, 2.0]                    # optional
//! transforms = ["identity", "identity", "log"]  # optional
//!
//! [optimizer]
//! max_iter = 200
//! tol = 1e-7
//! starts = 3
//! level = 0.95
//! ```
//!
//! Command-specific sections: `[curve]` (scalar theta sweep), `[mtest]`
//! (cutoff), `[simulate]` (generator choice and size), `[study]`
//! (replication driver), `[kl_limit]` (deficiency-curve study).

use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::{make_legendre_grid, make_trapezoid_grid, make_product_grid, Grid};
use crate::inference::{FitOptions, Transform};
use crate::kernel::{Ar1MixKernel, GaussianLocationKernel, Kernel, LinearRiKernel, LogisticRiKernel};
use crate::likelihood::{ObjectiveKind, PermutationSpec};
use crate::optimize::OptimOptions;
use crate::pr::WeightSequence;
use crate::sim::{
    ArmixStudyConfig, DensityMix, GlmmStudyConfig, InterceptLaw, KlLimitConfig, LmmStudyConfig,
};

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub kernel: Option<KernelSection>,
    pub grid: Option<GridSection>,
    pub weights: Option<WeightsSection>,
    pub likelihood: Option<LikelihoodSection>,
    pub theta: Option<ThetaSection>,
    pub optimizer: Option<OptimizerSection>,
    pub curve: Option<CurveSection>,
    pub mtest: Option<MtestSection>,
    pub simulate: Option<SimulateSection>,
    pub study: Option<StudySection>,
    pub kl_limit: Option<KlLimitSection>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| cfg_err(format!("{}: {e}", path.display())))
    }

    fn section<'a, T>(opt: &'a Option<T>, name: &str) -> Result<&'a T> {
        opt.as_ref()
            .ok_or_else(|| cfg_err(format!("missing [{name}] section")))
    }

    pub fn kernel(&self) -> Result<&KernelSection> {
        Self::section(&self.kernel, "kernel")
    }

    pub fn theta(&self) -> Result<&ThetaSection> {
        Self::section(&self.theta, "theta")
    }

    pub fn curve(&self) -> Result<&CurveSection> {
        Self::section(&self.curve, "curve")
    }

    pub fn study(&self) -> Result<&StudySection> {
        Self::section(&self.study, "study")
    }

    pub fn simulate(&self) -> Result<&SimulateSection> {
        Self::section(&self.simulate, "simulate")
    }

    pub fn build_grid(&self) -> Result<Grid> {
        Self::section(&self.grid, "grid")?.build()
    }

    pub fn build_weights(&self) -> Result<WeightSequence> {
        match &self.weights {
            Some(w) => WeightSequence::power(w.gamma),
            None => WeightSequence::power(2.0 / 3.0),
        }
    }

    pub fn permutation_spec(&self) -> PermutationSpec {
        match &self.likelihood {
            Some(l) => PermutationSpec::averaged(l.permutations, l.seed),
            None => PermutationSpec::as_given(),
        }
    }

    pub fn objective(&self) -> Result<ObjectiveKind> {
        match self.likelihood.as_ref().map(|l| l.objective.as_str()) {
            None | Some("prml") => Ok(ObjectiveKind::Prml),
            Some("profile") => Ok(ObjectiveKind::Profile),
            Some(other) => Err(cfg_err(format!(
                "unknown objective '{other}' (expected prml or profile)"
            ))),
        }
    }

    /// Fit options assembled from [likelihood], [theta], and [optimizer].
    pub fn fit_options(&self) -> Result<FitOptions> {
        let mut opts = FitOptions {
            objective: self.objective()?,
            ..FitOptions::default()
        };
        if let Some(t) = &self.theta {
            opts.init = t.init.clone();
            opts.transforms = t.parse_transforms()?;
        }
        if let Some(o) = &self.optimizer {
            let mut optim = OptimOptions::default();
            if let Some(v) = o.max_iter {
                optim.max_iter = v;
            }
            if let Some(v) = o.tol {
                optim.tol = v;
            }
            opts.optim = optim;
            if let Some(v) = o.starts {
                opts.starts = v;
            }
            if let Some(v) = o.level {
                opts.level = v;
            }
        }
        Ok(opts)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub name: String,
    pub xdim: Option<usize>,
    pub replicates: Option<usize>,
    pub series_len: Option<usize>,
}

impl KernelSection {
    fn need(&self, field: Option<usize>, name: &str) -> Result<usize> {
        field.ok_or_else(|| cfg_err(format!("kernel '{}' needs '{name}'", self.name)))
    }

    pub fn build(&self) -> Result<Box<dyn Kernel>> {
        match self.name.as_str() {
            "gaussian" => Ok(Box::new(GaussianLocationKernel::new())),
            "linear" => Ok(Box::new(LinearRiKernel::new(
                self.need(self.xdim, "xdim")?,
                self.need(self.replicates, "replicates")?,
            ))),
            "logistic" => Ok(Box::new(LogisticRiKernel::new(
                self.need(self.xdim, "xdim")?,
                self.need(self.replicates, "replicates")?,
            ))),
            "ar1_mix" => Ok(Box::new(Ar1MixKernel::new(
                self.need(self.series_len, "series_len")?,
            ))),
            other => Err(cfg_err(format!(
                "unknown kernel '{other}' (expected gaussian, linear, logistic, or ar1_mix)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_grid_kind")]
    pub kind: String,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub points: Vec<usize>,
}

fn default_grid_kind() -> String {
    "trapezoid".into()
}

impl GridSection {
    fn factor(&self, dim: usize) -> Result<Grid> {
        match self.kind.as_str() {
            "trapezoid" => make_trapezoid_grid(self.lower[dim], self.upper[dim], self.points[dim]),
            "legendre" => make_legendre_grid(self.lower[dim], self.upper[dim], self.points[dim]),
            other => Err(cfg_err(format!(
                "unknown grid kind '{other}' (expected trapezoid or legendre)"
            ))),
        }
    }

    pub fn build(&self) -> Result<Grid> {
        let d = self.lower.len();
        if self.upper.len() != d || self.points.len() != d {
            return Err(cfg_err("grid lower/upper/points lengths differ"));
        }
        match d {
            1 => self.factor(0),
            2 => make_product_grid(&self.factor(0)?, &self.factor(1)?),
            _ => Err(cfg_err("grid supports one or two latent dimensions")),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    pub gamma: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LikelihoodSection {
    #[serde(default = "default_objective")]
    pub objective: String,
    #[serde(default = "one")]
    pub permutations: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_objective() -> String {
    "prml".into()
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaSection {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub init: Option<Vec<f64>>,
    pub transforms: Option<Vec<String>>,
}

impl ThetaSection {
    pub fn bounds(&self) -> Result<Vec<(f64, f64)>> {
        if self.lower.len() != self.upper.len() || self.lower.is_empty() {
            return Err(cfg_err("theta lower/upper must be nonempty, equal length"));
        }
        Ok(self.lower.iter().copied().zip(self.upper.iter().copied()).collect())
    }

    pub fn parse_transforms(&self) -> Result<Option<Vec<Transform>>> {
        let Some(names) = &self.transforms else {
            return Ok(None);
        };
        if names.len() != self.lower.len() {
            return Err(cfg_err("one transform per theta component required"));
        }
        let mut out = Vec::with_capacity(names.len());
        for name in names {
            out.push(match name.as_str() {
                "identity" => Transform::Identity,
                "log" => Transform::Log,
                "logit" => Transform::Logit,
                other => {
                    return Err(cfg_err(format!(
                        "unknown transform '{other}' (expected identity, log, or logit)"
                    )))
                }
            });
        }
        Ok(Some(out))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub starts: Option<usize>,
    pub level: Option<f64>,
}

/// Scalar-theta sweep for the likelihood-curve command.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSection {
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

impl CurveSection {
    pub fn thetas(&self) -> Result<Vec<f64>> {
        if !(self.lower < self.upper) || self.points < 2 {
            return Err(cfg_err("curve needs lower < upper and at least 2 points"));
        }
        let h = (self.upper - self.lower) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| self.lower + h * i as f64).collect())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtestSection {
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
}

fn default_cutoff() -> f64 {
    crate::fdr::DEFAULT_CUTOFF
}

/// Data-generation command: which generator, how much data, which seed.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// density | studentt | lmm | glmm | armix
    pub kind: String,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    pub sigma: Option<f64>,
    /// Mixing shape for `density`: beta26 | beta1030 | two_point | beta_point.
    pub mix: Option<String>,
    /// Intercept law for lmm/glmm: gaussian | exponential | uniform2pt.
    pub law: Option<String>,
    pub replicates: Option<usize>,
    pub series_len: Option<usize>,
    /// Null proportion for `armix`.
    pub theta: Option<f64>,
}

impl SimulateSection {
    pub fn mix(&self) -> Result<DensityMix> {
        let name = self.mix.as_deref().ok_or_else(|| cfg_err("simulate needs 'mix'"))?;
        DensityMix::from_str(name)
    }

    pub fn law(&self) -> Result<InterceptLaw> {
        match self.law.as_deref() {
            None => Ok(InterceptLaw::Gaussian),
            Some(name) => InterceptLaw::from_str(name),
        }
    }
}

/// Replication-study command; unset fields keep the study defaults.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    /// lmm | glmm | armix
    pub kind: String,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub subjects: Option<usize>,
    pub replicates: Option<usize>,
    pub law: Option<String>,
    pub objective: Option<String>,
    pub grid_points: Option<usize>,
    pub permutations: Option<usize>,
    pub series: Option<usize>,
    pub series_len: Option<usize>,
    pub theta: Option<f64>,
    pub cutoff: Option<f64>,
}

impl StudySection {
    fn law(&self) -> Result<InterceptLaw> {
        match self.law.as_deref() {
            None => Ok(InterceptLaw::Gaussian),
            Some(name) => InterceptLaw::from_str(name),
        }
    }

    fn objective(&self) -> Result<ObjectiveKind> {
        match self.objective.as_deref() {
            None | Some("prml") => Ok(ObjectiveKind::Prml),
            Some("profile") => Ok(ObjectiveKind::Profile),
            Some(other) => Err(cfg_err(format!("unknown objective '{other}'"))),
        }
    }

    pub fn lmm(&self) -> Result<LmmStudyConfig> {
        let mut c = LmmStudyConfig::default();
        c.law = self.law()?;
        c.objective = self.objective()?;
        set(&mut c.subjects, self.subjects);
        set(&mut c.replicates, self.replicates);
        set(&mut c.reps, self.reps);
        set(&mut c.seed, self.seed);
        set(&mut c.grid_points, self.grid_points);
        set(&mut c.permutations, self.permutations);
        Ok(c)
    }

    pub fn glmm(&self) -> Result<GlmmStudyConfig> {
        let mut c = GlmmStudyConfig::default();
        c.law = self.law()?;
        c.objective = self.objective()?;
        set(&mut c.subjects, self.subjects);
        set(&mut c.replicates, self.replicates);
        set(&mut c.reps, self.reps);
        set(&mut c.seed, self.seed);
        set(&mut c.grid_points, self.grid_points);
        set(&mut c.permutations, self.permutations);
        Ok(c)
    }

    pub fn armix(&self) -> Result<ArmixStudyConfig> {
        let mut c = ArmixStudyConfig::default();
        set(&mut c.series, self.series);
        set(&mut c.len, self.series_len);
        set(&mut c.theta, self.theta);
        set(&mut c.reps, self.reps);
        set(&mut c.seed, self.seed);
        set(&mut c.permutations, self.permutations);
        set(&mut c.grid_points, self.grid_points);
        set(&mut c.cutoff, self.cutoff);
        Ok(c)
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KlLimitSection {
    pub sigmas: Option<Vec<f64>>,
    pub n: Option<usize>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub grid_points: Option<usize>,
}

impl KlLimitSection {
    pub fn build(&self) -> KlLimitConfig {
        let mut c = KlLimitConfig::default();
        set(&mut c.sigmas, self.sigmas.clone());
        set(&mut c.n, self.n);
        set(&mut c.reps, self.reps);
        set(&mut c.seed, self.seed);
        set(&mut c.grid_points, self.grid_points);
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Config {
        toml::from_str(text).unwrap()
    }

    #[test]
    fn full_fit_config_builds_every_piece() {
        let cfg = parse(
            r#"
            [kernel]
            name = "linear"
            xdim = 2
            replicates = 4

            [grid]
            lower = [-3.0]
            upper = [3.0]
            points = [101]

            [weights]
            gamma = 0.75

            [likelihood]
            objective = "profile"
            permutations = 5
            seed = 7

            [theta]
            lower = [-20.0, -20.0, 0.05]
            upper = [20.0, 20.0, 20.0]
            init = [2.0, 5.0, 2.0]
            transforms = ["identity", "identity", "log"]

            [optimizer]
            max_iter = 50
            starts = 2
            "#,
        );
        let kernel = cfg.kernel().unwrap().build().unwrap();
        assert_eq!(kernel.theta_dim(), 3);
        let grid = cfg.build_grid().unwrap();
        assert_eq!(grid.len(), 101);
        assert!((cfg.build_weights().unwrap().weight(0).unwrap() - 2f64.powf(-0.75)).abs() < 1e-15);
        let spec = cfg.permutation_spec();
        assert_eq!((spec.count, spec.seed), (5, 7));
        let opts = cfg.fit_options().unwrap();
        assert_eq!(opts.objective, ObjectiveKind::Profile);
        assert_eq!(opts.starts, 2);
        assert_eq!(opts.optim.max_iter, 50);
        assert_eq!(opts.init, Some(vec![2.0, 5.0, 2.0]));
        assert_eq!(
            cfg.theta().unwrap().bounds().unwrap(),
            vec![(-20.0, 20.0), (-20.0, 20.0), (0.05, 20.0)]
        );
    }

    #[test]
    fn defaults_without_optional_sections() {
        let cfg = parse(
            r#"
            [kernel]
            name = "gaussian"

            [grid]
            lower = [0.0]
            upper = [1.0]
            points = [51]

            [theta]
            lower = [0.01]
            upper = [1.0]
            "#,
        );
        assert_eq!(cfg.objective().unwrap(), ObjectiveKind::Prml);
        let spec = cfg.permutation_spec();
        assert_eq!(spec.count, 1);
        // Default weight exponent is 2/3.
        assert!((cfg.build_weights().unwrap().weight(0).unwrap() - 2f64.powf(-2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn product_grid_from_two_dimensions() {
        let cfg = parse(
            r#"
            [grid]
            kind = "legendre"
            lower = [0.5, 0.05]
            upper = [2.0, 0.95]
            points = [11, 13]
            "#,
        );
        let grid = cfg.build_grid().unwrap();
        assert_eq!(grid.len(), 11 * 13);
        assert_eq!(grid.dim(), 2);
    }

    #[test]
    fn bad_inputs_are_config_errors() {
        let cfg = parse("[kernel]\nname = \"nope\"\n");
        assert!(matches!(cfg.kernel().unwrap().build(), Err(Error::Config(_))));

        let cfg = parse("[kernel]\nname = \"linear\"\n");
        assert!(cfg.kernel().unwrap().build().is_err());

        let cfg = parse("[likelihood]\nobjective = \"maximum\"\n");
        assert!(cfg.objective().is_err());

        assert!(toml::from_str::<Config>("[kernel]\nname = \"gaussian\"\nbogus = 1\n").is_err());

        let cfg: Config = Default::default();
        assert!(matches!(cfg.build_grid(), Err(Error::Config(_))));
    }

    #[test]
    fn curve_sweep_is_inclusive_and_even() {
        let c = CurveSection {
            lower: 0.05,
            upper: 0.25,
            points: 5,
        };
        let t = c.thetas().unwrap();
        assert_eq!(t.len(), 5);
        assert!((t[0] - 0.05).abs() < 1e-15 && (t[4] - 0.25).abs() < 1e-15);
        assert!((t[2] - 0.15).abs() < 1e-15);
    }

    #[test]
    fn study_section_overrides_defaults() {
        let cfg = parse(
            r#"
            [study]
            kind = "armix"
            reps = 3
            series = 100
            series_len = 25
            theta = 0.9
            permutations = 2
            "#,
        );
        let s = cfg.study().unwrap();
        assert_eq!(s.kind, "armix");
        let c = s.armix().unwrap();
        assert_eq!((c.reps, c.series, c.len, c.permutations), (3, 100, 25, 2));
        assert!((c.theta - 0.9).abs() < 1e-15);
        // Unset fields keep defaults.
        assert_eq!(c.grid_points, ArmixStudyConfig::default().grid_points);
    }
}
