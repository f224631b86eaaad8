//! Command-line driver: fits, likelihood curves, deficiency-limit studies,
//! multiple testing, data generation, and replication studies.
//!
//! Exit codes: 0 success, 1 input error, 2 numerical warning (boundary or
//! non-convergence), 3 internal error.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use prmix::config::Config;
use prmix::error::Error;
use prmix::fdr::{classify, local_fdr_all, metrics};
use prmix::grid::GridDensity;
use prmix::inference::{fit, FitResult};
use prmix::io::{
    read_replicated_csv, read_scalar_csv, read_series_csv, write_curve_csv, write_decisions_csv,
    write_fit_report, write_observations_csv, write_study_report,
};
use prmix::kernel::{Kernel, Observation, Theta};
use prmix::likelihood::Likelihood;
use prmix::sim::{
    gen_armix, gen_density, gen_glmm, gen_lmm, gen_studentt, run_armix_study, run_glmm_study,
    run_kl_limit_study, run_lmm_study,
};

#[derive(Parser)]
#[command(name = "prmix", version, about = "Mixing-density estimation and inference by predictive recursion")]
struct Cli {
    /// Worker thread count (default: PRMIX_WORKERS or all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the structural parameter to a data file.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep a scalar structural parameter and emit the likelihood curve.
    Curve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replicate the per-sample deficiency curve against its oracle limit.
    KlLimit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Multiple testing: fit the null proportion, score each series.
    Mtest {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a seeded synthetic data file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a replication study and aggregate error rates.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = cli.workers.or_else(|| {
        std::env::var("PRMIX_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(w) = workers {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build_global();
    }
    let outcome = match &cli.command {
        Command::Fit { config, data, out } => cmd_fit(config, data, out),
        Command::Curve { config, data, out } => cmd_curve(config, data, out),
        Command::KlLimit { config, out } => cmd_kl_limit(config, out),
        Command::Mtest { config, data, out } => cmd_mtest(config, data, out),
        Command::Simulate { config, out } => cmd_simulate(config, out),
        Command::Study { config, out } => cmd_study(config, out),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Argument(_) | Error::Config(_) | Error::Csv { .. } | Error::Io(_) => 1,
                _ => 3,
            })
        }
    }
}

type CmdResult = prmix::Result<u8>;

fn prepare_out(out: &Path) -> prmix::Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

/// Read the data file in the layout matching the kernel's observation shape.
fn read_data(cfg: &Config, data: &Path) -> prmix::Result<(Vec<Observation>, Option<Vec<bool>>)> {
    let k = cfg.kernel()?;
    match k.name.as_str() {
        "gaussian" => Ok((read_scalar_csv(data)?, None)),
        "linear" | "logistic" => {
            let xdim = k
                .xdim
                .ok_or_else(|| Error::Config(format!("kernel '{}' needs 'xdim'", k.name)))?;
            Ok((read_replicated_csv(data, xdim)?, None))
        }
        "ar1_mix" => {
            let (obs, truths) = read_series_csv(data)?;
            Ok((obs, truths))
        }
        other => Err(Error::Config(format!("unknown kernel '{other}'"))),
    }
}

fn fit_from_config(
    cfg: &Config,
    kernel: &dyn Kernel,
    data: &[Observation],
) -> prmix::Result<(FitResult, GridDensity)> {
    let grid = cfg.build_grid()?;
    let weights = cfg.build_weights()?;
    let spec = cfg.permutation_spec();
    let f0 = GridDensity::uniform(&grid);
    let lik = Likelihood::new(kernel, &grid, f0, weights, data, &spec)?;
    let bounds = cfg.theta()?.bounds()?;
    let opts = cfg.fit_options()?;
    let result = fit(&lik, &bounds, &opts)?;
    let f_hat = lik.mixing_density(&result.theta_hat)?;
    Ok((result, f_hat))
}

fn fit_exit_code(r: &FitResult) -> u8 {
    if r.converged && !r.boundary {
        0
    } else {
        2
    }
}

fn write_fit_summary(path: &Path, r: &FitResult) -> prmix::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "objective: {}", r.objective)?;
    writeln!(f, "log likelihood at maximum: {:.6}", r.loglik_at_max)?;
    for (j, (v, ci)) in r.theta_hat.values().iter().zip(&r.intervals).enumerate() {
        writeln!(
            f,
            "theta[{}]: {:.6}  ci [{:.6}, {:.6}]{}",
            j + 1,
            v,
            ci.lo,
            ci.hi,
            if ci.valid { "" } else { " (invalid)" }
        )?;
    }
    writeln!(f, "converged: {}", r.converged)?;
    writeln!(f, "boundary: {}", r.boundary)?;
    if r.pd_warning {
        writeln!(f, "warning: information matrix was not positive definite")?;
    }
    Ok(())
}

fn cmd_fit(config: &Path, data: &Path, out: &Path) -> CmdResult {
    let cfg = Config::load(config)?;
    prepare_out(out)?;
    let kernel = cfg.kernel()?.build()?;
    let (obs, _) = read_data(&cfg, data)?;
    let (result, _) = fit_from_config(&cfg, kernel.as_ref(), &obs)?;
    write_fit_report(&out.join("fit.csv"), &result)?;
    write_fit_summary(&out.join("summary.txt"), &result)?;
    Ok(fit_exit_code(&result))
}

fn cmd_curve(config: &Path, data: &Path, out: &Path) -> CmdResult {
    let cfg = Config::load(config)?;
    prepare_out(out)?;
    let kernel = cfg.kernel()?.build()?;
    if kernel.theta_dim() != 1 {
        return Err(Error::Config(
            "curve sweeps need a scalar structural parameter".into(),
        ));
    }
    let (obs, _) = read_data(&cfg, data)?;
    let sweep = cfg.curve()?;
    let thetas = sweep.thetas()?;
    let bounds = vec![(sweep.lower, sweep.upper)];

    let grid = cfg.build_grid()?;
    let weights = cfg.build_weights()?;
    let spec = cfg.permutation_spec();
    let f0 = GridDensity::uniform(&grid);
    let lik = Likelihood::new(kernel.as_ref(), &grid, f0, weights, &obs, &spec)?;
    let mut rows = Vec::with_capacity(thetas.len());
    for t in thetas {
        let theta = Theta::new(vec![t], bounds.clone())?;
        rows.push((t, lik.prml(&theta)?, lik.profile(&theta)?));
    }
    write_curve_csv(&out.join("curve.csv"), &rows)?;

    let best = rows
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least two sweep points");
    let mut f = std::fs::File::create(out.join("summary.txt"))?;
    writeln!(f, "sweep points: {}", rows.len())?;
    writeln!(f, "best theta (marginal): {:.6}", best.0)?;
    Ok(0)
}

fn cmd_kl_limit(config: &Path, out: &Path) -> CmdResult {
    let cfg = Config::load(config)?;
    prepare_out(out)?;
    let study_cfg = cfg.kl_limit.as_ref().map(|s| s.build()).unwrap_or_default();
    let report = run_kl_limit_study(&study_cfg)?;

    let mut text = String::from("sigma,kstar,mean_kn");
    for rep in 1..=report.kn.len() {
        text.push_str(&format!(",kn_rep{rep}"));
    }
    text.push('\n');
    let mean = report.mean_kn();
    for (s, &sigma) in report.sigmas.iter().enumerate() {
        text.push_str(&format!("{sigma},{},{}", report.kstar[s], mean[s]));
        for row in &report.kn {
            text.push_str(&format!(",{}", row[s]));
        }
        text.push('\n');
    }
    std::fs::write(out.join("kl_curve.csv"), text)?;

    let mut f = std::fs::File::create(out.join("summary.txt"))?;
    writeln!(f, "replications: {}", report.kn.len())?;
    writeln!(f, "oracle minimum at sigma = {}", report.sigmas[report.argmin_kstar()])?;
    let agree = report
        .argmin_kn_per_rep()
        .iter()
        .filter(|&&i| i == report.argmin_kstar())
        .count();
    writeln!(f, "per-sample minimum agrees with oracle in {agree}/{} replications", report.kn.len())?;
    writeln!(f, "elapsed: {:.1}s", report.elapsed_secs)?;
    Ok(0)
}

fn cmd_mtest(config: &Path, data: &Path, out: &Path) -> CmdResult {
    let cfg = Config::load(config)?;
    prepare_out(out)?;
    let kernel = cfg.kernel()?.build()?;
    if kernel.theta_dim() != 1 {
        return Err(Error::Config(
            "multiple testing needs a scalar null proportion".into(),
        ));
    }
    let (obs, truths) = read_data(&cfg, data)?;
    let (result, f_hat) = fit_from_config(&cfg, kernel.as_ref(), &obs)?;
    let theta_hat = result.theta_hat.values()[0];
    let grid = cfg.build_grid()?;
    let lfdrs = local_fdr_all(&obs, theta_hat, &grid, &f_hat, kernel.as_ref())?;
    let cutoff = cfg
        .mtest
        .as_ref()
        .map(|m| m.cutoff)
        .unwrap_or(prmix::fdr::DEFAULT_CUTOFF);
    let decisions = classify(&lfdrs, cutoff, truths.as_deref())?;
    let scored = truths.is_some().then(|| metrics(&decisions)).transpose()?;
    write_decisions_csv(&out.join("decisions.csv"), &decisions, scored.as_ref())?;

    let mut f = std::fs::File::create(out.join("summary.txt"))?;
    writeln!(f, "series: {}", obs.len())?;
    writeln!(f, "null proportion estimate: {:.6}", theta_hat)?;
    writeln!(f, "cutoff: {cutoff}")?;
    writeln!(f, "discoveries: {}", decisions.iter().filter(|d| d.flagged).count())?;
    if let Some(m) = &scored {
        writeln!(f, "fdr: {:.4}  mp: {:.4}", m.fdr, m.mp)?;
    }
    writeln!(f, "converged: {}  boundary: {}", result.converged, result.boundary)?;
    Ok(fit_exit_code(&result))
}

fn cmd_simulate(config: &Path, out: &Path) -> CmdResult {
    let cfg = Config::load(config)?;
    prepare_out(out)?;
    let sim = cfg.simulate()?;
    let path = out.join("data.csv");
    let description = match sim.kind.as_str() {
        "density" => {
            let sigma = sim
                .sigma
                .ok_or_else(|| Error::Config("simulate kind 'density' needs 'sigma'".into()))?;
            let data = gen_density(sim.mix()?, sigma, sim.n, sim.seed)?;
            write_observations_csv(&path, &data, None)?;
            format!("{} draws from a latent-location mixture, sigma {sigma}", sim.n)
        }
        "studentt" => {
            let data = gen_studentt(sim.n, sim.seed);
            write_observations_csv(&path, &data, None)?;
            format!("{} draws from the scaled t(5) target", sim.n)
        }
        "lmm" => {
            let r = sim.replicates.unwrap_or(4);
            let gen = gen_lmm(sim.n, r, sim.law()?, sim.seed)?;
            write_observations_csv(&path, &gen.data, None)?;
            format!("{} subjects x {r} replicates, linear random-intercept model", sim.n)
        }
        "glmm" => {
            let r = sim.replicates.unwrap_or(4);
            let gen = gen_glmm(sim.n, r, sim.law()?, sim.seed)?;
            write_observations_csv(&path, &gen.data, None)?;
            format!("{} subjects x {r} replicates, logistic random-intercept model", sim.n)
        }
        "armix" => {
            let t = sim.series_len.unwrap_or(50);
            let theta = sim.theta.unwrap_or(0.75);
            let gen = gen_armix(sim.n, t, theta, sim.seed)?;
            write_observations_csv(&path, &gen.data, Some(&gen.signal))?;
            format!("{} series of length {t}, null proportion {theta}", sim.n)
        }
        other => {
            return Err(Error::Config(format!(
                "unknown simulate kind '{other}' (expected density, studentt, lmm, glmm, or armix)"
            )))
        }
    };
    let mut f = std::fs::File::create(out.join("summary.txt"))?;
    writeln!(f, "{description}")?;
    writeln!(f, "seed: {}", sim.seed)?;
    Ok(0)
}

fn cmd_study(config: &Path, out: &Path) -> CmdResult {
    let cfg = Config::load(config)?;
    prepare_out(out)?;
    let section = cfg.study()?;
    let report = match section.kind.as_str() {
        "lmm" => run_lmm_study(&section.lmm()?)?,
        "glmm" => run_glmm_study(&section.glmm()?)?,
        "armix" => run_armix_study(&section.armix()?)?,
        other => {
            return Err(Error::Config(format!(
                "unknown study kind '{other}' (expected lmm, glmm, or armix)"
            )))
        }
    };
    write_study_report(out, &report)?;
    Ok(0)
}
