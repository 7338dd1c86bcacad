//! `rwre`: environment summaries, convergence-rate experiments and the
//! verification matrix, with reproducible output directories.
//!
//! Exit codes: 0 success, 1 usage, 2 configuration, 3 regime, 4 numeric
//! failure (including failed checks and failed rate criteria).

mod run_dir;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use run_dir::{read_manifest, RunDir};
use rwre_core::envmodel::{parse_env_toml, EnvDistribution, EnvSection};
use rwre_core::qmoments::{law_constants, VarFault};
use rwre_core::ratelab::{
    gnuplot_script, parse_dyadic_range, rate_experiment, run_verify, write_rows, NGrid, RateExperimentConfig,
    RateExperimentResult, Target, VerifyPlan, KAPPA_TOL,
};
use rwre_core::Error as CoreError;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "rwre",
    version,
    about = "Quenched CLT rates for random walks in random environments"
)]
struct Cli {
    /// TOML config with [env], [experiment] and [tolerances] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Root of the output tree.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Reduced sizes.
    #[arg(long, global = true)]
    quick: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FaultArg {
    /// Flip the sign of the carried term in the variance recursion.
    FlipVarSign,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// κ, r₁, r₂, E log ρ, speed, σ² and regime tags of a law.
    EnvInfo {
        /// Law shorthand such as `beta:5,1` or `degenerate:0.6667`.
        #[arg(long)]
        law: Option<String>,
    },
    /// Exact Kolmogorov distances over replicates × n and log-log slopes.
    Rates {
        /// `fbar`, `f` or `g`.
        #[arg(long)]
        target: Option<Target>,
        /// Law shorthand; overrides the config's [env] table.
        #[arg(long)]
        law: Option<String>,
        /// `128..16384` (dyadic) or a comma list.
        #[arg(long = "n")]
        n: Option<String>,
        /// Number of independent environments.
        #[arg(long)]
        envs: Option<usize>,
    },
    /// Identity, transfer, Berry–Esseen and DP-vs-MC checks.
    Verify {
        /// Laws to check (repeatable); default `degenerate:2/3`.
        #[arg(long)]
        law: Vec<String>,
        /// Test hook: corrupt one route of the variance table.
        #[arg(long, value_enum)]
        fault: Option<FaultArg>,
    },
    /// Re-run the command recorded in a manifest into a new directory.
    Replay {
        /// Path to a `manifest.json`.
        manifest: PathBuf,
    },
}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    CoreError::Config(msg.into()).into()
}

fn read_config(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))
}

fn parse_law(s: &str) -> Result<EnvDistribution> {
    Ok(s.parse::<EnvDistribution>()?)
}

fn parse_grid(s: &str) -> Result<NGrid> {
    if s.contains("..") {
        parse_dyadic_range(s)?;
        return Ok(NGrid::Dyadic(s.to_string()));
    }
    let values = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|e| config_error(format!("n grid entry {t:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(config_error("empty n grid"));
    }
    Ok(NGrid::List(values))
}

#[derive(Serialize)]
struct EnvInfo {
    law: EnvDistribution,
    #[serde(flatten)]
    report: rwre_core::RegimeReport,
    speed: Option<f64>,
    sigma2: Option<f64>,
    mu0_sq_mean: Option<f64>,
}

fn resolve_env(cli: &Cli, law: &Option<String>) -> Result<EnvSection> {
    let env = match (law, &cli.config) {
        (Some(l), _) => parse_law(l)?,
        (None, Some(path)) => parse_env_toml(&read_config(path)?)?,
        (None, None) => return Err(config_error("env-info needs --law or --config")),
    };
    Ok(EnvSection { env })
}

fn run_env_info(section: &EnvSection, out: &Path, seed: u64) -> Result<bool> {
    let dist = section.env;
    let report = dist.regime_report(KAPPA_TOL)?;
    let (speed, sigma2, mu0_sq_mean) = match law_constants(&dist) {
        Ok(c) => (Some(c.speed), Some(c.sigma2), Some(c.mu0_sq_mean)),
        Err(_) if report.r1 < 1.0 => (Some((1.0 - report.r1) / (1.0 + report.r1)), None, None),
        Err(_) => (None, None, None),
    };
    let info = EnvInfo {
        law: dist,
        report,
        speed,
        sigma2,
        mu0_sq_mean,
    };
    let json = serde_json::to_string_pretty(&info)?;
    println!("{json}");
    let mut run = RunDir::create(out, "env-info", serde_json::to_value(section)?, seed)?;
    run.write("summary.json", json.as_bytes())?;
    run.finish(true)?;
    Ok(true)
}

fn resolve_rates(
    cli: &Cli,
    target: Option<Target>,
    law: &Option<String>,
    n: &Option<String>,
    envs: Option<usize>,
) -> Result<RateExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RateExperimentConfig::from_toml(&read_config(path)?)?,
        None => {
            let law = law
                .as_deref()
                .ok_or_else(|| config_error("rates needs --config or --law"))?;
            RateExperimentConfig::new(
                parse_law(law)?,
                target.unwrap_or(Target::Fbar),
                NGrid::Dyadic("128..16384".into()),
                20,
                DEFAULT_SEED,
            )
        }
    };
    if let Some(l) = law {
        cfg.law = parse_law(l)?;
    }
    if let Some(t) = target {
        cfg.experiment.target = t;
    }
    if let Some(g) = n {
        cfg.experiment.n_grid = parse_grid(g)?;
    }
    if let Some(e) = envs {
        cfg.experiment.n_envs = e;
    }
    if let Some(s) = cli.seed {
        cfg.experiment.master_seed = s;
    }
    if cli.quick {
        let grid = cfg.experiment.n_grid.values()?;
        let small: Vec<u64> = grid.iter().copied().filter(|&n| n <= 2048).collect();
        cfg.experiment.n_grid = NGrid::List(if small.len() >= 4 { small } else { grid[..4].to_vec() });
        cfg.experiment.n_envs = cfg.experiment.n_envs.min(4);
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct RateSummary<'a> {
    law: &'a EnvDistribution,
    target: Target,
    #[serde(with = "rwre_core::serde_ext::extended_real")]
    kappa: f64,
    tags: &'a [rwre_core::RegimeTag],
    n_grid: &'a [u64],
    n_envs: usize,
    master_seed: u64,
    theory_rate: f64,
    criterion: rwre_core::ratelab::RateCriterion,
    median_slope: f64,
    slope_iqr: f64,
    envelope_pass_fraction: Option<f64>,
    passed: bool,
    fits: &'a [rwre_core::ratelab::ReplicateFit],
}

fn rate_summary(r: &RateExperimentResult) -> RateSummary<'_> {
    RateSummary {
        law: &r.law,
        target: r.target,
        kappa: r.kappa,
        tags: &r.tags,
        n_grid: &r.n_grid,
        n_envs: r.fits.len(),
        master_seed: r.master_seed,
        theory_rate: r.theory_rate,
        criterion: r.criterion,
        median_slope: r.median_slope,
        slope_iqr: r.slope_iqr,
        envelope_pass_fraction: r.envelope_pass_fraction,
        passed: r.passed,
        fits: &r.fits,
    }
}

fn run_rates(cfg: &RateExperimentConfig, out: &Path) -> Result<bool> {
    let mut run = RunDir::create(out, "rates", serde_json::to_value(cfg)?, cfg.experiment.master_seed)?;
    let result = match rate_experiment(cfg) {
        Ok(r) => r,
        Err(e) => {
            let dir = run.abort(&e.to_string())?;
            eprintln!("partial output in {}", dir.display());
            return Err(e.into());
        }
    };
    let mut csv = Vec::new();
    write_rows(&mut csv, &result.experiment_rows())?;
    run.write("data.csv", &csv)?;
    let summary = serde_json::to_string_pretty(&rate_summary(&result))?;
    run.write("summary.json", summary.as_bytes())?;
    run.write(
        "plot.gp",
        gnuplot_script("data.csv", "distance", 5, "Kolmogorov distance").as_bytes(),
    )?;
    println!(
        "{} {}: kappa = {}, median slope {:.4} (IQR {:.4}), theory exponent {:.4}: {}",
        result.law,
        result.target,
        result.kappa,
        result.median_slope,
        result.slope_iqr,
        result.theory_rate,
        if result.passed { "PASS" } else { "FAIL" }
    );
    let dir = run.finish(result.passed)?;
    println!("{}", dir.display());
    Ok(result.passed)
}

fn resolve_verify(cli: &Cli, laws: &[String], fault: Option<FaultArg>) -> Result<VerifyPlan> {
    let mut dists = laws.iter().map(|l| parse_law(l)).collect::<Result<Vec<_>>>()?;
    if dists.is_empty() {
        if let Some(path) = &cli.config {
            dists.push(parse_env_toml(&read_config(path)?)?);
        } else {
            dists.push(EnvDistribution::Degenerate { p: 2.0 / 3.0 });
        }
    }
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let mut plan = if cli.quick {
        VerifyPlan::quick(dists, seed)
    } else {
        VerifyPlan::full(dists, seed)
    };
    if let Some(FaultArg::FlipVarSign) = fault {
        plan.fault = VarFault::FlipCarrySign;
    }
    plan.validate()?;
    Ok(plan)
}

fn run_verify_cmd(plan: &VerifyPlan, out: &Path) -> Result<bool> {
    let mut run = RunDir::create(out, "verify", serde_json::to_value(plan)?, plan.master_seed)?;
    let report = match run_verify(plan) {
        Ok(r) => r,
        Err(e) => {
            run.abort(&e.to_string())?;
            return Err(e.into());
        }
    };
    let mut w = Vec::new();
    {
        let mut csv = csv::Writer::from_writer(&mut w);
        csv.write_record(["check", "law", "seed", "n", "value", "tolerance", "passed"])?;
        for o in &report.outcomes {
            csv.write_record([
                o.check.clone(),
                o.law.clone(),
                o.seed.to_string(),
                o.n.to_string(),
                format!("{:e}", o.value),
                format!("{:e}", o.tolerance),
                o.passed.to_string(),
            ])?;
        }
        csv.flush()?;
    }
    run.write("data.csv", &w)?;
    run.write("summary.json", serde_json::to_string_pretty(&report)?.as_bytes())?;
    for o in report.failures() {
        eprintln!(
            "FAIL check={} law={} seed={} n={}{}",
            o.check,
            o.law,
            o.seed,
            o.n,
            o.message.as_ref().map(|m| format!(": {m}")).unwrap_or_default()
        );
    }
    let total = report.outcomes.len();
    let failed = report.failures().count();
    println!("verify: {}/{} checks passed", total - failed, total);
    let dir = run.finish(report.passed)?;
    println!("{}", dir.display());
    Ok(report.passed)
}

fn replay(path: &Path, out: &Path) -> Result<bool> {
    let manifest = read_manifest(path).map_err(|e| config_error(format!("manifest {}: {e}", path.display())))?;
    let bad = |e: serde_json::Error| config_error(format!("manifest config: {e}"));
    match manifest.command.as_str() {
        "env-info" => run_env_info(
            &serde_json::from_value(manifest.config).map_err(bad)?,
            out,
            manifest.master_seed,
        ),
        "rates" => {
            let cfg: RateExperimentConfig = serde_json::from_value(manifest.config).map_err(bad)?;
            cfg.validate()?;
            run_rates(&cfg, out)
        }
        "verify" => {
            let plan: VerifyPlan = serde_json::from_value(manifest.config).map_err(bad)?;
            plan.validate()?;
            run_verify_cmd(&plan, out)
        }
        other => Err(config_error(format!("manifest records unknown command {other:?}"))),
    }
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match &cli.command {
        Command::EnvInfo { law } => run_env_info(&resolve_env(cli, law)?, &cli.out, cli.seed.unwrap_or(DEFAULT_SEED)),
        Command::Rates { target, law, n, envs } => run_rates(&resolve_rates(cli, *target, law, n, *envs)?, &cli.out),
        Command::Verify { law, fault } => run_verify_cmd(&resolve_verify(cli, law, *fault)?, &cli.out),
        Command::Replay { manifest } => replay(manifest, &cli.out),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|e| e.downcast_ref::<CoreError>())
        .map_or(4, |e| e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
