//! `polymer`: batch command-line driver.
//!
//! Subcommands:
//!   simulate   - replica sweeps of one (kind, n, t) point, raw log Z rows
//!   identities - the statistical identity suite, one JSON line per verdict
//!   exponent   - fluctuation-exponent sweeps with resume support
//!
//! Exit codes: 0 success, 1 suite failure, 2 configuration error,
//! 3 resource/manifest error.

mod config;
mod runfiles;

use clap::{Args, Parser, Subcommand};
use polymer_core::environment::{EnvStream, GridSpec};
use polymer_core::experiments::{ExperimentConfig, ExperimentKind, PathModel};
use polymer_core::partition::{ptp_probes, sample_boundary, stationary_probes, BoundaryWeights};
use polymer_core::special::{characteristic_params, psi1, psi1_inv};
use polymer_core::streams::{substream, tag};
use std::path::PathBuf;
use std::process::ExitCode;

pub const EXIT_OK: u8 = 0;
pub const EXIT_SUITE_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RESOURCE: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or config file contents; names the offending key.
    Config(String),
    /// Budget, filesystem, or manifest trouble.
    Resource(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Resource(m) => write!(f, "resource error: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Resource(_) => EXIT_RESOURCE,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Parser)]
#[command(name = "polymer", version, about = "Semi-discrete Brownian polymer laboratory")]
struct Cli {
    /// Flat key=value config file; explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one model point and write per-replica log Z rows.
    Simulate(SimulateArgs),
    /// Run the identity suite; one JSON-lines verdict per test.
    Identities(IdentitiesArgs),
    /// Run an exponent-estimation sweep (resumable).
    Exponent(ExponentArgs),
}

#[derive(Args, Debug, Default)]
struct SimulateArgs {
    /// Model kind: ptp | stationary | kpz
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    n: Option<u64>,
    /// Time horizon of the beta = 1 model.
    #[arg(long)]
    t: Option<f64>,
    /// Intermediate-disorder route: alpha with beta0 and tau.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta0: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Stationary drift parameter.
    #[arg(long)]
    theta: Option<f64>,
    /// Use the characteristic horizon t = n psi1(theta).
    #[arg(long)]
    auto_char_t: bool,
    /// Deterministic all-zero environment fixture.
    #[arg(long)]
    zero_env: bool,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Grid step; mutually exclusive with --auto-delta.
    #[arg(long)]
    delta: Option<f64>,
    /// Use the default step policy min(0.02, 0.1/theta^2).
    #[arg(long)]
    auto_delta: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct IdentitiesArgs {
    /// Comma-separated subset of tests (default: all).
    #[arg(long)]
    only: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the verdicts to OUT/verdicts.jsonl.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct ExponentArgs {
    /// Experiment: var | ptp | path | kpz
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta0: Option<f64>,
    /// Comma-separated n sweep, e.g. 8,16,32,64,128.
    #[arg(long)]
    n: Option<String>,
    /// Comma-separated tau sweep.
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    auto_delta: bool,
    /// Cap total simulation cost; replicas are scaled down to fit.
    #[arg(long)]
    budget_core_hours: Option<f64>,
    /// Path experiment: stationary | ptp.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    paths_per_replica: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Skip (n, tau, replica) tasks already recorded in the manifest ledger.
    #[arg(long)]
    resume: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = match cli
        .config
        .as_deref()
        .map(config::load_file)
        .transpose()
    {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let outcome = match cli.cmd {
        Cmd::Simulate(args) => cmd_simulate(args, &file),
        Cmd::Identities(args) => cmd_identities(args, &file),
        Cmd::Exponent(args) => cmd_exponent(args, &file),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn build_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(config_err("--workers must be at least 1"));
        }
        b = b.num_threads(w);
    }
    b.build()
        .map_err(|e| CliError::Resource(format!("worker pool: {e}")))
}

fn default_out(sub: &str) -> PathBuf {
    let base = std::env::var("POLYMER_OUT").unwrap_or_else(|_| "polymer-out".into());
    PathBuf::from(base).join(sub)
}

fn resolve_delta_flags(
    delta: Option<f64>,
    auto: bool,
    theta_for_policy: f64,
) -> Result<f64> {
    match (delta, auto) {
        (Some(_), true) => Err(config_err("--delta conflicts with --auto-delta")),
        (Some(d), false) if d > 0.0 => Ok(d),
        (Some(d), false) => Err(config_err(format!("--delta {d} must be positive"))),
        (None, _) => Ok(GridSpec::auto_delta(theta_for_policy)),
    }
}

// ---------------------------------------------------------------- simulate

#[derive(serde::Serialize)]
struct SimulateSummary {
    kind: String,
    n: u64,
    t: f64,
    theta: Option<f64>,
    delta: f64,
    replicas: usize,
    seed: u64,
    zero_env: bool,
    log_offset: f64,
    mean_log_z: f64,
    var_log_z: f64,
    se_mean: f64,
    se_var: f64,
}

fn cmd_simulate(args: SimulateArgs, file: &config::FileConfig) -> Result<u8> {
    let kind = config::pick_str(args.kind, file, "kind")?
        .ok_or_else(|| config_err("--kind is required (ptp | stationary | kpz)"))?;
    let seed = config::pick(args.seed, file, "seed")?.unwrap_or(1u64);
    let replicas = config::pick(args.replicas, file, "replicas")?.unwrap_or(100usize);
    let workers = config::pick(args.workers, file, "workers")?;
    let out_dir = config::pick_path(args.out, file, "out")?.unwrap_or_else(|| default_out("simulate"));
    let n = config::pick(args.n, file, "n")?
        .ok_or_else(|| config_err("--n is required"))?;
    if n == 0 {
        return Err(config_err("--n must be at least 1"));
    }
    let alpha = config::pick(args.alpha, file, "alpha")?;
    if let Some(a) = alpha {
        if !(0.0..=0.25).contains(&a) {
            return Err(config_err(format!(
                "--alpha {a} outside the valid range [0, 0.25]"
            )));
        }
    }
    let zero_env = args.zero_env || config::pick_flag(file, "zero-env")?;
    let auto_char_t = args.auto_char_t || config::pick_flag(file, "auto-char-t")?;
    let auto_delta = args.auto_delta || config::pick_flag(file, "auto-delta")?;
    let delta_flag = config::pick(args.delta, file, "delta")?;
    let theta_flag = config::pick(args.theta, file, "theta")?;
    let t_flag = config::pick(args.t, file, "t")?;
    let tau = config::pick(args.tau, file, "tau")?.unwrap_or(1.0);
    let beta0 = config::pick(args.beta0, file, "beta0")?.unwrap_or(1.0);

    let pool = build_pool(workers)?;
    let core = |e: polymer_core::partition::PartitionError| CliError::Config(e.to_string());

    // resolve the scaled-model coordinates
    let (n_scaled, t_scaled, theta, log_offset): (u64, f64, Option<f64>, f64) = match kind.as_str()
    {
        "ptp" => match (alpha, t_flag) {
            (Some(a), None) => {
                let p = characteristic_params(a, beta0, tau, n)
                    .map_err(|e| config_err(e.to_string()))?;
                (p.n_scaled, p.t, None, p.log_offset_ptp())
            }
            (None, Some(t)) => (n, t, None, 0.0),
            _ => {
                return Err(config_err(
                    "--kind ptp needs either --t or the --alpha route, not both",
                ))
            }
        },
        "stationary" => {
            let theta = theta_flag
                .ok_or_else(|| config_err("--theta is required for --kind stationary"))?;
            if !zero_env && !(theta > 0.0) {
                return Err(config_err(format!("--theta {theta} must be positive")));
            }
            let t = if auto_char_t {
                n as f64 * psi1(theta.max(1e-12)).map_err(|e| config_err(e.to_string()))?
            } else {
                t_flag.ok_or_else(|| config_err("--t or --auto-char-t is required"))?
            };
            (n, t, Some(theta), 0.0)
        }
        "kpz" => {
            let beta = (n as f64).powf(-0.25);
            let theta = psi1_inv(beta * beta).map_err(|e| config_err(e.to_string()))?;
            let ns = (tau * n as f64).round() as u64;
            (ns, ns as f64 * beta * beta, Some(theta), 0.0)
        }
        other => {
            return Err(config_err(format!(
                "--kind '{other}' is not one of ptp | stationary | kpz"
            )))
        }
    };
    let policy_theta = theta.unwrap_or_else(|| {
        psi1_inv(t_scaled / n_scaled as f64).unwrap_or(1.0)
    });
    let delta = resolve_delta_flags(delta_flag, auto_delta, policy_theta)?;
    let grid = GridSpec::new(t_scaled, delta).map_err(|e| config_err(e.to_string()))?;

    let replicas = if zero_env { 1 } else { replicas };
    let values: Vec<f64> = pool.install(|| -> Result<Vec<f64>> {
        use rayon::prelude::*;
        (0..replicas as u64)
            .into_par_iter()
            .map(|rep| -> Result<f64> {
                let stream = if zero_env {
                    EnvStream::zero(grid)
                } else {
                    EnvStream::new(grid, seed, rep)
                };
                let ns = n_scaled as usize;
                let v = match kind.as_str() {
                    "ptp" => ptp_probes(&stream, ns, &[(ns, grid.m_count)]).map_err(core)?[0],
                    "stationary" | "kpz" => {
                        let th = theta.unwrap();
                        let boundary = if zero_env {
                            BoundaryWeights::from_r0(th, vec![0.0; ns])
                        } else {
                            let mut rng = substream(seed, &[tag::BURKE_WEIGHTS, rep]);
                            sample_boundary(th, ns, &mut rng).map_err(core)?
                        };
                        let raw = stationary_probes(&stream, &boundary, ns, &[(ns, grid.m_count)])
                            .map_err(core)?[0];
                        if kind == "kpz" {
                            let beta = (n as f64).powf(-0.25);
                            -0.5 * tau * (n as f64).sqrt() - 2.0 * ns as f64 * beta.ln() + raw
                        } else {
                            raw
                        }
                    }
                    _ => unreachable!(),
                };
                Ok(v + log_offset)
            })
            .collect()
    })?;

    let (mean, var, se_mean, se_var) = if values.len() >= 2 {
        let s = polymer_core::stats::summarize(&values);
        (s.mean, s.var, s.se_mean, s.se_var)
    } else {
        (values[0], 0.0, 0.0, 0.0)
    };
    let summary = SimulateSummary {
        kind: kind.clone(),
        n,
        t: t_scaled,
        theta,
        delta,
        replicas,
        seed,
        zero_env,
        log_offset,
        mean_log_z: mean,
        var_log_z: var,
        se_mean,
        se_var,
    };
    let rows: Vec<String> = values
        .iter()
        .enumerate()
        .map(|(i, v)| format!("{{\"replica\":{i},\"log_z\":{v}}}"))
        .collect();
    runfiles::write_simulate(&out_dir, &rows, &summary)?;
    println!("{}", serde_json::to_string(&summary).unwrap());
    Ok(EXIT_OK)
}

// --------------------------------------------------------------- identities

fn cmd_identities(args: IdentitiesArgs, file: &config::FileConfig) -> Result<u8> {
    let seed = config::pick(args.seed, file, "seed")?.unwrap_or(1u64);
    let workers = config::pick(args.workers, file, "workers")?;
    let only: Option<Vec<String>> = config::pick_str(args.only, file, "only")?
        .map(|s| s.split(',').map(|x| x.trim().to_string()).collect());
    let out = config::pick_path(args.out, file, "out")?;
    let pool = build_pool(workers)?;
    let verdicts = pool
        .install(|| polymer_core::identities::run_suite(only.as_deref(), seed))
        .map_err(|e| match e {
            polymer_core::identities::IdentityError::UnknownTest(t) => {
                config_err(format!("unknown identity test '{t}' in --only"))
            }
            other => config_err(other.to_string()),
        })?;
    let mut lines = Vec::new();
    for v in &verdicts {
        let line = serde_json::to_string(v).unwrap();
        println!("{line}");
        lines.push(line);
    }
    eprintln!(
        "expected false failures under the null: {:.4}",
        polymer_core::identities::expected_false_failures(&verdicts)
    );
    if let Some(dir) = out {
        runfiles::write_lines(&dir, "verdicts.jsonl", &lines)?;
    }
    if verdicts.iter().all(|v| v.passed) {
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_SUITE_FAILURE)
    }
}

// ----------------------------------------------------------------- exponent

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<T>()
                .map_err(|_| config_err(format!("cannot parse '{x}' in --{what}")))
        })
        .collect()
}

fn cmd_exponent(args: ExponentArgs, file: &config::FileConfig) -> Result<u8> {
    let experiment = config::pick_str(args.experiment, file, "experiment")?
        .ok_or_else(|| config_err("--experiment is required (var | ptp | path | kpz)"))?;
    let kind = match experiment.as_str() {
        "var" => ExperimentKind::VarianceScaling,
        "ptp" => ExperimentKind::PtpFluctuation,
        "path" => ExperimentKind::PathFluctuation,
        "kpz" => ExperimentKind::KpzScaling,
        other => {
            return Err(config_err(format!(
                "--experiment '{other}' is not one of var | ptp | path | kpz"
            )))
        }
    };
    let alpha = config::pick(args.alpha, file, "alpha")?.unwrap_or(0.0);
    if !(0.0..=0.25).contains(&alpha) {
        return Err(config_err(format!(
            "--alpha {alpha} outside the valid range [0, 0.25]"
        )));
    }
    let mut cfg = ExperimentConfig::new(kind, alpha);
    cfg.beta0 = config::pick(args.beta0, file, "beta0")?.unwrap_or(1.0);
    if let Some(ns) = config::pick_str(args.n, file, "n")? {
        cfg.n_list = parse_list(&ns, "n")?;
    }
    if let Some(taus) = config::pick_str(args.tau, file, "tau")? {
        cfg.tau_list = parse_list(&taus, "tau")?;
    } else if kind == ExperimentKind::KpzScaling {
        cfg.tau_list = vec![1.0, 2.0, 4.0, 8.0];
    }
    for &t in &cfg.tau_list {
        if t < 1.0 {
            eprintln!("warning: tau {t} < 1 is below the regime the scaling targets assume");
        }
    }
    cfg.gamma = config::pick(args.gamma, file, "gamma")?.unwrap_or(0.5);
    if !(0.0..1.0).contains(&cfg.gamma) || cfg.gamma <= 0.0 {
        return Err(config_err(format!("--gamma {} outside (0, 1)", cfg.gamma)));
    }
    cfg.replicas = config::pick(args.replicas, file, "replicas")?.unwrap_or(500);
    cfg.master_seed = config::pick(args.seed, file, "seed")?.unwrap_or(1);
    let auto_delta = args.auto_delta || config::pick_flag(file, "auto-delta")?;
    let delta = config::pick(args.delta, file, "delta")?;
    cfg.delta = match (delta, auto_delta) {
        (Some(_), true) => return Err(config_err("--delta conflicts with --auto-delta")),
        (Some(d), false) if d > 0.0 => Some(d),
        (Some(d), false) => return Err(config_err(format!("--delta {d} must be positive"))),
        (None, _) => None,
    };
    cfg.budget_core_hours = config::pick(args.budget_core_hours, file, "budget-core-hours")?;
    if let Some(model) = config::pick_str(args.model, file, "model")? {
        cfg.path_model = match model.as_str() {
            "stationary" => PathModel::Stationary,
            "ptp" => PathModel::PointToPoint,
            other => {
                return Err(config_err(format!(
                    "--model '{other}' is not one of stationary | ptp"
                )))
            }
        };
    }
    if let Some(ppr) = config::pick(args.paths_per_replica, file, "paths-per-replica")? {
        cfg.paths_per_replica = ppr;
    }
    let workers = config::pick(args.workers, file, "workers")?;
    let out_dir =
        config::pick_path(args.out, file, "out")?.unwrap_or_else(|| default_out("exponent"));
    let pool = build_pool(workers)?;
    runfiles::run_exponent(&cfg, &out_dir, &pool, args.resume)
}
