//! Exponent-estimation harness: replica sweeps over n (and tau), fluctuation
//! statistics, and log-log slope fits against the intermediate-disorder
//! targets chi(alpha) = (1 - 4 alpha)/3 and zeta(alpha) = 2 (1 - alpha)/3.
//!
//! Every row is a pure function of (config, master seed): task seeds are
//! derived from the sweep coordinates, never from scheduling order.

use crate::environment::{EnvStream, Environment, GridSpec};
use crate::partition::{
    level_backward, ptp_probes, sample_boundary, stationary_forward, stationary_probes,
};
use crate::paths::{sigma_marginal, PathSampler};
use crate::special::{characteristic_params, psi1_inv, ScaledParams};
use crate::stats;
use crate::streams::{substream, tag};
use rand::Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{axis} list must span at least a factor {need} (has {have:.3})")]
    InsufficientSpan {
        axis: &'static str,
        need: f64,
        have: f64,
    },
    #[error("slope fit needs at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("degenerate abscissae in slope fit")]
    DegenerateAbscissae,
    #[error("alpha {0} outside the admissible range {1}")]
    AlphaRange(f64, &'static str),
    #[error("gamma {gamma} puts level {level} outside 1..{n}")]
    GammaRange { gamma: f64, level: usize, n: u64 },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Special(#[from] crate::special::SpecialError),
    #[error(transparent)]
    Partition(#[from] crate::partition::PartitionError),
    #[error(transparent)]
    Path(#[from] crate::paths::PathError),
    #[error(transparent)]
    Env(#[from] crate::environment::EnvError),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    VarianceScaling,
    PtpFluctuation,
    PathFluctuation,
    KpzScaling,
}

impl ExperimentKind {
    pub fn id(&self) -> u64 {
        match self {
            ExperimentKind::VarianceScaling => 1,
            ExperimentKind::PtpFluctuation => 2,
            ExperimentKind::PathFluctuation => 3,
            ExperimentKind::KpzScaling => 4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::VarianceScaling => "var",
            ExperimentKind::PtpFluctuation => "ptp",
            ExperimentKind::PathFluctuation => "path",
            ExperimentKind::KpzScaling => "kpz",
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub alpha: f64,
    pub beta0: f64,
    pub n_list: Vec<u64>,
    pub tau_list: Vec<f64>,
    pub gamma: f64,
    pub replicas: usize,
    pub master_seed: u64,
    /// None selects the default policy min(0.02, 0.1/theta^2).
    pub delta: Option<f64>,
    /// Optional core-hour cap; replicas are scaled down to fit.
    pub budget_core_hours: Option<f64>,
    /// Path experiment: which quenched measure to sample.
    pub path_model: PathModel,
    pub paths_per_replica: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathModel {
    Stationary,
    PointToPoint,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, alpha: f64) -> Self {
        ExperimentConfig {
            kind,
            alpha,
            beta0: 1.0,
            n_list: vec![8, 16, 32, 64, 128],
            tau_list: vec![1.0],
            gamma: 0.5,
            replicas: 500,
            master_seed: 1,
            delta: None,
            budget_core_hours: None,
            path_model: PathModel::Stationary,
            paths_per_replica: 4,
        }
    }

    fn resolve_delta(&self, theta: f64) -> f64 {
        self.delta.unwrap_or_else(|| GridSpec::auto_delta(theta))
    }
}

/// Raw per-replica output of one sweep task.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TaskRecord {
    pub n: u64,
    pub tau: f64,
    pub replica: u64,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ReportRow {
    pub kind: String,
    pub alpha: f64,
    pub beta0: f64,
    pub tau: f64,
    pub n: u64,
    pub replicas: usize,
    pub delta: f64,
    pub statistic: String,
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct FitRecord {
    pub statistic: String,
    pub axis: String,
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub bootstrap_resamples: usize,
    pub target_slope: f64,
    pub target_source: String,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ExperimentReport {
    pub kind: String,
    pub alpha: f64,
    pub beta0: f64,
    pub gamma: f64,
    pub replicas: usize,
    pub master_seed: u64,
    pub rows: Vec<ReportRow>,
    pub fits: Vec<FitRecord>,
    #[serde(skip)]
    pub tasks: Vec<TaskRecord>,
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

/// Ordinary least squares on (log-abscissa, log-statistic) points.
pub fn fit_power_law(points: &[(f64, f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 4 {
        return Err(ExperimentError::TooFewPoints {
            need: 4,
            got: points.len(),
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let fit = stats::ols(&xs, &ys).ok_or(ExperimentError::DegenerateAbscissae)?;
    Ok(PowerLawFit {
        slope: fit.slope,
        intercept: fit.intercept,
        slope_se: fit.slope_se,
    })
}

/// Environment seed for one sweep coordinate; replica indices then address
/// independent realizations inside `Environment::generate`.
pub fn experiment_env_seed(master: u64, kind: ExperimentKind, n: u64, tau: f64) -> u64 {
    substream(master, &[tag::EXPERIMENT, kind.id(), n, tau.to_bits()]).gen()
}

fn span_ok(values: &[f64]) -> f64 {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    hi / lo
}

const BOOTSTRAP_RESAMPLES: usize = 400;

/// Percentile bootstrap CI of the OLS slope, resampling replicas within
/// each abscissa independently.
fn bootstrap_slope_ci(
    xs: &[f64],
    replica_values: &[Vec<f64>],
    reducer: &(dyn Fn(&[f64]) -> f64 + Sync),
    master_seed: u64,
) -> (f64, f64) {
    let mut slopes: Vec<f64> = (0..BOOTSTRAP_RESAMPLES as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(master_seed, &[tag::BOOTSTRAP, b]);
            let ys: Vec<f64> = replica_values
                .iter()
                .map(|vals| {
                    let resample: Vec<f64> = (0..vals.len())
                        .map(|_| vals[rng.gen_range(0..vals.len())])
                        .collect();
                    reducer(&resample).max(1e-300).ln()
                })
                .collect();
            stats::ols(xs, &ys).map(|f| f.slope).unwrap_or(f64::NAN)
        })
        .collect();
    slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = slopes[(BOOTSTRAP_RESAMPLES as f64 * 0.025) as usize];
    let hi = slopes[(BOOTSTRAP_RESAMPLES as f64 * 0.975) as usize];
    (lo, hi)
}

fn effective_replicas(cfg: &ExperimentConfig) -> Result<usize> {
    let Some(budget) = cfg.budget_core_hours else {
        return Ok(cfg.replicas);
    };
    // rough kernel cost: ~40ns per level-cell
    let mut cells = 0.0f64;
    for &n in &cfg.n_list {
        for &tau in &cfg.tau_list {
            let p = characteristic_params(cfg.alpha, cfg.beta0, tau, n)?;
            let delta = cfg.resolve_delta(p.theta);
            cells += p.n_scaled as f64 * (p.t / delta);
        }
    }
    let per_replica_hours = cells * 40e-9 / 3600.0;
    let max_replicas = (budget / per_replica_hours.max(1e-12)) as usize;
    Ok(cfg.replicas.min(max_replicas).max(8))
}

fn par_tasks(
    coords: Vec<(u64, f64)>,
    replicas: usize,
    f: impl Fn(u64, f64, u64) -> Result<BTreeMap<String, f64>> + Sync,
) -> Result<Vec<TaskRecord>> {
    let mut keys = Vec::new();
    for (n, tau) in &coords {
        for rep in 0..replicas as u64 {
            keys.push((*n, *tau, rep));
        }
    }
    keys.into_par_iter()
        .map(|(n, tau, rep)| {
            Ok(TaskRecord {
                n,
                tau,
                replica: rep,
                values: f(n, tau, rep)?,
            })
        })
        .collect()
}

/// One sweep task; the unit of parallelism and of resume bookkeeping.
/// For the kpz sweep the `tau` argument must be the largest tau of the
/// config: one pass produces the whole tau process of that replica.
pub fn simulate_task(
    cfg: &ExperimentConfig,
    n: u64,
    tau: f64,
    replica: u64,
) -> Result<BTreeMap<String, f64>> {
    match cfg.kind {
        ExperimentKind::VarianceScaling => variance_task(cfg, n, tau, replica),
        ExperimentKind::PtpFluctuation => ptp_task(cfg, n, tau, replica),
        ExperimentKind::PathFluctuation => path_task(cfg, n, tau, replica),
        ExperimentKind::KpzScaling => kpz_task(cfg, n, replica),
    }
}

fn char_grid(cfg: &ExperimentConfig, n: u64, tau: f64) -> Result<(ScaledParams, GridSpec)> {
    let p = characteristic_params(cfg.alpha, cfg.beta0, tau, n)?;
    let delta = cfg.resolve_delta(p.theta);
    Ok((p, GridSpec::new(p.t, delta)?))
}

fn variance_task(
    cfg: &ExperimentConfig,
    n: u64,
    tau: f64,
    replica: u64,
) -> Result<BTreeMap<String, f64>> {
    let (p, grid) = char_grid(cfg, n, tau)?;
    let seed = experiment_env_seed(cfg.master_seed, cfg.kind, n, tau);
    let n_scaled = p.n_scaled as usize;
    let env = Environment::generate(n_scaled, grid, seed, replica)?;
    let mut rng = substream(seed, &[tag::BURKE_WEIGHTS, replica]);
    let boundary = sample_boundary(p.theta, n_scaled, &mut rng)?;
    let table = stationary_forward(&env, &boundary, n_scaled)?;
    let dec = crate::paths::Sigma0Decomposition::new(&env, &boundary, n_scaled)?;
    let mut values = BTreeMap::new();
    values.insert("log_z".into(), table.last());
    values.insert("sigma0_plus".into(), dec.mean_sigma0_plus());
    Ok(values)
}

fn ptp_task(
    cfg: &ExperimentConfig,
    n: u64,
    tau: f64,
    replica: u64,
) -> Result<BTreeMap<String, f64>> {
    let (p, grid) = char_grid(cfg, n, tau)?;
    let seed = experiment_env_seed(cfg.master_seed, cfg.kind, n, tau);
    let n_scaled = p.n_scaled as usize;
    let stream = EnvStream::new(grid, seed, replica);
    let v = ptp_probes(&stream, n_scaled, &[(n_scaled, grid.m_count)])?[0];
    let centering = p.centering()?;
    let mut values = BTreeMap::new();
    values.insert("log_z".into(), v);
    values.insert("abs_dev".into(), (v - centering).abs());
    Ok(values)
}

fn path_task(
    cfg: &ExperimentConfig,
    n: u64,
    tau: f64,
    replica: u64,
) -> Result<BTreeMap<String, f64>> {
    let (p, grid) = char_grid(cfg, n, tau)?;
    let n_scaled = p.n_scaled as usize;
    let gamma_level = (cfg.gamma * n_scaled as f64).floor() as usize;
    if gamma_level < 1 || gamma_level >= n_scaled {
        return Err(ExperimentError::GammaRange {
            gamma: cfg.gamma,
            level: gamma_level,
            n,
        });
    }
    let seed = experiment_env_seed(cfg.master_seed, cfg.kind, n, tau);
    let env = Environment::generate(n_scaled, grid, seed, replica)?;
    let table = match cfg.path_model {
        PathModel::Stationary => {
            let mut rng = substream(seed, &[tag::BURKE_WEIGHTS, replica]);
            let boundary = sample_boundary(p.theta, n_scaled, &mut rng)?;
            stationary_forward(&env, &boundary, n_scaled)?
        }
        PathModel::PointToPoint => crate::partition::ptp_forward(&env, n_scaled)?,
    };
    let center = cfg.gamma * p.t;
    let sampler = PathSampler::new(&table, &env)?;
    let mut prng = substream(seed, &[tag::PATH_SAMPLER, replica]);
    let mut devs = Vec::with_capacity(cfg.paths_per_replica);
    for _ in 0..cfg.paths_per_replica {
        let path = sampler.draw(&mut prng)?;
        devs.push(match path.sigma[gamma_level] {
            Some(t) => (t - center).abs(),
            None => center,
        });
    }
    let backward = level_backward(&env, n_scaled)?;
    let marg = sigma_marginal(&table, &backward, &env, gamma_level)?;
    let scale_u = (n_scaled as f64).powf(2.0 / 3.0) * p.theta.powf(-4.0 / 3.0);
    let mut values = BTreeMap::new();
    values.insert(
        "abs_dev".into(),
        devs.iter().sum::<f64>() / devs.len() as f64,
    );
    values.insert("abs_dev_q".into(), marg.quenched_mean_abs_dev(&grid, center));
    values.insert(
        "tail_b2".into(),
        marg.quenched_tail(&grid, center, 2.0 * scale_u),
    );
    values.insert(
        "tail_b4".into(),
        marg.quenched_tail(&grid, center, 4.0 * scale_u),
    );
    Ok(values)
}

fn kpz_task(cfg: &ExperimentConfig, n: u64, replica: u64) -> Result<BTreeMap<String, f64>> {
    let beta = (n as f64).powf(-0.25);
    let theta = psi1_inv(beta * beta)?;
    let delta = cfg.resolve_delta(theta);
    let tau_max = cfg
        .tau_list
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let n_top = (tau_max * n as f64).round() as usize;
    let t_top = n_top as f64 * beta * beta;
    let grid = GridSpec::new(t_top, delta)?;
    let mut probes = Vec::with_capacity(cfg.tau_list.len());
    for &tau in &cfg.tau_list {
        let n_scaled = (tau * n as f64).round() as usize;
        let node = ((n_scaled as f64 * beta * beta) / delta).round() as usize;
        probes.push((n_scaled, node.min(grid.m_count)));
    }
    let seed = experiment_env_seed(cfg.master_seed, cfg.kind, n, tau_max);
    let stream = EnvStream::new(grid, seed, replica);
    let mut rng = substream(seed, &[tag::BURKE_WEIGHTS, replica]);
    let boundary = sample_boundary(theta, n_top, &mut rng)?;
    let raw = stationary_probes(&stream, &boundary, n_top, &probes)?;
    let mut values = BTreeMap::new();
    for (i, &tau) in cfg.tau_list.iter().enumerate() {
        let n_scaled = probes[i].0 as f64;
        let offset = -0.5 * tau * (n as f64).sqrt() - 2.0 * n_scaled * beta.ln();
        values.insert(format!("log_z_tau{i}"), offset + raw[i]);
    }
    Ok(values)
}

fn group_values<'a>(
    tasks: &'a [TaskRecord],
    n: u64,
    tau: f64,
    key: &str,
) -> Vec<f64> {
    let mut rows: Vec<(u64, f64)> = tasks
        .iter()
        .filter(|t| t.n == n && t.tau == tau)
        .filter_map(|t| t.values.get(key).map(|v| (t.replica, *v)))
        .collect();
    rows.sort_by_key(|r| r.0);
    rows.into_iter().map(|r| r.1).collect()
}

fn variance_reducer(v: &[f64]) -> f64 {
    stats::summarize(v).var
}

fn mean_reducer(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

struct Axis {
    name: &'static str,
    coords: Vec<(u64, f64)>,
    xs: Vec<f64>,
}

/// Choose the sweep axis with enough points and span for a slope fit.
fn fit_axes(cfg: &ExperimentConfig) -> Vec<Axis> {
    let mut axes = Vec::new();
    if cfg.n_list.len() >= 4 {
        let vals: Vec<f64> = cfg.n_list.iter().map(|&n| n as f64).collect();
        if span_ok(&vals) >= 8.0 {
            axes.push(Axis {
                name: "n",
                coords: cfg.n_list.iter().map(|&n| (n, cfg.tau_list[0])).collect(),
                xs: vals.iter().map(|v| v.ln()).collect(),
            });
        }
    }
    if cfg.tau_list.len() >= 4 && span_ok(&cfg.tau_list) >= 8.0 {
        axes.push(Axis {
            name: "tau",
            coords: cfg.tau_list.iter().map(|&t| (cfg.n_list[0], t)).collect(),
            xs: cfg.tau_list.iter().map(|v| v.ln()).collect(),
        });
    }
    axes
}

fn require_axes(cfg: &ExperimentConfig) -> Result<Vec<Axis>> {
    let axes = fit_axes(cfg);
    if axes.is_empty() {
        let have = span_ok(&cfg.n_list.iter().map(|&n| n as f64).collect::<Vec<_>>())
            .max(span_ok(&cfg.tau_list));
        return Err(ExperimentError::InsufficientSpan {
            axis: "n or tau",
            need: 8.0,
            have,
        });
    }
    Ok(axes)
}

fn all_coords(cfg: &ExperimentConfig) -> Vec<(u64, f64)> {
    let mut coords = Vec::new();
    for &n in &cfg.n_list {
        for &tau in &cfg.tau_list {
            coords.push((n, tau));
        }
    }
    coords
}

fn base_report(cfg: &ExperimentConfig, replicas: usize, tasks: Vec<TaskRecord>) -> ExperimentReport {
    ExperimentReport {
        kind: cfg.kind.name().into(),
        alpha: cfg.alpha,
        beta0: cfg.beta0,
        gamma: cfg.gamma,
        replicas,
        master_seed: cfg.master_seed,
        rows: Vec::new(),
        fits: Vec::new(),
        tasks,
    }
}

fn push_row(
    report: &mut ExperimentReport,
    cfg: &ExperimentConfig,
    n: u64,
    tau: f64,
    delta: f64,
    statistic: &str,
    value: f64,
    se: f64,
    replicas: usize,
) {
    report.rows.push(ReportRow {
        kind: cfg.kind.name().into(),
        alpha: cfg.alpha,
        beta0: cfg.beta0,
        tau,
        n,
        replicas,
        delta,
        statistic: statistic.into(),
        value,
        se,
    });
}

fn fit_axis(
    report: &mut ExperimentReport,
    cfg: &ExperimentConfig,
    axis: &Axis,
    tasks: &[TaskRecord],
    value_key: &str,
    stat_name: &str,
    reducer: &(dyn Fn(&[f64]) -> f64 + Sync),
    post_scale: &dyn Fn(u64, f64) -> f64,
    target_slope: f64,
    target_source: &str,
) -> Result<()> {
    let mut points = Vec::new();
    let mut replica_values = Vec::new();
    for (i, &(n, tau)) in axis.coords.iter().enumerate() {
        let scale = post_scale(n, tau);
        let vals: Vec<f64> = group_values(tasks, n, tau, value_key)
            .into_iter()
            .map(|v| v * scale)
            .collect();
        if vals.len() < 2 {
            return Err(ExperimentError::Config(format!(
                "missing replicas for n={n}, tau={tau}"
            )));
        }
        points.push((axis.xs[i], reducer(&vals).max(1e-300).ln(), 0.0));
        replica_values.push(vals);
    }
    let fit = fit_power_law(&points)?;
    let (ci_lo, ci_hi) = bootstrap_slope_ci(
        &axis.xs,
        &replica_values,
        reducer,
        cfg.master_seed ^ cfg.kind.id(),
    );
    report.fits.push(FitRecord {
        statistic: stat_name.into(),
        axis: axis.name.into(),
        slope: fit.slope,
        intercept: fit.intercept,
        slope_se: fit.slope_se,
        ci_lo,
        ci_hi,
        bootstrap_resamples: BOOTSTRAP_RESAMPLES,
        target_slope,
        target_source: target_source.into(),
    });
    Ok(())
}

/// Validate a config and return the effective replica count after the
/// optional core-hour budget split.
pub fn validate(cfg: &ExperimentConfig) -> Result<usize> {
    match cfg.kind {
        ExperimentKind::KpzScaling => {
            if cfg.tau_list.len() < 4 || span_ok(&cfg.tau_list) < 8.0 {
                return Err(ExperimentError::InsufficientSpan {
                    axis: "tau",
                    need: 8.0,
                    have: span_ok(&cfg.tau_list),
                });
            }
            if cfg.n_list.is_empty() {
                return Err(ExperimentError::Config("kpz sweep needs one n".into()));
            }
        }
        ExperimentKind::PtpFluctuation => {
            if cfg.alpha >= 0.25 {
                return Err(ExperimentError::AlphaRange(cfg.alpha, "[0, 1/4)"));
            }
            require_axes(cfg)?;
        }
        _ => {
            require_axes(cfg)?;
        }
    }
    effective_replicas(cfg)
}

/// Sweep coordinates (n, tau) of the config; one task per coordinate and
/// replica. The kpz sweep collapses to its largest tau (one pass covers the
/// whole tau process).
pub fn task_coords(cfg: &ExperimentConfig) -> Vec<(u64, f64)> {
    match cfg.kind {
        ExperimentKind::KpzScaling => {
            let tau_max = cfg.tau_list.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            vec![(cfg.n_list[0], tau_max)]
        }
        _ => all_coords(cfg),
    }
}

fn summarize_variance(
    cfg: &ExperimentConfig,
    replicas: usize,
    tasks: Vec<TaskRecord>,
) -> Result<ExperimentReport> {
    let axes = require_axes(cfg)?;
    let mut report = base_report(cfg, replicas, tasks);
    for (n, tau) in all_coords(cfg) {
        let (p, grid) = char_grid(cfg, n, tau)?;
        let log_z = group_values(&report.tasks, n, tau, "log_z");
        let s0 = group_values(&report.tasks, n, tau, "sigma0_plus");
        let sz = stats::summarize(&log_z);
        let ss = stats::summarize(&s0);
        push_row(&mut report, cfg, n, tau, grid.delta, "var_log_z", sz.var, sz.se_var, replicas);
        push_row(
            &mut report, cfg, n, tau, grid.delta, "mean_sigma0_plus", ss.mean, ss.se_mean,
            replicas,
        );
        // unconditional variance identity residual (linear term included)
        let rhs = p.n_scaled as f64 * crate::special::psi1(p.theta)? - p.t + 2.0 * ss.mean;
        let pooled = (sz.se_var * sz.se_var + 4.0 * ss.se_mean * ss.se_mean).sqrt();
        push_row(
            &mut report, cfg, n, tau, grid.delta, "var_identity_gap", sz.var - rhs, pooled,
            replicas,
        );
    }
    let tasks = std::mem::take(&mut report.tasks);
    for axis in &axes {
        let target = if axis.name == "n" {
            2.0 * (1.0 - 4.0 * cfg.alpha) / 3.0
        } else {
            2.0 / 3.0
        };
        let source = if axis.name == "n" { "2(1-4a)/3" } else { "2/3 in tau" };
        fit_axis(
            &mut report,
            cfg,
            axis,
            &tasks,
            "log_z",
            "var_log_z",
            &variance_reducer,
            &|_, _| 1.0,
            target,
            source,
        )?;
    }
    report.tasks = tasks;
    Ok(report)
}

fn summarize_ptp(
    cfg: &ExperimentConfig,
    replicas: usize,
    tasks: Vec<TaskRecord>,
) -> Result<ExperimentReport> {
    let axes = require_axes(cfg)?;
    let mut report = base_report(cfg, replicas, tasks);
    for (n, tau) in all_coords(cfg) {
        let (p, grid) = char_grid(cfg, n, tau)?;
        let devs = group_values(&report.tasks, n, tau, "abs_dev");
        let s = stats::summarize(&devs);
        push_row(&mut report, cfg, n, tau, grid.delta, "mean_abs_dev", s.mean, s.se_mean, replicas);
        // centering diagnostic, reported but not gated
        let log_z = group_values(&report.tasks, n, tau, "log_z");
        let sl = stats::summarize(&log_z);
        push_row(
            &mut report, cfg, n, tau, grid.delta, "centering_gap",
            sl.mean - p.centering()?, sl.se_mean, replicas,
        );
        // tail frequencies on the n^{1/3} theta^{-2/3} scale
        let scale_u = (p.n_scaled as f64).powf(1.0 / 3.0) * p.theta.powf(-2.0 / 3.0);
        for b in [1.0, 2.0, 4.0] {
            let hits = devs.iter().filter(|&&d| d >= b * scale_u).count() as f64;
            let freq = hits / devs.len() as f64;
            let se = (freq * (1.0 - freq) / devs.len() as f64).sqrt();
            push_row(
                &mut report, cfg, n, tau, grid.delta, &format!("tail_freq_b{b}"), freq, se,
                replicas,
            );
        }
    }
    let tasks = std::mem::take(&mut report.tasks);
    for axis in &axes {
        fit_axis(
            &mut report,
            cfg,
            axis,
            &tasks,
            "abs_dev",
            "mean_abs_dev",
            &mean_reducer,
            &|_, _| 1.0,
            (1.0 - 4.0 * cfg.alpha) / 3.0,
            "(1-4a)/3",
        )?;
    }
    report.tasks = tasks;
    Ok(report)
}

fn summarize_path(
    cfg: &ExperimentConfig,
    replicas: usize,
    tasks: Vec<TaskRecord>,
) -> Result<ExperimentReport> {
    let axes = require_axes(cfg)?;
    let mut report = base_report(cfg, replicas, tasks);
    for (n, tau) in all_coords(cfg) {
        let (p, grid) = char_grid(cfg, n, tau)?;
        let back_scale = p.beta.powi(-2);
        for key in ["abs_dev", "abs_dev_q", "tail_b2", "tail_b4"] {
            let vals = group_values(&report.tasks, n, tau, key);
            let s = stats::summarize(&vals);
            let scale = if key.starts_with("abs_dev") { back_scale } else { 1.0 };
            push_row(
                &mut report, cfg, n, tau, grid.delta, key, s.mean * scale, s.se_mean * scale,
                replicas,
            );
        }
    }
    let tasks = std::mem::take(&mut report.tasks);
    for axis in &axes {
        let alpha = cfg.alpha;
        fit_axis(
            &mut report,
            cfg,
            axis,
            &tasks,
            "abs_dev",
            "path_dev",
            &mean_reducer,
            &move |n, _| (n as f64).powf(2.0 * alpha),
            2.0 * (1.0 - cfg.alpha) / 3.0,
            "2(1-a)/3",
        )?;
    }
    report.tasks = tasks;
    Ok(report)
}

fn summarize_kpz(
    cfg: &ExperimentConfig,
    replicas: usize,
    tasks: Vec<TaskRecord>,
) -> Result<ExperimentReport> {
    let n = cfg.n_list[0];
    let mut report = base_report(cfg, replicas, tasks);
    let beta = (n as f64).powf(-0.25);
    let theta = psi1_inv(beta * beta)?;
    let delta = cfg.resolve_delta(theta);
    let tau_max = cfg.tau_list.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut xs = Vec::new();
    let mut replica_values = Vec::new();
    let mut points = Vec::new();
    for (i, &tau) in cfg.tau_list.iter().enumerate() {
        let vals = group_values(&report.tasks, n, tau_max, &format!("log_z_tau{i}"));
        let s = stats::summarize(&vals);
        push_row(&mut report, cfg, n, tau, delta, "var_log_z", s.var, s.se_var, replicas);
        xs.push(tau.ln());
        points.push((tau.ln(), s.var.ln(), 0.0));
        replica_values.push(vals);
    }
    let fit = fit_power_law(&points)?;
    let (ci_lo, ci_hi) = bootstrap_slope_ci(
        &xs,
        &replica_values,
        &variance_reducer,
        cfg.master_seed ^ cfg.kind.id(),
    );
    report.fits.push(FitRecord {
        statistic: "var_log_z".into(),
        axis: "tau".into(),
        slope: fit.slope,
        intercept: fit.intercept,
        slope_se: fit.slope_se,
        ci_lo,
        ci_hi,
        bootstrap_resamples: BOOTSTRAP_RESAMPLES,
        target_slope: 2.0 / 3.0,
        target_source: "2/3 in tau".into(),
    });
    Ok(report)
}

/// Build the report from raw task records (used directly by resumable runs).
pub fn summarize(
    cfg: &ExperimentConfig,
    replicas: usize,
    tasks: Vec<TaskRecord>,
) -> Result<ExperimentReport> {
    match cfg.kind {
        ExperimentKind::VarianceScaling => summarize_variance(cfg, replicas, tasks),
        ExperimentKind::PtpFluctuation => summarize_ptp(cfg, replicas, tasks),
        ExperimentKind::PathFluctuation => summarize_path(cfg, replicas, tasks),
        ExperimentKind::KpzScaling => summarize_kpz(cfg, replicas, tasks),
    }
}

/// Stationary log Z variance against n (and tau when swept).
pub fn run_variance_scaling(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut cfg = cfg.clone();
    cfg.kind = ExperimentKind::VarianceScaling;
    run(&cfg)
}

/// Point-to-point |log Z - centering| against n.
pub fn run_ptp_fluctuation(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut cfg = cfg.clone();
    cfg.kind = ExperimentKind::PtpFluctuation;
    run(&cfg)
}

/// Transversal path deviation |sigma_{gamma n} - gamma t| against n,
/// reported in unscaled time units (the beta^{-2} conversion).
pub fn run_path_fluctuation(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut cfg = cfg.clone();
    cfg.kind = ExperimentKind::PathFluctuation;
    run(&cfg)
}

/// Variance of the renormalized critical-regime value against tau at fixed n.
pub fn run_kpz_scaling(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut cfg = cfg.clone();
    cfg.kind = ExperimentKind::KpzScaling;
    run(&cfg)
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let replicas = validate(cfg)?;
    let tasks = par_tasks(task_coords(cfg), replicas, |n, tau, rep| {
        simulate_task(cfg, n, tau, rep)
    })?;
    summarize(cfg, replicas, tasks)
}
