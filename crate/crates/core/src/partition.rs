//! Log-domain transfer recursions for the polymer partition functions.
//!
//! Point-to-point: Z^{(1)}(t) = e^{B_1(0,t)} and
//!   Z^{(k)}(t) = int_0^t Z^{(k-1)}(s) e^{B_k(s,t)} ds,
//! evaluated by a streaming trapezoid log-sum-exp per level.
//!
//! Stationary (Burke boundary): U_0(t) = e^{-B(t) + theta t}, the level-k seed
//! U_k(0) = exp(sum_{j<=k} r_j(0)) with e^{-r_j(0)} i.i.d. Gamma(theta), and
//!   U_k(t) = U_k(0) e^{B_k(0,t)} + int_0^t U_{k-1}(s) e^{B_k(s,t)} ds.
//! The sampled boundary weights stand in for the model's infinite past, which
//! makes the finite-window recursion exact in law.
//!
//! All inverse temperatures other than 1 enter through the Brownian scaling
//! maps; a direct-beta kernel exists solely to validate those maps.

use crate::environment::{EnvStream, Environment, GridSpec};
use crate::logdomain::LogTrapezoid;
use crate::special::{self, gamma_sample};
use crate::streams::{substream, tag};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("environment has {have} levels, need {need}")]
    InsufficientLevels { have: usize, need: usize },
    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),
    #[error("table kind mismatch: expected {expected}")]
    KindMismatch { expected: &'static str },
    #[error("boundary weights carry {have} levels, need {need}")]
    BoundaryLevels { have: usize, need: usize },
    #[error("phi exceeds its declared bound at {x}: |{value}| > {bound}")]
    PhiBound { x: f64, value: f64, bound: f64 },
    #[error("truncation budget violated: leading tail mass fraction {fraction:.3e} > {budget:.3e}")]
    TruncationBudget { fraction: f64, budget: f64 },
    #[error(transparent)]
    Special(#[from] special::SpecialError),
    #[error(transparent)]
    Env(#[from] crate::environment::EnvError),
}

pub type Result<T> = std::result::Result<T, PartitionError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    PointToPoint,
    Stationary,
}

/// Log-domain partition values for all levels and grid times.
#[derive(Debug, Clone)]
pub struct DPTable {
    pub kind: TableKind,
    pub n: usize,
    pub grid: GridSpec,
    /// Stationary drift parameter; None for point-to-point tables.
    pub theta: Option<f64>,
    first_level: usize,
    rows: Vec<Vec<f64>>,
    boundary: Option<BoundaryWeights>,
}

impl DPTable {
    /// Burke boundary weights the stationary table was built from.
    pub fn boundary(&self) -> Option<&BoundaryWeights> {
        self.boundary.as_ref()
    }

    /// Log-values of level k across the grid. Point-to-point tables hold
    /// levels 1..=n, stationary tables 0..=n.
    pub fn level(&self, k: usize) -> &[f64] {
        assert!(
            k >= self.first_level && k <= self.n,
            "level {k} outside [{}, {}]",
            self.first_level,
            self.n
        );
        &self.rows[k - self.first_level]
    }

    /// log Z at the top level and final time.
    pub fn last(&self) -> f64 {
        self.rows[self.n - self.first_level][self.grid.m_count]
    }
}

/// One transfer step: out[j] = log( seed e^{beta bk[j]} +
/// int_0^{t_j} exp(prev(s) + beta(bk[j] - bk(s))) ds ).
fn advance_level_into(
    prev: &[f64],
    bk: &[f64],
    beta: f64,
    grid: &GridSpec,
    log_seed: f64,
    out: &mut Vec<f64>,
) {
    let nodes = grid.nodes();
    out.clear();
    out.reserve(nodes);
    let mut acc = LogTrapezoid::new();
    acc.push(prev[0] - beta * bk[0], 0.0);
    out.push(acc.log_value_plus(log_seed) + beta * bk[0]);
    let delta = grid.delta;
    let m_count = grid.m_count;
    for j in 1..nodes {
        let w = if j == m_count { grid.width(j - 1) } else { delta };
        acc.push(prev[j] - beta * bk[j], w);
        out.push(acc.log_value_plus(log_seed) + beta * bk[j]);
    }
}

/// Backward transfer: out[j] = log int_{t_j}^{t_max} e^{beta bk(j,r)} e^{next(r)} dr.
fn backward_level_into(next: &[f64], bk: &[f64], beta: f64, grid: &GridSpec, out: &mut Vec<f64>) {
    let nodes = grid.nodes();
    let m_count = grid.m_count;
    out.clear();
    out.resize(nodes, f64::NEG_INFINITY);
    let mut acc = LogTrapezoid::new();
    acc.push(next[m_count] + beta * bk[m_count], 0.0);
    out[m_count] = acc.log_value() - beta * bk[m_count];
    for j in (0..m_count).rev() {
        let w = grid.width(j);
        acc.push(next[j] + beta * bk[j], w);
        out[j] = acc.log_value() - beta * bk[j];
    }
}

fn check_levels(env: &Environment, n: usize) -> Result<()> {
    if env.level_count() < n {
        return Err(PartitionError::InsufficientLevels {
            have: env.level_count(),
            need: n,
        });
    }
    Ok(())
}

/// Point-to-point table at beta = 1 (general beta goes through scaling_map).
pub fn ptp_forward(env: &Environment, n: usize) -> Result<DPTable> {
    ptp_forward_beta(env, n, 1.0)
}

/// Direct-beta kernel; exists to validate the Brownian scaling maps.
pub fn ptp_forward_beta(env: &Environment, n: usize, beta: f64) -> Result<DPTable> {
    if n == 0 {
        return Err(PartitionError::DegenerateGrid(
            "point-to-point needs n >= 1".into(),
        ));
    }
    check_levels(env, n)?;
    let grid = env.grid;
    if grid.m_count == 0 && n > 1 {
        return Err(PartitionError::DegenerateGrid(
            "t_max = 0 is defined only for n = 1".into(),
        ));
    }
    let mut rows = Vec::with_capacity(n);
    let b1 = env.level(1)?;
    rows.push(b1.iter().map(|v| beta * v).collect::<Vec<f64>>());
    for k in 2..=n {
        let bk = env.level(k)?;
        let mut out = Vec::new();
        advance_level_into(
            rows.last().unwrap(),
            bk,
            beta,
            &grid,
            f64::NEG_INFINITY,
            &mut out,
        );
        rows.push(out);
    }
    Ok(DPTable {
        kind: TableKind::PointToPoint,
        n,
        grid,
        theta: None,
        first_level: 1,
        rows,
        boundary: None,
    })
}

/// Burke boundary weights: r0[k-1] = r_k(0) with e^{-r_k(0)} i.i.d.
/// Gamma(theta). `log_seed(k)` is the stationary level seed
/// log U_k(0) = sum_{j<=k} r_j(0).
#[derive(Debug, Clone)]
pub struct BoundaryWeights {
    pub theta: f64,
    pub r0: Vec<f64>,
    seeds: Vec<f64>,
}

impl BoundaryWeights {
    pub fn from_r0(theta: f64, r0: Vec<f64>) -> Self {
        let mut seeds = Vec::with_capacity(r0.len() + 1);
        seeds.push(0.0);
        let mut acc = 0.0;
        for r in &r0 {
            acc += r;
            seeds.push(acc);
        }
        BoundaryWeights { theta, r0, seeds }
    }

    /// log U_k(0), k = 0..=n.
    pub fn log_seed(&self, k: usize) -> f64 {
        self.seeds[k]
    }

    pub fn levels(&self) -> usize {
        self.r0.len()
    }
}

/// Draw the stationary model's boundary weights.
pub fn sample_boundary<R: Rng + ?Sized>(theta: f64, n: usize, rng: &mut R) -> Result<BoundaryWeights> {
    let mut r0 = Vec::with_capacity(n);
    for _ in 0..n {
        r0.push(-gamma_sample(theta, rng)?.ln());
    }
    Ok(BoundaryWeights::from_r0(theta, r0))
}

/// Boundary weights of the direct-beta stationary model: each increment is
/// -2 log beta - log Gamma(theta / beta) in law.
pub fn sample_boundary_direct<R: Rng + ?Sized>(
    theta: f64,
    beta: f64,
    n: usize,
    rng: &mut R,
) -> Result<BoundaryWeights> {
    let shift = -2.0 * beta.ln();
    let mut r0 = Vec::with_capacity(n);
    for _ in 0..n {
        r0.push(shift - gamma_sample(theta / beta, rng)?.ln());
    }
    Ok(BoundaryWeights::from_r0(theta, r0))
}

/// Stationary table at beta = 1.
pub fn stationary_forward(
    env: &Environment,
    boundary: &BoundaryWeights,
    n: usize,
) -> Result<DPTable> {
    stationary_forward_beta(env, boundary, n, 1.0)
}

pub fn stationary_forward_beta(
    env: &Environment,
    boundary: &BoundaryWeights,
    n: usize,
    beta: f64,
) -> Result<DPTable> {
    check_levels(env, n)?;
    if boundary.levels() < n {
        return Err(PartitionError::BoundaryLevels {
            have: boundary.levels(),
            need: n,
        });
    }
    let grid = env.grid;
    let theta = boundary.theta;
    let b0 = env.level(0)?;
    let mut rows = Vec::with_capacity(n + 1);
    rows.push(
        (0..grid.nodes())
            .map(|j| beta * (-b0[j] + theta * grid.time(j)))
            .collect::<Vec<f64>>(),
    );
    for k in 1..=n {
        let bk = env.level(k)?;
        let mut out = Vec::new();
        advance_level_into(
            rows.last().unwrap(),
            bk,
            beta,
            &grid,
            boundary.log_seed(k),
            &mut out,
        );
        rows.push(out);
    }
    Ok(DPTable {
        kind: TableKind::Stationary,
        n,
        grid,
        theta: Some(theta),
        first_level: 0,
        rows,
        boundary: Some(boundary.clone()),
    })
}

/// Rolling stationary recursion that keeps two rows; returns the log-values
/// at the requested (level, node) probes. Bit-identical to the table builder.
pub fn stationary_probes(
    stream: &EnvStream,
    boundary: &BoundaryWeights,
    n: usize,
    probes: &[(usize, usize)],
) -> Result<Vec<f64>> {
    if boundary.levels() < n {
        return Err(PartitionError::BoundaryLevels {
            have: boundary.levels(),
            need: n,
        });
    }
    let grid = stream.grid;
    let mut results = vec![f64::NAN; probes.len()];
    let mut bk = Vec::new();
    stream.level_into(0, &mut bk);
    let mut prev: Vec<f64> = (0..grid.nodes())
        .map(|j| -bk[j] + boundary.theta * grid.time(j))
        .collect();
    let grab = |level: usize, row: &[f64], results: &mut Vec<f64>| {
        for (i, &(l, node)) in probes.iter().enumerate() {
            if l == level {
                results[i] = row[node];
            }
        }
    };
    grab(0, &prev, &mut results);
    let mut out = Vec::new();
    for k in 1..=n {
        stream.level_into(k, &mut bk);
        advance_level_into(&prev, &bk, 1.0, &grid, boundary.log_seed(k), &mut out);
        std::mem::swap(&mut prev, &mut out);
        grab(k, &prev, &mut results);
    }
    Ok(results)
}

/// Rolling point-to-point recursion with probes, beta = 1.
pub fn ptp_probes(stream: &EnvStream, n: usize, probes: &[(usize, usize)]) -> Result<Vec<f64>> {
    let grid = stream.grid;
    let mut results = vec![f64::NAN; probes.len()];
    let mut bk = Vec::new();
    stream.level_into(1, &mut bk);
    let mut prev = bk.clone();
    let grab = |level: usize, row: &[f64], results: &mut Vec<f64>| {
        for (i, &(l, node)) in probes.iter().enumerate() {
            if l == level {
                results[i] = row[node];
            }
        }
    };
    grab(1, &prev, &mut results);
    let mut out = Vec::new();
    for k in 2..=n {
        stream.level_into(k, &mut bk);
        advance_level_into(&prev, &bk, 1.0, &grid, f64::NEG_INFINITY, &mut out);
        std::mem::swap(&mut prev, &mut out);
        grab(k, &prev, &mut results);
    }
    Ok(results)
}

/// Backward partition values V_k(t_j) = log Z_{(k,n),(t_j, t_max)} for
/// k = 1..=n. Independent of theta and of the boundary motion; shared by the
/// quenched sigma_0 decomposition and the path marginals.
#[derive(Debug, Clone)]
pub struct BackwardTable {
    pub n: usize,
    pub grid: GridSpec,
    rows: Vec<Vec<f64>>,
}

impl BackwardTable {
    pub fn level(&self, k: usize) -> &[f64] {
        assert!(k >= 1 && k <= self.n);
        &self.rows[k - 1]
    }
}

pub fn level_backward(env: &Environment, n: usize) -> Result<BackwardTable> {
    level_backward_beta(env, n, 1.0)
}

pub fn level_backward_beta(env: &Environment, n: usize, beta: f64) -> Result<BackwardTable> {
    if n == 0 {
        return Err(PartitionError::DegenerateGrid("backward needs n >= 1".into()));
    }
    check_levels(env, n)?;
    let grid = env.grid;
    let bn = env.level(n)?;
    let top = bn[grid.m_count];
    let mut rows = vec![Vec::new(); n];
    rows[n - 1] = bn.iter().map(|v| beta * (top - v)).collect();
    for k in (1..n).rev() {
        let bk = env.level(k)?;
        let (head, tail) = rows.split_at_mut(k);
        let mut out = std::mem::take(&mut head[k - 1]);
        backward_level_into(&tail[0], bk, beta, &grid, &mut out);
        head[k - 1] = out;
    }
    Ok(BackwardTable { n, grid, rows })
}

/// Space and time increments of a stationary table, plus the exact
/// telescoping residual max_m | log U_n(t_m) - log U_0(t_m) - sum_k r_k(t_m) |.
#[derive(Debug, Clone)]
pub struct BurkeIncrements {
    /// r[k-1][m] = r_k(t_m) = log U_k(t_m) - log U_{k-1}(t_m), k = 1..=n.
    pub r: Vec<Vec<f64>>,
    /// y[k-1][m] = Y_k(0, t_m) = theta t_m - log U_k(t_m) + log U_k(0).
    pub y: Vec<Vec<f64>>,
    pub max_telescoping_residual: f64,
}

pub fn burke_increments(table: &DPTable) -> Result<BurkeIncrements> {
    if table.kind != TableKind::Stationary {
        return Err(PartitionError::KindMismatch {
            expected: "stationary",
        });
    }
    let theta = table.theta.unwrap();
    let nodes = table.grid.nodes();
    let mut r = Vec::with_capacity(table.n);
    let mut y = Vec::with_capacity(table.n);
    for k in 1..=table.n {
        let cur = table.level(k);
        let prev = table.level(k - 1);
        r.push((0..nodes).map(|m| cur[m] - prev[m]).collect::<Vec<f64>>());
        y.push(
            (0..nodes)
                .map(|m| theta * table.grid.time(m) - cur[m] + cur[0])
                .collect::<Vec<f64>>(),
        );
    }
    let top = table.level(table.n);
    let base = table.level(0);
    let mut max_res: f64 = 0.0;
    for m in 0..nodes {
        let sum: f64 = r.iter().map(|rk| rk[m]).sum();
        max_res = max_res.max((top[m] - base[m] - sum).abs());
    }
    Ok(BurkeIncrements {
        r,
        y,
        max_telescoping_residual: max_res,
    })
}

/// Brownian scaling of the point-to-point model: simulating at inverse
/// temperature beta over horizon t is, in law, the beta = 1 model over
/// horizon beta^2 t plus a deterministic log offset.
#[derive(Debug, Clone, Copy)]
pub struct ScalingMap {
    pub n: u64,
    pub t_scaled: f64,
    pub beta_scaled: f64,
    pub log_offset: f64,
}

pub fn scaling_map(n: u64, t: f64, beta: f64) -> ScalingMap {
    ScalingMap {
        n,
        t_scaled: beta * beta * t,
        beta_scaled: 1.0,
        log_offset: -2.0 * (n as f64 - 1.0) * beta.ln(),
    }
}

/// Stationary counterpart: Z^{theta,beta}_{n,t} maps to
/// beta^{-2n} Z^{theta/beta}_{n, beta^2 t}.
#[derive(Debug, Clone, Copy)]
pub struct StationaryScalingMap {
    pub n: u64,
    pub t_scaled: f64,
    pub theta_scaled: f64,
    pub log_offset: f64,
}

pub fn stationary_scaling_map(n: u64, t: f64, theta: f64, beta: f64) -> StationaryScalingMap {
    StationaryScalingMap {
        n,
        t_scaled: beta * beta * t,
        theta_scaled: theta / beta,
        log_offset: -2.0 * n as f64 * beta.ln(),
    }
}

/// Which theta the critical-regime runs attach to beta: the scaled-model
/// convention theta = psi1_inv(beta^2) (the default used throughout), or the
/// alternative reading theta = psi1_inv(beta^2)/beta.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaConvention {
    ScaledInverse,
    UnscaledOverBeta,
}

/// A bounded initial-condition perturbation |phi| <= bound.
pub struct BoundedPhi<'a> {
    pub f: &'a (dyn Fn(f64) -> f64 + Sync),
    pub bound: f64,
}

impl BoundedPhi<'_> {
    fn eval(&self, x: f64) -> Result<f64> {
        let v = (self.f)(x);
        if !v.is_finite() || v.abs() > self.bound + 1e-12 {
            return Err(PartitionError::PhiBound {
                x,
                value: v,
                bound: self.bound,
            });
        }
        Ok(v)
    }
}

/// Renormalized critical-regime partition value and the phi = 0 companion
/// computed on the same environment (explicit-boundary path only).
#[derive(Debug, Clone, Copy)]
pub struct KpzValue {
    pub log_z: f64,
    /// Same-environment phi = 0 value; equals log_z when phi is absent.
    pub log_z_zero_phi: f64,
}

/// Parameters of the critical-regime (beta = n^{-1/4}) run.
#[derive(Debug, Clone, Copy)]
pub struct KpzParams {
    pub tau: f64,
    pub n: u64,
    pub delta: f64,
    pub convention: ThetaConvention,
    /// Relative mass budget for the truncated boundary integral.
    pub truncation_budget: f64,
}

impl KpzParams {
    pub fn new(tau: f64, n: u64, delta: f64) -> Self {
        KpzParams {
            tau,
            n,
            delta,
            convention: ThetaConvention::ScaledInverse,
            truncation_budget: 1e-8,
        }
    }

    pub fn beta(&self) -> f64 {
        (self.n as f64).powf(-0.25)
    }

    pub fn theta_scaled(&self) -> Result<f64> {
        let b = self.beta();
        let inv = special::psi1_inv(b * b)?;
        Ok(match self.convention {
            ThetaConvention::ScaledInverse => inv,
            ThetaConvention::UnscaledOverBeta => inv / b,
        })
    }

    /// Scaled level count and horizon.
    pub fn scaled_shape(&self) -> (usize, f64) {
        let n_scaled = (self.tau * self.n as f64).round().max(1.0) as usize;
        let b = self.beta();
        (n_scaled, n_scaled as f64 * b * b)
    }

    /// log offset from the renormalization plus the inverse-temperature
    /// prefactor: -tau sqrt(n)/2 - 2 n_scaled log beta.
    pub fn log_offset(&self) -> f64 {
        let (n_scaled, _) = self.scaled_shape();
        -0.5 * self.tau * (self.n as f64).sqrt() - 2.0 * n_scaled as f64 * self.beta().ln()
    }
}

/// log of the renormalized critical-regime partition value.
///
/// With phi absent this is the Burke-boundary stationary recursion (exact in
/// law); with phi present the boundary integral is truncated at depth T below
/// the time origin and realized on a shifted all-positive grid, which is
/// exact in law for the truncated integral. The phi = 0 companion value from
/// the same environment is returned alongside, and the e^{+-bound} sandwich
/// between them is enforced.
pub fn kpz_logz(
    params: &KpzParams,
    master_seed: u64,
    replica: u64,
    phi: Option<&BoundedPhi>,
) -> Result<KpzValue> {
    let (n_scaled, t_scaled) = params.scaled_shape();
    let theta = params.theta_scaled()?;
    match phi {
        None => {
            let grid = GridSpec::new(t_scaled, params.delta)?;
            let stream = EnvStream::new(grid, master_seed, replica);
            let mut rng = substream(master_seed, &[tag::BURKE_WEIGHTS, replica]);
            let boundary = sample_boundary(theta, n_scaled, &mut rng)?;
            let v = stationary_probes(&stream, &boundary, n_scaled, &[(n_scaled, grid.m_count)])?;
            let log_z = params.log_offset() + v[0];
            Ok(KpzValue {
                log_z,
                log_z_zero_phi: log_z,
            })
        }
        Some(phi) => {
            let k = phi.bound;
            // truncation depth: the boundary weight decays at drift rate
            // theta - 1/2 in expectation below the origin
            let rate = (theta - 0.5).max(0.5);
            let t_trunc_raw = (2.0 * k + (1.0 / params.truncation_budget).ln() + 10.0) / rate;
            let t_trunc = (t_trunc_raw / params.delta).ceil() * params.delta;
            let horizon = t_trunc + t_scaled;
            let grid = GridSpec::new(horizon, params.delta)?;
            let env = Environment::generate(n_scaled, grid, master_seed, replica)?;
            let backward = level_backward(&env, n_scaled)?;
            let v1 = backward.level(1);
            let b0 = env.level(0)?;
            let origin = grid.index_of(t_trunc)?;
            let mut acc_phi = LogTrapezoid::new();
            let mut acc_zero = LogTrapezoid::new();
            let mut first_chunk_phi = LogTrapezoid::new();
            let chunk_end = origin / 4;
            for j in 0..grid.nodes() {
                let base = -b0[j] + theta * grid.time(j) + v1[j];
                let pv = phi.eval(t_trunc - grid.time(j))?;
                let w = if j == 0 {
                    0.0
                } else {
                    grid.width(j - 1)
                };
                acc_phi.push(base + pv, w);
                acc_zero.push(base, w);
                if j <= chunk_end {
                    first_chunk_phi.push(base + pv, w);
                }
            }
            let total_phi = acc_phi.log_value();
            let total_zero = acc_zero.log_value();
            // a-posteriori truncation check: the deepest quarter of the
            // backward window must be negligible
            let fraction = (first_chunk_phi.log_value() - total_phi).exp();
            if !(fraction < params.truncation_budget.sqrt()) {
                return Err(PartitionError::TruncationBudget {
                    fraction,
                    budget: params.truncation_budget.sqrt(),
                });
            }
            let shift = b0[origin] - theta * t_trunc + params.log_offset();
            let log_z = shift + total_phi;
            let log_z_zero_phi = shift + total_zero;
            debug_assert!((log_z - log_z_zero_phi).abs() <= k + 1e-9);
            Ok(KpzValue {
                log_z,
                log_z_zero_phi,
            })
        }
    }
}
