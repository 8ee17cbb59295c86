//! Polymer path sampling by backward decomposition of the transfer tables,
//! plus the exact (grid-level) quenched sigma_0 decomposition used by the
//! variance identity.
//!
//! sigma_k denotes the jump time from level k to k+1. Point-to-point paths
//! carry sigma_1..sigma_{n-1}; stationary paths additionally resolve sigma_0
//! when the path enters the window from the boundary axis, or record the
//! entry level when it was already above level 0 at time zero.

use crate::environment::{Environment, GridSpec};
use crate::logdomain::log_add_exp;
use crate::partition::{BackwardTable, BoundaryWeights, DPTable, TableKind};
use crate::stats;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PathError {
    #[error("table kind mismatch: expected {expected}")]
    Kind { expected: &'static str },
    #[error("empty sampling support at level {level}, node {node}")]
    EmptySupport { level: usize, node: usize },
    #[error("gamma index {gamma_level} outside 1..{n}")]
    GammaRange { gamma_level: usize, n: usize },
    #[error("stationary table is missing its boundary weights")]
    MissingBoundary,
    #[error(transparent)]
    Partition(#[from] crate::partition::PartitionError),
    #[error(transparent)]
    Env(#[from] crate::environment::EnvError),
}

pub type Result<T> = std::result::Result<T, PathError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathEntry {
    /// Point-to-point: the path starts at level 1 at time 0.
    Origin,
    /// Stationary entry through the boundary axis at sigma_0 > 0.
    Positive { sigma0: f64 },
    /// Stationary pre-zero entry: the path already sits at `level` at time 0;
    /// sigma_0..sigma_{level-1} happened before the window and stay
    /// unresolved.
    Boundary { level: usize },
}

#[derive(Debug, Clone)]
pub struct PathSample {
    /// sigma[k] = grid time of the jump k -> k+1; None when unresolved
    /// (always None at k = 0 for point-to-point samples).
    pub sigma: Vec<Option<f64>>,
    pub entry: PathEntry,
    /// Log-probability of the emitted discrete path under the sampler's own
    /// chain; kept for self-tests.
    pub log_weight: f64,
}

impl PathSample {
    /// CSV rows "replica,k,grid_index,time" for the resolved jumps.
    pub fn csv_rows(&self, replica: u64, grid: &GridSpec) -> String {
        let mut out = String::new();
        for (k, s) in self.sigma.iter().enumerate() {
            if let Some(t) = s {
                let idx = grid.index_of(*t).expect("sampled times are grid times");
                out.push_str(&format!("{replica},{k},{idx},{t}\n"));
            }
        }
        out
    }
}

/// Cumulative weights of one categorical layer, in a rescaled linear frame.
struct PrefixArray {
    scale: f64,
    cum: Vec<f64>,
}

impl PrefixArray {
    fn build(log_w: impl Iterator<Item = f64> + Clone) -> Self {
        let scale = log_w
            .clone()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut cum = Vec::new();
        let mut acc = 0.0;
        if scale == f64::NEG_INFINITY {
            for _ in log_w {
                cum.push(0.0);
            }
            return PrefixArray { scale: 0.0, cum };
        }
        for g in log_w {
            acc += (g - scale).exp();
            cum.push(acc);
        }
        PrefixArray { scale, cum }
    }

    fn range_total(&self, lo: usize, hi: usize) -> f64 {
        let base = if lo == 0 { 0.0 } else { self.cum[lo - 1] };
        self.cum[hi] - base
    }

    /// Draw an index in [lo, hi] with the stored weights using one uniform.
    fn draw(&self, lo: usize, hi: usize, u: f64) -> Option<(usize, f64)> {
        let base = if lo == 0 { 0.0 } else { self.cum[lo - 1] };
        let total = self.cum[hi] - base;
        if !(total > 0.0) {
            return None;
        }
        let target = base + u * total;
        let j = self.cum[lo..=hi].partition_point(|&p| p <= target) + lo;
        let j = j.min(hi);
        let w = self.cum[j] - if j == 0 { 0.0 } else { self.cum[j - 1] };
        Some((j, (w / total).max(f64::MIN_POSITIVE).ln()))
    }
}

/// Reusable backward sampler over one table; prefix arrays are built once,
/// each draw then costs O(n log m).
pub struct PathSampler<'a> {
    table: &'a DPTable,
    /// arrays[k-1] holds the weights for drawing sigma_{k-1} into level k.
    arrays: Vec<PrefixArray>,
    /// log-atom weight per level (stationary only): log U_k(0).
    atoms: Option<Vec<f64>>,
    /// smallest node index the continuous part may use (1 for stationary).
    lo: usize,
}

impl<'a> PathSampler<'a> {
    pub fn new(table: &'a DPTable, env: &'a Environment) -> Result<Self> {
        let grid = table.grid;
        let n = table.n;
        let first = match table.kind {
            TableKind::PointToPoint => 2,
            TableKind::Stationary => 1,
        };
        let mut arrays = Vec::with_capacity(n + 1 - first);
        for k in first..=n {
            let prev = table.level(k - 1);
            let bk = env.level(k)?;
            arrays.push(PrefixArray::build(
                (0..grid.nodes()).map(|j| prev[j] - bk[j]),
            ));
        }
        let atoms = match table.kind {
            TableKind::PointToPoint => None,
            TableKind::Stationary => {
                let b = table.boundary().ok_or(PathError::MissingBoundary)?;
                Some((0..=n).map(|k| b.log_seed(k)).collect())
            }
        };
        Ok(PathSampler {
            table,
            arrays,
            atoms,
            lo: if first == 1 { 1 } else { 0 },
        })
    }

    fn array(&self, k: usize) -> &PrefixArray {
        let first = if self.atoms.is_some() { 1 } else { 2 };
        &self.arrays[k - first]
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PathSample> {
        let grid = self.table.grid;
        let n = self.table.n;
        let delta = grid.delta;
        let mut sigma = vec![None; n];
        let mut log_weight = 0.0;
        let mut node = grid.m_count;
        let mut entry = PathEntry::Origin;
        let last_level = if self.atoms.is_some() { 1 } else { 2 };
        for k in (last_level..=n).rev() {
            // sigma_{k-1} strictly below the current jump; the first draw may
            // land on the final node itself
            let hi = if k == n { node } else { node.saturating_sub(1) };
            let arr = self.array(k);
            let u: f64 = rng.gen();
            match &self.atoms {
                Some(atoms) => {
                    let cont = if hi >= self.lo {
                        arr.range_total(self.lo, hi)
                    } else {
                        0.0
                    };
                    // atom weight relative to the rescaled continuum frame
                    let log_cont = if cont > 0.0 {
                        arr.scale + (delta * cont).ln()
                    } else {
                        f64::NEG_INFINITY
                    };
                    let z = log_cont - atoms[k];
                    let p_atom = if z > 0.0 {
                        let e = (-z).exp();
                        e / (1.0 + e)
                    } else {
                        1.0 / (1.0 + z.exp())
                    };
                    if u < p_atom || cont == 0.0 {
                        entry = PathEntry::Boundary { level: k };
                        log_weight += p_atom.max(f64::MIN_POSITIVE).ln();
                        return Ok(PathSample {
                            sigma,
                            entry,
                            log_weight,
                        });
                    }
                    let u2 = (u - p_atom) / (1.0 - p_atom);
                    let (j, lw) = arr
                        .draw(self.lo, hi, u2.clamp(0.0, 1.0 - 1e-16))
                        .ok_or(PathError::EmptySupport { level: k, node })?;
                    log_weight += (1.0 - p_atom).ln() + lw;
                    sigma[k - 1] = Some(grid.time(j));
                    node = j;
                    if k == 1 {
                        entry = PathEntry::Positive {
                            sigma0: grid.time(j),
                        };
                    }
                }
                None => {
                    let (j, lw) = arr
                        .draw(0, hi, u)
                        .ok_or(PathError::EmptySupport { level: k, node })?;
                    log_weight += lw;
                    sigma[k - 1] = Some(grid.time(j));
                    node = j;
                }
            }
        }
        Ok(PathSample {
            sigma,
            entry,
            log_weight,
        })
    }
}

/// One quenched path from a point-to-point table.
pub fn sample_ptp_path<R: Rng + ?Sized>(
    table: &DPTable,
    env: &Environment,
    rng: &mut R,
) -> Result<PathSample> {
    if table.kind != TableKind::PointToPoint {
        return Err(PathError::Kind {
            expected: "point_to_point",
        });
    }
    if table.n == 1 {
        return Ok(PathSample {
            sigma: vec![None],
            entry: PathEntry::Origin,
            log_weight: 0.0,
        });
    }
    PathSampler::new(table, env)?.draw(rng)
}

/// One quenched path from a stationary table, entry included.
pub fn sample_stationary_path<R: Rng + ?Sized>(
    table: &DPTable,
    env: &Environment,
    rng: &mut R,
) -> Result<PathSample> {
    if table.kind != TableKind::Stationary {
        return Err(PathError::Kind {
            expected: "stationary",
        });
    }
    PathSampler::new(table, env)?.draw(rng)
}

/// Exact quenched decomposition of sigma_0 for one stationary realization:
/// the positive-axis density u_0(s) Z_{(1,n),(s,T)} against the pre-zero
/// entry atoms seed_k Z_{(k,n),(0,T)}.
pub struct Sigma0Decomposition {
    grid: GridSpec,
    scale: f64,
    /// cum[j] = sum_{i<=j} w_i exp(c_i - scale), trapezoid node weights w_i.
    cum: Vec<f64>,
    /// same but time-weighted: sum w_i t_i exp(c_i - scale).
    cum_t: Vec<f64>,
    /// log(seed_k * V_k(0)) for k = 1..=n.
    log_entries: Vec<f64>,
    log_total: f64,
}

impl Sigma0Decomposition {
    pub fn new(env: &Environment, boundary: &BoundaryWeights, n: usize) -> Result<Self> {
        let backward = crate::partition::level_backward(env, n)?;
        Self::with_backward(env, boundary, &backward)
    }

    pub fn with_backward(
        env: &Environment,
        boundary: &BoundaryWeights,
        backward: &BackwardTable,
    ) -> Result<Self> {
        let n = backward.n;
        let grid = backward.grid;
        let theta = boundary.theta;
        let b0 = env.level(0)?;
        let v1 = backward.level(1);
        let c: Vec<f64> = (0..grid.nodes())
            .map(|j| -b0[j] + theta * grid.time(j) + v1[j])
            .collect();
        let scale = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut cum = Vec::with_capacity(grid.nodes());
        let mut cum_t = Vec::with_capacity(grid.nodes());
        let (mut acc, mut acc_t) = (0.0, 0.0);
        for j in 0..grid.nodes() {
            let w = node_weight(&grid, j);
            let e = w * (c[j] - scale).exp();
            acc += e;
            acc_t += e * grid.time(j);
            cum.push(acc);
            cum_t.push(acc_t);
        }
        let log_entries: Vec<f64> = (1..=n)
            .map(|k| boundary.log_seed(k) + backward.level(k)[0])
            .collect();
        let mut log_total = scale + acc.ln();
        for le in &log_entries {
            log_total = log_add_exp(log_total, *le);
        }
        Ok(Sigma0Decomposition {
            grid,
            scale,
            cum,
            cum_t,
            log_entries,
            log_total,
        })
    }

    /// Q(sigma_0 >= u); exact given the grid, no sampling.
    pub fn tail(&self, u: f64) -> f64 {
        if u > self.grid.t_max {
            return 0.0;
        }
        let start = if u <= 0.0 {
            0
        } else {
            // first node with time >= u
            let m = (u / self.grid.delta).ceil() as usize;
            m.min(self.grid.m_count)
        };
        let base = if start == 0 { 0.0 } else { self.cum[start - 1] };
        let mass = self.cum[self.grid.m_count] - base;
        if mass <= 0.0 {
            return 0.0;
        }
        ((self.scale + mass.ln()) - self.log_total).exp()
    }

    /// Q(sigma_0 > 0), the continuous share of the decomposition.
    pub fn p_positive(&self) -> f64 {
        self.tail(0.0)
    }

    /// Quenched E[sigma_0^+].
    pub fn mean_sigma0_plus(&self) -> f64 {
        let m = self.cum_t[self.grid.m_count];
        if m <= 0.0 {
            return 0.0;
        }
        ((self.scale + m.ln()) - self.log_total).exp()
    }

    /// Probabilities of the pre-zero entry levels 1..=n.
    pub fn entry_probs(&self) -> Vec<f64> {
        self.log_entries
            .iter()
            .map(|le| (le - self.log_total).exp())
            .collect()
    }
}

fn node_weight(grid: &GridSpec, j: usize) -> f64 {
    let m = grid.m_count;
    if m == 0 {
        return 0.0;
    }
    if j == 0 {
        0.5 * grid.width(0)
    } else if j == m {
        0.5 * grid.width(m - 1)
    } else {
        0.5 * (grid.width(j - 1) + grid.width(j))
    }
}

/// Exact quenched probability Q^theta(sigma_0 >= u) from one realization.
pub fn quenched_sigma0_tail(
    table: &DPTable,
    boundary: &BoundaryWeights,
    env: &Environment,
    u: f64,
) -> Result<f64> {
    if table.kind != TableKind::Stationary {
        return Err(PathError::Kind {
            expected: "stationary",
        });
    }
    Ok(Sigma0Decomposition::new(env, boundary, table.n)?.tail(u))
}

/// Exact quenched marginal of sigma_level over grid nodes, with the lumped
/// probability that the jump happened at or before time zero (stationary
/// tables only; zero for point-to-point).
pub struct SigmaMarginal {
    pub probs: Vec<f64>,
    pub p_nonpositive: f64,
}

impl SigmaMarginal {
    pub fn quenched_mean_abs_dev(&self, grid: &GridSpec, center: f64) -> f64 {
        let mut acc = self.p_nonpositive * center; // deviation floor for the pre-zero lump
        for (j, p) in self.probs.iter().enumerate() {
            acc += p * (grid.time(j) - center).abs();
        }
        acc
    }

    pub fn quenched_tail(&self, grid: &GridSpec, center: f64, radius: f64) -> f64 {
        let mut acc = if center > radius { self.p_nonpositive } else { 0.0 };
        for (j, p) in self.probs.iter().enumerate() {
            if (grid.time(j) - center).abs() > radius {
                acc += p;
            }
        }
        acc
    }
}

pub fn sigma_marginal(
    table: &DPTable,
    backward: &BackwardTable,
    env: &Environment,
    level: usize,
) -> Result<SigmaMarginal> {
    let n = table.n;
    if level == 0 || level >= n {
        return Err(PathError::GammaRange {
            gamma_level: level,
            n,
        });
    }
    let grid = table.grid;
    let fwd = table.level(level);
    let bwd = backward.level(level + 1);
    let c: Vec<f64> = (0..grid.nodes()).map(|j| fwd[j] + bwd[j]).collect();
    let scale = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = (0..grid.nodes())
        .map(|j| node_weight(&grid, j) * (c[j] - scale).exp())
        .collect();
    let mut lump = 0.0;
    if table.kind == TableKind::Stationary {
        let boundary = table.boundary().ok_or(PathError::MissingBoundary)?;
        for k in (level + 1)..=n {
            lump += (boundary.log_seed(k) + backward.level(k)[0] - scale).exp();
        }
        // positive-axis weights for a stationary marginal exclude node 0
        weights[0] = 0.0;
    }
    let total: f64 = weights.iter().sum::<f64>() + lump;
    let _ = env;
    if !(total > 0.0) {
        return Err(PathError::EmptySupport {
            level,
            node: grid.m_count,
        });
    }
    for w in &mut weights {
        *w /= total;
    }
    Ok(SigmaMarginal {
        probs: weights,
        p_nonpositive: lump / total,
    })
}

/// Sampled summary of |sigma_{floor(gamma n)} - gamma t_max|.
#[derive(Debug, Clone)]
pub struct DeviationSummary {
    pub gamma_level: usize,
    pub center: f64,
    pub deviations: Vec<f64>,
    pub mean_abs: f64,
    pub se_mean: f64,
    /// Samples whose jump stayed unresolved (pre-zero entry above the
    /// gamma level); their deviation is recorded at the floor gamma * t.
    pub unresolved: usize,
}

pub fn sigma_bulk_deviation<R: Rng + ?Sized>(
    table: &DPTable,
    env: &Environment,
    gamma: f64,
    rng: &mut R,
    samples: usize,
) -> Result<DeviationSummary> {
    let n = table.n;
    let gamma_level = (gamma * n as f64).floor() as usize;
    if gamma_level < 1 || gamma_level >= n {
        return Err(PathError::GammaRange { gamma_level, n });
    }
    let center = gamma * table.grid.t_max;
    let sampler = PathSampler::new(table, env)?;
    let mut deviations = Vec::with_capacity(samples);
    let mut unresolved = 0usize;
    for _ in 0..samples {
        let path = sampler.draw(rng)?;
        match path.sigma[gamma_level] {
            Some(t) => deviations.push((t - center).abs()),
            None => {
                unresolved += 1;
                deviations.push(center);
            }
        }
    }
    let s = stats::summarize(&deviations);
    Ok(DeviationSummary {
        gamma_level,
        center,
        mean_abs: s.mean,
        se_mean: s.se_mean,
        deviations,
        unresolved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{
        level_backward, ptp_forward, sample_boundary, stationary_forward, BoundaryWeights,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn n1_path_is_empty() {
        let grid = GridSpec::new(1.0, 0.1).unwrap();
        let env = Environment::generate(1, grid, 1, 0).unwrap();
        let table = ptp_forward(&env, 1).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let p = sample_ptp_path(&table, &env, &mut rng).unwrap();
        assert_eq!(p.sigma, vec![None]);
        assert_eq!(p.entry, PathEntry::Origin);
    }

    #[test]
    fn zero_env_two_levels_sigma_uniform() {
        // with B == 0 the density of sigma_1 is flat across nodes
        let grid = GridSpec::new(1.0, 5e-4).unwrap();
        let env = Environment::zero(2, grid);
        let table = ptp_forward(&env, 2).unwrap();
        let sampler = PathSampler::new(&table, &env).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let bins = 20usize;
        let nodes = grid.nodes();
        let mut counts = vec![0usize; bins];
        let mut expected = vec![0.0f64; bins];
        for j in 0..nodes {
            expected[j * bins / nodes] += 1.0 / nodes as f64;
        }
        for _ in 0..10_000 {
            let p = sampler.draw(&mut rng).unwrap();
            let idx = grid.index_of(p.sigma[1].unwrap()).unwrap();
            counts[idx * bins / nodes] += 1;
        }
        let p = stats::chi_square_p(&counts, &expected);
        assert!(p > 1e-3, "chi-square p = {p}");
    }

    /// Exhaustive enumeration of the sampler's own chain for small grids.
    fn enumerate_ptp_joint(table: &DPTable, env: &Environment) -> Vec<Vec<f64>> {
        let grid = table.grid;
        let nodes = grid.nodes();
        assert_eq!(table.n, 3);
        let a3: Vec<f64> = {
            let prev = table.level(2);
            let b = env.level(3).unwrap();
            (0..nodes).map(|j| prev[j] - b[j]).collect()
        };
        let a2: Vec<f64> = {
            let prev = table.level(1);
            let b = env.level(2).unwrap();
            (0..nodes).map(|j| prev[j] - b[j]).collect()
        };
        let top_scale = a3.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let top_w: Vec<f64> = a3.iter().map(|v| (v - top_scale).exp()).collect();
        let top_total: f64 = top_w.iter().sum();
        let mut joint = vec![vec![0.0; nodes]; nodes]; // [sigma1][sigma2]
        for j2 in 1..nodes {
            let p2 = top_w[j2] / top_total;
            let scale = a2[..j2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = a2[..j2].iter().map(|v| (v - scale).exp()).collect();
            let tot: f64 = w.iter().sum();
            for j1 in 0..j2 {
                joint[j1][j2] = p2 * w[j1] / tot;
            }
        }
        joint
    }

    #[test]
    fn sampler_matches_enumeration_oracle() {
        let grid = GridSpec::new(0.8, 0.02).unwrap(); // 40 cells
        let env = Environment::generate(3, grid, 2024, 0).unwrap();
        let table = ptp_forward(&env, 3).unwrap();
        let joint = enumerate_ptp_joint(&table, &env);
        let nodes = grid.nodes();
        let marginal1: Vec<f64> = (0..nodes)
            .map(|j1| joint[j1].iter().sum::<f64>())
            .collect();

        let sampler = PathSampler::new(&table, &env).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let draws = 100_000usize;
        let mut emp1 = vec![0.0f64; nodes];
        let mut emp_joint = vec![vec![0.0f64; nodes]; nodes];
        for _ in 0..draws {
            let p = sampler.draw(&mut rng).unwrap();
            let j1 = grid.index_of(p.sigma[1].unwrap()).unwrap();
            let j2 = grid.index_of(p.sigma[2].unwrap()).unwrap();
            assert!(j1 < j2, "strict ordering violated");
            emp1[j1] += 1.0 / draws as f64;
            emp_joint[j1][j2] += 1.0 / draws as f64;
        }
        let tv1: f64 = (0..nodes)
            .map(|j| (emp1[j] - marginal1[j]).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv1 < 0.02, "marginal TV {tv1}");
        let tvj: f64 = (0..nodes)
            .map(|a| {
                (0..nodes)
                    .map(|b| (emp_joint[a][b] - joint[a][b]).abs())
                    .sum::<f64>()
            })
            .sum::<f64>()
            / 2.0;
        assert!(tvj < 0.05, "joint TV {tvj}");
    }

    #[test]
    fn stationary_entry_split_matches_decomposition() {
        let grid = GridSpec::new(3.0, 0.01).unwrap();
        let env = Environment::generate(3, grid, 5, 0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let boundary = sample_boundary(1.0, 3, &mut rng).unwrap();
        let table = stationary_forward(&env, &boundary, 3).unwrap();
        let dec = Sigma0Decomposition::new(&env, &boundary, 3).unwrap();
        let p_pos = dec.p_positive();
        let entries = dec.entry_probs();
        // normalization is exact by construction
        let total = p_pos + entries.iter().sum::<f64>();
        assert!((total - 1.0).abs() < 1e-12, "total {total}");

        let sampler = PathSampler::new(&table, &env).unwrap();
        let draws = 10_000usize;
        let mut pos = 0usize;
        for _ in 0..draws {
            let p = sampler.draw(&mut rng).unwrap();
            if matches!(p.entry, PathEntry::Positive { .. }) {
                pos += 1;
            }
            // ordering among resolved jumps
            let times: Vec<f64> = p.sigma.iter().flatten().copied().collect();
            for w in times.windows(2) {
                assert!(w[0] < w[1]);
            }
        }
        let freq = pos as f64 / draws as f64;
        let se = (p_pos * (1.0 - p_pos) / draws as f64).sqrt();
        assert!(
            (freq - p_pos).abs() < 4.0 * se + 0.01,
            "freq {freq} vs {p_pos}"
        );
    }

    #[test]
    fn zero_env_stationary_entry_probability() {
        // B == 0, r0 == 0, theta = 0, n = 2, t = 1: total = 2.5 and the
        // level-2 entry atom has weight 1/0! = 1 -> probability 0.4
        let grid = GridSpec::new(1.0, 1e-3).unwrap();
        let env = Environment::zero(2, grid);
        let boundary = BoundaryWeights::from_r0(0.0, vec![0.0, 0.0]);
        let table = stationary_forward(&env, &boundary, 2).unwrap();
        let dec = Sigma0Decomposition::new(&env, &boundary, 2).unwrap();
        let entries = dec.entry_probs();
        assert!((entries[1] - 0.4).abs() < 5e-3, "entry {entries:?}");

        let sampler = PathSampler::new(&table, &env).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let draws = 10_000usize;
        let mut lvl2 = 0usize;
        for _ in 0..draws {
            if matches!(
                sampler.draw(&mut rng).unwrap().entry,
                PathEntry::Boundary { level: 2 }
            ) {
                lvl2 += 1;
            }
        }
        let freq = lvl2 as f64 / draws as f64;
        let se = (0.4f64 * 0.6 / draws as f64).sqrt();
        assert!((freq - 0.4).abs() < 4.0 * se + 5e-3, "freq {freq}");
    }

    #[test]
    fn sigma0_tail_edges() {
        let grid = GridSpec::new(2.0, 0.01).unwrap();
        let env = Environment::generate(2, grid, 8, 0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let boundary = sample_boundary(1.5, 2, &mut rng).unwrap();
        let table = stationary_forward(&env, &boundary, 2).unwrap();
        let t0 = quenched_sigma0_tail(&table, &boundary, &env, 0.0).unwrap();
        let dec = Sigma0Decomposition::new(&env, &boundary, 2).unwrap();
        assert_eq!(t0, dec.p_positive());
        assert_eq!(
            quenched_sigma0_tail(&table, &boundary, &env, 2.0 + 0.01).unwrap(),
            0.0
        );
        // monotone in u
        let mut prev = t0;
        for i in 1..10 {
            let u = i as f64 * 0.2;
            let v = quenched_sigma0_tail(&table, &boundary, &env, u).unwrap();
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn zero_env_deviation_analytic() {
        // uniform sigma_1 on [0,1]: E|sigma_1 - 1/2| = 1/4
        let grid = GridSpec::new(1.0, 1e-3).unwrap();
        let env = Environment::zero(2, grid);
        let table = ptp_forward(&env, 2).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let d = sigma_bulk_deviation(&table, &env, 0.5, &mut rng, 20_000).unwrap();
        assert_eq!(d.gamma_level, 1);
        assert!((d.mean_abs - 0.25).abs() < 4.0 * d.se_mean + 1e-3);
    }

    #[test]
    fn quenched_marginal_consistency_with_sampling() {
        let grid = GridSpec::new(2.0, 0.02).unwrap();
        let env = Environment::generate(3, grid, 77, 0).unwrap();
        let table = ptp_forward(&env, 3).unwrap();
        let backward = level_backward(&env, 3).unwrap();
        let marg = sigma_marginal(&table, &backward, &env, 1).unwrap();
        assert!((marg.probs.iter().sum::<f64>() + marg.p_nonpositive - 1.0).abs() < 1e-12);
        let sampler = PathSampler::new(&table, &env).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let draws = 50_000usize;
        let mut emp = vec![0.0; grid.nodes()];
        for _ in 0..draws {
            let p = sampler.draw(&mut rng).unwrap();
            emp[grid.index_of(p.sigma[1].unwrap()).unwrap()] += 1.0 / draws as f64;
        }
        let tv: f64 = emp
            .iter()
            .zip(&marg.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 2.0;
        // the sampler uses flat-delta node weights, the marginal trapezoid
        // ones; they agree up to O(delta) boundary terms
        assert!(tv < 0.03, "TV {tv}");
    }

    #[test]
    fn shift_invariance_of_quenched_probabilities() {
        // adding a constant to every level leaves Gibbs ratios unchanged up
        // to floating-point reassociation
        let grid = GridSpec::new(1.0, 0.02).unwrap();
        let env = Environment::generate(3, grid, 31, 0).unwrap();
        let mut shifted = env.clone();
        shifted.shift_levels_for_test(64.0);
        let t1 = ptp_forward(&env, 3).unwrap();
        let t2 = ptp_forward(&shifted, 3).unwrap();
        let b1 = level_backward(&env, 3).unwrap();
        let b2 = level_backward(&shifted, 3).unwrap();
        let m1 = sigma_marginal(&t1, &b1, &env, 1).unwrap();
        let m2 = sigma_marginal(&t2, &b2, &shifted, 1).unwrap();
        for (a, b) in m1.probs.iter().zip(&m2.probs) {
            assert!((a - b).abs() < 1e-10 * b.max(1e-30) + 1e-13);
        }
    }

    #[test]
    fn csv_rows_shape() {
        let grid = GridSpec::new(1.0, 0.25).unwrap();
        let env = Environment::generate(2, grid, 3, 0).unwrap();
        let table = ptp_forward(&env, 2).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let p = sample_ptp_path(&table, &env, &mut rng).unwrap();
        let rows = p.csv_rows(7, &grid);
        assert!(rows.starts_with("7,1,"));
        assert_eq!(rows.lines().count(), 1);
    }
}
