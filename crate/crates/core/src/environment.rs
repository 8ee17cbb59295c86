//! Discretized Brownian driving noise: the boundary motion B (level 0) and
//! the level motions B_1..B_n, stored as prefix arrays on a uniform time
//! grid so that any increment B_k(s, t) is one subtraction.

use crate::streams::{substream, tag};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("environment of {levels} levels x {nodes} nodes exceeds memory budget of {budget} bytes")]
    Budget {
        levels: usize,
        nodes: usize,
        budget: usize,
    },
    #[error("level {0} out of range (environment has levels 0..={1})")]
    Level(usize, usize),
    #[error("time {0} is not a grid node (no silent interpolation)")]
    OffGrid(f64),
    #[error("subsampling by {step} requires cell count divisible by it (have {cells})")]
    Subsample { step: usize, cells: usize },
    #[error("dump/load: {0}")]
    Io(#[from] std::io::Error),
    #[error("dump/load: malformed environment file ({0})")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, EnvError>;

/// Default cap on one environment's prefix storage.
pub const DEFAULT_MEMORY_BUDGET: usize = 4 << 30;

/// Uniform time grid on [0, t_max], optionally extended to [-t_neg, 0] for
/// the boundary motion only. Node m sits at m * delta, except the last node
/// which is clamped to t_max exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub t_max: f64,
    pub delta: f64,
    /// Number of cells; node count is m_count + 1.
    pub m_count: usize,
    /// Backward extension horizon for the boundary motion (0 disables it).
    pub t_neg: f64,
}

impl GridSpec {
    pub fn new(t_max: f64, delta: f64) -> Result<Self> {
        Self::with_negative(t_max, delta, 0.0)
    }

    pub fn with_negative(t_max: f64, delta: f64, t_neg: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(EnvError::Grid(format!("delta {delta} must be positive")));
        }
        if !(t_max >= 0.0) || !t_max.is_finite() {
            return Err(EnvError::Grid(format!("t_max {t_max} must be >= 0")));
        }
        if !(t_neg >= 0.0) || !t_neg.is_finite() {
            return Err(EnvError::Grid(format!("t_neg {t_neg} must be >= 0")));
        }
        let ratio = t_max / delta;
        // snap to an integer cell count when t_max is an exact multiple
        let m_count = if (ratio - ratio.round()).abs() < 1e-9 * ratio.max(1.0) {
            ratio.round() as usize
        } else {
            ratio.ceil() as usize
        };
        Ok(GridSpec {
            t_max,
            delta,
            m_count,
            t_neg,
        })
    }

    /// Default step policy: the boundary weight e^{theta s} and the level
    /// integrands vary on scale 1/theta^2, so the step tracks it.
    pub fn auto_delta(theta: f64) -> f64 {
        (0.1 / (theta * theta)).min(0.02)
    }

    pub fn nodes(&self) -> usize {
        self.m_count + 1
    }

    pub fn neg_cells(&self) -> usize {
        if self.t_neg > 0.0 {
            (self.t_neg / self.delta).ceil() as usize
        } else {
            0
        }
    }

    /// Time of node m; the last node equals t_max exactly.
    pub fn time(&self, m: usize) -> f64 {
        debug_assert!(m <= self.m_count);
        if m == self.m_count {
            self.t_max
        } else {
            m as f64 * self.delta
        }
    }

    /// Width of cell m (between nodes m and m+1); only the final cell can be
    /// shorter than delta.
    pub fn width(&self, m: usize) -> f64 {
        debug_assert!(m < self.m_count);
        self.time(m + 1) - self.time(m)
    }

    /// Node index of an exact grid time, or an error.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        if (t - self.t_max).abs() <= 1e-9 * self.delta {
            return Ok(self.m_count);
        }
        let m = (t / self.delta).round();
        if m < 0.0 || m > self.m_count as f64 || (t - m * self.delta).abs() > 1e-9 * self.delta {
            return Err(EnvError::OffGrid(t));
        }
        Ok(m as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SeedInfo {
    pub master_seed: u64,
    pub replica: u64,
}

/// Brownian environment realized on a grid. `levels[k][m] = B_k(t_m)` with
/// `levels[0]` the boundary motion; every path starts at 0.
#[derive(Debug, Clone)]
pub struct Environment {
    pub grid: GridSpec,
    levels: Vec<Vec<f64>>,
    /// B(-i * delta) for i = 0..=neg_cells; empty when t_neg == 0.
    boundary_neg: Vec<f64>,
    pub seed_info: SeedInfo,
}

/// Fill one level's prefix array from its dedicated stream.
fn fill_level(master_seed: u64, replica: u64, level: u64, grid: &GridSpec, out: &mut Vec<f64>) {
    let mut rng = substream(master_seed, &[tag::LEVEL, replica, level]);
    out.clear();
    out.reserve(grid.nodes());
    out.push(0.0);
    let mut acc = 0.0;
    for m in 0..grid.m_count {
        let z: f64 = rng.sample(StandardNormal);
        acc += z * grid.width(m).sqrt();
        out.push(acc);
    }
}

impl Environment {
    /// Deterministic function of (master_seed, replica, n, grid); distinct
    /// replica indices give independent environments.
    pub fn generate(n: usize, grid: GridSpec, master_seed: u64, replica: u64) -> Result<Self> {
        Self::generate_with_budget(n, grid, master_seed, replica, DEFAULT_MEMORY_BUDGET)
    }

    pub fn generate_with_budget(
        n: usize,
        grid: GridSpec,
        master_seed: u64,
        replica: u64,
        budget: usize,
    ) -> Result<Self> {
        let bytes = (n + 1)
            .saturating_mul(grid.nodes() + grid.neg_cells() + 1)
            .saturating_mul(8);
        if bytes > budget {
            return Err(EnvError::Budget {
                levels: n + 1,
                nodes: grid.nodes(),
                budget,
            });
        }
        let mut levels = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let mut row = Vec::new();
            fill_level(master_seed, replica, k as u64, &grid, &mut row);
            levels.push(row);
        }
        let mut boundary_neg = Vec::new();
        if grid.neg_cells() > 0 {
            // Backward extension of the boundary motion, from its own
            // substream so t_neg = 0 runs never touch it.
            let mut rng = substream(master_seed, &[tag::BOUNDARY_NEG, replica]);
            boundary_neg.push(0.0);
            let mut acc = 0.0;
            for _ in 0..grid.neg_cells() {
                let z: f64 = rng.sample(StandardNormal);
                acc += z * grid.delta.sqrt();
                boundary_neg.push(acc);
            }
        }
        Ok(Environment {
            grid,
            levels,
            boundary_neg,
            seed_info: SeedInfo {
                master_seed,
                replica,
            },
        })
    }

    /// All prefix sums identically zero; deterministic test fixture.
    pub fn zero(n: usize, grid: GridSpec) -> Self {
        let levels = vec![vec![0.0; grid.nodes()]; n + 1];
        let boundary_neg = if grid.neg_cells() > 0 {
            vec![0.0; grid.neg_cells() + 1]
        } else {
            Vec::new()
        };
        Environment {
            grid,
            levels,
            boundary_neg,
            seed_info: SeedInfo {
                master_seed: 0,
                replica: u64::MAX,
            },
        }
    }

    pub fn level_count(&self) -> usize {
        self.levels.len() - 1
    }

    /// Prefix array of level k over [0, t_max].
    pub fn level(&self, k: usize) -> Result<&[f64]> {
        self.levels
            .get(k)
            .map(|v| v.as_slice())
            .ok_or(EnvError::Level(k, self.levels.len() - 1))
    }

    /// B(-i * delta) for the boundary motion's backward extension.
    pub fn boundary_neg(&self) -> &[f64] {
        &self.boundary_neg
    }

    /// Increment B_k(s, t) = B_k(t) - B_k(s) for exact grid times s <= t.
    pub fn increment(&self, k: usize, s: f64, t: f64) -> Result<f64> {
        let row = self.level(k)?;
        let (i, j) = (self.grid.index_of(s)?, self.grid.index_of(t)?);
        Ok(row[j] - row[i])
    }

    /// Add a constant to every level motion (not the boundary). Breaks the
    /// B_k(0) = 0 convention on purpose: quenched probabilities must not
    /// move, since only increments carry Gibbs weight.
    #[doc(hidden)]
    pub fn shift_levels_for_test(&mut self, c: f64) {
        for row in self.levels.iter_mut().skip(1) {
            for v in row.iter_mut() {
                *v += c;
            }
        }
    }

    /// Coarsen by an integer factor, keeping every step-th node of the same
    /// realization. Used by the two-grid discretization checks.
    pub fn subsample(&self, step: usize) -> Result<Environment> {
        if step == 0 || self.grid.m_count % step != 0 {
            return Err(EnvError::Subsample {
                step,
                cells: self.grid.m_count,
            });
        }
        let grid = GridSpec {
            t_max: self.grid.t_max,
            delta: self.grid.delta * step as f64,
            m_count: self.grid.m_count / step,
            t_neg: 0.0,
        };
        let levels = self
            .levels
            .iter()
            .map(|row| row.iter().step_by(step).copied().collect())
            .collect();
        Ok(Environment {
            grid,
            levels,
            boundary_neg: Vec::new(),
            seed_info: self.seed_info,
        })
    }

    /// Binary dump. Little-endian layout: magic "BPENV1\0\0", then u64 n,
    /// u64 m_count, f64 delta, f64 t_neg, u64 master_seed, u64 replica, then
    /// (n+1) level-major prefix rows of (m_count+1) f64 each, then the
    /// backward boundary row (neg_cells+1 f64) when t_neg > 0.
    pub fn dump<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(b"BPENV1\0\0")?;
        w.write_all(&(self.level_count() as u64).to_le_bytes())?;
        w.write_all(&(self.grid.m_count as u64).to_le_bytes())?;
        w.write_all(&self.grid.delta.to_le_bytes())?;
        w.write_all(&self.grid.t_neg.to_le_bytes())?;
        w.write_all(&self.seed_info.master_seed.to_le_bytes())?;
        w.write_all(&self.seed_info.replica.to_le_bytes())?;
        for row in &self.levels {
            for v in row {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        for v in &self.boundary_neg {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load<R: std::io::Read>(r: &mut R) -> Result<Environment> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != b"BPENV1\0\0" {
            return Err(EnvError::Format("bad magic".into()));
        }
        let mut u = [0u8; 8];
        let mut next_u64 = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut u)?;
            Ok(u64::from_le_bytes(u))
        };
        let n = next_u64(r)? as usize;
        let m_count = next_u64(r)? as usize;
        let mut f = [0u8; 8];
        let mut next_f64 = |r: &mut R| -> Result<f64> {
            r.read_exact(&mut f)?;
            Ok(f64::from_le_bytes(f))
        };
        let delta = next_f64(r)?;
        let t_neg = next_f64(r)?;
        let master_seed = {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            u64::from_le_bytes(b)
        };
        let replica = {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            u64::from_le_bytes(b)
        };
        if !(delta > 0.0) || m_count == 0 && delta <= 0.0 {
            return Err(EnvError::Format("bad grid header".into()));
        }
        let grid = GridSpec {
            t_max: m_count as f64 * delta,
            delta,
            m_count,
            t_neg,
        };
        let read_row = |r: &mut R, len: usize| -> Result<Vec<f64>> {
            let mut row = Vec::with_capacity(len);
            let mut b = [0u8; 8];
            for _ in 0..len {
                r.read_exact(&mut b)?;
                row.push(f64::from_le_bytes(b));
            }
            Ok(row)
        };
        let mut levels = Vec::with_capacity(n + 1);
        for _ in 0..=n {
            levels.push(read_row(r, grid.nodes())?);
        }
        let boundary_neg = if grid.neg_cells() > 0 {
            read_row(r, grid.neg_cells() + 1)?
        } else {
            Vec::new()
        };
        Ok(Environment {
            grid,
            levels,
            boundary_neg,
            seed_info: SeedInfo {
                master_seed,
                replica,
            },
        })
    }
}

/// Lazily generated environment for sweeps too large to materialize: level
/// rows are produced on demand, bit-identical to `Environment::generate`.
pub struct EnvStream {
    pub grid: GridSpec,
    master_seed: u64,
    replica: u64,
    zero: bool,
}

impl EnvStream {
    pub fn new(grid: GridSpec, master_seed: u64, replica: u64) -> Self {
        EnvStream {
            grid,
            master_seed,
            replica,
            zero: false,
        }
    }

    pub fn zero(grid: GridSpec) -> Self {
        EnvStream {
            grid,
            master_seed: 0,
            replica: u64::MAX,
            zero: true,
        }
    }

    pub fn level_into(&self, k: usize, out: &mut Vec<f64>) {
        if self.zero {
            out.clear();
            out.resize(self.grid.nodes(), 0.0);
        } else {
            fill_level(self.master_seed, self.replica, k as u64, &self.grid, out);
        }
    }
}
