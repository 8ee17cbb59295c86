//! Log-domain accumulation primitives for the transfer recursions.
//!
//! The hot path keeps a rescaled linear sum (mantissa plus log-scale) rather
//! than chaining log-add-exp calls: one exp on the way in and one ln on the
//! way out per grid cell.

/// log(e^a + e^b), tolerant of -inf on either side.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Streaming trapezoid integral of exp(g(s)) ds along a grid, in the log
/// domain. `push` appends one node; the running value is
/// log( sum_cells (w/2)(e^{g_left} + e^{g_right}) ), which is nondecreasing
/// by construction since every cell contributes a nonnegative area.
#[derive(Debug, Clone)]
pub struct LogTrapezoid {
    /// Current log scale M.
    scale: f64,
    /// Sum of cell areas, each divided by e^M. Zero while no cell is closed.
    sum: f64,
    /// exp(g_prev - M) for the most recent node.
    prev: f64,
    started: bool,
}

/// Rescale once the incoming log value exceeds the scale by this much.
const RESCALE_AT: f64 = 40.0;

impl LogTrapezoid {
    pub fn new() -> Self {
        LogTrapezoid {
            scale: f64::NEG_INFINITY,
            sum: 0.0,
            prev: 0.0,
            started: false,
        }
    }

    #[inline]
    fn rescale(&mut self, new_scale: f64) {
        let f = (self.scale - new_scale).exp();
        self.sum *= f;
        self.prev *= f;
        self.scale = new_scale;
    }

    /// Append the integrand log-value at the next node; `width` is the cell
    /// between the previous node and this one (ignored for the first node).
    #[inline]
    pub fn push(&mut self, g: f64, width: f64) {
        if !self.started {
            self.started = true;
            if g == f64::NEG_INFINITY {
                // keep scale unset until a finite value arrives
                self.prev = 0.0;
            } else {
                self.scale = g;
                self.prev = 1.0;
            }
            return;
        }
        if g > self.scale + RESCALE_AT {
            if self.scale == f64::NEG_INFINITY {
                self.scale = g;
            } else {
                self.rescale(g);
            }
        } else if self.sum > 1e280 {
            let s = self.scale + self.sum.ln();
            self.rescale(s);
        }
        let e = if g == f64::NEG_INFINITY {
            0.0
        } else {
            (g - self.scale).exp()
        };
        let before = self.sum;
        self.sum += 0.5 * width * (self.prev + e);
        debug_assert!(self.sum >= before);
        self.prev = e;
    }

    /// log of the accumulated integral; -inf while empty.
    #[inline]
    pub fn log_value(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.scale + self.sum.ln()
        }
    }

    /// log(seed + integral) for a nonnegative seed given in log form.
    #[inline]
    pub fn log_value_plus(&self, log_seed: f64) -> f64 {
        if log_seed == f64::NEG_INFINITY {
            return self.log_value();
        }
        if self.sum == 0.0 || log_seed > self.scale + RESCALE_AT {
            return log_add_exp(log_seed, self.log_value());
        }
        self.scale + (self.sum + (log_seed - self.scale).exp()).ln()
    }
}

impl Default for LogTrapezoid {
    fn default() -> Self {
        Self::new()
    }
}

/// Neumaier-compensated direct log-sum of trapezoid cell areas; the
/// high-precision reference the streaming accumulator is checked against.
pub fn trapezoid_log_reference(g: &[f64], widths: &[f64]) -> f64 {
    assert_eq!(widths.len() + 1, g.len());
    let m = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut sum = 0.0;
    let mut comp = 0.0;
    let add = |v: f64, sum: &mut f64, comp: &mut f64| {
        let t = *sum + v;
        if sum.abs() >= v.abs() {
            *comp += (*sum - t) + v;
        } else {
            *comp += (v - t) + *sum;
        }
        *sum = t;
    };
    for (i, &w) in widths.iter().enumerate() {
        let area = 0.5 * w * ((g[i] - m).exp() + (g[i + 1] - m).exp());
        add(area, &mut sum, &mut comp);
    }
    m + (sum + comp).ln()
}
