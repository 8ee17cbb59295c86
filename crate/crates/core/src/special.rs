//! Polygamma functions, the inverse trigamma, Gamma sampling, and the model's
//! closed-form constants (free-energy density, characteristic parameter,
//! centering).
//!
//! Psi0/Psi1/Psi2 use upward recurrence into the asymptotic region followed by
//! the Bernoulli-coefficient expansion, which keeps relative accuracy near
//! 1e-12 over the whole positive axis without extended precision.

use rand::Rng;
use rand_distr::Distribution;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpecialError {
    #[error("domain error in {what}: argument {value} outside {constraint}")]
    Domain {
        what: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("{what} failed to converge: residual {residual:.3e} after {iterations} iterations")]
    Convergence {
        what: &'static str,
        residual: f64,
        iterations: usize,
    },
}

pub type Result<T> = std::result::Result<T, SpecialError>;

/// Numerical tolerances for this module, collected in one place.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Target relative accuracy of psi0/psi1/psi2 on [1e-3, 1e6].
    pub psi_rel: f64,
    /// Residual bound for psi1_inv: |psi1(x) - y| <= inv_residual * max(1, y).
    pub inv_residual: f64,
    /// Iteration cap for the bracketed root-find.
    pub inv_max_iter: usize,
    /// Relative slack allowed in the characteristic condition n*psi1(theta) = t.
    pub characteristic_rel: f64,
    /// Relative slack of the stationarity check inside free_energy_density.
    pub stationarity_rel: f64,
}

pub const TOL: Tolerances = Tolerances {
    psi_rel: 1e-12,
    inv_residual: 1e-10,
    inv_max_iter: 200,
    characteristic_rel: 1e-8,
    stationarity_rel: 1e-7,
};

/// Recurrence threshold: shift x above this before using the asymptotic series.
const ASYMP_CUTOFF: f64 = 16.0;

/// B_{2k}/(2k) for k = 1..7 (digamma asymptotic series coefficients).
const PSI0_COEFFS: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
];

/// B_{2k} for k = 1..7 (trigamma asymptotic series coefficients).
const PSI1_COEFFS: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

/// (2k+1) B_{2k} for k = 1..7 (tetragamma asymptotic series coefficients).
const PSI2_COEFFS: [f64; 7] = [
    0.5,
    -1.0 / 6.0,
    1.0 / 6.0,
    -0.3,
    5.0 / 6.0,
    -691.0 / 210.0,
    17.5,
];

fn check_positive(what: &'static str, x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(SpecialError::Domain {
            what,
            value: x,
            constraint: "(0, inf)",
        });
    }
    Ok(())
}

/// Digamma Gamma'/Gamma.
pub fn psi0(x: f64) -> Result<f64> {
    check_positive("psi0", x)?;
    let mut shift = 0.0;
    let mut z = x;
    while z < ASYMP_CUTOFF {
        shift -= 1.0 / z;
        z += 1.0;
    }
    let inv2 = 1.0 / (z * z);
    let mut tail = 0.0;
    let mut p = inv2;
    for c in PSI0_COEFFS {
        tail += c * p;
        p *= inv2;
    }
    Ok(shift + z.ln() - 0.5 / z - tail)
}

/// Trigamma psi0'. Strictly positive and strictly decreasing on (0, inf).
pub fn psi1(x: f64) -> Result<f64> {
    check_positive("psi1", x)?;
    let mut shift = 0.0;
    let mut z = x;
    while z < ASYMP_CUTOFF {
        shift += 1.0 / (z * z);
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut tail = 0.0;
    let mut p = inv2 * inv;
    for c in PSI1_COEFFS {
        tail += c * p;
        p *= inv2;
    }
    Ok(shift + inv + 0.5 * inv2 + tail)
}

/// Tetragamma psi1'. Strictly negative on (0, inf).
pub fn psi2(x: f64) -> Result<f64> {
    check_positive("psi2", x)?;
    let mut shift = 0.0;
    let mut z = x;
    while z < ASYMP_CUTOFF {
        shift -= 2.0 / (z * z * z);
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut tail = 0.0;
    let mut p = inv2 * inv2;
    for c in PSI2_COEFFS {
        tail += c * p;
        p *= inv2;
    }
    Ok(shift - inv2 - inv2 * inv - tail)
}

/// Inverse trigamma: the unique x > 0 with psi1(x) = y.
///
/// Seeded by the sandwich 1/x <= psi1(x) <= 1/x + 1/x^2, which brackets the
/// root in [max(1/y - 1, tiny), 1/y + 1]; a secant step is taken whenever it
/// stays inside the bracket, otherwise bisection.
pub fn psi1_inv(y: f64) -> Result<f64> {
    check_positive("psi1_inv", y)?;
    let tol = TOL.inv_residual * y.max(1.0);
    let mut lo = (1.0 / y - 1.0).max(1e-300);
    let mut hi = 1.0 / y + 1.0;
    let mut f_lo = psi1(lo)? - y;
    let mut f_hi = psi1(hi)? - y;
    // psi1 is decreasing, so f_lo >= 0 >= f_hi; widen defensively if rounding
    // at the seed bracket spoiled a sign.
    let mut guard = 0;
    while f_lo < 0.0 && guard < 60 {
        lo /= 2.0;
        f_lo = psi1(lo)? - y;
        guard += 1;
    }
    while f_hi > 0.0 && guard < 120 {
        hi *= 2.0;
        f_hi = psi1(hi)? - y;
        guard += 1;
    }
    let mut x = 0.5 * (lo + hi);
    let mut f_x = psi1(x)? - y;
    for it in 0..TOL.inv_max_iter {
        if f_x.abs() <= tol {
            // Newton polish to machine-level x-accuracy; the residual
            // criterion alone leaves O(residual / psi1') slack in x.
            for _ in 0..2 {
                let step = (psi1(x)? - y) / psi2(x)?;
                let next = x - step;
                if next > 0.0 && next.is_finite() {
                    x = next;
                }
            }
            return Ok(x);
        }
        if f_x > 0.0 {
            lo = x;
            f_lo = f_x;
        } else {
            hi = x;
            f_hi = f_x;
        }
        let secant = if f_lo != f_hi {
            lo + f_lo * (hi - lo) / (f_lo - f_hi)
        } else {
            f64::NAN
        };
        x = if secant.is_finite() && secant > lo && secant < hi {
            secant
        } else {
            0.5 * (lo + hi)
        };
        f_x = psi1(x)? - y;
        if hi - lo <= f64::EPSILON * hi {
            if f_x.abs() <= tol.max(1e-6 * y) {
                return Ok(x);
            }
            return Err(SpecialError::Convergence {
                what: "psi1_inv",
                residual: f_x.abs(),
                iterations: it,
            });
        }
    }
    Err(SpecialError::Convergence {
        what: "psi1_inv",
        residual: f_x.abs(),
        iterations: TOL.inv_max_iter,
    })
}

/// One Gamma(shape, rate 1) draw. Valid for every shape > 0; shapes below 1
/// go through the shape+1 boosting transform inside the sampler.
pub fn gamma_sample<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> Result<f64> {
    check_positive("gamma_sample", shape)?;
    let dist = rand_distr::Gamma::new(shape, 1.0).map_err(|_| SpecialError::Domain {
        what: "gamma_sample",
        value: shape,
        constraint: "(0, inf)",
    })?;
    // Guard against a zero draw (possible in floating point for tiny shapes),
    // which would break -log downstream.
    loop {
        let v = dist.sample(rng);
        if v > 0.0 {
            return Ok(v);
        }
    }
}

/// Limiting free-energy density of the point-to-point model at inverse
/// temperature beta:
///   F(beta) = psi1_inv(beta^2) beta^2 - psi0(psi1_inv(beta^2)) - 2 log beta.
/// The minimizing form inf_{t>0} { t beta^2 - psi0(t) } has its interior
/// stationary point exactly at psi1_inv(beta^2); that is re-checked here.
pub fn free_energy_density(beta: f64) -> Result<f64> {
    check_positive("free_energy_density", beta)?;
    let b2 = beta * beta;
    let t_star = psi1_inv(b2)?;
    let residual = (psi1(t_star)? - b2).abs();
    if residual > TOL.stationarity_rel * b2.max(1.0) {
        return Err(SpecialError::Convergence {
            what: "free_energy_density stationarity",
            residual,
            iterations: 0,
        });
    }
    Ok(t_star * b2 - psi0(t_star)? - 2.0 * beta.ln())
}

/// User-facing coordinates of one intermediate-disorder simulation point and
/// their beta = 1 internal image.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ScaledParams {
    pub alpha: f64,
    pub beta0: f64,
    pub tau: f64,
    pub n: u64,
    /// Inverse temperature beta = beta0 n^{-alpha} of the unscaled model.
    pub beta: f64,
    /// Level count of the scaled model, round(tau * n).
    pub n_scaled: u64,
    /// Time horizon of the scaled model; equals n_scaled * psi1(theta) so the
    /// characteristic condition holds exactly as computed.
    pub t: f64,
    /// Characteristic parameter of the scaled model, psi1_inv(beta^2).
    pub theta: f64,
}

impl ScaledParams {
    /// Log offset restoring the unscaled point-to-point free energy:
    /// log Z_{n,t}(beta) = offset + log Z(beta = 1 image) in law.
    pub fn log_offset_ptp(&self) -> f64 {
        -2.0 * (self.n_scaled as f64 - 1.0) * self.beta.ln()
    }

    /// Log offset for the stationary model (beta^{-2 n} prefactor).
    pub fn log_offset_stationary(&self) -> f64 {
        -2.0 * self.n_scaled as f64 * self.beta.ln()
    }

    /// Centering theta * t - n * psi0(theta) of the scaled free energy.
    pub fn centering(&self) -> Result<f64> {
        Ok(self.theta * self.t - self.n_scaled as f64 * psi0(self.theta)?)
    }
}

/// Map (alpha, beta0, tau, n) to the beta = 1 model simulated internally.
///
/// Produces n_scaled = tau * n levels, horizon t = tau beta0^2 n^{1-2 alpha},
/// and theta = psi1_inv(beta0^2 n^{-2 alpha}); the triple satisfies
/// n_scaled * psi1(theta) = t exactly by construction.
pub fn characteristic_params(alpha: f64, beta0: f64, tau: f64, n: u64) -> Result<ScaledParams> {
    if !(0.0..=0.25).contains(&alpha) || !alpha.is_finite() {
        return Err(SpecialError::Domain {
            what: "characteristic_params alpha",
            value: alpha,
            constraint: "[0, 0.25]",
        });
    }
    check_positive("characteristic_params beta0", beta0)?;
    check_positive("characteristic_params tau", tau)?;
    if n == 0 {
        return Err(SpecialError::Domain {
            what: "characteristic_params n",
            value: 0.0,
            constraint: "n >= 1",
        });
    }
    let nf = n as f64;
    let beta = beta0 * nf.powf(-alpha);
    let n_scaled = (tau * nf).round().max(1.0) as u64;
    let theta = psi1_inv(beta * beta)?;
    let t = n_scaled as f64 * psi1(theta)?;
    Ok(ScaledParams {
        alpha,
        beta0,
        tau,
        n,
        beta,
        n_scaled,
        t,
        theta,
    })
}

/// Closed-form constants attached to one inverse temperature.
#[derive(Debug, Clone, Copy)]
pub struct ModelConstants {
    pub beta: f64,
    /// theta = beta * psi1_inv(beta^2), the characteristic parameter of the
    /// unscaled stationary model.
    pub theta_char: f64,
    pub free_energy: f64,
}

impl ModelConstants {
    pub fn new(beta: f64) -> Result<Self> {
        let theta_char = beta * psi1_inv(beta * beta)?;
        Ok(ModelConstants {
            beta,
            theta_char,
            free_energy: free_energy_density(beta)?,
        })
    }

    /// Centering f = theta t - n psi0(theta) at the characteristic
    /// theta = psi1_inv(t/n) for a scaled point (n, t).
    pub fn centering_scaled(n: u64, t: f64) -> Result<f64> {
        let theta = psi1_inv(t / n as f64)?;
        Ok(theta * t - n as f64 * psi0(theta)?)
    }
}
