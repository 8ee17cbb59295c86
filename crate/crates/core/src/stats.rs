//! Shared statistical machinery: summary moments, Kolmogorov-Smirnov and
//! chi-square tests, and log-log slope fitting with replica bootstrap.

use statrs::distribution::ContinuousCDF;

/// Sample mean, unbiased variance, and their standard errors.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub var: f64,
    pub se_mean: f64,
    /// Normal-theory standard error of the variance estimate,
    /// var * sqrt(2/(n-1)).
    pub se_var: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    assert!(n >= 2, "summary needs at least two samples");
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let var = ss / (n as f64 - 1.0);
    Summary {
        n,
        mean,
        var,
        se_mean: (var / n as f64).sqrt(),
        se_var: var * (2.0 / (n as f64 - 1.0)).sqrt(),
    }
}

/// Pearson correlation of two equal-length samples.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Survival function of the Kolmogorov distribution,
/// Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    // Stephens' small-sample correction on the asymptotic distribution
    let lambda = (n_eff.sqrt() + 0.12 + 0.11 / n_eff.sqrt()) * d;
    kolmogorov_sf(lambda)
}

/// One-sample KS test of `data` against a CDF. Sorts in place; returns
/// (statistic, p-value).
pub fn ks_test<F: Fn(f64) -> f64>(data: &mut [f64], cdf: F) -> (f64, f64) {
    data.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = data.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in data.iter().enumerate() {
        let c = cdf(x);
        d = d.max((c - i as f64 / n).abs()).max(((i + 1) as f64 / n - c).abs());
    }
    (d, ks_p_value(d, n))
}

pub fn ks_test_gamma(data: &mut [f64], shape: f64) -> (f64, f64) {
    let gamma = statrs::distribution::Gamma::new(shape, 1.0).expect("valid shape");
    ks_test(data, |x| gamma.cdf(x))
}

pub fn ks_test_standard_normal(data: &mut [f64]) -> f64 {
    let normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
    ks_test(data, |x| normal.cdf(x)).1
}

/// Two-sample KS test; sorts both samples in place.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> (f64, f64) {
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let xa = a[i];
        let xb = b[j];
        if xa <= xb {
            i += 1;
        }
        if xb <= xa {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let n_eff = (na as f64 * nb as f64) / (na as f64 + nb as f64);
    (d, ks_p_value(d, n_eff))
}

/// Chi-square goodness-of-fit p-value for observed counts against uniform
/// expected counts.
pub fn chi_square_uniform_p(counts: &[usize]) -> f64 {
    let probs = vec![1.0 / counts.len() as f64; counts.len()];
    chi_square_p(counts, &probs)
}

/// Chi-square goodness-of-fit p-value against arbitrary bin probabilities.
pub fn chi_square_p(counts: &[usize], probs: &[f64]) -> f64 {
    let k = counts.len();
    assert!(k >= 2 && probs.len() == k);
    let total: usize = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = total as f64 * p;
            let d = c as f64 - e;
            d * d / e
        })
        .sum();
    let chi = statrs::distribution::ChiSquared::new((k - 1) as f64).unwrap();
    1.0 - chi.cdf(stat)
}

/// Ordinary least squares y = intercept + slope x.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    /// Residual-based standard error of the slope.
    pub slope_se: f64,
}

pub fn ols(xs: &[f64], ys: &[f64]) -> Option<OlsFit> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx < 1e-12 * nf {
        return None; // degenerate abscissae
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut rss = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let r = y - intercept - slope * x;
        rss += r * r;
    }
    let dof = (n as i64 - 2).max(1) as f64;
    Some(OlsFit {
        slope,
        intercept,
        slope_se: (rss / dof / sxx).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn summary_and_se_scaling() {
        let v: Vec<f64> = (0..1000).map(|i| (i % 7) as f64).collect();
        let s = summarize(&v);
        assert!((s.mean - 2.997).abs() < 1e-9);
        // doubling the sample shrinks the SE by ~1/sqrt(2)
        let s2 = summarize(&v.repeat(2));
        let ratio = s2.se_mean / s.se_mean;
        assert!((ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.01);
    }

    #[test]
    fn ks_uniform_null_and_alternative() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(10);
        let mut null: Vec<f64> = (0..5000).map(|_| rng.gen::<f64>()).collect();
        let (_, p) = ks_test(&mut null, |x| x.clamp(0.0, 1.0));
        assert!(p > 1e-3);
        let mut skew: Vec<f64> = (0..5000).map(|_| rng.gen::<f64>().powi(2)).collect();
        let (_, p_bad) = ks_test(&mut skew, |x| x.clamp(0.0, 1.0));
        assert!(p_bad < 1e-6);
    }

    #[test]
    fn ks_two_sample_null() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        let mut a: Vec<f64> = (0..3000).map(|_| rng.gen::<f64>()).collect();
        let mut b: Vec<f64> = (0..2000).map(|_| rng.gen::<f64>()).collect();
        let (_, p) = ks_two_sample(&mut a, &mut b);
        assert!(p > 1e-3);
        let mut c: Vec<f64> = (0..2000).map(|_| rng.gen::<f64>() + 0.1).collect();
        let (_, p_bad) = ks_two_sample(&mut a, &mut c);
        assert!(p_bad < 1e-6);
    }

    #[test]
    fn kolmogorov_sf_reference_points() {
        // classical table values
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 2e-3);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-3);
    }

    #[test]
    fn chi_square_uniform_sane() {
        let p = chi_square_uniform_p(&[100, 98, 102, 101, 99]);
        assert!(p > 0.9);
        let p_bad = chi_square_uniform_p(&[200, 50, 50, 100, 100]);
        assert!(p_bad < 1e-6);
    }

    #[test]
    fn ols_exact_power_law() {
        let xs: Vec<f64> = [8.0, 16.0, 32.0, 64.0, 128.0f64]
            .iter()
            .map(|v| v.ln())
            .collect();
        let ys: Vec<f64> = [8.0, 16.0, 32.0, 64.0, 128.0f64]
            .iter()
            .map(|v| (3.0 * v.sqrt()).ln())
            .collect();
        let fit = ols(&xs, &ys).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
        assert!((fit.intercept - 3.0f64.ln()).abs() < 1e-12);
        // constant input
        let flat = ols(&xs, &vec![2.0; 5]).unwrap();
        assert!(flat.slope.abs() < 1e-12);
        // degenerate abscissae
        assert!(ols(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_none());
    }
}
