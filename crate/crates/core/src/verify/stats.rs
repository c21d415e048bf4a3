//! Sample statistics, log-log fits and Kolmogorov-Smirnov distances.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{Verdict, VerifyError};

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance.
pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Nearest-rank percentile, `p ∈ (0, 1]`.
pub fn percentile(v: &[f64], p: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = (p * s.len() as f64).ceil() as usize;
    s[rank.clamp(1, s.len()) - 1]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Residuals of the used points, in input order.
    pub residuals: Vec<f64>,
    /// Indices of the points that entered the fit.
    pub used: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Least squares of `log(s)` on `log(N)`. Nonpositive statistics are skipped
/// with a warning; fewer than three usable points is an error.
pub fn scaling_fit(points: &[(f64, f64)]) -> Result<Fit, VerifyError> {
    let mut warnings = Vec::new();
    let mut used = Vec::new();
    for (k, &(n, s)) in points.iter().enumerate() {
        if s > 0.0 && s.is_finite() && n > 0.0 {
            used.push(k);
        } else {
            let w = format!("excluded point N={n} with statistic {s}");
            log::warn!("{w}");
            warnings.push(w);
        }
    }
    if used.len() < 3 {
        return Err(VerifyError::Config(format!("scaling fit needs at least 3 positive points, got {}", used.len())));
    }
    let xs: Vec<f64> = used.iter().map(|&k| points[k].0.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|&k| points[k].1.ln()).collect();
    let (mx, my) = (mean(&xs), mean(&ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(VerifyError::Config("scaling fit needs distinct values of N".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - (intercept + slope * x)).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(Fit {
        slope,
        intercept,
        r2,
        residuals,
        used,
        warnings,
    })
}

/// `sup_x |F_n(x) − Φ(x)|` against the standard normal.
pub fn ks_distance_normal(v: &[f64]) -> f64 {
    let normal = Normal::standard();
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic one-sample KS critical value `√(−ln(α/2)/2)/√n`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedCheck {
    pub name: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

impl NamedCheck {
    pub fn new(name: &str, value: f64, lower: f64, upper: f64) -> Self {
        NamedCheck {
            name: name.to_string(),
            value,
            lower,
            upper,
            pass: value >= lower && value <= upper,
        }
    }
}

/// Moments and KS distance of a sample that should be standard normal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionTestReport {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub se_mean: f64,
    pub se_variance: f64,
    pub se_skewness: f64,
    pub se_kurtosis: f64,
    pub ks_distance: f64,
    pub ks_critical: f64,
    pub checks: Vec<NamedCheck>,
    pub verdict: Verdict,
}

impl DistributionTestReport {
    /// Passes when mean, variance − 1 and excess kurtosis are within
    /// `se_multiplier` standard errors of 0 and the KS distance is below the
    /// critical value at level `alpha`.
    pub fn standard_normal(v: &[f64], se_multiplier: f64, alpha: f64) -> Self {
        let n = v.len() as f64;
        let m = mean(v);
        let c2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        let c3 = v.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
        let c4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
        let var = c2 * n / (n - 1.0);
        let skew = c3 / c2.powf(1.5);
        let kurt = c4 / (c2 * c2) - 3.0;
        let se_mean = (var / n).sqrt();
        let se_var = ((c4 - c2 * c2) / n).sqrt();
        let se_skew = (6.0 / n).sqrt();
        let se_kurt = (24.0 / n).sqrt();
        let ks = ks_distance_normal(v);
        let crit = ks_critical(v.len(), alpha);
        let k = se_multiplier;
        let checks = vec![
            NamedCheck::new("mean", m, -k * se_mean, k * se_mean),
            NamedCheck::new("variance", var, 1.0 - k * se_var, 1.0 + k * se_var),
            NamedCheck::new("excess_kurtosis", kurt, -k * se_kurt, k * se_kurt),
            NamedCheck::new("ks_distance", ks, 0.0, crit),
        ];
        let verdict = Verdict::from_bool(checks.iter().all(|c| c.pass));
        DistributionTestReport {
            count: v.len(),
            mean: m,
            variance: var,
            skewness: skew,
            excess_kurtosis: kurt,
            se_mean,
            se_variance: se_var,
            se_skewness: se_skew,
            se_kurtosis: se_kurt,
            ks_distance: ks,
            ks_critical: crit,
            checks,
            verdict,
        }
    }
}
