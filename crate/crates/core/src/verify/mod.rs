//! Monte Carlo verifiers. Each one samples independent trials, reduces them in
//! `(N, trial)` order and returns a report with an explicit pass/fail verdict.
//!
//! Stochastic domination is made measurable in two ways: slope fits of
//! `log(statistic)` against `log N` for rate claims, and fixed thresholds on a
//! high percentile for claims that a normalized quantity stays of order one.

mod equipartition;
mod gaussian_lemma;
mod identities;
mod local_law;
mod observable;
mod overlap;
mod rigidity;
pub mod stats;

pub use equipartition::{energy_identity_check, equipartition_scaling, EquipartitionReport, IdentityReport, MIN_FIT_TRIALS};
pub use gaussian_lemma::{gaussian_lemma_test, GaussianLemmaReport};
pub use identities::{cumulant_identity, derivation_identities, DerivationReport, ExpansionIdentityReport};
pub use local_law::{local_law_check, LocalLawPoint, LocalLawReport};
pub use observable::{observable_expectation_check, ObservableReport};
pub use overlap::{overlap_bound_check, OverlapReport};
pub use rigidity::{rigidity_check, RigidityReport};
pub use stats::{scaling_fit, DistributionTestReport, Fit};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensembles::EnsembleError;
use crate::semicircle::{SemicircleError, SpectralPoint};
use crate::spectral::SpectralError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Domain(#[from] SemicircleError),
    #[error("spectral point {z} lies outside the domain for N={n}")]
    OutsideDomain { z: SpectralPoint, n: usize },
    #[error("numerical failure at N={n}, trial {trial}: {source}")]
    Numerical { n: usize, trial: u64, source: SpectralError },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }

    pub fn and(self, other: Verdict) -> Verdict {
        Verdict::from_bool(self.passed() && other.passed())
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        })
    }
}

/// One scalar outcome of one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialStat {
    pub experiment: String,
    pub n: usize,
    pub trial: u64,
    pub seed: u64,
    pub statistic: String,
    pub value: f64,
    pub z1: Option<SpectralPoint>,
    pub z2: Option<SpectralPoint>,
}

impl TrialStat {
    pub fn new(experiment: &str, n: usize, trial: u64, seed: u64, statistic: &str, value: f64) -> Self {
        TrialStat {
            experiment: experiment.to_string(),
            n,
            trial,
            seed,
            statistic: statistic.to_string(),
            value,
            z1: None,
            z2: None,
        }
    }

    pub fn at(mut self, z1: SpectralPoint, z2: SpectralPoint) -> Self {
        self.z1 = Some(z1);
        self.z2 = Some(z2);
        self
    }
}

/// Pass thresholds. The defaults are design choices: the asymptotic statements
/// being tested carry no explicit constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Allowed `|slope − target|` for rate fits.
    pub slope_tolerance: f64,
    /// Minimum `R²` of a rate fit.
    pub min_r2: f64,
    /// Bound on percentile statistics of normalized quantities.
    pub ratio_max: f64,
    /// Percentile used with `ratio_max`.
    pub percentile: f64,
    /// Multiplier on standard errors for moment checks.
    pub se_multiplier: f64,
    /// Significance level of Kolmogorov-Smirnov tests.
    pub ks_alpha: f64,
    /// Largest accepted slope for the overlap statistic.
    pub overlap_slope_max: f64,
    /// Bound on the exact energy identity residual.
    pub identity_tol: f64,
    /// Standard-error multiplier in the observable expectation allowance.
    pub observable_se_multiplier: f64,
    /// Multiplier on `Ψ² + N^{-1/2}` in the observable expectation allowance.
    pub observable_error_factor: f64,
    /// Bound on the sample standard deviation of `𝓧 − ϰ`.
    pub concentration_max: f64,
    /// Bound on `|LHS − RHS|` of the cumulant expansion identity.
    pub expansion_tol: f64,
    /// Bound on `‖σ₂∂₁G − σ₁∂₂G‖_∞` from finite differences.
    pub fd_cancellation_tol: f64,
    /// Allowed `|ratio − 4|` when the finite-difference step halves.
    pub fd_ratio_tolerance: f64,
    /// Bound on the delta-structure and twisted-rule residuals.
    pub delta_structure_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            slope_tolerance: 0.15,
            min_r2: 0.95,
            ratio_max: 10.0,
            percentile: 0.99,
            se_multiplier: 5.0,
            ks_alpha: 0.01,
            overlap_slope_max: 0.2,
            identity_tol: 1e-9,
            observable_se_multiplier: 3.0,
            observable_error_factor: 10.0,
            concentration_max: 10.0,
            expansion_tol: 1e-12,
            fd_cancellation_tol: 1e-6,
            fd_ratio_tolerance: 0.5,
            delta_structure_tol: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SlopeCriterion {
    Within { target: f64, tolerance: f64 },
    AtMost { max: f64 },
}

impl SlopeCriterion {
    pub fn accepts(&self, slope: f64) -> bool {
        match *self {
            SlopeCriterion::Within { target, tolerance } => (slope - target).abs() <= tolerance,
            SlopeCriterion::AtMost { max } => slope <= max,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerNSummary {
    pub n: usize,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q90: f64,
    pub q99: f64,
    pub max: f64,
}

impl PerNSummary {
    pub fn from_values(n: usize, values: &[f64]) -> Self {
        PerNSummary {
            n,
            count: values.len(),
            mean: stats::mean(values),
            median: stats::percentile(values, 0.5),
            q90: stats::percentile(values, 0.9),
            q99: stats::percentile(values, 0.99),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Log-log fit of the per-N mean statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub ns: Vec<usize>,
    pub per_n: Vec<PerNSummary>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub residuals: Vec<f64>,
    pub criterion: SlopeCriterion,
    pub verdict: Verdict,
    pub warnings: Vec<String>,
}

impl ScalingReport {
    pub fn build(per_n: Vec<PerNSummary>, criterion: SlopeCriterion) -> Result<Self, VerifyError> {
        let points: Vec<(f64, f64)> = per_n.iter().map(|s| (s.n as f64, s.mean)).collect();
        let fit = scaling_fit(&points)?;
        Ok(ScalingReport {
            ns: per_n.iter().map(|s| s.n).collect(),
            per_n,
            slope: fit.slope,
            intercept: fit.intercept,
            r2: fit.r2,
            residuals: fit.residuals,
            verdict: Verdict::from_bool(criterion.accepts(fit.slope)),
            criterion,
            warnings: fit.warnings,
        })
    }
}

/// Runs `f(trial)` for `trial in 0..trials` on the current rayon pool and
/// returns the results in trial order. The first failing trial (by index) is
/// reported, independent of scheduling.
pub(crate) fn run_trials<T, F>(n: usize, trials: usize, f: F) -> Result<Vec<T>, VerifyError>
where
    T: Send,
    F: Fn(u64) -> Result<T, SpectralError> + Sync + Send,
{
    let results: Vec<Result<T, SpectralError>> = (0..trials as u64).into_par_iter().map(&f).collect();
    let mut out = Vec::with_capacity(trials);
    for (trial, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => out.push(v),
            Err(source) => {
                return Err(VerifyError::Numerical {
                    n,
                    trial: trial as u64,
                    source,
                })
            }
        }
    }
    Ok(out)
}

pub(crate) fn check_ns(ns: &[usize], min_len: usize) -> Result<(), VerifyError> {
    if ns.len() < min_len {
        return Err(VerifyError::Config(format!("need at least {min_len} values of N, got {}", ns.len())));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) || ns.first() == Some(&0) {
        return Err(VerifyError::Config("Ns must be positive and strictly ascending".into()));
    }
    Ok(())
}

pub(crate) fn check_trials(trials: usize, min: usize) -> Result<(), VerifyError> {
    if trials < min {
        return Err(VerifyError::Config(format!("need at least {min} trials, got {trials}")));
    }
    Ok(())
}
