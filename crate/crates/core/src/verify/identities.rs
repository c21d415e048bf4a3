use serde::{Deserialize, Serialize};

use super::{check_trials, run_trials, Thresholds, TrialStat, Verdict, VerifyError};
use crate::cumulants::{verify_expansion_with_moments, ExpansionReport, Polynomial, SymmetryClass, MAX_ORDER};
use crate::ensembles::{sample_composite, CompositeModel, EntryDistribution};
use crate::rng::StreamKey;
use crate::semicircle::SpectralPoint;
use crate::spectral::{derivation_check, CheckReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivationReport {
    pub n: usize,
    pub step: f64,
    pub checks: Vec<CheckReport>,
    pub max_cancellation: f64,
    pub max_delta_structure_error: f64,
    pub min_fd_ratio: f64,
    pub max_fd_ratio: f64,
    pub max_twist_rule_error: Option<f64>,
    pub verdict: Verdict,
    pub trial_stats: Vec<TrialStat>,
}

/// Runs `derivation_check` for every sampled matrix, spectral point and entry.
/// Passes when the weighted cancellation stays below `fd_cancellation_tol`,
/// every halving ratio is within `fd_ratio_tolerance` of 4, and the delta
/// structure of `𝒟𝓗` (and the twisted rule, for complex entries) holds to
/// `delta_structure_tol`.
#[allow(clippy::too_many_arguments)]
pub fn derivation_identities(
    model: &CompositeModel,
    n: usize,
    zs: &[SpectralPoint],
    entries: &[(usize, usize)],
    trials: usize,
    seed: u64,
    step: f64,
    thr: &Thresholds,
) -> Result<DerivationReport, VerifyError> {
    const EXPERIMENT: &str = "derivation_check";
    check_trials(trials, 1)?;
    if zs.is_empty() || entries.is_empty() {
        return Err(VerifyError::Config("derivation check needs spectral points and entries".into()));
    }
    if let Some(&(i, j)) = entries.iter().find(|&&(i, j)| i >= n || j >= n) {
        return Err(VerifyError::Config(format!("entry ({i}, {j}) out of range for N={n}")));
    }
    let model = model.with_dimension(n)?;
    // Rejects unsupported models and steps before any sampling.
    let (_, probe) = sample_composite(&model, StreamKey::new(seed, n, 0));
    derivation_check(&model, &probe, zs[0], entries[0], step).map_err(|source| match source {
        crate::spectral::SpectralError::Unsupported(m) => VerifyError::Config(m),
        crate::spectral::SpectralError::InvalidStep(s) => VerifyError::Config(format!("invalid finite-difference step {s}")),
        source => VerifyError::Numerical { n, trial: 0, source },
    })?;
    let out = run_trials(n, trials, |t| {
        let (_, parts) = sample_composite(&model, StreamKey::new(seed, n, t));
        let mut v = Vec::with_capacity(zs.len() * entries.len());
        for &z in zs {
            for &ij in entries {
                v.push(derivation_check(&model, &parts, z, ij, step)?);
            }
        }
        Ok(v)
    })?;
    let mut stats = Vec::new();
    for (t, reports) in out.iter().enumerate() {
        for r in reports {
            let tag = |s: &str| format!("{s}[{},{}]", r.i, r.j);
            let mut push = |s: String, v: f64| stats.push(TrialStat::new(EXPERIMENT, n, t as u64, seed, &s, v).at(r.z, r.z));
            push(tag("cancellation"), r.cancellation);
            push(tag("fd_ratio_1"), r.fd_ratio[0]);
            push(tag("fd_ratio_2"), r.fd_ratio[1]);
            push(tag("delta_structure_error"), r.delta_structure_error);
            if let Some(e) = r.twist_rule_error {
                push(tag("twist_rule_error"), e);
            }
        }
    }
    let checks: Vec<CheckReport> = out.into_iter().flatten().collect();
    let max_cancellation = checks.iter().map(|c| c.cancellation).fold(0.0, f64::max);
    let max_delta_structure_error = checks.iter().map(|c| c.delta_structure_error).fold(0.0, f64::max);
    let ratios = || checks.iter().flat_map(|c| c.fd_ratio);
    let min_fd_ratio = ratios().fold(f64::INFINITY, f64::min);
    let max_fd_ratio = ratios().fold(f64::NEG_INFINITY, f64::max);
    let max_twist_rule_error = checks.iter().filter_map(|c| c.twist_rule_error).reduce(f64::max);
    let ok = max_cancellation <= thr.fd_cancellation_tol
        && ratios().all(|r| (r - 4.0).abs() <= thr.fd_ratio_tolerance)
        && max_delta_structure_error <= thr.delta_structure_tol
        && max_twist_rule_error.map_or(true, |e| e <= thr.delta_structure_tol);
    Ok(DerivationReport {
        n,
        step,
        checks,
        max_cancellation,
        max_delta_structure_error,
        min_fd_ratio,
        max_fd_ratio,
        max_twist_rule_error,
        verdict: Verdict::from_bool(ok),
        trial_stats: stats,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionIdentityReport {
    pub distribution: String,
    pub l: u32,
    pub max_degree: u32,
    /// `(a, b)` of the monomial `w^a w̄^b` with its report.
    pub monomials: Vec<(u32, u32, ExpansionReport)>,
    pub max_residual: f64,
    pub verdict: Verdict,
}

/// The cumulant expansion of `E h f(h, h̄)` for every monomial `f` of degree at
/// most `max_degree`, truncated at order `l`, from the exact moment table.
pub fn cumulant_identity(law: &EntryDistribution, l: u32, max_degree: u32, thr: &Thresholds) -> Result<ExpansionIdentityReport, VerifyError> {
    let needed = (max_degree + 1).max(l + 1);
    if needed > MAX_ORDER {
        return Err(VerifyError::Config(format!("expansion needs moments of order {needed}, above the supported {MAX_ORDER}")));
    }
    let moments = law.moment_table(needed);
    let mut monomials = Vec::new();
    for d in 0..=max_degree {
        for a in (0..=d).rev() {
            let b = d - a;
            if law.symmetry_class() == SymmetryClass::Real && b > 0 {
                continue;
            }
            let r = verify_expansion_with_moments(&moments, &Polynomial::monomial(a, b), l)
                .map_err(|e| VerifyError::Config(e.to_string()))?;
            monomials.push((a, b, r));
        }
    }
    let max_residual = monomials.iter().map(|m| m.2.residual).fold(0.0, f64::max);
    Ok(ExpansionIdentityReport {
        distribution: law.name().to_string(),
        l,
        max_degree,
        monomials,
        max_residual,
        verdict: Verdict::from_bool(max_residual <= thr.expansion_tol),
    })
}
