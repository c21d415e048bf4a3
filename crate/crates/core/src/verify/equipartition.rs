use serde::{Deserialize, Serialize};

use super::{check_ns, check_trials, run_trials, PerNSummary, ScalingReport, SlopeCriterion, Thresholds, TrialStat, Verdict, VerifyError};
use crate::ensembles::{sample_composite, CompositeModel};
use crate::rng::StreamKey;
use crate::spectral::{eigh, quadratic_forms};

const EXPERIMENT: &str = "equipartition";
/// Fewest trials per dimension for which the rate is fitted.
pub const MIN_FIT_TRIALS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquipartitionReport {
    /// Fit of `max_{α,β,ι} |D_ι[α,β]|`, the verdict statistic. `None` when
    /// fewer than three dimensions were run, in which case only the identity
    /// decides the verdict.
    pub scaling: Option<ScalingReport>,
    /// Diagonal (`α = β`) and off-diagonal maxima fitted separately.
    pub diag_scaling: Option<ScalingReport>,
    pub offdiag_scaling: Option<ScalingReport>,
    pub per_n: Vec<PerNSummary>,
    pub min_r2: f64,
    pub identity_max: f64,
    pub identity_tol: f64,
    pub verdict: Verdict,
    pub trial_stats: Vec<TrialStat>,
}

struct Outcome {
    max_abs: f64,
    max_diag: f64,
    max_offdiag: f64,
    identity: f64,
}

fn run_n(model: &CompositeModel, n: usize, trials: usize, seed: u64) -> Result<Vec<Outcome>, VerifyError> {
    let model = model.with_dimension(n)?;
    run_trials(n, trials, |t| {
        let (h, parts) = sample_composite(&model, StreamKey::new(seed, n, t));
        let sd = eigh(&h)?;
        let table = quadratic_forms(&sd, &parts, model.sigmas())?;
        Ok(Outcome {
            max_abs: table.max_abs(),
            max_diag: table.max_diag(),
            max_offdiag: table.max_offdiag(),
            identity: table.max_identity_residual(),
        })
    })
}

/// Fits the decay of `max_{α,β,ι} |w_α* H_ι w_β − σ_ι λ_α δ_{αβ}|` in `N`
/// against slope `−1/2`, and checks the exact identity `Σ_ι σ_ι w_α* H_ι w_α = λ_α`
/// in every trial. The rate is fitted only with at least three dimensions and
/// `MIN_FIT_TRIALS` trials each.
pub fn equipartition_scaling(model: &CompositeModel, ns: &[usize], trials: usize, seed: u64, thr: &Thresholds) -> Result<EquipartitionReport, VerifyError> {
    check_ns(ns, 1)?;
    check_trials(trials, 1)?;
    let mut stats = Vec::new();
    let (mut all, mut diag, mut off) = (Vec::new(), Vec::new(), Vec::new());
    let mut identity_max: f64 = 0.0;
    for &n in ns {
        let out = run_n(model, n, trials, seed)?;
        for (t, o) in out.iter().enumerate() {
            let t = t as u64;
            stats.push(TrialStat::new(EXPERIMENT, n, t, seed, "max_deviation", o.max_abs));
            stats.push(TrialStat::new(EXPERIMENT, n, t, seed, "max_diag_deviation", o.max_diag));
            stats.push(TrialStat::new(EXPERIMENT, n, t, seed, "max_offdiag_deviation", o.max_offdiag));
            stats.push(TrialStat::new(EXPERIMENT, n, t, seed, "identity_residual", o.identity));
            identity_max = identity_max.max(o.identity);
        }
        let pick = |f: fn(&Outcome) -> f64| out.iter().map(f).collect::<Vec<f64>>();
        all.push(PerNSummary::from_values(n, &pick(|o| o.max_abs)));
        diag.push(PerNSummary::from_values(n, &pick(|o| o.max_diag)));
        off.push(PerNSummary::from_values(n, &pick(|o| o.max_offdiag)));
    }
    let crit = SlopeCriterion::Within {
        target: -0.5,
        tolerance: thr.slope_tolerance,
    };
    let fit = ns.len() >= 3 && trials >= MIN_FIT_TRIALS;
    let build = |v: &Vec<PerNSummary>| if fit { ScalingReport::build(v.clone(), crit).map(Some) } else { Ok(None) };
    let scaling = build(&all)?;
    let diag_scaling = build(&diag)?;
    let offdiag_scaling = build(&off)?;
    let rate = match &scaling {
        Some(s) => s.verdict.and(Verdict::from_bool(s.r2 >= thr.min_r2)),
        None => Verdict::Pass,
    };
    let verdict = rate.and(Verdict::from_bool(identity_max <= thr.identity_tol));
    Ok(EquipartitionReport {
        scaling,
        diag_scaling,
        offdiag_scaling,
        per_n: all,
        min_r2: thr.min_r2,
        identity_max,
        identity_tol: thr.identity_tol,
        verdict,
        trial_stats: stats,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub n: usize,
    pub per_trial: Vec<f64>,
    pub max: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub trial_stats: Vec<TrialStat>,
}

/// `max_α |Σ_ι σ_ι w_α* H_ι w_α − λ_α|` in every trial at a single `N`.
pub fn energy_identity_check(model: &CompositeModel, n: usize, trials: usize, seed: u64, thr: &Thresholds) -> Result<IdentityReport, VerifyError> {
    check_trials(trials, 1)?;
    let out = run_n(model, n, trials, seed)?;
    let per_trial: Vec<f64> = out.iter().map(|o| o.identity).collect();
    let max = per_trial.iter().copied().fold(0.0, f64::max);
    let trial_stats = per_trial
        .iter()
        .enumerate()
        .map(|(t, &v)| TrialStat::new("energy_identity", n, t as u64, seed, "identity_residual", v))
        .collect();
    Ok(IdentityReport {
        n,
        verdict: Verdict::from_bool(per_trial.iter().all(|&v| v <= thr.identity_tol)),
        per_trial,
        max,
        tolerance: thr.identity_tol,
        trial_stats,
    })
}
