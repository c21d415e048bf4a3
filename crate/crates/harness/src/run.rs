//! Executes one experiment configuration.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use wignerlab_core::semicircle::SpectralPoint;
use wignerlab_core::verify::{
    cumulant_identity, derivation_identities, energy_identity_check, equipartition_scaling, gaussian_lemma_test, local_law_check,
    observable_expectation_check, overlap_bound_check, rigidity_check, ScalingReport, SlopeCriterion, TrialStat, Verdict, VerifyError,
};

use crate::config::{ConfigError, Experiment, ExperimentConfig};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

impl RunError {
    /// 3 for a numerical failure inside a trial, 2 for anything the config caused.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Verify(VerifyError::Numerical { .. }) => 3,
            _ => 2,
        }
    }
}

/// One line of the human-readable summary table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub n: Option<usize>,
    pub z: Option<String>,
    pub statistic: String,
    pub value: f64,
    /// What the value is compared against, e.g. `≤ 10`; empty for context rows.
    pub criterion: String,
    pub verdict: Option<Verdict>,
}

impl SummaryRow {
    fn info(experiment: Experiment, n: Option<usize>, statistic: &str, value: f64) -> Self {
        SummaryRow {
            experiment: experiment.name().into(),
            n,
            z: None,
            statistic: statistic.into(),
            value,
            criterion: String::new(),
            verdict: None,
        }
    }

    fn check(experiment: Experiment, n: Option<usize>, statistic: &str, value: f64, criterion: String, pass: bool) -> Self {
        SummaryRow {
            criterion,
            verdict: Some(Verdict::from_bool(pass)),
            ..Self::info(experiment, n, statistic, value)
        }
    }

    fn at(mut self, z: String) -> Self {
        self.z = Some(z);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: Experiment,
    pub name: Option<String>,
    pub seed: u64,
    pub config_hash: String,
    pub tool_version: String,
    pub verdict: Verdict,
    pub rows: Vec<SummaryRow>,
    pub warnings: Vec<String>,
    /// Verifier reports with per-trial streams removed.
    pub details: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub summary: Summary,
    /// Sorted by `(N, trial)`; order within a trial follows the verifier.
    pub trial_stats: Vec<TrialStat>,
}

fn strip_trial_stats(mut v: Value) -> Value {
    if let Value::Object(map) = &mut v {
        map.remove("trial_stats");
        for x in map.values_mut() {
            *x = strip_trial_stats(x.take());
        }
    } else if let Value::Array(items) = &mut v {
        for x in items.iter_mut() {
            *x = strip_trial_stats(x.take());
        }
    }
    v
}

fn detail<T: Serialize>(report: &T) -> Value {
    strip_trial_stats(serde_json::to_value(report).expect("reports serialize"))
}

fn pair_label(z1: SpectralPoint, z2: SpectralPoint) -> String {
    if z1 == z2 {
        z1.to_string()
    } else {
        format!("{z1}; {z2}")
    }
}

fn scaling_rows(exp: Experiment, label: &str, s: &ScalingReport, min_r2: Option<f64>, rows: &mut Vec<SummaryRow>) {
    for p in &s.per_n {
        rows.push(SummaryRow::info(exp, Some(p.n), &format!("mean {label}"), p.mean));
    }
    let crit = match s.criterion {
        SlopeCriterion::Within { target, tolerance } => format!("{target} ± {tolerance}"),
        SlopeCriterion::AtMost { max } => format!("≤ {max}"),
    };
    rows.push(SummaryRow::check(exp, None, &format!("slope {label}"), s.slope, crit, s.verdict.passed()));
    match min_r2 {
        Some(m) => rows.push(SummaryRow::check(exp, None, &format!("R² {label}"), s.r2, format!("≥ {m}"), s.r2 >= m)),
        None => rows.push(SummaryRow::info(exp, None, &format!("R² {label}"), s.r2)),
    }
}

/// Runs the experiment on the current rayon pool.
pub fn execute(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput, RunError> {
    let exp = cfg.experiment;
    let thr = &cfg.thresholds;
    let mut rows = Vec::new();
    let mut details = Vec::new();
    let mut stats: Vec<TrialStat> = Vec::new();
    let mut warnings = Vec::new();
    let mut verdict = Verdict::Pass;
    let first_n = cfg.ns.first().copied().unwrap_or(1);
    let model = cfg.model.build(first_n)?;
    let zs = cfg.spectral_points()?;
    let z2s = cfg.second_points()?;

    match exp {
        Experiment::Equipartition => {
            let r = equipartition_scaling(&model, &cfg.ns, cfg.trials, seed, thr)?;
            match &r.scaling {
                Some(s) => {
                    scaling_rows(exp, "max deviation", s, Some(thr.min_r2), &mut rows);
                    for (label, s) in [("max diag deviation", &r.diag_scaling), ("max offdiag deviation", &r.offdiag_scaling)] {
                        if let Some(s) = s {
                            rows.push(SummaryRow::info(exp, None, &format!("slope {label}"), s.slope));
                        }
                    }
                    warnings.extend(s.warnings.iter().cloned());
                }
                None => {
                    for p in &r.per_n {
                        rows.push(SummaryRow::info(exp, Some(p.n), "mean max deviation", p.mean));
                    }
                    warnings.push(format!(
                        "rate not fitted: needs at least 3 values of N and {} trials each; verdict uses the identity only",
                        wignerlab_core::verify::MIN_FIT_TRIALS
                    ));
                }
            }
            rows.push(SummaryRow::check(
                exp,
                None,
                "max identity residual",
                r.identity_max,
                format!("≤ {:e}", r.identity_tol),
                r.identity_max <= r.identity_tol,
            ));
            verdict = verdict.and(r.verdict);
            stats.extend(r.trial_stats.iter().cloned());
            details.push(detail(&r));
        }
        Experiment::EnergyIdentity => {
            for &n in &cfg.ns {
                let r = energy_identity_check(&model, n, cfg.trials, seed, thr)?;
                rows.push(SummaryRow::check(exp, Some(n), "max identity residual", r.max, format!("≤ {:e}", r.tolerance), r.verdict.passed()));
                verdict = verdict.and(r.verdict);
                stats.extend(r.trial_stats.iter().cloned());
                details.push(detail(&r));
            }
        }
        Experiment::GaussianLemma => {
            for &n in &cfg.ns {
                let r = gaussian_lemma_test(&model, n, cfg.trials, seed, thr)?;
                for c in r.diagonal.checks.iter().chain(std::iter::once(&r.offdiag_check)) {
                    rows.push(SummaryRow::check(exp, Some(n), &c.name, c.value, format!("[{:.4}, {:.4}]", c.lower, c.upper), c.pass));
                }
                verdict = verdict.and(r.verdict);
                stats.extend(r.trial_stats.iter().cloned());
                details.push(detail(&r));
            }
        }
        Experiment::LocalLaw => {
            for &n in &cfg.ns {
                let r = local_law_check(&model, n, &zs, cfg.trials, seed, &cfg.domain, thr)?;
                for p in &r.points {
                    let crit = format!("≤ {} at q{}", r.ratio_max, r.percentile);
                    rows.push(SummaryRow::check(exp, Some(n), "entrywise ratio", p.entrywise_percentile, crit.clone(), p.entrywise_percentile <= r.ratio_max).at(p.z.to_string()));
                    rows.push(SummaryRow::check(exp, Some(n), "trace ratio", p.trace_percentile, crit, p.trace_percentile <= r.ratio_max).at(p.z.to_string()));
                }
                verdict = verdict.and(r.verdict);
                stats.extend(r.trial_stats.iter().cloned());
                details.push(detail(&r));
            }
        }
        Experiment::Rigidity => {
            for &n in &cfg.ns {
                let r = rigidity_check(&model, n, cfg.trials, seed, thr)?;
                let crit = format!("≤ {} at q{}", r.ratio_max, r.percentile);
                let label = if r.all_indices_are_edge { "all-index normalized max" } else { "bulk normalized max" };
                rows.push(SummaryRow::check(exp, Some(n), label, r.bulk_percentile, crit, r.verdict.passed()));
                rows.push(SummaryRow::info(exp, Some(n), "edge normalized max", r.edge_percentile));
                verdict = verdict.and(r.verdict);
                stats.extend(r.trial_stats.iter().cloned());
                details.push(detail(&r));
            }
        }
        Experiment::Observable => {
            for &n in &cfg.ns {
                for (&z1, &z2) in zs.iter().zip(&z2s) {
                    let r = observable_expectation_check(&model, n, z1, z2, cfg.trials, seed, &cfg.domain, thr)?;
                    let z = pair_label(z1, z2);
                    rows.push(
                        SummaryRow::check(exp, Some(n), "mean imim", r.mean_imim, format!("{:.6} ± {:.4}", r.target, r.allowance), r.expectation_pass).at(z.clone()),
                    );
                    rows.push(
                        SummaryRow::check(exp, Some(n), "std of X − ϰ", r.concentration_std, format!("≤ {}", thr.concentration_max), r.concentration_pass).at(z.clone()),
                    );
                    rows.push(SummaryRow::check(exp, Some(n), "negative imim trials", r.positivity_violations as f64, "= 0".into(), r.positivity_violations == 0).at(z));
                    verdict = verdict.and(r.verdict);
                    stats.extend(r.trial_stats.iter().cloned());
                    details.push(detail(&r));
                }
            }
        }
        Experiment::Overlap => {
            let r = overlap_bound_check(&model, &cfg.ns, cfg.trials, seed, thr)?;
            scaling_rows(exp, "N max overlap²", &r.scaling, None, &mut rows);
            warnings.extend(r.scaling.warnings.iter().cloned());
            verdict = verdict.and(r.verdict);
            stats.extend(r.trial_stats.iter().cloned());
            details.push(detail(&r));
        }
        Experiment::CumulantExpansion => {
            let mut seen = BTreeSet::new();
            for c in model.components() {
                let law = c.offdiag();
                if !seen.insert(law.name().to_string()) {
                    continue;
                }
                let r = cumulant_identity(law, cfg.expansion.l, cfg.expansion.max_degree, thr)?;
                rows.push(SummaryRow::check(
                    exp,
                    None,
                    &format!("max residual {} (l={})", law.name(), r.l),
                    r.max_residual,
                    format!("≤ {:e}", thr.expansion_tol),
                    r.verdict.passed(),
                ));
                for (a, b, m) in &r.monomials {
                    stats.push(TrialStat::new(exp.name(), 0, 0, seed, &format!("residual {} w^{a}w̄^{b}", law.name()), m.residual));
                }
                verdict = verdict.and(r.verdict);
                details.push(detail(&r));
            }
        }
        Experiment::DerivationCheck => {
            let d = &cfg.derivation;
            for &n in &cfg.ns {
                let r = derivation_identities(&model, n, &zs, &d.entries, cfg.trials, seed, d.step, thr)?;
                rows.push(SummaryRow::check(
                    exp,
                    Some(n),
                    "max-norm of σ₂∂₁G − σ₁∂₂G",
                    r.max_cancellation,
                    format!("≤ {:e}", thr.fd_cancellation_tol),
                    r.max_cancellation <= thr.fd_cancellation_tol,
                ));
                let ratio_ok = (r.min_fd_ratio - 4.0).abs() <= thr.fd_ratio_tolerance && (r.max_fd_ratio - 4.0).abs() <= thr.fd_ratio_tolerance;
                let crit = format!("4 ± {}", thr.fd_ratio_tolerance);
                rows.push(SummaryRow::check(exp, Some(n), "min halving ratio", r.min_fd_ratio, crit.clone(), ratio_ok));
                rows.push(SummaryRow::check(exp, Some(n), "max halving ratio", r.max_fd_ratio, crit, ratio_ok));
                rows.push(SummaryRow::check(
                    exp,
                    Some(n),
                    "delta-structure error",
                    r.max_delta_structure_error,
                    format!("≤ {:e}", thr.delta_structure_tol),
                    r.max_delta_structure_error <= thr.delta_structure_tol,
                ));
                if let Some(e) = r.max_twist_rule_error {
                    rows.push(SummaryRow::check(exp, Some(n), "twisted-rule error", e, format!("≤ {:e}", thr.delta_structure_tol), e <= thr.delta_structure_tol));
                }
                verdict = verdict.and(r.verdict);
                stats.extend(r.trial_stats.iter().cloned());
                details.push(detail(&r));
            }
        }
    }

    stats.sort_by_key(|s| (s.n, s.trial));
    Ok(RunOutput {
        summary: Summary {
            experiment: exp,
            name: cfg.name.clone(),
            seed,
            config_hash: cfg.hash(),
            tool_version: TOOL_VERSION.into(),
            verdict,
            rows,
            warnings,
            details,
        },
        trial_stats: stats,
    })
}
