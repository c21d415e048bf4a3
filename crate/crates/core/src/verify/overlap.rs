use serde::{Deserialize, Serialize};

use super::{check_ns, check_trials, run_trials, PerNSummary, ScalingReport, SlopeCriterion, Thresholds, TrialStat, Verdict, VerifyError};
use crate::ensembles::{auxiliary_matrix, sample_composite, CompositeModel};
use crate::rng::StreamKey;
use crate::spectral::eigh;

const EXPERIMENT: &str = "overlap";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    /// Fit of the per-N mean of `N max_{α,β} |w_α* 𝓗 w_β|²`.
    pub scaling: ScalingReport,
    pub verdict: Verdict,
    pub trial_stats: Vec<TrialStat>,
}

pub fn overlap_bound_check(model: &CompositeModel, ns: &[usize], trials: usize, seed: u64, thr: &Thresholds) -> Result<OverlapReport, VerifyError> {
    if model.k() != 2 {
        return Err(VerifyError::Config(format!("overlap check needs k=2, got k={}", model.k())));
    }
    check_ns(ns, 3)?;
    check_trials(trials, 2)?;
    let (s1, s2) = (model.sigmas()[0], model.sigmas()[1]);
    let mut per_n = Vec::new();
    let mut stats = Vec::new();
    for &n in ns {
        let m = model.with_dimension(n)?;
        let out = run_trials(n, trials, |t| {
            let (h, parts) = sample_composite(&m, StreamKey::new(seed, n, t));
            let sd = eigh(&h)?;
            let aux = auxiliary_matrix(&parts[0], &parts[1], s1, s2)?;
            let hh = sd.project(&aux)?;
            let mut best: f64 = 0.0;
            for b in 0..n {
                for a in 0..n {
                    best = best.max(hh[(a, b)].norm_sqr());
                }
            }
            Ok(best * n as f64)
        })?;
        for (t, &v) in out.iter().enumerate() {
            stats.push(TrialStat::new(EXPERIMENT, n, t as u64, seed, "max_overlap_scaled", v));
        }
        per_n.push(PerNSummary::from_values(n, &out));
    }
    let scaling = ScalingReport::build(per_n, SlopeCriterion::AtMost { max: thr.overlap_slope_max })?;
    Ok(OverlapReport {
        verdict: scaling.verdict,
        scaling,
        trial_stats: stats,
    })
}
