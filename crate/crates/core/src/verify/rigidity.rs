use serde::{Deserialize, Serialize};

use super::stats::percentile;
use super::{check_trials, run_trials, Thresholds, TrialStat, Verdict, VerifyError};
use crate::ensembles::{sample_composite, CompositeModel};
use crate::rng::StreamKey;
use crate::semicircle::classical_locations;
use crate::spectral::eigenvalues;

const EXPERIMENT: &str = "rigidity";
/// Indices `α ≤ 5` and `α ≥ N − 4` are edge indices.
const EDGE_WIDTH: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub n: usize,
    /// `max_α |λ_α − γ_α| N^{2/3} min(α, N+1−α)^{1/3}` over bulk indices, per trial.
    pub bulk_max: Vec<f64>,
    /// The same over edge indices.
    pub edge_max: Vec<f64>,
    pub bulk_percentile: f64,
    pub edge_percentile: f64,
    /// Fraction of trials where `|λ_{N/2} − γ_{N/2}| < |λ_1 − γ_1|` (unnormalized).
    pub middle_below_edge_fraction: f64,
    pub percentile: f64,
    pub ratio_max: f64,
    /// True when `N` is too small to have bulk indices and the verdict uses all indices.
    pub all_indices_are_edge: bool,
    pub verdict: Verdict,
    pub trial_stats: Vec<TrialStat>,
}

fn is_edge(alpha: usize, n: usize) -> bool {
    alpha <= EDGE_WIDTH || alpha + EDGE_WIDTH > n
}

pub fn rigidity_check(model: &CompositeModel, n: usize, trials: usize, seed: u64, thr: &Thresholds) -> Result<RigidityReport, VerifyError> {
    check_trials(trials, 10)?;
    let model = model.with_dimension(n)?;
    let gamma = classical_locations(n);
    let nf = n as f64;
    let out = run_trials(n, trials, |t| {
        let (h, _) = sample_composite(&model, StreamKey::new(seed, n, t));
        let lam = eigenvalues(&h)?;
        let (mut bulk, mut edge): (f64, f64) = (0.0, 0.0);
        for a in 1..=n {
            let d = (lam[a - 1] - gamma[a - 1]).abs() * nf.powf(2.0 / 3.0) * (a.min(n + 1 - a) as f64).cbrt();
            if is_edge(a, n) {
                edge = edge.max(d);
            } else {
                bulk = bulk.max(d);
            }
        }
        let mid = n / 2;
        let below = if n >= 2 {
            (lam[mid.max(1) - 1] - gamma[mid.max(1) - 1]).abs() < (lam[0] - gamma[0]).abs()
        } else {
            false
        };
        Ok((bulk, edge, below))
    })?;
    let all_edge = (1..=n).all(|a| is_edge(a, n));
    let bulk: Vec<f64> = out.iter().map(|o| if all_edge { o.1 } else { o.0 }).collect();
    let edge: Vec<f64> = out.iter().map(|o| o.1).collect();
    let below = out.iter().filter(|o| o.2).count() as f64 / trials as f64;
    let mut stats = Vec::new();
    for (t, o) in out.iter().enumerate() {
        if !all_edge {
            stats.push(TrialStat::new(EXPERIMENT, n, t as u64, seed, "bulk_max", o.0));
        }
        stats.push(TrialStat::new(EXPERIMENT, n, t as u64, seed, "edge_max", o.1));
    }
    let bp = percentile(&bulk, thr.percentile);
    Ok(RigidityReport {
        n,
        bulk_percentile: bp,
        edge_percentile: percentile(&edge, thr.percentile),
        bulk_max: bulk,
        edge_max: edge,
        middle_below_edge_fraction: below,
        percentile: thr.percentile,
        ratio_max: thr.ratio_max,
        all_indices_are_edge: all_edge,
        verdict: Verdict::from_bool(bp <= thr.ratio_max),
        trial_stats: stats,
    })
}
