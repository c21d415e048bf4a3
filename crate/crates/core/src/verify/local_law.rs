use serde::{Deserialize, Serialize};

use super::stats::percentile;
use super::{check_trials, run_trials, Thresholds, TrialStat, Verdict, VerifyError};
use crate::ensembles::{sample_composite, CompositeModel};
use crate::rng::StreamKey;
use crate::semicircle::{in_domain, m_sc, psi_single, DomainParams, SpectralPoint};
use crate::spectral::eigh;

const EXPERIMENT: &str = "local_law";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalLawPoint {
    pub z: SpectralPoint,
    pub psi: f64,
    /// `max_ij |G_ij − δ_ij m_sc| / Ψ` per trial.
    pub entrywise_ratio: Vec<f64>,
    /// `|m − m_sc| / Ψ²` per trial.
    pub trace_ratio: Vec<f64>,
    pub entrywise_percentile: f64,
    pub trace_percentile: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalLawReport {
    pub n: usize,
    pub percentile: f64,
    pub ratio_max: f64,
    pub points: Vec<LocalLawPoint>,
    pub verdict: Verdict,
    pub trial_stats: Vec<TrialStat>,
}

/// Entrywise and averaged local-law ratios at each `z`, passing when the chosen
/// percentile of both ratios stays below `ratio_max`.
pub fn local_law_check(
    model: &CompositeModel,
    n: usize,
    zs: &[SpectralPoint],
    trials: usize,
    seed: u64,
    domain: &DomainParams,
    thr: &Thresholds,
) -> Result<LocalLawReport, VerifyError> {
    check_trials(trials, 1)?;
    domain.validate()?;
    if zs.is_empty() {
        return Err(VerifyError::Config("local law check needs at least one spectral point".into()));
    }
    if let Some(&z) = zs.iter().find(|&&z| !in_domain(z, n, domain)) {
        return Err(VerifyError::OutsideDomain { z, n });
    }
    let model = model.with_dimension(n)?;
    let out = run_trials(n, trials, |t| {
        let (h, _) = sample_composite(&model, StreamKey::new(seed, n, t));
        let sd = eigh(&h)?;
        let mut r = Vec::with_capacity(zs.len());
        for &z in zs {
            let msc = m_sc(z);
            let psi = psi_single(z, n);
            let g = sd.resolvent(z);
            let mut dev: f64 = 0.0;
            for j in 0..n {
                for i in 0..n {
                    let v = if i == j { g[(i, j)] - msc } else { g[(i, j)] };
                    dev = dev.max(v.norm());
                }
            }
            let m = sd.normalized_trace_m(z);
            r.push((dev / psi, (m - msc).norm() / (psi * psi)));
        }
        Ok(r)
    })?;
    let mut points = Vec::new();
    let mut stats = Vec::new();
    for (k, &z) in zs.iter().enumerate() {
        let e: Vec<f64> = out.iter().map(|r| r[k].0).collect();
        let m: Vec<f64> = out.iter().map(|r| r[k].1).collect();
        let (pe, pm) = (percentile(&e, thr.percentile), percentile(&m, thr.percentile));
        points.push(LocalLawPoint {
            z,
            psi: psi_single(z, n),
            verdict: Verdict::from_bool(pe <= thr.ratio_max && pm <= thr.ratio_max),
            entrywise_ratio: e,
            trace_ratio: m,
            entrywise_percentile: pe,
            trace_percentile: pm,
        });
    }
    for t in 0..trials {
        for (k, &z) in zs.iter().enumerate() {
            stats.push(TrialStat::new(EXPERIMENT, n, t as u64, seed, "entrywise_ratio", out[t][k].0).at(z, z));
            stats.push(TrialStat::new(EXPERIMENT, n, t as u64, seed, "trace_ratio", out[t][k].1).at(z, z));
        }
    }
    let verdict = Verdict::from_bool(points.iter().all(|p| p.verdict.passed()));
    Ok(LocalLawReport {
        n,
        percentile: thr.percentile,
        ratio_max: thr.ratio_max,
        points,
        verdict,
        trial_stats: stats,
    })
}
