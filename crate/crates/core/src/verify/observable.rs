use serde::{Deserialize, Serialize};

use super::stats::mean;
use super::{check_trials, run_trials, Thresholds, TrialStat, Verdict, VerifyError};
use crate::ensembles::{auxiliary_matrix, sample_composite, CompositeModel};
use crate::rng::StreamKey;
use crate::semicircle::{in_domain, m_sc, psi, DomainParams, SpectralPoint};
use crate::spectral::{eigh, observable_for_model};
use crate::C64;

const EXPERIMENT: &str = "observable";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableReport {
    pub n: usize,
    pub trials: usize,
    pub z1: SpectralPoint,
    pub z2: SpectralPoint,
    /// `Im m_sc(z1) Im m_sc(z2)`
    pub target: f64,
    pub mean_imim: f64,
    pub se_imim: f64,
    /// `a·se + b·(Ψ(z1,z2)² + N^{-1/2})`
    pub allowance: f64,
    pub deviation: f64,
    pub expectation_pass: bool,
    /// Sample standard deviation of `𝓧 − ϰ` (complex modulus).
    pub concentration_std: f64,
    pub mean_x_minus_varkappa: C64,
    pub concentration_pass: bool,
    /// Trials with negative `⟨𝓗 Im G 𝓗 Im G⟩` while both `η > 0`.
    pub positivity_violations: usize,
    pub max_route_discrepancy: f64,
    pub verdict: Verdict,
    pub trial_stats: Vec<TrialStat>,
}

/// Monte Carlo mean of `⟨𝓗 Im G(z1) 𝓗 Im G(z2)⟩` against `Im m_sc(z1) Im m_sc(z2)`,
/// and the spread of `𝓧 − ϰ` with `ϰ` matched to the model.
pub fn observable_expectation_check(
    model: &CompositeModel,
    n: usize,
    z1: SpectralPoint,
    z2: SpectralPoint,
    trials: usize,
    seed: u64,
    domain: &DomainParams,
    thr: &Thresholds,
) -> Result<ObservableReport, VerifyError> {
    if model.k() != 2 {
        return Err(VerifyError::Config(format!("observable check needs k=2, got k={}", model.k())));
    }
    check_trials(trials, 2)?;
    domain.validate()?;
    for z in [z1, z2] {
        if !in_domain(z, n, domain) {
            return Err(VerifyError::OutsideDomain { z, n });
        }
    }
    let model = model.with_dimension(n)?;
    let (s1, s2) = (model.sigmas()[0], model.sigmas()[1]);
    let out = run_trials(n, trials, |t| {
        let (h, parts) = sample_composite(&model, StreamKey::new(seed, n, t));
        let sd = eigh(&h)?;
        let aux = auxiliary_matrix(&parts[0], &parts[1], s1, s2)?;
        observable_for_model(&sd, &aux, &model, z1, z2)
    })?;
    let imim: Vec<f64> = out.iter().map(|o| o.value_imim).collect();
    let diffs: Vec<C64> = out.iter().map(|o| o.value_x - o.varkappa.expect("model given")).collect();
    let target = m_sc(z1).im * m_sc(z2).im;
    let mean_imim = mean(&imim);
    let tf = trials as f64;
    let se = (imim.iter().map(|v| (v - mean_imim).powi(2)).sum::<f64>() / (tf - 1.0) / tf).sqrt();
    let ps = psi(z1, z2, n);
    let allowance = thr.observable_se_multiplier * se + thr.observable_error_factor * (ps * ps + (n as f64).powf(-0.5));
    let deviation = (mean_imim - target).abs();
    let dmean = diffs.iter().sum::<C64>() / tf;
    let conc = (diffs.iter().map(|d| (d - dmean).norm_sqr()).sum::<f64>() / (tf - 1.0)).sqrt();
    let positive = z1.eta() > 0.0 && z2.eta() > 0.0;
    let violations = if positive { imim.iter().filter(|&&v| v < 0.0).count() } else { 0 };
    let max_route = out.iter().map(|o| o.route_discrepancy).fold(0.0, f64::max);
    let mut stats = Vec::new();
    for (t, o) in out.iter().enumerate() {
        let t = t as u64;
        stats.push(TrialStat::new(EXPERIMENT, n, t, seed, "imim", o.value_imim).at(z1, z2));
        stats.push(TrialStat::new(EXPERIMENT, n, t, seed, "x_re", o.value_x.re).at(z1, z2));
        stats.push(TrialStat::new(EXPERIMENT, n, t, seed, "x_im", o.value_x.im).at(z1, z2));
        stats.push(TrialStat::new(EXPERIMENT, n, t, seed, "x_minus_varkappa_abs", diffs[t as usize].norm()).at(z1, z2));
    }
    let expectation_pass = deviation <= allowance;
    let concentration_pass = conc <= thr.concentration_max;
    Ok(ObservableReport {
        n,
        trials,
        z1,
        z2,
        target,
        mean_imim,
        se_imim: se,
        allowance,
        deviation,
        expectation_pass,
        concentration_std: conc,
        mean_x_minus_varkappa: dmean,
        concentration_pass,
        positivity_violations: violations,
        max_route_discrepancy: max_route,
        verdict: Verdict::from_bool(expectation_pass && concentration_pass && violations == 0),
        trial_stats: stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn small_gue_and_goe_runs() {
        let z = SpectralPoint::new(0.0, 1.0).unwrap();
        for m in [
            CompositeModel::gue_pair(4, [FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap(),
            CompositeModel::goe_pair(4, [0.6, 0.8]).unwrap(),
        ] {
            let r = observable_expectation_check(&m, 64, z, z, 30, 9, &DomainParams::default(), &Thresholds::default()).unwrap();
            assert!((r.target - 0.3819660112501052).abs() < 1e-14);
            assert_eq!(r.positivity_violations, 0);
            assert!(r.verdict.passed(), "{r:?}");
        }
    }

    #[test]
    fn needs_two_components() {
        let s = 1.0 / 3f64.sqrt();
        let g = crate::ensembles::EnsembleSpec::gue(4);
        let m = CompositeModel::new(vec![s, s, s], vec![g.clone(), g.clone(), g]).unwrap();
        let z = SpectralPoint::new(0.0, 1.0).unwrap();
        assert!(observable_expectation_check(&m, 8, z, z, 5, 0, &DomainParams::default(), &Thresholds::default()).is_err());
    }
}
