use serde::{Deserialize, Serialize};

use super::stats::{mean, DistributionTestReport, NamedCheck};
use super::{check_trials, run_trials, Thresholds, TrialStat, Verdict, VerifyError};
use crate::ensembles::{auxiliary_matrix, sample_composite, CompositeModel};
use crate::rng::StreamKey;
use crate::spectral::{eigh, is_gue_pair};

const EXPERIMENT: &str = "gaussian_lemma";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianLemmaReport {
    pub n: usize,
    pub trials: usize,
    /// Pooled `√N s_α / (σ₁σ₂)` with `s_α = w_α* σ₁H₁ w_α − σ₁² λ_α`; standard normal in law.
    pub diagonal: DistributionTestReport,
    /// Mean of `N |w_α* 𝓗 w_β|²` over `α < β`, which should be 1.
    pub offdiag_mean: f64,
    pub offdiag_se: f64,
    pub offdiag_count: usize,
    pub offdiag_check: NamedCheck,
    pub verdict: Verdict,
    pub trial_stats: Vec<TrialStat>,
}

struct Outcome {
    diag: Vec<f64>,
    offdiag_sum: f64,
    offdiag_sq_sum: f64,
}

/// Distributional test of the Gaussian two-component identity. For two GUE
/// components, `𝓗` is a GUE independent of `H`, so `w_α* σ₁H₁ w_α − σ₁²λ_α` is a
/// centred Gaussian of variance `σ₁²σ₂²/N` (that is `1/(4N)` for equal weights),
/// and `w_α* 𝓗 w_β` for `α ≠ β` has `E|·|² = 1/N`.
pub fn gaussian_lemma_test(model: &CompositeModel, n: usize, trials: usize, seed: u64, thr: &Thresholds) -> Result<GaussianLemmaReport, VerifyError> {
    if !is_gue_pair(model) {
        return Err(VerifyError::Config(
            "the Gaussian lemma test needs exactly two GUE components (gaussian_complex off-diagonal, gaussian_real diagonal)".into(),
        ));
    }
    let (s1, s2) = (model.sigmas()[0], model.sigmas()[1]);
    if s1 == 0.0 || s2 == 0.0 {
        return Err(VerifyError::Config("the Gaussian lemma test needs both sigmas positive".into()));
    }
    check_trials(trials, 2)?;
    let model = model.with_dimension(n)?;
    let scale = (n as f64).sqrt() / (s1 * s2);
    let out = run_trials(n, trials, |t| {
        let (h, parts) = sample_composite(&model, StreamKey::new(seed, n, t));
        let sd = eigh(&h)?;
        let p1 = sd.project(&parts[0])?;
        let diag = (0..n).map(|a| scale * s1 * (p1[(a, a)].re - s1 * sd.eigenvalues()[a])).collect();
        let aux = auxiliary_matrix(&parts[0], &parts[1], s1, s2)?;
        let hh = sd.project(&aux)?;
        let (mut sum, mut sq) = (0.0, 0.0);
        for b in 0..n {
            for a in 0..b {
                let v = n as f64 * hh[(a, b)].norm_sqr();
                sum += v;
                sq += v * v;
            }
        }
        Ok(Outcome {
            diag,
            offdiag_sum: sum,
            offdiag_sq_sum: sq,
        })
    })?;
    let pairs = n * (n - 1) / 2;
    let mut pooled = Vec::with_capacity(n * trials);
    let mut stats = Vec::new();
    let (mut sum, mut sq) = (0.0, 0.0);
    for (t, o) in out.iter().enumerate() {
        let ms: f64 = o.diag.iter().map(|x| x * x).sum::<f64>() / n as f64;
        stats.push(TrialStat::new(EXPERIMENT, n, t as u64, seed, "diag_mean_square", ms));
        stats.push(TrialStat::new(EXPERIMENT, n, t as u64, seed, "diag_mean", mean(&o.diag)));
        if pairs > 0 {
            stats.push(TrialStat::new(EXPERIMENT, n, t as u64, seed, "offdiag_mean", o.offdiag_sum / pairs as f64));
        }
        pooled.extend_from_slice(&o.diag);
        sum += o.offdiag_sum;
        sq += o.offdiag_sq_sum;
    }
    let diagonal = DistributionTestReport::standard_normal(&pooled, thr.se_multiplier, thr.ks_alpha);
    let count = pairs * trials;
    let (offdiag_mean, offdiag_se) = if count > 1 {
        let m = sum / count as f64;
        let var = (sq / count as f64 - m * m) * count as f64 / (count as f64 - 1.0);
        (m, (var / count as f64).sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };
    let k = thr.se_multiplier;
    let offdiag_check = NamedCheck::new("offdiag_mean", offdiag_mean, 1.0 - k * offdiag_se, 1.0 + k * offdiag_se);
    let verdict = diagonal.verdict.and(Verdict::from_bool(offdiag_check.pass));
    Ok(GaussianLemmaReport {
        n,
        trials,
        diagonal,
        offdiag_mean,
        offdiag_se,
        offdiag_count: count,
        offdiag_check,
        verdict,
        trial_stats: stats,
    })
}
