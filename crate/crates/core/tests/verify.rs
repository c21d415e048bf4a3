use wignerlab_core::ensembles::{sample_composite, CompositeModel};
use wignerlab_core::rng::StreamKey;
use wignerlab_core::spectral::eigh;
use wignerlab_core::semicircle::{m_sc, psi_single, DomainParams, SpectralPoint};
use wignerlab_core::verify::stats::ks_two_sample;
use wignerlab_core::verify::{energy_identity_check, equipartition_scaling, observable_expectation_check, Thresholds};

const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[test]
fn reruns_produce_identical_trial_streams() {
    let m = CompositeModel::gue_pair(8, [S, S]).unwrap();
    let thr = Thresholds::default();
    let a = equipartition_scaling(&m, &[16, 24, 32], 20, 3, &thr).unwrap();
    let b = equipartition_scaling(&m, &[16, 24, 32], 20, 3, &thr).unwrap();
    assert_eq!(a.trial_stats, b.trial_stats);
    assert_eq!(a, b);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let c = pool.install(|| equipartition_scaling(&m, &[16, 24, 32], 20, 3, &thr).unwrap());
    assert_eq!(a.trial_stats, c.trial_stats);
}

#[test]
fn identity_and_imim_sign_in_every_trial() {
    let thr = Thresholds::default();
    for m in [CompositeModel::gue_pair(40, [0.6, 0.8]).unwrap(), CompositeModel::goe_pair(40, [0.6, 0.8]).unwrap()] {
        let id = energy_identity_check(&m, 40, 10, 8, &thr).unwrap();
        assert!(id.verdict.passed(), "{id:?}");
        let z = SpectralPoint::new(0.2, 0.3).unwrap();
        let obs = observable_expectation_check(&m, 40, z, z, 20, 8, &DomainParams::default(), &thr).unwrap();
        assert_eq!(obs.trial_stats.iter().filter(|s| s.statistic == "imim").count(), 20);
        assert!(obs.trial_stats.iter().filter(|s| s.statistic == "imim").all(|s| s.value >= 0.0));
    }
}

#[test]
fn local_law_ratio_distribution_is_stable_across_n() {
    // Entry-level ratios |G_ij − δ_ij m_sc|/Ψ pooled over all entries of two trials.
    let z = SpectralPoint::new(0.5, 0.2).unwrap();
    let msc = m_sc(z);
    let pooled: Vec<Vec<f64>> = [256, 512, 1024]
        .iter()
        .map(|&n| {
            let m = CompositeModel::gue_pair(n, [S, S]).unwrap();
            let psi = psi_single(z, n);
            let mut v = Vec::with_capacity(2 * n * n);
            for t in 0..2 {
                let (h, _) = sample_composite(&m, StreamKey::new(21, n, t));
                let g = eigh(&h).unwrap().resolvent(z);
                for j in 0..n {
                    for i in 0..n {
                        let d = if i == j { g[(i, j)] - msc } else { g[(i, j)] };
                        v.push(d.norm() / psi);
                    }
                }
            }
            v
        })
        .collect();
    for a in 0..3 {
        for b in a + 1..3 {
            let d = ks_two_sample(&pooled[a], &pooled[b]);
            assert!(d <= 0.2, "KS({a},{b}) = {d}");
        }
    }
}
