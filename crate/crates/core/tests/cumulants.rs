use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wignerlab_core::cumulants::{
    cumulants_from_moments, empirical_cumulants, index_set, moments_from_cumulants, verify_expansion_with_moments, Polynomial, SymmetryClass, MAX_ORDER,
};
use wignerlab_core::ensembles::{EntryDistribution, BUILTIN_NAMES};
use wignerlab_core::C64;

/// A centred, unit-variance discrete law built from arbitrary points.
fn normalized_table(raw: &[(f64, f64, f64)], real: bool) -> Option<(Vec<C64>, Vec<f64>)> {
    let total: f64 = raw.iter().map(|r| r.2).sum();
    let probs: Vec<f64> = raw.iter().map(|r| r.2 / total).collect();
    let pts: Vec<C64> = raw.iter().map(|r| C64::new(r.0, if real { 0.0 } else { r.1 })).collect();
    let mean: C64 = pts.iter().zip(&probs).map(|(z, p)| z * p).sum();
    let centred: Vec<C64> = pts.iter().map(|z| z - mean).collect();
    let var: f64 = centred.iter().zip(&probs).map(|(z, p)| z.norm_sqr() * p).sum();
    if var < 1e-3 {
        return None;
    }
    Some((centred.iter().map(|z| z / var.sqrt()).collect(), probs))
}

fn table_strategy() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, 0.1f64..1.0), 2..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]
    #[test]
    fn moment_cumulant_round_trip(raw in table_strategy(), real in any::<bool>()) {
        let Some((pts, probs)) = normalized_table(&raw, real) else { return Ok(()) };
        let class = if real { SymmetryClass::Real } else { SymmetryClass::Complex };
        let law = EntryDistribution::custom_table("t", class, pts, probs).unwrap();
        let moments = law.moment_table(MAX_ORDER);
        let kappa = cumulants_from_moments(&moments, MAX_ORDER).unwrap();
        let back = moments_from_cumulants(&kappa);
        for ((p, q), m) in moments.iter() {
            let b = back.get(p, q).unwrap();
            prop_assert!((m - b).norm() <= 1e-12 * (1.0 + m.norm()), "({p},{q}) {m} vs {b}");
        }
        prop_assert!(kappa.conjugate_asymmetry() <= 1e-12);
    }

    #[test]
    fn expansion_exact_once_l_reaches_degree(raw in table_strategy(), a in 0u32..3, b in 0u32..3) {
        let Some((pts, probs)) = normalized_table(&raw, false) else { return Ok(()) };
        let law = EntryDistribution::custom_table("t", SymmetryClass::Complex, pts, probs).unwrap();
        let f = Polynomial::monomial(a, b);
        let l = f.degree();
        let r = verify_expansion_with_moments(&law.moment_table(l + 1), &f, l).unwrap();
        prop_assert!(r.residual <= 1e-10, "{r:?}");
    }
}

#[test]
fn analytic_tables_are_conjugate_symmetric_and_match_moments() {
    for name in BUILTIN_NAMES {
        let law = EntryDistribution::builtin(name).unwrap();
        let table = law.analytic_cumulants().expect("builtins carry analytic tables");
        assert_eq!(table.conjugate_asymmetry(), 0.0, "{name}");
        let from_moments = cumulants_from_moments(&law.moment_table(table.max_order), table.max_order).unwrap();
        for ((p, q), k) in table.iter() {
            let m = from_moments.get(p, q).unwrap();
            assert!((k - m).norm() <= 1e-12, "{name} ({p},{q}): {k} vs {m}");
        }
    }
}

#[test]
fn gaussian_cumulants_vanish_beyond_order_two() {
    for name in ["gaussian_complex", "gaussian_real", "gaussian_twisted"] {
        let law = EntryDistribution::builtin(name).unwrap();
        let k = cumulants_from_moments(&law.moment_table(MAX_ORDER), MAX_ORDER).unwrap();
        for ((p, q), v) in k.iter() {
            if p + q >= 3 {
                assert!(v.norm() <= 1e-12, "{name} ({p},{q}) = {v}");
            }
        }
    }
}

#[test]
fn scaled_tables_decay_at_the_expected_rate() {
    for name in BUILTIN_NAMES {
        let law = EntryDistribution::builtin(name).unwrap();
        let base = law.analytic_cumulants().unwrap();
        for n in [10.0, 100.0, 1000.0] {
            let scaled = base.scaled(n);
            for ((p, q), v) in scaled.iter() {
                let k = base.get(p, q).unwrap();
                let restored = v * n.powf((p + q) as f64 / 2.0);
                assert!(restored.norm() <= k.norm() * (1.0 + 1e-12) + 1e-15, "{name} N={n} ({p},{q})");
                assert!((restored - k).norm() <= 1e-12 * (1.0 + k.norm()));
            }
        }
    }
}

#[test]
fn empirical_cumulants_agree_with_analytic_within_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for name in ["rademacher_complex", "skewed_two_point", "gaussian_twisted", "rademacher_real"] {
        let law = EntryDistribution::builtin(name).unwrap();
        let xs: Vec<C64> = (0..200_000).map(|_| law.sample(&mut rng)).collect();
        let est = empirical_cumulants(&xs, law.symmetry_class(), 4, &mut rng).unwrap();
        let exact = law.analytic_cumulants().unwrap();
        for &(p, q) in &index_set(law.symmetry_class(), 4) {
            let e = est.get(p, q).unwrap();
            let x = exact.get(p, q).unwrap();
            let se = est.std_error(p, q).unwrap();
            assert!((e - x).norm() <= 5.0 * se + 1e-9, "{name} ({p},{q}): {e} vs {x} se {se:e}");
        }
        if law.symmetry_class() == SymmetryClass::Complex {
            for &(p, q) in &index_set(SymmetryClass::Complex, 4) {
                let d = (est.get(q, p).unwrap() - est.get(p, q).unwrap().conj()).norm();
                assert!(d <= 5.0 * est.std_error(p, q).unwrap() + 1e-12);
            }
        }
    }
}

#[test]
fn gaussian_monomials_expand_exactly_at_order_three() {
    for name in ["gaussian_complex", "gaussian_twisted", "gaussian_real"] {
        let moments = EntryDistribution::builtin(name).unwrap().moment_table(MAX_ORDER);
        for d in 0..=3u32 {
            for a in 0..=d {
                let r = verify_expansion_with_moments(&moments, &Polynomial::monomial(a, d - a), 3).unwrap();
                assert!(r.residual <= 1e-12, "{name} w^{a} w̄^{}: {r:?}", d - a);
            }
        }
    }
}

#[test]
fn rademacher_monomials_expand_exactly_at_order_four() {
    for name in ["rademacher_complex", "rademacher_real", "skewed_two_point"] {
        let moments = EntryDistribution::builtin(name).unwrap().moment_table(MAX_ORDER);
        for d in 0..=3u32 {
            for a in 0..=d {
                let r = verify_expansion_with_moments(&moments, &Polynomial::monomial(a, d - a), 4).unwrap();
                assert!(r.residual <= 1e-12, "{name} w^{a} w̄^{}: {r:?}", d - a);
            }
        }
    }
}
