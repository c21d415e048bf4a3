//! Complex `(p, q)` cumulants and real `p` cumulants: exact conversion from
//! moment tables, empirical estimates with bootstrap errors, and the scalar
//! cumulant-expansion identity `E h f(h, h̄) = Σ κ^{(p+1,q)}/(p! q!) E ∂^p_w ∂^q_w̄ f`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::C64;

pub const MAX_ORDER: u32 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryClass {
    Complex,
    Real,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CumulantError {
    #[error("max_order {0} exceeds the supported maximum of {MAX_ORDER}")]
    OrderTooLarge(u32),
    #[error("missing moment ({p},{q})")]
    MissingMoment { p: u32, q: u32 },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("real-class sample {index} has nonzero imaginary part {im}")]
    ComplexSampleForRealClass { index: usize, im: f64 },
    #[error("expansion needs order {needed} but the law only provides up to {available}")]
    OrderMismatch { needed: u32, available: u32 },
}

/// Bidegree index set `{(p, q) : 1 ≤ p + q ≤ order}` for the complex class,
/// `{(p, 0) : 1 ≤ p ≤ order}` for the real class.
pub fn index_set(class: SymmetryClass, order: u32) -> Vec<(u32, u32)> {
    let mut v = Vec::new();
    for total in 1..=order {
        match class {
            SymmetryClass::Real => v.push((total, 0)),
            SymmetryClass::Complex => {
                for p in (0..=total).rev() {
                    v.push((p, total - p));
                }
            }
        }
    }
    v
}

fn binom(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r.round()
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Mixed moments `E h^p h̄^q`. For the real class only `(p, 0)` is stored and
/// `get(p, q)` returns `E h^{p+q}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub class: SymmetryClass,
    pub max_order: u32,
    values: BTreeMap<(u32, u32), C64>,
}

impl MomentTable {
    /// `f(p, q)` is called for every index of `index_set(class, max_order)`.
    pub fn from_fn(class: SymmetryClass, max_order: u32, mut f: impl FnMut(u32, u32) -> C64) -> Self {
        let values = index_set(class, max_order).into_iter().map(|(p, q)| ((p, q), f(p, q))).collect();
        MomentTable { class, max_order, values }
    }

    pub fn from_map(class: SymmetryClass, max_order: u32, values: BTreeMap<(u32, u32), C64>) -> Result<Self, CumulantError> {
        for (p, q) in index_set(class, max_order) {
            if !values.contains_key(&(p, q)) {
                return Err(CumulantError::MissingMoment { p, q });
            }
        }
        Ok(MomentTable { class, max_order, values })
    }

    pub fn get(&self, p: u32, q: u32) -> Option<C64> {
        if p + q == 0 {
            return Some(C64::new(1.0, 0.0));
        }
        match self.class {
            SymmetryClass::Complex => self.values.get(&(p, q)).copied(),
            SymmetryClass::Real => self.values.get(&(p + q, 0)).copied(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = ((u32, u32), C64)> + '_ {
        self.values.iter().map(|(k, v)| (*k, *v))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulantTable {
    pub class: SymmetryClass,
    pub max_order: u32,
    /// Dimension used for normalization; 1 for the unscaled law.
    pub scale: f64,
    entries: BTreeMap<(u32, u32), C64>,
    std_errors: Option<BTreeMap<(u32, u32), f64>>,
}

impl CumulantTable {
    /// `κ^{(p,q)}`; for the real class `get(p, 0)` is `κ^{(p)}`.
    pub fn get(&self, p: u32, q: u32) -> Option<C64> {
        match self.class {
            SymmetryClass::Complex => self.entries.get(&(p, q)).copied(),
            SymmetryClass::Real if q == 0 => self.entries.get(&(p, 0)).copied(),
            SymmetryClass::Real => None,
        }
    }

    pub fn real(&self, p: u32) -> Option<f64> {
        self.get(p, 0).map(|c| c.re)
    }

    pub fn std_error(&self, p: u32, q: u32) -> Option<f64> {
        self.std_errors.as_ref().and_then(|m| m.get(&(p, q)).copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = ((u32, u32), C64)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }

    /// Cumulants of `h/√N`: `κ^{(p,q)} N^{-(p+q)/2}`.
    pub fn scaled(&self, n: f64) -> CumulantTable {
        let f = |p: u32, q: u32| n.powf(-((p + q) as f64) / 2.0);
        CumulantTable {
            class: self.class,
            max_order: self.max_order,
            scale: self.scale * n,
            entries: self.entries.iter().map(|(&(p, q), v)| ((p, q), v * f(p, q))).collect(),
            std_errors: self
                .std_errors
                .as_ref()
                .map(|m| m.iter().map(|(&(p, q), s)| ((p, q), s * f(p, q))).collect()),
        }
    }

    /// Copies `conj κ^{(p,q)}` onto `κ^{(q,p)}` for `p > q`, removing the
    /// rounding-level asymmetry left by the recursion. Only for exact tables.
    pub(crate) fn hermitize(mut self) -> Self {
        let keys: Vec<(u32, u32)> = self.entries.keys().copied().filter(|&(p, q)| p > q).collect();
        for (p, q) in keys {
            if let Some(mirror) = self.entries.get(&(q, p)).map(|_| self.entries[&(p, q)].conj()) {
                self.entries.insert((q, p), mirror);
            }
        }
        for ((p, q), v) in self.entries.iter_mut() {
            if p == q || self.class == SymmetryClass::Real {
                v.im = 0.0;
            }
        }
        self
    }

    /// Largest `|κ^{(q,p)} − conj κ^{(p,q)}|`.
    pub fn conjugate_asymmetry(&self) -> f64 {
        if self.class == SymmetryClass::Real {
            return self.entries.values().map(|v| v.im.abs()).fold(0.0, f64::max);
        }
        self.entries
            .iter()
            .map(|(&(p, q), v)| (self.entries[&(q, p)] - v.conj()).norm())
            .fold(0.0, f64::max)
    }
}

/// Moment-to-cumulant conversion through the recursion
/// `m_{p,q} = Σ C(p−1,k−1) C(q,l) κ_{k,l} m_{p−k,q−l}` (first index lowered),
/// with the mirrored recursion on the second index when `p = 0`.
pub fn cumulants_from_moments(moments: &MomentTable, max_order: u32) -> Result<CumulantTable, CumulantError> {
    if max_order > MAX_ORDER {
        return Err(CumulantError::OrderTooLarge(max_order));
    }
    let class = moments.class;
    let m = |p: u32, q: u32| moments.get(p, q).ok_or(CumulantError::MissingMoment { p, q });
    let mut kappa: BTreeMap<(u32, u32), C64> = BTreeMap::new();
    for (p, q) in index_set(class, max_order) {
        let mut rest = C64::new(0.0, 0.0);
        if p >= 1 {
            for k1 in 1..=p {
                for k2 in 0..=q {
                    if (k1, k2) == (p, q) {
                        continue;
                    }
                    let Some(&kv) = kappa.get(&(k1, k2)) else {
                        continue;
                    };
                    rest += kv * m(p - k1, q - k2)? * binom(p - 1, k1 - 1) * binom(q, k2);
                }
            }
        } else {
            for k2 in 1..q {
                rest += kappa[&(0, k2)] * m(0, q - k2)? * binom(q - 1, k2 - 1);
            }
        }
        kappa.insert((p, q), m(p, q)? - rest);
    }
    Ok(CumulantTable {
        class,
        max_order,
        scale: 1.0,
        entries: kappa,
        std_errors: None,
    })
}

/// Inverse map: moments from cumulants, by the same recursion run forward.
pub fn moments_from_cumulants(table: &CumulantTable) -> MomentTable {
    let class = table.class;
    let mut mom: BTreeMap<(u32, u32), C64> = BTreeMap::new();
    let get_m = |mom: &BTreeMap<(u32, u32), C64>, p: u32, q: u32| -> C64 {
        if p + q == 0 {
            C64::new(1.0, 0.0)
        } else {
            mom[&(p, q)]
        }
    };
    for (p, q) in index_set(class, table.max_order) {
        let mut s = C64::new(0.0, 0.0);
        if class == SymmetryClass::Real {
            for k in 1..=p {
                s += table.entries[&(k, 0)] * get_m(&mom, p - k, 0) * binom(p - 1, k - 1);
            }
        } else if p >= 1 {
            for k1 in 1..=p {
                for k2 in 0..=q {
                    s += table.entries[&(k1, k2)] * get_m(&mom, p - k1, q - k2) * binom(p - 1, k1 - 1) * binom(q, k2);
                }
            }
        } else {
            for k2 in 1..=q {
                s += table.entries[&(0, k2)] * get_m(&mom, 0, q - k2) * binom(q - 1, k2 - 1);
            }
        }
        mom.insert((p, q), s);
    }
    MomentTable {
        class,
        max_order: table.max_order,
        values: mom,
    }
}

pub const MIN_EMPIRICAL_SAMPLES: usize = 1000;
const BOOTSTRAP_BLOCKS: usize = 500;
const BOOTSTRAP_REPLICATES: usize = 400;

/// Plug-in cumulant estimates (sample moments through the exact recursion) with
/// standard errors from a block bootstrap: samples are cut into contiguous
/// blocks, and each replicate resamples whole blocks with replacement.
pub fn empirical_cumulants<R: Rng + ?Sized>(
    samples: &[C64],
    class: SymmetryClass,
    max_order: u32,
    rng: &mut R,
) -> Result<CumulantTable, CumulantError> {
    if max_order > MAX_ORDER {
        return Err(CumulantError::OrderTooLarge(max_order));
    }
    if samples.len() < MIN_EMPIRICAL_SAMPLES {
        return Err(CumulantError::TooFewSamples {
            needed: MIN_EMPIRICAL_SAMPLES,
            got: samples.len(),
        });
    }
    if class == SymmetryClass::Real {
        if let Some((index, s)) = samples.iter().enumerate().find(|(_, s)| s.im != 0.0) {
            return Err(CumulantError::ComplexSampleForRealClass { index, im: s.im });
        }
    }
    let idx = index_set(class, max_order);
    let n = samples.len();
    let blocks = BOOTSTRAP_BLOCKS.min(n / 2);
    let mut block_sums = vec![vec![C64::new(0.0, 0.0); idx.len()]; blocks];
    let mut block_counts = vec![0usize; blocks];
    let mut pw = vec![C64::new(0.0, 0.0); max_order as usize + 1];
    let mut pwc = vec![C64::new(0.0, 0.0); max_order as usize + 1];
    for (t, &x) in samples.iter().enumerate() {
        let b = t * blocks / n;
        pw[0] = C64::new(1.0, 0.0);
        pwc[0] = C64::new(1.0, 0.0);
        for k in 1..=max_order as usize {
            pw[k] = pw[k - 1] * x;
            pwc[k] = pwc[k - 1] * x.conj();
        }
        for (slot, &(p, q)) in block_sums[b].iter_mut().zip(&idx) {
            *slot += pw[p as usize] * pwc[q as usize];
        }
        block_counts[b] += 1;
    }
    let estimate = |weights: &[usize]| -> Result<CumulantTable, CumulantError> {
        let mut acc = vec![C64::new(0.0, 0.0); idx.len()];
        let mut count = 0usize;
        for (b, &w) in weights.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for (a, s) in acc.iter_mut().zip(&block_sums[b]) {
                *a += s * w as f64;
            }
            count += w * block_counts[b];
        }
        let values = idx.iter().zip(&acc).map(|(&k, &s)| (k, s / count as f64)).collect();
        cumulants_from_moments(&MomentTable::from_map(class, max_order, values)?, max_order)
    };
    let point = estimate(&vec![1usize; blocks])?;
    let mut sum = vec![C64::new(0.0, 0.0); idx.len()];
    let mut sumsq = vec![0.0f64; idx.len()];
    let mut weights = vec![0usize; blocks];
    for _ in 0..BOOTSTRAP_REPLICATES {
        weights.iter_mut().for_each(|w| *w = 0);
        for _ in 0..blocks {
            weights[rng.random_range(0..blocks)] += 1;
        }
        let rep = estimate(&weights)?;
        for (i, &(p, q)) in idx.iter().enumerate() {
            let v = rep.entries[&(p, q)];
            sum[i] += v;
            sumsq[i] += v.norm_sqr();
        }
    }
    let r = BOOTSTRAP_REPLICATES as f64;
    let se = idx
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let mean = sum[i] / r;
            let var = (sumsq[i] / r - mean.norm_sqr()).max(0.0) * r / (r - 1.0);
            (k, var.sqrt())
        })
        .collect();
    Ok(CumulantTable {
        std_errors: Some(se),
        ..point
    })
}

/// `f(w, w̄) = Σ c · w^a w̄^b`, stored as `(a, b, c)` triples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub terms: Vec<(u32, u32, C64)>,
}

impl Polynomial {
    pub fn monomial(a: u32, b: u32) -> Self {
        Polynomial {
            terms: vec![(a, b, C64::new(1.0, 0.0))],
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|&(a, b, _)| a + b).max().unwrap_or(0)
    }

    /// `∂_w^p ∂_w̄^q f`, exact on the monomial lattice.
    pub fn wirtinger(&self, p: u32, q: u32) -> Polynomial {
        let falling = |n: u32, k: u32| -> f64 { (0..k).map(|i| (n - i) as f64).product() };
        Polynomial {
            terms: self
                .terms
                .iter()
                .filter(|&&(a, b, _)| a >= p && b >= q)
                .map(|&(a, b, c)| (a - p, b - q, c * (falling(a, p) * falling(b, q))))
                .collect(),
        }
    }

    /// `E f(h, h̄)` from a moment table.
    pub fn expectation(&self, moments: &MomentTable) -> Result<C64, CumulantError> {
        let mut s = C64::new(0.0, 0.0);
        for &(a, b, c) in &self.terms {
            let m = moments.get(a, b).ok_or(CumulantError::OrderMismatch {
                needed: a + b,
                available: moments.max_order,
            })?;
            s += c * m;
        }
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub l: u32,
    pub degree: u32,
    pub lhs: C64,
    pub rhs: C64,
    pub residual: f64,
    /// `(p, q, κ^{(p+1,q)}/(p!q!) E f^{(p,q)})` for each retained term.
    pub terms: Vec<(u32, u32, C64)>,
}

/// Compares `E h f(h, h̄)` computed directly from moments with the truncated
/// cumulant expansion of order `l`. For the real class the expansion runs over
/// `p` only, with `f^{(p)}` the ordinary derivative of `f(x, x)`.
pub fn verify_expansion_with_moments(moments: &MomentTable, f: &Polynomial, l: u32) -> Result<ExpansionReport, CumulantError> {
    let d = f.degree();
    let needed = (d + 1).max(l + 1);
    if needed > moments.max_order {
        return Err(CumulantError::OrderMismatch {
            needed,
            available: moments.max_order,
        });
    }
    let class = moments.class;
    let f = match class {
        SymmetryClass::Complex => f.clone(),
        SymmetryClass::Real => Polynomial {
            terms: f.terms.iter().map(|&(a, b, c)| (a + b, 0, c)).collect(),
        },
    };
    let mut lhs = C64::new(0.0, 0.0);
    for &(a, b, c) in &f.terms {
        lhs += c * moments.get(a + 1, b).expect("order checked");
    }
    let kappa = cumulants_from_moments(moments, l + 1)?;
    let mut terms = Vec::new();
    let mut rhs = C64::new(0.0, 0.0);
    for total in 0..=l {
        for p in (0..=total).rev() {
            let q = total - p;
            if class == SymmetryClass::Real && q > 0 {
                continue;
            }
            let k = kappa.get(p + 1, q).expect("table covers order l+1");
            let e = f.wirtinger(p, q).expectation(moments)?;
            let t = k * e / (factorial(p) * factorial(q));
            rhs += t;
            terms.push((p, q, t));
        }
    }
    Ok(ExpansionReport {
        l,
        degree: d,
        lhs,
        rhs,
        residual: (lhs - rhs).norm(),
        terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn complex_gaussian_moments(order: u32) -> MomentTable {
        MomentTable::from_fn(SymmetryClass::Complex, order, |p, q| if p == q { c(factorial(p)) } else { c(0.0) })
    }

    fn four_point_moments(order: u32) -> MomentTable {
        let pts: Vec<C64> = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
            .iter()
            .map(|&(a, b)| C64::new(a, b) / 2f64.sqrt())
            .collect();
        MomentTable::from_fn(SymmetryClass::Complex, order, |p, q| {
            pts.iter().map(|x| x.powu(p) * x.conj().powu(q)).sum::<C64>() / 4.0
        })
    }

    #[test]
    fn complex_gaussian_cumulants() {
        let k = cumulants_from_moments(&complex_gaussian_moments(6), 6).unwrap();
        for ((p, q), v) in k.iter() {
            let want = if (p, q) == (1, 1) { 1.0 } else { 0.0 };
            assert!((v - c(want)).norm() < 1e-12, "({p},{q}) = {v}");
        }
    }

    #[test]
    fn real_rademacher_cumulants() {
        let m = MomentTable::from_fn(SymmetryClass::Real, 6, |p, _| c(if p % 2 == 0 { 1.0 } else { 0.0 }));
        let k = cumulants_from_moments(&m, 6).unwrap();
        let want = [0.0, 1.0, 0.0, -2.0, 0.0, 16.0];
        for (p, w) in (1..=6).zip(want) {
            assert!((k.real(p).unwrap() - w).abs() < 1e-12);
        }
    }

    #[test]
    fn four_point_cumulants() {
        let k = cumulants_from_moments(&four_point_moments(4), 4).unwrap();
        for ((p, q), v) in k.iter() {
            let want = match (p, q) {
                (1, 1) => 1.0,
                (2, 2) | (4, 0) | (0, 4) => -1.0,
                _ => 0.0,
            };
            assert!((v - c(want)).norm() < 1e-12, "({p},{q}) = {v}");
        }
    }

    #[test]
    fn skewed_two_point_real_cumulants() {
        let (a, b, pa) = (3f64.sqrt(), -1.0 / 3f64.sqrt(), 0.25);
        let m = MomentTable::from_fn(SymmetryClass::Real, 5, |p, _| c(pa * a.powi(p as i32) + (1.0 - pa) * b.powi(p as i32)));
        let k = cumulants_from_moments(&m, 5).unwrap();
        let want = [0.0, 1.0, 2.0 / 3f64.sqrt(), -2.0 / 3.0, -40.0 * 3f64.sqrt() / 9.0];
        for (p, w) in (1..=5).zip(want) {
            assert!((k.real(p).unwrap() - w).abs() < 1e-12, "k{p}");
        }
    }

    #[test]
    fn zero_law_has_zero_cumulants() {
        let m = MomentTable::from_fn(SymmetryClass::Complex, 4, |_, _| c(0.0));
        let k = cumulants_from_moments(&m, 4).unwrap();
        assert!(k.iter().all(|(_, v)| v == c(0.0)));
    }

    #[test]
    fn round_trip() {
        let m = four_point_moments(6);
        let back = moments_from_cumulants(&cumulants_from_moments(&m, 6).unwrap());
        for ((p, q), v) in m.iter() {
            assert!((back.get(p, q).unwrap() - v).norm() < 1e-12);
        }
    }

    #[test]
    fn missing_moment_and_order_errors() {
        let mut map = BTreeMap::new();
        map.insert((1, 0), c(0.0));
        assert_eq!(
            MomentTable::from_map(SymmetryClass::Complex, 1, map).unwrap_err(),
            CumulantError::MissingMoment { p: 0, q: 1 }
        );
        assert_eq!(
            cumulants_from_moments(&complex_gaussian_moments(6), 7).unwrap_err(),
            CumulantError::OrderTooLarge(7)
        );
    }

    #[test]
    fn scaled_table_decays() {
        let k = cumulants_from_moments(&four_point_moments(4), 4).unwrap();
        let s = k.scaled(100.0);
        assert!((s.get(2, 2).unwrap() - c(-1e-4)).norm() < 1e-15);
        assert!((s.get(1, 1).unwrap() - c(1e-2)).norm() < 1e-15);
        assert_eq!(s.scale, 100.0);
    }

    #[test]
    fn empirical_constant_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = vec![C64::new(0.3, -0.2); 2000];
        let k = empirical_cumulants(&s, SymmetryClass::Complex, 4, &mut rng).unwrap();
        assert!((k.get(1, 0).unwrap() - C64::new(0.3, -0.2)).norm() < 1e-12);
        for ((p, q), v) in k.iter() {
            if p + q >= 2 {
                assert!(v.norm() < 1e-12, "({p},{q})");
            }
        }
    }

    #[test]
    fn empirical_requires_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            empirical_cumulants(&[c(0.0); 10], SymmetryClass::Real, 4, &mut rng),
            Err(CumulantError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn expansion_gaussian_conjugate_monomial() {
        let r = verify_expansion_with_moments(&complex_gaussian_moments(4), &Polynomial::monomial(0, 1), 1).unwrap();
        assert!((r.lhs - c(1.0)).norm() < 1e-15);
        assert!(r.residual < 1e-15);
    }

    #[test]
    fn expansion_constant_f() {
        let r = verify_expansion_with_moments(&four_point_moments(2), &Polynomial::monomial(0, 0), 0).unwrap();
        assert_eq!(r.lhs, r.rhs);
    }

    #[test]
    fn expansion_four_point_cubic() {
        let r = verify_expansion_with_moments(&four_point_moments(6), &Polynomial::monomial(0, 3), 4).unwrap();
        assert!(r.residual <= 1e-12, "{:?}", r);
        // E h h̄³ = E h̄² = 0 for this law
        assert!(r.lhs.norm() < 1e-12);
    }

    #[test]
    fn expansion_truncation_leaves_residual() {
        // Four-point law has κ^{(2,2)} ≠ 0, which enters through f = w w̄² only at p+q = 3.
        let r = verify_expansion_with_moments(&four_point_moments(6), &Polynomial::monomial(1, 2), 1).unwrap();
        assert!(r.residual > 0.5);
    }

    #[test]
    fn expansion_order_mismatch() {
        assert!(matches!(
            verify_expansion_with_moments(&complex_gaussian_moments(3), &Polynomial::monomial(3, 0), 1),
            Err(CumulantError::OrderMismatch { .. })
        ));
    }

    #[test]
    fn wirtinger_derivatives() {
        let f = Polynomial {
            terms: vec![(3, 2, c(2.0)), (1, 0, c(5.0))],
        };
        let d = f.wirtinger(2, 1);
        assert_eq!(d.terms, vec![(1, 1, c(24.0))]);
    }
}
