//! Entry laws, Wigner matrices and composite models `H = Σ σ_ι H_ι`.

use std::f64::consts::{FRAC_PI_8, PI};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::cumulants::SymmetryClass;
use crate::cumulants::{cumulants_from_moments, CumulantTable, MomentTable};
use crate::linalg::HermitianMatrix;
use crate::rng::StreamKey;
use crate::C64;

const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("unknown distribution '{0}'")]
    UnknownDistribution(String),
    #[error("distribution '{0}' is complex-valued and cannot be used on a real symmetric matrix")]
    ComplexLawOnRealSpec(String),
    #[error("diagonal law '{0}' must be real-valued")]
    ComplexDiagonalLaw(String),
    #[error("matrix dimension must be at least 1")]
    ZeroDimension,
    #[error("invalid custom table: {0}")]
    InvalidTable(String),
    #[error("sigmas must satisfy Σσ² = 1 (got Σσ² = {sum_sq:.15})")]
    SigmaNormalization { sum_sq: f64 },
    #[error("sigmas must be finite and nonnegative (got {0})")]
    NegativeSigma(f64),
    #[error("a composite model needs k >= 2 components (got {0})")]
    TooFewComponents(usize),
    #[error("{sigmas} sigmas given for {components} components")]
    SigmaCount { sigmas: usize, components: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerId {
    Gaussian,
    Rademacher,
    UniformCircle,
    SkewedTwoPoint,
    CustomTable,
}

#[derive(Clone, Debug, PartialEq)]
enum Law {
    /// `(g₁ + i g₂)/√2`.
    ComplexGaussian,
    /// `e^{iφ} g` with `g` standard real Gaussian.
    RotatedGaussian { phase: f64 },
    UniformCircle,
    /// Finite support; `cumulative` is the running sum of probabilities.
    Discrete { points: Vec<C64>, probs: Vec<f64>, cumulative: Vec<f64> },
}

/// Law of one unscaled matrix entry: mean 0, `E|h|² = 1`. Matrices use `h/√N`.
#[derive(Clone, Debug, PartialEq)]
pub struct EntryDistribution {
    name: String,
    class: SymmetryClass,
    sampler: SamplerId,
    law: Law,
    twist: C64,
    analytic: Option<CumulantTable>,
}

pub const BUILTIN_NAMES: [&str; 8] = [
    "gaussian_complex",
    "gaussian_real",
    "gaussian_twisted",
    "rademacher_complex",
    "rademacher_real",
    "uniform_circle",
    "skewed_two_point",
    "skewed_two_point_real",
];

fn double_factorial_odd(k: u32) -> f64 {
    // (k−1)!! for even k
    let mut r = 1.0;
    let mut j = k as i64 - 1;
    while j > 1 {
        r *= j as f64;
        j -= 2;
    }
    r
}

fn skewed_points(phase: f64) -> (Vec<C64>, Vec<f64>) {
    let rot = C64::from_polar(1.0, phase);
    (
        vec![rot * 3f64.sqrt(), rot * (-1.0 / 3f64.sqrt())],
        vec![0.25, 0.75],
    )
}

impl EntryDistribution {
    pub fn builtin(name: &str) -> Result<Self, EnsembleError> {
        use SamplerId::*;
        use SymmetryClass::*;
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        let (class, sampler, law) = match name {
            "gaussian_complex" => (Complex, Gaussian, Law::ComplexGaussian),
            "gaussian_real" => (Real, Gaussian, Law::RotatedGaussian { phase: 0.0 }),
            "gaussian_twisted" => (Complex, Gaussian, Law::RotatedGaussian { phase: FRAC_PI_8 }),
            "uniform_circle" => (Complex, UniformCircle, Law::UniformCircle),
            "rademacher_complex" => {
                let pts = vec![C64::new(s2, s2), C64::new(s2, -s2), C64::new(-s2, s2), C64::new(-s2, -s2)];
                (Complex, Rademacher, discrete(pts, vec![0.25; 4]))
            }
            "rademacher_real" => (Real, Rademacher, discrete(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)], vec![0.5; 2])),
            "skewed_two_point" => {
                let (p, w) = skewed_points(FRAC_PI_8);
                (Complex, SkewedTwoPoint, discrete(p, w))
            }
            "skewed_two_point_real" => {
                let (p, w) = skewed_points(0.0);
                (Real, SkewedTwoPoint, discrete(p, w))
            }
            other => return Err(EnsembleError::UnknownDistribution(other.to_string())),
        };
        Ok(Self::finish(name.to_string(), class, sampler, law))
    }

    pub fn builtins() -> Vec<EntryDistribution> {
        BUILTIN_NAMES.iter().map(|n| Self::builtin(n).expect("builtin")).collect()
    }

    /// Discrete law on `points` with probabilities `probs`, checked for
    /// mean 0 and `E|h|² = 1`. A real class additionally needs real points.
    pub fn custom_table(name: &str, class: SymmetryClass, points: Vec<C64>, probs: Vec<f64>) -> Result<Self, EnsembleError> {
        let bad = |m: String| Err(EnsembleError::InvalidTable(m));
        if points.is_empty() || points.len() != probs.len() {
            return bad(format!("{} points with {} probabilities", points.len(), probs.len()));
        }
        if probs.iter().any(|&p| !(p > 0.0 && p.is_finite())) || points.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return bad("probabilities must be positive and points finite".into());
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return bad(format!("probabilities sum to {total}"));
        }
        if class == SymmetryClass::Real && points.iter().any(|z| z.im != 0.0) {
            return bad("real class requires real points".into());
        }
        let mean: C64 = points.iter().zip(&probs).map(|(z, p)| z * p).sum();
        let second: f64 = points.iter().zip(&probs).map(|(z, p)| z.norm_sqr() * p).sum();
        if mean.norm() > NORMALIZATION_TOL {
            return bad(format!("mean is {mean}, expected 0"));
        }
        if (second - 1.0).abs() > NORMALIZATION_TOL {
            return bad(format!("E|h|^2 is {second}, expected 1"));
        }
        Ok(Self::finish(name.to_string(), class, SamplerId::CustomTable, discrete(points, probs)))
    }

    fn finish(name: String, class: SymmetryClass, sampler: SamplerId, law: Law) -> Self {
        let mut d = EntryDistribution {
            name,
            class,
            sampler,
            law,
            twist: C64::new(0.0, 0.0),
            analytic: None,
        };
        d.twist = d.moment(2, 0);
        d.analytic = cumulants_from_moments(&d.moment_table(4), 4).ok().map(CumulantTable::hermitize);
        d
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn symmetry_class(&self) -> SymmetryClass {
        self.class
    }

    pub fn sampler_id(&self) -> SamplerId {
        self.sampler
    }

    /// `τ = E h²` of the unscaled law (equivalently `N E h²` of the matrix entry).
    pub fn second_moment_twist(&self) -> C64 {
        self.twist
    }

    /// Cumulants up to order 4 of the unscaled law.
    pub fn analytic_cumulants(&self) -> Option<&CumulantTable> {
        self.analytic.as_ref()
    }

    /// Exact `E h^p h̄^q` of the unscaled law.
    pub fn moment(&self, p: u32, q: u32) -> C64 {
        match &self.law {
            Law::ComplexGaussian => {
                if p == q {
                    C64::new((1..=p).map(|k| k as f64).product(), 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }
            Law::RotatedGaussian { phase } => {
                if (p + q) % 2 == 1 {
                    C64::new(0.0, 0.0)
                } else {
                    C64::from_polar(double_factorial_odd(p + q), phase * (p as f64 - q as f64))
                }
            }
            Law::UniformCircle => C64::new(if p == q { 1.0 } else { 0.0 }, 0.0),
            Law::Discrete { points, probs, .. } => points
                .iter()
                .zip(probs)
                .map(|(z, w)| z.powu(p) * z.conj().powu(q) * *w)
                .sum(),
        }
    }

    pub fn moment_table(&self, max_order: u32) -> MomentTable {
        MomentTable::from_fn(self.class, max_order, |p, q| self.moment(p, q))
    }

    /// One draw of the unscaled law.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> C64 {
        match &self.law {
            Law::ComplexGaussian => {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                C64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
            }
            Law::RotatedGaussian { phase } => {
                let g: f64 = rng.sample(StandardNormal);
                if *phase == 0.0 {
                    C64::new(g, 0.0)
                } else {
                    C64::from_polar(1.0, *phase) * g
                }
            }
            Law::UniformCircle => C64::from_polar(1.0, 2.0 * PI * rng.random::<f64>()),
            Law::Discrete { points, cumulative, .. } => {
                let u: f64 = rng.random();
                let k = cumulative.iter().position(|&c| u < c).unwrap_or(points.len() - 1);
                points[k]
            }
        }
    }
}

fn discrete(points: Vec<C64>, probs: Vec<f64>) -> Law {
    let mut acc = 0.0;
    let cumulative = probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    Law::Discrete { points, probs, cumulative }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    ComplexHermitian,
    RealSymmetric,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSpec {
    n: usize,
    symmetry: Symmetry,
    offdiag: EntryDistribution,
    diag: EntryDistribution,
}

impl EnsembleSpec {
    pub fn new(n: usize, symmetry: Symmetry, offdiag: EntryDistribution, diag: EntryDistribution) -> Result<Self, EnsembleError> {
        if n == 0 {
            return Err(EnsembleError::ZeroDimension);
        }
        if symmetry == Symmetry::RealSymmetric && offdiag.class != SymmetryClass::Real {
            return Err(EnsembleError::ComplexLawOnRealSpec(offdiag.name.clone()));
        }
        if diag.class != SymmetryClass::Real {
            return Err(EnsembleError::ComplexDiagonalLaw(diag.name.clone()));
        }
        Ok(EnsembleSpec { n, symmetry, offdiag, diag })
    }

    /// Complex Hermitian matrix with the named off-diagonal law and Gaussian diagonal.
    pub fn complex_hermitian(n: usize, offdiag: &str) -> Result<Self, EnsembleError> {
        Self::new(n, Symmetry::ComplexHermitian, EntryDistribution::builtin(offdiag)?, EntryDistribution::builtin("gaussian_real")?)
    }

    pub fn real_symmetric(n: usize, offdiag: &str) -> Result<Self, EnsembleError> {
        Self::new(n, Symmetry::RealSymmetric, EntryDistribution::builtin(offdiag)?, EntryDistribution::builtin("gaussian_real")?)
    }

    pub fn gue(n: usize) -> Self {
        Self::complex_hermitian(n, "gaussian_complex").expect("builtin")
    }

    pub fn goe(n: usize) -> Self {
        Self::real_symmetric(n, "gaussian_real").expect("builtin")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn offdiag(&self) -> &EntryDistribution {
        &self.offdiag
    }

    pub fn diag(&self) -> &EntryDistribution {
        &self.diag
    }

    pub fn with_dimension(&self, n: usize) -> Result<Self, EnsembleError> {
        Self::new(n, self.symmetry, self.offdiag.clone(), self.diag.clone())
    }

    /// `N E|h_ii|²`: 1 for complex Hermitian, 2 for real symmetric.
    pub fn diagonal_variance_factor(&self) -> f64 {
        match self.symmetry {
            Symmetry::ComplexHermitian => 1.0,
            Symmetry::RealSymmetric => 2.0,
        }
    }

    /// True when every sampled matrix is real.
    pub fn is_real_valued(&self) -> bool {
        self.offdiag.class == SymmetryClass::Real
    }
}

/// Samples one Wigner matrix. Entry `(i, j)` with `i ≥ j` is drawn from its own
/// counter-keyed stream, so results do not depend on evaluation order.
pub fn sample_wigner(spec: &EnsembleSpec, key: StreamKey) -> HermitianMatrix {
    let n = spec.n;
    let s = 1.0 / (n as f64).sqrt();
    let sd = (spec.diagonal_variance_factor() / n as f64).sqrt();
    HermitianMatrix::from_lower_fn(n, |i, j| {
        let mut rng = key.entry(i, j);
        if i == j {
            C64::new(spec.diag.sample(&mut rng).re * sd, 0.0)
        } else {
            spec.offdiag.sample(&mut rng) * s
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompositeModel {
    sigmas: Vec<f64>,
    components: Vec<EnsembleSpec>,
}

impl CompositeModel {
    pub fn new(sigmas: Vec<f64>, components: Vec<EnsembleSpec>) -> Result<Self, EnsembleError> {
        if components.len() < 2 {
            return Err(EnsembleError::TooFewComponents(components.len()));
        }
        if sigmas.len() != components.len() {
            return Err(EnsembleError::SigmaCount {
                sigmas: sigmas.len(),
                components: components.len(),
            });
        }
        if let Some(&s) = sigmas.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(EnsembleError::NegativeSigma(s));
        }
        check_normalization(&sigmas)?;
        let n = components[0].n;
        if let Some(c) = components.iter().find(|c| c.n != n) {
            return Err(EnsembleError::DimensionMismatch { left: n, right: c.n });
        }
        Ok(CompositeModel { sigmas, components })
    }

    /// `k` copies of one spec with equal weights `1/√k`.
    pub fn equal_weights(spec: EnsembleSpec, k: usize) -> Result<Self, EnsembleError> {
        let s = 1.0 / (k as f64).sqrt();
        Self::new(vec![s; k], vec![spec; k])
    }

    pub fn gue_pair(n: usize, sigmas: [f64; 2]) -> Result<Self, EnsembleError> {
        Self::new(sigmas.to_vec(), vec![EnsembleSpec::gue(n), EnsembleSpec::gue(n)])
    }

    pub fn goe_pair(n: usize, sigmas: [f64; 2]) -> Result<Self, EnsembleError> {
        Self::new(sigmas.to_vec(), vec![EnsembleSpec::goe(n), EnsembleSpec::goe(n)])
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn n(&self) -> usize {
        self.components[0].n
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn components(&self) -> &[EnsembleSpec] {
        &self.components
    }

    pub fn with_dimension(&self, n: usize) -> Result<Self, EnsembleError> {
        let comps = self.components.iter().map(|c| c.with_dimension(n)).collect::<Result<Vec<_>, _>>()?;
        Ok(CompositeModel {
            sigmas: self.sigmas.clone(),
            components: comps,
        })
    }

    pub fn is_real_valued(&self) -> bool {
        self.components.iter().all(EnsembleSpec::is_real_valued)
    }

    pub fn is_gaussian(&self) -> bool {
        self.components
            .iter()
            .all(|c| c.offdiag.sampler == SamplerId::Gaussian && c.diag.sampler == SamplerId::Gaussian)
    }
}

fn check_normalization(sigmas: &[f64]) -> Result<(), EnsembleError> {
    let sum_sq: f64 = sigmas.iter().map(|s| s * s).sum();
    if (sum_sq - 1.0).abs() > NORMALIZATION_TOL {
        return Err(EnsembleError::SigmaNormalization { sum_sq });
    }
    Ok(())
}

/// Samples the components independently and returns `(H, parts)` with
/// `H = Σ σ_ι parts[ι]` accumulated in component order.
pub fn sample_composite(model: &CompositeModel, key: StreamKey) -> (HermitianMatrix, Vec<HermitianMatrix>) {
    let parts: Vec<HermitianMatrix> = model
        .components
        .iter()
        .enumerate()
        .map(|(c, spec)| sample_wigner(spec, key.with_component(c as u32)))
        .collect();
    let h = combine(&model.sigmas, &parts).expect("components share a dimension");
    (h, parts)
}

pub fn combine(sigmas: &[f64], parts: &[HermitianMatrix]) -> Result<HermitianMatrix, EnsembleError> {
    let terms: Vec<(f64, &HermitianMatrix)> = sigmas.iter().copied().zip(parts.iter()).collect();
    HermitianMatrix::linear_combination(&terms).map_err(|_| EnsembleError::DimensionMismatch {
        left: parts[0].dim(),
        right: parts.iter().map(|p| p.dim()).find(|&d| d != parts[0].dim()).unwrap_or(0),
    })
}

/// `𝓗 = σ₂ H₁ − σ₁ H₂`.
pub fn auxiliary_matrix(h1: &HermitianMatrix, h2: &HermitianMatrix, sigma1: f64, sigma2: f64) -> Result<HermitianMatrix, EnsembleError> {
    if h1.dim() != h2.dim() {
        return Err(EnsembleError::DimensionMismatch {
            left: h1.dim(),
            right: h2.dim(),
        });
    }
    check_normalization(&[sigma1, sigma2])?;
    Ok(HermitianMatrix::linear_combination(&[(sigma2, h1), (-sigma1, h2)]).expect("dimensions checked"))
}
