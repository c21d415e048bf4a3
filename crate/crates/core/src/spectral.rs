//! Eigendecomposition, resolvents, the observables `⟨𝓗 Im G 𝓗 Im G⟩` and
//! `𝓧 = ⟨𝓗 G 𝓗 G′⟩`, the centering `ϰ`, eigenvector quadratic forms and
//! finite-difference checks of the derivation-operator rules.

use faer::{Mat, MatRef, Side};
use num_complex::Complex;
use qd::Quad;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cumulants::SymmetryClass;
use crate::ensembles::{auxiliary_matrix, combine, CompositeModel, EnsembleError, EnsembleSpec, Symmetry};
use crate::linalg::{cdd, cdd_round, lu_inverse, lu_inverse_dd, max_abs, trace_of_product, Cdd, HermitianMatrix, LinalgError};
use crate::semicircle::SpectralPoint;
use crate::C64;

/// Components with magnitude at or below this are skipped when fixing the phase.
const PHASE_THRESHOLD: f64 = 1e-10;
/// Relative agreement required between the spectral-sum and matrix-product routes.
pub const ROUTE_TOLERANCE: f64 = 1e-8;
/// Deviation tables are stored densely only up to this dimension.
pub const DENSE_TABLE_MAX_N: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error("eigensolver did not converge")]
    NoConvergence,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("observable routes disagree: spectral {spectral:e} vs matrix {matrix:e} (relative {relative:e})")]
    RouteMismatch { spectral: f64, matrix: f64, relative: f64 },
    #[error("step must be positive and finite (got {0})")]
    InvalidStep(f64),
}

/// Ascending eigenvalues and the matching orthonormal eigenvectors (columns).
/// Each eigenvector is scaled so that its first component above `1e-10` in
/// magnitude is real and positive.
#[derive(Clone, Debug)]
pub struct SpectralData {
    eigenvalues: Vec<f64>,
    eigenvectors: Mat<C64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractReport {
    /// `max_α ‖H w_α − λ_α w_α‖₂ / max(‖H‖, 1)`
    pub relative_residual: f64,
    /// `max_{α,β} |w_α* w_β − δ_{αβ}|`
    pub orthonormality: f64,
    pub ascending: bool,
}

impl ContractReport {
    pub fn holds(&self) -> bool {
        self.ascending && self.relative_residual <= 1e-10 && self.orthonormality <= 1e-10
    }
}

pub fn eigh(h: &HermitianMatrix) -> Result<SpectralData, SpectralError> {
    let n = h.dim();
    let evd = h.as_mat().self_adjoint_eigen(Side::Lower).map_err(|_| SpectralError::NoConvergence)?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    let vals: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(SpectralError::NoConvergence);
    }
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let mut w = Mat::<C64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = u.col(src);
        let phase = (0..n)
            .map(|i| col[i])
            .find(|x| x.norm() > PHASE_THRESHOLD)
            .map(|x| x.conj() / x.norm())
            .unwrap_or(C64::new(1.0, 0.0));
        for i in 0..n {
            w[(i, dst)] = col[i] * phase;
        }
        // exact zero imaginary part on the pivot component
        if let Some(i) = (0..n).find(|&i| w[(i, dst)].norm() > PHASE_THRESHOLD) {
            w[(i, dst)].im = 0.0;
        }
    }
    Ok(SpectralData {
        eigenvalues: order.iter().map(|&i| vals[i]).collect(),
        eigenvectors: w,
    })
}

/// Eigenvalues only (ascending).
pub fn eigenvalues(h: &HermitianMatrix) -> Result<Vec<f64>, SpectralError> {
    let mut v = h.as_mat().self_adjoint_eigenvalues(Side::Lower).map_err(|_| SpectralError::NoConvergence)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(SpectralError::NoConvergence);
    }
    v.sort_by(f64::total_cmp);
    Ok(v)
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> MatRef<'_, C64> {
        self.eigenvectors.as_ref()
    }

    pub fn check_contract(&self, h: &HermitianMatrix) -> ContractReport {
        let n = self.dim();
        let w = self.eigenvectors.as_ref();
        let hw = h.as_mat() * w;
        let norm = self.eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs())).max(1.0);
        let mut res: f64 = 0.0;
        for a in 0..n {
            let r: f64 = (0..n).map(|i| (hw[(i, a)] - w[(i, a)] * self.eigenvalues[a]).norm_sqr()).sum();
            res = res.max(r.sqrt());
        }
        let gram = w.adjoint() * w;
        let mut orth: f64 = 0.0;
        for b in 0..n {
            for a in 0..n {
                let e = if a == b { 1.0 } else { 0.0 };
                orth = orth.max((gram[(a, b)] - C64::new(e, 0.0)).norm());
            }
        }
        ContractReport {
            relative_residual: res / norm,
            orthonormality: orth,
            ascending: self.eigenvalues.windows(2).all(|p| p[0] <= p[1]),
        }
    }

    /// `Σ λ_α w_α w_α*`.
    pub fn reconstruct(&self) -> Mat<C64> {
        let w = self.eigenvectors.as_ref();
        let mut wl = w.to_owned();
        for (a, &l) in self.eigenvalues.iter().enumerate() {
            for i in 0..self.dim() {
                wl[(i, a)] *= l;
            }
        }
        &wl * w.adjoint()
    }

    /// `g_α = 1/(λ_α − z)`.
    pub fn resolvent_weights(&self, z: SpectralPoint) -> Vec<C64> {
        let zc = z.z();
        self.eigenvalues.iter().map(|&l| 1.0 / (C64::new(l, 0.0) - zc)).collect()
    }

    fn weighted_outer(&self, weights: &[C64]) -> Mat<C64> {
        let w = self.eigenvectors.as_ref();
        let mut scaled = w.to_owned();
        for (a, g) in weights.iter().enumerate() {
            for i in 0..self.dim() {
                scaled[(i, a)] *= g;
            }
        }
        &scaled * w.adjoint()
    }

    /// `G(z) = Σ_α w_α w_α* / (λ_α − z)`.
    pub fn resolvent(&self, z: SpectralPoint) -> Mat<C64> {
        self.weighted_outer(&self.resolvent_weights(z))
    }

    /// `Im G(z) = (G(z) − G(z)*)/(2i) = Σ_α w_α w_α* Im g_α`.
    pub fn im_resolvent(&self, z: SpectralPoint) -> Mat<C64> {
        let a: Vec<C64> = self.resolvent_weights(z).iter().map(|g| C64::new(g.im, 0.0)).collect();
        self.weighted_outer(&a)
    }

    /// `m(z) = (1/N) Tr G(z)`.
    pub fn normalized_trace_m(&self, z: SpectralPoint) -> C64 {
        let g = self.resolvent_weights(z);
        g.iter().sum::<C64>() / self.dim() as f64
    }

    /// `W* A W`, the matrix of `A` in the eigenbasis: entry `(α, β)` is `w_α* A w_β`.
    pub fn project(&self, a: &HermitianMatrix) -> Result<Mat<C64>, SpectralError> {
        if a.dim() != self.dim() {
            return Err(SpectralError::DimensionMismatch {
                left: self.dim(),
                right: a.dim(),
            });
        }
        let w = self.eigenvectors.as_ref();
        Ok(w.adjoint() * (a.as_mat() * w))
    }
}

/// `(H − z)^{-1}` by LU with partial pivoting, independent of the eigensolver.
pub fn resolvent_direct(h: &HermitianMatrix, z: SpectralPoint) -> Result<Mat<C64>, SpectralError> {
    let n = h.dim();
    let zc = z.z();
    let a = Mat::<C64>::from_fn(n, n, |i, j| if i == j { h.get(i, j) - zc } else { h.get(i, j) });
    Ok(lu_inverse(a.as_ref())?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSample {
    pub z1: SpectralPoint,
    pub z2: SpectralPoint,
    /// `⟨𝓗 G(z1) 𝓗 G(z2)⟩`
    pub value_x: C64,
    /// `⟨𝓗 Im G(z1) 𝓗 Im G(z2)⟩` from the double spectral sum.
    pub value_imim: f64,
    /// The same quantity from matrix products.
    pub value_imim_matrix: f64,
    /// `𝓧` from the double spectral sum.
    pub value_x_spectral: C64,
    /// Largest relative disagreement between the two routes.
    pub route_discrepancy: f64,
    pub varkappa: Option<C64>,
}

/// Evaluates both observables by matrix products and by the double spectral
/// sum `(1/N) Σ_{αβ} |w_α* 𝓗 w_β|² a_β b_α`, and fails if they disagree by more
/// than `1e-8` relative to the sum of absolute summands.
pub fn observable(sd: &SpectralData, haux: &HermitianMatrix, z1: SpectralPoint, z2: SpectralPoint) -> Result<ObservableSample, SpectralError> {
    let n = sd.dim();
    let hh = sd.project(haux)?;
    let g1 = sd.resolvent_weights(z1);
    let g2 = sd.resolvent_weights(z2);
    let mut imim = 0.0;
    let mut imim_abs = 0.0;
    let mut x = C64::new(0.0, 0.0);
    let mut x_abs = 0.0;
    for b in 0..n {
        for a in 0..n {
            let w = hh[(a, b)].norm_sqr();
            imim += w * g1[b].im * g2[a].im;
            imim_abs += w * (g1[b].im * g2[a].im).abs();
            x += g1[b] * g2[a] * w;
            x_abs += w * g1[b].norm() * g2[a].norm();
        }
    }
    let nf = n as f64;
    let (imim, imim_abs, x, x_abs) = (imim / nf, imim_abs / nf, x / nf, x_abs / nf);

    let hm = haux.as_mat();
    let im1 = sd.im_resolvent(z1);
    let im2 = if z2 == z1 { im1.clone() } else { sd.im_resolvent(z2) };
    let imim_matrix = trace_of_product((hm * &im1).as_ref(), (hm * &im2).as_ref()).re / nf;
    let gm1 = sd.resolvent(z1);
    let gm2 = if z2 == z1 { gm1.clone() } else { sd.resolvent(z2) };
    let x_matrix = trace_of_product((hm * &gm1).as_ref(), (hm * &gm2).as_ref()) / nf;

    let rel = |d: f64, scale: f64| if scale > 0.0 { d / scale } else { d };
    let d1 = rel((imim - imim_matrix).abs(), imim_abs);
    let d2 = rel((x - x_matrix).norm(), x_abs);
    let discrepancy = d1.max(d2);
    if !(discrepancy <= ROUTE_TOLERANCE) {
        return Err(SpectralError::RouteMismatch {
            spectral: imim,
            matrix: imim_matrix,
            relative: discrepancy,
        });
    }
    Ok(ObservableSample {
        z1,
        z2,
        value_x: x_matrix,
        value_imim: imim,
        value_imim_matrix: imim_matrix,
        value_x_spectral: x,
        route_discrepancy: discrepancy,
        varkappa: None,
    })
}

/// `observable` plus `ϰ(z1, z2)` for the given two-component model.
pub fn observable_for_model(
    sd: &SpectralData,
    haux: &HermitianMatrix,
    model: &CompositeModel,
    z1: SpectralPoint,
    z2: SpectralPoint,
) -> Result<ObservableSample, SpectralError> {
    let mut s = observable(sd, haux, z1, z2)?;
    s.varkappa = Some(varkappa(sd, model, z1, z2)?);
    Ok(s)
}

/// `N E h_ij²` for an entry of the given component, in the stored orientation:
/// the sampled law sits below the diagonal (`i > j`), its conjugate above.
fn scaled_second_moment(spec: &EnsembleSpec, i: usize, j: usize) -> C64 {
    use std::cmp::Ordering::*;
    match i.cmp(&j) {
        Equal => C64::new(spec.diagonal_variance_factor(), 0.0),
        Greater => spec.offdiag().second_moment_twist(),
        Less => spec.offdiag().second_moment_twist().conj(),
    }
}

/// Centering of `𝓧`: `ϰ = m(z1) m(z2) + (1/N) Σ_{ij} c_ij G_ji(z1) G_ji(z2)` with
/// `c_ij = Σ_ι σ_{ι'}² (E h_{ι,ij}² − δ_ij/N)` (ι' the other component).
/// The correction vanishes for complex laws with `τ = 0`, and reduces to
/// `(1/N²) Σ G_ij(z1) G_ji(z2)` for real symmetric components.
pub fn varkappa(sd: &SpectralData, model: &CompositeModel, z1: SpectralPoint, z2: SpectralPoint) -> Result<C64, SpectralError> {
    if model.k() != 2 {
        return Err(SpectralError::Unsupported(format!("varkappa needs a two-component model, got k={}", model.k())));
    }
    if model.n() != sd.dim() {
        return Err(SpectralError::DimensionMismatch {
            left: sd.dim(),
            right: model.n(),
        });
    }
    let n = sd.dim();
    let s = model.sigmas();
    let (c1, c2) = (&model.components()[0], &model.components()[1]);
    let weight = |i: usize, j: usize| -> C64 {
        let d = if i == j { 1.0 } else { 0.0 };
        (scaled_second_moment(c1, i, j) - d) * (s[1] * s[1]) + (scaled_second_moment(c2, i, j) - d) * (s[0] * s[0])
    };
    let lead = sd.normalized_trace_m(z1) * sd.normalized_trace_m(z2);
    let trivial = (0..n.min(2)).all(|i| (0..n.min(2)).all(|j| weight(i, j).norm() == 0.0));
    if trivial {
        return Ok(lead);
    }
    let g1 = sd.resolvent(z1);
    let g2 = if z2 == z1 { g1.clone() } else { sd.resolvent(z2) };
    let (w_lower, w_diag, w_upper) = (weight(1, 0), weight(0, 0), weight(0, 1));
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            let c = match i.cmp(&j) {
                std::cmp::Ordering::Greater => w_lower,
                std::cmp::Ordering::Equal => w_diag,
                std::cmp::Ordering::Less => w_upper,
            };
            acc += c * g1[(j, i)] * g2[(j, i)];
        }
    }
    Ok(lead + acc / (n as f64 * n as f64))
}

/// Per-component summary of `D_ι[α,β] = w_α* H_ι w_β − σ_ι λ_α δ_{αβ}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentDeviation {
    pub max_abs: f64,
    pub max_diag: f64,
    pub max_offdiag: f64,
    pub frobenius: f64,
    /// `max_β |D_ι[α,β]|` for each α.
    pub per_alpha_max: Vec<f64>,
    /// Dense table, kept only for `N ≤ 256`.
    #[serde(skip)]
    pub table: Option<Mat<C64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationTable {
    pub components: Vec<ComponentDeviation>,
    /// `r[α] = |Σ_ι σ_ι w_α* H_ι w_α − λ_α|`
    pub identity_residual: Vec<f64>,
}

impl DeviationTable {
    pub fn max_abs(&self) -> f64 {
        self.components.iter().map(|c| c.max_abs).fold(0.0, f64::max)
    }

    pub fn max_diag(&self) -> f64 {
        self.components.iter().map(|c| c.max_diag).fold(0.0, f64::max)
    }

    pub fn max_offdiag(&self) -> f64 {
        self.components.iter().map(|c| c.max_offdiag).fold(0.0, f64::max)
    }

    pub fn max_identity_residual(&self) -> f64 {
        self.identity_residual.iter().copied().fold(0.0, f64::max)
    }
}

pub fn quadratic_forms(sd: &SpectralData, parts: &[HermitianMatrix], sigmas: &[f64]) -> Result<DeviationTable, SpectralError> {
    if parts.len() != sigmas.len() {
        return Err(SpectralError::DimensionMismatch {
            left: parts.len(),
            right: sigmas.len(),
        });
    }
    let n = sd.dim();
    let mut diag_sum = vec![0.0f64; n];
    let mut components = Vec::with_capacity(parts.len());
    for (part, &sigma) in parts.iter().zip(sigmas) {
        let mut p = sd.project(part)?;
        let mut per_alpha = vec![0.0f64; n];
        let (mut md, mut mo, mut fro) = (0.0f64, 0.0f64, 0.0f64);
        for b in 0..n {
            for a in 0..n {
                if a == b {
                    diag_sum[a] += sigma * p[(a, a)].re;
                    p[(a, a)] -= C64::new(sigma * sd.eigenvalues[a], 0.0);
                }
                let v = p[(a, b)].norm();
                per_alpha[a] = per_alpha[a].max(v);
                fro += v * v;
                if a == b {
                    md = md.max(v);
                } else {
                    mo = mo.max(v);
                }
            }
        }
        components.push(ComponentDeviation {
            max_abs: md.max(mo),
            max_diag: md,
            max_offdiag: mo,
            frobenius: fro.sqrt(),
            per_alpha_max: per_alpha,
            table: (n <= DENSE_TABLE_MAX_N).then_some(p),
        });
    }
    let identity_residual = diag_sum.iter().zip(&sd.eigenvalues).map(|(s, l)| (s - l).abs()).collect();
    Ok(DeviationTable {
        components,
        identity_residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub i: usize,
    pub j: usize,
    pub z: SpectralPoint,
    pub step: f64,
    /// `max |σ₂ ∂₁G − σ₁ ∂₂G|` from finite differences.
    pub cancellation: f64,
    /// `max |FD ∂_ι G − analytic|` at `step`, per component.
    pub fd_error: [f64; 2],
    /// The same at `step/2`.
    pub fd_error_half: [f64; 2],
    /// `fd_error / fd_error_half`; about 4 for a second-order scheme.
    pub fd_ratio: [f64; 2],
    /// `max |𝒟𝓗 − expected delta pattern|`.
    pub delta_structure_error: f64,
    /// For complex off-diagonal indices: `max |𝒟^{(0,1)}𝓗 − N(σ₂²κ₁ + σ₁²κ₂)Δ^{ij}|`
    /// with `κ_ι = E h_{ι,ij}²`.
    pub twist_rule_error: Option<f64>,
    /// For complex off-diagonal indices: `max |𝒟^{(0,1)} G|`, zero when both
    /// components share `E h²`.
    pub twist_cancellation: Option<f64>,
}

struct Perturbation {
    /// Entry `(j, i)` is the variable; the partner entry `(i, j)` moves with it.
    i: usize,
    j: usize,
    /// Real and imaginary directions for a complex off-diagonal variable.
    complex: bool,
}

impl Perturbation {
    fn apply(&self, m: &HermitianMatrix, delta: f64, imaginary: bool) -> HermitianMatrix {
        let (i, j) = (self.i, self.j);
        let n = m.dim();
        let dir_ji = if imaginary { C64::new(0.0, delta) } else { C64::new(delta, 0.0) };
        let a = Mat::<C64>::from_fn(n, n, |r, c| {
            let mut v = m.get(r, c);
            if (r, c) == (j, i) {
                v += dir_ji;
            }
            if i != j && (r, c) == (i, j) {
                v += dir_ji.conj();
            }
            v
        });
        HermitianMatrix::from_mat(a.as_ref(), 0.0).expect("perturbation keeps Hermitian structure")
    }
}

/// Delta matrix with a one at `(a, b)`.
fn delta(n: usize, a: usize, b: usize) -> Mat<C64> {
    Mat::from_fn(n, n, |r, c| if (r, c) == (a, b) { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

fn diff_max(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> f64 {
    max_abs((a - b).as_ref())
}

/// Finite-difference checks of the first-order derivation rules for a
/// two-component model at entry `(j, i)`.
///
/// Derivatives are taken with respect to `h_{ι,ji}` with its symmetry partner
/// `h_{ι,ij}` following; complex off-diagonal variables use central differences
/// in the real and imaginary directions assembled as `∂_w = (∂_x − i∂_y)/2`.
pub fn derivation_check(
    model: &CompositeModel,
    parts: &[HermitianMatrix],
    z: SpectralPoint,
    (i, j): (usize, usize),
    step: f64,
) -> Result<CheckReport, SpectralError> {
    if model.k() != 2 || parts.len() != 2 {
        return Err(SpectralError::Unsupported(format!("derivation_check needs k=2, got k={}", model.k())));
    }
    let sym = model.components()[0].symmetry();
    if model.components()[1].symmetry() != sym {
        return Err(SpectralError::Unsupported("derivation_check needs both components in one symmetry class".into()));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(SpectralError::InvalidStep(step));
    }
    let n = model.n();
    for p in parts {
        if p.dim() != n {
            return Err(SpectralError::DimensionMismatch { left: n, right: p.dim() });
        }
    }
    if i >= n || j >= n {
        return Err(SpectralError::DimensionMismatch { left: n, right: i.max(j) + 1 });
    }
    let sig = model.sigmas();
    let pert = Perturbation {
        i,
        j,
        complex: sym == Symmetry::ComplexHermitian && i != j,
    };
    let h = combine(sig, parts)?;
    let g = resolvent_direct(&h, z)?;

    // Central difference of G after moving component ι by ±δ in one direction.
    // The resolvents are formed in double-double so that the O(δ²) truncation
    // error is not buried under the ε|G|/δ rounding of the subtraction.
    let fd = |iota: usize, delta: f64, imaginary: bool| -> Result<Mat<C64>, SpectralError> {
        let zc = cdd(z.z());
        let base: Vec<Cdd> = (0..n * n)
            .map(|idx| {
                let (r, c) = (idx / n, idx % n);
                let mut v = Complex::new(Quad::ZERO, Quad::ZERO);
                for (s, p) in sig.iter().zip(parts) {
                    v = v + cdd(p.get(r, c)) * Quad::from(*s);
                }
                if r == c {
                    v = v - zc;
                }
                v
            })
            .collect();
        let shift = Quad::from(sig[iota]) * Quad::from(delta);
        let dir = if imaginary {
            Complex::new(Quad::ZERO, shift)
        } else {
            Complex::new(shift, Quad::ZERO)
        };
        let moved = |sign: Quad| -> Result<Vec<Cdd>, SpectralError> {
            let mut a = base.clone();
            a[j * n + i] = a[j * n + i] + dir * sign;
            if i != j {
                a[i * n + j] = a[i * n + j] + dir.conj() * sign;
            }
            Ok(lu_inverse_dd(a, n)?)
        };
        let gp = moved(Quad::ONE)?;
        let gm = moved(-Quad::ONE)?;
        let inv = Quad::ONE / (Quad::from(2.0) * Quad::from(delta));
        Ok(Mat::from_fn(n, n, |r, c| cdd_round((gp[r * n + c] - gm[r * n + c]) * inv)))
    };
    // (∂_w, ∂_w̄) of G with respect to component ι.
    let wirtinger = |iota: usize, delta: f64| -> Result<(Mat<C64>, Option<Mat<C64>>), SpectralError> {
        let dx = fd(iota, delta, false)?;
        if !pert.complex {
            return Ok((dx, None));
        }
        let dy = fd(iota, delta, true)?;
        let half_i = faer::Scale(C64::new(0.0, 0.5));
        let d = &dx * faer::Scale(C64::new(0.5, 0.0)) - &dy * half_i;
        let dbar = &dx * faer::Scale(C64::new(0.5, 0.0)) + &dy * half_i;
        Ok((d, Some(dbar)))
    };
    let direction = if pert.complex || i == j {
        delta(n, j, i)
    } else {
        delta(n, j, i) + delta(n, i, j)
    };
    let analytic = |iota: usize| -> Mat<C64> { (&g * &direction * &g) * faer::Scale(C64::new(-sig[iota], 0.0)) };

    let (d1, d1bar) = wirtinger(0, step)?;
    let (d2, d2bar) = wirtinger(1, step)?;
    let combo = &d1 * faer::Scale(C64::new(sig[1], 0.0)) - &d2 * faer::Scale(C64::new(sig[0], 0.0));
    let cancellation = max_abs(combo.as_ref());
    let (h1, _) = wirtinger(0, step / 2.0)?;
    let (h2, _) = wirtinger(1, step / 2.0)?;
    let fd_error = [diff_max(d1.as_ref(), analytic(0).as_ref()), diff_max(d2.as_ref(), analytic(1).as_ref())];
    let fd_error_half = [diff_max(h1.as_ref(), analytic(0).as_ref()), diff_max(h2.as_ref(), analytic(1).as_ref())];
    let fd_ratio = [fd_error[0] / fd_error_half[0], fd_error[1] / fd_error_half[1]];

    // 𝓗 is linear in the entries, so a unit central difference is exact up to rounding.
    let aux = |p: &[HermitianMatrix]| auxiliary_matrix(&p[0], &p[1], sig[0], sig[1]);
    let aux_diff = |iota: usize, imaginary: bool| -> Result<Mat<C64>, SpectralError> {
        let mut plus = parts.to_vec();
        let mut minus = parts.to_vec();
        plus[iota] = pert.apply(&parts[iota], 1.0, imaginary);
        minus[iota] = pert.apply(&parts[iota], -1.0, imaginary);
        Ok((aux(&plus)?.into_mat() - aux(&minus)?.into_mat()) * faer::Scale(C64::new(0.5, 0.0)))
    };
    let aux_wirtinger = |iota: usize, conj: bool| -> Result<Mat<C64>, SpectralError> {
        let dx = aux_diff(iota, false)?;
        if !pert.complex {
            return Ok(dx);
        }
        let dy = aux_diff(iota, true)?;
        let sign = if conj { 0.5 } else { -0.5 };
        Ok(&dx * faer::Scale(C64::new(0.5, 0.0)) + &dy * faer::Scale(C64::new(0.0, sign)))
    };
    let dh = aux_wirtinger(0, false)? * faer::Scale(C64::new(sig[1], 0.0)) - aux_wirtinger(1, false)? * faer::Scale(C64::new(sig[0], 0.0));
    let delta_structure_error = diff_max(dh.as_ref(), direction.as_ref());

    let (twist_rule_error, twist_cancellation) = if pert.complex {
        let nf = n as f64;
        let k1 = scaled_second_moment(&model.components()[0], i, j) / nf;
        let k2 = scaled_second_moment(&model.components()[1], i, j) / nf;
        let w1 = k1 * (nf * sig[1]);
        let w2 = k2 * (nf * sig[0]);
        let op_h = aux_wirtinger(0, true)? * faer::Scale(w1) - aux_wirtinger(1, true)? * faer::Scale(w2);
        let expected = delta(n, i, j) * faer::Scale((k1 * (sig[1] * sig[1]) + k2 * (sig[0] * sig[0])) * nf);
        let op_g = d1bar.expect("complex") * faer::Scale(w1) - d2bar.expect("complex") * faer::Scale(w2);
        (Some(diff_max(op_h.as_ref(), expected.as_ref())), Some(max_abs(op_g.as_ref())))
    } else {
        (None, None)
    };

    Ok(CheckReport {
        i,
        j,
        z,
        step,
        cancellation,
        fd_error,
        fd_error_half,
        fd_ratio,
        delta_structure_error,
        twist_rule_error,
        twist_cancellation,
    })
}

/// Whether the model is a pair of complex Gaussian components with `τ = 0`.
pub fn is_gue_pair(model: &CompositeModel) -> bool {
    model.k() == 2
        && model.components().iter().all(|c| {
            c.symmetry() == Symmetry::ComplexHermitian
                && c.offdiag().name() == "gaussian_complex"
                && c.diag().name() == "gaussian_real"
                && c.offdiag().symmetry_class() == SymmetryClass::Complex
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{sample_composite, sample_wigner};
    use crate::rng::StreamKey;
    use crate::semicircle::m_sc;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn sp(e: f64, eta: f64) -> SpectralPoint {
        SpectralPoint::new(e, eta).unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eigh_diagonal() {
        let h = HermitianMatrix::from_real_diagonal(&[3.0, 1.0, 2.0]);
        let sd = eigh(&h).unwrap();
        assert_eq!(sd.eigenvalues(), &[1.0, 2.0, 3.0]);
        let w = sd.eigenvectors();
        let expect = [1usize, 2, 0];
        for (a, &row) in expect.iter().enumerate() {
            for i in 0..3 {
                let e = if i == row { 1.0 } else { 0.0 };
                assert!((w[(i, a)] - c(e, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn eigh_two_by_two_phase() {
        let h = HermitianMatrix::from_lower_fn(2, |i, j| if i != j { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let sd = eigh(&h).unwrap();
        assert!((sd.eigenvalues()[0] + 1.0).abs() < 1e-14);
        assert!((sd.eigenvalues()[1] - 1.0).abs() < 1e-14);
        let w = sd.eigenvectors();
        let r = FRAC_1_SQRT_2;
        assert!((w[(0, 0)] - c(r, 0.0)).norm() < 1e-14 && (w[(1, 0)] - c(-r, 0.0)).norm() < 1e-14);
        assert!((w[(0, 1)] - c(r, 0.0)).norm() < 1e-14 && (w[(1, 1)] - c(r, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn eigh_contract_and_reconstruction() {
        let h = sample_wigner(&EnsembleSpec::gue(6), StreamKey::new(4, 6, 0));
        let sd = eigh(&h).unwrap();
        let rep = sd.check_contract(&h);
        assert!(rep.holds(), "{rep:?}");
        assert!(diff_max(sd.reconstruct().as_ref(), h.as_mat()) < 1e-10);
        for a in 0..6 {
            let first = (0..6).map(|i| sd.eigenvectors()[(i, a)]).find(|x| x.norm() > 1e-10).unwrap();
            assert_eq!(first.im, 0.0);
            assert!(first.re > 0.0);
        }
        let again = eigh(&h).unwrap();
        assert_eq!(again.eigenvectors(), sd.eigenvectors());
        let vals = eigenvalues(&h).unwrap();
        for (a, b) in vals.iter().zip(sd.eigenvalues()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn resolvent_of_zero_matrix() {
        let sd = eigh(&HermitianMatrix::zeros(2)).unwrap();
        let g = sd.resolvent(sp(0.0, 1.0));
        assert!(diff_max(g.as_ref(), (Mat::<C64>::identity(2, 2) * faer::Scale(c(0.0, 1.0))).as_ref()) < 1e-15);
    }

    #[test]
    fn resolvent_routes_agree_and_are_bounded() {
        let h = sample_wigner(&EnsembleSpec::gue(40), StreamKey::new(9, 40, 1));
        let sd = eigh(&h).unwrap();
        let z = sp(0.3, 0.05);
        let g = sd.resolvent(z);
        let gd = resolvent_direct(&h, z).unwrap();
        assert!(diff_max(g.as_ref(), gd.as_ref()) < 1e-8);
        let resid = (h.as_mat() - Mat::<C64>::identity(40, 40) * faer::Scale(z.z())) * &g - Mat::<C64>::identity(40, 40);
        assert!(max_abs(resid.as_ref()) < 1e-8);
        assert!(max_abs(g.as_ref()) <= 1.0 / 0.05);
        let m = sd.normalized_trace_m(z);
        assert!((crate::linalg::trace(g.as_ref()) / 40.0 - m).norm() < 1e-12);
        assert!(m.im > 0.0);
    }

    #[test]
    fn m_of_one_by_one_zero() {
        let sd = eigh(&HermitianMatrix::zeros(1)).unwrap();
        assert!((sd.normalized_trace_m(sp(0.0, 1.0)) - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn local_law_single_sample() {
        let n = 1024;
        let h = sample_wigner(&EnsembleSpec::gue(n), StreamKey::new(1, n, 0));
        let sd = eigh(&h).unwrap();
        let z = sp(0.0, 1.0);
        let psi2 = 1.0 / n as f64;
        assert!((sd.normalized_trace_m(z) - m_sc(z)).norm() <= 10.0 * psi2);
    }

    #[test]
    fn observable_zero_and_identity() {
        let h = sample_wigner(&EnsembleSpec::gue(8), StreamKey::new(2, 8, 0));
        let sd = eigh(&h).unwrap();
        let z = sp(0.0, 1.0);
        let o = observable(&sd, &HermitianMatrix::zeros(8), z, z).unwrap();
        assert_eq!(o.value_imim, 0.0);
        assert_eq!(o.value_x, c(0.0, 0.0));
        let o = observable(&sd, &HermitianMatrix::identity(8), z, z).unwrap();
        let want: f64 = sd.eigenvalues().iter().map(|l| (1.0 / (l * l + 1.0)).powi(2)).sum::<f64>() / 8.0;
        assert!((o.value_imim - want).abs() < 1e-14);
        assert!((o.value_imim_matrix - want).abs() < 1e-12);
    }

    #[test]
    fn observable_conjugation_signs() {
        let m = CompositeModel::gue_pair(12, [FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap();
        let (h, parts) = sample_composite(&m, StreamKey::new(3, 12, 0));
        let sd = eigh(&h).unwrap();
        let aux = auxiliary_matrix(&parts[0], &parts[1], FRAC_1_SQRT_2, FRAC_1_SQRT_2).unwrap();
        let z = sp(0.2, 0.7);
        let base = observable(&sd, &aux, z, z).unwrap().value_imim;
        let both = observable(&sd, &aux, z.conj(), z.conj()).unwrap().value_imim;
        let one = observable(&sd, &aux, z, z.conj()).unwrap().value_imim;
        assert!(base > 0.0);
        assert!((both - base).abs() < 1e-14);
        assert!((one + base).abs() < 1e-14);
    }

    #[test]
    fn varkappa_trivial_cases() {
        let z = sp(0.0, 1.0);
        let sd = eigh(&HermitianMatrix::zeros(2)).unwrap();
        let gue = CompositeModel::gue_pair(2, [FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap();
        assert!((varkappa(&sd, &gue, z, z).unwrap() - c(-1.0, 0.0)).norm() < 1e-15);
        let goe = CompositeModel::goe_pair(2, [FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap();
        assert!((varkappa(&sd, &goe, z, z).unwrap() - c(-1.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn varkappa_real_is_complex_plus_correction() {
        let n = 10;
        let goe = CompositeModel::goe_pair(n, [0.6, 0.8]).unwrap();
        let gue = CompositeModel::gue_pair(n, [0.6, 0.8]).unwrap();
        let (h, _) = sample_composite(&goe, StreamKey::new(8, n, 0));
        let sd = eigh(&h).unwrap();
        let (z1, z2) = (sp(0.3, 0.4), sp(-0.5, 0.9));
        let g1 = sd.resolvent(z1);
        let g2 = sd.resolvent(z2);
        let mut corr = c(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                corr += g1[(i, j)] * g2[(j, i)];
            }
        }
        let real = varkappa(&sd, &goe, z1, z2).unwrap();
        let cplx = varkappa(&sd, &gue, z1, z2).unwrap();
        assert!((real - corr / (n * n) as f64 - cplx).norm() < 1e-14);
    }

    #[test]
    fn quadratic_forms_degenerate_weight() {
        let m = CompositeModel::gue_pair(10, [1.0, 0.0]).unwrap();
        let (h, parts) = sample_composite(&m, StreamKey::new(5, 10, 0));
        let sd = eigh(&h).unwrap();
        let t = quadratic_forms(&sd, &parts, m.sigmas()).unwrap();
        assert!(t.components[0].max_abs < 1e-12);
        let p2 = sd.project(&parts[1]).unwrap();
        assert!(diff_max(t.components[1].table.as_ref().unwrap().as_ref(), p2.as_ref()) < 1e-15);
        assert!(t.max_identity_residual() < 1e-12);
    }

    #[test]
    fn derivation_rules_complex_and_real() {
        let s = FRAC_1_SQRT_2;
        for m in [CompositeModel::gue_pair(8, [s, s]).unwrap(), CompositeModel::goe_pair(8, [s, s]).unwrap()] {
            let (_, parts) = sample_composite(&m, StreamKey::new(6, 8, 0));
            let r = derivation_check(&m, &parts, sp(0.3, 0.5), (2, 5), 1e-4).unwrap();
            assert!(r.cancellation < 1e-6, "{r:?}");
            assert!(r.delta_structure_error < 1e-14, "{r:?}");
            for k in 0..2 {
                assert!(r.fd_error[k] < 1e-6, "{r:?}");
            }
        }
    }

    #[test]
    fn derivation_twist_rule() {
        let s = FRAC_1_SQRT_2;
        let spec = EnsembleSpec::complex_hermitian(6, "gaussian_twisted").unwrap();
        let m = CompositeModel::new(vec![s, s], vec![spec.clone(), spec]).unwrap();
        let (_, parts) = sample_composite(&m, StreamKey::new(7, 6, 0));
        let r = derivation_check(&m, &parts, sp(-0.2, 0.6), (1, 4), 1e-4).unwrap();
        assert!(r.twist_rule_error.unwrap() < 1e-14);
        assert!(r.twist_cancellation.unwrap() < 1e-6);
        // one twisted and one untwisted component: the (0,1) operator no longer cancels on G
        let mixed = CompositeModel::new(vec![s, s], vec![EnsembleSpec::complex_hermitian(6, "gaussian_twisted").unwrap(), EnsembleSpec::gue(6)]).unwrap();
        let r = derivation_check(&mixed, &parts, sp(-0.2, 0.6), (1, 4), 1e-4).unwrap();
        assert!(r.twist_rule_error.unwrap() < 1e-14);
        assert!(r.twist_cancellation.unwrap() > 1e-3);
    }

    #[test]
    fn derivation_rejects_bad_input() {
        let g = EnsembleSpec::gue(4);
        let m3 = CompositeModel::equal_weights(g, 3).unwrap();
        let parts = vec![HermitianMatrix::zeros(4); 3];
        assert!(matches!(derivation_check(&m3, &parts, sp(0.0, 1.0), (0, 1), 1e-5), Err(SpectralError::Unsupported(_))));
        let m2 = CompositeModel::gue_pair(4, [0.6, 0.8]).unwrap();
        assert!(matches!(derivation_check(&m2, &parts[..2], sp(0.0, 1.0), (0, 1), 0.0), Err(SpectralError::InvalidStep(_))));
    }
}
