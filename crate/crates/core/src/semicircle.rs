//! Closed-form semicircle analytics: Stieltjes transform, density, CDF,
//! classical locations, the control parameter Ψ and the spectral domain.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemicircleError {
    #[error("spectral parameter must have nonzero imaginary part (got E={e}, eta={eta})")]
    RealAxis { e: f64, eta: f64 },
    #[error("spectral parameter is not finite (E={e}, eta={eta})")]
    NonFinite { e: f64, eta: f64 },
    #[error("quantile index {alpha} outside 1..={n}")]
    QuantileIndex { alpha: usize, n: usize },
    #[error("domain parameters need 0 < epsilon < 1 and rho > 0 (got epsilon={epsilon}, rho={rho})")]
    DomainParams { epsilon: f64, rho: f64 },
}

/// `z = E + iη` with `η ≠ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct SpectralPoint {
    e: f64,
    eta: f64,
}

impl SpectralPoint {
    pub fn new(e: f64, eta: f64) -> Result<Self, SemicircleError> {
        if !e.is_finite() || !eta.is_finite() {
            return Err(SemicircleError::NonFinite { e, eta });
        }
        if eta == 0.0 {
            return Err(SemicircleError::RealAxis { e, eta });
        }
        Ok(SpectralPoint { e, eta })
    }

    pub fn from_complex(z: C64) -> Result<Self, SemicircleError> {
        Self::new(z.re, z.im)
    }

    pub fn e(&self) -> f64 {
        self.e
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn z(&self) -> C64 {
        C64::new(self.e, self.eta)
    }

    pub fn conj(&self) -> Self {
        SpectralPoint {
            e: self.e,
            eta: -self.eta,
        }
    }
}

impl TryFrom<(f64, f64)> for SpectralPoint {
    type Error = SemicircleError;
    fn try_from((e, eta): (f64, f64)) -> Result<Self, Self::Error> {
        SpectralPoint::new(e, eta)
    }
}

impl From<SpectralPoint> for (f64, f64) {
    fn from(p: SpectralPoint) -> Self {
        (p.e, p.eta)
    }
}

impl std::fmt::Display for SpectralPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.eta < 0.0 {
            write!(f, "{}-{}i", self.e, -self.eta)
        } else {
            write!(f, "{}+{}i", self.e, self.eta)
        }
    }
}

/// Parameters `(ε, ϱ)` of the domain `|E| ≤ 2 + ϱ`, `N^{-1+ε} ≤ |η| ≤ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainParams {
    pub epsilon: f64,
    pub rho: f64,
}

impl DomainParams {
    pub fn new(epsilon: f64, rho: f64) -> Result<Self, SemicircleError> {
        let p = DomainParams { epsilon, rho };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SemicircleError> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0 && self.rho > 0.0 && self.rho.is_finite()) {
            return Err(SemicircleError::DomainParams {
                epsilon: self.epsilon,
                rho: self.rho,
            });
        }
        Ok(())
    }
}

impl Default for DomainParams {
    fn default() -> Self {
        DomainParams {
            epsilon: 0.1,
            rho: 1.0,
        }
    }
}

/// Stieltjes transform of the semicircle law, the root of `m² + zm + 1 = 0`
/// with `Im m · Im z > 0`.
pub fn m_sc(z: SpectralPoint) -> C64 {
    if z.eta < 0.0 {
        return m_sc_upper(z.conj().z()).conj();
    }
    m_sc_upper(z.z())
}

fn m_sc_upper(z: C64) -> C64 {
    // The two roots multiply to 1. Take the large one without cancellation,
    // then invert it to get the one inside the unit disc.
    let mut s = (z * z - 4.0).sqrt();
    if (z.conj() * s).re < 0.0 {
        s = -s;
    }
    let big = (-z - s) * 0.5;
    1.0 / big
}

/// Limit of `m_sc(E + iη)` as `η → 0+`.
pub fn m_sc_boundary(e: f64) -> C64 {
    if e.abs() <= 2.0 {
        C64::new(-e / 2.0, (4.0 - e * e).sqrt() / 2.0)
    } else {
        C64::new((-e + e.signum() * (e * e - 4.0).sqrt()) / 2.0, 0.0)
    }
}

pub fn density(e: f64) -> f64 {
    if e.abs() <= 2.0 {
        (4.0 - e * e).sqrt() / (2.0 * PI)
    } else {
        0.0
    }
}

pub fn cdf(x: f64) -> f64 {
    if x <= -2.0 {
        return 0.0;
    }
    if x >= 2.0 {
        return 1.0;
    }
    0.5 + x * (4.0 - x * x).sqrt() / (4.0 * PI) + (x / 2.0).asin() / PI
}

/// Classical location `γ_α`: `F(γ_α) = (α − 1/2)/N`.
pub fn quantile(alpha: usize, n: usize) -> Result<f64, SemicircleError> {
    if alpha == 0 || alpha > n {
        return Err(SemicircleError::QuantileIndex { alpha, n });
    }
    // Upper half by reflection so that γ_α = −γ_{N+1−α} holds exactly.
    if 2 * alpha > n + 1 {
        return Ok(-quantile(n + 1 - alpha, n)?);
    }
    let target = (alpha as f64 - 0.5) / n as f64;
    Ok(invert_cdf(target))
}

/// Bisection on the closed-form CDF for `target ∈ [0, 1]`.
pub fn invert_cdf(target: f64) -> f64 {
    let (mut lo, mut hi) = (-2.0_f64, 2.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = cdf(mid);
        if (f - target).abs() <= 1e-15 || mid == lo || mid == hi {
            return mid;
        }
        if f < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn classical_locations(n: usize) -> Vec<f64> {
    (1..=n).map(|a| quantile(a, n).expect("index in range")).collect()
}

/// `Ψ = 1/√(N η₀)` with `η₀ = min(|Im z1|, |Im z2|)`.
pub fn psi(z1: SpectralPoint, z2: SpectralPoint, n: usize) -> f64 {
    let eta0 = z1.eta.abs().min(z2.eta.abs());
    1.0 / (n as f64 * eta0).sqrt()
}

pub fn psi_single(z: SpectralPoint, n: usize) -> f64 {
    psi(z, z, n)
}

pub fn in_domain(z: SpectralPoint, n: usize, params: &DomainParams) -> bool {
    let eta = z.eta.abs();
    let lower = (n as f64).powf(-1.0 + params.epsilon);
    z.e.abs() <= 2.0 + params.rho && eta >= lower && eta <= 1.0
}
