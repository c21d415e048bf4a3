//! Dense Hermitian matrix type and the few linear-algebra kernels not taken from faer.

use faer::{Mat, MatRef};
use num_complex::Complex;
use qd::Quad;
use thiserror::Error;

use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian: max |A_ij - conj(A_ji)| = {deviation:e}")]
    NotHermitian { deviation: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("matrix is numerically singular at pivot {pivot}")]
    Singular { pivot: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

/// Square complex matrix that equals its conjugate transpose bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    inner: Mat<C64>,
}

impl HermitianMatrix {
    pub fn zeros(n: usize) -> Self {
        HermitianMatrix {
            inner: Mat::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_lower_fn(n, |i, j| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_lower_fn(n, |i, j| if i == j { C64::new(diag[i], 0.0) } else { C64::new(0.0, 0.0) })
    }

    /// Builds the matrix from its lower triangle (`i >= j`). The imaginary part of
    /// the diagonal is discarded and the upper triangle is the conjugate mirror.
    pub fn from_lower_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Mat::<C64>::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = f(i, j);
                if i == j {
                    m[(i, i)] = C64::new(v.re, 0.0);
                } else {
                    m[(i, j)] = v;
                    m[(j, i)] = v.conj();
                }
            }
        }
        HermitianMatrix { inner: m }
    }

    /// Accepts `m` if it is Hermitian up to `tol` (relative to its max entry),
    /// then stores the exactly Hermitian version built from the lower triangle.
    pub fn from_mat(m: MatRef<'_, C64>, tol: f64) -> Result<Self, LinalgError> {
        if m.nrows() != m.ncols() {
            return Err(LinalgError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let n = m.nrows();
        let mut scale: f64 = 0.0;
        let mut dev: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                let v = m[(i, j)];
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(LinalgError::NonFinite { row: i, col: j });
                }
                scale = scale.max(v.norm());
                dev = dev.max((v - m[(j, i)].conj()).norm());
            }
        }
        if dev > tol * scale.max(1.0) {
            return Err(LinalgError::NotHermitian { deviation: dev });
        }
        Ok(Self::from_lower_fn(n, |i, j| m[(i, j)]))
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.inner[(i, j)]
    }

    pub fn as_mat(&self) -> MatRef<'_, C64> {
        self.inner.as_ref()
    }

    pub fn into_mat(self) -> Mat<C64> {
        self.inner
    }

    /// `Σ c_k A_k`, accumulated left to right in the given order.
    pub fn linear_combination(terms: &[(f64, &HermitianMatrix)]) -> Result<Self, LinalgError> {
        let first = terms.first().expect("linear_combination needs at least one term");
        let n = first.1.dim();
        for (_, a) in terms {
            if a.dim() != n {
                return Err(LinalgError::DimensionMismatch { left: n, right: a.dim() });
            }
        }
        Ok(Self::from_lower_fn(n, |i, j| {
            let mut acc = terms[0].1.inner[(i, j)] * terms[0].0;
            for (c, a) in &terms[1..] {
                acc += a.inner[(i, j)] * *c;
            }
            acc
        }))
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(self.as_mat())
    }

    pub fn frobenius(&self) -> f64 {
        frobenius(self.as_mat())
    }

    pub fn is_exactly_hermitian(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| self.inner[(i, j)] == self.inner[(j, i)].conj()))
    }

    pub fn is_real(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| self.inner[(i, j)].im == 0.0))
    }
}

pub fn max_abs(m: MatRef<'_, C64>) -> f64 {
    let mut best: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

pub fn frobenius(m: MatRef<'_, C64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn trace(m: MatRef<'_, C64>) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// `Tr(A B)` without forming the product.
pub fn trace_of_product(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

/// Inverse by Gaussian elimination with partial pivoting. Used as an
/// independent cross-check of eigen-based resolvents and for tiny systems.
pub fn lu_inverse(a: MatRef<'_, C64>) -> Result<Mat<C64>, LinalgError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LinalgError::NotSquare { rows: n, cols: a.ncols() });
    }
    let mut lu = a.to_owned();
    let mut perm: Vec<usize> = (0..n).collect();
    let scale = max_abs(a).max(f64::MIN_POSITIVE);
    for k in 0..n {
        let mut p = k;
        let mut best = lu[(k, k)].norm();
        for i in k + 1..n {
            let v = lu[(i, k)].norm();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best <= scale * f64::EPSILON || !best.is_finite() {
            return Err(LinalgError::Singular { pivot: k });
        }
        if p != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = t;
            }
            perm.swap(k, p);
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let l = lu[(i, k)] / pivot;
            lu[(i, k)] = l;
            if l != C64::new(0.0, 0.0) {
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= l * u;
                }
            }
        }
    }
    // Solve L U X = P I column by column.
    let mut inv = Mat::<C64>::zeros(n, n);
    let mut y = vec![C64::new(0.0, 0.0); n];
    for col in 0..n {
        for i in 0..n {
            let mut s = if perm[i] == col { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            for k in 0..i {
                s -= lu[(i, k)] * y[k];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= lu[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = s / lu[(i, i)];
        }
    }
    Ok(inv)
}

/// Complex double-double scalar.
pub type Cdd = Complex<Quad>;

pub fn cdd(z: C64) -> Cdd {
    Complex::new(Quad::from(z.re), Quad::from(z.im))
}

/// Round a double-double complex to the nearest `C64`.
pub fn cdd_round(z: Cdd) -> C64 {
    C64::new(z.re.0 + z.re.1, z.im.0 + z.im.1)
}

/// Inverse of a row-major `n x n` matrix in double-double arithmetic, by LU
/// with partial pivoting.
pub fn lu_inverse_dd(mut lu: Vec<Cdd>, n: usize) -> Result<Vec<Cdd>, LinalgError> {
    if lu.len() != n * n {
        return Err(LinalgError::DimensionMismatch { left: n * n, right: lu.len() });
    }
    let lead = |z: &Cdd| z.re.0.hypot(z.im.0);
    let scale = lu.iter().map(lead).fold(f64::MIN_POSITIVE, f64::max);
    let zero = Complex::new(Quad::ZERO, Quad::ZERO);
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        let mut best = lead(&lu[k * n + k]);
        for i in k + 1..n {
            let v = lead(&lu[i * n + k]);
            if v > best {
                best = v;
                p = i;
            }
        }
        if best <= scale * f64::EPSILON || !best.is_finite() {
            return Err(LinalgError::Singular { pivot: k });
        }
        if p != k {
            for j in 0..n {
                lu.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
        }
        let pivot = lu[k * n + k];
        for i in k + 1..n {
            let l = lu[i * n + k] / pivot;
            lu[i * n + k] = l;
            for j in k + 1..n {
                let u = lu[k * n + j];
                lu[i * n + j] = lu[i * n + j] - l * u;
            }
        }
    }
    let mut inv = vec![zero; n * n];
    let mut y = vec![zero; n];
    for col in 0..n {
        for i in 0..n {
            let mut s = if perm[i] == col { Complex::new(Quad::ONE, Quad::ZERO) } else { zero };
            for k in 0..i {
                s = s - lu[i * n + k] * y[k];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s = s - lu[i * n + k] * inv[k * n + col];
            }
            inv[i * n + col] = s / lu[i * n + i];
        }
    }
    Ok(inv)
}
