//! Minimal dense linear-algebra substrate: SPD solves via Cholesky, extremal
//! eigenvalue bounds via Jacobi rotations, and quadratic-form Bregman
//! evaluation. Everything here is a pure function of its inputs; cached
//! factorizations are immutable after construction.
//!
//! Sizes are desk-scale (dense, n up to a few hundred), so exact dense
//! methods are used throughout rather than iterative ones.

use crate::error::{Error, Result};
use crate::scalar::{cst, Scalar};

/// Dense real vector. Entries are finite by construction when built through
/// [`Vector::new`]; internal arithmetic preserves finiteness except on
/// divergence, which the solve loop detects.
#[derive(Clone, Debug, PartialEq)]
pub struct Vector<T> {
    entries: Vec<T>,
}

impl<T: Scalar> Vector<T> {
    /// Builds a vector, rejecting NaN and infinite entries.
    pub fn new(entries: Vec<T>) -> Result<Self> {
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidConfig("vector entries must be finite".into()));
        }
        Ok(Self { entries })
    }

    pub fn zeros(n: usize) -> Self {
        Self { entries: vec![T::zero(); n] }
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> T) -> Self {
        Self { entries: (0..n).map(f).collect() }
    }

    pub(crate) fn from_raw(entries: Vec<T>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.entries
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.entries.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|e| e.is_finite())
    }

    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.len(), other.len());
        self.entries
            .iter()
            .zip(&other.entries)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    /// Squared Euclidean distance to `other`.
    pub fn dist_sq(&self, other: &Self) -> T {
        debug_assert_eq!(self.len(), other.len());
        self.entries
            .iter()
            .zip(&other.entries)
            .fold(T::zero(), |acc, (&a, &b)| {
                let d = a - b;
                acc + d * d
            })
    }

    pub fn add(&self, other: &Self) -> Self {
        self.map2(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.map2(other, |a, b| a - b)
    }

    pub fn scaled(&self, c: T) -> Self {
        Self { entries: self.entries.iter().map(|&e| e * c).collect() }
    }

    /// `self + c * other`, elementwise.
    pub fn add_scaled(&self, c: T, other: &Self) -> Self {
        self.map2(other, |a, b| a + c * b)
    }

    pub fn map2(&self, other: &Self, mut f: impl FnMut(T, T) -> T) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Largest absolute componentwise difference to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        debug_assert_eq!(self.len(), other.len());
        self.entries
            .iter()
            .zip(&other.entries)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }
}

impl<T: Scalar> std::ops::Index<usize> for Vector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.entries[i]
    }
}

/// Dense symmetric matrix stored as the full square array; the constructor
/// enforces exact (bitwise) symmetry so that `entry(i, j) == entry(j, i)`
/// always holds as stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix<T> {
    n: usize,
    entries: Vec<T>, // row-major, n * n
}

impl<T: Scalar> SymmetricMatrix<T> {
    /// Builds an `n x n` symmetric matrix from row-major entries.
    pub fn new(n: usize, entries: Vec<T>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: entries.len() });
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidConfig("matrix entries must be finite".into()));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if entries[i * n + j] != entries[j * n + i] {
                    return Err(Error::InvalidConfig(format!(
                        "matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { n, entries })
    }

    /// Builds a symmetric matrix by evaluating `f(i, j)` once per pair
    /// `i <= j` and mirroring, so symmetry holds exactly.
    pub fn from_fn_symmetric(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut entries = vec![T::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self { n, entries }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn_symmetric(n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn scaled_identity(n: usize, c: T) -> Self {
        Self::from_fn_symmetric(n, |i, j| if i == j { c } else { T::zero() })
    }

    pub fn diagonal(diag: &[T]) -> Self {
        Self::from_fn_symmetric(diag.len(), |i, j| if i == j { diag[i] } else { T::zero() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        self.entries[i * self.n + j]
    }

    pub fn matvec(&self, v: &Vector<T>) -> Result<Vector<T>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: v.len() });
        }
        let mut out = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let row = &self.entries[i * self.n..(i + 1) * self.n];
            out.push(
                row.iter()
                    .zip(v.as_slice())
                    .fold(T::zero(), |acc, (&m, &x)| acc + m * x),
            );
        }
        Ok(Vector::from_raw(out))
    }

    /// `v' M v`.
    pub fn quadratic_form(&self, v: &Vector<T>) -> Result<T> {
        Ok(self.matvec(v)?.dot(v))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        Ok(Self {
            n: self.n,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        Ok(Self {
            n: self.n,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| a - b)
                .collect(),
        })
    }

    /// `M + c I`.
    pub fn add_scaled_identity(&self, c: T) -> Self {
        let mut entries = self.entries.clone();
        for i in 0..self.n {
            entries[i * self.n + i] = entries[i * self.n + i] + c;
        }
        Self { n: self.n, entries }
    }

    pub fn scaled(&self, c: T) -> Self {
        Self { n: self.n, entries: self.entries.iter().map(|&e| e * c).collect() }
    }
}

/// Cached Cholesky factorization of a symmetric positive definite matrix.
///
/// Immutable after construction, so it can be shared across iterations and
/// workers.
#[derive(Clone, Debug)]
pub struct CholeskyFactor<T> {
    n: usize,
    lower: Vec<T>, // row-major, lower triangle of L (upper half unused)
}

impl<T: Scalar> CholeskyFactor<T> {
    /// Factors `m = L L'`. Fails with [`Error::NotPositiveDefinite`] as soon
    /// as a pivot is not strictly positive.
    pub fn factor(m: &SymmetricMatrix<T>) -> Result<Self> {
        let n = m.dim();
        let mut lower = vec![T::zero(); n * n];
        for j in 0..n {
            let mut d = m.entry(j, j);
            for k in 0..j {
                let l = lower[j * n + k];
                d = d - l * l;
            }
            if d <= T::zero() {
                return Err(Error::NotPositiveDefinite {
                    index: j,
                    pivot: d.to_f64().unwrap_or(f64::NAN),
                });
            }
            let dj = d.sqrt();
            lower[j * n + j] = dj;
            for i in (j + 1)..n {
                let mut s = m.entry(i, j);
                for k in 0..j {
                    s = s - lower[i * n + k] * lower[j * n + k];
                }
                lower[i * n + j] = s / dj;
            }
        }
        Ok(Self { n, lower })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `M x = v` by forward/backward substitution.
    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, v: &Vector<T>) -> Result<Vector<T>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: v.len() });
        }
        let n = self.n;
        let mut y = v.as_slice().to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - self.lower[i * n + k] * y[k];
            }
            y[i] = s / self.lower[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s = s - self.lower[k * n + i] * y[k];
            }
            y[i] = s / self.lower[i * n + i];
        }
        Ok(Vector::from_raw(y))
    }
}

/// Solves `M x = v` for symmetric positive definite `M`.
///
/// Deterministic; the multiply-back residual stays within
/// `1e-10 * (1 + ||v||)` for desk-scale well-conditioned systems.
pub fn spd_solve<T: Scalar>(m: &SymmetricMatrix<T>, v: &Vector<T>) -> Result<Vector<T>> {
    CholeskyFactor::factor(m)?.solve(v)
}

const MAX_JACOBI_SWEEPS: usize = 128;

/// All eigenvalues of a symmetric matrix, ascending, via cyclic Jacobi
/// rotations. Converges to machine precision in well under ten sweeps for
/// the sizes used here.
pub fn symmetric_eigenvalues<T: Scalar>(m: &SymmetricMatrix<T>) -> Vec<T> {
    let n = m.dim();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![m.entry(0, 0)];
    }
    let mut a: Vec<T> = (0..n * n).map(|k| m.entry(k / n, k % n)).collect();
    let hundred = cst::<T>(100.0);
    for sweep in 0..MAX_JACOBI_SWEEPS {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + a[p * n + q].abs();
            }
        }
        if off == T::zero() {
            break;
        }
        // Looser threshold for the first sweeps, then rotate on anything nonzero.
        let thresh = if sweep < 3 {
            cst::<T>(0.2) * off / cst::<T>((n * n) as f64)
        } else {
            T::zero()
        };
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let g = hundred * apq.abs();
                // Skip rotations that can no longer change the diagonal.
                if sweep > 3
                    && a[p * n + p].abs() + g == a[p * n + p].abs()
                    && a[q * n + q].abs() + g == a[q * n + q].abs()
                {
                    a[p * n + q] = T::zero();
                    a[q * n + p] = T::zero();
                    continue;
                }
                if apq.abs() <= thresh {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (cst::<T>(2.0) * apq);
                let t = if theta.abs() + g == theta.abs() {
                    // Large |theta|: use the first-order root.
                    (cst::<T>(2.0) * theta).recip()
                } else {
                    let t = (theta.abs() + (theta * theta + T::one()).sqrt()).recip();
                    if theta < T::zero() {
                        -t
                    } else {
                        t
                    }
                };
                let c = (t * t + T::one()).sqrt().recip();
                let s = t * c;
                let tau = s / (T::one() + c);
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = T::zero();
                a[q * n + p] = T::zero();
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    let new_rp = arp - s * (arq + tau * arp);
                    let new_rq = arq + s * (arp - tau * arq);
                    a[r * n + p] = new_rp;
                    a[p * n + r] = new_rp;
                    a[r * n + q] = new_rq;
                    a[q * n + r] = new_rq;
                }
            }
        }
    }
    let mut eigs: Vec<T> = (0..n).map(|i| a[i * n + i]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    eigs
}

/// Smallest and largest eigenvalue of a symmetric matrix.
///
/// These supply the strong-convexity and gradient-Lipschitz bounds
/// `(mu, beta)` of a quadratic with this Hessian.
pub fn extreme_eigenvalue_bounds<T: Scalar>(m: &SymmetricMatrix<T>) -> (T, T) {
    let eigs = symmetric_eigenvalues(m);
    match (eigs.first(), eigs.last()) {
        (Some(&mu), Some(&beta)) => (mu, beta),
        _ => (T::zero(), T::zero()),
    }
}

/// Bregman divergence of a quadratic potential with Hessian `H`:
/// `1/2 (u - v)' H (u - v)`. Nonnegative whenever `H` is positive
/// semidefinite, and symmetric under swapping `u` and `v`.
pub fn bregman_quadratic<T: Scalar>(
    h: &SymmetricMatrix<T>,
    u: &Vector<T>,
    v: &Vector<T>,
) -> Result<T> {
    if u.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: u.len() });
    }
    if v.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: v.len() });
    }
    let d = u.sub(v);
    Ok(cst::<T>(0.5) * h.quadratic_form(&d)?)
}
