//! Dense Cholesky factorization with the in-place modifications the samplers
//! need: rank-one updates, moving an index to the back of the ordering, and
//! triangular solves restricted to a leading block.
//!
//! The factor is stored as an upper-triangular `R` with `A = RᵀR`, row-major,
//! so that every inner loop walks a contiguous row.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{BankError, Result};
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor<T> {
    n: usize,
    // row-major n×n, only the upper triangle is meaningful
    r: Vec<T>,
}

impl<T: Scalar> CholeskyFactor<T> {
    /// Factors a symmetric positive-definite matrix. Only the upper triangle of
    /// `a` is read.
    pub fn new(a: ArrayView2<'_, T>, context: &'static str) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(BankError::DimensionMismatch {
                context: "cholesky (square matrix)",
                expected: n,
                actual: a.ncols(),
            });
        }
        let mut r = vec![T::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                r[i * n + j] = a[[i, j]];
            }
        }
        for k in 0..n {
            let pivot = r[k * n + k];
            if !(pivot > T::zero()) || !pivot.is_finite() {
                return Err(BankError::NotPositiveDefinite { context });
            }
            let d = pivot.sqrt();
            r[k * n + k] = d;
            let inv = d.recip();
            for j in k + 1..n {
                r[k * n + j] *= inv;
            }
            let (head, tail) = r.split_at_mut((k + 1) * n);
            let row_k = &head[k * n..];
            for i in k + 1..n {
                let rki = row_k[i];
                if rki == T::zero() {
                    continue;
                }
                let row_i = &mut tail[(i - k - 1) * n..(i - k) * n];
                for j in i..n {
                    row_i[j] -= rki * row_k[j];
                }
            }
        }
        Ok(Self { n, r })
    }

    /// Factor of `scale · I`.
    pub fn scaled_identity(n: usize, scale: T) -> Result<Self> {
        if !(scale > T::zero()) {
            return Err(BankError::NotPositiveDefinite {
                context: "scaled identity",
            });
        }
        let mut r = vec![T::zero(); n * n];
        let d = scale.sqrt();
        for i in 0..n {
            r[i * n + i] = d;
        }
        Ok(Self { n, r })
    }

    /// Wraps an upper-triangular factor (entries below the diagonal are ignored).
    pub fn from_upper(upper: ArrayView2<'_, T>) -> Result<Self> {
        let n = upper.nrows();
        if upper.ncols() != n {
            return Err(BankError::DimensionMismatch {
                context: "cholesky factor (square matrix)",
                expected: n,
                actual: upper.ncols(),
            });
        }
        let mut r = vec![T::zero(); n * n];
        for i in 0..n {
            if !(upper[[i, i]] > T::zero()) {
                return Err(BankError::NotPositiveDefinite {
                    context: "stored factor",
                });
            }
            for j in i..n {
                r[i * n + j] = upper[[i, j]];
            }
        }
        Ok(Self { n, r })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.r[i * self.n + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: T) {
        self.r[i * self.n + j] = v;
    }

    #[inline]
    pub fn diag(&self, i: usize) -> T {
        self.r[i * self.n + i]
    }

    pub fn upper(&self) -> Array2<T> {
        let mut out = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for j in i..self.n {
                out[[i, j]] = self.get(i, j);
            }
        }
        out
    }

    /// `RᵀR`, the factored matrix.
    pub fn reconstruct(&self) -> Array2<T> {
        let u = self.upper();
        u.t().dot(&u)
    }

    pub fn log_det(&self) -> T {
        self.log_det_leading(self.n)
    }

    /// Log-determinant of the leading `m×m` block.
    pub fn log_det_leading(&self, m: usize) -> T {
        let two = T::lit(2.0);
        (0..m).fold(T::zero(), |acc, i| acc + two * self.diag(i).ln())
    }

    /// Solves `Rᵀ x = b` in place.
    pub fn forward_solve(&self, b: &mut [T]) {
        self.forward_solve_leading(self.n, b);
    }

    /// Solves `R[..m, ..m]ᵀ x = b` in place, `b.len() == m`.
    pub fn forward_solve_leading(&self, m: usize, b: &mut [T]) {
        debug_assert_eq!(b.len(), m);
        let n = self.n;
        for k in 0..m {
            let row = &self.r[k * n..k * n + m];
            let xk = b[k] / row[k];
            b[k] = xk;
            if xk != T::zero() {
                for (bi, &rki) in b[k + 1..].iter_mut().zip(&row[k + 1..]) {
                    *bi -= rki * xk;
                }
            }
        }
    }

    /// Two right-hand sides at once; halves the passes over the factor.
    pub fn forward_solve_leading2(&self, m: usize, b1: &mut [T], b2: &mut [T]) {
        debug_assert_eq!(b1.len(), m);
        debug_assert_eq!(b2.len(), m);
        let n = self.n;
        for k in 0..m {
            let row = &self.r[k * n..k * n + m];
            let x1 = b1[k] / row[k];
            let x2 = b2[k] / row[k];
            b1[k] = x1;
            b2[k] = x2;
            for ((v1, v2), &rki) in b1[k + 1..]
                .iter_mut()
                .zip(b2[k + 1..].iter_mut())
                .zip(&row[k + 1..])
            {
                *v1 -= rki * x1;
                *v2 -= rki * x2;
            }
        }
    }

    /// Solves `R x = b` in place.
    pub fn back_solve(&self, b: &mut [T]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        for i in (0..n).rev() {
            let row = &self.r[i * n..(i + 1) * n];
            let s = dot(&row[i + 1..], &b[i + 1..]);
            b[i] = (b[i] - s) / row[i];
        }
    }

    /// `A⁻¹ b`.
    pub fn solve(&self, b: &[T]) -> Array1<T> {
        let mut x = b.to_vec();
        self.forward_solve(&mut x);
        self.back_solve(&mut x);
        Array1::from(x)
    }

    /// `bᵀ A⁻¹ b`.
    pub fn inv_quad_form(&self, b: &[T]) -> T {
        let mut x = b.to_vec();
        self.forward_solve(&mut x);
        dot(&x, &x)
    }

    /// `Rᵀ z`; maps standard-normal draws to draws with covariance `A`.
    pub fn mul_upper_transpose(&self, z: &[T]) -> Array1<T> {
        let n = self.n;
        let mut out = Array1::zeros(n);
        for (k, &zk) in z.iter().enumerate().take(n) {
            if zk == T::zero() {
                continue;
            }
            let row = &self.r[k * n..(k + 1) * n];
            for j in k..n {
                out[j] += row[j] * zk;
            }
        }
        out
    }

    /// Replaces the factor of `A` by the factor of `A + v vᵀ`. `v` is consumed
    /// as workspace.
    pub fn rank_one_update(&mut self, v: &mut [T]) {
        let n = self.n;
        debug_assert_eq!(v.len(), n);
        for k in 0..n {
            let rkk = self.r[k * n + k];
            let vk = v[k];
            if vk == T::zero() {
                continue;
            }
            let r = rkk.hypot(vk);
            let c = r / rkk;
            let s = vk / rkk;
            self.r[k * n + k] = r;
            let row = &mut self.r[k * n..(k + 1) * n];
            for j in k + 1..n {
                let updated = (row[j] + s * v[j]) / c;
                v[j] = c * v[j] - s * updated;
                row[j] = updated;
            }
        }
    }

    /// Re-factors `PᵀAP` where `P` moves index `k` to the last position and
    /// shifts indices `k+1..` down by one. Uses Givens rotations `Q`; the
    /// companion vector is replaced by `Q·companion`, which keeps a whitened
    /// right-hand side `R⁻ᵀh` consistent with the new ordering.
    pub fn move_to_back(&mut self, k: usize, companion: &mut [T]) {
        let n = self.n;
        debug_assert!(k < n);
        debug_assert_eq!(companion.len(), n);
        if k + 1 >= n {
            return;
        }
        for row in 0..n {
            self.r[row * n + k..(row + 1) * n].rotate_left(1);
        }
        for i in k..n - 1 {
            let (head, tail) = self.r.split_at_mut((i + 1) * n);
            let upper = &mut head[i * n..];
            let lower = &mut tail[..n];
            let a = upper[i];
            let b = lower[i];
            let r = a.hypot(b);
            let c = a / r;
            let s = b / r;
            upper[i] = r;
            lower[i] = T::zero();
            for j in i + 1..n {
                let x = upper[j];
                let y = lower[j];
                upper[j] = c * x + s * y;
                lower[j] = c * y - s * x;
            }
            let zx = companion[i];
            let zy = companion[i + 1];
            companion[i] = c * zx + s * zy;
            companion[i + 1] = c * zy - s * zx;
        }
        let last = (n - 1) * n + (n - 1);
        if self.r[last] < T::zero() {
            self.r[last] = -self.r[last];
            companion[n - 1] = -companion[n - 1];
        }
    }
}

/// `(A + Aᵀ)/2`.
pub fn symmetrize<T: Scalar>(a: &mut Array2<T>) {
    let n = a.nrows();
    let half = T::lit(0.5);
    for i in 0..n {
        for j in i + 1..n {
            let v = (a[[i, j]] + a[[j, i]]) * half;
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
}
