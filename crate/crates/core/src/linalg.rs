//! Dense linear algebra on small matrices, stored row-major in flat slices.
//!
//! Everything here targets the d <= 8 regime of the synthetic experiments;
//! no blocking, no SIMD, just careful pivoted elimination.

use crate::error::{Error, Result};

/// y = A x for A (rows x cols), row-major.
pub fn mat_vec(a: &[f64], rows: usize, cols: usize, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(y.len(), rows);
    for r in 0..rows {
        let row = &a[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for c in 0..cols {
            acc += row[c] * x[c];
        }
        y[r] = acc;
    }
}

/// y = A^T x for A (rows x cols), row-major.
pub fn mat_t_vec(a: &[f64], rows: usize, cols: usize, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), rows);
    debug_assert_eq!(y.len(), cols);
    y.iter_mut().for_each(|v| *v = 0.0);
    for r in 0..rows {
        let row = &a[r * cols..(r + 1) * cols];
        let xr = x[r];
        for c in 0..cols {
            y[c] += row[c] * xr;
        }
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// LU factorization with partial pivoting of a square matrix.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    /// Packed L (unit diagonal, below) and U (on/above diagonal).
    lu: Vec<f64>,
    /// Row permutation: pivot[k] = original row swapped into position k.
    pivots: Vec<usize>,
    /// Sign of the permutation.
    perm_sign: f64,
}

impl LuFactors {
    pub fn factor(a: &[f64], n: usize) -> Result<LuFactors> {
        debug_assert_eq!(a.len(), n * n);
        let mut lu = a.to_vec();
        let mut pivots = vec![0usize; n];
        let mut perm_sign = 1.0;
        for k in 0..n {
            let mut p = k;
            let mut max = lu[k * n + k].abs();
            for r in (k + 1)..n {
                let v = lu[r * n + k].abs();
                if v > max {
                    max = v;
                    p = r;
                }
            }
            if max == 0.0 {
                return Err(Error::Numeric {
                    context: "lu factorization: singular matrix",
                    value: 0.0,
                });
            }
            pivots[k] = p;
            if p != k {
                perm_sign = -perm_sign;
                for c in 0..n {
                    lu.swap(k * n + c, p * n + c);
                }
            }
            let pivot = lu[k * n + k];
            for r in (k + 1)..n {
                let factor = lu[r * n + k] / pivot;
                lu[r * n + k] = factor;
                for c in (k + 1)..n {
                    lu[r * n + c] -= factor * lu[k * n + c];
                }
            }
        }
        Ok(LuFactors {
            n,
            lu,
            pivots,
            perm_sign,
        })
    }

    /// log|det A| and sign(det A).
    pub fn log_abs_det(&self) -> (f64, f64) {
        let mut log_det = 0.0;
        let mut sign = self.perm_sign;
        for k in 0..self.n {
            let d = self.lu[k * self.n + k];
            log_det += d.abs().ln();
            if d < 0.0 {
                sign = -sign;
            }
        }
        (log_det, sign)
    }

    /// Solves A x = b in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        for k in 0..n {
            b.swap(k, self.pivots[k]);
        }
        // Forward: L y = P b
        for r in 1..n {
            for c in 0..r {
                b[r] -= self.lu[r * n + c] * b[c];
            }
        }
        // Backward: U x = y
        for r in (0..n).rev() {
            for c in (r + 1)..n {
                b[r] -= self.lu[r * n + c] * b[c];
            }
            b[r] /= self.lu[r * n + r];
        }
    }

    /// Solves A^T x = b in place.
    pub fn solve_transpose(&self, b: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        // A = P^T L U  =>  A^T = U^T L^T P. Solve U^T y = b, L^T z = y, x = P^T z.
        for r in 0..n {
            for c in 0..r {
                b[r] -= self.lu[c * n + r] * b[c];
            }
            b[r] /= self.lu[r * n + r];
        }
        for r in (0..n).rev() {
            for c in (r + 1)..n {
                b[r] -= self.lu[c * n + r] * b[c];
            }
        }
        for k in (0..n).rev() {
            b.swap(k, self.pivots[k]);
        }
    }
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
/// Fails when the matrix is not SPD.
pub fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::config(format!(
                        "covariance is not positive-definite (pivot {sum:.3e} at row {i})"
                    )));
                }
                l[i * n + j] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Solves L y = b for lower-triangular L, in place.
pub fn solve_lower(l: &[f64], n: usize, b: &mut [f64]) {
    for r in 0..n {
        for c in 0..r {
            b[r] -= l[r * n + c] * b[c];
        }
        b[r] /= l[r * n + r];
    }
}

/// Solves L^T x = b for lower-triangular L, in place.
pub fn solve_lower_transpose(l: &[f64], n: usize, b: &mut [f64]) {
    for r in (0..n).rev() {
        for c in (r + 1)..n {
            b[r] -= l[c * n + r] * b[c];
        }
        b[r] /= l[r * n + r];
    }
}

/// Neumaier compensated summation; deterministic and robust for long grid sums.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}
