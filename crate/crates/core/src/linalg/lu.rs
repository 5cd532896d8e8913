use super::{LinalgError, Matrix};
use crate::Tolerances;

/// LU factorization with partial pivoting, `P X = L U`.
///
/// `L` (unit lower) and `U` share storage. A zero column below the diagonal is
/// skipped rather than rejected so that the determinant of a singular matrix
/// comes out as exactly zero.
#[derive(Debug, Clone)]
pub struct Lu {
    factors: Matrix,
    perm: Vec<usize>,
    swaps: usize,
    norm_inf: f64,
}

impl Lu {
    pub fn factor(x: &Matrix) -> Result<Self, LinalgError> {
        x.require_square()?;
        x.check_finite()?;
        let n = x.rows();
        let mut a = x.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        for k in 0..n {
            let (p, max) =
                (k..n)
                    .map(|i| (i, a[(i, k)].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if max == 0.0 {
                continue;
            }
            if p != k {
                for j in 0..n {
                    let tmp = a[(k, j)];
                    a[(k, j)] = a[(p, j)];
                    a[(p, j)] = tmp;
                }
                perm.swap(k, p);
                swaps += 1;
            }
            let pivot = a[(k, k)];
            for i in k + 1..n {
                let factor = a[(i, k)] / pivot;
                a[(i, k)] = factor;
                if factor != 0.0 {
                    for j in k + 1..n {
                        a[(i, j)] -= factor * a[(k, j)];
                    }
                }
            }
        }
        Ok(Self {
            factors: a,
            perm,
            swaps,
            norm_inf: x.norm_inf(),
        })
    }

    pub fn determinant(&self) -> f64 {
        let n = self.factors.rows();
        let diag: f64 = (0..n).map(|i| self.factors[(i, i)]).product();
        if self.swaps.is_multiple_of(2) {
            diag
        } else {
            -diag
        }
    }

    /// Smallest pivot magnitude and the step where it occurs.
    pub fn min_pivot(&self) -> (usize, f64) {
        (0..self.factors.rows())
            .map(|i| (i, self.factors[(i, i)].abs()))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    }

    /// Solves `X p = b`, refusing when a pivot falls below
    /// `pivot_rel * ||X||_inf`.
    pub fn solve(&self, b: &[f64], pivot_rel: f64) -> Result<Vec<f64>, LinalgError> {
        let n = self.factors.rows();
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        let threshold = pivot_rel * self.norm_inf;
        let (step, pivot) = self.min_pivot();
        if pivot <= threshold {
            return Err(LinalgError::Singular { step, pivot, threshold });
        }
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.factors[(i, j)] * y[j]).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.factors[(i, j)] * y[j]).sum();
            y[i] = (y[i] - s) / self.factors[(i, i)];
        }
        Ok(y)
    }
}

pub fn determinant(x: &Matrix) -> Result<f64, LinalgError> {
    Ok(Lu::factor(x)?.determinant())
}

/// Solves `X p = b` with the default singular-pivot threshold.
pub fn solve(x: &Matrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    Lu::factor(x)?.solve(b, Tolerances::default().singular_pivot_rel)
}
