//! Small dense matrices and partial-pivot LU at working precision.

use std::ops::{Index, IndexMut};

use thiserror::Error;

use crate::arith::{Complex, PrecisionContext, Real};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    #[error("matrix is singular (pivot {pivot} below threshold)")]
    Singular { pivot: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone> Matrix<T> {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == n_cols), "ragged rows");
        Self {
            rows: n_rows,
            cols: n_cols,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].clone())
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

impl Matrix<Real> {
    pub fn zeros(rows: usize, cols: usize, ctx: &PrecisionContext) -> Self {
        Self::from_fn(rows, cols, |_, _| ctx.zero())
    }

    pub fn identity(n: usize, ctx: &PrecisionContext) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { ctx.one() } else { ctx.zero() })
    }

    pub fn diag(values: &[Real]) -> Self {
        let prec = values.first().map_or(64, Real::prec);
        Self::from_fn(values.len(), values.len(), |r, c| {
            if r == c {
                values[r].clone()
            } else {
                Real::new(prec)
            }
        })
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        Self::from_fn(self.rows, rhs.cols, |r, c| {
            let mut acc = Real::new(self[(0, 0)].prec());
            for k in 0..self.cols {
                acc += self[(r, k)].clone() * &rhs[(k, c)];
            }
            acc
        })
    }

    pub fn matvec(&self, v: &[Real]) -> Vec<Real> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        (0..self.rows)
            .map(|r| {
                let mut acc = Real::new(self[(0, 0)].prec());
                for (a, x) in self.row(r).iter().zip(v) {
                    acc += a.clone() * x;
                }
                acc
            })
            .collect()
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self::from_fn(self.rows, self.cols, |r, c| self[(r, c)].clone() + &rhs[(r, c)])
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self::from_fn(self.rows, self.cols, |r, c| self[(r, c)].clone() - &rhs[(r, c)])
    }

    /// Outer product `x yᵀ`.
    pub fn outer(x: &[Real], y: &[Real]) -> Self {
        Self::from_fn(x.len(), y.len(), |r, c| x[r].clone() * &y[c])
    }

    /// Largest absolute entry.
    pub fn max_abs(&self, ctx: &PrecisionContext) -> Real {
        crate::arith::max_abs(&self.data, ctx)
    }

    pub fn max_abs_diff(&self, rhs: &Self, ctx: &PrecisionContext) -> Real {
        self.sub(rhs).max_abs(ctx)
    }

    /// max_i Σ_j |m_ij|
    pub fn max_row_abs_sum(&self, ctx: &PrecisionContext) -> Real {
        let mut best = ctx.zero();
        for r in 0..self.rows {
            let mut s = ctx.zero();
            for v in self.row(r) {
                s += v.clone().abs();
            }
            if s > best {
                best = s;
            }
        }
        best
    }

    pub fn row_sums(&self, ctx: &PrecisionContext) -> Vec<Real> {
        (0..self.rows)
            .map(|r| self.row(r).iter().fold(ctx.zero(), |acc, v| acc + v))
            .collect()
    }

    pub fn col_sums(&self, ctx: &PrecisionContext) -> Vec<Real> {
        (0..self.cols)
            .map(|c| (0..self.rows).fold(ctx.zero(), |acc, r| acc + &self[(r, c)]))
            .collect()
    }

    pub fn inverse(&self, ctx: &PrecisionContext) -> Result<Self, LinalgError> {
        let lu = Lu::factor(self.clone(), &ctx.zero())?;
        Ok(lu.solve_matrix(&Self::identity(self.rows, ctx)))
    }
}

/// Scalar operations needed by Gaussian elimination.
pub trait Field: Clone {
    fn magnitude(&self) -> Real;
    fn sub_mul(&mut self, a: &Self, b: &Self);
    fn div_by(&self, d: &Self) -> Self;
}

impl Field for Real {
    fn magnitude(&self) -> Real {
        self.clone().abs()
    }
    fn sub_mul(&mut self, a: &Self, b: &Self) {
        *self -= a.clone() * b;
    }
    fn div_by(&self, d: &Self) -> Self {
        self.clone() / d
    }
}

impl Field for Complex {
    fn magnitude(&self) -> Real {
        self.abs()
    }
    fn sub_mul(&mut self, a: &Self, b: &Self) {
        *self = &*self - &(a * b);
    }
    fn div_by(&self, d: &Self) -> Self {
        self.checked_div(d).expect("division by a zero pivot")
    }
}

/// LU factorisation with partial (row) pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Field> Lu<T> {
    /// Factors `a`; fails when a pivot magnitude is `<= threshold`.
    pub fn factor(mut a: Matrix<T>, threshold: &Real) -> Result<Self, LinalgError> {
        if a.rows != a.cols {
            return Err(LinalgError::Dimension {
                expected: a.rows,
                got: a.cols,
            });
        }
        let n = a.rows;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (pivot_row, pivot_mag) = (k..n)
                .map(|r| (r, a[(r, k)].magnitude()))
                .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap_or(std::cmp::Ordering::Equal))
                .expect("non-empty pivot column");
            if pivot_mag <= *threshold || pivot_mag.is_zero() {
                return Err(LinalgError::Singular { pivot: k });
            }
            if pivot_row != k {
                for c in 0..n {
                    a.data.swap(k * n + c, pivot_row * n + c);
                }
                perm.swap(k, pivot_row);
            }
            let pivot = a[(k, k)].clone();
            for r in k + 1..n {
                let factor = a[(r, k)].div_by(&pivot);
                for c in k + 1..n {
                    let upper = a[(k, c)].clone();
                    a[(r, c)].sub_mul(&factor, &upper);
                }
                a[(r, k)] = factor;
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n, "rhs length mismatch");
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p].clone()).collect();
        for r in 0..n {
            for c in 0..r {
                let (head, tail) = x.split_at_mut(r);
                tail[0].sub_mul(&self.lu[(r, c)], &head[c]);
            }
        }
        for r in (0..n).rev() {
            for c in r + 1..n {
                let (head, tail) = x.split_at_mut(c);
                head[r].sub_mul(&self.lu[(r, c)], &tail[0]);
            }
            x[r] = x[r].div_by(&self.lu[(r, r)]);
        }
        x
    }

    /// Solves column by column for a matrix right-hand side.
    pub fn solve_matrix(&self, b: &Matrix<T>) -> Matrix<T> {
        let cols: Vec<Vec<T>> = (0..b.cols)
            .map(|c| {
                let col: Vec<T> = (0..b.rows).map(|r| b[(r, c)].clone()).collect();
                self.solve(&col)
            })
            .collect();
        Matrix::from_fn(b.rows, b.cols, |r, c| cols[c][r].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let ctx = PrecisionContext::new(40).unwrap();
        let a = Matrix::from_rows(vec![
            vec![ctx.real(0), ctx.real(2), ctx.real(1)],
            vec![ctx.real(1), ctx.real(1), ctx.real(0)],
            vec![ctx.real(3), ctx.real(0), ctx.real(1)],
        ]);
        let x_true = vec![ctx.real(1), ctx.real(-2), ctx.ratio(1, 3)];
        let b = a.matvec(&x_true);
        let lu = Lu::factor(a, &ctx.zero()).unwrap();
        let x = lu.solve(&b);
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi.clone() - ti).abs() < *ctx.identity_tol());
        }
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let ctx = PrecisionContext::new(60).unwrap();
        let a = Matrix::from_fn(4, 4, |r, c| ctx.one() / (r as u32 + c as u32 + 1));
        let inv = a.inverse(&ctx).unwrap();
        let id = a.matmul(&inv);
        assert!(id.max_abs_diff(&Matrix::identity(4, &ctx), &ctx) < *ctx.identity_tol());
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let ctx = PrecisionContext::new(40).unwrap();
        let a = Matrix::from_rows(vec![
            vec![ctx.real(1), ctx.real(2)],
            vec![ctx.real(2), ctx.real(4)],
        ]);
        assert!(matches!(Lu::factor(a, &ctx.zero()), Err(LinalgError::Singular { .. })));
    }

    #[test]
    fn complex_solve() {
        let ctx = PrecisionContext::new(40).unwrap();
        let c = |re: i32, im: i32| Complex::new(ctx.real(re), ctx.real(im));
        let a = Matrix::from_rows(vec![vec![c(1, 1), c(0, 2)], vec![c(3, 0), c(1, -1)]]);
        let x_true = vec![c(2, -1), c(0, 1)];
        let b: Vec<Complex> = (0..2)
            .map(|r| {
                let mut acc = Complex::zero(&ctx);
                for k in 0..2 {
                    acc = &acc + &(&a[(r, k)] * &x_true[k]);
                }
                acc
            })
            .collect();
        let x = Lu::factor(a, &ctx.zero()).unwrap().solve(&b);
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < *ctx.identity_tol());
        }
    }
}
