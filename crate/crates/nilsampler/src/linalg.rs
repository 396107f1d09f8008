//! Dense exact-rational matrices: rank, determinant, nilpotent exponential.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::rational::{is_integer, rint, Rational};

/// Row-major matrix over exact rationals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Rational>,
}

impl RatMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMatrix {
            rows,
            cols,
            data: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Rational::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c), "ragged rows");
        RatMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn from_i64(rows: &[&[i64]]) -> Self {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| rint(x)).collect())
                .collect(),
        )
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].clone();
            }
        }
        out
    }

    pub fn mul(&self, other: &RatMatrix) -> RatMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if !b.is_zero() {
                        let prod = a * b;
                        out[(i, j)] += prod;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        (0..self.rows)
            .map(|i| {
                (0..self.cols)
                    .map(|j| &self[(i, j)] * &v[j])
                    .fold(Rational::zero(), |a, b| a + b)
            })
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn is_integer_matrix(&self) -> bool {
        self.data.iter().all(is_integer)
    }

    pub fn neg(&self) -> Self {
        RatMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| -x).collect(),
        }
    }

    /// Rank by exact Gaussian elimination.
    pub fn rank(&self) -> usize {
        RowEchelon::new(self.rows).extend_cols(self, 0, self.cols)
    }

    /// Ranks of all column-prefix truncations: entry `k` is the rank of the
    /// matrix formed by the first `k` columns.
    pub fn prefix_ranks(&self) -> Vec<usize> {
        let mut ech = RowEchelon::new(self.rows);
        let mut out = Vec::with_capacity(self.cols + 1);
        out.push(0);
        for k in 0..self.cols {
            ech.extend_cols(self, k, k + 1);
            out.push(ech.rank);
        }
        out
    }

    /// Determinant by exact fraction elimination; square matrices only.
    pub fn det(&self) -> Rational {
        assert_eq!(self.rows, self.cols, "determinant needs a square matrix");
        let n = self.rows;
        let mut a = self.data.clone();
        let mut det = Rational::one();
        for col in 0..n {
            let pivot = (col..n).find(|&r| !a[r * n + col].is_zero());
            let Some(p) = pivot else {
                return Rational::zero();
            };
            if p != col {
                for j in 0..n {
                    a.swap(p * n + j, col * n + j);
                }
                det = -det;
            }
            let pv = a[col * n + col].clone();
            det *= pv.clone();
            for r in col + 1..n {
                if a[r * n + col].is_zero() {
                    continue;
                }
                let f = &a[r * n + col] / &pv;
                for j in col..n {
                    let sub = &f * &a[col * n + j];
                    a[r * n + j] -= sub;
                }
            }
        }
        det
    }

    /// Exact exponential of a strictly nilpotent matrix via the finite series.
    ///
    /// Requires `M^rows == 0`; the dimension bounds the nilpotency index.
    pub fn exp_nilpotent(&self) -> Result<RatMatrix> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut sum = RatMatrix::identity(n);
        let mut power = RatMatrix::identity(n);
        let mut factorial = Rational::one();
        for k in 1..=n {
            power = power.mul(self);
            if power.is_zero() {
                return Ok(sum);
            }
            if k == n {
                return Err(Error::input(format!(
                    "matrix is not nilpotent: M^{n} is nonzero"
                )));
            }
            factorial *= rint(k as i64);
            for (s, p) in sum.data.iter_mut().zip(power.data.iter()) {
                *s += p / &factorial;
            }
        }
        Ok(sum)
    }
}

impl std::ops::Index<(usize, usize)> for RatMatrix {
    type Output = Rational;
    fn index(&self, (i, j): (usize, usize)) -> &Rational {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RatMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rational {
        &mut self.data[i * self.cols + j]
    }
}

/// Incremental row-echelon state for prefix-rank computations.
struct RowEchelon {
    /// Reduced rows discovered so far, each with its leading column index.
    basis: Vec<(usize, Vec<Rational>)>,
    nrows: usize,
    rank: usize,
}

impl RowEchelon {
    fn new(nrows: usize) -> Self {
        RowEchelon {
            basis: Vec::new(),
            nrows,
            rank: 0,
        }
    }

    /// Feeds columns [from, to) of `m` (as vectors in R^nrows) into the
    /// column-space basis; returns the updated rank.
    fn extend_cols(&mut self, m: &RatMatrix, from: usize, to: usize) -> usize {
        for col in from..to {
            let mut v: Vec<Rational> = (0..self.nrows).map(|r| m[(r, col)].clone()).collect();
            for (lead, row) in &self.basis {
                if !v[*lead].is_zero() {
                    let f = v[*lead].clone();
                    for (x, b) in v.iter_mut().zip(row.iter()) {
                        let sub = &f * b;
                        *x -= sub;
                    }
                }
            }
            if let Some(lead) = v.iter().position(|x| !x.is_zero()) {
                let inv = v[lead].clone();
                for x in v.iter_mut() {
                    *x /= &inv;
                }
                self.basis.push((lead, v));
                self.rank += 1;
            }
        }
        self.rank
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn rank_and_det() {
        let m = RatMatrix::from_i64(&[&[1, 2], &[2, 4]]);
        assert_eq!(m.rank(), 1);
        assert_eq!(m.det(), rint(0));
        let m = RatMatrix::from_i64(&[&[0, -1], &[1, 0]]);
        assert_eq!(m.rank(), 2);
        assert_eq!(m.det(), rint(1));
    }

    #[test]
    fn prefix_ranks_track_column_space() {
        let m = RatMatrix::from_i64(&[&[0, 1, 0], &[0, 0, 0], &[0, 2, 3]]);
        assert_eq!(m.prefix_ranks(), vec![0, 0, 1, 2]);
    }

    #[test]
    fn exp_of_strictly_upper_triangular() {
        let m = RatMatrix::from_i64(&[&[0, 2, 0], &[0, 0, 2], &[0, 0, 0]]);
        let e = m.exp_nilpotent().unwrap();
        // I + M + M^2/2 with (M^2)_{13} = 4
        assert_eq!(e, RatMatrix::from_i64(&[&[1, 2, 2], &[0, 1, 2], &[0, 0, 1]]));
        let inv = m.neg().exp_nilpotent().unwrap();
        assert_eq!(e.mul(&inv), RatMatrix::identity(3));
    }

    #[test]
    fn exp_rejects_non_nilpotent() {
        let m = RatMatrix::from_i64(&[&[1, 0], &[0, 1]]);
        assert!(m.exp_nilpotent().is_err());
    }

    #[test]
    fn integer_matrix_detection() {
        let mut m = RatMatrix::identity(2);
        assert!(m.is_integer_matrix());
        m[(0, 1)] = rat(1, 2);
        assert!(!m.is_integer_matrix());
    }
}
