//! Dense LU factorization with partial pivoting.
//!
//! Systems here are small (a few thousand unknowns at most), so a plain
//! row-major `Vec<f64>` is enough.

use crate::{Error, Result};

/// Pivots with magnitude below this (relative to the largest entry of the
/// input) are treated as singular. Absorption systems legitimately carry
/// pivots as small as `min(q,1-q)^S`, so only effective zeros are rejected.
const SINGULAR_TOL: f64 = 1e-280;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// `self * x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn lu(self) -> Result<Lu> {
        Lu::factor(self)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// `PA = LU`, stored compactly (unit lower triangle implicit).
#[derive(Debug, Clone)]
pub struct Lu {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(mut a: DenseMatrix) -> Result<Self> {
        let n = a.n;
        let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if n > 0 && scale == 0.0 {
            return Err(Error::NumericalFailure("zero matrix".into()));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (piv, mag) =
                (k..n)
                    .map(|i| (i, a[(i, k)].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if mag <= SINGULAR_TOL * scale {
                return Err(Error::NumericalFailure(format!("singular system: pivot {mag:e} at column {k} of {n}")));
            }
            if piv != k {
                for j in 0..n {
                    a.data.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
            }
            let d = a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / d;
                a[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        a[(i, j)] -= f * a[(k, j)];
                    }
                }
            }
        }
        Ok(Lu { lu: a, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.n;
        assert_eq!(b.len(), n, "right-hand side length mismatch");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }
}

/// Solve `a x = b`.
pub fn solve(a: DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    Ok(a.lu()?.solve(b))
}
