//! Dense linear algebra for coarsest-level solves and diagnostics:
//! LU with partial pivoting and a cyclic-Jacobi symmetric eigensolver.

use crate::{Error, Result};

/// Default cap on dense dimensions; guards against accidentally
/// materializing a fine-grid operator.
pub const DENSE_CAP: usize = 4096;

/// Dense real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMat {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl DenseMat {
    pub fn zeros(rows: usize, cols: usize) -> DenseMat {
        DenseMat {
            data: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<DenseMat> {
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        let nr = rows.len();
        Ok(DenseMat {
            data: rows.into_iter().flatten().collect(),
            rows: nr,
            cols,
        })
    }

    pub fn identity(n: usize) -> DenseMat {
        let mut m = DenseMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    pub fn matmul(&self, other: &DenseMat) -> Result<DenseMat> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = DenseMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> DenseMat {
        let mut out = DenseMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.rows {
            for j in 0..i {
                m = m.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        m
    }
}

impl std::ops::Index<(usize, usize)> for DenseMat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization with partial pivoting, reusable across solves.
#[derive(Debug, Clone)]
pub struct LuFactor {
    lu: DenseMat,
    perm: Vec<usize>,
}

impl LuFactor {
    pub fn new(a: &DenseMat) -> Result<LuFactor> {
        if a.rows != a.cols {
            return Err(Error::ShapeMismatch(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows, a.cols
            )));
        }
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best < f64::EPSILON * n as f64 {
                return Err(Error::SingularMatrix { pivot: k });
            }
            if p != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
                perm.swap(k, p);
            }
            let piv = lu[(k, k)];
            for i in k + 1..n {
                let m = lu[(i, k)] / piv;
                lu[(i, k)] = m;
                for j in k + 1..n {
                    lu[(i, j)] -= m * lu[(k, j)];
                }
            }
        }
        Ok(LuFactor { lu, perm })
    }

    pub fn n(&self) -> usize {
        self.lu.rows
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            for j in 0..i {
                x[i] -= self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[(i, j)] * x[j];
            }
            x[i] /= self.lu[(i, i)];
        }
        Ok(x)
    }
}

/// Solve `A x = b` by LU with partial pivoting.
pub fn lu_solve(a: &DenseMat, b: &[f64]) -> Result<Vec<f64>> {
    if a.rows > DENSE_CAP {
        return Err(Error::DenseCapExceeded {
            size: a.rows,
            cap: DENSE_CAP,
        });
    }
    LuFactor::new(a)?.solve(b)
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order with matching orthonormal
/// eigenvector columns. Diagnostics-scale only (dense, O(n^3) per sweep).
pub fn eig_sym(a: &DenseMat) -> Result<(Vec<f64>, DenseMat)> {
    if a.rows != a.cols {
        return Err(Error::ShapeMismatch("eig_sym needs a square matrix".into()));
    }
    if a.rows > DENSE_CAP {
        return Err(Error::DenseCapExceeded {
            size: a.rows,
            cap: DENSE_CAP,
        });
    }
    let scale = a.frobenius_norm().max(1e-300);
    let asym = a.max_asymmetry();
    if asym > 1e-10 * scale.max(1.0) {
        return Err(Error::NotSymmetric { max_asym: asym });
    }
    let n = a.rows;
    let mut m = a.clone();
    let mut v = DenseMat::identity(n);
    let tol = 1e-15 * scale;
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= tol / n as f64 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = DenseMat::zeros(n, n);
    for (newj, &oldj) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, newj)] = v[(i, oldj)];
        }
    }
    Ok((values, vectors))
}
