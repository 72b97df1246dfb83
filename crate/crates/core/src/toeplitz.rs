//! Toeplitz kernels and the FFT matvec via circulant embedding.

use num_complex::Complex64;

use crate::fft::{dft1, idft1, CField};
use crate::field::Shape;
use crate::linalg::DenseMat;
use crate::{Error, Result};

/// An n-by-n Toeplitz matrix described by its first column and first row.
/// `T[i][j] = first_col[i-j]` for `i >= j`, `first_row[j-i]` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzKernel {
    first_col: Vec<f64>,
    first_row: Vec<f64>,
}

impl ToeplitzKernel {
    pub fn new(first_col: Vec<f64>, first_row: Vec<f64>) -> Result<ToeplitzKernel> {
        if first_col.is_empty() {
            return Err(Error::EmptyInput);
        }
        if first_col.len() != first_row.len() {
            return Err(Error::DimensionMismatch {
                expected: first_col.len(),
                got: first_row.len(),
            });
        }
        if (first_col[0] - first_row[0]).abs() > 0.0 {
            return Err(Error::InvalidArgument(
                "first_row[0] must equal first_col[0]".into(),
            ));
        }
        Ok(ToeplitzKernel {
            first_col,
            first_row,
        })
    }

    pub fn symmetric(first_col: Vec<f64>) -> Result<ToeplitzKernel> {
        ToeplitzKernel::new(first_col.clone(), first_col)
    }

    pub fn n(&self) -> usize {
        self.first_col.len()
    }

    pub fn first_col(&self) -> &[f64] {
        &self.first_col
    }

    pub fn first_row(&self) -> &[f64] {
        &self.first_row
    }

    pub fn is_symmetric(&self) -> bool {
        self.first_col == self.first_row
    }

    /// Sum of all entries in a full (interior) row, i.e. the row sum a middle
    /// row would have if n were large enough to hold the whole stencil.
    pub fn full_row_sum(&self) -> f64 {
        self.first_col.iter().skip(1).sum::<f64>() + self.first_row.iter().sum::<f64>()
    }

    pub fn densify(&self) -> DenseMat {
        let n = self.n();
        let mut m = DenseMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = if i >= j {
                    self.first_col[i - j]
                } else {
                    self.first_row[j - i]
                };
            }
        }
        m
    }
}

/// `T x` by circulant embedding of size `next_pow2(2n-1)` and FFT.
pub fn toeplitz_matvec(kernel: &ToeplitzKernel, x: &[f64]) -> Result<Vec<f64>> {
    let n = kernel.n();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let p = (2 * n - 1).next_power_of_two();
    // Circulant first column: [col[0..n], 0 padding, row[n-1], ..., row[1]].
    let mut c = vec![Complex64::new(0.0, 0.0); p];
    for (i, &v) in kernel.first_col.iter().enumerate() {
        c[i] = Complex64::new(v, 0.0);
    }
    for j in 1..n {
        c[p - j] = Complex64::new(kernel.first_row[j], 0.0);
    }
    let mut xp = vec![Complex64::new(0.0, 0.0); p];
    for (i, &v) in x.iter().enumerate() {
        xp[i] = Complex64::new(v, 0.0);
    }
    let ch = dft1(&CField::new(c, Shape::D1(p))?)?;
    let xh = dft1(&CField::new(xp, Shape::D1(p))?)?;
    let prod: Vec<Complex64> = ch.data.iter().zip(&xh.data).map(|(a, b)| a * b).collect();
    let y = idft1(&CField::new(prod, Shape::D1(p))?)?;
    Ok(y.data[..n].iter().map(|c| c.re).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn rand_kernel(n: usize, seed: u64) -> ToeplitzKernel {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut col: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut row: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        row[0] = col[0];
        // keep col[0] shared
        col[0] = row[0];
        ToeplitzKernel::new(col, row).unwrap()
    }

    #[test]
    fn identity_kernel_is_identity() {
        let mut col = vec![0.0; 6];
        col[0] = 1.0;
        let k = ToeplitzKernel::symmetric(col).unwrap();
        let x = vec![3.0, -1.0, 2.0, 0.5, 4.0, -2.0];
        let y = toeplitz_matvec(&k, &x).unwrap();
        for (a, b) in y.iter().zip(&x) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn matches_dense_n5() {
        let k = rand_kernel(5, 77);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(78);
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fast = toeplitz_matvec(&k, &x).unwrap();
        let dense = k.densify().matvec(&x).unwrap();
        let num: f64 = fast
            .iter()
            .zip(&dense)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den: f64 = dense.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(num / den < 1e-12);
    }

    #[test]
    fn matches_dense_100_random_instances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for trial in 0..100u64 {
            let n = rng.gen_range(1..=64);
            let k = rand_kernel(n, 1000 + trial);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let fast = toeplitz_matvec(&k, &x).unwrap();
            let dense = k.densify().matvec(&x).unwrap();
            let num: f64 = fast
                .iter()
                .zip(&dense)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let den: f64 = dense.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            assert!(num / den < 1e-12, "n={n} trial={trial}");
        }
    }

    #[test]
    fn gaussian_stencil_constant_input() {
        // Symmetric decaying stencil applied to a constant vector: the middle
        // entries see the full row sum.
        let n = 32;
        let col: Vec<f64> = (0..n)
            .map(|d| (-((d * d) as f64) / 4.5).exp())
            .collect();
        let k = ToeplitzKernel::symmetric(col).unwrap();
        let row_sum = k.densify().matvec(&vec![1.0; n]).unwrap();
        let y = toeplitz_matvec(&k, &vec![1.0; n]).unwrap();
        for i in 0..n {
            assert!((y[i] - row_sum[i]).abs() < 1e-12);
        }
        // Middle rows carry the fully-summed stencil.
        let full: f64 = k.full_row_sum();
        assert!((y[n / 2] - full).abs() < 1e-10);
    }

    #[test]
    fn dimension_mismatch_errors() {
        let k = rand_kernel(4, 1);
        assert!(toeplitz_matvec(&k, &[1.0, 2.0]).is_err());
    }
}
