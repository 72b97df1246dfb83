//! Discrete Fourier transforms on 1D/2D grids.
//!
//! Convention: the forward transform is unnormalized,
//! `X[k] = sum_j x[j] exp(-2*pi*i*j*k/n)`, and the inverse divides by `n`
//! (or `n*m` in 2D). Natural storage order puts DC at bin 0; frequency bin
//! `j` carries the angular frequency `phi = 2*pi*j/n` wrapped into
//! `(-pi, pi]`. [`to_centered`] / [`from_centered`] convert between natural
//! order and the centered ordering (ascending `phi`) used by frequency masks.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use crate::field::Shape;
use crate::{Error, Result};

/// Complex grid function, same storage conventions as [`crate::Field`].
#[derive(Debug, Clone, PartialEq)]
pub struct CField {
    pub data: Vec<Complex64>,
    pub shape: Shape,
}

impl CField {
    pub fn new(data: Vec<Complex64>, shape: Shape) -> Result<CField> {
        if data.len() != shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "storage length {} vs shape length {}",
                data.len(),
                shape.len()
            )));
        }
        Ok(CField { data, shape })
    }

    pub fn from_real(v: &[f64]) -> CField {
        CField {
            data: v.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            shape: Shape::D1(v.len()),
        }
    }

    pub fn from_real_shaped(v: &[f64], shape: Shape) -> Result<CField> {
        CField::new(v.iter().map(|&x| Complex64::new(x, 0.0)).collect(), shape)
    }

    pub fn re(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.re).collect()
    }

    pub fn norm2(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

thread_local! {
    static PLANNER: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn rustfft::Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn run_fft(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    PLANNER.with(|cell| {
        let (planner, cache) = &mut *cell.borrow_mut();
        let plan = cache
            .entry((n, inverse))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(n)
                } else {
                    planner.plan_fft_forward(n)
                }
            })
            .clone();
        plan.process(buf);
    });
}

/// Forward 1D DFT, unnormalized.
pub fn dft1(v: &CField) -> Result<CField> {
    let n = match v.shape {
        Shape::D1(n) => n,
        _ => return Err(Error::ShapeMismatch("dft1 expects a 1D field".into())),
    };
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut data = v.data.clone();
    run_fft(&mut data, false);
    CField::new(data, v.shape)
}

/// Inverse 1D DFT (divides by `n`).
pub fn idft1(v: &CField) -> Result<CField> {
    let n = match v.shape {
        Shape::D1(n) => n,
        _ => return Err(Error::ShapeMismatch("idft1 expects a 1D field".into())),
    };
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut data = v.data.clone();
    run_fft(&mut data, true);
    let scale = 1.0 / n as f64;
    for c in &mut data {
        *c *= scale;
    }
    CField::new(data, v.shape)
}

fn dft2_impl(m: &CField, inverse: bool) -> Result<CField> {
    let (rows, cols) = match m.shape {
        Shape::D2(r, c) => (r, c),
        _ => return Err(Error::ShapeMismatch("dft2 expects a 2D field".into())),
    };
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyInput);
    }
    let mut data = m.data.clone();
    // Columns are contiguous in column-major storage.
    for j in 0..cols {
        run_fft(&mut data[j * rows..(j + 1) * rows], inverse);
    }
    let mut row_buf = vec![Complex64::new(0.0, 0.0); cols];
    for i in 0..rows {
        for j in 0..cols {
            row_buf[j] = data[j * rows + i];
        }
        run_fft(&mut row_buf, inverse);
        for j in 0..cols {
            data[j * rows + i] = row_buf[j];
        }
    }
    if inverse {
        let scale = 1.0 / (rows * cols) as f64;
        for c in &mut data {
            *c *= scale;
        }
    }
    CField::new(data, m.shape)
}

/// Forward 2D DFT (separable application of [`dft1`] along both axes).
pub fn dft2(m: &CField) -> Result<CField> {
    dft2_impl(m, false)
}

/// Inverse 2D DFT (divides by `n*m`).
pub fn idft2(m: &CField) -> Result<CField> {
    dft2_impl(m, true)
}

/// Angular frequency of natural-order bin `j` on an `n`-point grid,
/// wrapped into `(-pi, pi]`.
pub fn bin_phi(n: usize, j: usize) -> f64 {
    debug_assert!(j < n);
    if 2 * j <= n {
        2.0 * std::f64::consts::PI * j as f64 / n as f64
    } else {
        2.0 * std::f64::consts::PI * (j as f64 - n as f64) / n as f64
    }
}

/// Natural-order bin holding the `c`-th centered (ascending-`phi`) entry.
pub fn centered_to_natural(n: usize, c: usize) -> usize {
    (c + n / 2 + 1) % n
}

/// Centered position of natural-order bin `j`.
pub fn natural_to_centered(n: usize, j: usize) -> usize {
    (j + n - (n / 2 + 1) % n) % n
}

/// Reorder a natural-order spectrum into centered (ascending `phi`) order.
pub fn to_centered<T: Copy>(v: &[T]) -> Vec<T> {
    let n = v.len();
    (0..n).map(|c| v[centered_to_natural(n, c)]).collect()
}

/// Inverse of [`to_centered`].
pub fn from_centered<T: Copy + Default>(v: &[T]) -> Vec<T> {
    let n = v.len();
    let mut out = vec![T::default(); n];
    for (c, &val) in v.iter().enumerate() {
        out[centered_to_natural(n, c)] = val;
    }
    out
}
