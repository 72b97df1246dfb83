//! Real-valued grid functions: vectors on 1D grids and matrices (stored
//! column-major, matching the Vec convention) on 2D grids.

use crate::{Error, Result};

/// Logical shape of a grid function. 2D data is stored column-major, so
/// `Vec`/`Mat` conversions are free reinterpretations of the same buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Shape {
    D1(usize),
    D2(usize, usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::D1(n) => n,
            Shape::D2(n, m) => n * m,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Shape of the next-coarser grid (each axis halved).
    pub fn coarsen(&self) -> Shape {
        match *self {
            Shape::D1(n) => Shape::D1(n / 2),
            Shape::D2(n, m) => Shape::D2(n / 2, m / 2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    data: Vec<f64>,
    shape: Shape,
}

impl Field {
    pub fn new(data: Vec<f64>, shape: Shape) -> Result<Field> {
        if data.len() != shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "storage length {} vs shape length {}",
                data.len(),
                shape.len()
            )));
        }
        Ok(Field { data, shape })
    }

    pub fn from_vec(data: Vec<f64>) -> Field {
        let n = data.len();
        Field {
            data,
            shape: Shape::D1(n),
        }
    }

    pub fn zeros(shape: Shape) -> Field {
        Field {
            data: vec![0.0; shape.len()],
            shape,
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Element at (row, col) of a 2D field (column-major storage).
    pub fn at(&self, i: usize, j: usize) -> f64 {
        match self.shape {
            Shape::D1(_) => {
                debug_assert_eq!(j, 0);
                self.data[i]
            }
            Shape::D2(n, _) => self.data[j * n + i],
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        match self.shape {
            Shape::D1(_) => self.data[i] = v,
            Shape::D2(n, _) => self.data[j * n + i] = v,
        }
    }

    pub fn norm2(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Field) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn scaled(&self, s: f64) -> Field {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    /// self += s * other
    pub fn axpy(&mut self, s: f64, other: &Field) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn sub(&self, other: &Field) -> Field {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn add(&self, other: &Field) -> Field {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Reinterpret as a flat 1D field (the Vec transformation; column-major
    /// storage makes this a no-op on the buffer).
    pub fn vectorized(&self) -> Field {
        Field {
            data: self.data.clone(),
            shape: Shape::D1(self.data.len()),
        }
    }

    /// Reinterpret a flat field as a 2D field of the given shape (Mat).
    pub fn reshaped(&self, shape: Shape) -> Result<Field> {
        Field::new(self.data.clone(), shape)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_consistency_is_enforced() {
        assert!(Field::new(vec![1.0, 2.0], Shape::D1(3)).is_err());
        assert!(Field::new(vec![1.0; 6], Shape::D2(2, 3)).is_ok());
    }

    #[test]
    fn column_major_indexing() {
        // 2x3 matrix [[1,3,5],[2,4,6]] stored column-major.
        let f = Field::new(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], Shape::D2(2, 3)).unwrap();
        assert_eq!(f.at(0, 0), 1.0);
        assert_eq!(f.at(1, 0), 2.0);
        assert_eq!(f.at(0, 2), 5.0);
        assert_eq!(f.at(1, 2), 6.0);
    }

    #[test]
    fn vec_mat_round_trip() {
        let f = Field::new((0..12).map(|i| i as f64).collect(), Shape::D2(3, 4)).unwrap();
        let v = f.vectorized();
        assert_eq!(v.shape(), Shape::D1(12));
        let back = v.reshaped(Shape::D2(3, 4)).unwrap();
        assert_eq!(back, f);
    }
}
