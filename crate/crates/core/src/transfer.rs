//! Grid transfers: full-weighting restriction and linear interpolation,
//! a variational pair (`restrict = interpolate' / 2`). 2D transfers are
//! tensor products of the 1D stencils.

use crate::field::{Field, Shape};
use crate::problem::BoundaryKind;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferKind {
    /// Periodic 1D grid: fine n (even) -> coarse n/2, coarse j at fine 2j.
    Periodic1d,
    /// Dirichlet interior points: fine 2c+1 -> coarse c, coarse j at fine 2j+1.
    Dirichlet1d,
    /// Tensor product of two periodic 1D transfers.
    Periodic2d,
}

#[derive(Debug, Clone, Copy)]
pub struct TransferPair {
    kind: TransferKind,
    fine: Shape,
    coarse: Shape,
}

impl TransferPair {
    pub fn new(boundary: BoundaryKind, fine: Shape) -> Result<TransferPair> {
        match (boundary, fine) {
            (BoundaryKind::Periodic, Shape::D1(n)) => {
                if n % 2 != 0 || n < 4 {
                    return Err(Error::InvalidArgument(format!(
                        "periodic transfer needs even fine length >= 4, got {n}"
                    )));
                }
                Ok(TransferPair {
                    kind: TransferKind::Periodic1d,
                    fine,
                    coarse: Shape::D1(n / 2),
                })
            }
            (BoundaryKind::Dirichlet, Shape::D1(n)) => {
                if n % 2 == 0 || n < 3 {
                    return Err(Error::InvalidArgument(format!(
                        "dirichlet transfer needs odd fine length >= 3, got {n}"
                    )));
                }
                Ok(TransferPair {
                    kind: TransferKind::Dirichlet1d,
                    fine,
                    coarse: Shape::D1((n - 1) / 2),
                })
            }
            (BoundaryKind::Periodic, Shape::D2(n, m)) => {
                if n % 2 != 0 || m % 2 != 0 || n < 4 || m < 4 {
                    return Err(Error::InvalidArgument(format!(
                        "periodic 2D transfer needs even sides >= 4, got {n}x{m}"
                    )));
                }
                Ok(TransferPair {
                    kind: TransferKind::Periodic2d,
                    fine,
                    coarse: Shape::D2(n / 2, m / 2),
                })
            }
            (BoundaryKind::Dirichlet, Shape::D2(..)) => Err(Error::InvalidArgument(
                "2D dirichlet transfers are not supported".into(),
            )),
        }
    }

    pub fn fine_shape(&self) -> Shape {
        self.fine
    }

    pub fn coarse_shape(&self) -> Shape {
        self.coarse
    }

    pub fn restrict(&self, f: &Field) -> Result<Field> {
        if f.shape() != self.fine {
            return Err(Error::ShapeMismatch(format!(
                "restrict expects {:?}, got {:?}",
                self.fine,
                f.shape()
            )));
        }
        Ok(match self.kind {
            TransferKind::Periodic1d => Field::from_vec(restrict_periodic(f.data())),
            TransferKind::Dirichlet1d => Field::from_vec(restrict_dirichlet(f.data())),
            TransferKind::Periodic2d => tensor_apply(f, self.coarse, restrict_periodic)?,
        })
    }

    pub fn interpolate(&self, c: &Field) -> Result<Field> {
        if c.shape() != self.coarse {
            return Err(Error::ShapeMismatch(format!(
                "interpolate expects {:?}, got {:?}",
                self.coarse,
                c.shape()
            )));
        }
        Ok(match self.kind {
            TransferKind::Periodic1d => Field::from_vec(interpolate_periodic(c.data())),
            TransferKind::Dirichlet1d => Field::from_vec(interpolate_dirichlet(c.data())),
            TransferKind::Periodic2d => tensor_apply(c, self.fine, interpolate_periodic)?,
        })
    }
}

fn restrict_periodic(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let nc = n / 2;
    (0..nc)
        .map(|j| {
            let i = 2 * j;
            0.25 * (f[(i + n - 1) % n] + 2.0 * f[i] + f[(i + 1) % n])
        })
        .collect()
}

fn interpolate_periodic(c: &[f64]) -> Vec<f64> {
    let nc = c.len();
    let n = 2 * nc;
    let mut out = vec![0.0; n];
    for j in 0..nc {
        out[2 * j] = c[j];
        out[2 * j + 1] = 0.5 * (c[j] + c[(j + 1) % nc]);
    }
    out
}

fn restrict_dirichlet(f: &[f64]) -> Vec<f64> {
    let nc = (f.len() - 1) / 2;
    (0..nc)
        .map(|j| 0.25 * (f[2 * j] + 2.0 * f[2 * j + 1] + f[2 * j + 2]))
        .collect()
}

fn interpolate_dirichlet(c: &[f64]) -> Vec<f64> {
    let nc = c.len();
    let n = 2 * nc + 1;
    let mut out = vec![0.0; n];
    for j in 0..nc {
        out[2 * j + 1] = c[j];
    }
    for i in (0..n).step_by(2) {
        let left = if i > 0 { c[i / 2 - 1] } else { 0.0 };
        let right = if i / 2 < nc { c[i / 2] } else { 0.0 };
        out[i] = 0.5 * (left + right);
    }
    out
}

/// Apply a 1D stencil along both axes of a 2D field (columns then rows).
fn tensor_apply(
    x: &Field,
    out_shape: Shape,
    stencil: fn(&[f64]) -> Vec<f64>,
) -> Result<Field> {
    let (n, m) = match x.shape() {
        Shape::D2(n, m) => (n, m),
        _ => unreachable!(),
    };
    let (on, om) = match out_shape {
        Shape::D2(a, b) => (a, b),
        _ => unreachable!(),
    };
    // Columns first.
    let mut mid = Field::zeros(Shape::D2(on, m));
    for j in 0..m {
        let col: Vec<f64> = (0..n).map(|i| x.at(i, j)).collect();
        let sc = stencil(&col);
        for i in 0..on {
            mid.set(i, j, sc[i]);
        }
    }
    // Then rows.
    let mut out = Field::zeros(out_shape);
    for i in 0..on {
        let row: Vec<f64> = (0..m).map(|j| mid.at(i, j)).collect();
        let sr = stencil(&row);
        for j in 0..om {
            out.set(i, j, sr[j]);
        }
    }
    Ok(out)
}
