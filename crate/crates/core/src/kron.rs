//! Kronecker-product matvec via the identity `(A (x) B) Vec(X) = Vec(B X A')`,
//! with Vec defined column-major.

use crate::field::{Field, Shape};
use crate::{Error, Result};

/// `Mat((A_op (x) B_op) Vec(X))` for square operators acting on length-n
/// vectors and a square n-by-n field `X`. Only the action of each operator
/// is needed: `B` is applied down the columns of `X` and `A` along its rows.
pub fn kron_matvec<FA, FB>(a_op: FA, b_op: FB, x: &Field) -> Result<Field>
where
    FA: Fn(&[f64]) -> Result<Vec<f64>>,
    FB: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let (n, m) = match x.shape() {
        Shape::D2(n, m) => (n, m),
        _ => return Err(Error::ShapeMismatch("kron_matvec expects a 2D field".into())),
    };
    if n != m {
        return Err(Error::ShapeMismatch(format!(
            "kron_matvec expects a square field, got {n}x{m}"
        )));
    }
    let mut out = Field::zeros(x.shape());
    // B down each column (columns are contiguous).
    for j in 0..m {
        let col: Vec<f64> = (0..n).map(|i| x.at(i, j)).collect();
        let bc = b_op(&col)?;
        if bc.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bc.len(),
            });
        }
        for i in 0..n {
            out.set(i, j, bc[i]);
        }
    }
    // A along each row.
    for i in 0..n {
        let row: Vec<f64> = (0..m).map(|j| out.at(i, j)).collect();
        let ar = a_op(&row)?;
        if ar.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: ar.len(),
            });
        }
        for j in 0..m {
            out.set(i, j, ar[j]);
        }
    }
    Ok(out)
}
