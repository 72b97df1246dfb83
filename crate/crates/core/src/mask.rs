//! Frequency masks and the spectral filters built from them.
//!
//! The level-`l` mask profile rises as `sqrt(|phi| / (pi/2^(l-1)))` inside
//! the band of frequencies visible on grid `l` and is zero outside, so it
//! peaks at the band edge `|phi| = pi/2^(l-1)` and vanishes at DC. 2D masks
//! use the max-norm radial profile over the square band.

use num_complex::Complex64;

use crate::fft::{bin_phi, dft1, dft2, idft1, idft2, to_centered, CField};
use crate::field::{Field, Shape};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskVariant {
    /// `m_l`: lives on the finest grid, support is the level-l band.
    Fine,
    /// `m_l'`: lives on the level-l grid, spanning its whole frequency axis.
    Level,
}

impl MaskVariant {
    fn name(&self) -> &'static str {
        match self {
            MaskVariant::Fine => "fine",
            MaskVariant::Level => "level",
        }
    }
}

/// Discretized frequency mask. Values are stored in natural bin order
/// (DC at index 0) for direct use against DFT output; [`Self::centered`]
/// exposes the centered ordering used for plotting.
#[derive(Debug, Clone)]
pub struct FrequencyMask {
    values: Field,
    level: usize,
    variant: MaskVariant,
}

impl FrequencyMask {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn variant(&self) -> MaskVariant {
        self.variant
    }

    pub fn shape(&self) -> Shape {
        self.values.shape()
    }

    /// Mask values in natural (DC-first) bin order.
    pub fn natural(&self) -> &Field {
        &self.values
    }

    /// Mask values reordered to centered (ascending phi) order.
    pub fn centered(&self) -> Field {
        match self.values.shape() {
            Shape::D1(_) => Field::from_vec(to_centered(self.values.data())),
            Shape::D2(n, m) => {
                let mut out = Field::zeros(self.values.shape());
                for cj in 0..m {
                    let j = crate::fft::centered_to_natural(m, cj);
                    for ci in 0..n {
                        let i = crate::fft::centered_to_natural(n, ci);
                        out.set(ci, cj, self.values.at(i, j));
                    }
                }
                out
            }
        }
    }

    /// Elementwise square of the mask (same level/variant tags).
    pub fn squared(&self) -> FrequencyMask {
        let mut v = self.values.clone();
        for x in v.data_mut() {
            *x *= *x;
        }
        FrequencyMask {
            values: v,
            level: self.level,
            variant: self.variant,
        }
    }
}

fn band_edge(level: usize) -> f64 {
    std::f64::consts::PI / 2f64.powi(level as i32 - 1)
}

fn check_level(level: usize, num_levels: usize) -> Result<()> {
    if level < 1 || level >= num_levels {
        return Err(Error::LevelOutOfRange {
            level,
            total: num_levels,
        });
    }
    Ok(())
}

/// 1D mask for level `l` (1-based, `1 <= l <= L-1`).
///
/// * `Fine`: `n_target` is the finest grid length; values follow the
///   profile inside `[-pi/2^(l-1), pi/2^(l-1)]` and are zero outside.
/// * `Level`: `n_target` is the level-l grid length `n_l`; the grid's own
///   bins sweep exactly the visible band, so the profile covers the whole
///   axis and the edge bins reach 1.
pub fn make_mask_1d(
    level: usize,
    num_levels: usize,
    n_target: usize,
    variant: MaskVariant,
) -> Result<FrequencyMask> {
    check_level(level, num_levels)?;
    if n_target == 0 {
        return Err(Error::EmptyInput);
    }
    let values: Vec<f64> = match variant {
        MaskVariant::Fine => {
            let edge = band_edge(level);
            (0..n_target)
                .map(|j| {
                    let phi = bin_phi(n_target, j).abs();
                    if phi <= edge + 1e-14 {
                        (phi / edge).sqrt()
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        MaskVariant::Level => (0..n_target)
            .map(|j| {
                let psi = bin_phi(n_target, j).abs();
                (psi / std::f64::consts::PI).sqrt()
            })
            .collect(),
    };
    Ok(FrequencyMask {
        values: Field::from_vec(values),
        level,
        variant,
    })
}

/// 2D mask with the max-norm radial profile over the square band.
pub fn make_mask_2d(
    level: usize,
    num_levels: usize,
    shape: Shape,
    variant: MaskVariant,
) -> Result<FrequencyMask> {
    check_level(level, num_levels)?;
    let (n, m) = match shape {
        Shape::D2(n, m) => (n, m),
        _ => return Err(Error::ShapeMismatch("make_mask_2d expects a 2D shape".into())),
    };
    if n == 0 || m == 0 {
        return Err(Error::EmptyInput);
    }
    let mut values = Field::zeros(shape);
    match variant {
        MaskVariant::Fine => {
            let edge = band_edge(level);
            for j in 0..m {
                let p2 = bin_phi(m, j).abs();
                for i in 0..n {
                    let p1 = bin_phi(n, i).abs();
                    if p1 <= edge + 1e-14 && p2 <= edge + 1e-14 {
                        values.set(i, j, (p1.max(p2) / edge).sqrt());
                    }
                }
            }
        }
        MaskVariant::Level => {
            for j in 0..m {
                let p2 = bin_phi(m, j).abs();
                for i in 0..n {
                    let p1 = bin_phi(n, i).abs();
                    values.set(i, j, (p1.max(p2) / std::f64::consts::PI).sqrt());
                }
            }
        }
    }
    Ok(FrequencyMask {
        values,
        level,
        variant,
    })
}

/// `F_l(v) = m_l . DFT(v)`: masked spectrum of a finest-grid field,
/// returned in centered ordering. 1D and 2D.
pub fn filter_fine(v: &Field, mask: &FrequencyMask) -> Result<CField> {
    if mask.variant != MaskVariant::Fine {
        return Err(Error::MaskVariantMismatch {
            expected: "fine",
            got: mask.variant.name(),
        });
    }
    if v.shape() != mask.shape() {
        return Err(Error::ShapeMismatch(format!(
            "field {:?} vs mask {:?}",
            v.shape(),
            mask.shape()
        )));
    }
    let spec = match v.shape() {
        Shape::D1(_) => dft1(&CField::from_real(v.data()))?,
        Shape::D2(..) => dft2(&CField::from_real_shaped(v.data(), v.shape())?)?,
    };
    let masked: Vec<Complex64> = spec
        .data
        .iter()
        .zip(mask.values.data())
        .map(|(s, &m)| s * m)
        .collect();
    let masked = CField::new(masked, v.shape())?;
    // Reorder to centered.
    let out = match v.shape() {
        Shape::D1(_) => CField::new(to_centered(&masked.data), v.shape())?,
        Shape::D2(n, m) => {
            let mut out = vec![Complex64::new(0.0, 0.0); n * m];
            for cj in 0..m {
                let j = crate::fft::centered_to_natural(m, cj);
                for ci in 0..n {
                    let i = crate::fft::centered_to_natural(n, ci);
                    out[cj * n + ci] = masked.data[j * n + i];
                }
            }
            CField::new(out, v.shape())?
        }
    };
    Ok(out)
}

/// `F_l'(v) = Re(DFT^-1(m_l' . DFT(v)))`: the level-grid filter applied
/// inside cycles. Linear; composing it twice applies the squared mask.
pub fn filter_level(v: &Field, mask: &FrequencyMask) -> Result<Field> {
    if mask.variant != MaskVariant::Level {
        return Err(Error::MaskVariantMismatch {
            expected: "level",
            got: mask.variant.name(),
        });
    }
    if v.shape() != mask.shape() {
        return Err(Error::ShapeMismatch(format!(
            "field {:?} vs mask {:?}",
            v.shape(),
            mask.shape()
        )));
    }
    let (spec, inv): (CField, fn(&CField) -> Result<CField>) = match v.shape() {
        Shape::D1(_) => (dft1(&CField::from_real(v.data()))?, idft1),
        Shape::D2(..) => (
            dft2(&CField::from_real_shaped(v.data(), v.shape())?)?,
            idft2,
        ),
    };
    let masked: Vec<Complex64> = spec
        .data
        .iter()
        .zip(mask.values.data())
        .map(|(s, &m)| s * m)
        .collect();
    let back = inv(&CField::new(masked, v.shape())?)?;
    Field::new(back.re(), v.shape())
}

/// Apply the level filter to an all-ones "mask" (identity) cheaply; used
/// by tests and by the unfiltered cycle path.
pub fn identity_mask(shape: Shape, level: usize) -> FrequencyMask {
    FrequencyMask {
        values: Field::new(vec![1.0; shape.len()], shape).expect("consistent"),
        level,
        variant: MaskVariant::Level,
    }
}
