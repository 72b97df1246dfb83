//! The benchmark linear systems: Tikhonov and anisotropic 1D integral
//! equations, a 1D Dirichlet PDE, and the 2D Kronecker integral system.
//! All operators are matrix-free with exact dense materialization at
//! small sizes.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::field::{Field, Shape};
use crate::kron::kron_matvec;
use crate::linalg::{DenseMat, DENSE_CAP};
use crate::toeplitz::{toeplitz_matvec, ToeplitzKernel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regularization {
    Tikhonov,
    Anisotropic,
    Pde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Circulant,
    ToeplitzZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaUnits {
    Mesh,
    Physical,
}

/// Boundary treatment seen by grid transfers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Periodic,
    Dirichlet,
}

/// Declarative description of one benchmark linear system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub dimension: u8,
    /// Grid cells per axis; must be a power of two >= 8.
    pub n: usize,
    pub alpha: f64,
    #[serde(default = "default_sigma")]
    pub kernel_sigma: f64,
    #[serde(default = "default_sigma_units")]
    pub sigma_units: SigmaUnits,
    pub regularization: Regularization,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
}

fn default_sigma() -> f64 {
    1.5
}
fn default_sigma_units() -> SigmaUnits {
    SigmaUnits::Mesh
}
fn default_boundary() -> Boundary {
    Boundary::Circulant
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.dimension == 1 || self.dimension == 2) {
            return Err(Error::InvalidArgument("dimension must be 1 or 2".into()));
        }
        if !self.n.is_power_of_two() || self.n < 8 {
            return Err(Error::InvalidArgument(format!(
                "n must be a power of two >= 8, got {}",
                self.n
            )));
        }
        if self.alpha <= 0.0 {
            return Err(Error::InvalidArgument("alpha must be positive".into()));
        }
        if self.dimension == 2 && self.regularization != Regularization::Tikhonov {
            return Err(Error::InvalidArgument(
                "anisotropic and pde regularizations are 1D only".into(),
            ));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Arc<dyn LinearSystemOp>> {
        self.validate()?;
        match (self.dimension, self.regularization) {
            (1, Regularization::Pde) => Ok(Arc::new(build_pde_1d(self.n, self.alpha)?)),
            (1, _) => Ok(Arc::new(build_integral_1d(self)?)),
            (2, _) => Ok(Arc::new(build_integral_2d_with(
                self.n,
                self.alpha,
                self.kernel_sigma,
                self.sigma_units,
                self.boundary,
            )?)),
            _ => unreachable!(),
        }
    }

    /// Stable hash used by checkpoints to detect operator mismatch.
    pub fn hash(&self) -> u64 {
        // FNV-1a over the canonical JSON encoding.
        let bytes = serde_json::to_vec(self).expect("ProblemSpec is serializable");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }
}

/// Matrix-free linear operator with optional dense materialization.
pub trait LinearSystemOp: Send + Sync {
    fn apply(&self, x: &Field) -> Result<Field>;
    fn shape(&self) -> Shape;
    fn symmetric(&self) -> bool;
    fn spd(&self) -> bool;
    fn boundary_kind(&self) -> BoundaryKind;

    fn n_total(&self) -> usize {
        self.shape().len()
    }

    /// True when the diagonal of the matrix is a single repeated value
    /// (circulant and BCCB operators).
    fn constant_diag(&self) -> bool {
        false
    }

    /// Materialize by probing standard basis vectors. Guarded by the
    /// dense cap.
    fn densify(&self) -> Result<DenseMat> {
        let total = self.n_total();
        if total > DENSE_CAP {
            return Err(Error::DenseCapExceeded {
                size: total,
                cap: DENSE_CAP,
            });
        }
        let shape = self.shape();
        let mut m = DenseMat::zeros(total, total);
        for j in 0..total {
            let mut e = Field::zeros(shape);
            e.data_mut()[j] = 1.0;
            let col = self.apply(&e)?;
            for i in 0..total {
                m[(i, j)] = col.data()[i];
            }
        }
        Ok(m)
    }

    /// Diagonal of the matrix, in storage order.
    fn diag(&self) -> Result<Vec<f64>> {
        let shape = self.shape();
        let total = self.n_total();
        if self.constant_diag() {
            let mut e = Field::zeros(shape);
            e.data_mut()[0] = 1.0;
            let a0 = self.apply(&e)?;
            return Ok(vec![a0.data()[0]; total]);
        }
        let mut d = vec![0.0; total];
        for j in 0..total {
            let mut e = Field::zeros(shape);
            e.data_mut()[j] = 1.0;
            d[j] = self.apply(&e)?.data()[j];
        }
        Ok(d)
    }
}

fn check_shape(op_shape: Shape, x: &Field) -> Result<()> {
    if x.shape() != op_shape {
        return Err(Error::ShapeMismatch(format!(
            "operator shape {op_shape:?}, input {:?}",
            x.shape()
        )));
    }
    Ok(())
}

/// Gaussian convolution kernel as a symmetric Toeplitz/circulant stencil.
///
/// Entries are proportional to `exp(-(d*h)^2 / (2 sigma_phys^2))` at lag `d`
/// (with `sigma_phys = sigma*h` in mesh units) and row-normalized so the
/// full stencil sums to 1. With the circulant boundary the lags wrap
/// modulo `n`.
pub fn build_gaussian_kernel(
    n: usize,
    sigma: f64,
    sigma_units: SigmaUnits,
    boundary: Boundary,
) -> Result<ToeplitzKernel> {
    if sigma <= 0.0 {
        return Err(Error::InvalidArgument("sigma must be positive".into()));
    }
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let h = 1.0 / n as f64;
    // Lag expressed in mesh widths; in physical units sigma spans
    // sigma/h cells.
    let sigma_cells = match sigma_units {
        SigmaUnits::Mesh => sigma,
        SigmaUnits::Physical => sigma / h,
    };
    let g = |d: f64| (-d * d / (2.0 * sigma_cells * sigma_cells)).exp();
    let col: Vec<f64> = match boundary {
        Boundary::ToeplitzZero => (0..n).map(|d| g(d as f64)).collect(),
        Boundary::Circulant => (0..n)
            .map(|d| {
                // Wrap the tails; two periods either side is far beyond
                // any sigma used in practice.
                (-2..=2i64)
                    .map(|m| g(d as f64 + m as f64 * n as f64))
                    .sum()
            })
            .collect(),
    };
    let full_sum = match boundary {
        Boundary::ToeplitzZero => col[0] + 2.0 * col[1..].iter().sum::<f64>(),
        Boundary::Circulant => col.iter().sum::<f64>(),
    };
    let normalized: Vec<f64> = col.iter().map(|v| v / full_sum).collect();
    ToeplitzKernel::symmetric(normalized)
}

/// Symmetric periodic three-point stencil for `-(a(z) u'(z))'` with
/// interface coefficients `w[i] = a(i*h)`, scaled by `1/h^2`.
#[derive(Debug, Clone)]
pub struct AnisotropicStencil {
    w: Vec<f64>,
    inv_h2: f64,
}

impl AnisotropicStencil {
    pub fn new(n: usize) -> AnisotropicStencil {
        let h = 1.0 / n as f64;
        let a = |z: f64| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * z).sin();
        AnisotropicStencil {
            w: (0..n).map(|i| a(i as f64 * h)).collect(),
            inv_h2: 1.0 / (h * h),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.w.len();
        (0..n)
            .map(|i| {
                let wl = self.w[i];
                let wr = self.w[(i + 1) % n];
                self.inv_h2
                    * (wl * (x[i] - x[(i + n - 1) % n]) + wr * (x[i] - x[(i + 1) % n]))
            })
            .collect()
    }
}

/// 1D integral system `alpha*R + K` (R = identity or anisotropic stencil).
pub struct Integral1d {
    alpha: f64,
    kernel: Option<ToeplitzKernel>,
    stencil: Option<AnisotropicStencil>,
    boundary: Boundary,
    n: usize,
}

impl Integral1d {
    /// Test hook: replace the convolution term by zero.
    pub fn with_zero_kernel(mut self) -> Integral1d {
        self.kernel = None;
        self
    }

    /// Test hook: replace the convolution term by the identity.
    pub fn with_identity_kernel(mut self) -> Integral1d {
        let mut col = vec![0.0; self.n];
        col[0] = 1.0;
        self.kernel = Some(ToeplitzKernel::symmetric(col).unwrap());
        self
    }

    pub fn kernel(&self) -> Option<&ToeplitzKernel> {
        self.kernel.as_ref()
    }
}

impl LinearSystemOp for Integral1d {
    fn apply(&self, x: &Field) -> Result<Field> {
        check_shape(self.shape(), x)?;
        let mut out = match &self.stencil {
            Some(s) => {
                let mut d = s.apply(x.data());
                for v in &mut d {
                    *v *= self.alpha;
                }
                d
            }
            None => x.data().iter().map(|v| self.alpha * v).collect(),
        };
        if let Some(k) = &self.kernel {
            let kx = toeplitz_matvec(k, x.data())?;
            for (o, v) in out.iter_mut().zip(kx) {
                *o += v;
            }
        }
        Field::new(out, x.shape())
    }

    fn shape(&self) -> Shape {
        Shape::D1(self.n)
    }

    fn symmetric(&self) -> bool {
        true
    }

    fn spd(&self) -> bool {
        // K is PSD (positive circulant symbol) and alpha > 0; the
        // anisotropic stencil is PSD as well.
        true
    }

    fn boundary_kind(&self) -> BoundaryKind {
        match self.boundary {
            Boundary::Circulant => BoundaryKind::Periodic,
            // The zero-extension case is still solved on a periodic grid
            // hierarchy; transfers wrap.
            Boundary::ToeplitzZero => BoundaryKind::Periodic,
        }
    }

    fn constant_diag(&self) -> bool {
        self.stencil.is_none() && self.boundary == Boundary::Circulant
    }
}

/// `A = alpha*R + K` for the 1D integral equation.
pub fn build_integral_1d(spec: &ProblemSpec) -> Result<Integral1d> {
    spec.validate()?;
    if spec.dimension != 1 {
        return Err(Error::InvalidArgument(
            "build_integral_1d expects dimension 1".into(),
        ));
    }
    let stencil = match spec.regularization {
        Regularization::Tikhonov => None,
        Regularization::Anisotropic => Some(AnisotropicStencil::new(spec.n)),
        Regularization::Pde => {
            return Err(Error::InvalidArgument(
                "pde regularization is built by build_pde_1d".into(),
            ))
        }
    };
    let kernel = build_gaussian_kernel(spec.n, spec.kernel_sigma, spec.sigma_units, spec.boundary)?;
    Ok(Integral1d {
        alpha: spec.alpha,
        kernel: Some(kernel),
        stencil,
        boundary: spec.boundary,
        n: spec.n,
    })
}

/// `alpha*I - u''` on the n-1 interior points of [0,1] with homogeneous
/// Dirichlet boundaries, three-point stencil scaled by `1/h^2`.
pub struct Pde1d {
    alpha: f64,
    n_interior: usize,
    inv_h2: f64,
}

impl LinearSystemOp for Pde1d {
    fn apply(&self, x: &Field) -> Result<Field> {
        check_shape(self.shape(), x)?;
        let v = x.data();
        let n = self.n_interior;
        let out: Vec<f64> = (0..n)
            .map(|i| {
                let left = if i > 0 { v[i - 1] } else { 0.0 };
                let right = if i + 1 < n { v[i + 1] } else { 0.0 };
                self.alpha * v[i] + self.inv_h2 * (2.0 * v[i] - left - right)
            })
            .collect();
        Field::new(out, x.shape())
    }

    fn shape(&self) -> Shape {
        Shape::D1(self.n_interior)
    }

    fn symmetric(&self) -> bool {
        true
    }

    fn spd(&self) -> bool {
        true
    }

    fn boundary_kind(&self) -> BoundaryKind {
        BoundaryKind::Dirichlet
    }
}

pub fn build_pde_1d(n: usize, alpha: f64) -> Result<Pde1d> {
    if n < 8 {
        return Err(Error::InvalidArgument("n must be >= 8".into()));
    }
    let h = 1.0 / n as f64;
    Ok(Pde1d {
        alpha,
        n_interior: n - 1,
        inv_h2: 1.0 / (h * h),
    })
}

/// 2D integral system `alpha*(I (x) I) + K (x) K` acting on matrices:
/// `apply(X) = alpha*X + K X K'`.
pub struct Integral2d {
    alpha: f64,
    kernel: Option<ToeplitzKernel>,
    n: usize,
}

impl Integral2d {
    /// Test hook: replace K by the identity.
    pub fn with_identity_kernel(mut self) -> Integral2d {
        self.kernel = None;
        self
    }

    pub fn kernel(&self) -> Option<&ToeplitzKernel> {
        self.kernel.as_ref()
    }
}

impl LinearSystemOp for Integral2d {
    fn apply(&self, x: &Field) -> Result<Field> {
        check_shape(self.shape(), x)?;
        let kx = match &self.kernel {
            Some(k) => kron_matvec(
                |v| toeplitz_matvec(k, v),
                |v| toeplitz_matvec(k, v),
                x,
            )?,
            None => x.clone(),
        };
        let mut out = x.scaled(self.alpha);
        out.axpy(1.0, &kx);
        Ok(out)
    }

    fn shape(&self) -> Shape {
        Shape::D2(self.n, self.n)
    }

    fn symmetric(&self) -> bool {
        true
    }

    fn spd(&self) -> bool {
        true
    }

    fn boundary_kind(&self) -> BoundaryKind {
        BoundaryKind::Periodic
    }

    fn constant_diag(&self) -> bool {
        true
    }
}

pub fn build_integral_2d(n: usize, alpha: f64) -> Result<Integral2d> {
    build_integral_2d_with(n, alpha, 1.5, SigmaUnits::Mesh, Boundary::Circulant)
}

pub fn build_integral_2d_with(
    n: usize,
    alpha: f64,
    sigma: f64,
    sigma_units: SigmaUnits,
    boundary: Boundary,
) -> Result<Integral2d> {
    if !n.is_power_of_two() {
        return Err(Error::InvalidArgument("n must be a power of two".into()));
    }
    let kernel = build_gaussian_kernel(n, sigma, sigma_units, boundary)?;
    Ok(Integral2d {
        alpha,
        kernel: Some(kernel),
        n,
    })
}

/// Periodic model problem from the smoothing-factor analysis:
/// circulant tridiagonal `(2+alpha)` on the diagonal, `-1` off-diagonal.
pub struct ModelProblem1d {
    pub alpha: f64,
    pub n: usize,
}

impl LinearSystemOp for ModelProblem1d {
    fn apply(&self, x: &Field) -> Result<Field> {
        check_shape(self.shape(), x)?;
        let v = x.data();
        let n = self.n;
        let out: Vec<f64> = (0..n)
            .map(|i| (2.0 + self.alpha) * v[i] - v[(i + 1) % n] - v[(i + n - 1) % n])
            .collect();
        Field::new(out, x.shape())
    }

    fn shape(&self) -> Shape {
        Shape::D1(self.n)
    }

    fn symmetric(&self) -> bool {
        true
    }

    fn spd(&self) -> bool {
        self.alpha > 0.0
    }

    fn boundary_kind(&self) -> BoundaryKind {
        BoundaryKind::Periodic
    }

    fn constant_diag(&self) -> bool {
        true
    }
}

/// Dense operator wrapper, used for diagnostics and test hooks.
pub struct DenseOp {
    mat: DenseMat,
    symmetric: bool,
    spd: bool,
    boundary: BoundaryKind,
}

impl DenseOp {
    pub fn new(mat: DenseMat, spd: bool) -> DenseOp {
        let symmetric = mat.max_asymmetry() < 1e-12 * mat.frobenius_norm().max(1.0);
        DenseOp {
            mat,
            symmetric,
            spd,
            boundary: BoundaryKind::Periodic,
        }
    }
}

impl LinearSystemOp for DenseOp {
    fn apply(&self, x: &Field) -> Result<Field> {
        check_shape(self.shape(), x)?;
        Field::new(self.mat.matvec(x.data())?, x.shape())
    }

    fn shape(&self) -> Shape {
        Shape::D1(self.mat.rows())
    }

    fn symmetric(&self) -> bool {
        self.symmetric
    }

    fn spd(&self) -> bool {
        self.spd
    }

    fn boundary_kind(&self) -> BoundaryKind {
        self.boundary
    }

    fn densify(&self) -> Result<DenseMat> {
        Ok(self.mat.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eig_sym;
    use rand::{Rng, SeedableRng};

    fn spec_1d(n: usize, alpha: f64, reg: Regularization) -> ProblemSpec {
        ProblemSpec {
            dimension: 1,
            n,
            alpha,
            kernel_sigma: 1.5,
            sigma_units: SigmaUnits::Mesh,
            regularization: reg,
            boundary: Boundary::Circulant,
        }
    }

    #[test]
    fn gaussian_kernel_rows_sum_to_one() {
        // Circulant: every row literally sums to 1.
        let k = build_gaussian_kernel(8, 1.5, SigmaUnits::Mesh, Boundary::Circulant).unwrap();
        let sums = k.densify().matvec(&vec![1.0; 8]).unwrap();
        for s in sums {
            assert!((s - 1.0).abs() < 1e-12);
        }
        // Zero-extension: the full (untruncated) stencil sums to 1.
        let k = build_gaussian_kernel(8, 1.5, SigmaUnits::Mesh, Boundary::ToeplitzZero).unwrap();
        assert!((k.full_row_sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_kernel_delta_limit() {
        let k = build_gaussian_kernel(16, 1e-6, SigmaUnits::Mesh, Boundary::Circulant).unwrap();
        assert!((k.first_col()[0] - 1.0).abs() < 1e-12);
        for &v in &k.first_col()[1..] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_kernel_symmetry() {
        let k = build_gaussian_kernel(32, 1.5, SigmaUnits::Mesh, Boundary::Circulant).unwrap();
        assert!(k.is_symmetric());
        assert!(build_gaussian_kernel(8, -1.0, SigmaUnits::Mesh, Boundary::Circulant).is_err());
    }

    #[test]
    fn integral_1d_zero_kernel_is_identity_scaling() {
        let op = build_integral_1d(&spec_1d(16, 0.25, Regularization::Tikhonov))
            .unwrap()
            .with_zero_kernel();
        let x = Field::from_vec((0..16).map(|i| (i as f64).cos()).collect());
        let y = op.apply(&x).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - 0.25 * b).abs() < 1e-14);
        }
    }

    #[test]
    fn integral_1d_tikhonov_spd_eigen_floor() {
        let alpha = 1e-2;
        let op = build_integral_1d(&spec_1d(16, alpha, Regularization::Tikhonov)).unwrap();
        let dense = op.densify().unwrap();
        assert!(dense.max_asymmetry() < 1e-12);
        let (vals, _) = eig_sym(&dense).unwrap();
        assert!(vals[0] >= alpha - 1e-10, "lambda_min = {}", vals[0]);
    }

    #[test]
    fn integral_1d_constant_vector() {
        let alpha = 1e-3;
        let op = build_integral_1d(&spec_1d(64, alpha, Regularization::Tikhonov)).unwrap();
        let y = op.apply(&Field::from_vec(vec![1.0; 64])).unwrap();
        for &v in y.data() {
            assert!((v - (alpha + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn anisotropic_dense_is_symmetric() {
        let op = build_integral_1d(&spec_1d(32, 1e-2, Regularization::Anisotropic)).unwrap();
        let dense = op.densify().unwrap();
        assert!(dense.max_asymmetry() < 1e-9 * dense.frobenius_norm());
    }

    #[test]
    fn invalid_regularization_for_dimension_errors() {
        let mut spec = spec_1d(16, 1e-2, Regularization::Anisotropic);
        spec.dimension = 2;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn pde_1d_stencil_entries() {
        let n = 16;
        let alpha = 1e-4;
        let op = build_pde_1d(n, alpha).unwrap();
        let dense = op.densify().unwrap();
        let h2 = 1.0 / (n as f64 * n as f64);
        for i in 0..n - 1 {
            assert!((dense[(i, i)] - (alpha + 2.0 / h2)).abs() < 1e-9);
            if i + 1 < n - 1 {
                assert!((dense[(i, i + 1)] + 1.0 / h2).abs() < 1e-9);
                assert!((dense[(i + 1, i)] + 1.0 / h2).abs() < 1e-9);
            }
        }
        assert_eq!(dense.max_asymmetry(), 0.0);
    }

    #[test]
    fn pde_1d_sine_eigenfunction() {
        // apply to sin(pi z) ~ (alpha + pi^2) sin(pi z), O(h^2) error that
        // shrinks 4x when n doubles.
        let alpha = 1e-4;
        let errs: Vec<f64> = [64usize, 128]
            .iter()
            .map(|&n| {
                let op = build_pde_1d(n, alpha).unwrap();
                let h = 1.0 / n as f64;
                let x = Field::from_vec(
                    (1..n)
                        .map(|i| (std::f64::consts::PI * i as f64 * h).sin())
                        .collect(),
                );
                let y = op.apply(&x).unwrap();
                let lam = alpha + std::f64::consts::PI.powi(2);
                y.data()
                    .iter()
                    .zip(x.data())
                    .map(|(a, b)| (a - lam * b).abs())
                    .fold(0.0f64, f64::max)
            })
            .collect();
        assert!(errs[0] < 1.0);
        assert!(errs[1] < errs[0] / 3.0, "errors {errs:?} not O(h^2)");
    }

    #[test]
    fn integral_2d_identity_kernel_hook() {
        let op = build_integral_2d(8, 1.0).unwrap().with_identity_kernel();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let x = Field::new(
            (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            Shape::D2(8, 8),
        )
        .unwrap();
        let y = op.apply(&x).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - 2.0 * b).abs() < 1e-14);
        }
    }

    #[test]
    fn integral_2d_matches_explicit_kronecker_n4() {
        // densify() probes Vec-ordered basis fields, so comparing against
        // alpha*I + K (x) K on Vec(X) checks the Kronecker identity.
        let n = 4;
        let alpha = 0.3;
        // n=4 violates the n>=8 spec floor, so assemble directly.
        let kernel = build_gaussian_kernel(n, 1.5, SigmaUnits::Mesh, Boundary::Circulant).unwrap();
        let op = Integral2d {
            alpha,
            kernel: Some(kernel.clone()),
            n,
        };
        let kd = kernel.densify();
        let mut explicit = DenseMat::zeros(16, 16);
        for i1 in 0..n {
            for j1 in 0..n {
                for i2 in 0..n {
                    for j2 in 0..n {
                        explicit[(j1 * n + i1, j2 * n + i2)] =
                            kd[(j1, j2)] * kd[(i1, i2)]
                                + if i1 == i2 && j1 == j2 { alpha } else { 0.0 };
                    }
                }
            }
        }
        let dense = op.densify().unwrap();
        for i in 0..16 {
            for j in 0..16 {
                assert!((dense[(i, j)] - explicit[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn integral_2d_all_ones() {
        let alpha = 1e-2;
        let op = build_integral_2d(16, alpha).unwrap();
        let y = op
            .apply(&Field::new(vec![1.0; 256], Shape::D2(16, 16)).unwrap())
            .unwrap();
        for &v in y.data() {
            assert!((v - (alpha + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn built_operators_are_linear() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let ops: Vec<Arc<dyn LinearSystemOp>> = vec![
            Arc::new(build_integral_1d(&spec_1d(32, 1e-3, Regularization::Tikhonov)).unwrap()),
            Arc::new(build_integral_1d(&spec_1d(32, 1e-3, Regularization::Anisotropic)).unwrap()),
            Arc::new(build_pde_1d(32, 1e-4).unwrap()),
            Arc::new(build_integral_2d(8, 1e-3).unwrap()),
        ];
        for op in ops {
            let shape = op.shape();
            let total = shape.len();
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                Field::new(
                    (0..total).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    shape,
                )
                .unwrap()
            };
            let x = mk(&mut rng);
            let y = mk(&mut rng);
            let (a, b) = (0.7, -1.3);
            let mut combo = x.scaled(a);
            combo.axpy(b, &y);
            let lhs = op.apply(&combo).unwrap();
            let mut rhs = op.apply(&x).unwrap().scaled(a);
            rhs.axpy(b, &op.apply(&y).unwrap());
            let scale = lhs.norm2().max(1.0);
            assert!(lhs.sub(&rhs).norm2() <= 1e-12 * scale);
        }
    }

    #[test]
    fn densify_agrees_with_apply_on_basis() {
        let op = build_integral_1d(&spec_1d(16, 1e-2, Regularization::Tikhonov)).unwrap();
        let dense = op.densify().unwrap();
        for j in 0..16 {
            let mut e = Field::zeros(Shape::D1(16));
            e.data_mut()[j] = 1.0;
            let col = op.apply(&e).unwrap();
            for i in 0..16 {
                assert!((dense[(i, j)] - col.data()[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn tikhonov_2d_spd_floor() {
        let alpha = 1e-3;
        let op = build_integral_2d(8, alpha).unwrap();
        let (vals, _) = eig_sym(&op.densify().unwrap()).unwrap();
        assert!(vals[0] >= alpha * (1.0 - 1e-8));
    }
}
