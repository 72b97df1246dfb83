//! Solver kit for convolution-type integral equations.
//!
//! Discretizing a convolution-type integral equation yields a large,
//! ill-conditioned Toeplitz (or BTTB) system. Classical multigrid stalls on
//! these systems because relaxation smoothers damp the wrong end of the
//! spectrum. This crate provides:
//!
//! * structured linear algebra (FFT, Toeplitz/Kronecker matvecs, dense LU,
//!   a small Jacobi eigensolver) in [`fft`], [`toeplitz`], [`kron`], [`linalg`];
//! * the benchmark problem builders (Tikhonov/anisotropic integral systems,
//!   a 1D Dirichlet PDE, the 2D Kronecker system) in [`problem`];
//! * grid transfers, Galerkin hierarchies, frequency masks and spectral
//!   filters in [`transfer`], [`hierarchy`], [`mask`];
//! * classical baselines (weighted Jacobi, V-cycle multigrid, CG) and the
//!   closed-form smoothing-factor analyzer in [`classic`];
//! * a from-scratch Fourier neural operator with explicit backward passes,
//!   Adam, and checkpoint I/O in [`fno`], [`adam`], [`checkpoint`];
//! * the neural multigrid cycles and outer solver in [`neural`];
//! * level-wise smoother training with frequency-filtered losses in [`train`].
//!
//! Batch-level inner loops run on rayon when the default `parallel` feature
//! is enabled; disabling it falls back to sequential iteration with
//! identical results (reductions are performed in index order either way).

pub mod adam;
pub mod checkpoint;
pub mod classic;
pub mod error;
pub mod fft;
pub mod field;
pub mod fno;
pub mod hierarchy;
pub mod kron;
pub mod linalg;
pub mod mask;
pub mod neural;
pub mod par;
pub mod problem;
pub mod toeplitz;
pub mod train;
pub mod transfer;

pub use error::{Error, Result};
pub use field::{Field, Shape};
