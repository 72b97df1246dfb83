//! Classical baselines: weighted Jacobi, the V-cycle, and conjugate
//! gradient, plus the closed-form per-mode Jacobi reduction factor for the
//! shifted periodic model problem.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::field::Field;
use crate::hierarchy::LevelHierarchy;
use crate::problem::LinearSystemOp;
use crate::{Error, Result};

/// Outcome of an iterative solve. `residual_history[i]` is the relative
/// residual after iteration i+1; `converged` iff the last entry met tol.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub wall_time: f64,
    pub method: String,
}

/// `nu` sweeps of x <- x + omega D^-1 (y - A x). `nu = 0` is the identity.
pub fn weighted_jacobi(
    op: &dyn LinearSystemOp,
    diag: &[f64],
    x: &Field,
    y: &Field,
    nu: usize,
    omega: f64,
) -> Result<Field> {
    if diag.len() != x.len() || x.shape() != y.shape() {
        return Err(Error::ShapeMismatch(format!(
            "jacobi: diag {} / x {:?} / y {:?}",
            diag.len(),
            x.shape(),
            y.shape()
        )));
    }
    if diag.iter().any(|&d| d == 0.0) {
        return Err(Error::InvalidArgument("zero diagonal entry".into()));
    }
    let mut x = x.clone();
    for _ in 0..nu {
        let ax = op.apply(&x)?;
        for i in 0..x.len() {
            let r = y.data()[i] - ax.data()[i];
            x.data_mut()[i] += omega * r / diag[i];
        }
    }
    Ok(x)
}

/// Per-sweep damping 1 - mu_phi of the Fourier mode at frequency `phi` for
/// weighted Jacobi on the shifted periodic model problem (diagonal 2+alpha,
/// off-diagonal -1). Near 0 at phi=0, near 1 at phi = +-pi.
pub fn jacobi_reduction_factor(phi: f64, alpha: f64, omega: f64) -> f64 {
    (omega / (2.0 + alpha)) * (2.0 + alpha - 2.0 * phi.cos())
}

/// One V-cycle on level `l` (0-based): `nu1` pre-smoothing sweeps, coarse
/// correction by recursion (exact solve on the last level), `nu2`
/// post-smoothing sweeps. `nu2 = 0` gives the backslash cycle used for all
/// the timed experiments.
pub fn mg_cycle(
    hier: &LevelHierarchy,
    x: &Field,
    y: &Field,
    nu1: usize,
    nu2: usize,
    l: usize,
    omega: f64,
) -> Result<Field> {
    let level = hier.level(l)?;
    if l + 1 == hier.num_levels() {
        let sol = level.lu()?.solve(y.data())?;
        return Field::new(sol, y.shape());
    }
    let op = level.op.as_ref();
    let mut x = weighted_jacobi(op, &level.diag, x, y, nu1, omega)?;

    let transfer = level.transfer.as_ref().expect("non-coarsest has transfer");
    let ax = op.apply(&x)?;
    let residual = y.sub(&ax);
    let coarse_rhs = transfer.restrict(&residual)?;
    let coarse_zero = Field::zeros(coarse_rhs.shape());
    let coarse_err = mg_cycle(hier, &coarse_zero, &coarse_rhs, nu1, nu2, l + 1, omega)?;
    let correction = transfer.interpolate(&coarse_err)?;
    x.axpy(1.0, &correction);

    weighted_jacobi(op, &level.diag, &x, y, nu2, omega)
}

fn relative_residual(op: &dyn LinearSystemOp, x: &Field, y: &Field, ynorm: f64) -> Result<f64> {
    let ax = op.apply(x)?;
    Ok(y.sub(&ax).norm2() / ynorm)
}

/// Iterate V-cycles from a zero guess until the relative residual reaches
/// `tol` or `max_cycles` is hit. A non-finite residual aborts with the
/// offending cycle index.
pub fn mg_solve(
    hier: &LevelHierarchy,
    y: &Field,
    nu1: usize,
    nu2: usize,
    tol: f64,
    max_cycles: usize,
    omega: f64,
) -> Result<SolveReport> {
    if max_cycles == 0 {
        return Err(Error::InvalidArgument("max_cycles must be >= 1".into()));
    }
    let start = Instant::now();
    let op = hier.finest().op.as_ref();
    let ynorm = y.norm2();
    if ynorm == 0.0 {
        return Ok(SolveReport {
            iterations: 0,
            residual_history: vec![0.0],
            converged: true,
            wall_time: start.elapsed().as_secs_f64(),
            method: "mg".into(),
        });
    }
    let mut x = Field::zeros(y.shape());
    let mut history = Vec::new();
    let mut converged = false;
    for cycle in 1..=max_cycles {
        x = mg_cycle(hier, &x, y, nu1, nu2, 0, omega)?;
        let r = relative_residual(op, &x, y, ynorm)?;
        if !r.is_finite() {
            return Err(Error::Diverged { iteration: cycle });
        }
        history.push(r);
        if r <= tol {
            converged = true;
            break;
        }
    }
    Ok(SolveReport {
        iterations: history.len(),
        residual_history: history,
        converged,
        wall_time: start.elapsed().as_secs_f64(),
        method: "mg".into(),
    })
}

/// Standard conjugate gradient from a zero guess. Requires an operator
/// flagged SPD; a nonpositive curvature p'Ap signals non-SPD numerics and
/// aborts.
pub fn cg_solve(
    op: &dyn LinearSystemOp,
    y: &Field,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    if !op.spd() {
        return Err(Error::NotSpd);
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be >= 1".into()));
    }
    let start = Instant::now();
    let ynorm = y.norm2();
    if ynorm == 0.0 {
        return Ok(SolveReport {
            iterations: 0,
            residual_history: vec![0.0],
            converged: true,
            wall_time: start.elapsed().as_secs_f64(),
            method: "cg".into(),
        });
    }
    let mut x = Field::zeros(y.shape());
    let mut r = y.clone();
    let mut p = r.clone();
    let mut rs = r.dot(&r);
    let mut history = Vec::new();
    let mut converged = false;
    for iter in 1..=max_iter {
        let ap = op.apply(&p)?;
        let pap = p.dot(&ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::CgBreakdown { value: pap });
        }
        let alpha = rs / pap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        let rs_new = r.dot(&r);
        if !rs_new.is_finite() {
            return Err(Error::Diverged { iteration: iter });
        }
        let rel = rs_new.sqrt() / ynorm;
        history.push(rel);
        if rel <= tol {
            converged = true;
            break;
        }
        let beta = rs_new / rs;
        p = {
            let mut np = r.clone();
            np.axpy(beta, &p);
            np
        };
        rs = rs_new;
    }
    Ok(SolveReport {
        iterations: history.len(),
        residual_history: history,
        converged,
        wall_time: start.elapsed().as_secs_f64(),
        method: "cg".into(),
    })
}
