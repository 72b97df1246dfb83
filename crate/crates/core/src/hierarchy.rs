//! Galerkin grid hierarchies: coarse operators are `R A P` applied
//! matrix-free, the coarsest level is densified by basis probing and
//! LU-factorized once.

use std::sync::{Arc, OnceLock};

use crate::field::{Field, Shape};
use crate::linalg::{LuFactor, DENSE_CAP};
use crate::problem::{BoundaryKind, LinearSystemOp};
use crate::transfer::TransferPair;
use crate::{Error, Result};

/// Coarse operator by Galerkin composition: `apply(v) = R(A_fine(P v))`.
pub struct GalerkinOp {
    fine: Arc<dyn LinearSystemOp>,
    transfer: TransferPair,
}

impl GalerkinOp {
    pub fn new(fine: Arc<dyn LinearSystemOp>, transfer: TransferPair) -> GalerkinOp {
        GalerkinOp { fine, transfer }
    }
}

impl LinearSystemOp for GalerkinOp {
    fn apply(&self, x: &Field) -> Result<Field> {
        let up = self.transfer.interpolate(x)?;
        let ax = self.fine.apply(&up)?;
        self.transfer.restrict(&ax)
    }

    fn shape(&self) -> Shape {
        self.transfer.coarse_shape()
    }

    fn symmetric(&self) -> bool {
        // R = c P' keeps Galerkin products symmetric.
        self.fine.symmetric()
    }

    fn spd(&self) -> bool {
        self.fine.spd()
    }

    fn boundary_kind(&self) -> BoundaryKind {
        self.fine.boundary_kind()
    }

    fn constant_diag(&self) -> bool {
        // Periodic transfers preserve the (block-)circulant structure.
        self.fine.constant_diag() && self.fine.boundary_kind() == BoundaryKind::Periodic
    }
}

pub struct Level {
    pub op: Arc<dyn LinearSystemOp>,
    /// diag(A^(l)), used by relaxation smoothers.
    pub diag: Vec<f64>,
    /// Transfer to the next coarser level; `None` on the coarsest.
    pub transfer: Option<TransferPair>,
    lu: OnceLock<LuFactor>,
}

impl Level {
    pub fn shape(&self) -> Shape {
        self.op.shape()
    }

    /// Dense factorization of this level's operator, built on first use.
    /// Supports solving the "coarsest" system at a truncated depth.
    pub fn lu(&self) -> Result<&LuFactor> {
        if let Some(f) = self.lu.get() {
            return Ok(f);
        }
        let dense = self.op.densify()?;
        let factor = LuFactor::new(&dense)?;
        let _ = self.lu.set(factor);
        Ok(self.lu.get().expect("just set"))
    }
}

/// The multigrid level stack. Index 0 is the finest grid, index `L-1`
/// the coarsest.
pub struct LevelHierarchy {
    levels: Vec<Level>,
}

impl LevelHierarchy {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> Result<&Level> {
        self.levels.get(l).ok_or(Error::LevelOutOfRange {
            level: l,
            total: self.levels.len(),
        })
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn finest(&self) -> &Level {
        &self.levels[0]
    }
}

/// Build an `L`-level Galerkin hierarchy over `op`.
pub fn build_hierarchy(op: Arc<dyn LinearSystemOp>, num_levels: usize) -> Result<LevelHierarchy> {
    if num_levels == 0 {
        return Err(Error::InvalidArgument("need at least one level".into()));
    }
    // Each coarsening needs both axes divisible by 2 (periodic) or an odd
    // interior count (dirichlet); TransferPair::new enforces per-step rules.
    let mut levels: Vec<Level> = Vec::with_capacity(num_levels);
    let mut current: Arc<dyn LinearSystemOp> = op;
    for l in 0..num_levels {
        let transfer = if l + 1 < num_levels {
            Some(TransferPair::new(
                current.boundary_kind(),
                current.shape(),
            )?)
        } else {
            if current.n_total() > DENSE_CAP {
                return Err(Error::DenseCapExceeded {
                    size: current.n_total(),
                    cap: DENSE_CAP,
                });
            }
            None
        };
        let diag = current.diag()?;
        if diag.iter().any(|&d| d == 0.0) {
            return Err(Error::InvalidArgument(format!(
                "zero diagonal entry at level {l}"
            )));
        }
        let next: Option<Arc<dyn LinearSystemOp>> = transfer.clone().map(|t| {
            Arc::new(GalerkinOp::new(current.clone(), t)) as Arc<dyn LinearSystemOp>
        });
        levels.push(Level {
            op: current.clone(),
            diag,
            transfer,
            lu: OnceLock::new(),
        });
        if let Some(n) = next {
            current = n;
        }
    }
    // Factor the coarsest now; every cycle needs it.
    levels.last().expect("nonempty").lu()?;
    Ok(LevelHierarchy { levels })
}
