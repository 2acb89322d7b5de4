//! Conic programs over moment vectors: assembly, solving and file export.

mod assemble;
mod ipm;
mod sdpa;

pub use assemble::{assemble_auxiliary, assemble_relaxation, reduce_equalities};
pub use ipm::{solve, Residuals, SolveResult, SolveStatus, SolverOptions};
pub use sdpa::{export_sdpa, parse_sdpa, parse_solution, ExternalSolver, SdpaError};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conegen::ConeGenError;
use crate::moment::{LinearFunctional, LinearMatrixMap, MomentError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SdpError {
    #[error("relaxation order {k} is below the minimal order {d0}")]
    OrderTooLow { k: u32, d0: u32 },
    #[error("direction has length {got}, expected {expected}")]
    DirectionLength { expected: usize, got: usize },
    #[error("equality constraints are inconsistent (residual {residual:.3e})")]
    InconsistentEqualities { residual: f64 },
    #[error("functional references index {index} but nz = {nz}")]
    IndexOutOfRange { index: usize, nz: usize },
    #[error("eq_rows and eq_rhs lengths differ")]
    RhsLength,
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error(transparent)]
    ConeGen(#[from] ConeGenError),
}

/// One PSD constraint `map(z) >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdBlock {
    pub name: String,
    pub map: LinearMatrixMap,
}

/// `min <c, z>` s.t. `eq_rows(z) = eq_rhs` and every block map PSD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicProblem {
    pub nz: usize,
    pub objective: LinearFunctional,
    pub eq_rows: Vec<LinearFunctional>,
    pub eq_rhs: Vec<f64>,
    pub psd_blocks: Vec<PsdBlock>,
}

impl ConicProblem {
    pub fn block_sizes(&self) -> Vec<usize> {
        self.psd_blocks.iter().map(|b| b.map.dim()).collect()
    }

    pub fn block(&self, name: &str) -> Option<&PsdBlock> {
        self.psd_blocks.iter().find(|b| b.name == name)
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        if self.eq_rows.len() != self.eq_rhs.len() {
            return Err(SdpError::RhsLength);
        }
        let check = |m: Option<usize>| match m {
            Some(index) if index >= self.nz => Err(SdpError::IndexOutOfRange { index, nz: self.nz }),
            _ => Ok(()),
        };
        check(self.objective.max_index())?;
        for r in &self.eq_rows {
            check(r.max_index())?;
        }
        for b in &self.psd_blocks {
            check(b.map.max_index())?;
        }
        Ok(())
    }

    pub fn objective_at(&self, z: &[f64]) -> f64 {
        self.objective.apply(z)
    }

    /// Largest equality violation `|row(z) - rhs|`.
    pub fn equality_violation(&self, z: &[f64]) -> f64 {
        self.eq_rows
            .iter()
            .zip(&self.eq_rhs)
            .map(|(r, b)| (r.apply(z) - b).abs())
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue over all PSD blocks evaluated at `z` (symmetrized).
    pub fn min_block_eigenvalue(&self, z: &[f64]) -> f64 {
        self.psd_blocks
            .iter()
            .map(|b| {
                let m = b.map.evaluate(z);
                let sym: DMatrix<f64> = (&m + m.transpose()) * 0.5;
                sym.symmetric_eigenvalues().min()
            })
            .fold(f64::INFINITY, f64::min)
    }
}
