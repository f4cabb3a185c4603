//! Bayes-optimal scores and the fairness/accuracy trade-off linear programs.
//!
//! Every group constraint is an affine function of the score vector,
//! `expr(s) = coeffs · s + offset`, bounded as `|expr(s)| ≤ ε`. The LP is
//! posed over the deviation `m = s* - s` from the unconstrained scores.

mod budget;
mod neighbor;
mod simplex;
mod tradeoff;

pub use budget::{ConstraintKind, FairnessBudget};
pub use neighbor::{build_neighbor_matrix, NeighborMatrix, NeighborPair};
pub use simplex::{solve_lp, LpProblem, LpSolution, LpStatus};
pub use tradeoff::{
    assemble_tradeoff_lp, bayes_scores_aware, bayes_scores_unaware, constraint_rows,
    fair_solution, pareto_sweep, residuals, ConstraintRow, FairLpResult, Residual, SweepPoint,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantizer::QuantizerError;

#[derive(Debug, Error)]
pub enum FairLpError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex hit the iteration limit ({0})")]
    IterationLimit(usize),
    #[error("numerically degenerate problem: final violation {0:e}")]
    Degenerate(f64),
    #[error(transparent)]
    Views(#[from] QuantizerError),
}

pub type Result<T> = std::result::Result<T, FairLpError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Awareness {
    Unaware,
    Aware,
}

impl Awareness {
    pub fn label(self) -> &'static str {
        match self {
            Awareness::Unaware => "unaware",
            Awareness::Aware => "aware",
        }
    }

    /// Length of the score vector for `cells` cells.
    pub fn score_len(self, cells: usize) -> usize {
        match self {
            Awareness::Unaware => cells,
            Awareness::Aware => 2 * cells,
        }
    }
}

/// Per-cell probability of predicting `Y = 1`. In the aware case the vector
/// is `[s_a; s_b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub awareness: Awareness,
    pub values: Vec<f64>,
}

impl ScoreVector {
    pub fn new(awareness: Awareness, values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(FairLpError::InvalidParameter(format!("score {v} outside [0, 1]")));
        }
        if awareness == Awareness::Aware && !values.len().is_multiple_of(2) {
            return Err(FairLpError::Dimension("aware scores need even length".into()));
        }
        Ok(ScoreVector { awareness, values })
    }

    pub fn cells(&self) -> usize {
        match self.awareness {
            Awareness::Unaware => self.values.len(),
            Awareness::Aware => self.values.len() / 2,
        }
    }

    /// Scores for one group; the unaware vector is shared by both.
    pub fn group(&self, g: crate::dataset::Group) -> &[f64] {
        let n = self.cells();
        match self.awareness {
            Awareness::Unaware => &self.values,
            Awareness::Aware => &self.values[g.index() * n..(g.index() + 1) * n],
        }
    }
}
