//! Column-stochastic transfer matrices that remove the dependence of the
//! cell distribution on the group while keeping the fair classifier's
//! accuracy and constraint levels.
//!
//! The unaware problem learns one `N × N` matrix `T` by the method of
//! multipliers. The aware problem learns `T_a, T_b` (each `2N × N`, one per
//! group) by alternating minimization. Constraint rows are ordered
//! `[DP, EOp, PE, EA, IF_1..IF_B]`; the violation vector stacks the negative
//! side then the positive side, giving length `2B + 8`.

mod engine;
mod project;
mod transform;

pub use project::project_simplex;
pub use transform::TransformMatrix;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Group;
use crate::fairlp::{Awareness, FairnessBudget, NeighborMatrix, ScoreVector};
use crate::quantizer::{ProbabilityViews, QuantizerError};
use engine::{Block, Problem, SparseRow};

#[derive(Debug, Error)]
pub enum DecorrelateError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not column-stochastic: {0}")]
    NotStochastic(String),
    #[error(transparent)]
    Views(#[from] QuantizerError),
}

pub type Result<T> = std::result::Result<T, DecorrelateError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecorrelationConfig {
    /// Weight on accuracy.
    pub lambda: f64,
    /// Weight on correlation.
    pub beta: f64,
    /// Augmented-Lagrangian penalty.
    pub tau: f64,
    pub lr_initial: f64,
    /// Learning rate on the last inner step; decay is geometric.
    pub lr_final: f64,
    pub momentum: f64,
    /// Stop when the squared change of the iterate and multipliers falls below this.
    pub tolerance: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Constraint budgets carried over to the target domain.
    pub budget: FairnessBudget,
}

impl Default for DecorrelationConfig {
    fn default() -> Self {
        DecorrelationConfig {
            lambda: 15.0,
            beta: 25.0,
            tau: 10.0,
            lr_initial: 1e-2,
            lr_final: 1e-12,
            momentum: 0.9,
            tolerance: 1e-4,
            max_outer: 200,
            max_inner: 2000,
            budget: FairnessBudget::inactive(),
        }
    }
}

impl DecorrelationConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("beta", self.beta),
            ("tau", self.tau),
            ("lr_final", self.lr_final),
            ("tolerance", self.tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(DecorrelateError::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.lr_initial > self.lr_final) || !self.lr_initial.is_finite() {
            return Err(DecorrelateError::InvalidParameter(
                "lr_initial must exceed lr_final".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(DecorrelateError::InvalidParameter("momentum must lie in [0, 1)".into()));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(DecorrelateError::InvalidParameter("iteration caps must be positive".into()));
        }
        self.budget
            .validate()
            .map_err(|e| DecorrelateError::InvalidParameter(e.to_string()))
    }
}

/// Either one unaware matrix or the per-group pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "awareness", rename_all = "lowercase")]
pub enum Transfer {
    Unaware { t: TransformMatrix },
    Aware { t_a: TransformMatrix, t_b: TransformMatrix },
}

impl Transfer {
    /// The starting point of both solvers.
    pub fn identity(awareness: Awareness, cells: usize) -> Self {
        match awareness {
            Awareness::Unaware => Transfer::Unaware {
                t: TransformMatrix::identity(cells),
            },
            Awareness::Aware => Transfer::Aware {
                t_a: TransformMatrix::stacked_identity(2 * cells, cells, 0),
                t_b: TransformMatrix::stacked_identity(2 * cells, cells, cells),
            },
        }
    }

    pub fn awareness(&self) -> Awareness {
        match self {
            Transfer::Unaware { .. } => Awareness::Unaware,
            Transfer::Aware { .. } => Awareness::Aware,
        }
    }

    pub fn matrices(&self) -> Vec<&TransformMatrix> {
        match self {
            Transfer::Unaware { t } => vec![t],
            Transfer::Aware { t_a, t_b } => vec![t_a, t_b],
        }
    }

    fn raw(&self) -> Vec<&[f64]> {
        self.matrices().into_iter().map(TransformMatrix::data).collect()
    }

    /// `θ X + (1 - θ) Y`, matrix by matrix.
    pub fn mix(x: &Self, y: &Self, theta: f64) -> Result<Self> {
        match (x, y) {
            (Transfer::Unaware { t: a }, Transfer::Unaware { t: b }) => Ok(Transfer::Unaware {
                t: TransformMatrix::mix(a, b, theta)?,
            }),
            (Transfer::Aware { t_a: a1, t_b: b1 }, Transfer::Aware { t_a: a2, t_b: b2 }) => {
                Ok(Transfer::Aware {
                    t_a: TransformMatrix::mix(a1, a2, theta)?,
                    t_b: TransformMatrix::mix(b1, b2, theta)?,
                })
            }
            _ => Err(DecorrelateError::Dimension("mixing transfers of different kinds".into())),
        }
    }
}

/// Multipliers of the augmented Lagrangian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierState {
    pub rho: Vec<f64>,
    pub outer_iterations: usize,
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub baseline_correlation: f64,
    pub final_correlation: f64,
    pub correlation_reduction: f64,
    pub acc_before: f64,
    pub acc_after: f64,
    pub acc_reduction: f64,
    pub max_violation: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecorrelationOutcome {
    pub transfer: Transfer,
    pub multipliers: MultiplierState,
    pub report: TransferReport,
    pub warnings: Vec<String>,
}

/// Budget vector `[DP, EOp, PE, EA, IF × rows]`; inactive entries are `+∞`.
pub fn budget_vector(budget: &FairnessBudget, if_rows: usize) -> Vec<f64> {
    let inf = f64::INFINITY;
    let mut f = vec![
        budget.dp.unwrap_or(inf),
        budget.eop.unwrap_or(inf),
        budget.pe.unwrap_or(inf),
        budget.ea.unwrap_or(inf),
    ];
    f.extend(std::iter::repeat_n(budget.ind.unwrap_or(inf), if_rows));
    f
}

fn dense(v: &[f64], sign: f64) -> SparseRow {
    v.iter().enumerate().map(|(i, x)| (i, sign * x)).collect()
}

/// Per-group vectors behind one group row; `None` when a conditioning event
/// has no mass.
struct GroupVectors {
    dp: [Vec<f64>; 2],
    eop: Option<[Vec<f64>; 2]>,
    pe: Option<[Vec<f64>; 2]>,
    ea: [[Vec<f64>; 2]; 2],
}

fn group_vectors(views: &ProbabilityViews) -> Result<(GroupVectors, Vec<String>)> {
    let mut warnings = Vec::new();
    let both = |y: u8, name: &str, warnings: &mut Vec<String>| {
        match (
            views.given_group_label(Group::A, y),
            views.given_group_label(Group::B, y),
        ) {
            (Ok(a), Ok(b)) => Some([a.to_vec(), b.to_vec()]),
            (Err(e), _) | (_, Err(e)) => {
                warnings.push(format!("{name} row dropped: {e}"));
                None
            }
        }
    };
    let eop = both(1, "EOp", &mut warnings);
    let pe = both(0, "PE", &mut warnings);
    let dp = [
        views.given_group(Group::A)?.to_vec(),
        views.given_group(Group::B)?.to_vec(),
    ];
    let ea_group = |g: Group| -> Result<[Vec<f64>; 2]> {
        Ok([
            views.label_joint_given_group(g, 0)?.to_vec(),
            views.label_joint_given_group(g, 1)?.to_vec(),
        ])
    };
    let ea = [ea_group(Group::A)?, ea_group(Group::B)?];
    Ok((GroupVectors { dp, eop, pe, ea }, warnings))
}

fn finish_budget(
    budget: &FairnessBudget,
    w: &NeighborMatrix,
    gv: &GroupVectors,
) -> Vec<f64> {
    let mut f = budget_vector(budget, w.rows());
    if gv.eop.is_none() {
        f[1] = f64::INFINITY;
    }
    if gv.pe.is_none() {
        f[2] = f64::INFINITY;
    }
    f
}

fn check_scores(s: &ScoreVector, awareness: Awareness, cells: usize) -> Result<()> {
    if s.awareness != awareness || s.values.len() != awareness.score_len(cells) {
        return Err(DecorrelateError::Dimension(format!(
            "{} score vector of length {} does not fit {} cells",
            s.awareness.label(),
            s.values.len(),
            cells
        )));
    }
    Ok(())
}

fn check_neighbors(w: &NeighborMatrix, cells: usize) -> Result<()> {
    if w.cells != cells {
        return Err(DecorrelateError::Dimension(format!(
            "neighbor matrix has {} cells, joint has {cells}",
            w.cells
        )));
    }
    Ok(())
}

fn zero_rows(n: usize) -> Vec<SparseRow> {
    vec![Vec::new(); n]
}

fn unaware_problem(
    s: &ScoreVector,
    views: &ProbabilityViews,
    w: &NeighborMatrix,
    budget: &FairnessBudget,
) -> Result<(Problem, Vec<String>)> {
    let n = views.cells;
    check_scores(s, Awareness::Unaware, n)?;
    check_neighbors(w, n)?;
    let (gv, warnings) = group_vectors(views)?;
    let diff = |p: &[Vec<f64>; 2]| -> Vec<f64> { p[0].iter().zip(&p[1]).map(|(a, b)| a - b).collect() };
    let d = diff(&gv.dp);
    let rows = 4 + w.rows();
    let mut a = zero_rows(rows);
    let mut b = zero_rows(rows);
    a[0] = dense(&d, 1.0);
    if let Some(p) = &gv.eop {
        a[1] = dense(&diff(p), 1.0);
    }
    if let Some(p) = &gv.pe {
        a[2] = dense(&diff(p), 1.0);
    }
    a[3] = dense(&diff(&[gv.ea[0][1].clone(), gv.ea[1][1].clone()]), 1.0);
    b[3] = dense(&diff(&[gv.ea[0][0].clone(), gv.ea[1][0].clone()]), 1.0);
    for (k, pair) in w.pairs.iter().enumerate() {
        a[4 + k] = vec![(pair.i, pair.weight), (pair.j, -pair.weight)];
    }
    let block = Block {
        p1: views.label_joint(1).to_vec(),
        p0: views.label_joint(0).to_vec(),
        corr: d,
        a,
        b,
    };
    Ok((
        Problem {
            s: s.values.clone(),
            cols: n,
            blocks: vec![block],
            f: finish_budget(budget, w, &gv),
        },
        warnings,
    ))
}

fn aware_problem(
    s: &ScoreVector,
    views: &ProbabilityViews,
    w: &NeighborMatrix,
    budget: &FairnessBudget,
) -> Result<(Problem, Vec<String>)> {
    let n = views.cells;
    check_scores(s, Awareness::Aware, n)?;
    check_neighbors(w, n)?;
    let (gv, warnings) = group_vectors(views)?;
    let rows = 4 + w.rows();
    let blocks = [Group::A, Group::B]
        .map(|g| {
            let gi = g.index();
            let sign = if gi == 0 { 1.0 } else { -1.0 };
            let mut a = zero_rows(rows);
            let mut b = zero_rows(rows);
            a[0] = dense(&gv.dp[gi], sign);
            if let Some(p) = &gv.eop {
                a[1] = dense(&p[gi], sign);
            }
            if let Some(p) = &gv.pe {
                a[2] = dense(&p[gi], sign);
            }
            a[3] = dense(&gv.ea[gi][1], sign);
            b[3] = dense(&gv.ea[gi][0], sign);
            let pg = &gv.dp[gi];
            for (k, pair) in w.pairs.iter().enumerate() {
                a[4 + k] = vec![
                    (pair.i, pair.weight * pg[pair.i]),
                    (pair.j, -pair.weight * pg[pair.j]),
                ];
            }
            Block {
                p1: views.joint(g, 1).to_vec(),
                p0: views.joint(g, 0).to_vec(),
                corr: dense(pg, sign).into_iter().map(|(_, v)| v).collect(),
                a,
                b,
            }
        })
        .to_vec();
    Ok((
        Problem {
            s: s.values.clone(),
            cols: n,
            blocks,
            f: finish_budget(budget, w, &gv),
        },
        warnings,
    ))
}

fn problem_for(
    t: &Transfer,
    s: &ScoreVector,
    views: &ProbabilityViews,
    w: &NeighborMatrix,
    budget: &FairnessBudget,
) -> Result<Problem> {
    let (p, _) = match t.awareness() {
        Awareness::Unaware => unaware_problem(s, views, w, budget)?,
        Awareness::Aware => aware_problem(s, views, w, budget)?,
    };
    for m in t.matrices() {
        if m.rows() != p.target_rows() || m.cols() != p.cols {
            return Err(DecorrelateError::Dimension(format!(
                "matrix is {}x{}, expected {}x{}",
                m.rows(),
                m.cols(),
                p.target_rows(),
                p.cols
            )));
        }
    }
    Ok(p)
}

/// Expected accuracy of `s` on the transformed distribution.
pub fn accuracy_term(t: &Transfer, s: &ScoreVector, views: &ProbabilityViews) -> Result<f64> {
    let p = problem_for(t, s, views, &NeighborMatrix::empty(views.cells), &FairnessBudget::inactive())?;
    Ok(p.evaluate(&t.raw()).accuracy)
}

/// `‖T(p_a - p_b)‖₁` or `‖T_a p_a - T_b p_b‖₁`, in `[0, 2]`.
pub fn correlation_term(t: &Transfer, views: &ProbabilityViews) -> Result<f64> {
    let rows = t.matrices()[0].rows();
    let s = ScoreVector {
        awareness: t.awareness(),
        values: vec![0.0; rows],
    };
    let p = problem_for(t, &s, views, &NeighborMatrix::empty(views.cells), &FairnessBudget::inactive())?;
    Ok(p.evaluate(&t.raw()).correlation)
}

/// Signed constraint values `[DP, EOp, PE, EA, IF...]` on the target domain.
/// Rows whose conditioning event has no mass evaluate to 0.
pub fn constraint_values(
    t: &Transfer,
    s: &ScoreVector,
    views: &ProbabilityViews,
    w: &NeighborMatrix,
) -> Result<Vec<f64>> {
    let p = problem_for(t, s, views, w, &FairnessBudget::inactive())?;
    Ok(p.evaluate(&t.raw()).values)
}

/// `max([-v; v] - [f; f], 0)`, length `2B + 8`.
pub fn fairness_violation(
    t: &Transfer,
    s: &ScoreVector,
    views: &ProbabilityViews,
    w: &NeighborMatrix,
    f: &[f64],
) -> Result<Vec<f64>> {
    if f.len() != 4 + w.rows() {
        return Err(DecorrelateError::Dimension(format!(
            "budget vector has length {}, expected {}",
            f.len(),
            4 + w.rows()
        )));
    }
    let values = constraint_values(t, s, views, w)?;
    let mut p = problem_for(t, s, views, w, &FairnessBudget::inactive())?;
    p.f = f.to_vec();
    Ok(p.violation(&values))
}

/// `-λ acc + β corr + ⟨ρ, g⟩ + (τ/2)‖g‖²` with budgets from `config.budget`.
pub fn lagrangian(
    t: &Transfer,
    rho: &[f64],
    config: &DecorrelationConfig,
    s: &ScoreVector,
    views: &ProbabilityViews,
    w: &NeighborMatrix,
) -> Result<f64> {
    let p = problem_for(t, s, views, w, &config.budget)?;
    if rho.len() != 2 * p.constraint_count() {
        return Err(DecorrelateError::Dimension(format!(
            "multiplier vector has length {}, expected {}",
            rho.len(),
            2 * p.constraint_count()
        )));
    }
    let e = p.evaluate(&t.raw());
    Ok(p.lagrangian(&e, rho, config))
}

/// Compares `t` against the identity transfer.
pub fn evaluate_transfer(
    t: &Transfer,
    s: &ScoreVector,
    views: &ProbabilityViews,
    w: &NeighborMatrix,
    f: &[f64],
) -> Result<TransferReport> {
    let identity = Transfer::identity(t.awareness(), views.cells);
    let baseline = correlation_term(&identity, views)?;
    let final_correlation = correlation_term(t, views)?;
    let acc_before = accuracy_term(&identity, s, views)?;
    let acc_after = accuracy_term(t, s, views)?;
    let g = fairness_violation(t, s, views, w, f)?;
    Ok(TransferReport {
        baseline_correlation: baseline,
        final_correlation,
        correlation_reduction: baseline - final_correlation,
        acc_before,
        acc_after,
        acc_reduction: acc_before - acc_after,
        max_violation: g.iter().fold(0.0, |a, b| a.max(*b)),
        converged: false,
    })
}

fn run(
    problem: Problem,
    warnings: Vec<String>,
    awareness: Awareness,
    s: &ScoreVector,
    views: &ProbabilityViews,
    w: &NeighborMatrix,
    config: &DecorrelationConfig,
) -> Result<DecorrelationOutcome> {
    let n = views.cells;
    let start = Transfer::identity(awareness, n);
    let init: Vec<Vec<f64>> = start.raw().into_iter().map(<[f64]>::to_vec).collect();
    let solved = engine::solve(&problem, init, config);
    let rows = problem.target_rows();
    let mut mats = solved
        .ts
        .into_iter()
        .map(|d| TransformMatrix::from_raw(rows, n, d));
    let transfer = match awareness {
        Awareness::Unaware => Transfer::Unaware {
            t: mats.next().expect("one block"),
        },
        Awareness::Aware => Transfer::Aware {
            t_a: mats.next().expect("two blocks"),
            t_b: mats.next().expect("two blocks"),
        },
    };
    for m in transfer.matrices() {
        m.check_stochastic(1e-9)?;
    }
    let mut report = evaluate_transfer(&transfer, s, views, w, &problem.f)?;
    report.converged = solved.converged;
    Ok(DecorrelationOutcome {
        transfer,
        multipliers: MultiplierState {
            rho: solved.rho,
            outer_iterations: solved.outer_iterations,
            residual_history: solved.residual_history,
        },
        report,
        warnings,
    })
}

/// Learns one `N × N` transfer for the group-blind classifier `s_fair`.
pub fn solve_decorrelation_unaware(
    s_fair: &ScoreVector,
    views: &ProbabilityViews,
    w: &NeighborMatrix,
    config: &DecorrelationConfig,
) -> Result<DecorrelationOutcome> {
    config.validate()?;
    let (problem, warnings) = unaware_problem(s_fair, views, w, &config.budget)?;
    run(problem, warnings, Awareness::Unaware, s_fair, views, w, config)
}

/// Learns `T_a, T_b` (each `2N × N`) for the group-aware classifier
/// `s_fair = [s_a; s_b]`, alternating between the two matrices.
pub fn solve_decorrelation_aware(
    s_fair: &ScoreVector,
    views: &ProbabilityViews,
    w: &NeighborMatrix,
    config: &DecorrelationConfig,
) -> Result<DecorrelationOutcome> {
    config.validate()?;
    let (problem, warnings) = aware_problem(s_fair, views, w, &config.budget)?;
    run(problem, warnings, Awareness::Aware, s_fair, views, w, config)
}
