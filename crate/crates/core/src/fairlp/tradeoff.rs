use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    solve_lp, Awareness, ConstraintKind, FairLpError, FairnessBudget, LpProblem, LpStatus,
    NeighborMatrix, Result, ScoreVector,
};
use crate::dataset::Group;
use crate::quantizer::{ProbabilityViews, QuantizerError};

/// `|coeffs · s + offset| ≤ budget`, with `s` in score space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRow {
    pub kind: ConstraintKind,
    pub coeffs: Vec<f64>,
    pub offset: f64,
    pub budget: f64,
}

impl ConstraintRow {
    pub fn value(&self, s: &[f64]) -> f64 {
        dot(&self.coeffs, s) + self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub label: String,
    /// Attained `|expr(s)|`.
    pub value: f64,
    pub budget: f64,
    /// `budget - value`; negative when violated.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairLpResult {
    pub budget: FairnessBudget,
    pub status: LpStatus,
    pub s_star: ScoreVector,
    pub s_fair: ScoreVector,
    pub m: Vec<f64>,
    pub objective: f64,
    pub acc_star: f64,
    pub acc_fair: f64,
    pub residuals: Vec<Residual>,
    pub warnings: Vec<String>,
}

impl FairLpResult {
    pub fn max_violation(&self) -> f64 {
        self.residuals.iter().fold(0.0, |a, r| a.max(-r.slack))
    }
}

/// One grid point of a trade-off sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub label: String,
    pub budget: FairnessBudget,
    /// `optimal`, `infeasible`, or `error`.
    pub status: String,
    pub acc_star: Option<f64>,
    pub acc_fair: Option<f64>,
    pub residuals: Vec<Residual>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn argmax_label(p1: f64, p0: f64) -> f64 {
    if p1 > p0 {
        1.0
    } else {
        0.0
    }
}

/// Pooled majority vote per cell; ties predict 0.
pub fn bayes_scores_unaware(views: &ProbabilityViews) -> (ScoreVector, f64) {
    let (p1, p0) = (views.label_joint(1), views.label_joint(0));
    let s: Vec<f64> = p1.iter().zip(p0).map(|(a, b)| argmax_label(*a, *b)).collect();
    let acc = s
        .iter()
        .zip(p1.iter().zip(p0))
        .map(|(si, (a, b))| if *si == 1.0 { a } else { b })
        .sum();
    (
        ScoreVector {
            awareness: Awareness::Unaware,
            values: s,
        },
        acc,
    )
}

/// Per-group majority vote per cell, concatenated `[s_a; s_b]`.
pub fn bayes_scores_aware(views: &ProbabilityViews) -> Result<(ScoreVector, f64)> {
    let mut values = Vec::with_capacity(2 * views.cells);
    let mut acc = 0.0;
    for g in Group::BOTH {
        if !views.has_group_mass(g) {
            views.given_group(g)?;
        }
        let (p1, p0) = (views.joint(g, 1), views.joint(g, 0));
        for (a, b) in p1.iter().zip(p0) {
            let s = argmax_label(*a, *b);
            acc += if s == 1.0 { a } else { b };
            values.push(s);
        }
    }
    Ok((
        ScoreVector {
            awareness: Awareness::Aware,
            values,
        },
        acc,
    ))
}

fn zero_mass_warning(kind: ConstraintKind, err: &QuantizerError) -> String {
    format!("{} omitted: {err}", kind.label())
}

/// Group-level coefficient pair `(coeffs, offset)` for one notion.
fn group_row(
    views: &ProbabilityViews,
    kind: ConstraintKind,
    awareness: Awareness,
) -> std::result::Result<(Vec<f64>, f64), QuantizerError> {
    let pick = |g: Group| -> std::result::Result<(Vec<f64>, f64), QuantizerError> {
        Ok(match kind {
            ConstraintKind::Dp => (views.given_group(g)?.to_vec(), 0.0),
            ConstraintKind::Eop => (views.given_group_label(g, 1)?.to_vec(), 0.0),
            ConstraintKind::Pe => (views.given_group_label(g, 0)?.to_vec(), 0.0),
            ConstraintKind::Ea => {
                let p1 = views.label_joint_given_group(g, 1)?;
                let p0 = views.label_joint_given_group(g, 0)?;
                (sub(p1, p0), p0.iter().sum())
            }
            ConstraintKind::Ind(_) => unreachable!("individual rows are built separately"),
        })
    };
    let (ca, oa) = pick(Group::A)?;
    let (cb, ob) = pick(Group::B)?;
    Ok(match awareness {
        Awareness::Unaware => (sub(&ca, &cb), oa - ob),
        Awareness::Aware => {
            let mut c = ca;
            c.extend(cb.iter().map(|v| -v));
            (c, oa - ob)
        }
    })
}

/// All active constraint rows plus warnings for omitted ones.
pub fn constraint_rows(
    views: &ProbabilityViews,
    budget: &FairnessBudget,
    awareness: Awareness,
    w: &NeighborMatrix,
) -> Result<(Vec<ConstraintRow>, Vec<String>)> {
    budget.validate()?;
    let n = views.cells;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for kind in ConstraintKind::GROUP {
        let Some(eps) = budget.get(kind) else { continue };
        match group_row(views, kind, awareness) {
            Ok((coeffs, offset)) => rows.push(ConstraintRow {
                kind,
                coeffs,
                offset,
                budget: eps,
            }),
            Err(e @ QuantizerError::ZeroMass(_)) => warnings.push(zero_mass_warning(kind, &e)),
            Err(e) => return Err(e.into()),
        }
    }
    if let Some(eps) = budget.ind {
        if w.cells != n {
            return Err(FairLpError::Dimension(format!(
                "neighbor matrix has {} cells, joint has {n}",
                w.cells
            )));
        }
        let weights = match awareness {
            Awareness::Unaware => None,
            Awareness::Aware => Some([
                views.given_group(Group::A)?.to_vec(),
                views.given_group(Group::B)?.to_vec(),
            ]),
        };
        for (k, pair) in w.pairs.iter().enumerate() {
            let mut coeffs = vec![0.0; awareness.score_len(n)];
            match &weights {
                None => {
                    coeffs[pair.i] = pair.weight;
                    coeffs[pair.j] = -pair.weight;
                }
                Some(p) => {
                    for g in 0..2 {
                        coeffs[g * n + pair.i] = pair.weight * p[g][pair.i];
                        coeffs[g * n + pair.j] = -pair.weight * p[g][pair.j];
                    }
                }
            }
            rows.push(ConstraintRow {
                kind: ConstraintKind::Ind(k),
                coeffs,
                offset: 0.0,
                budget: eps,
            });
        }
    }
    Ok((rows, warnings))
}

fn objective(views: &ProbabilityViews, awareness: Awareness) -> Vec<f64> {
    match awareness {
        Awareness::Unaware => sub(views.label_joint(1), views.label_joint(0)),
        Awareness::Aware => Group::BOTH
            .iter()
            .flat_map(|&g| sub(views.joint(g, 1), views.joint(g, 0)))
            .collect(),
    }
}

fn lp_from_rows(c: Vec<f64>, s_star: &ScoreVector, rows: &[ConstraintRow]) -> LpProblem {
    let (lower, upper): (Vec<f64>, Vec<f64>) = s_star
        .values
        .iter()
        .map(|&s| if s == 1.0 { (0.0, 1.0) } else { (-1.0, 0.0) })
        .unzip();
    let mut lp = LpProblem::new(c, lower, upper);
    // expr(s* - m) = a·s* + offset - a·m
    for row in rows {
        let base = row.value(&s_star.values);
        let label = row.kind.label();
        lp.push_row(row.coeffs.iter().map(|v| -v).collect(), row.budget - base, format!("{label}+"));
        lp.push_row(row.coeffs.clone(), row.budget + base, format!("{label}-"));
    }
    lp
}

/// Builds `min cᵀm` subject to the active fairness rows and the sign box on `m`.
pub fn assemble_tradeoff_lp(
    views: &ProbabilityViews,
    s_star: &ScoreVector,
    w: &NeighborMatrix,
    budget: &FairnessBudget,
) -> Result<LpProblem> {
    let awareness = s_star.awareness;
    if s_star.values.len() != awareness.score_len(views.cells) {
        return Err(FairLpError::Dimension(format!(
            "score vector has length {}, expected {}",
            s_star.values.len(),
            awareness.score_len(views.cells)
        )));
    }
    let (rows, _) = constraint_rows(views, budget, awareness, w)?;
    Ok(lp_from_rows(objective(views, awareness), s_star, &rows))
}

/// Attained `|expr(s)|` of each row against its budget.
pub fn residuals(rows: &[ConstraintRow], s: &[f64]) -> Vec<Residual> {
    rows.iter()
        .map(|r| {
            let value = r.value(s).abs();
            Residual {
                label: r.kind.label(),
                value,
                budget: r.budget,
                slack: r.budget - value,
            }
        })
        .collect()
}

/// Among optimal deviations, picks one maximizing `Σ m`, i.e. the fewest
/// positive predictions, matching the tie rule of the unconstrained scores.
fn prefer_fewer_positives(mut lp: LpProblem, optimum: f64) -> Option<Vec<f64>> {
    let c = std::mem::take(&mut lp.objective);
    lp.objective = vec![-1.0; c.len()];
    lp.push_row(c, optimum, "optimality");
    match solve_lp(&lp) {
        Ok(s) if s.status == LpStatus::Optimal => Some(s.x),
        _ => None,
    }
}

/// Scores, LP, and fair scores `s* - m` for one budget.
pub fn fair_solution(
    views: &ProbabilityViews,
    budget: &FairnessBudget,
    awareness: Awareness,
    w: &NeighborMatrix,
) -> Result<FairLpResult> {
    let (s_star, acc_star) = match awareness {
        Awareness::Unaware => bayes_scores_unaware(views),
        Awareness::Aware => bayes_scores_aware(views)?,
    };
    let (rows, warnings) = constraint_rows(views, budget, awareness, w)?;
    let c = objective(views, awareness);
    let lp = lp_from_rows(c.clone(), &s_star, &rows);
    let sol = solve_lp(&lp)?;
    if sol.status == LpStatus::Infeasible {
        return Err(FairLpError::Infeasible);
    }
    let m = prefer_fewer_positives(lp, sol.objective).unwrap_or(sol.x);
    let s_fair: Vec<f64> = s_star
        .values
        .iter()
        .zip(&m)
        .map(|(s, d)| (s - d).clamp(0.0, 1.0))
        .collect();
    let objective = dot(&c, &m);
    Ok(FairLpResult {
        budget: *budget,
        status: LpStatus::Optimal,
        residuals: residuals(&rows, &s_fair),
        s_fair: ScoreVector {
            awareness,
            values: s_fair,
        },
        s_star,
        m,
        objective,
        acc_star,
        acc_fair: acc_star - objective,
        warnings,
    })
}

/// Solves every grid point (in parallel), keeping grid order.
pub fn pareto_sweep(
    views: &ProbabilityViews,
    grid: &[FairnessBudget],
    awareness: Awareness,
    w: &NeighborMatrix,
) -> Vec<SweepPoint> {
    grid.par_iter()
        .map(|budget| {
            let label = budget.label();
            match fair_solution(views, budget, awareness, w) {
                Ok(r) => SweepPoint {
                    label,
                    budget: *budget,
                    status: "optimal".into(),
                    acc_star: Some(r.acc_star),
                    acc_fair: Some(r.acc_fair),
                    residuals: r.residuals,
                    warnings: r.warnings,
                    error: None,
                },
                Err(e) => {
                    let acc_star = match awareness {
                        Awareness::Unaware => Some(bayes_scores_unaware(views).1),
                        Awareness::Aware => bayes_scores_aware(views).ok().map(|r| r.1),
                    };
                    SweepPoint {
                        label,
                        budget: *budget,
                        status: if matches!(e, FairLpError::Infeasible) {
                            "infeasible".into()
                        } else {
                            "error".into()
                        },
                        acc_star,
                        acc_fair: None,
                        residuals: Vec::new(),
                        warnings: Vec::new(),
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::{views, DiscreteJoint};

    fn hand_joint() -> ProbabilityViews {
        // p¹=(0.4,0.1), p⁰=(0.1,0.4), p_a=(0.8,0.2), p_b=(0.2,0.8), P(a)=P(b)=0.5
        let j = DiscreteJoint::new(vec![
            [[0.08, 0.32], [0.02, 0.08]],
            [[0.08, 0.02], [0.32, 0.08]],
        ])
        .unwrap();
        views(&j).unwrap()
    }

    #[test]
    fn hand_instance_views_match() {
        let v = hand_joint();
        assert_eq!(v.label_joint(1), &[0.4, 0.1]);
        assert_eq!(v.label_joint(0), &[0.1, 0.4]);
        let pa = v.given_group(Group::A).unwrap();
        assert!((pa[0] - 0.8).abs() < 1e-12 && (pa[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn unaware_majority_vote() {
        let (s, acc) = bayes_scores_unaware(&hand_joint());
        assert_eq!(s.values, vec![1.0, 0.0]);
        assert!((acc - 0.8).abs() < 1e-12);
    }

    #[test]
    fn ties_predict_zero() {
        let j = DiscreteJoint::new(vec![[[0.25, 0.25], [0.0, 0.0]], [[0.1, 0.4], [0.0, 0.0]]])
            .unwrap();
        let (s, _) = bayes_scores_unaware(&views(&j).unwrap());
        assert_eq!(s.values, vec![0.0, 1.0]);
    }

    #[test]
    fn aware_majority_vote_per_group() {
        // cell 0: group a mostly positive, group b mostly negative
        let j = DiscreteJoint::new(vec![
            [[0.05, 0.2], [0.2, 0.05]],
            [[0.2, 0.05], [0.05, 0.2]],
        ])
        .unwrap();
        let v = views(&j).unwrap();
        let (s, acc) = bayes_scores_aware(&v).unwrap();
        assert_eq!(s.values, vec![1.0, 0.0, 0.0, 1.0]);
        assert!((acc - 0.8).abs() < 1e-12);
        let (_, pooled) = bayes_scores_unaware(&v);
        assert!(acc >= pooled);
    }

    #[test]
    fn aware_requires_both_groups() {
        let j = DiscreteJoint::new(vec![[[0.5, 0.5], [0.0, 0.0]]]).unwrap();
        assert!(bayes_scores_aware(&views(&j).unwrap()).is_err());
    }

    #[test]
    fn dp_hand_instance() {
        let v = hand_joint();
        let w = NeighborMatrix::empty(2);
        let r = fair_solution(&v, &FairnessBudget::inactive().with_dp(0.0), Awareness::Unaware, &w)
            .unwrap();
        assert!((r.objective - 0.3).abs() < 1e-8);
        assert!((r.acc_fair - 0.5).abs() < 1e-8);
        assert_eq!(r.s_fair.values, vec![0.0, 0.0]);
        assert!(r.residuals[0].value < 1e-9);
    }

    #[test]
    fn relaxed_dp_is_cheaper() {
        let v = hand_joint();
        let w = NeighborMatrix::empty(2);
        let tight = fair_solution(&v, &FairnessBudget::inactive().with_dp(0.0), Awareness::Unaware, &w)
            .unwrap();
        let loose = fair_solution(&v, &FairnessBudget::inactive().with_dp(0.6), Awareness::Unaware, &w)
            .unwrap();
        assert!(loose.objective < tight.objective);
    }

    #[test]
    fn row_counts() {
        let v = hand_joint();
        let w = NeighborMatrix::empty(2);
        let (s, _) = bayes_scores_unaware(&v);
        let none = assemble_tradeoff_lp(&v, &s, &w, &FairnessBudget::inactive()).unwrap();
        assert!(none.a.is_empty());
        let dp = assemble_tradeoff_lp(&v, &s, &w, &FairnessBudget::inactive().with_dp(0.1)).unwrap();
        assert_eq!(dp.a.len(), 2);
        let eod = assemble_tradeoff_lp(
            &v,
            &s,
            &w,
            &FairnessBudget::inactive().with_equalized_odds(0.1),
        )
        .unwrap();
        assert_eq!(eod.row_labels, vec!["EOp+", "EOp-", "PE+", "PE-"]);
    }

    #[test]
    fn unconstrained_keeps_bayes_scores() {
        let v = hand_joint();
        let r = fair_solution(&v, &FairnessBudget::inactive(), Awareness::Unaware, &NeighborMatrix::empty(2))
            .unwrap();
        assert_eq!(r.m, vec![0.0, 0.0]);
        assert_eq!(r.acc_fair, r.acc_star);
    }

    #[test]
    fn zero_mass_rows_are_skipped_with_warning() {
        // no positives in group b
        let j = DiscreteJoint::new(vec![[[0.2, 0.3], [0.25, 0.0]], [[0.1, 0.0], [0.15, 0.0]]])
            .unwrap();
        let v = views(&j).unwrap();
        let r = fair_solution(
            &v,
            &FairnessBudget::inactive().with_equalized_odds(0.0),
            Awareness::Unaware,
            &NeighborMatrix::empty(2),
        )
        .unwrap();
        assert_eq!(r.warnings.len(), 1);
        assert!(r.warnings[0].starts_with("EOp"));
        assert_eq!(r.residuals.len(), 1);
    }

    #[test]
    fn individual_rows_bind_neighbors() {
        let v = hand_joint();
        let w = NeighborMatrix::from_pairs(2, 1.0, &[(0, 1, 0.0)]).unwrap();
        let r = fair_solution(&v, &FairnessBudget::inactive().with_ind(0.0), Awareness::Unaware, &w)
            .unwrap();
        assert!((r.s_fair.values[0] - r.s_fair.values[1]).abs() < 1e-9);
        assert!((r.acc_fair - 0.5).abs() < 1e-9);
    }

    #[test]
    fn sweep_preserves_order_and_marks_infeasible() {
        let v = hand_joint();
        let w = NeighborMatrix::empty(2);
        let grid: Vec<_> = [0.0, 0.1, 0.2, 0.3]
            .iter()
            .map(|&e| FairnessBudget::inactive().with_dp(e))
            .collect();
        let pts = pareto_sweep(&v, &grid, Awareness::Unaware, &w);
        assert_eq!(pts.len(), 4);
        for (p, b) in pts.iter().zip(&grid) {
            assert_eq!(p.budget, *b);
        }
        let accs: Vec<f64> = pts.iter().map(|p| p.acc_fair.unwrap()).collect();
        assert!(accs.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    }
}
