//! Dense bounded-variable primal simplex (two phase).
//!
//! Variables are shifted so every lower bound is zero. Each inequality row
//! gets a slack; rows whose shifted right-hand side is negative are negated
//! and given an artificial variable. Phase 1 drives the artificials to zero,
//! phase 2 optimizes the real objective with the artificials pinned at zero.

use serde::{Deserialize, Serialize};

use super::{FairLpError, Result};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-8;
const MAX_ITERATIONS: usize = 100_000;
const DEGENERATE_STREAK: usize = 50;

/// `minimize cᵀx  s.t.  A x ≤ b,  lower ≤ x ≤ upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub row_labels: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        LpProblem {
            objective,
            a: Vec::new(),
            b: Vec::new(),
            row_labels: Vec::new(),
            lower,
            upper,
        }
    }

    pub fn vars(&self) -> usize {
        self.objective.len()
    }

    pub fn push_row(&mut self, coeffs: Vec<f64>, rhs: f64, label: impl Into<String>) {
        self.a.push(coeffs);
        self.b.push(rhs);
        self.row_labels.push(label.into());
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vars();
        let bad = self.lower.len() != n
            || self.upper.len() != n
            || self.b.len() != self.a.len()
            || self.row_labels.len() != self.a.len()
            || self.a.iter().any(|r| r.len() != n);
        if bad {
            return Err(FairLpError::Dimension("inconsistent LP dimensions".into()));
        }
        let finite = self.objective.iter().chain(&self.b).chain(self.a.iter().flatten());
        if finite.into_iter().any(|v| !v.is_finite()) {
            return Err(FairLpError::Dimension("non-finite LP coefficient".into()));
        }
        for (l, u) in self.lower.iter().zip(&self.upper) {
            if !l.is_finite() || u.is_nan() || l > u {
                return Err(FairLpError::Dimension(format!("invalid bounds [{l}, {u}]")));
            }
        }
        Ok(())
    }

    /// Largest amount by which `x` breaks a row or a bound.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.a.iter().zip(&self.b).map(|(row, b)| dot(row, x) - b);
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .flat_map(|(v, (l, u))| [l - v, v - u]);
        rows.chain(bounds).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
}

struct Tableau {
    /// `B⁻¹A` over all columns (structural, slack, artificial).
    rows: Vec<Vec<f64>>,
    /// Values of the basic variables, one per row.
    values: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<Status>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    iterations: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn value_of_nonbasic(&self, j: usize) -> f64 {
        match self.status[j] {
            Status::AtUpper => self.upper[j],
            _ => 0.0,
        }
    }

    fn price(&mut self) {
        let ncols = self.cost.len();
        self.reduced = self.cost.clone();
        for (r, &bj) in self.basis.iter().enumerate() {
            let cb = self.cost[bj];
            if cb != 0.0 {
                for j in 0..ncols {
                    self.reduced[j] -= cb * self.rows[r][j];
                }
            }
        }
    }

    fn objective(&self) -> f64 {
        let mut total = 0.0;
        for (j, &c) in self.cost.iter().enumerate() {
            if c != 0.0 && self.status[j] != Status::Basic {
                total += c * self.value_of_nonbasic(j);
            }
        }
        for (r, &bj) in self.basis.iter().enumerate() {
            total += self.cost[bj] * self.values[r];
        }
        total
    }

    fn entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (j, &d) in self.reduced.iter().enumerate() {
            let dir = match self.status[j] {
                Status::AtLower if d < -COST_TOL && self.upper[j] > 0.0 => 1.0,
                Status::AtUpper if d > COST_TOL => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(k, _)| d.abs() > self.reduced[k].abs()) {
                best = Some((j, dir));
            }
        }
        best
    }

    fn run(&mut self) -> Result<Outcome> {
        let mut streak = 0usize;
        loop {
            if self.iterations >= MAX_ITERATIONS {
                return Err(FairLpError::IterationLimit(MAX_ITERATIONS));
            }
            let Some((j, dir)) = self.entering(streak >= DEGENERATE_STREAK) else {
                return Ok(Outcome::Optimal);
            };
            self.iterations += 1;

            // x_B(t) = x_B - dir * t * column_j
            let mut step = self.upper[j];
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_pivot = 0.0;
            for r in 0..self.rows.len() {
                let alpha = dir * self.rows[r][j];
                let bj = self.basis[r];
                let (limit, to_upper) = if alpha > PIVOT_TOL {
                    (self.values[r].max(0.0) / alpha, false)
                } else if alpha < -PIVOT_TOL && self.upper[bj].is_finite() {
                    ((self.upper[bj] - self.values[r]).max(0.0) / -alpha, true)
                } else {
                    continue;
                };
                let better = limit < step - 1e-12
                    || (limit <= step + 1e-12 && leave.is_some() && alpha.abs() > leave_pivot);
                if better {
                    step = limit;
                    leave = Some((r, to_upper));
                    leave_pivot = alpha.abs();
                }
            }
            if !step.is_finite() {
                return Ok(Outcome::Unbounded);
            }
            streak = if step <= 1e-12 { streak + 1 } else { 0 };

            for r in 0..self.rows.len() {
                self.values[r] -= dir * step * self.rows[r][j];
            }
            match leave {
                None => {
                    self.status[j] = if dir > 0.0 { Status::AtUpper } else { Status::AtLower };
                }
                Some((r, to_upper)) => {
                    let entering_value = self.value_of_nonbasic(j) + dir * step;
                    let out = self.basis[r];
                    self.status[out] = if to_upper { Status::AtUpper } else { Status::AtLower };
                    self.pivot(r, j);
                    self.values[r] = entering_value;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.rows[r][j];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[j] = 0.0;
            }
        }
        let f = self.reduced[j];
        if f != 0.0 {
            for (v, pv) in self.reduced.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.reduced[j] = 0.0;
        }
        self.basis[r] = j;
        self.status[j] = Status::Basic;
    }
}

/// Solves the LP. Deterministic: identical input gives bit-identical output.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    problem.validate()?;
    let n = problem.vars();
    let m = problem.a.len();
    let range: Vec<f64> = problem
        .lower
        .iter()
        .zip(&problem.upper)
        .map(|(l, u)| u - l)
        .collect();
    let shifted_b: Vec<f64> = problem
        .a
        .iter()
        .zip(&problem.b)
        .map(|(row, b)| b - dot(row, &problem.lower))
        .collect();
    let negative: Vec<usize> = (0..m).filter(|&r| shifted_b[r] < 0.0).collect();
    let ncols = n + m + negative.len();

    let mut rows = vec![vec![0.0; ncols]; m];
    let mut values = vec![0.0; m];
    let mut basis = vec![0; m];
    let mut status = vec![Status::AtLower; ncols];
    let mut upper = vec![f64::INFINITY; ncols];
    upper[..n].copy_from_slice(&range);
    let mut cost = vec![0.0; ncols];
    let mut art = n + m;
    for r in 0..m {
        let sign = if shifted_b[r] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            rows[r][j] = sign * problem.a[r][j];
        }
        rows[r][n + r] = sign;
        values[r] = sign * shifted_b[r];
        if sign < 0.0 {
            rows[r][art] = 1.0;
            cost[art] = 1.0;
            basis[r] = art;
            status[art] = Status::Basic;
            art += 1;
        } else {
            basis[r] = n + r;
            status[n + r] = Status::Basic;
        }
    }
    let mut t = Tableau {
        rows,
        values,
        basis,
        status,
        upper,
        cost,
        reduced: Vec::new(),
        iterations: 0,
    };

    if !negative.is_empty() {
        t.price();
        t.run()?;
        let scale = 1.0 + negative.iter().map(|&r| shifted_b[r].abs()).sum::<f64>();
        if t.objective() > FEAS_TOL * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: problem.lower.clone(),
                objective: f64::NAN,
                iterations: t.iterations,
            });
        }
        for j in n + m..ncols {
            t.upper[j] = 0.0;
            t.cost[j] = 0.0;
            if t.status[j] == Status::AtUpper {
                t.status[j] = Status::AtLower;
            }
        }
    }
    t.cost[..n].copy_from_slice(&problem.objective);
    t.price();
    if let Outcome::Unbounded = t.run()? {
        return Err(FairLpError::Unbounded);
    }

    let mut y = vec![0.0; ncols];
    for j in 0..ncols {
        if t.status[j] != Status::Basic {
            y[j] = t.value_of_nonbasic(j);
        }
    }
    for (r, &bj) in t.basis.iter().enumerate() {
        y[bj] = t.values[r];
    }
    let x: Vec<f64> = (0..n)
        .map(|j| (problem.lower[j] + y[j]).clamp(problem.lower[j], problem.upper[j]))
        .collect();
    let violation = problem.max_violation(&x);
    let scale = 1.0 + problem.b.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if violation > FEAS_TOL * scale {
        return Err(FairLpError::Degenerate(violation));
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: dot(&problem.objective, &x),
        x,
        iterations: t.iterations,
    })
}
