//! Shared machinery for the single-matrix and two-matrix problems.
//!
//! Both are expressed as a list of blocks `T_h`, each acting on its own
//! source distribution. With `u_h = T_hᵀ s` and `u0_h = T_hᵀ(1 - s)`:
//!
//! * accuracy `= Σ_h p1_h·u_h + p0_h·u0_h`
//! * correlation `= ‖Σ_h T_h c_h‖₁`
//! * constraint `r` `= Σ_h a_{r,h}·u_h + b_{r,h}·u0_h`

use super::project::project_in_place;
use super::DecorrelationConfig;

pub(crate) type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub p1: Vec<f64>,
    pub p0: Vec<f64>,
    pub corr: Vec<f64>,
    pub a: Vec<SparseRow>,
    pub b: Vec<SparseRow>,
}

#[derive(Debug, Clone)]
pub(crate) struct Problem {
    /// Classifier on the target domain; its length is the row count of every block.
    pub s: Vec<f64>,
    pub cols: usize,
    pub blocks: Vec<Block>,
    /// Budget per constraint row; `+∞` when inactive.
    pub f: Vec<f64>,
}

pub(crate) struct Eval {
    residual: Vec<f64>,
    pub values: Vec<f64>,
    pub accuracy: f64,
    pub correlation: f64,
}

fn sparse_dot(row: &SparseRow, x: &[f64]) -> f64 {
    row.iter().map(|(i, c)| c * x[*i]).sum()
}

impl Problem {
    pub fn target_rows(&self) -> usize {
        self.s.len()
    }

    pub fn constraint_count(&self) -> usize {
        self.f.len()
    }

    pub fn evaluate(&self, ts: &[&[f64]]) -> Eval {
        let rows = self.target_rows();
        let n = self.cols;
        let mut residual = vec![0.0; rows];
        let mut values = vec![0.0; self.f.len()];
        let mut accuracy = 0.0;
        for (t, block) in ts.iter().zip(&self.blocks) {
            let mut uh = vec![0.0; n];
            let mut u0h = vec![0.0; n];
            for j in 0..n {
                let col = &t[j * rows..(j + 1) * rows];
                let (mut pos, mut neg) = (0.0, 0.0);
                for (k, tk) in col.iter().enumerate() {
                    pos += tk * self.s[k];
                    neg += tk * (1.0 - self.s[k]);
                    residual[k] += tk * block.corr[j];
                }
                uh[j] = pos;
                u0h[j] = neg;
            }
            for (r, v) in values.iter_mut().enumerate() {
                *v += sparse_dot(&block.a[r], &uh) + sparse_dot(&block.b[r], &u0h);
            }
            accuracy += dot(&block.p1, &uh) + dot(&block.p0, &u0h);
        }
        let correlation = residual.iter().map(|x| x.abs()).sum();
        Eval {
            residual,
            values,
            accuracy,
            correlation,
        }
    }

    /// `[max(-v - f, 0); max(v - f, 0)]`.
    pub fn violation(&self, values: &[f64]) -> Vec<f64> {
        let neg = values.iter().zip(&self.f).map(|(v, f)| (-v - f).max(0.0));
        let pos = values.iter().zip(&self.f).map(|(v, f)| (v - f).max(0.0));
        neg.chain(pos).map(|x| if x.is_finite() { x } else { 0.0 }).collect()
    }

    pub fn lagrangian(&self, e: &Eval, rho: &[f64], cfg: &DecorrelationConfig) -> f64 {
        let g = self.violation(&e.values);
        let penalty: f64 = g
            .iter()
            .zip(rho)
            .map(|(gi, ri)| ri * gi + 0.5 * cfg.tau * gi * gi)
            .sum();
        -cfg.lambda * e.accuracy + cfg.beta * e.correlation + penalty
    }

    /// Subgradient of the Lagrangian with respect to block `h`.
    fn gradient(&self, h: usize, e: &Eval, rho: &[f64], cfg: &DecorrelationConfig, out: &mut [f64]) {
        let rows = self.target_rows();
        let n = self.cols;
        let m = self.f.len();
        let block = &self.blocks[h];
        let mut a_s: Vec<f64> = block.p1.iter().map(|p| -cfg.lambda * p).collect();
        let mut a_0: Vec<f64> = block.p0.iter().map(|p| -cfg.lambda * p).collect();
        for r in 0..m {
            let (v, f) = (e.values[r], self.f[r]);
            let mut coef = 0.0;
            if v - f > 0.0 {
                coef += rho[m + r] + cfg.tau * (v - f);
            }
            if -v - f > 0.0 {
                coef -= rho[r] + cfg.tau * (-v - f);
            }
            if coef != 0.0 {
                for (i, c) in &block.a[r] {
                    a_s[*i] += coef * c;
                }
                for (i, c) in &block.b[r] {
                    a_0[*i] += coef * c;
                }
            }
        }
        let sign: Vec<f64> = e
            .residual
            .iter()
            .map(|x| if *x > 0.0 { 1.0 } else if *x < 0.0 { -1.0 } else { 0.0 })
            .collect();
        for j in 0..n {
            let col = &mut out[j * rows..(j + 1) * rows];
            let cj = cfg.beta * block.corr[j];
            for (k, g) in col.iter_mut().enumerate() {
                *g = self.s[k] * a_s[j] + (1.0 - self.s[k]) * a_0[j] + sign[k] * cj;
            }
        }
    }

    /// Heavy-ball projected subgradient over block `h`; returns the best
    /// iterate seen (the starting point included) and its value.
    pub fn minimize_block(
        &self,
        h: usize,
        ts: &mut [Vec<f64>],
        rho: &[f64],
        cfg: &DecorrelationConfig,
    ) -> f64 {
        let rows = self.target_rows();
        let len = ts[h].len();
        let value = |ts: &[Vec<f64>]| {
            let refs: Vec<&[f64]> = ts.iter().map(Vec::as_slice).collect();
            let e = self.evaluate(&refs);
            let l = self.lagrangian(&e, rho, cfg);
            (e, l)
        };
        let (mut eval, mut current) = value(ts);
        let mut best = current;
        let mut best_t = ts[h].clone();
        let mut velocity = vec![0.0; len];
        let mut grad = vec![0.0; len];
        let steps = cfg.max_inner.max(1);
        let ratio = if steps > 1 {
            (cfg.lr_final / cfg.lr_initial).powf(1.0 / (steps - 1) as f64)
        } else {
            1.0
        };
        let mut lr = cfg.lr_initial;
        for _ in 0..steps {
            self.gradient(h, &eval, rho, cfg, &mut grad);
            let t = &mut ts[h];
            for ((x, v), g) in t.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = cfg.momentum * *v - lr * g;
                *x += *v;
            }
            for col in t.chunks_mut(rows) {
                project_in_place(col);
            }
            (eval, current) = value(ts);
            if current < best {
                best = current;
                best_t.clone_from(&ts[h]);
            }
            lr *= ratio;
        }
        ts[h] = best_t;
        best
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) struct Solved {
    pub ts: Vec<Vec<f64>>,
    pub rho: Vec<f64>,
    pub outer_iterations: usize,
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

const FEASIBLE: f64 = 1e-6;

/// Method of multipliers; with several blocks the inner step is one
/// Gauss-Seidel sweep (ADMM).
pub(crate) fn solve(problem: &Problem, mut ts: Vec<Vec<f64>>, cfg: &DecorrelationConfig) -> Solved {
    let mut rho = vec![0.0; 2 * problem.constraint_count()];
    let mut history = Vec::new();
    // (violation, objective, iterate)
    let mut best: Option<(f64, f64, Vec<Vec<f64>>)> = None;
    let mut converged = false;
    let mut outer = 0;
    while outer < cfg.max_outer {
        outer += 1;
        let prev_t = ts.clone();
        let prev_rho = rho.clone();
        for h in 0..problem.blocks.len() {
            problem.minimize_block(h, &mut ts, &rho, cfg);
        }
        let refs: Vec<&[f64]> = ts.iter().map(Vec::as_slice).collect();
        let e = problem.evaluate(&refs);
        let g = problem.violation(&e.values);
        for (r, gi) in rho.iter_mut().zip(&g) {
            *r += cfg.tau * gi;
        }
        let dt: f64 = ts
            .iter()
            .zip(&prev_t)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)))
            .sum();
        let dr: f64 = rho.iter().zip(&prev_rho).map(|(x, y)| (x - y) * (x - y)).sum();
        history.push(dt + dr);

        let violation = g.iter().fold(0.0f64, |a, b| a.max(*b));
        let objective = -cfg.lambda * e.accuracy + cfg.beta * e.correlation;
        let better = match &best {
            None => true,
            Some((bv, bo, _)) => {
                let (feasible, best_feasible) = (violation <= FEASIBLE, *bv <= FEASIBLE);
                match (feasible, best_feasible) {
                    (true, true) => objective < *bo,
                    (true, false) => true,
                    (false, true) => false,
                    (false, false) => violation < *bv,
                }
            }
        };
        if better {
            best = Some((violation, objective, ts.clone()));
        }
        if dt + dr < cfg.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        if let Some((_, _, t)) = best {
            ts = t;
        }
    }
    Solved {
        ts,
        rho,
        outer_iterations: outer,
        residual_history: history,
        converged,
    }
}
