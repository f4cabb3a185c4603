//! Oracles shared by the integration tests. Everything here works from the
//! raw joint table `J[i][g][y]` and plain loops, without calling into the
//! library's own view, constraint or LP code.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Table = Vec<[[f64; 2]; 2]>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly positive random joint.
pub fn random_table(n: usize, rng: &mut ChaCha8Rng) -> Table {
    let mut t: Table = (0..n)
        .map(|_| {
            [
                [rng.random_range(0.01..1.0), rng.random_range(0.01..1.0)],
                [rng.random_range(0.01..1.0), rng.random_range(0.01..1.0)],
            ]
        })
        .collect();
    let total: f64 = t.iter().flatten().flatten().sum();
    for c in t.iter_mut() {
        for g in c.iter_mut() {
            for v in g.iter_mut() {
                *v /= total;
            }
        }
    }
    t
}

/// Random column-stochastic matrix as rows; about a third of the columns
/// are sparse.
pub fn random_stochastic(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; cols]; rows];
    for j in 0..cols {
        let sparse = rng.random_bool(0.3);
        let mut col: Vec<f64> = (0..rows)
            .map(|_| if sparse && rng.random_bool(0.5) { 0.0 } else { rng.random::<f64>() })
            .collect();
        let s: f64 = col.iter().sum();
        if s <= 0.0 {
            col[0] = 1.0;
        } else {
            col.iter_mut().for_each(|v| *v /= s);
        }
        for i in 0..rows {
            m[i][j] = col[i];
        }
    }
    m
}

pub fn group_mass(t: &Table, g: usize) -> f64 {
    t.iter().map(|c| c[g][0] + c[g][1]).sum()
}

pub fn group_label_mass(t: &Table, g: usize, y: usize) -> f64 {
    t.iter().map(|c| c[g][y]).sum()
}

/// `s_g` for group `g`; unaware vectors are shared.
fn score(s: &[f64], n: usize, g: usize) -> &[f64] {
    if s.len() == n {
        s
    } else {
        &s[g * n..(g + 1) * n]
    }
}

/// P(prediction = label).
pub fn accuracy(t: &Table, s: &[f64]) -> f64 {
    let n = t.len();
    let mut acc = 0.0;
    for g in 0..2 {
        let sg = score(s, n, g);
        for i in 0..n {
            acc += t[i][g][1] * sg[i] + t[i][g][0] * (1.0 - sg[i]);
        }
    }
    acc
}

/// P(Ŷ=1 | A=g) restricted to rows with label in `labels`, normalized by
/// the mass of that event.
fn positive_rate(t: &Table, s: &[f64], g: usize, labels: &[usize]) -> f64 {
    let n = t.len();
    let sg = score(s, n, g);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        for &y in labels {
            num += t[i][g][y] * sg[i];
            den += t[i][g][y];
        }
    }
    num / den
}

pub fn dp(t: &Table, s: &[f64]) -> f64 {
    positive_rate(t, s, 0, &[0, 1]) - positive_rate(t, s, 1, &[0, 1])
}

pub fn eop(t: &Table, s: &[f64]) -> f64 {
    positive_rate(t, s, 0, &[1]) - positive_rate(t, s, 1, &[1])
}

pub fn pe(t: &Table, s: &[f64]) -> f64 {
    positive_rate(t, s, 0, &[0]) - positive_rate(t, s, 1, &[0])
}

pub fn ea(t: &Table, s: &[f64]) -> f64 {
    let n = t.len();
    let mut acc = [0.0; 2];
    for g in 0..2 {
        let sg = score(s, n, g);
        for i in 0..n {
            acc[g] += t[i][g][1] * sg[i] + t[i][g][0] * (1.0 - sg[i]);
        }
        acc[g] /= group_mass(t, g);
    }
    acc[0] - acc[1]
}

/// Individual row for pair `(i, j)` with weight `w`.
pub fn ind(t: &Table, s: &[f64], i: usize, j: usize, w: f64) -> f64 {
    let n = t.len();
    if s.len() == n {
        return w * (s[i] - s[j]);
    }
    let mut v = 0.0;
    for g in 0..2 {
        let m = group_mass(t, g);
        let pg = |k: usize| (t[k][g][0] + t[k][g][1]) / m;
        let sg = score(s, n, g);
        v += w * (pg(i) * sg[i] - pg(j) * sg[j]);
    }
    v
}

/// Affine form recovered from a function by probing basis vectors.
#[derive(Clone, Debug)]
pub struct Affine {
    pub coeffs: Vec<f64>,
    pub offset: f64,
}

impl Affine {
    pub fn probe(dim: usize, f: impl Fn(&[f64]) -> f64) -> Self {
        let zero = vec![0.0; dim];
        let offset = f(&zero);
        let coeffs = (0..dim)
            .map(|k| {
                let mut e = zero.clone();
                e[k] = 1.0;
                f(&e) - offset
            })
            .collect();
        Affine { coeffs, offset }
    }
}

/// Maximizes `objective` over the grid `{0, step, .., 1}^dim` subject to
/// `|row(s)| ≤ eps + step/2 · Σ|coeffs|` for each row.
pub fn grid_best(objective: &Affine, rows: &[(Affine, f64)], step: f64) -> Option<f64> {
    let dim = objective.coeffs.len();
    let ticks = (1.0 / step).round() as usize;
    let limits: Vec<f64> = rows
        .iter()
        .map(|(a, eps)| eps + 0.5 * step * a.coeffs.iter().map(|c| c.abs()).sum::<f64>() + 1e-12)
        .collect();
    // coeff[d][k]: k = 0 is the objective, k >= 1 the rows
    let coeff: Vec<Vec<f64>> = (0..dim)
        .map(|d| {
            std::iter::once(objective.coeffs[d])
                .chain(rows.iter().map(|(a, _)| a.coeffs[d]))
                .collect()
        })
        .collect();
    let mut start = vec![objective.offset];
    start.extend(rows.iter().map(|(a, _)| a.offset));
    let mut best: Option<f64> = None;
    grid_rec(0, ticks, step, &start, &coeff, &limits, &mut best);
    best
}

fn grid_rec(
    d: usize,
    ticks: usize,
    step: f64,
    partial: &[f64],
    coeff: &[Vec<f64>],
    limits: &[f64],
    best: &mut Option<f64>,
) {
    if d + 1 == coeff.len() {
        grid_last(ticks, step, partial, &coeff[d], limits, best);
        return;
    }
    let mut next = partial.to_vec();
    for t in 0..=ticks {
        let s = t as f64 * step;
        for (j, v) in next.iter_mut().enumerate() {
            *v = partial[j] + coeff[d][j] * s;
        }
        grid_rec(d + 1, ticks, step, &next, coeff, limits, best);
    }
}

/// The last coordinate enters linearly, so only the extreme feasible ticks
/// matter; the tick range comes from the row intervals and every candidate
/// is re-checked exactly.
fn grid_last(ticks: usize, step: f64, partial: &[f64], c: &[f64], limits: &[f64], best: &mut Option<f64>) {
    let value = |t: usize, j: usize| partial[j] + c[j] * t as f64 * step;
    let feasible = |t: usize| (1..partial.len()).all(|j| value(t, j).abs() <= limits[j - 1]);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for j in 1..partial.len() {
        let (p, l) = (partial[j], limits[j - 1]);
        if c[j] == 0.0 {
            if p.abs() > l {
                return;
            }
            continue;
        }
        let (a, b) = ((-l - p) / c[j], (l - p) / c[j]);
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    if lo > hi + step {
        return;
    }
    let t_lo = ((lo / step).floor().max(0.0) as usize).min(ticks);
    let t_hi = ((hi / step).ceil().max(0.0) as usize).min(ticks);
    let mut consider = |t: usize| {
        if feasible(t) && best.is_none_or(|b| value(t, 0) > b) {
            *best = Some(value(t, 0));
        }
    };
    for t in [t_lo, t_lo + 1, t_hi.saturating_sub(1), t_hi] {
        if t <= ticks {
            consider(t);
        }
    }
}

/// Projection onto the simplex by bisection on the shift.
pub fn bisect_projection(v: &[f64]) -> Vec<f64> {
    let mass = |theta: f64| v.iter().map(|x| (x - theta).max(0.0)).sum::<f64>();
    let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

pub fn mat_vec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

pub fn vec_mat(y: &[f64], m: &[Vec<f64>]) -> Vec<f64> {
    let cols = m[0].len();
    (0..cols)
        .map(|j| m.iter().zip(y).map(|(r, v)| r[j] * v).sum())
        .collect()
}

pub fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}
