use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{QuantizerError, Result};
use crate::dataset::{MixedMetric, SampleTable};

/// Hard cap on Lloyd iterations.
pub const MAX_LLOYD_ITERATIONS: usize = 500;

/// Centroids of a cell decomposition in normalized feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub centroids: Vec<Vec<f64>>,
    pub metric: MixedMetric,
    /// Mean distance from each training sample to its centroid.
    pub distortion: f64,
    /// Distortion after each accepted Lloyd iteration; non-increasing.
    pub history: Vec<f64>,
    pub iterations: usize,
    /// False when the iteration cap was hit before the relative tolerance.
    pub converged: bool,
}

impl Codebook {
    /// A codebook with fixed centroids and no training history.
    pub fn from_centroids(centroids: Vec<Vec<f64>>, metric: MixedMetric) -> Result<Self> {
        if centroids.is_empty() {
            return Err(QuantizerError::InvalidParameter(
                "a codebook needs at least one centroid".into(),
            ));
        }
        for c in &centroids {
            if c.len() != metric.dim() {
                return Err(QuantizerError::DimensionMismatch {
                    expected: metric.dim(),
                    found: c.len(),
                });
            }
        }
        Ok(Codebook {
            centroids,
            metric,
            distortion: 0.0,
            history: Vec::new(),
            iterations: 0,
            converged: true,
        })
    }

    pub fn cells(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// Index of the nearest centroid; ties go to the lowest index.
    pub fn nearest(&self, x: &[f64]) -> (usize, f64) {
        nearest(&self.metric, &self.centroids, x)
    }

    /// Cell index of every sample, in row order.
    pub fn assign_all(&self, table: &SampleTable) -> Vec<usize> {
        table
            .rows
            .par_iter()
            .map(|r| self.nearest(&r.features).0)
            .collect()
    }
}

fn nearest(metric: &MixedMetric, centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = metric.distance(c, x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

pub fn assign_cell(x: &[f64], codebook: &Codebook) -> usize {
    codebook.nearest(x).0
}

struct Assignment {
    cells: Vec<usize>,
    distances: Vec<f64>,
}

impl Assignment {
    fn compute(metric: &MixedMetric, centroids: &[Vec<f64>], points: &[&[f64]]) -> Self {
        let (cells, distances) = points
            .par_iter()
            .map(|x| nearest(metric, centroids, x))
            .unzip();
        Assignment { cells, distances }
    }

    // sequential sum keeps the result independent of thread scheduling
    fn distortion(&self) -> f64 {
        self.distances.iter().sum::<f64>() / self.distances.len() as f64
    }
}

/// k-means++ style seeding under the mixed distance. Points already chosen
/// get zero weight, so seeds are distinct whenever enough distinct points exist.
fn seed_centroids(
    metric: &MixedMetric,
    points: &[&[f64]],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let first = rng.random_range(0..points.len());
    let mut centroids = vec![points[first].to_vec()];
    let mut closest: Vec<f64> = points
        .iter()
        .map(|p| metric.distance(p, &centroids[0]))
        .collect();
    while centroids.len() < n {
        let weights: Vec<f64> = closest.iter().map(|d| d * d).collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, w) in weights.iter().enumerate() {
                acc += w;
                if *w > 0.0 && acc >= target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave target just above the running sum
            pick.unwrap_or_else(|| weights.iter().rposition(|w| *w > 0.0).unwrap())
        } else {
            // unreachable when the distinct-count precondition holds
            break;
        };
        let c = points[pick].to_vec();
        for (d, p) in closest.iter_mut().zip(points) {
            *d = d.min(metric.distance(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Continuous columns: mean. Categorical columns: mode, lowest identifier on ties.
/// Empty cells are re-seeded at the sample farthest from its current centroid.
fn update_centroids(
    metric: &MixedMetric,
    points: &[&[f64]],
    assignment: &Assignment,
    n: usize,
) -> Vec<Vec<f64>> {
    let dim = metric.dim();
    let mut sums = vec![vec![0.0; dim]; n];
    let mut counts = vec![0usize; n];
    let mut modes: Vec<Vec<BTreeMap<u64, usize>>> = vec![vec![BTreeMap::new(); dim]; n];
    for (p, &cell) in points.iter().zip(&assignment.cells) {
        counts[cell] += 1;
        for (col, &v) in p.iter().enumerate() {
            if metric.is_categorical(col) {
                *modes[cell][col].entry(v as u64).or_default() += 1;
            } else {
                sums[cell][col] += v;
            }
        }
    }
    let mut centroids: Vec<Vec<f64>> = (0..n)
        .map(|cell| {
            (0..dim)
                .map(|col| {
                    if counts[cell] == 0 {
                        0.0
                    } else if metric.is_categorical(col) {
                        let mut best = (0u64, 0usize);
                        for (&id, &c) in &modes[cell][col] {
                            if c > best.1 {
                                best = (id, c);
                            }
                        }
                        best.0 as f64
                    } else {
                        sums[cell][col] / counts[cell] as f64
                    }
                })
                .collect()
        })
        .collect();

    let mut distances = assignment.distances.clone();
    for cell in 0..n {
        if counts[cell] == 0 {
            let mut far = (0, f64::NEG_INFINITY);
            for (i, &d) in distances.iter().enumerate() {
                if d > far.1 {
                    far = (i, d);
                }
            }
            centroids[cell] = points[far.0].to_vec();
            distances[far.0] = 0.0;
        }
    }
    centroids
}

/// Lloyd/LBG training of an `n`-cell codebook on a table whose continuous
/// columns are already normalized.
///
/// Stops when the relative distortion improvement drops below `rel_tol`. An
/// update that would raise the distortion is rejected and training stops at
/// the previous codebook, which keeps `history` non-increasing.
pub fn train_codebook(table: &SampleTable, n: usize, rel_tol: f64, seed: u64) -> Result<Codebook> {
    if n == 0 {
        return Err(QuantizerError::InvalidParameter("cell count must be >= 1".into()));
    }
    if !(rel_tol > 0.0) {
        return Err(QuantizerError::InvalidParameter(format!(
            "relative tolerance must be positive, got {rel_tol}"
        )));
    }
    if table.is_empty() {
        return Err(QuantizerError::EmptyTable);
    }
    let distinct = table.distinct_feature_count();
    if distinct < n {
        return Err(QuantizerError::TooFewDistinct {
            distinct,
            requested: n,
        });
    }
    let metric = table.schema.metric();
    let points: Vec<&[f64]> = table.rows.iter().map(|r| r.features.as_slice()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centroids = seed_centroids(&metric, &points, n, &mut rng);
    let mut assignment = Assignment::compute(&metric, &centroids, &points);
    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_LLOYD_ITERATIONS {
        let candidate = update_centroids(&metric, &points, &assignment, n);
        let next = Assignment::compute(&metric, &candidate, &points);
        let d = next.distortion();
        iterations += 1;
        match history.last().copied() {
            Some(prev) if d > prev => {
                converged = true;
                break;
            }
            Some(prev) => {
                centroids = candidate;
                assignment = next;
                history.push(d);
                if prev == 0.0 || (prev - d) / prev < rel_tol {
                    converged = true;
                    break;
                }
            }
            None => {
                centroids = candidate;
                assignment = next;
                history.push(d);
                if d == 0.0 {
                    converged = true;
                    break;
                }
            }
        }
    }

    // collapse exact duplicates; later copies own no samples under the tie rule
    let mut unique: Vec<Vec<f64>> = Vec::with_capacity(centroids.len());
    for c in centroids {
        if !unique.contains(&c) {
            unique.push(c);
        }
    }
    let distortion = *history.last().unwrap_or(&assignment.distortion());
    Ok(Codebook {
        centroids: unique,
        metric,
        distortion,
        history,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ColumnSpec, FeatureSchema, Group, Sample};

    fn table(cols: Vec<ColumnSpec>, rows: Vec<Vec<f64>>) -> SampleTable {
        let schema = FeatureSchema::new(cols, "grp", ["a", "b"], "label").unwrap();
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, features)| Sample {
                features,
                group: Group::from_index(i % 2),
                label: (i % 3 == 0) as u8,
            })
            .collect();
        SampleTable::new(schema, rows).unwrap()
    }

    #[test]
    fn single_cell_is_mean_and_mode() {
        let t = table(
            vec![
                ColumnSpec::continuous("x"),
                ColumnSpec::categorical("c", ["p", "q", "r"]),
            ],
            vec![
                vec![1.0, 2.0],
                vec![2.0, 1.0],
                vec![6.0, 1.0],
                vec![3.0, 2.0],
            ],
        );
        let cb = train_codebook(&t, 1, 0.01, 7).unwrap();
        assert_eq!(cb.cells(), 1);
        assert!((cb.centroids[0][0] - 3.0).abs() < 1e-12);
        // tie between ids 1 and 2 resolves to the lower identifier
        assert_eq!(cb.centroids[0][1], 1.0);
        let expected = t
            .rows
            .iter()
            .map(|r| cb.metric.distance(&r.features, &cb.centroids[0]))
            .sum::<f64>()
            / 4.0;
        assert!((cb.distortion - expected).abs() < 1e-12);
    }

    #[test]
    fn exact_cover_has_zero_distortion() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![5.0, 5.0],
        ];
        let mut rows = pts.clone();
        rows.extend(pts.clone());
        let t = table(
            vec![ColumnSpec::continuous("x"), ColumnSpec::continuous("y")],
            rows,
        );
        let cb = train_codebook(&t, 4, 0.01, 3).unwrap();
        assert_eq!(cb.distortion, 0.0);
        let mut got = cb.centroids.clone();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want = pts;
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, want);
    }

    #[test]
    fn two_tight_clusters() {
        let mut rows = Vec::new();
        for k in 0..50 {
            let jitter = (k as f64 - 24.5) * 1e-4;
            rows.push(vec![-1.0 + jitter]);
            rows.push(vec![1.0 - jitter]);
        }
        let t = table(vec![ColumnSpec::continuous("x")], rows);
        let cb = train_codebook(&t, 2, 0.01, 11).unwrap();
        let mut c: Vec<f64> = cb.centroids.iter().map(|c| c[0]).collect();
        c.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((c[0] + 1.0).abs() < 1e-3);
        assert!((c[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn too_few_distinct_points() {
        let t = table(
            vec![ColumnSpec::continuous("x")],
            vec![vec![1.0], vec![1.0], vec![2.0]],
        );
        assert!(matches!(
            train_codebook(&t, 3, 0.01, 0),
            Err(QuantizerError::TooFewDistinct { distinct: 2, requested: 3 })
        ));
        assert!(train_codebook(&t, 2, 0.0, 0).is_err());
    }

    #[test]
    fn assignment_ties_and_nearest() {
        let cb = Codebook::from_centroids(
            vec![vec![10.0], vec![0.0], vec![5.0], vec![3.0], vec![2.0]],
            MixedMetric::continuous(1),
        )
        .unwrap();
        assert_eq!(assign_cell(&[3.0], &cb), 3);
        // 1.0 is equidistant from cells 1 and 4
        assert_eq!(assign_cell(&[1.0], &cb), 1);
        assert_eq!(assign_cell(&[1.01], &cb), 4);
    }

    #[test]
    fn deterministic_for_seed() {
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|i| vec![((i * 37) % 101) as f64 / 10.0, ((i * 13) % 7) as f64])
            .collect();
        let t = table(
            vec![ColumnSpec::continuous("x"), ColumnSpec::continuous("y")],
            rows,
        );
        let a = train_codebook(&t, 6, 0.001, 42).unwrap();
        let b = train_codebook(&t, 6, 0.001, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.history.windows(2).all(|w| w[1] <= w[0]));
    }
}
