use serde::{Deserialize, Serialize};

use super::{FairLpError, Result};
use crate::quantizer::Codebook;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborPair {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
    /// `e^{-θ d²}`; the row is `+weight` at `i` and `-weight` at `j`.
    pub weight: f64,
}

/// Sparse `B × N` individual-fairness matrix over close centroid pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborMatrix {
    pub cells: usize,
    pub theta: f64,
    pub eta: f64,
    pub pairs: Vec<NeighborPair>,
}

impl NeighborMatrix {
    /// A matrix with no rows.
    pub fn empty(cells: usize) -> Self {
        NeighborMatrix {
            cells,
            theta: 1.0,
            eta: 0.0,
            pairs: Vec::new(),
        }
    }

    pub fn from_pairs(cells: usize, theta: f64, pairs: &[(usize, usize, f64)]) -> Result<Self> {
        let mut out = Vec::with_capacity(pairs.len());
        let mut eta = 0.0f64;
        for &(i, j, d) in pairs {
            if i >= cells || j >= cells || i == j || !(d >= 0.0) {
                return Err(FairLpError::InvalidParameter(format!(
                    "bad neighbor pair ({i}, {j}, {d})"
                )));
            }
            eta = eta.max(d);
            out.push(NeighborPair {
                i,
                j,
                distance: d,
                weight: (-theta * d * d).exp(),
            });
        }
        Ok(NeighborMatrix {
            cells,
            theta,
            eta,
            pairs: out,
        })
    }

    pub fn rows(&self) -> usize {
        self.pairs.len()
    }

    /// `W x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.pairs
            .iter()
            .map(|p| p.weight * (x[p.i] - x[p.j]))
            .collect()
    }

    /// Dense row `n` of `W`.
    pub fn dense_row(&self, n: usize) -> Vec<f64> {
        let p = &self.pairs[n];
        let mut row = vec![0.0; self.cells];
        row[p.i] = p.weight;
        row[p.j] = -p.weight;
        row
    }
}

/// Linear-interpolated percentile of a sorted slice.
fn percentile_sorted(sorted: &[f64], pct: f64) -> f64 {
    let rank = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

/// Connects every centroid pair whose distance is at most the given
/// percentile of all pairwise distances.
pub fn build_neighbor_matrix(
    codebook: &Codebook,
    percentile: f64,
    theta: f64,
) -> Result<NeighborMatrix> {
    if !(0.0..=100.0).contains(&percentile) {
        return Err(FairLpError::InvalidParameter(format!(
            "percentile must lie in [0, 100], got {percentile}"
        )));
    }
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(FairLpError::InvalidParameter(format!("theta must be >= 0, got {theta}")));
    }
    let n = codebook.cells();
    if n < 2 {
        return Ok(NeighborMatrix {
            theta,
            ..NeighborMatrix::empty(n)
        });
    }
    let mut all = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d = codebook
                .metric
                .distance(&codebook.centroids[i], &codebook.centroids[j]);
            all.push((i, j, d));
        }
    }
    let mut sorted: Vec<f64> = all.iter().map(|p| p.2).collect();
    sorted.sort_by(f64::total_cmp);
    let eta = percentile_sorted(&sorted, percentile);
    let pairs = all
        .into_iter()
        .filter(|p| p.2 <= eta)
        .map(|(i, j, d)| NeighborPair {
            i,
            j,
            distance: d,
            weight: (-theta * d * d).exp(),
        })
        .collect();
    Ok(NeighborMatrix {
        cells: n,
        theta,
        eta,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::MixedMetric;

    fn line(points: &[f64]) -> Codebook {
        Codebook::from_centroids(
            points.iter().map(|&x| vec![x]).collect(),
            MixedMetric::continuous(1),
        )
        .unwrap()
    }

    #[test]
    fn complete_graph_at_full_percentile() {
        let m = build_neighbor_matrix(&line(&[0.0, 1.0, 3.0, 7.0]), 100.0, 1.0).unwrap();
        assert_eq!(m.rows(), 6);
        assert_eq!(m.eta, 7.0);
    }

    #[test]
    fn zero_percentile_keeps_only_minimal_pairs() {
        let m = build_neighbor_matrix(&line(&[0.0, 1.0, 3.0, 7.0]), 0.0, 1.0).unwrap();
        assert_eq!(m.rows(), 1);
        assert_eq!((m.pairs[0].i, m.pairs[0].j), (0, 1));
    }

    #[test]
    fn kernel_weights() {
        let m = build_neighbor_matrix(&line(&[0.0, 0.5]), 100.0, 1.0).unwrap();
        let w = (-0.25f64).exp();
        assert_eq!(m.dense_row(0), vec![w, -w]);
        assert_eq!(m.apply(&[1.0, 0.0]), vec![w]);
    }

    #[test]
    fn interpolated_radius() {
        // distances 1,2,3,4,6,7; rank 0.5*5 = 2.5 → 3.5
        let m = build_neighbor_matrix(&line(&[0.0, 1.0, 3.0, 7.0]), 50.0, 1.0).unwrap();
        assert!((m.eta - 3.5).abs() < 1e-12);
        assert_eq!(m.rows(), 3);
    }

    #[test]
    fn single_cell_has_no_rows() {
        assert_eq!(build_neighbor_matrix(&line(&[0.0]), 3.5, 1.0).unwrap().rows(), 0);
        assert!(build_neighbor_matrix(&line(&[0.0, 1.0]), 101.0, 1.0).is_err());
    }
}
