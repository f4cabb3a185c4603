//! Seeded synthetic joints and sample draws for demos and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{ColumnSpec, FeatureSchema, Group, Sample, SampleTable};
use crate::quantizer::{DiscreteJoint, QuantizerError};

/// Shape of a random joint over `cells` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticJoint {
    pub cells: usize,
    /// 0 gives identical group conditionals; 1 gives disjoint supports
    /// (group a on the lower half of the cells, group b on the upper half).
    pub separation: f64,
    /// Probability of group a.
    pub group_a: f64,
    pub seed: u64,
}

impl SyntheticJoint {
    pub fn new(cells: usize, separation: f64, seed: u64) -> Self {
        SyntheticJoint {
            cells,
            separation,
            group_a: 0.5,
            seed,
        }
    }

    pub fn build(&self) -> Result<DiscreteJoint, QuantizerError> {
        if self.cells == 0 || !(0.0..=1.0).contains(&self.separation) {
            return Err(QuantizerError::InvalidParameter(
                "need cells >= 1 and separation in [0, 1]".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = self.cells;
        let base: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
        let positive: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.95)).collect();
        let tilt = |i: usize, g: usize| -> f64 {
            let lower = 2 * i < n;
            let own = (g == 0) == lower;
            if own {
                1.0
            } else {
                1.0 - self.separation
            }
        };
        let mut weights = vec![[[0.0; 2]; 2]; n];
        for g in 0..2 {
            let prior = if g == 0 { self.group_a } else { 1.0 - self.group_a };
            let raw: Vec<f64> = (0..n).map(|i| base[i] * tilt(i, g)).collect();
            let total: f64 = raw.iter().sum();
            for i in 0..n {
                // shift label rates between groups so group constraints bind
                let shift = if g == 0 { 0.1 } else { -0.1 };
                let p1 = (positive[i] + shift).clamp(0.02, 0.98);
                let mass = prior * raw[i] / total;
                weights[i][g][1] = mass * p1;
                weights[i][g][0] = mass * (1.0 - p1);
            }
        }
        DiscreteJoint::from_weights(weights)
    }
}

/// Draws `count` i.i.d. `(cell, group, label)` triples from `joint`.
pub fn sample_joint(joint: &DiscreteJoint, count: usize, seed: u64) -> Vec<(usize, Group, u8)> {
    let mut cdf = Vec::with_capacity(joint.cells * 4);
    let mut acc = 0.0;
    for (i, cell) in joint.probabilities.iter().enumerate() {
        for g in 0..2 {
            for y in 0..2 {
                acc += cell[g][y];
                cdf.push((acc, i, g, y as u8));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let r = rng.random::<f64>() * acc;
            let k = cdf.partition_point(|e| e.0 <= r).min(cdf.len() - 1);
            let (_, i, g, y) = cdf[k];
            (i, Group::from_index(g), y)
        })
        .collect()
}

/// One-column table whose feature is the cell index, one row per draw.
pub fn sample_table(joint: &DiscreteJoint, count: usize, seed: u64) -> SampleTable {
    let schema = FeatureSchema::new(vec![ColumnSpec::continuous("x")], "group", ["a", "b"], "label")
        .expect("static schema is valid");
    let rows = sample_joint(joint, count, seed)
        .into_iter()
        .map(|(i, group, label)| Sample {
            features: vec![i as f64],
            group,
            label,
        })
        .collect();
    SampleTable::new(schema, rows).expect("rows match schema")
}
