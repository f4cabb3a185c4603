use serde::{Deserialize, Serialize};

use super::{Codebook, QuantizerError, Result};
use crate::dataset::{Group, SampleTable};

/// `P(X = x_i, A = g, Y = y)` over `N` cells, stored as `probabilities[i][g][y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJoint {
    pub cells: usize,
    pub probabilities: Vec<[[f64; 2]; 2]>,
}

impl DiscreteJoint {
    pub fn new(probabilities: Vec<[[f64; 2]; 2]>) -> Result<Self> {
        let joint = DiscreteJoint {
            cells: probabilities.len(),
            probabilities,
        };
        joint.validate()?;
        Ok(joint)
    }

    /// Normalizes non-negative weights into a joint.
    pub fn from_weights(weights: Vec<[[f64; 2]; 2]>) -> Result<Self> {
        let total: f64 = weights.iter().flatten().flatten().sum();
        if !(total > 0.0) {
            return Err(QuantizerError::InvalidJoint("weights sum to zero".into()));
        }
        Self::new(
            weights
                .into_iter()
                .map(|c| c.map(|g| g.map(|w| w / total)))
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells == 0 || self.cells != self.probabilities.len() {
            return Err(QuantizerError::InvalidJoint(format!(
                "expected {} cells, found {}",
                self.cells,
                self.probabilities.len()
            )));
        }
        let mut total = 0.0;
        for &p in self.probabilities.iter().flatten().flatten() {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(QuantizerError::InvalidJoint(format!("entry {p} is not a probability")));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(QuantizerError::InvalidJoint(format!("entries sum to {total}")));
        }
        Ok(())
    }

    pub fn get(&self, cell: usize, group: Group, label: u8) -> f64 {
        self.probabilities[cell][group.index()][label as usize]
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().flatten().flatten().sum()
    }

    /// `P(X = x_i | A = g, Y = y)` for every cell, if the event has mass.
    pub fn conditional(&self, group: Group, label: u8) -> Option<Vec<f64>> {
        let col: Vec<f64> = self
            .probabilities
            .iter()
            .map(|c| c[group.index()][label as usize])
            .collect();
        normalized(col)
    }
}

fn normalized(v: Vec<f64>) -> Option<Vec<f64>> {
    let mass: f64 = v.iter().sum();
    if mass > 0.0 {
        Some(v.into_iter().map(|x| x / mass).collect())
    } else {
        None
    }
}

/// Relative frequency of (cell, group, label) over the table.
pub fn build_joint(table: &SampleTable, codebook: &Codebook) -> Result<DiscreteJoint> {
    if table.is_empty() {
        return Err(QuantizerError::EmptyTable);
    }
    if table.schema.dim() != codebook.dim() {
        return Err(QuantizerError::DimensionMismatch {
            expected: codebook.dim(),
            found: table.schema.dim(),
        });
    }
    let mut counts = vec![[[0u64; 2]; 2]; codebook.cells()];
    for (row, cell) in table.rows.iter().zip(codebook.assign_all(table)) {
        counts[cell][row.group.index()][row.label as usize] += 1;
    }
    let m = table.count() as f64;
    Ok(DiscreteJoint {
        cells: codebook.cells(),
        probabilities: counts
            .into_iter()
            .map(|c| c.map(|g| g.map(|k| k as f64 / m)))
            .collect(),
    })
}

/// Every marginal and conditional vector over cells derived from a joint.
///
/// Conditional views whose conditioning event has zero mass are `None`; the
/// accessors report them as [`QuantizerError::ZeroMass`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityViews {
    pub cells: usize,
    /// `[P(A=a), P(A=b)]`.
    pub group_priors: [f64; 2],
    /// `P(Y=y)` indexed by label.
    pub label_priors: [f64; 2],
    /// `p^y[i] = P(X=x_i, Y=y)`, indexed `[y]`.
    label_joint: [Vec<f64>; 2],
    /// `p^{y,g}[i] = P(X=x_i, Y=y, A=g)`, indexed `[g][y]`.
    full_joint: [[Vec<f64>; 2]; 2],
    /// `p_g[i] = P(X=x_i | A=g)`, indexed `[g]`.
    given_group: [Option<Vec<f64>>; 2],
    /// `p_{g,y}[i] = P(X=x_i | A=g, Y=y)`, indexed `[g][y]`.
    given_group_label: [[Option<Vec<f64>>; 2]; 2],
    /// `p_g^y[i] = P(X=x_i, Y=y | A=g)`, indexed `[g][y]`.
    label_joint_given_group: [[Option<Vec<f64>>; 2]; 2],
}

fn group_name(g: Group) -> &'static str {
    match g {
        Group::A => "a",
        Group::B => "b",
    }
}

impl ProbabilityViews {
    /// `p^y`.
    pub fn label_joint(&self, label: u8) -> &[f64] {
        &self.label_joint[label as usize]
    }

    /// `p^{y,g}`.
    pub fn joint(&self, group: Group, label: u8) -> &[f64] {
        &self.full_joint[group.index()][label as usize]
    }

    /// `p_g`.
    pub fn given_group(&self, group: Group) -> Result<&[f64]> {
        self.given_group[group.index()]
            .as_deref()
            .ok_or_else(|| QuantizerError::ZeroMass(format!("A={}", group_name(group))))
    }

    /// `p_{g,y}`.
    pub fn given_group_label(&self, group: Group, label: u8) -> Result<&[f64]> {
        self.given_group_label[group.index()][label as usize]
            .as_deref()
            .ok_or_else(|| {
                QuantizerError::ZeroMass(format!("A={},Y={}", group_name(group), label))
            })
    }

    /// `p_g^y`.
    pub fn label_joint_given_group(&self, group: Group, label: u8) -> Result<&[f64]> {
        self.label_joint_given_group[group.index()][label as usize]
            .as_deref()
            .ok_or_else(|| QuantizerError::ZeroMass(format!("A={}", group_name(group))))
    }

    pub fn has_group_mass(&self, group: Group) -> bool {
        self.given_group[group.index()].is_some()
    }
}

pub fn views(joint: &DiscreteJoint) -> Result<ProbabilityViews> {
    joint.validate()?;
    let n = joint.cells;
    let column = |g: usize, y: usize| -> Vec<f64> {
        joint.probabilities.iter().map(|c| c[g][y]).collect()
    };
    let full_joint = [[column(0, 0), column(0, 1)], [column(1, 0), column(1, 1)]];
    let label_joint = [0, 1].map(|y| {
        (0..n)
            .map(|i| full_joint[0][y][i] + full_joint[1][y][i])
            .collect::<Vec<f64>>()
    });
    let group_mass: [Vec<f64>; 2] = [0, 1].map(|g| {
        (0..n)
            .map(|i| full_joint[g][0][i] + full_joint[g][1][i])
            .collect::<Vec<f64>>()
    });
    let group_priors = [0, 1].map(|g| group_mass[g].iter().sum::<f64>());
    let label_priors = [0, 1].map(|y| label_joint[y].iter().sum::<f64>());
    let given_group = [0, 1].map(|g| normalized(group_mass[g].clone()));
    let given_group_label =
        [0, 1].map(|g| [0, 1].map(|y| normalized(full_joint[g][y].clone())));
    let label_joint_given_group = [0, 1].map(|g| {
        [0, 1].map(|y| {
            (group_priors[g] > 0.0).then(|| {
                full_joint[g][y]
                    .iter()
                    .map(|p| p / group_priors[g])
                    .collect::<Vec<f64>>()
            })
        })
    });
    Ok(ProbabilityViews {
        cells: n,
        group_priors,
        label_priors,
        label_joint,
        full_joint,
        given_group,
        given_group_label,
        label_joint_given_group,
    })
}
