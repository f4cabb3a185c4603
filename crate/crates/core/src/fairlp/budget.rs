use serde::{Deserialize, Serialize};

use super::{FairLpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintKind {
    /// Demographic parity.
    Dp,
    /// Equal opportunity (true-positive rates).
    Eop,
    /// Predictive equality (false-positive rates).
    Pe,
    /// Equal accuracy.
    Ea,
    /// Local individual fairness, one row per neighbor pair.
    Ind(usize),
}

impl ConstraintKind {
    pub fn label(self) -> String {
        match self {
            ConstraintKind::Dp => "DP".into(),
            ConstraintKind::Eop => "EOp".into(),
            ConstraintKind::Pe => "PE".into(),
            ConstraintKind::Ea => "EA".into(),
            ConstraintKind::Ind(n) => format!("IF{n}"),
        }
    }

    pub const GROUP: [ConstraintKind; 4] = [
        ConstraintKind::Dp,
        ConstraintKind::Eop,
        ConstraintKind::Pe,
        ConstraintKind::Ea,
    ];
}

/// Tolerances for each fairness notion; `None` means inactive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FairnessBudget {
    pub dp: Option<f64>,
    pub eop: Option<f64>,
    pub pe: Option<f64>,
    pub ea: Option<f64>,
    pub ind: Option<f64>,
}

impl FairnessBudget {
    pub fn inactive() -> Self {
        Self::default()
    }

    pub fn with_dp(mut self, eps: f64) -> Self {
        self.dp = Some(eps);
        self
    }

    pub fn with_eop(mut self, eps: f64) -> Self {
        self.eop = Some(eps);
        self
    }

    pub fn with_pe(mut self, eps: f64) -> Self {
        self.pe = Some(eps);
        self
    }

    /// Equalized odds: equal opportunity and predictive equality sharing `eps`.
    pub fn with_equalized_odds(mut self, eps: f64) -> Self {
        self.eop = Some(eps);
        self.pe = Some(eps);
        self
    }

    pub fn with_ea(mut self, eps: f64) -> Self {
        self.ea = Some(eps);
        self
    }

    pub fn with_ind(mut self, eps: f64) -> Self {
        self.ind = Some(eps);
        self
    }

    pub fn is_equalized_odds(&self) -> bool {
        self.eop.is_some() && self.eop == self.pe
    }

    pub fn get(&self, kind: ConstraintKind) -> Option<f64> {
        match kind {
            ConstraintKind::Dp => self.dp,
            ConstraintKind::Eop => self.eop,
            ConstraintKind::Pe => self.pe,
            ConstraintKind::Ea => self.ea,
            ConstraintKind::Ind(_) => self.ind,
        }
    }

    pub fn any_active(&self) -> bool {
        [self.dp, self.eop, self.pe, self.ea, self.ind]
            .iter()
            .any(Option::is_some)
    }

    /// Same active set with every budget replaced by `eps`.
    pub fn scaled_to(&self, eps: f64) -> Self {
        let set = |o: Option<f64>| o.map(|_| eps);
        FairnessBudget {
            dp: set(self.dp),
            eop: set(self.eop),
            pe: set(self.pe),
            ea: set(self.ea),
            ind: set(self.ind),
        }
    }

    /// Active-set label such as `DP+EOd+IF`; `none` when nothing is active.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.dp.is_some() {
            parts.push("DP");
        }
        if self.is_equalized_odds() {
            parts.push("EOd");
        } else {
            if self.eop.is_some() {
                parts.push("EOp");
            }
            if self.pe.is_some() {
                parts.push("PE");
            }
        }
        if self.ea.is_some() {
            parts.push("EA");
        }
        if self.ind.is_some() {
            parts.push("IF");
        }
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }

    /// Parses an active-set label (`DP+EOd`, `EA`, `none`) into a budget with
    /// every active entry set to `eps`.
    pub fn from_label(label: &str, eps: f64) -> Result<Self> {
        let mut b = FairnessBudget::inactive();
        if label.eq_ignore_ascii_case("none") {
            return Ok(b);
        }
        for part in label.split('+').map(str::trim) {
            match part.to_ascii_uppercase().as_str() {
                "DP" => b.dp = Some(eps),
                "EOP" => b.eop = Some(eps),
                "PE" => b.pe = Some(eps),
                "EOD" => b = b.with_equalized_odds(eps),
                "EA" => b.ea = Some(eps),
                "IF" | "IND" => b.ind = Some(eps),
                _ => {
                    return Err(FairLpError::InvalidParameter(format!(
                        "unknown constraint `{part}` in `{label}`"
                    )))
                }
            }
        }
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for v in [self.dp, self.eop, self.pe, self.ea, self.ind].into_iter().flatten() {
            if !(v >= 0.0) {
                return Err(FairLpError::InvalidParameter(format!(
                    "budget {v} must be non-negative"
                )));
            }
        }
        Ok(())
    }
}
