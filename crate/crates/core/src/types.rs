use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sum tolerance for an already-normalized vector.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-8;
/// Widest sum deviation that is still repaired by renormalization.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;

/// Class-probability estimates for a single sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    probs: Vec<f64>,
}

impl ProbabilityVector {
    /// Validates raw probabilities. Vectors whose sum is within
    /// [`RENORMALIZE_TOLERANCE`] of one are divided by their sum.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("probability vector is empty"));
        }
        if let Some(bad) = probs
            .iter()
            .find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0)
        {
            return Err(Error::invalid(format!("probability {bad} outside [0, 1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > RENORMALIZE_TOLERANCE {
            return Err(Error::invalid(format!("probabilities sum to {sum}")));
        }
        if (sum - 1.0).abs() <= NORMALIZATION_TOLERANCE {
            return Ok(Self { probs });
        }
        Ok(Self {
            probs: probs.into_iter().map(|p| (p / sum).min(1.0)).collect(),
        })
    }

    /// Normalizes nonnegative finite weights. Used by the built-in models.
    pub(crate) fn from_weights(mut weights: Vec<f64>) -> Self {
        let sum: f64 = weights.iter().sum();
        debug_assert!(sum > 0.0 && sum.is_finite());
        for w in &mut weights {
            *w = (*w / sum).min(1.0);
        }
        Self { probs: weights }
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, class: usize) -> f64 {
        self.probs[class]
    }
}

/// A subset of `{0, .., C-1}`, kept sorted. May be empty.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PredictionSet {
    members: Vec<usize>,
}

impl PredictionSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(members: impl IntoIterator<Item = usize>, num_classes: usize) -> Result<Self> {
        let mut members: Vec<usize> = members.into_iter().collect();
        if let Some(&bad) = members.iter().find(|&&m| m >= num_classes) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        members.sort_unstable();
        members.dedup();
        Ok(Self { members })
    }

    pub(crate) fn from_sorted_unique(members: Vec<usize>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        Self { members }
    }

    pub fn contains(&self, label: usize) -> bool {
        self.members.binary_search(&label).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn is_subset(&self, other: &PredictionSet) -> bool {
        self.members.iter().all(|m| other.contains(*m))
    }
}

/// Miscoverage level `alpha`, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct CalibrationLevel(f64);

impl CalibrationLevel {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 0.0 && alpha < 1.0 {
            Ok(Self(alpha))
        } else {
            Err(Error::invalid(format!("alpha {alpha} not in (0, 1)")))
        }
    }

    pub fn alpha(self) -> f64 {
        self.0
    }

    /// Target coverage `1 - alpha`.
    pub fn coverage(self) -> f64 {
        1.0 - self.0
    }
}

impl TryFrom<f64> for CalibrationLevel {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<CalibrationLevel> for f64 {
    fn from(level: CalibrationLevel) -> f64 {
        level.0
    }
}
