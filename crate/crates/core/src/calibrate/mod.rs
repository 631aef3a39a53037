//! Calibration of conformity scores into prediction sets.
//!
//! - [`split`]: hold out part of the data, threshold the scores at a
//!   conformal quantile.
//! - [`cvplus`]: K-fold hold-out scores compared fold-by-fold with the test
//!   scores (CV+; jackknife+ when every fold is a single sample).
//! - [`hcc`]: homogeneous baseline thresholding `1 - p_y(x)` with one global
//!   cutoff.
//!
//! All calibrators derive their randomness from fixed substreams of the
//! caller's [`RandomSource`] (0: partition, 1: model fitting, 2: the `U_i`
//! variates, 3: tie-breaking), so two calibrators given the same source see
//! the same partition.

pub mod cvplus;
pub mod hcc;
pub mod split;

use ndarray::ArrayView1;

use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::types::{CalibrationLevel, PredictionSet};

pub use cvplus::{cv_calibrate, CvCalibrated};
pub use hcc::{hcc_calibrate, HccCalibrated};
pub use split::{split_calibrate, SplitCalibrated};

pub(crate) const STREAM_PARTITION: u64 = 0;
pub(crate) const STREAM_FIT: u64 = 1;
pub(crate) const STREAM_UNIFORM: u64 = 2;
pub(crate) const STREAM_TIES: u64 = 3;

/// A calibrated predictor of label sets.
pub trait SetPredictor: Send + Sync {
    /// Set for one feature row. `u` is the test point's uniform variate
    /// (ignored by non-randomized methods); `ties` breaks exact ties among
    /// class probabilities.
    fn predict_set(
        &self,
        x: ArrayView1<'_, f64>,
        u: f64,
        ties: &mut RandomSource,
    ) -> Result<PredictionSet>;

    /// Hold-out scores the predictor was calibrated on.
    fn calibration_scores(&self) -> &[f64];

    fn alpha(&self) -> CalibrationLevel;
}

/// `ceil(coverage * (m + 1))`, ignoring upward rounding error in the product.
pub(crate) fn conformal_rank(alpha: CalibrationLevel, m: usize) -> usize {
    let x = alpha.coverage() * (m as f64 + 1.0);
    (x - 1e-9).ceil().max(0.0) as usize
}

/// The `ceil((1 - alpha)(m + 1))`-th smallest score, or 1 when that rank
/// exceeds the number of scores.
pub fn conformal_quantile(scores: &[f64], alpha: CalibrationLevel) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::invalid("no calibration scores"));
    }
    if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::invalid(format!("score {bad} not in [0, 1]")));
    }
    let k = conformal_rank(alpha, scores.len());
    if k > scores.len() {
        return Ok(1.0);
    }
    if k == 0 {
        return Ok(0.0);
    }
    let mut buf = scores.to_vec();
    let (_, kth, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*kth)
}
