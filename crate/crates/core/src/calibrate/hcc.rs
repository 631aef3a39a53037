use std::sync::Arc;

use ndarray::ArrayView1;

use super::split::partition_train_calib;
use super::{conformal_quantile, SetPredictor, STREAM_FIT};
use crate::data::LabeledDataset;
use crate::error::Result;
use crate::models::{ModelFactory, ProbabilityModel};
use crate::rng::RandomSource;
use crate::types::{CalibrationLevel, PredictionSet};

/// Homogeneous baseline: one cutoff on `1 - p_y(x)` shared by every point.
#[derive(Debug, Clone)]
pub struct HccCalibrated {
    model: Arc<dyn ProbabilityModel>,
    threshold: f64,
    calib_scores: Vec<f64>,
    alpha: CalibrationLevel,
}

impl HccCalibrated {
    pub fn from_parts(
        model: Arc<dyn ProbabilityModel>,
        calib_scores: Vec<f64>,
        alpha: CalibrationLevel,
    ) -> Result<Self> {
        let threshold = conformal_quantile(&calib_scores, alpha)?;
        Ok(Self {
            model,
            threshold,
            calib_scores,
            alpha,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn predict(&self, x: ArrayView1<'_, f64>) -> PredictionSet {
        let p = self.model.predict_proba(x);
        let members = p
            .as_slice()
            .iter()
            .enumerate()
            .filter(|&(_, &py)| 1.0 - py <= self.threshold)
            .map(|(y, _)| y)
            .collect();
        PredictionSet::from_sorted_unique(members)
    }
}

impl SetPredictor for HccCalibrated {
    fn predict_set(
        &self,
        x: ArrayView1<'_, f64>,
        _u: f64,
        _ties: &mut RandomSource,
    ) -> Result<PredictionSet> {
        Ok(self.predict(x))
    }

    fn calibration_scores(&self) -> &[f64] {
        &self.calib_scores
    }

    fn alpha(&self) -> CalibrationLevel {
        self.alpha
    }
}

/// Same partition and model as [`super::split_calibrate`] with the same
/// source, scored by `1 - p_{Y_i}(X_i)`.
pub fn hcc_calibrate(
    data: &LabeledDataset,
    factory: &dyn ModelFactory,
    alpha: CalibrationLevel,
    train_fraction: f64,
    rng: &RandomSource,
) -> Result<HccCalibrated> {
    let (train, calib) = partition_train_calib(data.len(), train_fraction, rng)?;
    let model = factory.fit(&data.subset(&train)?, &mut rng.substream(STREAM_FIT))?;
    let calib_scores = calib
        .iter()
        .map(|&i| (1.0 - model.predict_proba(data.row(i)).get(data.labels()[i])).clamp(0.0, 1.0))
        .collect();
    HccCalibrated::from_parts(model, calib_scores, alpha)
}
