use std::sync::Arc;

use ndarray::ArrayView1;

use super::{
    conformal_quantile, SetPredictor, STREAM_FIT, STREAM_PARTITION, STREAM_TIES, STREAM_UNIFORM,
};
use crate::data::{split_indices, LabeledDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::models::{ModelFactory, ProbabilityModel};
use crate::oracle_sets::{sort_probs, SortedProbs};
use crate::rng::RandomSource;
use crate::scores::conformity_score;
use crate::types::{CalibrationLevel, PredictionSet};

/// Split-conformal state: a model fit on the training part and the
/// conformal quantile of scores on the calibration part.
#[derive(Debug, Clone)]
pub struct SplitCalibrated {
    model: Arc<dyn ProbabilityModel>,
    threshold: f64,
    calib_scores: Vec<f64>,
    alpha: CalibrationLevel,
    train_indices: Vec<usize>,
    calib_indices: Vec<usize>,
}

impl SplitCalibrated {
    /// Assembles a calibrated state from an already-fitted model and
    /// precomputed calibration scores.
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
            train_indices: Vec::new(),
            calib_indices: Vec::new(),
        })
    }

    pub fn model(&self) -> &Arc<dyn ProbabilityModel> {
        &self.model
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train_indices
    }

    pub fn calib_indices(&self) -> &[usize] {
        &self.calib_indices
    }

    /// Same model and scores, recalibrated at another level.
    pub fn with_alpha(&self, alpha: CalibrationLevel) -> Result<Self> {
        let mut out = self.clone();
        out.threshold = conformal_quantile(&self.calib_scores, alpha)?;
        out.alpha = alpha;
        Ok(out)
    }

    /// Labels whose score does not exceed the threshold. Zero-probability
    /// labels are never included.
    pub fn predict(
        &self,
        x: ArrayView1<'_, f64>,
        u: f64,
        ties: &mut RandomSource,
    ) -> Result<PredictionSet> {
        let sp = sort_probs(&self.model.predict_proba(x), ties);
        set_below_threshold(&sp, u, self.threshold)
    }
}

pub(crate) fn set_below_threshold(
    sp: &SortedProbs,
    u: f64,
    threshold: f64,
) -> Result<PredictionSet> {
    let mut members = Vec::new();
    for y in 0..sp.num_classes() {
        if sp.prob_of(y) > 0.0 && conformity_score(sp, y, u)?.value() <= threshold {
            members.push(y);
        }
    }
    Ok(PredictionSet::from_sorted_unique(members))
}

impl SetPredictor for SplitCalibrated {
    fn predict_set(
        &self,
        x: ArrayView1<'_, f64>,
        u: f64,
        ties: &mut RandomSource,
    ) -> Result<PredictionSet> {
        self.predict(x, u, ties)
    }

    fn calibration_scores(&self) -> &[f64] {
        &self.calib_scores
    }

    fn alpha(&self) -> CalibrationLevel {
        self.alpha
    }
}

pub(crate) fn partition_train_calib(
    n: usize,
    train_fraction: f64,
    rng: &RandomSource,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "split calibration needs n >= 2, got {n}"
        )));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} not in (0, 1)"
        )));
    }
    let spec = SplitSpec::Fractions(vec![train_fraction, 1.0 - train_fraction]);
    let mut parts = split_indices(n, &spec, &mut rng.substream(STREAM_PARTITION))?;
    let calib = parts.pop().expect("two parts");
    let train = parts.pop().expect("two parts");
    Ok((train, calib))
}

/// Fits on a random `train_fraction` of `data` and calibrates on the rest.
pub fn split_calibrate(
    data: &LabeledDataset,
    factory: &dyn ModelFactory,
    alpha: CalibrationLevel,
    train_fraction: f64,
    rng: &RandomSource,
) -> Result<SplitCalibrated> {
    let (train, calib) = partition_train_calib(data.len(), train_fraction, rng)?;
    let model = factory.fit(&data.subset(&train)?, &mut rng.substream(STREAM_FIT))?;

    let mut uniforms = rng.substream(STREAM_UNIFORM);
    let mut ties = rng.substream(STREAM_TIES);
    let calib_scores = calib
        .iter()
        .map(|&i| {
            let u = uniforms.uniform();
            let sp = sort_probs(&model.predict_proba(data.row(i)), &mut ties);
            Ok(conformity_score(&sp, data.labels()[i], u)?.value())
        })
        .collect::<Result<Vec<_>>>()?;

    let threshold = conformal_quantile(&calib_scores, alpha)?;
    Ok(SplitCalibrated {
        model,
        threshold,
        calib_scores,
        alpha,
        train_indices: train,
        calib_indices: calib,
    })
}
