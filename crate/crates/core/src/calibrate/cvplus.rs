use std::sync::Arc;

use ndarray::ArrayView1;
use rayon::prelude::*;

use super::{
    conformal_rank, SetPredictor, STREAM_FIT, STREAM_PARTITION, STREAM_TIES, STREAM_UNIFORM,
};
use crate::data::{split_indices, LabeledDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::models::{ModelFactory, ProbabilityModel};
use crate::oracle_sets::sort_probs;
use crate::rng::RandomSource;
use crate::scores::conformity_score;
use crate::types::{CalibrationLevel, PredictionSet};

/// CV+ state: one model per fold, each sample scored by the model that did
/// not see it.
#[derive(Debug, Clone)]
pub struct CvCalibrated {
    fold_models: Vec<Arc<dyn ProbabilityModel>>,
    holdout_scores: Vec<f64>,
    fold_of: Vec<usize>,
    /// Hold-out scores grouped by fold, ascending.
    sorted_fold_scores: Vec<Vec<f64>>,
    alpha: CalibrationLevel,
}

impl CvCalibrated {
    /// Builds the state from fitted fold models and hold-out scores.
    pub fn from_parts(
        fold_models: Vec<Arc<dyn ProbabilityModel>>,
        holdout_scores: Vec<f64>,
        fold_of: Vec<usize>,
        alpha: CalibrationLevel,
    ) -> Result<Self> {
        if holdout_scores.len() != fold_of.len() {
            return Err(Error::LengthMismatch {
                left: holdout_scores.len(),
                right: fold_of.len(),
            });
        }
        if holdout_scores.is_empty() {
            return Err(Error::invalid("no hold-out scores"));
        }
        let k = fold_models.len();
        if let Some(bad) = fold_of.iter().find(|&&f| f >= k) {
            return Err(Error::invalid(format!(
                "fold {bad} out of range for {k} models"
            )));
        }
        let mut sorted_fold_scores = vec![Vec::new(); k];
        for (&s, &f) in holdout_scores.iter().zip(&fold_of) {
            sorted_fold_scores[f].push(s);
        }
        for scores in &mut sorted_fold_scores {
            scores.sort_by(f64::total_cmp);
        }
        Ok(Self {
            fold_models,
            holdout_scores,
            fold_of,
            sorted_fold_scores,
            alpha,
        })
    }

    pub fn num_folds(&self) -> usize {
        self.fold_models.len()
    }

    pub fn fold_models(&self) -> &[Arc<dyn ProbabilityModel>] {
        &self.fold_models
    }

    pub fn holdout_scores(&self) -> &[f64] {
        &self.holdout_scores
    }

    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    /// Number of hold-out scores strictly below each label's test score,
    /// each hold-out score compared with the test score under its own fold
    /// model.
    pub fn strict_counts(
        &self,
        x: ArrayView1<'_, f64>,
        u: f64,
        ties: &mut RandomSource,
    ) -> Result<Vec<usize>> {
        let c = self.fold_models[0].num_classes();
        let mut counts = vec![0usize; c];
        for (model, fold_scores) in self.fold_models.iter().zip(&self.sorted_fold_scores) {
            if fold_scores.is_empty() {
                continue;
            }
            let sp = sort_probs(&model.predict_proba(x), ties);
            for (y, count) in counts.iter_mut().enumerate() {
                let test = conformity_score(&sp, y, u)?.value();
                *count += fold_scores.partition_point(|&s| s < test);
            }
        }
        Ok(counts)
    }

    /// Labels whose strict count is below `(1 - alpha)(n + 1)`.
    pub fn predict(
        &self,
        x: ArrayView1<'_, f64>,
        u: f64,
        ties: &mut RandomSource,
    ) -> Result<PredictionSet> {
        let bound = conformal_rank(self.alpha, self.holdout_scores.len());
        let members = self
            .strict_counts(x, u, ties)?
            .into_iter()
            .enumerate()
            .filter(|&(_, count)| count < bound)
            .map(|(y, _)| y)
            .collect();
        Ok(PredictionSet::from_sorted_unique(members))
    }
}

impl SetPredictor for CvCalibrated {
    fn predict_set(
        &self,
        x: ArrayView1<'_, f64>,
        u: f64,
        ties: &mut RandomSource,
    ) -> Result<PredictionSet> {
        self.predict(x, u, ties)
    }

    fn calibration_scores(&self) -> &[f64] {
        &self.holdout_scores
    }

    fn alpha(&self) -> CalibrationLevel {
        self.alpha
    }
}

/// K-fold CV+ calibration; `folds == data.len()` is the jackknife+.
///
/// Fold models are fitted in parallel on the current rayon pool; each fold
/// draws from its own substream, so results do not depend on the pool size.
pub fn cv_calibrate(
    data: &LabeledDataset,
    factory: &dyn ModelFactory,
    folds: usize,
    alpha: CalibrationLevel,
    rng: &RandomSource,
) -> Result<CvCalibrated> {
    let n = data.len();
    if folds < 2 || folds > n {
        return Err(Error::invalid(format!(
            "number of folds {folds} must be in 2..={n}"
        )));
    }
    let parts = split_indices(
        n,
        &SplitSpec::Folds(folds),
        &mut rng.substream(STREAM_PARTITION),
    )?;

    let mut fold_of = vec![0; n];
    for (k, part) in parts.iter().enumerate() {
        for &i in part {
            fold_of[i] = k;
        }
    }
    let mut uniforms = rng.substream(STREAM_UNIFORM);
    let u: Vec<f64> = (0..n).map(|_| uniforms.uniform()).collect();
    let fit_root = rng.substream(STREAM_FIT);
    let tie_root = rng.substream(STREAM_TIES);

    let fitted = parts
        .par_iter()
        .enumerate()
        .map(|(k, held_out)| {
            let keep: Vec<usize> = (0..n).filter(|&i| fold_of[i] != k).collect();
            let model = factory.fit(&data.subset(&keep)?, &mut fit_root.substream(k as u64))?;
            let mut ties = tie_root.substream(k as u64);
            let scores = held_out
                .iter()
                .map(|&i| {
                    let sp = sort_probs(&model.predict_proba(data.row(i)), &mut ties);
                    Ok(conformity_score(&sp, data.labels()[i], u[i])?.value())
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((model, scores))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut holdout_scores = vec![0.0; n];
    let mut fold_models = Vec::with_capacity(folds);
    for ((model, scores), part) in fitted.into_iter().zip(&parts) {
        for (&i, s) in part.iter().zip(scores) {
            holdout_scores[i] = s;
        }
        fold_models.push(model);
    }
    CvCalibrated::from_parts(fold_models, holdout_scores, fold_of, alpha)
}
