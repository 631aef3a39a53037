//! Class-probability models.
//!
//! Calibration only ever sees a model through [`ProbabilityModel`]; training
//! goes through a [`ModelFactory`] so that calibrators can refit on arbitrary
//! subsets (one per fold for CV+). Factories must treat training rows
//! exchangeably: the fitted model may not depend on row order.

mod knn;
mod logistic;
mod oracle;

use std::fmt::Debug;
use std::sync::Arc;

use ndarray::ArrayView1;

use crate::data::LabeledDataset;
use crate::error::Result;
use crate::rng::RandomSource;
use crate::types::ProbabilityVector;

pub use knn::{KnnFactory, KnnModel};
pub use logistic::{penalized_cross_entropy, LogisticConfig, LogisticFactory, LogisticModel};
pub use oracle::{OracleFactory, OracleModel, SyntheticModelSpec};

pub trait ProbabilityModel: Send + Sync + Debug {
    fn num_classes(&self) -> usize;

    fn predict_proba(&self, x: ArrayView1<'_, f64>) -> ProbabilityVector;
}

pub trait ModelFactory: Send + Sync {
    fn fit(
        &self,
        data: &LabeledDataset,
        rng: &mut RandomSource,
    ) -> Result<Arc<dyn ProbabilityModel>>;
}

/// In-place softmax with max-logit subtraction.
pub(crate) fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for z in logits.iter_mut() {
        *z = (*z - max).exp();
        sum += *z;
    }
    for z in logits.iter_mut() {
        *z /= sum;
    }
}
