use std::sync::Arc;

use ndarray::{Array2, ArrayView1};

use super::{softmax_in_place, ModelFactory, ProbabilityModel};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::types::ProbabilityVector;

/// Coefficients of a multinomial-logit law: row `j` holds `beta_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticModelSpec {
    beta: Array2<f64>,
}

impl SyntheticModelSpec {
    pub fn new(beta: Array2<f64>) -> Result<Self> {
        if beta.nrows() < 2 || beta.ncols() < 1 {
            return Err(Error::invalid(format!(
                "coefficient matrix {}x{} needs at least 2 classes and 1 feature",
                beta.nrows(),
                beta.ncols()
            )));
        }
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("coefficients must be finite"));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> &Array2<f64> {
        &self.beta
    }

    pub fn num_classes(&self) -> usize {
        self.beta.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.beta.ncols()
    }

    /// Class weights `exp(x . beta_j)` normalized over classes.
    pub fn class_probabilities(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        let mut logits: Vec<f64> = self.beta.rows().into_iter().map(|b| b.dot(&x)).collect();
        softmax_in_place(&mut logits);
        logits
    }
}

/// The true conditional class probabilities of a synthetic law.
#[derive(Debug, Clone)]
pub struct OracleModel {
    spec: SyntheticModelSpec,
}

impl OracleModel {
    pub fn new(spec: SyntheticModelSpec) -> Self {
        Self { spec }
    }
}

impl ProbabilityModel for OracleModel {
    fn num_classes(&self) -> usize {
        self.spec.num_classes()
    }

    fn predict_proba(&self, x: ArrayView1<'_, f64>) -> ProbabilityVector {
        ProbabilityVector::from_weights(self.spec.class_probabilities(x))
    }
}

/// Returns the same oracle whatever it is "trained" on.
#[derive(Debug, Clone)]
pub struct OracleFactory {
    model: Arc<OracleModel>,
}

impl OracleFactory {
    pub fn new(spec: SyntheticModelSpec) -> Self {
        Self {
            model: Arc::new(OracleModel::new(spec)),
        }
    }
}

impl ModelFactory for OracleFactory {
    fn fit(
        &self,
        data: &LabeledDataset,
        _rng: &mut RandomSource,
    ) -> Result<Arc<dyn ProbabilityModel>> {
        if data.num_features() != self.model.spec.num_features() {
            return Err(Error::invalid(format!(
                "oracle expects {} features, data has {}",
                self.model.spec.num_features(),
                data.num_features()
            )));
        }
        Ok(self.model.clone())
    }
}
