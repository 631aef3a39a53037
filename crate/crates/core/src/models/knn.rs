use std::sync::Arc;

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;

use super::{ModelFactory, ProbabilityModel};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::types::ProbabilityVector;

/// k-nearest-neighbour class frequencies with add-`1/C` smoothing.
///
/// Distance ties are broken by a random rank assigned to each training row
/// at fit time, so the fitted model depends on row order only through the
/// seed.
#[derive(Debug, Clone)]
pub struct KnnModel {
    features: Array2<f64>,
    labels: Vec<usize>,
    tiebreak: Vec<usize>,
    num_classes: usize,
    k: usize,
}

impl KnnModel {
    pub fn fit(data: &LabeledDataset, k: usize, rng: &mut RandomSource) -> Result<Self> {
        if k == 0 || k > data.len() {
            return Err(Error::invalid(format!(
                "k = {k} must be in 1..={}",
                data.len()
            )));
        }
        let mut tiebreak: Vec<usize> = (0..data.len()).collect();
        tiebreak.shuffle(rng);
        Ok(Self {
            features: data.features().clone(),
            labels: data.labels().to_vec(),
            tiebreak,
            num_classes: data.num_classes(),
            k,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Raw neighbour counts per class.
    pub fn neighbor_counts(&self, x: ArrayView1<'_, f64>) -> Vec<usize> {
        let mut dist: Vec<(f64, usize, usize)> = self
            .features
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                let d: f64 = row
                    .iter()
                    .zip(x.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (d, self.tiebreak[i], i)
            })
            .collect();
        let cmp = |a: &(f64, usize, usize), b: &(f64, usize, usize)| {
            a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
        };
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, cmp);
        }
        let mut counts = vec![0; self.num_classes];
        for &(_, _, i) in &dist[..self.k] {
            counts[self.labels[i]] += 1;
        }
        counts
    }
}

impl ProbabilityModel for KnnModel {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn predict_proba(&self, x: ArrayView1<'_, f64>) -> ProbabilityVector {
        let prior = 1.0 / self.num_classes as f64;
        let weights = self
            .neighbor_counts(x)
            .into_iter()
            .map(|c| c as f64 + prior)
            .collect();
        ProbabilityVector::from_weights(weights)
    }
}

/// Fits [`KnnModel`]; `k = None` uses `ceil(sqrt(n))`.
#[derive(Debug, Clone, Default)]
pub struct KnnFactory {
    pub k: Option<usize>,
}

impl ModelFactory for KnnFactory {
    fn fit(
        &self,
        data: &LabeledDataset,
        rng: &mut RandomSource,
    ) -> Result<Arc<dyn ProbabilityModel>> {
        let k = self
            .k
            .unwrap_or_else(|| (data.len() as f64).sqrt().ceil() as usize)
            .min(data.len());
        Ok(Arc::new(KnnModel::fit(data, k, rng)?))
    }
}
