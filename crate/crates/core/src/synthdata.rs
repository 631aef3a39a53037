//! Multinomial-logit data with an inhomogeneous first feature.
//!
//! `X1` is 1 with probability 1/5 and -8 otherwise; the remaining features
//! are independent standard normals. Labels follow softmax weights
//! `exp(x . beta_j)` with standard-normal coefficients drawn once per
//! dataset. The large negative mode of `X1` makes most points easy to
//! classify and the rest hard, so marginal and conditional coverage differ.

use ndarray::{Array2, ArrayView1};
use rand_distr::{Distribution, StandardNormal};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::models::SyntheticModelSpec;
use crate::rng::RandomSource;

pub const X1_HIGH: f64 = 1.0;
pub const X1_LOW: f64 = -8.0;
pub const X1_HIGH_PROB: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub dataset: LabeledDataset,
    pub spec: SyntheticModelSpec,
    pub seed: u64,
}

/// Draws a label from the softmax law of `spec` at `x`.
pub fn sample_label(
    spec: &SyntheticModelSpec,
    x: ArrayView1<'_, f64>,
    rng: &mut RandomSource,
) -> usize {
    let w = spec.class_probabilities(x);
    let u = rng.uniform();
    let mut acc = 0.0;
    for (j, wj) in w.iter().enumerate() {
        acc += wj;
        if u < acc {
            return j;
        }
    }
    // u landed in the rounding gap above the last partial sum
    w.iter().rposition(|&wj| wj > 0.0).unwrap_or(w.len() - 1)
}

/// Standard-normal coefficient matrix with `classes` rows.
pub fn random_spec(
    features: usize,
    classes: usize,
    rng: &mut RandomSource,
) -> Result<SyntheticModelSpec> {
    let beta = Array2::from_shape_simple_fn((classes, features), || StandardNormal.sample(rng));
    SyntheticModelSpec::new(beta)
}

fn inhomogeneous_row(p: usize, rng: &mut RandomSource) -> impl Iterator<Item = f64> + '_ {
    let x1 = if rng.uniform() < X1_HIGH_PROB {
        X1_HIGH
    } else {
        X1_LOW
    };
    std::iter::once(x1).chain((1..p).map(move |_| StandardNormal.sample(&mut *rng)))
}

/// `n` rows with inhomogeneous features and labels drawn from `spec`.
pub fn sample_inhomogeneous(
    spec: &SyntheticModelSpec,
    n: usize,
    rng: &mut RandomSource,
) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::invalid("need at least one row"));
    }
    let p = spec.num_features();
    let mut x = Array2::zeros((n, p));
    let mut labels = Vec::with_capacity(n);
    for mut row in x.rows_mut() {
        for (slot, v) in row.iter_mut().zip(inhomogeneous_row(p, rng)) {
            *slot = v;
        }
        labels.push(sample_label(spec, row.view(), rng));
    }
    LabeledDataset::new(x, labels, spec.num_classes())
}

/// `n` rows with i.i.d. standard-normal features and labels drawn from `spec`.
pub fn sample_from_spec(
    spec: &SyntheticModelSpec,
    n: usize,
    rng: &mut RandomSource,
) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::invalid("need at least one row"));
    }
    let p = spec.num_features();
    let x = Array2::from_shape_simple_fn((n, p), || StandardNormal.sample(&mut *rng));
    let labels = x
        .rows()
        .into_iter()
        .map(|row| sample_label(spec, row, rng))
        .collect();
    LabeledDataset::new(x, labels, spec.num_classes())
}

/// Draws fresh coefficients, then `n` rows. The default experiment uses
/// `p = 10` features and `C = 10` classes.
pub fn generate_multinomial_inhomogeneous(
    n: usize,
    features: usize,
    classes: usize,
    rng: &mut RandomSource,
) -> Result<SyntheticDataset> {
    let seed = rng.seed();
    let spec = random_spec(features, classes, rng)?;
    let dataset = sample_inhomogeneous(&spec, n, rng)?;
    Ok(SyntheticDataset {
        dataset,
        spec,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_feature_mixture() {
        let d =
            generate_multinomial_inhomogeneous(100_000, 10, 10, &mut RandomSource::new(5)).unwrap();
        let col = d.dataset.features().column(0);
        let mean = col.mean().unwrap();
        let high = col.iter().filter(|&&v| v == X1_HIGH).count() as f64 / 1e5;
        assert!(col.iter().all(|&v| v == X1_HIGH || v == X1_LOW));
        // 0.2 * 1 + 0.8 * (-8) = -6.2; sd of the mean is 3.6e-3 * 9 / ... ~0.013
        assert!((mean + 6.2).abs() < 0.03, "{mean}");
        assert!((high - 0.2).abs() < 0.005, "{high}");
    }

    #[test]
    fn other_features_are_standard_normal() {
        let d =
            generate_multinomial_inhomogeneous(20_000, 4, 3, &mut RandomSource::new(6)).unwrap();
        for j in 1..4 {
            let col = d.dataset.features().column(j);
            let mean = col.mean().unwrap();
            let var = col.var(0.0);
            assert!(
                mean.abs() < 0.03 && (var - 1.0).abs() < 0.05,
                "{mean} {var}"
            );
        }
    }

    #[test]
    fn labels_follow_softmax_at_fixed_point() {
        let mut rng = RandomSource::new(7);
        let spec = random_spec(10, 10, &mut rng).unwrap();
        let x = ndarray::Array1::from_shape_fn(10, |j| {
            if j == 0 {
                X1_HIGH
            } else {
                0.3 * j as f64 - 1.0
            }
        });
        let w = spec.class_probabilities(x.view());
        let draws = 100_000;
        let mut counts = [0usize; 10];
        for _ in 0..draws {
            counts[sample_label(&spec, x.view(), &mut rng)] += 1;
        }
        let tv: f64 = counts
            .iter()
            .zip(&w)
            .map(|(&c, wj)| (c as f64 / draws as f64 - wj).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.01, "{tv}");
    }

    #[test]
    fn reproducible_by_seed() {
        let a = generate_multinomial_inhomogeneous(50, 10, 10, &mut RandomSource::new(1)).unwrap();
        let b = generate_multinomial_inhomogeneous(50, 10, 10, &mut RandomSource::new(1)).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.spec, b.spec);
        assert!(generate_multinomial_inhomogeneous(0, 10, 10, &mut RandomSource::new(1)).is_err());
    }
}
