//! L2-regularized multinomial logistic regression.
//!
//! The objective is the mean cross-entropy plus `l2 / 2 * ||W||^2` over all
//! coefficients (intercepts included), minimized from zero with L-BFGS and
//! an Armijo backtracking line search. Rows are put in a canonical order
//! before fitting, so the result is bit-identical for any permutation of the
//! training set.

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1};

use super::{softmax_in_place, ModelFactory, ProbabilityModel};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::types::ProbabilityVector;

const HISTORY: usize = 10;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LogisticConfig {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            max_iter: 5000,
            tol: 1e-8,
        }
    }
}

impl LogisticConfig {
    fn validate(&self) -> Result<()> {
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::invalid(format!("l2 = {} must be >= 0", self.l2)));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::invalid(format!("tol = {} must be > 0", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LogisticModel {
    /// `C x (p + 1)`; the last column holds intercepts.
    coef: Array2<f64>,
    iterations: usize,
    converged: bool,
}

impl LogisticModel {
    pub fn coefficients(&self) -> &Array2<f64> {
        &self.coef
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn fit(data: &LabeledDataset, config: &LogisticConfig) -> Result<Self> {
        config.validate()?;
        if data.len() < data.num_classes() {
            return Err(Error::invalid(format!(
                "need at least {} samples for {} classes, got {}",
                data.num_classes(),
                data.num_classes(),
                data.len()
            )));
        }
        let problem = Problem::canonical(data, config.l2);
        let dim = problem.classes * problem.width;
        let mut w = vec![0.0; dim];
        let mut grad = vec![0.0; dim];
        let mut f = problem.eval(&w, &mut grad);

        let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(HISTORY);
        let mut direction = vec![0.0; dim];
        let mut w_new = vec![0.0; dim];
        let mut g_new = vec![0.0; dim];
        let mut converged = false;
        let mut iterations = 0;

        while iterations < config.max_iter {
            if max_abs(&grad) < config.tol {
                converged = true;
                break;
            }
            iterations += 1;
            two_loop(&history, &grad, &mut direction);
            let mut slope = dot(&direction, &grad);
            if history.is_empty() || slope >= 0.0 {
                history.clear();
                let scale = 1.0 / norm(&grad).max(1.0);
                for (d, g) in direction.iter_mut().zip(&grad) {
                    *d = -g * scale;
                }
                slope = dot(&direction, &grad);
            }

            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..MAX_BACKTRACKS {
                for ((wn, w0), d) in w_new.iter_mut().zip(&w).zip(&direction) {
                    *wn = w0 + step * d;
                }
                let f_try = problem.eval(&w_new, &mut g_new);
                if !f_try.is_finite() {
                    return Err(Error::NumericalFailure {
                        iteration: iterations,
                        message: format!("loss became {f_try}"),
                    });
                }
                if f_try <= f + ARMIJO * step * slope {
                    accepted = Some(f_try);
                    break;
                }
                step *= 0.5;
            }
            let Some(f_next) = accepted else {
                // no decrease representable in floating point
                converged = max_abs(&grad) < config.tol.sqrt();
                break;
            };

            let s: Vec<f64> = w_new.iter().zip(&w).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-16 {
                if history.len() == HISTORY {
                    history.pop_front();
                }
                history.push_back((s, y, 1.0 / sy));
            }
            std::mem::swap(&mut w, &mut w_new);
            std::mem::swap(&mut grad, &mut g_new);
            f = f_next;
        }
        if !converged && max_abs(&grad) < config.tol {
            converged = true;
        }

        let coef =
            Array2::from_shape_vec((problem.classes, problem.width), w).expect("coefficient shape");
        Ok(Self {
            coef,
            iterations,
            converged,
        })
    }
}

impl ProbabilityModel for LogisticModel {
    fn num_classes(&self) -> usize {
        self.coef.nrows()
    }

    fn predict_proba(&self, x: ArrayView1<'_, f64>) -> ProbabilityVector {
        let p = self.coef.ncols() - 1;
        let mut logits: Vec<f64> = self
            .coef
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .take(p)
                    .zip(x.iter())
                    .fold(row[p], |acc, (b, v)| acc + b * v)
            })
            .collect();
        softmax_in_place(&mut logits);
        ProbabilityVector::from_weights(logits)
    }
}

/// Objective value and gradient at `coef` (`C x (p + 1)`, intercepts last).
pub fn penalized_cross_entropy(
    data: &LabeledDataset,
    coef: &Array2<f64>,
    l2: f64,
) -> (f64, Array2<f64>) {
    let problem = Problem::canonical(data, l2);
    assert_eq!(coef.dim(), (problem.classes, problem.width));
    let w: Vec<f64> = coef.iter().copied().collect();
    let mut grad = vec![0.0; w.len()];
    let f = problem.eval(&w, &mut grad);
    (f, Array2::from_shape_vec(coef.dim(), grad).expect("shape"))
}

#[derive(Debug, Clone, Default)]
pub struct LogisticFactory {
    pub config: LogisticConfig,
}

impl LogisticFactory {
    pub fn new(config: LogisticConfig) -> Self {
        Self { config }
    }
}

impl ModelFactory for LogisticFactory {
    fn fit(
        &self,
        data: &LabeledDataset,
        _rng: &mut RandomSource,
    ) -> Result<Arc<dyn ProbabilityModel>> {
        let model = LogisticModel::fit(data, &self.config)?;
        if !model.converged {
            log::debug!("logistic fit stopped after {} iterations", model.iterations);
        }
        Ok(Arc::new(model))
    }
}

/// Design matrix with an appended intercept column, rows in canonical order.
struct Problem {
    x: Vec<f64>,
    labels: Vec<usize>,
    n: usize,
    width: usize,
    classes: usize,
    l2: f64,
}

impl Problem {
    fn canonical(data: &LabeledDataset, l2: f64) -> Self {
        let n = data.len();
        let p = data.num_features();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let (ra, rb) = (data.row(a), data.row(b));
            ra.iter()
                .zip(rb.iter())
                .map(|(u, v)| u.total_cmp(v))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
                .then(data.labels()[a].cmp(&data.labels()[b]))
        });
        let width = p + 1;
        let mut x = Vec::with_capacity(n * width);
        let mut labels = Vec::with_capacity(n);
        for &i in &order {
            x.extend(data.row(i).iter());
            x.push(1.0);
            labels.push(data.labels()[i]);
        }
        Self {
            x,
            labels,
            n,
            width,
            classes: data.num_classes(),
            l2,
        }
    }

    fn eval(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        let (c, width) = (self.classes, self.width);
        grad.fill(0.0);
        let mut loss = 0.0;
        let mut z = vec![0.0; c];
        for (row, &y) in self.x.chunks_exact(width).zip(&self.labels) {
            for (k, zk) in z.iter_mut().enumerate() {
                *zk = dot(&w[k * width..(k + 1) * width], row);
            }
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for zk in &z {
                sum += (zk - max).exp();
            }
            let lse = max + sum.ln();
            loss += lse - z[y];
            for (k, zk) in z.iter().enumerate() {
                let resid = (zk - lse).exp() - if k == y { 1.0 } else { 0.0 };
                for (g, v) in grad[k * width..(k + 1) * width].iter_mut().zip(row) {
                    *g += resid * v;
                }
            }
        }
        let inv_n = 1.0 / self.n as f64;
        let mut penalty = 0.0;
        for (g, wi) in grad.iter_mut().zip(w) {
            *g = *g * inv_n + self.l2 * wi;
            penalty += wi * wi;
        }
        loss * inv_n + 0.5 * self.l2 * penalty
    }
}

fn two_loop(history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, grad: &[f64], out: &mut [f64]) {
    out.copy_from_slice(grad);
    if history.is_empty() {
        return;
    }
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, out);
        for (o, yi) in out.iter_mut().zip(y) {
            *o -= a * yi;
        }
        alphas.push(a);
    }
    let (s, y, _) = history.back().expect("nonempty");
    let gamma = dot(s, y) / dot(y, y);
    for o in out.iter_mut() {
        *o *= gamma;
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, out);
        for (o, si) in out.iter_mut().zip(s) {
            *o += (a - b) * si;
        }
    }
    for o in out.iter_mut() {
        *o = -*o;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomSource;
    use ndarray::Array2;
    use rand::seq::SliceRandom;
    use rand_distr::{Distribution, StandardNormal};

    fn separable_1d() -> LabeledDataset {
        let xs = [-3.0, -2.5, -2.0, -1.5, -1.0, 1.0, 1.5, 2.0, 2.5, 3.0];
        let labels = xs.iter().map(|&x| usize::from(x > 0.0)).collect();
        LabeledDataset::new(
            Array2::from_shape_vec((10, 1), xs.to_vec()).unwrap(),
            labels,
            2,
        )
        .unwrap()
    }

    fn random_instance(n: usize, p: usize, c: usize, seed: u64) -> LabeledDataset {
        let mut rng = RandomSource::new(seed);
        let x = Array2::from_shape_simple_fn((n, p), || StandardNormal.sample(&mut rng));
        let labels = (0..n).map(|i| i % c).collect();
        LabeledDataset::new(x, labels, c).unwrap()
    }

    #[test]
    fn separable_training_accuracy() {
        let data = separable_1d();
        let config = LogisticConfig {
            l2: 1.0,
            ..Default::default()
        };
        let model = LogisticModel::fit(&data, &config).unwrap();
        assert!(model.converged());
        for i in 0..data.len() {
            let p = model.predict_proba(data.row(i));
            let pred = if p.get(1) > p.get(0) { 1 } else { 0 };
            assert_eq!(pred, data.labels()[i]);
        }
    }

    #[test]
    fn shuffled_rows_give_identical_coefficients() {
        let data = random_instance(40, 3, 3, 5);
        let mut idx: Vec<usize> = (0..data.len()).collect();
        idx.shuffle(&mut RandomSource::new(99));
        let shuffled = data.subset(&idx).unwrap();
        let config = LogisticConfig::default();
        let a = LogisticModel::fit(&data, &config).unwrap();
        let b = LogisticModel::fit(&shuffled, &config).unwrap();
        let bits = |m: &LogisticModel| {
            m.coefficients()
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn gradient_matches_finite_differences_at_optimum() {
        let data = random_instance(20, 2, 3, 17);
        let config = LogisticConfig {
            l2: 0.1,
            ..Default::default()
        };
        let model = LogisticModel::fit(&data, &config).unwrap();
        let coef = model.coefficients().clone();
        let (_, grad) = penalized_cross_entropy(&data, &coef, config.l2);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for idx in 0..coef.len() {
            let mut plus = coef.clone();
            let mut minus = coef.clone();
            plus.as_slice_mut().unwrap()[idx] += h;
            minus.as_slice_mut().unwrap()[idx] -= h;
            let fd = (penalized_cross_entropy(&data, &plus, config.l2).0
                - penalized_cross_entropy(&data, &minus, config.l2).0)
                / (2.0 * h);
            worst = worst.max((fd - grad.as_slice().unwrap()[idx]).abs());
        }
        assert!(worst < 1e-4, "{worst}");
        assert!(grad.iter().all(|g| g.abs() < 1e-6));
    }

    #[test]
    fn gradient_matches_finite_differences_away_from_optimum() {
        let data = random_instance(20, 2, 3, 4);
        let coef = Array2::from_shape_fn((3, 3), |(i, j)| 0.3 * i as f64 - 0.2 * j as f64);
        let (_, grad) = penalized_cross_entropy(&data, &coef, 0.05);
        let h = 1e-5;
        for idx in 0..coef.len() {
            let mut plus = coef.clone();
            let mut minus = coef.clone();
            plus.as_slice_mut().unwrap()[idx] += h;
            minus.as_slice_mut().unwrap()[idx] -= h;
            let fd = (penalized_cross_entropy(&data, &plus, 0.05).0
                - penalized_cross_entropy(&data, &minus, 0.05).0)
                / (2.0 * h);
            assert!((fd - grad.as_slice().unwrap()[idx]).abs() < 1e-7);
        }
    }

    #[test]
    fn rejects_too_few_samples_and_bad_config() {
        let data = random_instance(2, 1, 2, 0);
        let three = LabeledDataset::new(data.features().clone(), vec![0, 1], 3).unwrap();
        assert!(LogisticModel::fit(&three, &LogisticConfig::default()).is_err());
        let bad = LogisticConfig {
            l2: -1.0,
            ..Default::default()
        };
        assert!(LogisticModel::fit(&data, &bad).is_err());
    }

    #[test]
    fn absent_class_gets_small_probability() {
        let data = random_instance(30, 2, 2, 8);
        let wide = LabeledDataset::new(data.features().clone(), data.labels().to_vec(), 3).unwrap();
        let model = LogisticModel::fit(&wide, &LogisticConfig::default()).unwrap();
        let p = model.predict_proba(wide.row(0));
        assert!(p.get(2) < 1e-3);
        assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
