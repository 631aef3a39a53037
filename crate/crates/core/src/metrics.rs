//! Coverage and size statistics for prediction sets.
//!
//! Worst-slice coverage searches slabs `{x : a <= v.x <= b}` along random
//! unit directions `v`. The slab with the lowest coverage among those
//! holding at least a `delta` fraction of points is chosen on one half of the
//! test set and its coverage is reported on the other half, so the minimum
//! is not biased downward by selection.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::types::PredictionSet;

fn check_lengths(sets: &[PredictionSet], labels: &[usize]) -> Result<()> {
    if sets.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: sets.len(),
            right: labels.len(),
        });
    }
    if sets.is_empty() {
        return Err(Error::invalid("no prediction sets"));
    }
    Ok(())
}

pub fn covered(sets: &[PredictionSet], labels: &[usize]) -> Result<Vec<bool>> {
    check_lengths(sets, labels)?;
    Ok(sets
        .iter()
        .zip(labels)
        .map(|(s, &y)| s.contains(y))
        .collect())
}

/// Fraction of points whose set contains the label.
pub fn marginal_coverage(sets: &[PredictionSet], labels: &[usize]) -> Result<f64> {
    let hits = covered(sets, labels)?;
    Ok(hits.iter().filter(|&&c| c).count() as f64 / hits.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SizeMetrics {
    pub avg_size: f64,
    /// Mean size over covered points; `None` when nothing is covered.
    pub avg_size_covered: Option<f64>,
}

pub fn size_metrics(sets: &[PredictionSet], labels: &[usize]) -> Result<SizeMetrics> {
    let hits = covered(sets, labels)?;
    let total: usize = sets.iter().map(PredictionSet::len).sum();
    let (covered_total, covered_count) = sets
        .iter()
        .zip(&hits)
        .filter(|(_, &c)| c)
        .fold((0usize, 0usize), |(t, k), (s, _)| (t + s.len(), k + 1));
    Ok(SizeMetrics {
        avg_size: total as f64 / sets.len() as f64,
        avg_size_covered: (covered_count > 0).then(|| covered_total as f64 / covered_count as f64),
    })
}

/// Coverage and count per group label (e.g. per true class).
pub fn coverage_by_group(
    groups: &[usize],
    sets: &[PredictionSet],
    labels: &[usize],
) -> Result<BTreeMap<usize, (f64, usize)>> {
    let hits = covered(sets, labels)?;
    if groups.len() != hits.len() {
        return Err(Error::LengthMismatch {
            left: groups.len(),
            right: hits.len(),
        });
    }
    let mut acc: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (&g, &c) in groups.iter().zip(&hits) {
        let e = acc.entry(g).or_default();
        e.0 += usize::from(c);
        e.1 += 1;
    }
    Ok(acc
        .into_iter()
        .map(|(g, (h, n))| (g, (h as f64 / n as f64, n)))
        .collect())
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `samples` and
/// Uniform(0, 1).
pub fn ks_uniform(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0, |d: f64, (i, &x)| {
        let x = x.clamp(0.0, 1.0);
        d.max((i as f64 + 1.0) / n - x).max(x - i as f64 / n)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorstSliceOptions {
    /// Minimum fraction of the selection half a slab must hold.
    pub delta: f64,
    pub n_directions: usize,
}

impl Default for WorstSliceOptions {
    fn default() -> Self {
        Self {
            delta: 0.1,
            n_directions: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstSlice {
    /// Coverage of the selected slab on the evaluation half.
    pub coverage: f64,
    /// Coverage of the selected slab on the selection half.
    pub selection_coverage: f64,
    /// Set when no admissible slab existed and marginal coverage was used.
    pub fallback: bool,
    pub direction: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
    pub evaluation_count: usize,
}

/// Window of length at least `min_len` with the smallest mean, found by
/// Dinkelbach iteration on the ratio `sum / length`.
/// Returns `(start, end_exclusive, mean)`.
pub(crate) fn min_mean_window(values: &[f64], min_len: usize) -> (usize, usize, f64) {
    let m = values.len();
    debug_assert!(min_len >= 1 && min_len <= m);
    let mut prefix = Vec::with_capacity(m + 1);
    prefix.push(0.0);
    for v in values {
        prefix.push(prefix.last().unwrap() + v);
    }
    let mean_of = |s: usize, e: usize| (prefix[e] - prefix[s]) / (e - s) as f64;

    let mut best = (0, m, mean_of(0, m));
    loop {
        let lambda = best.2;
        // minimize sum_{i in [s, e)} (v_i - lambda) with e - s >= min_len
        let q = |i: usize| prefix[i] - lambda * i as f64;
        let mut arg_max_start = 0;
        let mut candidate = (0, m, f64::INFINITY);
        for e in min_len..=m {
            let s_new = e - min_len;
            if q(s_new) > q(arg_max_start) {
                arg_max_start = s_new;
            }
            let val = q(e) - q(arg_max_start);
            if val < candidate.2 {
                candidate = (arg_max_start, e, val);
            }
        }
        let next = mean_of(candidate.0, candidate.1);
        if candidate.2 >= -1e-12 || next >= lambda {
            return best;
        }
        best = (candidate.0, candidate.1, next);
    }
}

fn random_direction(p: usize, rng: &mut RandomSource) -> Array1<f64> {
    loop {
        let v: Array1<f64> = Array1::from_shape_simple_fn(p, || StandardNormal.sample(&mut *rng));
        let norm = v.dot(&v).sqrt();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Worst-slice coverage of the indicator `hits` over the rows of `features`.
pub fn worst_slice_coverage_from_hits(
    features: &Array2<f64>,
    hits: &[bool],
    options: &WorstSliceOptions,
    rng: &mut RandomSource,
) -> Result<WorstSlice> {
    let m = hits.len();
    if features.nrows() != m {
        return Err(Error::LengthMismatch {
            left: features.nrows(),
            right: m,
        });
    }
    if !(options.delta > 0.0 && options.delta < 1.0) {
        return Err(Error::invalid(format!(
            "delta = {} not in (0, 1)",
            options.delta
        )));
    }
    if m == 0 || (m as f64) < (1.0 / options.delta) {
        return Err(Error::invalid(format!(
            "worst-slice coverage needs at least 1/delta = {} points, got {m}",
            1.0 / options.delta
        )));
    }
    let marginal = hits.iter().filter(|&&h| h).count() as f64 / m as f64;
    let fallback = |p: usize| WorstSlice {
        coverage: marginal,
        selection_coverage: marginal,
        fallback: true,
        direction: vec![0.0; p],
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
        evaluation_count: m,
    };
    let p = features.ncols();

    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(rng);
    let (selection, evaluation) = perm.split_at(m / 2);
    let min_len = ((options.delta * selection.len() as f64).ceil() as usize).max(1);
    if selection.is_empty()
        || evaluation.is_empty()
        || min_len > selection.len()
        || options.n_directions == 0
    {
        return Ok(fallback(p));
    }

    let mut best: Option<(f64, Array1<f64>, f64, f64)> = None;
    let mut proj: Vec<(f64, f64)> = Vec::with_capacity(selection.len());
    let mut vals = Vec::with_capacity(selection.len());
    for _ in 0..options.n_directions {
        let v = random_direction(p, rng);
        proj.clear();
        proj.extend(
            selection
                .iter()
                .map(|&i| (features.row(i).dot(&v), if hits[i] { 1.0 } else { 0.0 })),
        );
        proj.sort_by(|a, b| a.0.total_cmp(&b.0));
        vals.clear();
        vals.extend(proj.iter().map(|&(_, h)| h));
        let (s, e, mean) = min_mean_window(&vals, min_len);
        if best.as_ref().is_none_or(|b| mean < b.0) {
            best = Some((mean, v, proj[s].0, proj[e - 1].0));
        }
    }
    let (selection_coverage, v, lower, upper) = best.expect("at least one direction");

    let (mut inside, mut hit) = (0usize, 0usize);
    for &i in evaluation {
        let t = features.row(i).dot(&v);
        if t >= lower && t <= upper {
            inside += 1;
            hit += usize::from(hits[i]);
        }
    }
    if inside == 0 {
        return Ok(fallback(p));
    }
    Ok(WorstSlice {
        coverage: hit as f64 / inside as f64,
        selection_coverage,
        fallback: false,
        direction: v.to_vec(),
        lower,
        upper,
        evaluation_count: inside,
    })
}

pub fn worst_slice_coverage(
    features: &Array2<f64>,
    sets: &[PredictionSet],
    labels: &[usize],
    options: &WorstSliceOptions,
    rng: &mut RandomSource,
) -> Result<WorstSlice> {
    let hits = covered(sets, labels)?;
    worst_slice_coverage_from_hits(features, &hits, options, rng)
}

/// Metrics of one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub marginal_coverage: f64,
    pub wsc_coverage: f64,
    pub wsc_fallback: bool,
    pub avg_size: f64,
    pub avg_size_covered: Option<f64>,
    pub n_test: usize,
}

pub fn evaluate(
    features: &Array2<f64>,
    sets: &[PredictionSet],
    labels: &[usize],
    options: &WorstSliceOptions,
    rng: &mut RandomSource,
) -> Result<EvaluationReport> {
    let marginal = marginal_coverage(sets, labels)?;
    let sizes = size_metrics(sets, labels)?;
    let ws = worst_slice_coverage(features, sets, labels, options, rng)?;
    if ws.fallback {
        log::warn!("worst-slice search found no admissible slab; reporting marginal coverage");
    }
    Ok(EvaluationReport {
        marginal_coverage: marginal,
        wsc_coverage: ws.coverage,
        wsc_fallback: ws.fallback,
        avg_size: sizes.avg_size,
        avg_size_covered: sizes.avg_size_covered,
        n_test: sets.len(),
    })
}
