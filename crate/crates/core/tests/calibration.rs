//! Statistical behaviour of the calibrators on simulated data.

use adaptive_conformal::calibrate::{cv_calibrate, hcc_calibrate, split_calibrate, SetPredictor};
use adaptive_conformal::metrics::{
    ks_uniform, marginal_coverage, worst_slice_coverage_from_hits, WorstSliceOptions,
};
use adaptive_conformal::models::{KnnFactory, OracleFactory};
use adaptive_conformal::synthdata::generate_multinomial_inhomogeneous;
use adaptive_conformal::{CalibrationLevel, PredictionSet, RandomSource};
use ndarray::Array2;

fn alpha() -> CalibrationLevel {
    CalibrationLevel::new(0.1).unwrap()
}

#[test]
fn oracle_split_threshold_near_coverage_level() {
    let mut rng = RandomSource::new(11);
    let synth = generate_multinomial_inhomogeneous(10_000, 10, 10, &mut rng).unwrap();
    let cal = split_calibrate(
        &synth.dataset,
        &OracleFactory::new(synth.spec.clone()),
        alpha(),
        0.5,
        &rng.split(),
    )
    .unwrap();
    assert_eq!(cal.calib_indices().len(), 5000);
    // oracle scores are uniform, so the quantile sits near 1 - alpha
    assert!(
        (cal.threshold() - 0.9).abs() < 0.02,
        "threshold {}",
        cal.threshold()
    );
}

#[test]
fn cv_plus_oracle_holdout_scores_are_uniform() {
    // KS at the 5% level over 20 seeds; expect about one rejection
    let mut accepted = 0;
    for seed in 0..20 {
        let mut rng = RandomSource::new(seed);
        let synth = generate_multinomial_inhomogeneous(5000, 10, 10, &mut rng).unwrap();
        let cal = cv_calibrate(
            &synth.dataset,
            &OracleFactory::new(synth.spec.clone()),
            5,
            alpha(),
            &rng.split(),
        )
        .unwrap();
        let scores = cal.holdout_scores();
        assert_eq!(scores.len(), 5000);
        if ks_uniform(scores) < 1.36 / (scores.len() as f64).sqrt() {
            accepted += 1;
        }
    }
    assert!(accepted >= 17, "{accepted}/20 seeds accepted");
}

#[test]
fn jackknife_builds_one_model_per_point() {
    let mut rng = RandomSource::new(13);
    let synth = generate_multinomial_inhomogeneous(200, 4, 3, &mut rng).unwrap();
    let cal = cv_calibrate(
        &synth.dataset,
        &KnnFactory::default(),
        200,
        alpha(),
        &rng.split(),
    )
    .unwrap();
    assert_eq!(cal.num_folds(), 200);
    assert_eq!(cal.fold_models().len(), 200);
    let mut folds = cal.fold_of().to_vec();
    folds.sort_unstable();
    assert_eq!(folds, (0..200).collect::<Vec<_>>());
}

struct Evaluated {
    features: Array2<f64>,
    hits: Vec<bool>,
    marginal: f64,
}

fn evaluate_oracle(seed: u64, homogeneous: bool) -> Evaluated {
    let mut rng = RandomSource::new(seed);
    let synth = generate_multinomial_inhomogeneous(3000, 10, 10, &mut rng).unwrap();
    let (train, test) = {
        let idx: Vec<usize> = (0..synth.dataset.len()).collect();
        (
            synth.dataset.subset(&idx[..1000]).unwrap(),
            synth.dataset.subset(&idx[1000..]).unwrap(),
        )
    };
    let factory = OracleFactory::new(synth.spec.clone());
    let predictor: Box<dyn SetPredictor> = if homogeneous {
        Box::new(hcc_calibrate(&train, &factory, alpha(), 0.5, &rng.split()).unwrap())
    } else {
        Box::new(split_calibrate(&train, &factory, alpha(), 0.5, &rng.split()).unwrap())
    };
    let sets: Vec<PredictionSet> = (0..test.len())
        .map(|i| {
            predictor
                .predict_set(test.row(i), rng.uniform(), &mut rng)
                .unwrap()
        })
        .collect();
    let hits: Vec<bool> = sets
        .iter()
        .zip(test.labels())
        .map(|(s, &y)| s.contains(y))
        .collect();
    Evaluated {
        marginal: marginal_coverage(&sets, test.labels()).unwrap(),
        features: test.features().clone(),
        hits,
    }
}

fn options() -> WorstSliceOptions {
    WorstSliceOptions {
        n_directions: 200,
        ..Default::default()
    }
}

const SEEDS: u64 = 20;

#[test]
fn worst_slice_does_not_exceed_marginal() {
    let mut gap = 0.0;
    for seed in 0..SEEDS {
        let ev = evaluate_oracle(seed, false);
        let ws = worst_slice_coverage_from_hits(
            &ev.features,
            &ev.hits,
            &options(),
            &mut RandomSource::new(seed),
        )
        .unwrap();
        assert!(!ws.fallback);
        gap += ws.coverage - ev.marginal;
    }
    // the per-seed gap has sd near 0.03, so the mean has sd near 0.007
    let gap = gap / SEEDS as f64;
    assert!(gap <= 0.02, "mean wsc - marginal = {gap}");
}

#[test]
fn worst_slice_exposes_homogeneous_sets() {
    let ev = evaluate_oracle(21, true);
    let ws = worst_slice_coverage_from_hits(
        &ev.features,
        &ev.hits,
        &options(),
        &mut RandomSource::new(1),
    )
    .unwrap();
    assert!(ev.marginal > 0.85);
    assert!(
        ws.coverage < ev.marginal - 0.05,
        "wsc {} marginal {}",
        ws.coverage,
        ev.marginal
    );
}

/// Orthogonal matrix from Gram-Schmidt on a seeded Gaussian matrix.
fn random_rotation(p: usize, seed: u64) -> Array2<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = RandomSource::new(seed);
    let mut q = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        let mut v: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        for j in 0..i {
            let dot: f64 = (0..p).map(|k| v[k] * q[[j, k]]).sum();
            for k in 0..p {
                v[k] -= dot * q[[j, k]];
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for k in 0..p {
            q[[i, k]] = v[k] / norm;
        }
    }
    q
}

#[test]
fn worst_slice_is_rotation_invariant() {
    let mut diff = 0.0;
    for seed in 0..SEEDS {
        let ev = evaluate_oracle(100 + seed, true);
        let q = random_rotation(ev.features.ncols(), seed);
        let turned = ev.features.dot(&q.t());
        let plain = worst_slice_coverage_from_hits(
            &ev.features,
            &ev.hits,
            &options(),
            &mut RandomSource::new(seed),
        )
        .unwrap();
        let rotated = worst_slice_coverage_from_hits(
            &turned,
            &ev.hits,
            &options(),
            &mut RandomSource::new(seed),
        )
        .unwrap();
        diff += plain.coverage - rotated.coverage;
    }
    let diff = diff / SEEDS as f64;
    assert!(diff.abs() < 0.03, "mean difference {diff}");
}
