use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{BlackBox, ExperimentConfig, Method};
use crate::calibrate::{cv_calibrate, hcc_calibrate, split_calibrate, SetPredictor};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::metrics::{coverage_by_group, evaluate, ks_uniform, EvaluationReport};
use crate::models::{KnnFactory, LogisticFactory, ModelFactory, OracleFactory, SyntheticModelSpec};
use crate::rng::RandomSource;
use crate::synthdata::{random_spec, sample_inhomogeneous};

// substreams of each repetition's source
const STREAM_DATA: u64 = 0;
const STREAM_CALIBRATE: u64 = 1;
const STREAM_TEST_U: u64 = 2;
const STREAM_TEST_TIES: u64 = 3;
const STREAM_WSC: u64 = 4;

/// Reads a dataset in the CSV dataset format.
pub fn ingest_csv(path: &Path) -> Result<LabeledDataset> {
    LabeledDataset::from_csv_path(path)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelCoverage {
    pub label: usize,
    pub coverage: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepetitionReport {
    pub rep: usize,
    #[serde(flatten)]
    pub evaluation: EvaluationReport,
    pub seconds: f64,
    /// KS distance of the calibration scores from Uniform(0, 1); absent for
    /// the homogeneous baseline, whose scores are not uniform by design.
    pub score_ks: Option<f64>,
    pub label_coverage: Vec<LabelCoverage>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepetitionFailure {
    pub rep: usize,
    pub error: String,
}

/// Parameters of the worst-slice estimator, echoed into reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WscMetadata {
    pub delta: f64,
    pub directions: usize,
    pub selection_fraction: f64,
    pub estimator: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub wsc_estimator: WscMetadata,
    pub repetitions: Vec<RepetitionReport>,
    pub failures: Vec<RepetitionFailure>,
}

struct Draw {
    train: LabeledDataset,
    test: LabeledDataset,
    spec: Option<SyntheticModelSpec>,
}

fn draw_data(
    cfg: &ExperimentConfig,
    base: Option<&LabeledDataset>,
    rng: &mut RandomSource,
) -> Result<Draw> {
    match base {
        None => {
            let spec = random_spec(cfg.features, cfg.classes, rng)?;
            let train = sample_inhomogeneous(&spec, cfg.n_train, rng)?;
            let test = sample_inhomogeneous(&spec, cfg.n_test, rng)?;
            Ok(Draw {
                train,
                test,
                spec: Some(spec),
            })
        }
        Some(data) => {
            let needed = cfg.n_train + cfg.n_test;
            if needed > data.len() {
                return Err(Error::invalid(format!(
                    "n-train + n-test = {needed} exceeds the {} rows available",
                    data.len()
                )));
            }
            let mut perm: Vec<usize> = (0..data.len()).collect();
            perm.shuffle(rng);
            Ok(Draw {
                train: data.subset(&perm[..cfg.n_train])?,
                test: data.subset(&perm[cfg.n_train..needed])?,
                spec: None,
            })
        }
    }
}

fn factory_for(
    cfg: &ExperimentConfig,
    spec: Option<&SyntheticModelSpec>,
) -> Result<Box<dyn ModelFactory>> {
    Ok(match cfg.black_box {
        BlackBox::Oracle => {
            let spec =
                spec.ok_or_else(|| Error::invalid("the oracle black box requires synthetic data"))?;
            Box::new(OracleFactory::new(spec.clone()))
        }
        BlackBox::Logistic => Box::new(LogisticFactory::new(cfg.logistic)),
        BlackBox::Knn => Box::new(KnnFactory { k: cfg.knn_k }),
    })
}

fn calibrate(
    cfg: &ExperimentConfig,
    train: &LabeledDataset,
    factory: &dyn ModelFactory,
    rng: &RandomSource,
) -> Result<Arc<dyn SetPredictor>> {
    let alpha = cfg.alpha_level()?;
    Ok(match cfg.method {
        Method::Split => Arc::new(split_calibrate(
            train,
            factory,
            alpha,
            cfg.train_fraction,
            rng,
        )?),
        Method::CvPlus => Arc::new(cv_calibrate(train, factory, cfg.folds, alpha, rng)?),
        Method::JackknifePlus => Arc::new(cv_calibrate(train, factory, train.len(), alpha, rng)?),
        Method::Homogeneous => Arc::new(hcc_calibrate(
            train,
            factory,
            alpha,
            cfg.train_fraction,
            rng,
        )?),
    })
}

fn run_repetition(
    cfg: &ExperimentConfig,
    base: Option<&LabeledDataset>,
    rep: usize,
) -> Result<(RepetitionReport, Option<LabeledDataset>)> {
    let start = Instant::now();
    let rep_rng = RandomSource::new(cfg.seed).substream(rep as u64);
    let draw = draw_data(cfg, base, &mut rep_rng.substream(STREAM_DATA))?;
    let factory = factory_for(cfg, draw.spec.as_ref())?;
    let predictor = calibrate(
        cfg,
        &draw.train,
        factory.as_ref(),
        &rep_rng.substream(STREAM_CALIBRATE),
    )?;

    let mut uniforms = rep_rng.substream(STREAM_TEST_U);
    let mut ties = rep_rng.substream(STREAM_TEST_TIES);
    let sets = (0..draw.test.len())
        .map(|j| predictor.predict_set(draw.test.row(j), uniforms.uniform(), &mut ties))
        .collect::<Result<Vec<_>>>()?;

    let labels = draw.test.labels();
    let evaluation = evaluate(
        draw.test.features(),
        &sets,
        labels,
        &cfg.wsc,
        &mut rep_rng.substream(STREAM_WSC),
    )?;
    let label_coverage = coverage_by_group(labels, &sets, labels)?
        .into_iter()
        .map(|(label, (coverage, count))| LabelCoverage {
            label,
            coverage,
            count,
        })
        .collect();
    let score_ks =
        (cfg.method != Method::Homogeneous).then(|| ks_uniform(predictor.calibration_scores()));

    let emitted = if rep == 0 && cfg.emit_data.is_some() {
        Some(concat_rows(&draw.train, &draw.test)?)
    } else {
        None
    };
    let seconds = if cfg.timing {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    };
    Ok((
        RepetitionReport {
            rep,
            evaluation,
            seconds,
            score_ks,
            label_coverage,
        },
        emitted,
    ))
}

fn concat_rows(a: &LabeledDataset, b: &LabeledDataset) -> Result<LabeledDataset> {
    let features = ndarray::concatenate(
        ndarray::Axis(0),
        &[a.features().view(), b.features().view()],
    )
    .map_err(|e| Error::invalid(e.to_string()))?;
    let labels = a.labels().iter().chain(b.labels()).copied().collect();
    LabeledDataset::new(features, labels, a.num_classes())
}

/// Runs every repetition. Repetition `r` uses the substream `r` of the seed,
/// so results do not depend on `jobs` or scheduling. Fails when more than
/// 10% of repetitions fail.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let base = cfg.data.as_deref().map(ingest_csv).transpose()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    let outcomes: Vec<Result<(RepetitionReport, Option<LabeledDataset>)>> = pool.install(|| {
        (0..cfg.reps)
            .into_par_iter()
            .map(|rep| run_repetition(cfg, base.as_ref(), rep))
            .collect()
    });

    let mut repetitions = Vec::with_capacity(cfg.reps);
    let mut failures = Vec::new();
    for (rep, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok((report, emitted)) => {
                if let (Some(data), Some(path)) = (emitted, cfg.emit_data.as_deref()) {
                    data.write_csv(std::fs::File::create(path)?)?;
                }
                repetitions.push(report);
            }
            Err(e) => {
                log::warn!("repetition {rep} failed: {e}");
                failures.push(RepetitionFailure {
                    rep,
                    error: e.to_string(),
                });
            }
        }
    }
    if failures.len() * 10 > cfg.reps {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total: cfg.reps,
        });
    }
    Ok(ExperimentResult {
        config: cfg.clone(),
        wsc_estimator: WscMetadata {
            delta: cfg.wsc.delta,
            directions: cfg.wsc.n_directions,
            selection_fraction: 0.5,
            estimator: "minimum-coverage slab over random unit directions, selected on one half of the test set and evaluated on the other",
        },
        repetitions,
        failures,
    })
}
