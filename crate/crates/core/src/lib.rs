//! Conformal prediction sets for multi-class classification.
//!
//! The crate wraps any class-probability estimator with a calibration layer
//! that produces prediction sets with finite-sample marginal coverage. The
//! conformity score is the generalized inverse quantile score: the smallest
//! nominal level at which the randomized "top-L" set of a label would
//! contain it. Under the true class probabilities the score is uniform, so
//! calibrated sets track the oracle sets and adapt to how hard each point is.
//!
//! Modules, bottom-up:
//!
//! - [`rng`], [`types`], [`data`]: shared domain types, seeded randomness and
//!   the CSV dataset format.
//! - [`oracle_sets`]: sorted probabilities, the generalized quantile `L`, the
//!   randomization cutoff `V` and the randomized set `S`.
//! - [`scores`]: the conformity score (closed form and a bisection oracle).
//! - [`models`]: pluggable probability models (oracle softmax, multinomial
//!   logistic regression, k-NN).
//! - [`calibrate`]: split-conformal, CV+/jackknife+ and the homogeneous
//!   baseline.
//! - [`synthdata`], [`metrics`], [`harness`]: simulation, evaluation and the
//!   experiment runner behind the CLI.
//!
//! ```no_run
//! use adaptive_conformal::calibrate::{split_calibrate, SetPredictor};
//! use adaptive_conformal::data::LabeledDataset;
//! use adaptive_conformal::models::LogisticFactory;
//! use adaptive_conformal::{CalibrationLevel, RandomSource};
//!
//! # fn main() -> adaptive_conformal::Result<()> {
//! let data = LabeledDataset::from_csv_path("train.csv".as_ref())?;
//! let rng = RandomSource::new(7);
//! let alpha = CalibrationLevel::new(0.1)?;
//! let cal = split_calibrate(&data, &LogisticFactory::default(), alpha, 0.5, &rng)?;
//!
//! let mut draws = rng.substream(99);
//! let set = cal.predict_set(data.row(0), draws.uniform(), &mut draws)?;
//! println!("{:?}", set.members());
//! # Ok(())
//! # }
//! ```

pub mod calibrate;
pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod oracle_sets;
pub mod rng;
pub mod scores;
pub mod synthdata;
pub mod types;

pub use error::{Error, Result};
pub use rng::RandomSource;
pub use types::{CalibrationLevel, PredictionSet, ProbabilityVector};
