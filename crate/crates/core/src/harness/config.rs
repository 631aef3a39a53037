//! Experiment configuration.
//!
//! A configuration file holds `key=value` lines (`#` starts a comment). The
//! keys are the long CLI flag names without the leading dashes, and flags
//! given on the command line are applied after the file.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::WorstSliceOptions;
use crate::models::LogisticConfig;
use crate::types::CalibrationLevel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    #[serde(rename = "sc")]
    Split,
    #[serde(rename = "cv+")]
    CvPlus,
    #[serde(rename = "jk+")]
    JackknifePlus,
    #[serde(rename = "hcc")]
    Homogeneous,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sc" => Ok(Method::Split),
            "cv+" => Ok(Method::CvPlus),
            "jk+" => Ok(Method::JackknifePlus),
            "hcc" => Ok(Method::Homogeneous),
            other => Err(Error::invalid(format!(
                "unknown method {other:?} (expected sc, cv+, jk+ or hcc)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Split => "sc",
            Method::CvPlus => "cv+",
            Method::JackknifePlus => "jk+",
            Method::Homogeneous => "hcc",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BlackBox {
    Oracle,
    Logistic,
    Knn,
}

impl FromStr for BlackBox {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(BlackBox::Oracle),
            "logistic" => Ok(BlackBox::Logistic),
            "knn" => Ok(BlackBox::Knn),
            other => Err(Error::invalid(format!(
                "unknown black box {other:?} (expected oracle, logistic or knn)"
            ))),
        }
    }
}

impl fmt::Display for BlackBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlackBox::Oracle => "oracle",
            BlackBox::Logistic => "logistic",
            BlackBox::Knn => "knn",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::invalid(format!(
                "unknown format {other:?} (expected csv or json)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    /// CSV dataset; `None` means synthetic data.
    pub data: Option<PathBuf>,
    pub synthetic: bool,
    pub features: usize,
    pub classes: usize,
    pub method: Method,
    pub black_box: BlackBox,
    pub alpha: f64,
    pub folds: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub reps: usize,
    pub seed: u64,
    pub jobs: usize,
    pub output: Option<PathBuf>,
    pub format: ReportFormat,
    pub emit_data: Option<PathBuf>,
    pub train_fraction: f64,
    pub logistic: LogisticConfig,
    pub knn_k: Option<usize>,
    pub wsc: WorstSliceOptions,
    /// Record wall time per repetition. Off by default so reports are
    /// byte-reproducible.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: None,
            synthetic: false,
            features: 10,
            classes: 10,
            method: Method::Split,
            black_box: BlackBox::Oracle,
            alpha: 0.1,
            folds: 10,
            n_train: 1000,
            n_test: 5000,
            reps: 100,
            seed: 0,
            jobs: 1,
            output: None,
            format: ReportFormat::Csv,
            emit_data: None,
            train_fraction: 0.5,
            logistic: LogisticConfig::default(),
            knn_k: None,
            wsc: WorstSliceOptions::default(),
            timing: false,
        }
    }
}

/// Every recognized key, in help order.
pub const KEYS: &[&str] = &[
    "data",
    "synthetic",
    "features",
    "classes",
    "method",
    "black-box",
    "alpha",
    "folds",
    "n-train",
    "n-test",
    "reps",
    "seed",
    "jobs",
    "output",
    "format",
    "emit-data",
    "train-fraction",
    "l2",
    "max-iter",
    "tol",
    "knn-k",
    "wsc-delta",
    "wsc-directions",
    "timing",
];

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "" | "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::invalid(format!(
            "{key}: expected a boolean, got {value:?}"
        ))),
    }
}

impl ExperimentConfig {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "data" => self.data = Some(PathBuf::from(value)),
            "synthetic" => self.synthetic = parse_bool(key, value)?,
            "features" => self.features = parse_num(key, value)?,
            "classes" => self.classes = parse_num(key, value)?,
            "method" => self.method = value.parse()?,
            "black-box" => self.black_box = value.parse()?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "folds" => self.folds = parse_num(key, value)?,
            "n-train" => self.n_train = parse_num(key, value)?,
            "n-test" => self.n_test = parse_num(key, value)?,
            "reps" => self.reps = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "jobs" => self.jobs = parse_num(key, value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            "emit-data" => self.emit_data = Some(PathBuf::from(value)),
            "train-fraction" => self.train_fraction = parse_num(key, value)?,
            "l2" => self.logistic.l2 = parse_num(key, value)?,
            "max-iter" => self.logistic.max_iter = parse_num(key, value)?,
            "tol" => self.logistic.tol = parse_num(key, value)?,
            "knn-k" => self.knn_k = Some(parse_num(key, value)?),
            "wsc-delta" => self.wsc.delta = parse_num(key, value)?,
            "wsc-directions" => self.wsc.n_directions = parse_num(key, value)?,
            "timing" => self.timing = parse_bool(key, value)?,
            other => {
                return Err(Error::invalid(format!(
                    "unknown configuration key {other:?}"
                )))
            }
        }
        Ok(())
    }

    /// Applies a `key=value` document on top of `self`.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx as u64 + 1,
                message: format!("expected key=value, got {line:?}"),
            })?;
            self.set(key.trim(), value).map_err(|e| Error::Parse {
                line: idx as u64 + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Parses a `key=value` document over the defaults and validates it.
    pub fn parse_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn alpha_level(&self) -> Result<CalibrationLevel> {
        CalibrationLevel::new(self.alpha)
    }

    pub fn validate(&self) -> Result<()> {
        self.alpha_level()?;
        if self.data.is_some() && self.synthetic {
            return Err(Error::invalid("data and synthetic are mutually exclusive"));
        }
        if self.data.is_some() && self.black_box == BlackBox::Oracle {
            return Err(Error::invalid(
                "the oracle black box requires synthetic data",
            ));
        }
        if self.data.is_some() && self.emit_data.is_some() {
            return Err(Error::invalid("emit-data only applies to synthetic data"));
        }
        if self.features == 0 || self.classes < 2 {
            return Err(Error::invalid(
                "synthetic data needs features >= 1 and classes >= 2",
            ));
        }
        if self.reps == 0 {
            return Err(Error::invalid("reps must be at least 1"));
        }
        if self.jobs == 0 {
            return Err(Error::invalid("jobs must be at least 1"));
        }
        if self.n_train < 2 {
            return Err(Error::invalid("n-train must be at least 2"));
        }
        if self.method == Method::CvPlus && !(2..=self.n_train).contains(&self.folds) {
            return Err(Error::invalid(format!(
                "folds = {} must be in 2..={}",
                self.folds, self.n_train
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid("train-fraction must be in (0, 1)"));
        }
        if !(self.wsc.delta > 0.0 && self.wsc.delta < 1.0) {
            return Err(Error::invalid("wsc-delta must be in (0, 1)"));
        }
        if (self.n_test as f64) < 1.0 / self.wsc.delta {
            return Err(Error::invalid(format!(
                "n-test = {} is below 1/wsc-delta",
                self.n_test
            )));
        }
        if !(self.logistic.l2.is_finite() && self.logistic.l2 >= 0.0) {
            return Err(Error::invalid("l2 must be >= 0"));
        }
        if !(self.logistic.tol.is_finite() && self.logistic.tol > 0.0) {
            return Err(Error::invalid("tol must be > 0"));
        }
        if self.knn_k == Some(0) {
            return Err(Error::invalid("knn-k must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_simulation_protocol() {
        let cfg = ExperimentConfig::default();
        assert_eq!((cfg.n_train, cfg.n_test, cfg.reps), (1000, 5000, 100));
        assert_eq!(cfg.alpha, 0.1);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn parses_file_with_comments() {
        let text = "# sweep\nmethod = cv+\nblack-box=logistic  # estimated\nfolds=5\n\nalpha=0.2\n";
        let cfg = ExperimentConfig::parse_kv(text).unwrap();
        assert_eq!(cfg.method, Method::CvPlus);
        assert_eq!(cfg.black_box, BlackBox::Logistic);
        assert_eq!(cfg.folds, 5);
        assert_eq!(cfg.alpha, 0.2);
    }

    #[test]
    fn reports_bad_lines() {
        assert!(matches!(
            ExperimentConfig::parse_kv("method=sc\nnonsense\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            ExperimentConfig::parse_kv("colour=blue"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(ExperimentConfig::parse_kv("alpha=1.5").is_err());
        assert!(ExperimentConfig::parse_kv("method=cqc").is_err());
    }

    #[test]
    fn rejects_inconsistent_sources() {
        assert!(ExperimentConfig::parse_kv("data=x.csv\nsynthetic=true").is_err());
        assert!(ExperimentConfig::parse_kv("data=x.csv\nblack-box=oracle").is_err());
        assert!(ExperimentConfig::parse_kv("data=x.csv\nblack-box=knn").is_ok());
        assert!(ExperimentConfig::parse_kv("method=cv+\nfolds=1").is_err());
        assert!(ExperimentConfig::parse_kv("n-test=5").is_err());
    }

    #[test]
    fn every_key_is_settable() {
        let mut cfg = ExperimentConfig::default();
        for key in KEYS {
            let value = match *key {
                "method" => "jk+",
                "black-box" => "knn",
                "format" => "json",
                "synthetic" | "timing" => "true",
                "alpha" | "train-fraction" | "wsc-delta" | "tol" | "l2" => "0.25",
                "data" | "output" | "emit-data" => "somewhere",
                _ => "7",
            };
            cfg.set(key, value).unwrap_or_else(|e| panic!("{key}: {e}"));
        }
    }
}
