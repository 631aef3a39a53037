use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use adaptive_conformal::harness::{run_experiment, write_report, ExperimentConfig};
use adaptive_conformal::Error;
use clap::Parser;

/// Run repeated conformal classification experiments and write a report.
#[derive(Debug, Parser)]
#[command(name = "adaptive-conformal", version)]
struct Cli {
    /// key=value configuration file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,

    /// CSV dataset (header x0..x{p-1},y)
    #[arg(long)]
    data: Option<String>,
    /// Use the simulated multinomial data (default when --data is absent)
    #[arg(long)]
    synthetic: bool,
    #[arg(long)]
    features: Option<String>,
    #[arg(long)]
    classes: Option<String>,
    /// sc, cv+, jk+ or hcc
    #[arg(long)]
    method: Option<String>,
    /// oracle, logistic or knn
    #[arg(long = "black-box")]
    black_box: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// Number of folds for cv+
    #[arg(long)]
    folds: Option<String>,
    #[arg(long = "n-train")]
    n_train: Option<String>,
    #[arg(long = "n-test")]
    n_test: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Repetitions run in parallel
    #[arg(long)]
    jobs: Option<String>,
    /// Report path (stdout when absent)
    #[arg(long)]
    output: Option<String>,
    /// csv or json
    #[arg(long)]
    format: Option<String>,
    /// Write the first repetition's simulated data to this CSV path
    #[arg(long = "emit-data")]
    emit_data: Option<String>,
    #[arg(long = "train-fraction")]
    train_fraction: Option<String>,
    #[arg(long)]
    l2: Option<String>,
    #[arg(long = "max-iter")]
    max_iter: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long = "knn-k")]
    knn_k: Option<String>,
    #[arg(long = "wsc-delta")]
    wsc_delta: Option<String>,
    #[arg(long = "wsc-directions")]
    wsc_directions: Option<String>,
    /// Record wall time per repetition (reports are then not reproducible)
    #[arg(long)]
    timing: bool,
}

impl Cli {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut push = |key: &'static str, value: &Option<String>| {
            if let Some(v) = value {
                out.push((key, v.clone()));
            }
        };
        push("data", &self.data);
        push("features", &self.features);
        push("classes", &self.classes);
        push("method", &self.method);
        push("black-box", &self.black_box);
        push("alpha", &self.alpha);
        push("folds", &self.folds);
        push("n-train", &self.n_train);
        push("n-test", &self.n_test);
        push("reps", &self.reps);
        push("seed", &self.seed);
        push("jobs", &self.jobs);
        push("output", &self.output);
        push("format", &self.format);
        push("emit-data", &self.emit_data);
        push("train-fraction", &self.train_fraction);
        push("l2", &self.l2);
        push("max-iter", &self.max_iter);
        push("tol", &self.tol);
        push("knn-k", &self.knn_k);
        push("wsc-delta", &self.wsc_delta);
        push("wsc-directions", &self.wsc_directions);
        if self.synthetic {
            out.push(("synthetic", "true".into()));
        }
        if self.timing {
            out.push(("timing", "true".into()));
        }
        out
    }

    fn build_config(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_kv(&std::fs::read_to_string(path)?)?;
        }
        for (key, value) in self.overrides() {
            cfg.set(key, &value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match cli.build_config() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e @ Error::TooManyFailures { .. }) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let written = match &cfg.output {
        Some(path) => adaptive_conformal::harness::emit_report(&result, cfg.format, path),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_report(&result, cfg.format, &mut lock).and_then(|_| Ok(lock.flush()?))
        }
    };
    if let Err(e) = written {
        eprintln!("error writing report: {e}");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
