//! Implementations behind the `graphscore` subcommands. The binary is a
//! thin argument parser; everything it does lives here so it can be
//! driven from tests and other programs.
//!
//! Exit-code contract: 0 success, 2 configuration error, 3 data error,
//! 4 numerical failure, 5 verification failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::dataset::{
    read_series, read_sidecar, write_series, write_sidecar, Sidecar, SplitBounds, SERIES_FILE,
    SIDECAR_FILE,
};
use crate::error::Error;
use crate::gpvar::gpvar_generate;
use crate::graph::ScoreMatrix;
use crate::rng::RngStream;
use crate::samplers::{distribution_mean, frechet_mean, sample_graph};
use crate::trainer::{init_scores, train_identification, train_joint, EpochRecord};
use crate::verify::{run_checks, VerifyLevel};

pub const HISTORY_FILE: &str = "history.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SAMPLES_FILE: &str = "samples.jsonl";
pub const FRECHET_FILE: &str = "a0.json";
pub const MEAN_FILE: &str = "mu.json";

/// Fitted filter orders used by the joint-training command: deliberately
/// over-specified relative to the default generator.
pub const JOINT_SPATIAL_ORDER: usize = 3;
pub const JOINT_TEMPORAL_ORDER: usize = 4;

/// Command failure carrying its process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Numerical(String),
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Verification(_) => 5,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Numerical(m) | CliError::Verification(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => CliError::Config(m),
            Error::Data(m) => CliError::Data(m),
            Error::Numerical(m) => CliError::Numerical(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

/// Global flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct GlobalOpts {
    /// Output directory override (`--out`).
    pub out: Option<PathBuf>,
    /// Master seed override (`--seed`), re-seeding every config section.
    pub seed: Option<u64>,
    /// Overwrite existing outputs (`--force`).
    pub force: bool,
}

fn load_config(path: Option<&Path>, opts: &GlobalOpts) -> Result<ExperimentConfig, CliError> {
    let path = path.ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = opts.seed {
        cfg.override_seed(seed);
    }
    if let Some(out) = &opts.out {
        cfg.output.dir = out.display().to_string();
    }
    Ok(cfg)
}

fn ensure_writable(path: &Path, force: bool) -> Result<(), CliError> {
    if path.exists() && !force {
        return Err(CliError::Data(format!(
            "{} exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

/// `generate`: sample the graph, run the GPVAR recursion and write the
/// dataset files.
pub fn cmd_generate(config: Option<&Path>, opts: &GlobalOpts) -> Result<(), CliError> {
    let cfg = load_config(config, opts)?;
    let out = PathBuf::from(&cfg.output.dir);
    fs::create_dir_all(&out)?;
    let series_path = out.join(SERIES_FILE);
    let sidecar_path = out.join(SIDECAR_FILE);
    ensure_writable(&series_path, opts.force)?;
    ensure_writable(&sidecar_path, opts.force)?;

    let graph = crate::gpvar::make_graph(cfg.graph.kind()?, cfg.graph.n, RngStream::new(cfg.graph.seed, 0))?;
    let params = cfg.gpvar.params()?;
    let series = gpvar_generate(&graph, &params, cfg.gpvar.t, RngStream::new(cfg.gpvar.seed, 0))?;
    let splits = SplitBounds::from_fractions(cfg.gpvar.t, 0.7, 0.1);

    write_series(&series_path, &series)?;
    let sidecar = Sidecar {
        graph_seed: cfg.graph.seed,
        series_seed: cfg.gpvar.seed,
        n_nodes: cfg.graph.n,
        length: cfg.gpvar.t,
        edges: graph.edges(),
        theta: params.theta().rows().into_iter().map(|r| r.to_vec()).collect(),
        splits,
    };
    write_sidecar(&sidecar_path, &sidecar)?;
    log::info!(
        "wrote {} ({} steps, {} nodes, {} edges)",
        series_path.display(),
        cfg.gpvar.t,
        cfg.graph.n,
        sidecar.edges.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct MetricsSummary {
    epoch: usize,
    train_mae: f64,
    val_mae: f64,
    edge_precision: f64,
    edge_recall: f64,
    edge_accuracy: f64,
}

impl From<&EpochRecord> for MetricsSummary {
    fn from(r: &EpochRecord) -> Self {
        Self {
            epoch: r.epoch,
            train_mae: r.train_mae,
            val_mae: r.val_mae,
            edge_precision: r.edge_precision,
            edge_recall: r.edge_recall,
            edge_accuracy: r.edge_accuracy,
        }
    }
}

#[derive(Serialize)]
struct RunSummary {
    command: &'static str,
    version: String,
    config: ExperimentConfig,
    final_metrics: MetricsSummary,
    best_metrics: MetricsSummary,
}

fn run_training(command: &'static str, config: Option<&Path>, opts: &GlobalOpts) -> Result<(), CliError> {
    let cfg = load_config(config, opts)?;
    let out = PathBuf::from(&cfg.output.dir);
    let series = read_series(&out.join(SERIES_FILE))?;
    let sidecar = read_sidecar(&out.join(SIDECAR_FILE))?;
    if series.n_nodes() != sidecar.n_nodes {
        return Err(CliError::Data("series and sidecar disagree on the node count".into()));
    }
    let history_path = out.join(HISTORY_FILE);
    let summary_path = out.join(SUMMARY_FILE);
    ensure_writable(&history_path, opts.force)?;
    ensure_writable(&summary_path, opts.force)?;

    let truth = sidecar.graph()?;
    let dist = cfg.distribution.distribution()?;
    let train_cfg = cfg.train_config();
    let train_range = sidecar.splits.train_range();
    let val_range = sidecar.splits.val_range();

    let history = if command == "identify" {
        let params = sidecar.params()?;
        let (history, _) =
            train_identification(&series, train_range, val_range, &params, &truth, &dist, &train_cfg)?;
        history
    } else {
        let (history, _, _) = train_joint(
            &series,
            train_range,
            val_range,
            JOINT_SPATIAL_ORDER,
            JOINT_TEMPORAL_ORDER,
            &truth,
            &dist,
            &train_cfg,
        )?;
        history
    };

    fs::write(&history_path, history_csv(&history))?;
    let best = history
        .iter()
        .min_by(|a, b| a.val_mae.total_cmp(&b.val_mae))
        .expect("history never empty");
    let summary = RunSummary {
        command,
        version: format!("graphscore-v{}", env!("CARGO_PKG_VERSION")),
        config: cfg,
        final_metrics: history.last().expect("history never empty").into(),
        best_metrics: best.into(),
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Data(e.to_string()))?;
    fs::write(&summary_path, json + "\n")?;
    log::info!("wrote {} and {}", history_path.display(), summary_path.display());
    Ok(())
}

/// `identify`: learn the scores with the predictor fixed to the sidecar's
/// true filter coefficients.
pub fn cmd_identify(config: Option<&Path>, opts: &GlobalOpts) -> Result<(), CliError> {
    run_training("identify", config, opts)
}

/// `joint`: learn the scores and an over-specified filter (L = 3, Q = 4,
/// random init) simultaneously.
pub fn cmd_joint(config: Option<&Path>, opts: &GlobalOpts) -> Result<(), CliError> {
    run_training("joint", config, opts)
}

/// `sample`: draw graphs from the configured distribution and write them
/// as line-delimited JSON edge lists, along with the Frechet mean and the
/// expected adjacency.
pub fn cmd_sample(
    config: Option<&Path>,
    count: usize,
    scores: Option<&Path>,
    init: bool,
    opts: &GlobalOpts,
) -> Result<(), CliError> {
    let cfg = load_config(config, opts)?;
    let dist = cfg.distribution.distribution()?;
    let n = cfg.graph.n;
    let phi = match (scores, init) {
        (Some(path), false) => read_scores(path, n, &dist)?,
        (None, true) => init_scores(&dist, n, RngStream::new(cfg.train.seed, 0)),
        (None, false) => {
            return Err(CliError::Config(
                "sample needs either --scores FILE or --init".into(),
            ))
        }
        (Some(_), true) => {
            return Err(CliError::Config("--scores and --init are mutually exclusive".into()))
        }
    };
    dist.validate(&phi)?;

    let out = PathBuf::from(&cfg.output.dir);
    fs::create_dir_all(&out)?;
    for file in [SAMPLES_FILE, FRECHET_FILE, MEAN_FILE] {
        ensure_writable(&out.join(file), opts.force)?;
    }

    let mut lines = String::new();
    for s in 0..count {
        let sample = sample_graph(&phi, &dist, RngStream::new(cfg.train.seed, s as u64))?;
        let edges = serde_json::json!({ "edges": sample.adjacency.edges() });
        writeln!(lines, "{edges}").expect("string write");
    }
    fs::write(out.join(SAMPLES_FILE), lines)?;

    let a0 = frechet_mean(&phi, &dist)?;
    let a0_json = serde_json::json!({ "edges": a0.edges() });
    fs::write(out.join(FRECHET_FILE), format!("{a0_json}\n"))?;

    let mu = distribution_mean(&phi, &dist)?;
    let mu_rows: Vec<Vec<f64>> = mu.rows().into_iter().map(|r| r.to_vec()).collect();
    let mu_json = serde_json::json!({ "mu": mu_rows });
    fs::write(out.join(MEAN_FILE), format!("{mu_json}\n"))?;
    log::info!("wrote {count} samples to {}", out.join(SAMPLES_FILE).display());
    Ok(())
}

fn read_scores(path: &Path, n: usize, dist: &crate::graph::GraphDistribution) -> Result<ScoreMatrix, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let rows: Vec<Vec<f64>> = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("malformed scores file {}: {e}", path.display())))?;
    let n_dummies = match *dist {
        crate::graph::GraphDistribution::Bes => 0,
        crate::graph::GraphDistribution::Sns { n_dummies, .. } => n_dummies,
    };
    if rows.len() != n || rows.iter().any(|r| r.len() != n + n_dummies) {
        return Err(CliError::Data(format!(
            "scores must be {n} x {} for this configuration",
            n + n_dummies
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let values = ndarray::Array2::from_shape_vec((n, n + n_dummies), flat)
        .map_err(|e| CliError::Data(e.to_string()))?;
    Ok(ScoreMatrix::from_values(n, n_dummies, values)?)
}

/// `verify`: run the oracle cross-check suite and print one line per
/// check. Any failure exits with code 5.
pub fn cmd_verify(level: VerifyLevel) -> Result<(), CliError> {
    let results = run_checks(level);
    let mut failures = 0;
    for check in &results {
        let status = if check.passed { "PASS" } else { "FAIL" };
        println!("{status} {:<32} {}", check.name, check.detail);
        if !check.passed {
            failures += 1;
        }
    }
    println!("{} checks, {} failed", results.len(), failures);
    if failures > 0 {
        Err(CliError::Verification(format!("{failures} verification checks failed")))
    } else {
        Ok(())
    }
}

/// Render the per-epoch history as CSV.
///
/// Floats carry six significant digits. The wall-time column is zeroed:
/// output files are byte-reproducible given a config and seed, and real
/// timings go to the log instead.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from(
        "epoch,train_mae,val_mae,edge_precision,edge_recall,edge_accuracy,\
         baseline_value_mean,grad_variance_trace,instability_flags,wall_ms\n",
    );
    for r in history {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},0",
            r.epoch,
            fmt_g6(r.train_mae),
            fmt_g6(r.val_mae),
            fmt_g6(r.edge_precision),
            fmt_g6(r.edge_recall),
            fmt_g6(r.edge_accuracy),
            fmt_g6(r.baseline_value_mean),
            fmt_g6(r.grad_variance_trace),
            r.instability_flags,
        )
        .expect("string write");
    }
    out
}

/// Six significant digits, plain notation in a sane exponent range.
pub fn fmt_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..6).contains(&exp) {
        format!("{x:.5e}")
    } else {
        let decimals = (5 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g6_formatting() {
        assert_eq!(fmt_g6(0.0), "0");
        assert_eq!(fmt_g6(0.797_884_560_8), "0.797885");
        assert_eq!(fmt_g6(123.456_789), "123.457");
        assert_eq!(fmt_g6(-0.5), "-0.500000");
        assert_eq!(fmt_g6(1.0e-7), "1.00000e-7");
        assert_eq!(fmt_g6(3.0e8), "3.00000e8");
    }

    #[test]
    fn csv_layout() {
        let record = EpochRecord {
            epoch: 0,
            train_mae: 1.25,
            val_mae: 1.5,
            edge_precision: 0.5,
            edge_recall: 0.25,
            edge_accuracy: 0.75,
            baseline_value_mean: 0.0,
            grad_variance_trace: 2.0e-3,
            instability_flags: 3,
            wall_ms: 123.4,
        };
        let csv = history_csv(&[record]);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "epoch,train_mae,val_mae,edge_precision,edge_recall,edge_accuracy,baseline_value_mean,grad_variance_trace,instability_flags,wall_ms"
        );
        assert_eq!(
            lines.next().unwrap(),
            "0,1.25000,1.50000,0.500000,0.250000,0.750000,0,0.00200000,3,0"
        );
    }
}
