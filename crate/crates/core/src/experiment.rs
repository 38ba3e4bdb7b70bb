//! End-to-end voting experiment: population, `δ̂`, training, evaluation and
//! the emitted artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::scalar::derive_seed;
use crate::surrogate::train::streams;
use crate::surrogate::{evaluate, generate_dataset, Init, train, Dataset, EvalReport, SurrogateError, TrainConfig};
use crate::voting::{generate_population, median_residual, Mechanism, MedianConfig, ParamRanges, VotingError};
use crate::{Population, Real};

pub const POPULATION_STREAM: u64 = 0;

pub const REPORT_FILE: &str = "report.json";
pub const TABLE1_FILE: &str = "table1_row.csv";
pub const PER_COUNTRY_FILE: &str = "per_country.csv";
pub const CURVE_FILE: &str = "training_curve.csv";
pub const TRAIN_TRUTH_FILE: &str = "train_ground_truth.csv";
pub const TEST_TRUTH_FILE: &str = "test_ground_truth.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const TABLE1_HEADER: &str = "mechanism,model_mae,baseline_mae,improvement";
pub const PER_COUNTRY_HEADER: &str = "country,citizens,mae_delta,mae_alpha,mae_q,baseline_mae_q";
pub const CURVE_HEADER: &str = "epoch,mean_loss";
pub const TRUTH_HEADER: &str = "intervention_id,country,q_c,Q_W";

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
}

impl From<VotingError> for ExperimentError {
    fn from(e: VotingError) -> Self {
        ExperimentError::Surrogate(e.into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_countries: usize,
    pub total_citizens: usize,
    pub ranges: ParamRanges,
    /// Overridden by the command line when given there.
    pub mechanism: Option<Mechanism>,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub init: Init,
    pub input_scale: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let m = MedianConfig::default();
        ExperimentConfig {
            seed: 0,
            n_countries: 5,
            total_citizens: 1000,
            ranges: ParamRanges::default(),
            mechanism: None,
            damping: m.damping,
            tol: m.tol,
            max_iter: m.max_iter,
            n_train: t.n_train,
            n_test: t.n_test,
            epochs: t.epochs,
            batch: t.batch,
            lr: t.lr,
            init: t.init,
            input_scale: t.input_scale,
        }
    }
}

impl ExperimentConfig {
    pub fn median(&self) -> MedianConfig {
        MedianConfig {
            damping: self.damping,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            n_train: self.n_train,
            n_test: self.n_test,
            epochs: self.epochs,
            batch: self.batch,
            lr: self.lr,
            init: self.init,
            input_scale: self.input_scale,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }

    /// Parses a config file, or the `config` object of a run manifest.
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        let inner = match value.get("config") {
            Some(c) if value.get("artifacts").is_some() => c.clone(),
            _ => value,
        };
        serde_json::from_value(inner).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn seeds(&self) -> BTreeMap<String, u64> {
        let mut s = BTreeMap::new();
        s.insert("master".into(), self.seed);
        s.insert("population".into(), derive_seed(self.seed, POPULATION_STREAM));
        for (name, stream) in [
            ("delta", streams::DELTA),
            ("train_interventions", streams::TRAIN_INTERVENTIONS),
            ("train_dictators", streams::TRAIN_DICTATORS),
            ("init", streams::INIT),
            ("shuffle", streams::SHUFFLE),
            ("test_interventions", streams::TEST_INTERVENTIONS),
            ("test_dictators", streams::TEST_DICTATORS),
            ("baseline", streams::BASELINE),
            ("floor", streams::FLOOR),
        ] {
            s.insert(name.into(), derive_seed(self.seed, stream));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    pub checks: Vec<Check>,
}

/// Thresholds each mechanism's run is expected to meet.
pub fn verdict(report: &EvalReport) -> Verdict {
    let mut checks = Vec::new();
    let mut at_most = |name: &str, value: f64, threshold: f64| {
        checks.push(Check {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
        })
    };
    match report.mechanism {
        Mechanism::Vcg => {
            let worst = report
                .per_country
                .iter()
                .filter_map(|c| c.mae_delta)
                .fold(0.0, f64::max);
            at_most("max_mae_delta", worst, 1e-6);
            at_most("model_mae", report.model_mae, 0.15);
            at_most("neg_improvement", -report.improvement, -0.90);
        }
        Mechanism::Median => {
            at_most("neg_improvement", -report.improvement, -0.80);
            at_most(
                "max_fixed_point_residual",
                report.max_fixed_point_residual.unwrap_or(f64::INFINITY),
                1e-5,
            );
        }
        Mechanism::Dictator => {
            at_most("improvement", report.improvement, 0.20);
        }
    }
    Verdict {
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    #[serde(flatten)]
    pub eval: EvalReport,
    pub citizens: Vec<usize>,
    pub final_loss: f64,
    pub verdict: Verdict,
}

pub struct ExperimentRun {
    pub config: ExperimentConfig,
    pub mechanism: Mechanism,
    pub population: Population,
    pub report: RunReport,
    pub curve: Vec<f64>,
    pub train: Dataset<Real>,
    pub test: Dataset<Real>,
}

pub fn run_experiment(cfg: &ExperimentConfig, mechanism: Mechanism) -> Result<ExperimentRun, ExperimentError> {
    let median = cfg.median();
    let tcfg = cfg.train();
    tcfg.validate()?;
    let pop: Population = generate_population(
        derive_seed(cfg.seed, POPULATION_STREAM),
        cfg.n_countries,
        cfg.total_citizens,
        &cfg.ranges,
    )?;
    let outcome = train(&pop, mechanism, &tcfg, &median)?;
    let test = generate_dataset(
        mechanism,
        &pop,
        cfg.n_test,
        derive_seed(cfg.seed, streams::TEST_INTERVENTIONS),
        derive_seed(cfg.seed, streams::TEST_DICTATORS),
        &median,
    )?;
    let mut eval = evaluate(&outcome.net, &outcome.delta, &pop, mechanism, &test, cfg.seed, &median)?;
    if mechanism == Mechanism::Median {
        let all = [&outcome.data, &test];
        let worst = all
            .iter()
            .flat_map(|d| d.interventions.iter().zip(&d.ne))
            .map(|(iv, ne)| median_residual(&pop, iv, &ne.q))
            .fold(0.0, f64::max);
        eval.max_fixed_point_residual = Some(worst);
    }
    let verdict = verdict(&eval);
    let report = RunReport {
        eval,
        citizens: pop.sizes(),
        final_loss: outcome.curve.last().copied().unwrap_or(f64::NAN),
        verdict,
    };
    Ok(ExperimentRun {
        config: ExperimentConfig {
            mechanism: Some(mechanism),
            ..cfg.clone()
        },
        mechanism,
        population: pop,
        report,
        curve: outcome.curve,
        train: outcome.data,
        test,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn table1_csv(r: &RunReport) -> String {
    format!(
        "{TABLE1_HEADER}\n{},{},{},{}\n",
        r.eval.mechanism, r.eval.model_mae, r.eval.baseline_mae, r.eval.improvement
    )
}

pub fn per_country_csv(r: &RunReport) -> String {
    let mut s = format!("{PER_COUNTRY_HEADER}\n");
    for c in &r.eval.per_country {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            c.country,
            c.citizens,
            opt(c.mae_delta),
            opt(c.mae_alpha),
            c.mae_q,
            c.baseline_mae_q
        )
        .expect("string write");
    }
    s
}

pub fn curve_csv(curve: &[f64]) -> String {
    let mut s = format!("{CURVE_HEADER}\n");
    for (e, l) in curve.iter().enumerate() {
        writeln!(s, "{e},{l}").expect("string write");
    }
    s
}

pub fn ground_truth_csv(d: &Dataset<Real>) -> String {
    let mut s = format!("{TRUTH_HEADER}\n");
    for (j, ne) in d.ne.iter().enumerate() {
        for (c, q) in ne.q.iter().enumerate() {
            writeln!(s, "{j},{c},{q},{}", ne.q_w).expect("string write");
        }
    }
    s
}

/// Writes `contents` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), ExperimentError> {
    let io = |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    };
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes every artifact of `run` into `out` and returns the SHA-256 of each
/// file by name.
pub fn write_artifacts(run: &ExperimentRun, out: &Path) -> Result<BTreeMap<String, String>, ExperimentError> {
    fs::create_dir_all(out).map_err(|source| ExperimentError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let mut report = serde_json::to_string_pretty(&run.report).expect("serializable report");
    report.push('\n');
    let files = [
        (REPORT_FILE, report),
        (TABLE1_FILE, table1_csv(&run.report)),
        (PER_COUNTRY_FILE, per_country_csv(&run.report)),
        (CURVE_FILE, curve_csv(&run.curve)),
        (TRAIN_TRUTH_FILE, ground_truth_csv(&run.train)),
        (TEST_TRUTH_FILE, ground_truth_csv(&run.test)),
    ];
    let mut hashes = BTreeMap::new();
    for (name, contents) in files {
        write_atomic(&out.join(name), contents.as_bytes())?;
        hashes.insert(name.to_string(), sha256_hex(contents.as_bytes()));
    }
    Ok(hashes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: ExperimentConfig,
    pub seeds: BTreeMap<String, u64>,
    pub artifacts: BTreeMap<String, String>,
    pub duration_secs: f64,
}

pub fn write_manifest(out: &Path, manifest: &RunManifest) -> Result<(), ExperimentError> {
    let mut text = serde_json::to_string_pretty(manifest).expect("serializable manifest");
    text.push('\n');
    write_atomic(&out.join(MANIFEST_FILE), text.as_bytes())
}

/// Runs, writes all artifacts and the manifest; returns the run and manifest.
pub fn run_to_dir(
    cfg: &ExperimentConfig,
    mechanism: Mechanism,
    out: &Path,
    command: &str,
) -> Result<(ExperimentRun, RunManifest), ExperimentError> {
    let start = Instant::now();
    let run = run_experiment(cfg, mechanism)?;
    let artifacts = write_artifacts(&run, out)?;
    let manifest = RunManifest {
        command: command.to_string(),
        config: run.config.clone(),
        seeds: run.config.seeds(),
        artifacts,
        duration_secs: start.elapsed().as_secs_f64(),
    };
    write_manifest(out, &manifest)?;
    Ok((run, manifest))
}
