//! The `phenorule` command line. Exit codes: 0 success, 2 usage or config,
//! 3 data, 4 numeric or fit failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::assoc::{run_outcome_analyses_records, AssocReport};
use crate::eval::{
    build_report, cross_validate, make_folds, project_false_positives, smd_records, write_pr_csv, EvalError, FpProjection,
    SmdTable,
};
use crate::ingest::{join_cohort, load_labels, load_notes, load_structured, BinaryField, CohortDataset, IngestError};
use crate::learn::{Hyperparams, LearnError};
use crate::pipeline::{train, ModelSpec, PipelineConfig, PipelineError, PreparedCohort, TrainedPipeline};
use crate::seed;
use crate::synth::{generate_cohort, write_cohort, GeneratorConfig, SynthError};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_FIT: i32 = 4;

pub const COHORT_TABLE_VERSION: u32 = 1;
pub const PROJECTION_VERSION: u32 = 1;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(m: impl ToString) -> Self {
        CliError { code: EXIT_USAGE, message: m.to_string() }
    }
    fn data(m: impl ToString) -> Self {
        CliError { code: EXIT_DATA, message: m.to_string() }
    }
    fn fit(m: impl ToString) -> Self {
        CliError { code: EXIT_FIT, message: m.to_string() }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::data(e)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match &e {
            PipelineError::Learn(LearnError::InvalidParam(_)) => CliError::usage(e),
            PipelineError::Learn(LearnError::NonFinite) => CliError::fit(e),
            _ => CliError::data(e),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match &e {
            EvalError::Fit { .. } => CliError::fit(e),
            EvalError::BadRate { .. } | EvalError::BadLevel(_) => CliError::usage(e),
            _ => CliError::data(e),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "phenorule", version, about = "Phenotype hospitalizations as due to, or incidental to, an infection")]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "PHENORULE_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic cohort.
    Synth(SynthArgs),
    /// Fit featurizers and one classifier on a labeled cohort.
    Train(TrainArgs),
    /// Score patients with a trained model file.
    Score(ScoreArgs),
    /// Cross-validate model specs and compare them.
    Evaluate(EvaluateArgs),
    /// Balance table of structured fields between two groups.
    CohortTable(CohortTableArgs),
    /// Outcome models by vaccination within each label stratum.
    Assoc(AssocArgs),
    /// Expected false positives of a rule applied to a new population.
    ProjectFp(ProjectFpArgs),
}

/// Cohort files. Individual paths override the files under `--data`.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// Directory holding structured.csv, notes.jsonl and labels.csv.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub structured: Option<PathBuf>,
    #[arg(long)]
    pub notes: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

/// Pipeline settings shared by train and evaluate.
#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Drop text terms appearing fewer times than this in the training notes.
    #[arg(long)]
    pub min_count: Option<u64>,
    /// Leave discharge disposition and length of stay out of the features.
    #[arg(long)]
    pub exclude_outcome_features: bool,
    /// JSON file with learner hyperparameters; missing keys keep defaults.
    #[arg(long)]
    pub hyperparams: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub prevalence: Option<f64>,
    /// JSON generator config; missing keys keep defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long)]
    pub spec: ModelSpec,
    #[arg(long)]
    pub seed: u64,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// CSV of `patient_id,probability`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Model specs to run, e.g. `notes:lasso`; all six when omitted.
    #[arg(long, value_delimiter = ',')]
    pub spec: Vec<ModelSpec>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 0.90)]
    pub target_sensitivity: f64,
    #[arg(long, default_value_t = 0.95)]
    pub ci_level: f64,
    /// Also write pr_curves.csv.
    #[arg(long)]
    pub emit_pr_csv: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Json,
    Text,
}

#[derive(Debug, Args)]
pub struct CohortTableArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// `label`, or a yes/no structured column such as `vaccinated`.
    #[arg(long, default_value = "label")]
    pub group_by: String,
    #[arg(long, value_enum, default_value_t = TableFormat::Json)]
    pub format: TableFormat,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AssocArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Add a panel adjusted for age.
    #[arg(long)]
    pub adjust_age: bool,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProjectFpArgs {
    /// Admissions screened.
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub prevalence: f64,
    #[arg(long)]
    pub sensitivity: f64,
    #[arg(long)]
    pub ppv: f64,
    /// Print the full projection as JSON instead of one line.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Serialize)]
pub struct CohortTableReport<'a> {
    pub report_version: u32,
    pub group_by: &'a str,
    pub table: &'a SmdTable,
}

#[derive(Debug, Serialize)]
pub struct ProjectionReport {
    pub report_version: u32,
    #[serde(flatten)]
    pub projection: FpProjection,
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(CliError::usage)?;
    pool.install(|| match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Score(a) => cmd_score(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::CohortTable(a) => cmd_cohort_table(&a),
        Command::Assoc(a) => cmd_assoc(&a),
        Command::ProjectFp(a) => cmd_project_fp(&a),
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::usage(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s.into_bytes()
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(p) => write_file(p, bytes),
        None => std::io::stdout().write_all(bytes).map_err(|e| CliError::usage(format!("stdout: {e}"))),
    }
}

impl DataArgs {
    fn path(&self, explicit: &Option<PathBuf>, file: &str) -> CliResult<PathBuf> {
        match (explicit, &self.data) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(d)) => Ok(d.join(file)),
            (None, None) => Err(CliError::usage(format!("give --data or the path to {file}"))),
        }
    }

    /// Loads and joins the cohort. Labels are read when present, and a
    /// missing labels file is a data error when `need_labels` is set.
    fn load(&self, need_labels: bool) -> CliResult<CohortDataset> {
        let records = load_structured(self.path(&self.structured, "structured.csv")?)?;
        let notes = load_notes(self.path(&self.notes, "notes.jsonl")?)?.notes;
        let labels_path = self.path(&self.labels, "labels.csv").ok();
        let labels = match labels_path {
            Some(p) if p.exists() => Some(load_labels(p)?),
            Some(p) if need_labels => return Err(CliError::data(format!("labels file {} not found", p.display()))),
            None if need_labels => return Err(CliError::data("labels are required")),
            _ => None,
        };
        let (dataset, _) = join_cohort(records, notes, labels)?;
        if need_labels {
            dataset.labels()?;
        }
        Ok(dataset)
    }
}

impl PipelineArgs {
    fn config(&self, seed: u64) -> CliResult<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        if let Some(p) = &self.hyperparams {
            cfg.hyperparams = read_json::<Hyperparams>(p)?;
        }
        if let Some(m) = self.min_count {
            cfg.min_count = m;
        }
        cfg.schema.exclude_outcome_features = self.exclude_outcome_features;
        cfg.hyperparams.seed = seed;
        cfg.hyperparams.validate().map_err(CliError::usage)?;
        if cfg.min_count == 0 {
            return Err(CliError::usage("--min-count must be at least 1"));
        }
        Ok(cfg)
    }
}

fn cmd_synth(a: &SynthArgs) -> CliResult<()> {
    let mut cfg = match &a.config {
        Some(p) => read_json::<GeneratorConfig>(p)?,
        None => GeneratorConfig::default(),
    };
    if let Some(n) = a.n {
        cfg.n_patients = n;
    }
    if let Some(p) = a.prevalence {
        cfg.prevalence = p;
    }
    cfg.seed = a.seed;
    let dataset = generate_cohort(&cfg).map_err(|e| match e {
        SynthError::BadConfig(_) => CliError::usage(e),
        _ => CliError::data(e),
    })?;
    write_cohort(&a.out, &dataset, &cfg).map_err(CliError::usage)
}

fn cmd_train(a: &TrainArgs) -> CliResult<()> {
    let config = a.pipeline.config(a.seed)?;
    let dataset = a.data.load(true)?;
    let prep = PreparedCohort::new(&dataset, config.tokenizer)?;
    let model = train(&prep, &prep.all_positions(), a.spec, &config, a.seed).map_err(|e| match e {
        PipelineError::Learn(LearnError::DegenerateLabels) | PipelineError::Text(_) => CliError::data(e),
        PipelineError::Learn(_) => CliError::fit(e),
        e => CliError::from(e),
    })?;
    write_file(&a.out, &to_json(&model))
}

fn cmd_score(a: &ScoreArgs) -> CliResult<()> {
    let model: TrainedPipeline = {
        let text = fs::read_to_string(&a.model).map_err(|e| CliError::data(format!("{}: {e}", a.model.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", a.model.display())))?
    };
    model.check_version()?;
    let dataset = a.data.load(false)?;
    let prep = PreparedCohort::new(&dataset, model.config.tokenizer)?;
    let probs = model.predict(&prep, &prep.all_positions())?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::data(e);
    w.write_record(["patient_id", "probability"]).map_err(csv_err)?;
    for (id, p) in prep.patient_ids.iter().zip(&probs) {
        w.write_record([id.as_str(), &p.to_string()]).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::data(e.to_string()))?;
    write_file(&a.out, &bytes)
}

fn cmd_evaluate(a: &EvaluateArgs) -> CliResult<()> {
    if !(a.target_sensitivity > 0.0 && a.target_sensitivity <= 1.0) {
        return Err(CliError::usage("--target-sensitivity must be in (0, 1]"));
    }
    if a.folds < 2 {
        return Err(CliError::usage("--folds must be at least 2"));
    }
    let config = a.pipeline.config(seed::derive_seed(a.seed, 1))?;
    let dataset = a.data.load(true)?;
    let specs: Vec<ModelSpec> = if a.spec.is_empty() {
        ModelSpec::ALL.to_vec()
    } else {
        let mut s = Vec::new();
        for m in &a.spec {
            if !s.contains(m) {
                s.push(*m);
            }
        }
        s
    };
    let plan = make_folds(&dataset, a.folds, a.seed, true)?;
    let prep = PreparedCohort::new(&dataset, config.tokenizer)?;
    let mut results = Vec::with_capacity(specs.len());
    for &spec in &specs {
        log::info!("cross-validating {spec}");
        results.push(cross_validate(&prep, spec, &config, &plan)?);
    }
    let report = build_report(&results, &plan, &config, a.target_sensitivity, a.ci_level)?;
    write_file(&a.out.join("evaluation.json"), &to_json(&report))?;
    if a.emit_pr_csv {
        let mut buf = Vec::new();
        write_pr_csv(&report, &mut buf).map_err(CliError::data)?;
        write_file(&a.out.join("pr_curves.csv"), &buf)?;
    }
    Ok(())
}

fn cmd_cohort_table(a: &CohortTableArgs) -> CliResult<()> {
    let need_labels = a.group_by == "label";
    let dataset = a.data.load(need_labels)?;
    let group: Vec<bool> = if need_labels {
        dataset.labels()?
    } else {
        let f = BinaryField::from_column(&a.group_by)
            .ok_or_else(|| CliError::usage(format!("cannot group by `{}`; use label or a yes/no column", a.group_by)))?;
        dataset.records().iter().map(|r| r.binary(f)).collect()
    };
    let table = smd_records(dataset.records(), &group)?;
    let bytes = match a.format {
        TableFormat::Json => to_json(&CohortTableReport { report_version: COHORT_TABLE_VERSION, group_by: &a.group_by, table: &table }),
        TableFormat::Text => table.to_text().into_bytes(),
    };
    emit(a.out.as_deref(), &bytes)
}

fn cmd_assoc(a: &AssocArgs) -> CliResult<()> {
    let dataset = a.data.load(true)?;
    let labels = dataset.labels()?;
    let report: AssocReport = run_outcome_analyses_records(dataset.records(), &labels, a.adjust_age);
    let failed = report
        .panels
        .iter()
        .flat_map(|p| &p.rows)
        .flat_map(|r| &r.cells)
        .filter(|c| c.error.is_some())
        .count();
    if failed > 0 {
        log::warn!("{failed} outcome models could not be fit; see the error fields in the report");
    }
    emit(a.out.as_deref(), &to_json(&report))
}

fn cmd_project_fp(a: &ProjectFpArgs) -> CliResult<()> {
    let p = project_false_positives(a.n, a.prevalence, a.sensitivity, a.ppv)?;
    let out = if a.json {
        to_json(&ProjectionReport { report_version: PROJECTION_VERSION, projection: p })
    } else {
        format!(
            "false_positives={} (expected {:.2}; n={} prevalence={} sensitivity={} ppv={})\n",
            p.false_positives_rounded, p.false_positives, p.n_screened, p.prevalence, p.sensitivity, p.ppv
        )
        .into_bytes()
    };
    emit(None, &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(args: &[&str]) -> i32 {
        main_with_args(std::iter::once("phenorule").chain(args.iter().copied()))
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(code(&["project-fp", "--n", "10", "--prevalence", "0.5", "--sensitivity", "0.9", "--ppv", "0"]), 2);
        assert_eq!(code(&["frobnicate"]), 2);
        assert_eq!(code(&["train", "--spec", "notes:svm", "--seed", "1", "--out", "m.json"]), 2);
    }

    #[test]
    fn missing_cohort_files_are_data_errors() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().to_str().unwrap();
        assert_eq!(code(&["assoc", "--data", d]), 3);
    }

    #[test]
    fn spec_list_parses_commas() {
        let cli = Cli::try_parse_from(["phenorule", "evaluate", "--data", "d", "--seed", "1", "--out", "o", "--spec", "notes:lasso,structured:forest"])
            .unwrap();
        let Command::Evaluate(a) = cli.command else { panic!() };
        assert_eq!(a.spec.len(), 2);
        assert_eq!(a.spec[1].to_string(), "structured:forest");
    }
}
