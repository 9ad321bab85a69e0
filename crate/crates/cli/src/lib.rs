//! Command-line front end: taxonomy construction and inspection, toy
//! training and evaluation, and pseudo-labeling.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use unitax_core::pseudo::{label_record, PseudoInput};
use unitax_core::taxonomy::{Collection, DeclarationProgram, TaxonomyArtifacts};
use unitax_core::toy::{
    decision_surface_csv, dead_logit_report, eval_report, generate_toy, train, trace_csv, Grid, Mode, ModelFile,
    Scoring, ToyProblem, ToyProblemSpec, TrainConfig, TrainReport, TrainedModel,
};
use unitax_core::mapping_matrix;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable capping the worker threads of parallel commands.
pub const THREADS_ENV: &str = "UNITAX_THREADS";

#[derive(Debug, Parser)]
#[command(name = "unitax", version, about = "Universal taxonomies for multi-dataset segmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the universal taxonomy and mappings of a collection.
    Build(BuildArgs),
    /// Validate a collection or taxonomy file.
    Check(CheckArgs),
    /// Report universal classes that no label can single out.
    Filter(FilterArgs),
    /// Write the mapping matrix of one dataset as CSV.
    ExportMatrix(MatrixArgs),
    /// Train a toy model; writes model.json, trace.csv and report.json.
    ToyTrain(TrainArgs),
    /// Evaluate a toy model in the label space of one dataset.
    Eval(EvalArgs),
    /// Universal pseudo-labels for JSON-lines records.
    PseudoLabel(PseudoArgs),
    /// Decision surface of a toy model on a grid as CSV.
    Surface(SurfaceArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Collection file (datasets of atom sets).
    #[arg(long, conflicts_with = "decls", required_unless_present = "decls")]
    pub atoms: Option<PathBuf>,
    /// Declaration program.
    #[arg(long)]
    pub decls: Option<PathBuf>,
    /// Drop untrainable classes from the mappings.
    #[arg(long)]
    pub filter: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Collection or taxonomy file.
    pub file: PathBuf,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Taxonomy file.
    pub taxonomy: PathBuf,
    /// Also write the filtered taxonomy here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    pub taxonomy: PathBuf,
    #[arg(long)]
    pub dataset: String,
    #[arg(long)]
    pub include_void: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    UniversalNllPlus,
    UniversalNllMax,
    NaiveConcat,
    PartialMerge,
    PerDatasetHeads,
    Oracle,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::UniversalNllPlus => Mode::UniversalNllPlus,
            ModeArg::UniversalNllMax => Mode::UniversalNllMax,
            ModeArg::NaiveConcat => Mode::NaiveConcat,
            ModeArg::PartialMerge => Mode::PartialMerge,
            ModeArg::PerDatasetHeads => Mode::PerDatasetHeads,
            ModeArg::Oracle => Mode::Oracle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoringArg {
    Default,
    PostInference,
}

impl From<ScoringArg> for Scoring {
    fn from(s: ScoringArg) -> Scoring {
        match s {
            ScoringArg::Default => Scoring::Default,
            ScoringArg::PostInference => Scoring::PostInference,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Toy problem file.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// model.json written by toy-train.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: String,
    /// Scoring of flat baselines; universal models always project.
    #[arg(long, value_enum, default_value = "post-inference")]
    pub scoring: ScoringArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PseudoArgs {
    /// Taxonomy file.
    #[arg(long)]
    pub taxonomy: PathBuf,
    /// JSON-lines records.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// `xmin,xmax,ymin,ymax,nx,ny`
    #[arg(long, allow_hyphen_values = true)]
    pub grid: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code. Messages go to stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INVALID
        }
    }
}

pub fn execute(command: &Command) -> anyhow::Result<()> {
    match command {
        Command::Build(a) => build(a),
        Command::Check(a) => check(a),
        Command::Filter(a) => filter(a),
        Command::ExportMatrix(a) => export_matrix(a),
        Command::ToyTrain(a) => toy_train(a),
        Command::Eval(a) => eval(a),
        Command::PseudoLabel(a) => pseudo_label(a),
        Command::Surface(a) => surface(a),
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Writes to `out`, or to stdout without one.
fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

fn load_taxonomy(path: &Path) -> anyhow::Result<TaxonomyArtifacts> {
    TaxonomyArtifacts::from_json(&read(path)?).with_context(|| format!("{}", path.display()))
}

fn load_problem(path: &Path) -> anyhow::Result<ToyProblem> {
    let spec = ToyProblemSpec::from_json(&read(path)?).with_context(|| format!("{}", path.display()))?;
    ToyProblem::new(spec).with_context(|| format!("{}", path.display()))
}

fn load_model(path: &Path, problem: &ToyProblem) -> anyhow::Result<TrainedModel> {
    let file = ModelFile::from_json(&read(path)?).with_context(|| format!("{}", path.display()))?;
    TrainedModel::from_file(&file, problem).with_context(|| format!("{}", path.display()))
}

fn build(a: &BuildArgs) -> anyhow::Result<()> {
    let art = match (&a.atoms, &a.decls) {
        (Some(p), _) => {
            let c = Collection::from_json(&read(p)?).with_context(|| format!("{}", p.display()))?;
            TaxonomyArtifacts::from_collection(c)
        }
        (None, Some(p)) => {
            let prog = DeclarationProgram::parse(&read(p)?).with_context(|| format!("{}", p.display()))?;
            TaxonomyArtifacts::from_program(&prog).with_context(|| format!("{}", p.display()))?
        }
        (None, None) => bail!("one of --atoms or --decls is required"),
    };
    let art = if a.filter { art.filtered().0 } else { art };
    art.validate()?;
    emit(a.out.as_deref(), &art.to_json())?;
    if a.out.is_some() {
        println!(
            "{} universal classes, {} trainable",
            art.taxonomy.len(),
            art.active().len()
        );
    }
    Ok(())
}

fn check(a: &CheckArgs) -> anyhow::Result<()> {
    let text = read(&a.file)?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| anyhow!("{}: line {}: {e}", a.file.display(), e.line()))?;
    if value.get("universal").is_some() {
        let art = TaxonomyArtifacts::from_json(&text).with_context(|| format!("{}", a.file.display()))?;
        println!(
            "ok: taxonomy with {} datasets, {} universal classes",
            art.collection.datasets().len(),
            art.taxonomy.len()
        );
    } else {
        let c = Collection::from_json(&text).with_context(|| format!("{}", a.file.display()))?;
        println!("ok: collection with {} datasets, {} atoms", c.datasets().len(), c.atoms().len());
    }
    Ok(())
}

#[derive(Serialize)]
struct FilterEntry {
    class: String,
    dominator: String,
}

#[derive(Serialize)]
struct FilterSummary {
    universal: usize,
    trainable: Vec<String>,
    untrainable: Vec<FilterEntry>,
}

fn filter(a: &FilterArgs) -> anyhow::Result<()> {
    let art = load_taxonomy(&a.taxonomy)?;
    let (filtered, report) = art.filtered();
    let names = &filtered.taxonomy.classes;
    let summary = FilterSummary {
        universal: names.len(),
        trainable: filtered.active().iter().map(|&u| names[u].display_name.clone()).collect(),
        untrainable: report
            .removed
            .iter()
            .map(|&(u, d)| FilterEntry {
                class: names[u].display_name.clone(),
                dominator: names[d].display_name.clone(),
            })
            .collect(),
    };
    if let Some(out) = &a.out {
        write(out, &filtered.to_json())?;
    }
    emit(None, &to_json(&summary))
}

fn export_matrix(a: &MatrixArgs) -> anyhow::Result<()> {
    let art = load_taxonomy(&a.taxonomy)?;
    let m = mapping_matrix(&art.collection, &a.dataset, &art.taxonomy, &art.mappings, a.include_void)?;
    emit(a.out.as_deref(), &m.to_csv())
}

fn toy_train(a: &TrainArgs) -> anyhow::Result<()> {
    let problem = load_problem(&a.spec)?;
    let config = TrainConfig {
        mode: a.mode.into(),
        epochs: a.epochs,
        lr: a.lr,
        seed: a.seed,
        hidden: a.hidden,
    };
    config.validate()?;
    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    let data = generate_toy(&problem);
    let outcome = train(&config, &problem, &data)?;
    let acc = dead_logit_report(&outcome.model, &problem, &data.test)?;
    let report = TrainReport::new(&config, &outcome, data.train_samples().count(), acc, data.test.len());
    write(&a.out.join("model.json"), &outcome.model.to_file(&problem).to_json())?;
    write(&a.out.join("trace.csv"), &trace_csv(&outcome.trace))?;
    write(&a.out.join("report.json"), &to_json(&report))?;
    println!("held-out accuracy {:.4}", report.accuracy);
    Ok(())
}

fn eval(a: &EvalArgs) -> anyhow::Result<()> {
    let problem = load_problem(&a.spec)?;
    let model = load_model(&a.model, &problem)?;
    let d = problem.art.collection.dataset_index(&a.dataset)?;
    let data = generate_toy(&problem);
    let report = eval_report(&model, &problem, &data.test, d, a.scoring.into())?;
    emit(a.out.as_deref(), &to_json(&report))
}

/// Worker pool sized by `UNITAX_THREADS` when set.
fn pool() -> anyhow::Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| anyhow!("{THREADS_ENV} must be a positive integer, got `{v}`"))?;
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}

fn pseudo_label(a: &PseudoArgs) -> anyhow::Result<()> {
    let art = load_taxonomy(&a.taxonomy)?;
    let text = read(&a.input)?;
    let records: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
        .collect();
    let input = a.input.display();
    let lines = pool()?.install(|| {
        records
            .par_iter()
            .map(|&(n, line)| {
                let rec: PseudoInput =
                    serde_json::from_str(line).map_err(|e| anyhow!("{input}: line {n}: {e}"))?;
                let out = label_record(&art, &rec).with_context(|| format!("{input}: line {n}"))?;
                Ok(serde_json::to_string(&out).expect("record serializes"))
            })
            .collect::<anyhow::Result<Vec<String>>>()
    })?;
    let mut body = lines.join("\n");
    if !body.is_empty() {
        body.push('\n');
    }
    emit(a.out.as_deref(), &body)
}

fn surface(a: &SurfaceArgs) -> anyhow::Result<()> {
    let problem = load_problem(&a.spec)?;
    let model = load_model(&a.model, &problem)?;
    let grid = Grid::parse(&a.grid)?;
    let names = model.output.names(&problem);
    emit(a.out.as_deref(), &decision_surface_csv(&model, &names, &grid))
}
