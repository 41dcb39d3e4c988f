//! Command-line front end: `prism mine|train|predict|benchmark`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::dataset::{self, Dataset, Label, LabelMapping, ScalingParams};
use crate::error::{PrismError, Result};
use crate::kernel::{self, KernelConfig};
use crate::model_selection::{self, Arm, CvOptions, ExperimentOptions, GridSpec, MinedPriors};
use crate::prior_miner::{self, DEFAULT_ANGLE_STEP};
use crate::ptsm::{self, BiasMode, PriorsBlock, PtsmConfig, PtsmModelDocument, DEFAULT_B_STAR};
use crate::qp;
use crate::svm::{self, SvmModel};

#[derive(Debug, Parser)]
#[command(name = "prism", version, about = "nu-SVM with mined linear priors")]
pub struct Cli {
    /// Seed for splits, folds and repeats.
    #[arg(long, global = true, env = "PRISM_SEED", default_value_t = 42)]
    pub seed: u64,
    /// Worker threads for grid search (default: available parallelism).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mine linear priors and print the per-pair table.
    Mine(MineArgs),
    /// Train a model and write it as JSON.
    Train(TrainArgs),
    /// Predict labels with a saved model.
    Predict(PredictArgs),
    /// Repeated with/without-priors experiment.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassArg {
    #[value(name = "+1", alias = "1", alias = "pos")]
    Positive,
    #[value(name = "-1", alias = "neg")]
    Negative,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BiasModeArg {
    Joint,
    KktAlternating,
}

impl From<BiasModeArg> for BiasMode {
    fn from(b: BiasModeArg) -> BiasMode {
        match b {
            BiasModeArg::Joint => BiasMode::Joint,
            BiasModeArg::KktAlternating => BiasMode::KktAlternating,
        }
    }
}

#[derive(Debug, Args)]
pub struct Output {
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Write the result here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MineArgs {
    pub data: PathBuf,
    #[arg(long, value_enum, allow_hyphen_values = true, default_value = "both")]
    pub class: ClassArg,
    #[arg(long, default_value_t = DEFAULT_ANGLE_STEP)]
    pub angle_step: f64,
    /// Mine on a random training split of this fraction.
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long)]
    pub stratified: bool,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct Hyper {
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// λ₂ in units of 1/N.
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// λ₃ in units of 1/N.
    #[arg(long)]
    pub lambda3: Option<f64>,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub no_priors: bool,
    #[arg(long, default_value_t = DEFAULT_B_STAR)]
    pub b_star: f64,
    #[arg(long, default_value_t = DEFAULT_ANGLE_STEP)]
    pub angle_step: f64,
    #[arg(long, value_enum, default_value_t = BiasModeArg::Joint)]
    pub bias_mode: BiasModeArg,
    #[arg(long)]
    pub stratified: bool,
    #[arg(long)]
    pub per_fold_mining: bool,
    /// Keep every k-th value of each grid axis.
    #[arg(long, default_value_t = 1)]
    pub grid_subsample: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub data: PathBuf,
    #[command(flatten)]
    pub hyper: Hyper,
    #[command(flatten)]
    pub common: Common,
    /// Hold out a test part; the value is the training fraction.
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long)]
    pub allow_nonconverged: bool,
    /// Model JSON destination (standard output when absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    pub model: PathBuf,
    pub data: PathBuf,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    pub data: PathBuf,
    #[arg(long, default_value_t = model_selection::DEFAULT_REPEATS)]
    pub repeats: usize,
    /// Training fraction of each random split.
    #[arg(long, default_value_t = model_selection::DEFAULT_TRAIN_FRACTION)]
    pub split: f64,
    /// Name used in reports (default: file stem).
    #[arg(long)]
    pub name: Option<String>,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub out: Output,
}

/// Training-time figures stored with a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub seed: u64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub train_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv_accuracy: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Model file written by `train` and read by `predict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub schema_version: u32,
    #[serde(flatten)]
    pub document: PtsmModelDocument,
    pub scaling: ScalingParams,
    pub label_mapping: LabelMapping,
    pub training: TrainingSummary,
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| PrismError::Io(format!("{}: {e}", path.display())))?;
    dataset::parse_libsvm(&text)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| PrismError::Io(format!("{}: {e}", p.display())))?,
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())?;
            so.flush()?;
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| PrismError::Schema(e.to_string()))
}

fn check_fraction(f: f64) -> Result<f64> {
    if f > 0.0 && f < 1.0 {
        Ok(f)
    } else {
        Err(PrismError::InvalidConfig(format!("split fraction must lie in (0, 1), got {f}")))
    }
}

/// Optional split, then min-max scaling fitted on the training part.
fn prepare(d: &Dataset, split: Option<f64>, seed: u64, stratified: bool) -> Result<(Dataset, Option<Dataset>, ScalingParams)> {
    let (train, test) = match split {
        Some(f) => {
            let (a, b) = dataset::split_with(d, check_fraction(f)?, seed, stratified)?;
            (a, Some(b))
        }
        None => (d.clone(), None),
    };
    let params = dataset::fit_minmax(&train);
    let train = train.scaled(&params)?;
    let test = test.map(|t| t.scaled(&params)).transpose()?;
    Ok((train, test, params))
}

fn cv_options(c: &Common, seed: u64) -> CvOptions {
    CvOptions {
        seed,
        stratified: c.stratified,
        per_fold_mining: c.per_fold_mining,
        angle_step: c.angle_step,
        b_star: c.b_star,
        bias_mode: c.bias_mode.into(),
        ..CvOptions::default()
    }
}

pub fn cmd_mine(args: &MineArgs, seed: u64) -> Result<()> {
    let d = read_dataset(&args.data)?;
    let (train, _, _) = prepare(&d, args.split, seed, args.stratified)?;
    let classes: &[Label] = match args.class {
        ClassArg::Positive => &[Label::Positive],
        ClassArg::Negative => &[Label::Negative],
        ClassArg::Both => &[Label::Positive, Label::Negative],
    };
    let mut reports = Vec::new();
    for &class in classes {
        reports.push(prior_miner::mine_prior(&train, class, args.angle_step)?.1);
    }
    let text = match args.out.format {
        Format::Json => to_json(&reports)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| PrismError::Io(e.to_string());
            w.write_record(["class", "i", "j", "phi", "c", "support", "rule"]).map_err(io)?;
            for r in &reports {
                for p in &r.pairs {
                    let prior = p.to_prior(r.class);
                    w.write_record([
                        r.class.to_string(),
                        p.i.to_string(),
                        p.j.to_string(),
                        p.phi.to_string(),
                        p.c.to_string(),
                        p.support.to_string(),
                        prior.to_string(),
                    ])
                    .map_err(io)?;
                }
            }
            String::from_utf8(w.into_inner().map_err(|e| PrismError::Io(e.to_string()))?)
                .map_err(|e| PrismError::Io(e.to_string()))?
        }
        Format::Table => {
            let mut s = String::new();
            for r in &reports {
                s.push_str(&format!("class {}\n", r.class));
                s.push_str(&r.render_table());
                s.push_str(&format!("time: {:.3} s\n\n", r.seconds));
            }
            s
        }
    };
    emit(args.out.output.as_deref(), &text)
}

pub fn cmd_train(args: &TrainArgs, seed: u64) -> Result<()> {
    let d = read_dataset(&args.data)?;
    let c = &args.common;
    let (train, test, scaling) = prepare(&d, args.split, seed, c.stratified)?;
    let n = train.len() as f64;
    let nu_max = qp::nu_max_of(train.n_pos(), train.n_neg());
    if let Some(nu) = args.hyper.nu {
        if !(nu > 0.0 && nu <= nu_max) {
            return Err(PrismError::InfeasibleNu { nu, nu_max });
        }
    }
    let (mined, warnings) = if c.no_priors {
        (MinedPriors::default(), Vec::new())
    } else {
        MinedPriors::mine(&train, c.angle_step)
    };
    let (mut grid, grid_warnings) = GridSpec::standard(&train)?;
    for w in warnings.iter().chain(&grid_warnings) {
        eprintln!("warning: {w}");
    }
    let h = &args.hyper;
    if let Some(v) = h.nu {
        grid.nu_values = vec![v];
    }
    if let Some(v) = h.sigma {
        grid.sigma_values = vec![v];
    }
    if let Some(v) = h.lambda2 {
        grid.lambda2_values = vec![v / n];
    }
    if let Some(v) = h.lambda3 {
        grid.lambda3_values = vec![v / n];
    }
    if c.no_priors {
        grid = grid.without_priors();
    }
    let grid = grid.subsample(c.grid_subsample);
    let cv = cv_options(c, seed);
    let arm = if c.no_priors { Arm::WithoutPriors } else { Arm::WithPriors(&mined) };
    let (point, cv_accuracy) = if grid.len() == 1 {
        grid.validate()?;
        (grid.configs()[0], None)
    } else {
        let table = model_selection::grid_search_cv(&train, &grid, arm, &cv)?;
        (table.best_row().config, Some(table.best_row().mean_accuracy))
    };

    let cfg = PtsmConfig {
        b_star: c.b_star,
        bias_mode: c.bias_mode.into(),
        ..PtsmConfig::new(point.nu, KernelConfig::rbf(point.sigma)?, point.lambda2, point.lambda3)
    };
    let priors = mined.constraint_set(&train, c.b_star)?;
    if !c.no_priors {
        for w in &priors.warnings {
            eprintln!("warning: {w}");
        }
    }
    let gram = kernel::gram(&train.rows(), &cfg.kernel)?;
    let fit = ptsm::fit_ptsm(&gram, &train.label_values(), &cfg, &priors)?;
    let report = &fit.solution.report;
    if !report.converged {
        if args.allow_nonconverged {
            eprintln!("warning: solver stopped after {} iterations without converging", report.iterations);
        } else {
            return Err(PrismError::SolverFailure { iterations: report.iterations });
        }
    }
    let model = SvmModel::from_solution(&train, cfg.kernel, cfg.nu, &fit.solution);
    let train_accuracy = svm::accuracy(&model, &train)?;
    let test_accuracy = test.as_ref().filter(|t| !t.is_empty()).map(|t| svm::accuracy(&model, t)).transpose()?;

    let saved = SavedModel {
        schema_version: model_selection::SCHEMA_VERSION,
        document: PtsmModelDocument {
            model: model.to_document(),
            priors: PriorsBlock {
                positive: mined.positive.clone(),
                negative: mined.negative.clone(),
                q_pos: priors.q_pos(),
                q_neg: priors.q_neg(),
                lambda2: cfg.lambda2,
                lambda3: cfg.lambda3,
                b_star: cfg.b_star,
            },
            diagnostics: Some(fit.diagnostics.clone()),
        },
        scaling,
        label_mapping: d.mapping(),
        training: TrainingSummary {
            seed,
            lambda2: cfg.lambda2,
            lambda3: cfg.lambda3,
            train_accuracy,
            test_accuracy,
            cv_accuracy,
            converged: report.converged,
            iterations: report.iterations,
        },
    };
    let json = to_json(&saved)?;
    let mut lines = format!(
        "nu = {}  sigma = {}  lambda2 = {}  lambda3 = {}\ntrain accuracy: {:.4}\n",
        cfg.nu, point.sigma, cfg.lambda2, cfg.lambda3, train_accuracy
    );
    if let Some(t) = test_accuracy {
        lines.push_str(&format!("test accuracy: {t:.4}\n"));
    }
    match &args.output {
        Some(p) => {
            emit(Some(p), &json)?;
            emit(None, &lines)
        }
        None => {
            eprint!("{lines}");
            emit(None, &json)
        }
    }
}

/// Loads a model file; any shape problem is a schema error.
pub fn load_model(path: &Path) -> Result<(SavedModel, SvmModel)> {
    let text = std::fs::read_to_string(path).map_err(|e| PrismError::Io(format!("{}: {e}", path.display())))?;
    let saved: SavedModel = serde_json::from_str(&text).map_err(|e| PrismError::Schema(e.to_string()))?;
    if saved.schema_version != model_selection::SCHEMA_VERSION {
        return Err(PrismError::Schema(format!("field `schema_version`: unsupported value {}", saved.schema_version)));
    }
    let model = SvmModel::from_document(&saved.document.model)?;
    let dim = saved.scaling.min.len();
    if saved.scaling.max.len() != dim || (!saved.document.model.support.is_empty() && model.n_features() != dim) {
        return Err(PrismError::Schema("field `scaling`: length disagrees with the support vectors".into()));
    }
    Ok((saved, model))
}

fn map_label(raw: f64, mapping: LabelMapping) -> Result<Option<Label>> {
    if raw == 0.0 {
        return Ok(None);
    }
    match mapping {
        LabelMapping::TwoValues { positive, negative } => {
            if raw == positive {
                Ok(Some(Label::Positive))
            } else if raw == negative {
                Ok(Some(Label::Negative))
            } else {
                Err(PrismError::InvalidConfig(format!("label {raw} is neither {positive} nor {negative}")))
            }
        }
        LabelMapping::Sign => Ok(Some(Label::from_sign(raw))),
    }
}

#[derive(Debug, Serialize)]
struct Prediction {
    label: i8,
    decision_value: f64,
}

#[derive(Debug, Serialize)]
struct PredictionReport {
    predictions: Vec<Prediction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy: Option<f64>,
}

pub fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let (saved, model) = load_model(&args.model)?;
    let text = std::fs::read_to_string(&args.data).map_err(|e| PrismError::Io(format!("{}: {e}", args.data.display())))?;
    let (records, _) = dataset::parse_records(&text)?;
    if records.is_empty() {
        return Err(PrismError::EmptyDataset);
    }
    let dim = saved.scaling.min.len();
    let labeled = records.iter().any(|r| r.label != 0.0);
    let mut predictions = Vec::with_capacity(records.len());
    let mut right = 0usize;
    for r in &records {
        let x = dataset::apply_minmax(&dataset::densify(&r.entries, dim)?, &saved.scaling)?;
        let decision_value = model.decision_value(&x)?;
        let label = svm::label_of(decision_value);
        if labeled {
            match map_label(r.label, saved.label_mapping)? {
                Some(truth) => right += usize::from(truth == label),
                None => return Err(PrismError::InvalidConfig("file mixes labeled and unlabeled (0) rows".into())),
            }
        }
        predictions.push(Prediction { label: label.value() as i8, decision_value });
    }
    let accuracy = labeled.then(|| right as f64 / records.len() as f64);
    let text = match args.out.format {
        Format::Json => to_json(&PredictionReport { predictions, accuracy })?,
        Format::Csv => {
            let mut s = String::from("label,decision_value\n");
            for p in &predictions {
                s.push_str(&format!("{},{}\n", p.label, p.decision_value));
            }
            s
        }
        Format::Table => {
            let mut s = String::new();
            for p in &predictions {
                s.push_str(&format!("{:+} {:.12e}\n", p.label, p.decision_value));
            }
            if let Some(a) = accuracy {
                s.push_str(&format!("accuracy: {a:.6}\n"));
            }
            s
        }
    };
    emit(args.out.output.as_deref(), &text)
}

pub fn cmd_benchmark(args: &BenchmarkArgs, seed: u64) -> Result<()> {
    let d = read_dataset(&args.data)?;
    let name = args.name.clone().unwrap_or_else(|| {
        args.data.file_stem().map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned())
    });
    let c = &args.common;
    let opts = ExperimentOptions {
        repeats: args.repeats,
        seed,
        train_fraction: check_fraction(args.split)?,
        grid_subsample: c.grid_subsample.max(1),
        lambda_fractions: c.no_priors.then(|| vec![0.0]),
        cv: cv_options(c, seed),
    };
    let clock = Instant::now();
    let report = model_selection::run_experiment(&d, &name, &opts)?;
    for r in &report.repeats {
        if let Some(e) = &r.failed {
            eprintln!("warning: repeat {} failed: {e}", r.repeat);
        }
    }
    eprintln!("benchmark finished in {:.1} s", clock.elapsed().as_secs_f64());
    let text = match args.out.format {
        Format::Json => report.to_json()? + "\n",
        Format::Csv => report.to_csv()?,
        Format::Table => report.render_table(),
    };
    emit(args.out.output.as_deref(), &text)
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Mine(a) => cmd_mine(a, cli.seed),
        Command::Train(a) => cmd_train(a, cli.seed),
        Command::Predict(a) => cmd_predict(a),
        Command::Benchmark(a) => cmd_benchmark(a, cli.seed),
    }
}

/// Runs the parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        builder = builder.num_threads(j.max(1));
    }
    let result = match builder.build() {
        Ok(pool) => pool.install(|| dispatch(&cli)),
        Err(e) => Err(PrismError::InvalidConfig(e.to_string())),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
