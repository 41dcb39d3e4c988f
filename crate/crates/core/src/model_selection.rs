//! Hyperparameter grids, k-fold cross-validation and the repeated
//! with/without-priors experiment.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, Dataset, Label};
use crate::error::{PrismError, Result};
use crate::kernel::{self, KernelConfig, SquaredDistances};
use crate::prior_miner::{self, LinearPrior, DEFAULT_ANGLE_STEP};
use crate::ptsm::{self, BiasMode, PriorConstraintSet, PtsmConfig, DEFAULT_B_STAR, DEFAULT_LAMBDA1};
use crate::qp::{self, SolverOptions, WarmStart};
use crate::stats;
use crate::svm::{self, SvmModel};

pub const NU_MIN: f64 = 0.1;
pub const NU_POINTS: usize = 10;
pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_REPEATS: usize = 10;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;
pub const SCHEMA_VERSION: u32 = 1;
/// λ grid as multiples of 1/N.
pub const LAMBDA_FRACTIONS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// `{2⁻³, …, 2⁶}`.
pub fn sigma_grid() -> Vec<f64> {
    (-3..=6).map(|e| 2f64.powi(e)).collect()
}

/// Ten equally spaced ν from 0.1 to ν_max. When ν_max ≤ 0.1 the grid is
/// the single value ν_max and a warning is returned alongside.
pub fn nu_grid(train: &Dataset) -> Result<(Vec<f64>, Option<String>)> {
    if !train.has_both_classes() {
        return Err(PrismError::SingleClass(train.samples().first().map_or(0.0, |s| s.label.value())));
    }
    let nu_max = qp::nu_max_of(train.n_pos(), train.n_neg());
    if nu_max <= NU_MIN {
        let msg = format!("nu_max = {nu_max} does not exceed {NU_MIN}; using the single value nu_max");
        return Ok((vec![nu_max], Some(msg)));
    }
    let last = (NU_POINTS - 1) as f64;
    let mut out: Vec<f64> = (0..NU_POINTS).map(|k| NU_MIN + (nu_max - NU_MIN) * k as f64 / last).collect();
    out[NU_POINTS - 1] = nu_max;
    Ok((out, None))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub nu: f64,
    pub sigma: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nu_values: Vec<f64>,
    pub sigma_values: Vec<f64>,
    pub lambda2_values: Vec<f64>,
    pub lambda3_values: Vec<f64>,
}

impl GridSpec {
    /// The default grids for `train`, with any ν-grid warning.
    pub fn standard(train: &Dataset) -> Result<(GridSpec, Vec<String>)> {
        let (nu_values, warning) = nu_grid(train)?;
        let n = train.len() as f64;
        let lambdas: Vec<f64> = LAMBDA_FRACTIONS.iter().map(|f| f / n).collect();
        let spec = GridSpec {
            nu_values,
            sigma_values: sigma_grid(),
            lambda2_values: lambdas.clone(),
            lambda3_values: lambdas,
        };
        Ok((spec, warning.into_iter().collect()))
    }

    /// Same ν and σ axes with both λ grids reduced to {0}.
    pub fn without_priors(&self) -> GridSpec {
        GridSpec { lambda2_values: vec![0.0], lambda3_values: vec![0.0], ..self.clone() }
    }

    /// Keeps every k-th value of each axis, always including the first.
    pub fn subsample(&self, k: usize) -> GridSpec {
        let k = k.max(1);
        let every = |v: &[f64]| v.iter().step_by(k).copied().collect::<Vec<f64>>();
        GridSpec {
            nu_values: every(&self.nu_values),
            sigma_values: every(&self.sigma_values),
            lambda2_values: every(&self.lambda2_values),
            lambda3_values: every(&self.lambda3_values),
        }
    }

    pub fn len(&self) -> usize {
        self.nu_values.len() * self.sigma_values.len() * self.lambda2_values.len() * self.lambda3_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(PrismError::InvalidConfig("every grid axis needs at least one value".into()));
        }
        let increasing = self.nu_values.windows(2).all(|w| w[0] < w[1]);
        if !increasing || !self.nu_values.iter().all(|&v| v > 0.0 && v.is_finite()) {
            return Err(PrismError::InvalidConfig("nu grid must be positive and strictly increasing".into()));
        }
        if !self.sigma_values.iter().all(|&s| s > 0.0 && s.is_finite()) {
            return Err(PrismError::InvalidConfig("sigma grid must be positive".into()));
        }
        if !self.lambda2_values.iter().chain(&self.lambda3_values).all(|&l| l >= 0.0 && l.is_finite()) {
            return Err(PrismError::InvalidConfig("lambda grids must be nonnegative".into()));
        }
        Ok(())
    }

    /// All configurations in search order: ν, then σ, then λ₂, then λ₃.
    pub fn configs(&self) -> Vec<GridPoint> {
        let mut out = Vec::with_capacity(self.len());
        for &nu in &self.nu_values {
            for &sigma in &self.sigma_values {
                for &lambda2 in &self.lambda2_values {
                    for &lambda3 in &self.lambda3_values {
                        out.push(GridPoint { nu, sigma, lambda2, lambda3 });
                    }
                }
            }
        }
        out
    }

    fn lambda_pairs(&self) -> Vec<(f64, f64)> {
        self.lambda2_values.iter().flat_map(|&a| self.lambda3_values.iter().map(move |&b| (a, b))).collect()
    }
}

/// Priors mined on one training set; either side may be missing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MinedPriors {
    pub positive: Option<LinearPrior>,
    pub negative: Option<LinearPrior>,
}

impl MinedPriors {
    /// Mines both classes. A class that cannot be mined is left empty and
    /// explained in the returned warnings.
    pub fn mine(train: &Dataset, angle_step: f64) -> (MinedPriors, Vec<String>) {
        let mut warnings = Vec::new();
        let mut one = |class: Label| match prior_miner::mine_prior(train, class, angle_step) {
            Ok((p, _)) => Some(p),
            Err(e) => {
                warnings.push(format!("no {} prior: {e}", class_word(class)));
                None
            }
        };
        let positive = one(Label::Positive);
        let negative = one(Label::Negative);
        (MinedPriors { positive, negative }, warnings)
    }

    pub fn constraint_set(&self, train: &Dataset, b_star: f64) -> Result<PriorConstraintSet> {
        ptsm::select_prior_points(train, self.positive.as_ref(), self.negative.as_ref(), b_star)
    }
}

fn class_word(class: Label) -> &'static str {
    match class {
        Label::Positive => "positive",
        Label::Negative => "negative",
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Arm<'a> {
    WithoutPriors,
    WithPriors(&'a MinedPriors),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    pub stratified: bool,
    /// Re-mine priors on every fold's training part instead of using the
    /// priors handed to the search.
    pub per_fold_mining: bool,
    pub angle_step: f64,
    pub b_star: f64,
    pub lambda1: f64,
    pub bias_mode: BiasMode,
    pub solver: SolverOptions,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            folds: DEFAULT_FOLDS,
            seed: 42,
            stratified: false,
            per_fold_mining: false,
            angle_step: DEFAULT_ANGLE_STEP,
            b_star: DEFAULT_B_STAR,
            lambda1: DEFAULT_LAMBDA1,
            bias_mode: BiasMode::Joint,
            solver: svm::default_training_options(),
        }
    }
}

impl CvOptions {
    fn ptsm_config(&self, p: &GridPoint) -> Result<PtsmConfig> {
        Ok(PtsmConfig {
            lambda1: self.lambda1,
            b_star: self.b_star,
            bias_mode: self.bias_mode,
            solver: self.solver,
            ..PtsmConfig::new(p.nu, KernelConfig::rbf(p.sigma)?, p.lambda2, p.lambda3)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub config: GridPoint,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    pub failed: bool,
    pub nonconverged_folds: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvTable {
    pub rows: Vec<CvRow>,
    pub best: usize,
}

impl CvTable {
    pub fn best_row(&self) -> &CvRow {
        &self.rows[self.best]
    }
}

struct FoldContext {
    labels: Vec<f64>,
    validation: Vec<Label>,
    train_rows: Vec<Vec<f64>>,
    validation_rows: Vec<Vec<f64>>,
    distances: SquaredDistances,
    priors: PriorConstraintSet,
}

impl FoldContext {
    fn build(train: &Dataset, fold: &dataset::Fold, arm: Arm, opts: &CvOptions) -> Result<FoldContext> {
        let tr = train.subset(&fold.train)?;
        let va = train.subset(&fold.validation)?;
        if !tr.has_both_classes() {
            return Err(PrismError::DegenerateSplit("fold training part has a single class".into()));
        }
        let priors = match arm {
            Arm::WithoutPriors => PriorConstraintSet::empty(opts.b_star),
            Arm::WithPriors(_) if opts.per_fold_mining => {
                MinedPriors::mine(&tr, opts.angle_step).0.constraint_set(&tr, opts.b_star)?
            }
            Arm::WithPriors(mined) => mined.constraint_set(&tr, opts.b_star)?,
        };
        Ok(FoldContext {
            labels: tr.label_values(),
            validation: va.samples().iter().map(|s| s.label).collect(),
            train_rows: tr.samples().iter().map(|s| s.features.clone()).collect(),
            validation_rows: va.samples().iter().map(|s| s.features.clone()).collect(),
            distances: SquaredDistances::new(&tr.rows())?,
            priors,
        })
    }
}

type Outcome = std::result::Result<(f64, bool), String>;

/// Validation accuracies for every λ pair at one (fold, ν, σ). Pairs run
/// in order, each warm-started from the previous solution; pairs that
/// coincide once empty prior sets are accounted for are solved once.
fn run_cell(ctx: &FoldContext, nu: f64, sigma: f64, pairs: &[(f64, f64)], opts: &CvOptions) -> Vec<Outcome> {
    let setup = || -> Result<_> {
        let kc = KernelConfig::rbf(sigma)?;
        let gram = ctx.distances.rbf_gram(sigma)?;
        let tr: Vec<&[f64]> = ctx.train_rows.iter().map(Vec::as_slice).collect();
        let va: Vec<&[f64]> = ctx.validation_rows.iter().map(Vec::as_slice).collect();
        let cross = kernel::cross_kernel(&va, &tr, &kc)?;
        Ok((gram, cross))
    };
    let (gram, cross) = match setup() {
        Ok(v) => v,
        Err(e) => return vec![Err(e.to_string()); pairs.len()],
    };
    let mut warm = WarmStart::default();
    let mut solved: Vec<((f64, f64), Outcome)> = Vec::new();
    let mut out = Vec::with_capacity(pairs.len());
    for &(l2, l3) in pairs {
        let eff = (
            if ctx.priors.q_pos() > 0 { l2 } else { 0.0 },
            if ctx.priors.q_neg() > 0 { l3 } else { 0.0 },
        );
        if let Some((_, o)) = solved.iter().find(|(k, _)| *k == eff) {
            out.push(o.clone());
            continue;
        }
        let point = GridPoint { nu, sigma, lambda2: eff.0, lambda3: eff.1 };
        let outcome = opts
            .ptsm_config(&point)
            .and_then(|cfg| ptsm::fit_ptsm_warm(&gram, &ctx.labels, &cfg, &ctx.priors, &warm))
            .map(|fit| {
                let sol = &fit.solution;
                let dv = svm::block_decision_values(&cross, &sol.alpha, &ctx.labels, sol.b);
                let right = dv.iter().zip(&ctx.validation).filter(|(d, l)| svm::label_of(**d) == **l).count();
                warm = WarmStart::from_report(&sol.report);
                (right as f64 / ctx.validation.len() as f64, sol.report.converged)
            })
            .map_err(|e| e.to_string());
        solved.push((eff, outcome.clone()));
        out.push(outcome);
    }
    out
}

/// Mean validation accuracy of every grid configuration over k folds.
/// A configuration that errors on any fold is flagged and scored 0; the
/// best row is the first attaining the highest mean.
pub fn grid_search_cv(train: &Dataset, grid: &GridSpec, arm: Arm, opts: &CvOptions) -> Result<CvTable> {
    grid.validate()?;
    let labels: Vec<Label> = train.samples().iter().map(|s| s.label).collect();
    let folds = dataset::kfold_indices(train.len(), opts.folds, opts.seed, opts.stratified.then_some(labels.as_slice()))?;
    let contexts: Vec<std::result::Result<FoldContext, String>> = folds
        .par_iter()
        .map(|f| FoldContext::build(train, f, arm, opts).map_err(|e| e.to_string()))
        .collect();

    let pairs = grid.lambda_pairs();
    let cells: Vec<(usize, usize, usize)> = (0..folds.len())
        .flat_map(|f| {
            (0..grid.nu_values.len()).flat_map(move |a| (0..grid.sigma_values.len()).map(move |s| (f, a, s)))
        })
        .collect();
    let results: Vec<Vec<Outcome>> = cells
        .par_iter()
        .map(|&(f, a, s)| match &contexts[f] {
            Ok(ctx) => run_cell(ctx, grid.nu_values[a], grid.sigma_values[s], &pairs, opts),
            Err(e) => vec![Err(e.clone()); pairs.len()],
        })
        .collect();

    let n_nu = grid.nu_values.len();
    let n_sigma = grid.sigma_values.len();
    let mut rows = Vec::with_capacity(grid.len());
    for (a, &nu) in grid.nu_values.iter().enumerate() {
        for (s, &sigma) in grid.sigma_values.iter().enumerate() {
            for (p, &(lambda2, lambda3)) in pairs.iter().enumerate() {
                let mut fold_accuracies = Vec::with_capacity(folds.len());
                let mut error = None;
                let mut nonconverged_folds = 0;
                for f in 0..folds.len() {
                    match &results[(f * n_nu + a) * n_sigma + s][p] {
                        Ok((acc, converged)) => {
                            fold_accuracies.push(*acc);
                            nonconverged_folds += usize::from(!converged);
                        }
                        Err(e) => {
                            fold_accuracies.push(0.0);
                            error.get_or_insert_with(|| format!("fold {f}: {e}"));
                        }
                    }
                }
                let failed = error.is_some();
                let mean_accuracy = if failed { 0.0 } else { stats::mean(&fold_accuracies) };
                rows.push(CvRow {
                    config: GridPoint { nu, sigma, lambda2, lambda3 },
                    mean_accuracy,
                    fold_accuracies,
                    failed,
                    nonconverged_folds,
                    error,
                });
            }
        }
    }
    let mut best: Option<usize> = None;
    for (i, r) in rows.iter().enumerate() {
        if !r.failed && best.is_none_or(|b| r.mean_accuracy > rows[b].mean_accuracy) {
            best = Some(i);
        }
    }
    match best {
        Some(best) => Ok(CvTable { rows, best }),
        None => Err(PrismError::InvalidConfig(format!(
            "every grid configuration failed; first error: {}",
            rows[0].error.as_deref().unwrap_or("unknown")
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub repeats: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub grid_subsample: usize,
    /// Replaces both λ grids when set (in units of 1/N).
    pub lambda_fractions: Option<Vec<f64>>,
    pub cv: CvOptions,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            repeats: DEFAULT_REPEATS,
            seed: 42,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            grid_subsample: 1,
            lambda_fractions: None,
            cv: CvOptions::default(),
        }
    }
}

impl ExperimentOptions {
    /// Grid for one repeat's training split.
    pub fn grid_for(&self, train: &Dataset) -> Result<(GridSpec, Vec<String>)> {
        let (mut grid, warnings) = GridSpec::standard(train)?;
        if let Some(fr) = &self.lambda_fractions {
            let n = train.len() as f64;
            let l: Vec<f64> = fr.iter().map(|f| f / n).collect();
            grid.lambda2_values = l.clone();
            grid.lambda3_values = l;
        }
        Ok((grid.subsample(self.grid_subsample), warnings))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmOutcome {
    pub config: GridPoint,
    pub cv_accuracy: f64,
    pub test_accuracy: f64,
    pub converged: bool,
    pub grid_size: usize,
    pub failed_configs: usize,
    /// Test-set labels, +1/−1, in test order.
    pub predictions: Vec<i8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatPriors {
    pub positive: Option<LinearPrior>,
    pub negative: Option<LinearPrior>,
    pub positive_rule: Option<String>,
    pub negative_rule: Option<String>,
    pub q_pos: usize,
    pub q_neg: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub repeat: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priors: Option<RepeatPriors>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub with_priors: Option<ArmOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub without_priors: Option<ArmOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed: Option<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Repeats that completed.
    pub m: usize,
    pub failed_repeats: usize,
    /// Percentages.
    pub ata_with: f64,
    pub std_with: f64,
    pub ata_without: f64,
    pub std_without: f64,
    pub p_value: f64,
    pub t_statistic: Option<f64>,
    pub mean_difference: f64,
    /// Set when fewer than two repeats completed, so std is reported as 0.
    pub degenerate_m: bool,
    /// Set when the paired differences have zero spread.
    pub degenerate_t: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RepeatTiming {
    pub repeat: usize,
    pub with_priors_s: f64,
    pub without_priors_s: f64,
    pub mining_s: f64,
}

/// Wall-clock figures; kept under one key so they can be dropped before
/// comparing reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Timing {
    pub apt_with_s: f64,
    pub apt_without_s: f64,
    pub total_s: f64,
    pub per_repeat: Vec<RepeatTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub dataset: String,
    pub n_samples: usize,
    pub n_features: usize,
    pub options: ExperimentOptions,
    pub repeats: Vec<RepeatRecord>,
    pub summary: Summary,
    pub timing: Timing,
}

/// Runs both arms once on a split: CV on `train`, retrain, then test.
fn run_arm(
    train: &Dataset,
    test: &Dataset,
    grid: &GridSpec,
    arm: Arm,
    opts: &CvOptions,
) -> Result<ArmOutcome> {
    let table = grid_search_cv(train, grid, arm, opts)?;
    let best = table.best_row();
    let cfg = opts.ptsm_config(&best.config)?;
    let priors = match arm {
        Arm::WithoutPriors => PriorConstraintSet::empty(opts.b_star),
        Arm::WithPriors(m) => m.constraint_set(train, opts.b_star)?,
    };
    let (model, _) = ptsm::train_ptsm(train, &cfg, &priors)?;
    let predictions = predict_all(&model, test)?;
    let right = predictions.iter().zip(test.samples()).filter(|(p, s)| **p as f64 == s.label.value()).count();
    Ok(ArmOutcome {
        config: best.config,
        cv_accuracy: best.mean_accuracy,
        test_accuracy: right as f64 / test.len().max(1) as f64,
        converged: model.converged,
        grid_size: grid.len(),
        failed_configs: table.rows.iter().filter(|r| r.failed).count(),
        predictions,
    })
}

fn predict_all(model: &SvmModel, test: &Dataset) -> Result<Vec<i8>> {
    if test.is_empty() {
        return Err(PrismError::EmptyTestSet);
    }
    test.samples().iter().map(|s| Ok(model.predict(&s.features)?.value() as i8)).collect()
}

struct RepeatRun {
    record: RepeatRecord,
    timing: RepeatTiming,
}

fn run_repeat(d: &Dataset, r: usize, opts: &ExperimentOptions) -> RepeatRun {
    let seed = opts.seed ^ r as u64;
    let mut record = RepeatRecord {
        repeat: r,
        seed,
        n_train: 0,
        n_test: 0,
        priors: None,
        with_priors: None,
        without_priors: None,
        failed: None,
        warnings: Vec::new(),
    };
    let mut timing = RepeatTiming { repeat: r, ..Default::default() };
    let mut body = || -> Result<()> {
        let (train, test) = dataset::split_with(d, opts.train_fraction, seed, opts.cv.stratified)?;
        let params = dataset::fit_minmax(&train);
        let train = train.scaled(&params)?;
        let test = test.scaled(&params)?;
        record.n_train = train.len();
        record.n_test = test.len();
        let (grid, warnings) = opts.grid_for(&train)?;
        record.warnings.extend(warnings);
        let cv = CvOptions { seed, ..opts.cv };

        let clock = Instant::now();
        let (mined, warnings) = MinedPriors::mine(&train, cv.angle_step);
        timing.mining_s = clock.elapsed().as_secs_f64();
        record.warnings.extend(warnings);
        let set = mined.constraint_set(&train, cv.b_star)?;
        record.warnings.extend(set.warnings.iter().cloned());
        record.priors = Some(RepeatPriors {
            positive_rule: mined.positive.as_ref().map(|p| p.to_string()),
            negative_rule: mined.negative.as_ref().map(|p| p.to_string()),
            positive: mined.positive.clone(),
            negative: mined.negative.clone(),
            q_pos: set.q_pos(),
            q_neg: set.q_neg(),
        });
        record.with_priors = Some(run_arm(&train, &test, &grid, Arm::WithPriors(&mined), &cv)?);
        timing.with_priors_s = clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        record.without_priors = Some(run_arm(&train, &test, &grid.without_priors(), Arm::WithoutPriors, &cv)?);
        timing.without_priors_s = clock.elapsed().as_secs_f64();
        Ok(())
    };
    if let Err(e) = body() {
        record.failed = Some(e.to_string());
    }
    RepeatRun { record, timing }
}

/// The repeated split / mine / search / test protocol for both arms.
/// Failed repeats are recorded and left out of the summary.
pub fn run_experiment(d: &Dataset, name: &str, opts: &ExperimentOptions) -> Result<ExperimentReport> {
    if opts.repeats == 0 {
        return Err(PrismError::InvalidConfig("repeats must be at least 1".into()));
    }
    let clock = Instant::now();
    let runs: Vec<RepeatRun> = (0..opts.repeats).map(|r| run_repeat(d, r, opts)).collect();
    let total_s = clock.elapsed().as_secs_f64();

    let done: Vec<&RepeatRecord> = runs.iter().map(|r| &r.record).filter(|r| r.failed.is_none()).collect();
    if done.is_empty() {
        let first = runs[0].record.failed.clone().unwrap_or_default();
        return Err(PrismError::InvalidConfig(format!("every repeat failed; first error: {first}")));
    }
    let pct = |f: fn(&RepeatRecord) -> f64| -> Vec<f64> { done.iter().map(|r| 100.0 * f(r)).collect() };
    let with = pct(|r| r.with_priors.as_ref().map_or(0.0, |a| a.test_accuracy));
    let without = pct(|r| r.without_priors.as_ref().map_or(0.0, |a| a.test_accuracy));
    let test = stats::paired_t_test(&with, &without)?;
    let summary = Summary {
        m: done.len(),
        failed_repeats: runs.len() - done.len(),
        ata_with: stats::mean(&with),
        std_with: stats::sample_std(&with),
        ata_without: stats::mean(&without),
        std_without: stats::sample_std(&without),
        p_value: test.p_value,
        t_statistic: test.t,
        mean_difference: test.mean_diff,
        degenerate_m: done.len() < 2,
        degenerate_t: test.degenerate,
    };
    let ok: Vec<&RepeatTiming> = runs.iter().filter(|r| r.record.failed.is_none()).map(|r| &r.timing).collect();
    let timing = Timing {
        apt_with_s: stats::mean(&ok.iter().map(|t| t.with_priors_s).collect::<Vec<_>>()),
        apt_without_s: stats::mean(&ok.iter().map(|t| t.without_priors_s).collect::<Vec<_>>()),
        total_s,
        per_repeat: runs.iter().map(|r| r.timing.clone()).collect(),
    };
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        dataset: name.to_string(),
        n_samples: d.len(),
        n_features: d.n_features(),
        options: opts.clone(),
        repeats: runs.into_iter().map(|r| r.record).collect(),
        summary,
        timing,
    })
}

pub const CSV_HEADER: [&str; 6] = ["dataset", "priors", "ATA%", "std", "p_value", "APT_s"];

impl ExperimentReport {
    /// JSON with the `timing` key removed.
    pub fn to_json_without_timing(&self) -> Result<String> {
        let mut v = serde_json::to_value(self).map_err(|e| PrismError::Schema(e.to_string()))?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timing");
        }
        serde_json::to_string_pretty(&v).map_err(|e| PrismError::Schema(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| PrismError::Schema(e.to_string()))
    }

    /// Two rows, with (+) and without (−) priors.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| PrismError::Io(e.to_string());
        w.write_record(CSV_HEADER).map_err(io)?;
        let s = &self.summary;
        let p = format!("{:.4}", s.p_value);
        w.write_record([
            self.dataset.as_str(),
            "+",
            &format!("{:.2}", s.ata_with),
            &format!("{:.2}", s.std_with),
            &p,
            &format!("{:.1}", self.timing.apt_with_s),
        ])
        .map_err(io)?;
        w.write_record([
            self.dataset.as_str(),
            "-",
            &format!("{:.2}", s.ata_without),
            &format!("{:.2}", s.std_without),
            &p,
            &format!("{:.1}", self.timing.apt_without_s),
        ])
        .map_err(io)?;
        let bytes = w.into_inner().map_err(|e| PrismError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| PrismError::Io(e.to_string()))
    }

    pub fn render_table(&self) -> String {
        let s = &self.summary;
        let mut out = String::new();
        out.push_str(&format!(
            "{:<16} {:<7} {:>16} {:>8} {:>10}\n",
            "dataset", "priors", "ATA (%)", "p-value", "APT (s)"
        ));
        for (sign, ata, std, apt) in [
            ("+", s.ata_with, s.std_with, self.timing.apt_with_s),
            ("-", s.ata_without, s.std_without, self.timing.apt_without_s),
        ] {
            out.push_str(&format!(
                "{:<16} {:<7} {:>16} {:>8.4} {:>10.1}\n",
                self.dataset,
                sign,
                format!("{ata:.2} ± {std:.2}"),
                s.p_value,
                apt
            ));
        }
        if let Some(p) = self.repeats.iter().find_map(|r| r.priors.as_ref()) {
            for rule in [&p.positive_rule, &p.negative_rule].into_iter().flatten() {
                out.push_str(&format!("prior (repeat 0): {rule}\n"));
            }
        }
        if s.degenerate_m {
            out.push_str("note: fewer than two repeats completed; std reported as 0\n");
        }
        if s.failed_repeats > 0 {
            out.push_str(&format!("note: {} repeat(s) failed and were excluded\n", s.failed_repeats));
        }
        out
    }
}
