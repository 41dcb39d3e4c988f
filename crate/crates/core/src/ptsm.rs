//! ν-SVM with mined priors enforced softly at the training points.
//!
//! With hinge losses, the margin variable eliminated (λ₁ > 1 makes the
//! optimal τ equal L(α)) and the prior multipliers fixed at zero, the
//! training problem is
//!
//! ```text
//! J(α, b) = −L(α) + λ₂ Σ_{j∈P} max(0, b* − f(x_j)) + λ₃ Σ_{h∈H} max(0, b* + f(x_h))
//! ```
//!
//! minimized over α ∈ A and b ∈ ℝ, where P and H are the training points
//! satisfying the positive and negative antecedents. For fixed α the
//! b-part is convex piecewise linear, so b is minimized out exactly and
//! the solver only sees α.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{PrismError, Result};
use crate::kernel::{self, GramMatrix, KernelConfig};
use crate::prior_miner::{prior_satisfied, LinearPrior};
use crate::qp::{self, ConvexObjective, FeasibleSetA, ScalarMode, SolverOptions, WarmStart};
use crate::svm::{self, DualObjective, DualSolution, ModelDocument, SvmModel, SV_THRESHOLD};

pub const DEFAULT_LAMBDA1: f64 = 2.0;
pub const DEFAULT_B_STAR: f64 = 1.0;

/// Training points at which each prior is enforced.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PriorConstraintSet {
    pub pos_indices: Vec<usize>,
    pub neg_indices: Vec<usize>,
    pub b_star: f64,
    /// Points satisfying both antecedents.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conflicts: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl PriorConstraintSet {
    pub fn empty(b_star: f64) -> Self {
        PriorConstraintSet { b_star, ..Default::default() }
    }

    pub fn q_pos(&self) -> usize {
        self.pos_indices.len()
    }

    pub fn q_neg(&self) -> usize {
        self.neg_indices.len()
    }

    fn check(&self, n: usize) -> Result<()> {
        match self.pos_indices.iter().chain(&self.neg_indices).find(|&&k| k >= n) {
            Some(&k) => Err(PrismError::DimensionMismatch { expected: n, got: k + 1 }),
            None => Ok(()),
        }
    }
}

/// Indices of `train` satisfying each antecedent, whatever their label.
pub fn select_prior_points(
    train: &Dataset,
    p_pos: Option<&LinearPrior>,
    p_neg: Option<&LinearPrior>,
    b_star: f64,
) -> Result<PriorConstraintSet> {
    let pick = |p: Option<&LinearPrior>| -> Result<Vec<usize>> {
        let Some(p) = p else { return Ok(Vec::new()) };
        let mut out = Vec::new();
        for (k, s) in train.samples().iter().enumerate() {
            if prior_satisfied(&s.features, p)? {
                out.push(k);
            }
        }
        Ok(out)
    };
    let pos_indices = pick(p_pos)?;
    let neg_indices = pick(p_neg)?;
    let conflicts: Vec<usize> = pos_indices.iter().copied().filter(|k| neg_indices.binary_search(k).is_ok()).collect();
    let mut warnings = Vec::new();
    if pos_indices.is_empty() {
        warnings.push("positive prior selects no training point; its penalty vanishes".to_string());
    }
    if neg_indices.is_empty() {
        warnings.push("negative prior selects no training point; its penalty vanishes".to_string());
    }
    if !conflicts.is_empty() {
        warnings.push(format!("{} training point(s) satisfy both antecedents", conflicts.len()));
    }
    Ok(PriorConstraintSet { pos_indices, neg_indices, b_star, conflicts, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BiasMode {
    /// b minimized out of J exactly at every iterate.
    #[default]
    Joint,
    /// b recovered from margin support vectors at every iterate.
    KktAlternating,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtsmConfig {
    pub nu: f64,
    pub kernel: KernelConfig,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub b_star: f64,
    pub bias_mode: BiasMode,
    pub solver: SolverOptions,
}

impl PtsmConfig {
    pub fn new(nu: f64, kernel: KernelConfig, lambda2: f64, lambda3: f64) -> PtsmConfig {
        PtsmConfig {
            nu,
            kernel,
            lambda1: DEFAULT_LAMBDA1,
            lambda2,
            lambda3,
            b_star: DEFAULT_B_STAR,
            bias_mode: BiasMode::Joint,
            solver: svm::default_training_options(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 > 1.0) {
            return Err(PrismError::InvalidConfig(format!("lambda1 must exceed 1, got {}", self.lambda1)));
        }
        if !(self.lambda2 >= 0.0 && self.lambda3 >= 0.0) {
            return Err(PrismError::InvalidConfig("lambda2 and lambda3 must be nonnegative".into()));
        }
        if !self.b_star.is_finite() {
            return Err(PrismError::InvalidConfig("b_star must be finite".into()));
        }
        Ok(())
    }

    fn penalties_active(&self, priors: &PriorConstraintSet) -> bool {
        (self.lambda2 > 0.0 && priors.q_pos() > 0) || (self.lambda3 > 0.0 && priors.q_neg() > 0)
    }
}

/// `J(α, b)` evaluated term by term.
pub fn reduced_objective(
    alpha: &[f64],
    b: f64,
    cfg: &PtsmConfig,
    k: &GramMatrix,
    y: &[f64],
    priors: &PriorConstraintSet,
) -> Result<f64> {
    let f1 = -svm::dual_objective(alpha, k, y)?;
    priors.check(k.len())?;
    let g = scores(alpha, k, y);
    let pos: f64 = priors.pos_indices.iter().map(|&j| (priors.b_star - g[j] - b).max(0.0)).sum();
    let neg: f64 = priors.neg_indices.iter().map(|&h| (priors.b_star + g[h] + b).max(0.0)).sum();
    Ok(f1 + cfg.lambda2 * pos + cfg.lambda3 * neg)
}

/// `K(y∘α)`.
fn scores(alpha: &[f64], k: &GramMatrix, y: &[f64]) -> Vec<f64> {
    let u: Vec<f64> = alpha.iter().zip(y).map(|(a, y)| a * y).collect();
    let mut g = vec![0.0; u.len()];
    k.matvec(&u, &mut g);
    g
}

/// `J` as a function of α with b eliminated.
pub struct PtsmObjective<'a> {
    dual: DualObjective<'a>,
    pos: &'a [usize],
    neg: &'a [usize],
    lambda2: f64,
    lambda3: f64,
    b_star: f64,
    upper: f64,
    mode: BiasMode,
}

impl<'a> PtsmObjective<'a> {
    pub fn new(gram: &'a GramMatrix, y: &'a [f64], cfg: &PtsmConfig, priors: &'a PriorConstraintSet) -> Result<Self> {
        cfg.validate()?;
        priors.check(gram.len())?;
        if y.len() != gram.len() {
            return Err(PrismError::DimensionMismatch { expected: gram.len(), got: y.len() });
        }
        Ok(PtsmObjective {
            dual: DualObjective::new(gram, y),
            pos: &priors.pos_indices,
            neg: &priors.neg_indices,
            lambda2: cfg.lambda2,
            lambda3: cfg.lambda3,
            b_star: priors.b_star,
            upper: 1.0 / y.len() as f64,
            mode: cfg.bias_mode,
        })
    }

    /// Hinge-activity weights at (cache, b). Kinks receive the weight that
    /// makes the b-subgradient vanish when that is possible.
    fn weights(&self, cache: &[f64], b: f64) -> (Vec<f64>, Vec<f64>) {
        let mut wp = vec![0.0; self.pos.len()];
        let mut wh = vec![0.0; self.neg.len()];
        let (mut pa, mut pk, mut ha, mut hk) = (0usize, 0usize, 0usize, 0usize);
        for (w, &j) in wp.iter_mut().zip(self.pos) {
            let c = self.b_star - cache[j];
            if c > b {
                *w = 1.0;
                pa += 1;
            } else if c == b {
                *w = f64::NAN;
                pk += 1;
            }
        }
        for (w, &h) in wh.iter_mut().zip(self.neg) {
            let d = -self.b_star - cache[h];
            if d < b {
                *w = 1.0;
                ha += 1;
            } else if d == b {
                *w = f64::NAN;
                hk += 1;
            }
        }
        let d = self.lambda3 * ha as f64 - self.lambda2 * pa as f64;
        let theta_p = if d > 0.0 && pk > 0 && self.lambda2 > 0.0 { (d / (self.lambda2 * pk as f64)).min(1.0) } else { 0.0 };
        let theta_h = if d < 0.0 && hk > 0 && self.lambda3 > 0.0 { (-d / (self.lambda3 * hk as f64)).min(1.0) } else { 0.0 };
        wp.iter_mut().filter(|w| w.is_nan()).for_each(|w| *w = theta_p);
        wh.iter_mut().filter(|w| w.is_nan()).for_each(|w| *w = theta_h);
        (wp, wh)
    }

    /// Interval of minimizers of the b-part for scores `cache`.
    pub fn bias_interval(&self, cache: &[f64]) -> (f64, f64) {
        // (position, is_positive_hinge)
        let mut breaks: Vec<(f64, bool)> = Vec::with_capacity(self.pos.len() + self.neg.len());
        if self.lambda2 > 0.0 {
            breaks.extend(self.pos.iter().map(|&j| (self.b_star - cache[j], true)));
        }
        if self.lambda3 > 0.0 {
            breaks.extend(self.neg.iter().map(|&h| (-self.b_star - cache[h], false)));
        }
        breaks.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        // Right slope: λ₃·(negative hinges switched on) − λ₂·(positive hinges still on).
        let mut pos_on = if self.lambda2 > 0.0 { self.pos.len() } else { 0 };
        let mut neg_on = 0usize;
        let slope_sign = |pos_on: usize, neg_on: usize| (self.lambda3 * neg_on as f64).total_cmp(&(self.lambda2 * pos_on as f64));
        let mut lo = if slope_sign(pos_on, neg_on).is_ge() { f64::NEG_INFINITY } else { f64::NAN };
        let mut hi = f64::INFINITY;
        let mut k = 0;
        while k < breaks.len() {
            let x = breaks[k].0;
            while k < breaks.len() && breaks[k].0 == x {
                if breaks[k].1 {
                    pos_on -= 1;
                } else {
                    neg_on += 1;
                }
                k += 1;
            }
            let sign = slope_sign(pos_on, neg_on);
            if lo.is_nan() && sign.is_ge() {
                lo = x;
            }
            if sign.is_gt() {
                hi = x;
                break;
            }
        }
        if lo.is_nan() {
            lo = hi;
        }
        (lo, hi)
    }

    fn kkt_bias(&self, alpha: &[f64], cache: &[f64]) -> f64 {
        svm::bias_from_scores(alpha, cache, self.dual.labels(), self.upper).0
    }
}

impl ConvexObjective for PtsmObjective<'_> {
    fn dim(&self) -> usize {
        self.dual.dim()
    }

    fn scalar_mode(&self) -> ScalarMode {
        ScalarMode::Eliminated
    }

    fn curvature_bound(&self) -> f64 {
        self.dual.curvature_bound()
    }

    fn cache_len(&self) -> usize {
        self.dual.cache_len()
    }

    fn fill_cache(&self, alpha: &[f64], cache: &mut [f64]) {
        self.dual.fill_cache(alpha, cache)
    }

    fn hessian_vec(&self, v: &[f64], out: &mut [f64]) -> bool {
        self.dual.hessian_vec(v, out)
    }

    fn choose_scalar(&self, alpha: &[f64], cache: &[f64], _current: f64) -> f64 {
        let kkt = self.kkt_bias(alpha, cache);
        match self.mode {
            BiasMode::KktAlternating => kkt,
            BiasMode::Joint => {
                let (lo, hi) = self.bias_interval(cache);
                kkt.max(lo).min(hi)
            }
        }
    }

    fn value_cached(&self, alpha: &[f64], cache: &[f64], b: f64) -> f64 {
        let pos: f64 = self.pos.iter().map(|&j| (self.b_star - cache[j] - b).max(0.0)).sum();
        let neg: f64 = self.neg.iter().map(|&h| (self.b_star + cache[h] + b).max(0.0)).sum();
        self.dual.quadratic(alpha, cache) + self.lambda2 * pos + self.lambda3 * neg
    }

    fn subgradient_cached(&self, _alpha: &[f64], cache: &[f64], b: f64, grad: &mut [f64]) {
        let (wp, wh) = self.weights(cache, b);
        // grad = y∘(cache + K v), v sparse on the prior points.
        let mut inner = cache.to_vec();
        let gram = self.dual.gram();
        let mut add_row = |idx: usize, coef: f64| {
            if coef != 0.0 {
                for (t, kv) in inner.iter_mut().zip(gram.row(idx)) {
                    *t += coef * kv;
                }
            }
        };
        for (&w, &j) in wp.iter().zip(self.pos) {
            add_row(j, -self.lambda2 * w);
        }
        for (&w, &h) in wh.iter().zip(self.neg) {
            add_row(h, self.lambda3 * w);
        }
        for ((g, y), t) in grad.iter_mut().zip(self.dual.labels()).zip(&inner) {
            *g = y * t;
        }
    }
}

/// Slack values and the Lagrangian split of J.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtsmDiagnostics {
    pub tau: f64,
    pub theta: f64,
    pub zeta: Vec<f64>,
    pub varsigma: Vec<f64>,
    #[serde(rename = "F1")]
    pub f1: f64,
    #[serde(rename = "F2t")]
    pub f2t: f64,
    #[serde(rename = "F3t")]
    pub f3t: f64,
    #[serde(rename = "G1")]
    pub g1: f64,
    #[serde(rename = "G2")]
    pub g2: f64,
    /// `|F1 + F̃2 + F̃3 − (G1 − G2)|`.
    pub identity_residual: f64,
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Evaluates the F/G split for arbitrary multiplier vectors.
#[allow(clippy::too_many_arguments)]
pub fn decompose(
    alpha: &[f64],
    b: f64,
    beta_t: &[f64],
    gamma_t: &[f64],
    cfg: &PtsmConfig,
    k: &GramMatrix,
    y: &[f64],
    priors: &PriorConstraintSet,
) -> Result<PtsmDiagnostics> {
    let n = k.len();
    if alpha.len() != n || y.len() != n {
        return Err(PrismError::DimensionMismatch { expected: n, got: alpha.len().min(y.len()) });
    }
    priors.check(n)?;
    if beta_t.len() != priors.q_pos() {
        return Err(PrismError::DimensionMismatch { expected: priors.q_pos(), got: beta_t.len() });
    }
    if gamma_t.len() != priors.q_neg() {
        return Err(PrismError::DimensionMismatch { expected: priors.q_neg(), got: gamma_t.len() });
    }
    let g = scores(alpha, k, y);
    let f1 = 0.5 * alpha.iter().zip(y).zip(&g).map(|((a, y), g)| a * y * g).sum::<f64>();
    let bs = priors.b_star;
    let mut warnings = Vec::new();
    let mut bound_check = |w: f64, lambda: f64, a: f64, what: &str| {
        if w < 0.0 || (a > SV_THRESHOLD && w * a > lambda * (1.0 + 1e-12)) {
            warnings.push(format!("{what} multiplier {w} outside [0, λ/α]"));
        }
    };
    let (mut f2t, mut kern_pos, mut lin_pos) = (0.0, 0.0, 0.0);
    for (&w, &j) in beta_t.iter().zip(&priors.pos_indices) {
        bound_check(w, cfg.lambda2, alpha[j], "positive");
        let wa = w * alpha[j];
        f2t -= wa * (g[j] + b - bs);
        kern_pos += wa * g[j];
        lin_pos += wa * (b - bs);
    }
    let (mut f3t, mut kern_neg, mut lin_neg) = (0.0, 0.0, 0.0);
    for (&w, &h) in gamma_t.iter().zip(&priors.neg_indices) {
        bound_check(w, cfg.lambda3, alpha[h], "negative");
        let wa = w * alpha[h];
        f3t += wa * (g[h] + b + bs);
        kern_neg += wa * g[h];
        lin_neg += wa * (b + bs);
    }
    let g1 = f1 - kern_pos + kern_neg;
    let g2 = lin_pos - lin_neg;
    let zeta: Vec<f64> = priors.pos_indices.iter().map(|&j| (bs - g[j] - b).max(0.0)).collect();
    let varsigma: Vec<f64> = priors.neg_indices.iter().map(|&h| (bs + g[h] + b).max(0.0)).collect();
    let objective = f1 + cfg.lambda2 * zeta.iter().sum::<f64>() + cfg.lambda3 * varsigma.iter().sum::<f64>();
    let tau = -f1;
    Ok(PtsmDiagnostics {
        tau,
        theta: (tau - (-f1)).max(0.0),
        zeta,
        varsigma,
        f1,
        f2t,
        f3t,
        g1,
        g2,
        identity_residual: (f1 + f2t + f3t - (g1 - g2)).abs(),
        objective,
        warnings,
    })
}

/// Multipliers that reproduce J through the split: `λ/αⱼ` on active hinges.
pub fn hinge_multipliers(alpha: &[f64], b: f64, cfg: &PtsmConfig, k: &GramMatrix, y: &[f64], priors: &PriorConstraintSet) -> (Vec<f64>, Vec<f64>) {
    let g = scores(alpha, k, y);
    let pick = |a: f64, active: bool, lambda: f64| if active && a > SV_THRESHOLD { lambda / a } else { 0.0 };
    let beta = priors.pos_indices.iter().map(|&j| pick(alpha[j], priors.b_star - g[j] - b > 0.0, cfg.lambda2)).collect();
    let gamma = priors.neg_indices.iter().map(|&h| pick(alpha[h], priors.b_star + g[h] + b > 0.0, cfg.lambda3)).collect();
    (beta, gamma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PtsmFit {
    pub solution: DualSolution,
    pub diagnostics: PtsmDiagnostics,
}

/// Trains over a precomputed Gram matrix. Without active penalties this
/// is exactly [`svm::solve_nu_svm`].
pub fn fit_ptsm(gram: &GramMatrix, y: &[f64], cfg: &PtsmConfig, priors: &PriorConstraintSet) -> Result<PtsmFit> {
    fit_ptsm_warm(gram, y, cfg, priors, &WarmStart::default())
}

pub fn fit_ptsm_warm(
    gram: &GramMatrix,
    y: &[f64],
    cfg: &PtsmConfig,
    priors: &PriorConstraintSet,
    warm: &WarmStart,
) -> Result<PtsmFit> {
    cfg.validate()?;
    priors.check(gram.len())?;
    let solution = if cfg.penalties_active(priors) {
        let set = FeasibleSetA::new(y, cfg.nu).map_err(svm::infeasible_nu)?;
        let obj = PtsmObjective::new(gram, y, cfg, priors)?;
        let report = qp::solve_projected_gradient_warm(&obj, &set, &cfg.solver, warm)?;
        let (_, rho) = svm::recover_bias(&report.alpha, gram, y, set.upper())?;
        DualSolution { alpha: report.alpha.clone(), b: report.b, rho, report }
    } else {
        svm::solve_nu_svm_warm(gram, y, cfg.nu, &cfg.solver, warm)?
    };
    let (beta, gamma) = hinge_multipliers(&solution.alpha, solution.b, cfg, gram, y, priors);
    let mut diagnostics = decompose(&solution.alpha, solution.b, &beta, &gamma, cfg, gram, y, priors)?;
    diagnostics.warnings.extend(priors.warnings.iter().cloned());
    Ok(PtsmFit { solution, diagnostics })
}

pub fn train_ptsm(train: &Dataset, cfg: &PtsmConfig, priors: &PriorConstraintSet) -> Result<(SvmModel, PtsmDiagnostics)> {
    if !train.has_both_classes() {
        return Err(PrismError::SingleClass(train.samples()[0].label.value()));
    }
    let gram = kernel::gram(&train.rows(), &cfg.kernel)?;
    let fit = fit_ptsm(&gram, &train.label_values(), cfg, priors)?;
    Ok((SvmModel::from_solution(train, cfg.kernel, cfg.nu, &fit.solution), fit.diagnostics))
}

/// The `priors` block of a saved model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PriorsBlock {
    pub positive: Option<LinearPrior>,
    pub negative: Option<LinearPrior>,
    pub q_pos: usize,
    pub q_neg: usize,
    pub lambda2: f64,
    pub lambda3: f64,
    pub b_star: f64,
}

/// Saved model: the plain SVM document plus priors and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtsmModelDocument {
    #[serde(flatten)]
    pub model: ModelDocument,
    pub priors: PriorsBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<PtsmDiagnostics>,
}
