//! Black-box ν-SVM: dual training, bias recovery and prediction.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Label};
use crate::error::{PrismError, Result};
use crate::kernel::{self, DenseMatrix, GramMatrix, KernelConfig, KernelKind};
use crate::qp::{self, ConvexObjective, FeasibleSetA, ScalarMode, SolveReport, SolverOptions, WarmStart};

/// Dual coefficients at or below this value are treated as zero.
pub const SV_THRESHOLD: f64 = 1e-12;

/// Relative slack used to decide that a coefficient sits at its upper bound.
const UPPER_REL_TOL: f64 = 1e-9;

/// `L(α) = −½ Σᵢⱼ αᵢαⱼyᵢyⱼKᵢⱼ`.
pub fn dual_objective(alpha: &[f64], k: &GramMatrix, y: &[f64]) -> Result<f64> {
    if alpha.len() != k.len() || y.len() != k.len() {
        return Err(PrismError::DimensionMismatch { expected: k.len(), got: alpha.len().min(y.len()) });
    }
    let u: Vec<f64> = alpha.iter().zip(y).map(|(a, y)| a * y).collect();
    let mut ku = vec![0.0; u.len()];
    k.matvec(&u, &mut ku);
    Ok(-0.5 * u.iter().zip(&ku).map(|(a, b)| a * b).sum::<f64>())
}

/// `−L(α)` as a [`ConvexObjective`]; the cache is `K(y∘α)`.
pub struct DualObjective<'a> {
    gram: &'a GramMatrix,
    y: &'a [f64],
    curvature: f64,
}

impl<'a> DualObjective<'a> {
    pub fn new(gram: &'a GramMatrix, y: &'a [f64]) -> DualObjective<'a> {
        DualObjective { gram, y, curvature: gram.max_abs_row_sum() }
    }

    pub fn gram(&self) -> &GramMatrix {
        self.gram
    }

    pub fn labels(&self) -> &[f64] {
        self.y
    }

    /// `½ Σ (yα)ᵢ cacheᵢ`.
    #[inline]
    pub fn quadratic(&self, alpha: &[f64], cache: &[f64]) -> f64 {
        0.5 * alpha.iter().zip(self.y).zip(cache).map(|((a, y), c)| a * y * c).sum::<f64>()
    }
}

impl ConvexObjective for DualObjective<'_> {
    fn dim(&self) -> usize {
        self.y.len()
    }

    fn curvature_bound(&self) -> f64 {
        self.curvature
    }

    fn cache_len(&self) -> usize {
        self.y.len()
    }

    fn fill_cache(&self, alpha: &[f64], cache: &mut [f64]) {
        // Column-wise over the nonzero coefficients; K is symmetric.
        cache.fill(0.0);
        for (i, (&a, &y)) in alpha.iter().zip(self.y).enumerate() {
            if a != 0.0 {
                let u = a * y;
                for (c, k) in cache.iter_mut().zip(self.gram.row(i)) {
                    *c += u * k;
                }
            }
        }
    }

    fn hessian_vec(&self, v: &[f64], out: &mut [f64]) -> bool {
        let u: Vec<f64> = v.iter().zip(self.y).map(|(a, y)| a * y).collect();
        self.gram.matvec(&u, out);
        out.iter_mut().zip(self.y).for_each(|(o, y)| *o *= y);
        true
    }

    fn value_cached(&self, alpha: &[f64], cache: &[f64], _scalar: f64) -> f64 {
        self.quadratic(alpha, cache)
    }

    fn subgradient_cached(&self, _alpha: &[f64], cache: &[f64], _scalar: f64, grad: &mut [f64]) {
        for ((g, y), c) in grad.iter_mut().zip(self.y).zip(cache) {
            *g = y * c;
        }
    }
}

/// The soft-margin form `−τ + λ₁·max(0, τ − L(α))` with τ as the scalar
/// variable. For λ₁ > 1 the best τ is exactly L(α).
pub struct SoftMarginObjective<'a> {
    dual: DualObjective<'a>,
    lambda1: f64,
}

impl<'a> SoftMarginObjective<'a> {
    pub fn new(gram: &'a GramMatrix, y: &'a [f64], lambda1: f64) -> Result<SoftMarginObjective<'a>> {
        if !(lambda1 > 1.0) {
            return Err(PrismError::InvalidConfig(format!("lambda1 must exceed 1, got {lambda1}")));
        }
        Ok(SoftMarginObjective { dual: DualObjective::new(gram, y), lambda1 })
    }
}

impl ConvexObjective for SoftMarginObjective<'_> {
    fn dim(&self) -> usize {
        self.dual.dim()
    }

    fn scalar_mode(&self) -> ScalarMode {
        ScalarMode::Eliminated
    }

    fn curvature_bound(&self) -> f64 {
        self.lambda1 * self.dual.curvature_bound()
    }

    fn cache_len(&self) -> usize {
        self.dual.cache_len()
    }

    fn fill_cache(&self, alpha: &[f64], cache: &mut [f64]) {
        self.dual.fill_cache(alpha, cache)
    }

    fn hessian_vec(&self, v: &[f64], out: &mut [f64]) -> bool {
        self.dual.hessian_vec(v, out);
        out.iter_mut().for_each(|o| *o *= self.lambda1);
        true
    }

    fn choose_scalar(&self, alpha: &[f64], cache: &[f64], _current: f64) -> f64 {
        -self.dual.quadratic(alpha, cache)
    }

    fn value_cached(&self, alpha: &[f64], cache: &[f64], tau: f64) -> f64 {
        let l = -self.dual.quadratic(alpha, cache);
        -tau + self.lambda1 * (tau - l).max(0.0)
    }

    fn subgradient_cached(&self, alpha: &[f64], cache: &[f64], tau: f64, grad: &mut [f64]) {
        let l = -self.dual.quadratic(alpha, cache);
        // At the kink the hinge weight 1/λ₁ zeroes the τ-derivative.
        let weight = if tau > l {
            self.lambda1
        } else if tau < l {
            0.0
        } else {
            1.0
        };
        self.dual.subgradient_cached(alpha, cache, tau, grad);
        for g in grad.iter_mut() {
            *g *= weight;
        }
    }
}

/// Kernel slack diagnostics of the soft-margin form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftMarginDiagnostics {
    pub tau: f64,
    pub theta: f64,
}

impl SoftMarginDiagnostics {
    pub fn new(tau: f64, dual_value: f64) -> Self {
        SoftMarginDiagnostics { tau, theta: (tau - dual_value).max(0.0) }
    }
}

/// Bias and margin from decision scores `f0 = K(y∘α)` at the training points.
pub fn bias_from_scores(alpha: &[f64], f0: &[f64], y: &[f64], upper: f64) -> (f64, f64) {
    let at_upper = |a: f64| a >= upper * (1.0 - UPPER_REL_TOL);
    let is_free = |a: f64| a > SV_THRESHOLD && !at_upper(a);
    let mean = |pos: bool| {
        let (s, c) = alpha
            .iter()
            .zip(f0)
            .zip(y)
            .filter(|((&a, _), &yi)| (yi > 0.0) == pos && is_free(a))
            .fold((0.0, 0usize), |(s, c), ((_, &f), _)| (s + f, c + 1));
        (c > 0).then(|| s / c as f64)
    };
    if let (Some(mp), Some(mn)) = (mean(true), mean(false)) {
        return (-(mp + mn) / 2.0, ((mp - mn) / 2.0).max(0.0));
    }
    // Fallback: bounded coefficients of each class, or the whole class if none.
    let extreme = |pos: bool| {
        let pick = |bounded_only: bool| {
            alpha
                .iter()
                .zip(f0)
                .zip(y)
                .filter(|((&a, _), &yi)| (yi > 0.0) == pos && (!bounded_only || at_upper(a)))
                .map(|((_, &f), _)| f)
                .fold(None, |acc: Option<f64>, f| {
                    Some(match acc {
                        None => f,
                        Some(v) if pos => v.min(f),
                        Some(v) => v.max(f),
                    })
                })
        };
        pick(true).or_else(|| pick(false)).unwrap_or(0.0)
    };
    let min_pos = extreme(true);
    let max_neg = extreme(false);
    (-(min_pos + max_neg) / 2.0, ((min_pos - max_neg) / 2.0).max(0.0))
}

/// Standard ν-SVM KKT bias recovery: returns `(b, rho)`.
pub fn recover_bias(alpha: &[f64], k: &GramMatrix, y: &[f64], upper: f64) -> Result<(f64, f64)> {
    if alpha.len() != k.len() || y.len() != k.len() {
        return Err(PrismError::DimensionMismatch { expected: k.len(), got: alpha.len() });
    }
    let u: Vec<f64> = alpha.iter().zip(y).map(|(a, y)| a * y).collect();
    let mut f0 = vec![0.0; u.len()];
    k.matvec(&u, &mut f0);
    Ok(bias_from_scores(alpha, &f0, y, upper))
}

/// Result of a dual solve over a precomputed Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub b: f64,
    pub rho: f64,
    pub report: SolveReport,
}

/// Maximizes L(α) over A for the given Gram matrix and labels.
pub fn solve_nu_svm(gram: &GramMatrix, y: &[f64], nu: f64, opts: &SolverOptions) -> Result<DualSolution> {
    solve_nu_svm_warm(gram, y, nu, opts, &WarmStart::default())
}

pub fn solve_nu_svm_warm(gram: &GramMatrix, y: &[f64], nu: f64, opts: &SolverOptions, warm: &WarmStart) -> Result<DualSolution> {
    let set = FeasibleSetA::new(y, nu).map_err(infeasible_nu)?;
    let obj = DualObjective::new(gram, y);
    let report = qp::solve_projected_gradient_warm(&obj, &set, opts, warm)?;
    let (b, rho) = recover_bias(&report.alpha, gram, y, set.upper())?;
    Ok(DualSolution { alpha: report.alpha.clone(), b, rho, report })
}

pub(crate) fn infeasible_nu(e: PrismError) -> PrismError {
    match e {
        PrismError::InfeasibleSet { nu, nu_max } => PrismError::InfeasibleNu { nu, nu_max },
        other => other,
    }
}

/// Solver settings used for model training.
pub fn default_training_options() -> SolverOptions {
    SolverOptions::accelerated()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    alpha: Vec<f64>,
    y: Vec<f64>,
    points: Vec<Vec<f64>>,
    /// Training-set index of each stored point.
    indices: Vec<usize>,
    support: Vec<usize>,
    n_train: usize,
    pub b: f64,
    pub rho: f64,
    pub nu: f64,
    pub kernel: KernelConfig,
    pub converged: bool,
}

impl SvmModel {
    /// Assembles a model over the full training set.
    pub fn from_solution(train: &Dataset, kernel: KernelConfig, nu: f64, sol: &DualSolution) -> SvmModel {
        SvmModel::assemble(
            sol.alpha.clone(),
            train.label_values(),
            train.samples().iter().map(|s| s.features.clone()).collect(),
            (0..train.len()).collect(),
            train.len(),
            sol.b,
            sol.rho,
            nu,
            kernel,
            sol.report.converged,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        alpha: Vec<f64>,
        y: Vec<f64>,
        points: Vec<Vec<f64>>,
        indices: Vec<usize>,
        n_train: usize,
        b: f64,
        rho: f64,
        nu: f64,
        kernel: KernelConfig,
        converged: bool,
    ) -> SvmModel {
        let support = alpha.iter().enumerate().filter(|(_, &a)| a > SV_THRESHOLD).map(|(i, _)| i).collect();
        SvmModel { alpha, y, points, indices, support, n_train, b, rho, nu, kernel, converged }
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn labels(&self) -> &[f64] {
        &self.y
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn n_features(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn support_indices(&self) -> &[usize] {
        &self.support
    }

    pub fn with_bias(&self, b: f64) -> SvmModel {
        SvmModel { b, ..self.clone() }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(PrismError::DimensionMismatch { expected: self.n_features(), got: x.len() });
        }
        Ok(())
    }

    /// `Σ_{αᵢ>0} αᵢyᵢk(x, xᵢ) + b`.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self
            .support
            .iter()
            .map(|&i| self.alpha[i] * self.y[i] * kernel::eval_unchecked(x, &self.points[i], &self.kernel))
            .sum::<f64>()
            + self.b)
    }

    /// Same as [`decision_value`](Self::decision_value) but summing over every
    /// stored point.
    pub fn decision_value_full(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| self.alpha[i] * self.y[i] * kernel::eval_unchecked(x, p, &self.kernel))
            .sum::<f64>()
            + self.b)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        Ok(label_of(self.decision_value(x)?))
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            kernel: self.kernel.kind,
            sigma: self.kernel.sigma,
            nu: self.nu,
            b: self.b,
            rho: self.rho,
            n_train: self.n_train,
            support: self
                .support
                .iter()
                .map(|&i| SupportVectorDoc {
                    index: self.indices[i],
                    alpha: self.alpha[i],
                    y: self.y[i],
                    features: self.points[i].clone(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<SvmModel> {
        let kernel = match doc.kernel {
            KernelKind::Rbf => KernelConfig::rbf(doc.sigma).map_err(|_| PrismError::Schema("field `sigma`: must be positive".into()))?,
            KernelKind::Linear => KernelConfig::linear(),
        };
        let dim = doc.support.first().map_or(0, |s| s.features.len());
        for (k, sv) in doc.support.iter().enumerate() {
            if sv.features.len() != dim {
                return Err(PrismError::Schema(format!("field `support[{k}].features`: expected {dim} entries")));
            }
            if sv.y != 1.0 && sv.y != -1.0 {
                return Err(PrismError::Schema(format!("field `support[{k}].y`: must be +1 or -1")));
            }
        }
        Ok(SvmModel::assemble(
            doc.support.iter().map(|s| s.alpha).collect(),
            doc.support.iter().map(|s| s.y).collect(),
            doc.support.iter().map(|s| s.features.clone()).collect(),
            doc.support.iter().map(|s| s.index).collect(),
            doc.n_train,
            doc.b,
            doc.rho,
            doc.nu,
            kernel,
            true,
        ))
    }
}

/// Sign with ties going to `+1`.
#[inline]
pub fn label_of(decision: f64) -> Label {
    if decision >= 0.0 {
        Label::Positive
    } else {
        Label::Negative
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportVectorDoc {
    pub index: usize,
    pub alpha: f64,
    pub y: f64,
    pub features: Vec<f64>,
}

/// JSON form of a trained model; only support vectors are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub kernel: KernelKind,
    pub sigma: f64,
    pub nu: f64,
    pub b: f64,
    pub rho: f64,
    pub n_train: usize,
    pub support: Vec<SupportVectorDoc>,
}

/// Trains a ν-SVM on `train` with the default training solver.
pub fn train_nu_svm(train: &Dataset, nu: f64, kernel: KernelConfig) -> Result<SvmModel> {
    train_nu_svm_with(train, nu, kernel, &default_training_options())
}

pub fn train_nu_svm_with(train: &Dataset, nu: f64, kernel: KernelConfig, opts: &SolverOptions) -> Result<SvmModel> {
    if !train.has_both_classes() {
        return Err(PrismError::SingleClass(train.samples()[0].label.value()));
    }
    let gram = kernel::gram(&train.rows(), &kernel)?;
    let sol = solve_nu_svm(&gram, &train.label_values(), nu, opts)?;
    Ok(SvmModel::from_solution(train, kernel, nu, &sol))
}

pub fn accuracy(model: &SvmModel, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(PrismError::EmptyTestSet);
    }
    let mut right = 0usize;
    for s in test.samples() {
        if model.predict(&s.features)? == s.label {
            right += 1;
        }
    }
    Ok(right as f64 / test.len() as f64)
}

/// Decision values for rows of a precomputed cross-kernel block
/// (`cross[q][i] = k(x_q, x_i)` over the training points).
pub fn block_decision_values(cross: &DenseMatrix, alpha: &[f64], y: &[f64], b: f64) -> Vec<f64> {
    let u: Vec<f64> = alpha.iter().zip(y).map(|(a, y)| if *a > SV_THRESHOLD { a * y } else { 0.0 }).collect();
    let mut out = vec![0.0; cross.rows()];
    cross.matvec(&u, &mut out);
    out.iter_mut().for_each(|v| *v += b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::{solve_bruteforce, StepRule};

    fn linear_gram(points: &[Vec<f64>]) -> GramMatrix {
        let refs: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
        kernel::gram(&refs, &KernelConfig::linear()).unwrap()
    }

    #[test]
    fn dual_objective_small_cases() {
        let k = linear_gram(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let y = [1.0, -1.0];
        assert_eq!(dual_objective(&[0.0, 0.0], &k, &y).unwrap(), 0.0);
        assert!((dual_objective(&[0.3, 0.3], &k, &y).unwrap() + 0.09).abs() < 1e-15);
        assert!(dual_objective(&[0.3], &k, &y).is_err());
    }

    #[test]
    fn dual_objective_matches_double_loop() {
        let pts = vec![vec![0.1, 0.7], vec![0.5, 0.2], vec![0.9, 0.9], vec![0.3, 0.4], vec![0.6, 0.1]];
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let cfg = KernelConfig::rbf(0.8).unwrap();
        let k = kernel::gram(&refs, &cfg).unwrap();
        let y = [1.0, -1.0, 1.0, -1.0, -1.0];
        let a = [0.05, 0.11, 0.17, 0.02, 0.09];
        let mut naive = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                naive += a[i] * a[j] * y[i] * y[j] * kernel::eval(&pts[i], &pts[j], &cfg).unwrap();
            }
        }
        assert!((dual_objective(&a, &k, &y).unwrap() + 0.5 * naive).abs() < 1e-14);
    }

    #[test]
    fn two_point_boundary_is_midpoint() {
        let d = Dataset::from_rows(vec![vec![0.0], vec![1.0]], &[1.0, -1.0]).unwrap();
        let m = train_nu_svm(&d, 1.0, KernelConfig::linear()).unwrap();
        // α = (½, ½) forced; f(x) = ½·0·x − ½·1·x + b with b = ¼.
        assert!((m.decision_value(&[0.5]).unwrap()).abs() < 1e-12);
        assert_eq!(m.predict(&[0.49]).unwrap(), Label::Positive);
        assert_eq!(m.predict(&[0.51]).unwrap(), Label::Negative);
    }

    #[test]
    fn infeasible_nu_rejected() {
        let d = Dataset::from_rows(vec![vec![0.0], vec![1.0], vec![2.0]], &[1.0, -1.0, -1.0]).unwrap();
        assert!(matches!(train_nu_svm(&d, 0.9, KernelConfig::linear()), Err(PrismError::InfeasibleNu { .. })));
    }

    #[test]
    fn separable_rbf_set_fits_training_data() {
        let rows = vec![vec![0.1, 0.1], vec![0.2, 0.15], vec![0.85, 0.9], vec![0.9, 0.8]];
        let d = Dataset::from_rows(rows, &[1.0, 1.0, -1.0, -1.0]).unwrap();
        let cfg = KernelConfig::rbf(1.0).unwrap();
        let m = train_nu_svm(&d, 0.2, cfg).unwrap();
        assert_eq!(accuracy(&m, &d).unwrap(), 1.0);
        let gram = kernel::gram(&d.rows(), &cfg).unwrap();
        let y = d.label_values();
        let set = FeasibleSetA::new(&y, 0.2).unwrap();
        let oracle = solve_bruteforce(&DualObjective::new(&gram, &y), &set, 3).unwrap();
        let ours = dual_objective(m.alpha(), &gram, &y).unwrap();
        assert!((-ours - oracle.objective).abs() < 1e-5);
    }

    #[test]
    fn support_sum_equals_full_sum() {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![(i as f64 * 0.37) % 1.0, (i as f64 * 0.61) % 1.0]).collect();
        let labels: Vec<f64> = (0..12).map(|i| if (i * 7) % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let d = Dataset::from_rows(rows, &labels).unwrap();
        let m = train_nu_svm(&d, 0.4, KernelConfig::rbf(0.5).unwrap()).unwrap();
        for x in [[0.3, 0.3], [0.9, 0.05], [0.5, 0.7]] {
            let a = m.decision_value(&x).unwrap();
            let b = m.decision_value_full(&x).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_support_vector_value() {
        let doc = ModelDocument {
            kernel: KernelKind::Rbf,
            sigma: 1.0,
            nu: 0.5,
            b: -0.25,
            rho: 0.0,
            n_train: 4,
            support: vec![SupportVectorDoc { index: 0, alpha: 0.2, y: 1.0, features: vec![0.3, 0.4] }],
        };
        let m = SvmModel::from_document(&doc).unwrap();
        assert!((m.decision_value(&[0.3, 0.4]).unwrap() - (0.2 - 0.25)).abs() < 1e-15);
        // Far away the RBF term vanishes and only b remains.
        assert!((m.decision_value(&[40.0, 40.0]).unwrap() + 0.25).abs() < 1e-12);
    }

    #[test]
    fn tie_goes_positive() {
        assert_eq!(label_of(2.3), Label::Positive);
        assert_eq!(label_of(-0.1), Label::Negative);
        assert_eq!(label_of(0.0), Label::Positive);
        assert_eq!(label_of(-0.0), Label::Positive);
    }

    #[test]
    fn bias_recovery_properties() {
        let k = linear_gram(&[vec![1.0], vec![-1.0]]);
        let (b, _) = recover_bias(&[0.25, 0.25], &k, &[1.0, -1.0], 0.5).unwrap();
        assert!(b.abs() < 1e-15);
        let alpha = [0.1, 0.2, 0.15, 0.05];
        let y = [1.0, -1.0, 1.0, -1.0];
        let f0 = [0.3, -0.2, 0.5, 0.1];
        let (b0, _) = bias_from_scores(&alpha, &f0, &y, 0.25);
        let shifted: Vec<f64> = f0.iter().map(|v| v + 0.7).collect();
        let (b1, _) = bias_from_scores(&alpha, &shifted, &y, 0.25);
        assert!((b1 - (b0 - 0.7)).abs() < 1e-15);
    }

    #[test]
    fn bias_reproduces_margin_on_free_vectors() {
        let rows = vec![vec![0.1, 0.2], vec![0.4, 0.9], vec![0.8, 0.3], vec![0.6, 0.6], vec![0.2, 0.7], vec![0.9, 0.9]];
        let y = [1.0, 1.0, -1.0, -1.0, 1.0, -1.0];
        let d = Dataset::from_rows(rows, &y).unwrap();
        let cfg = KernelConfig::rbf(1.0).unwrap();
        let opts = SolverOptions { tol: 1e-14, max_iter: 200_000, ..SolverOptions::accelerated() };
        let m = train_nu_svm_with(&d, 0.5, cfg, &opts).unwrap();
        let u = 1.0 / 6.0;
        for (i, &a) in m.alpha().iter().enumerate() {
            if a > 1e-9 && a < u * (1.0 - 1e-6) {
                let f = m.decision_value(&d.samples()[i].features).unwrap();
                assert!((y[i] * f - m.rho).abs() < 1e-6, "i={i} yf={} rho={}", y[i] * f, m.rho);
            }
        }
    }

    #[test]
    fn decision_affine_in_bias_and_scale_invariant() {
        let rows = vec![vec![0.0, 0.1], vec![0.3, 0.2], vec![0.9, 0.8], vec![0.7, 0.95]];
        let d = Dataset::from_rows(rows, &[1.0, 1.0, -1.0, -1.0]).unwrap();
        let m = train_nu_svm(&d, 0.5, KernelConfig::rbf(0.5).unwrap()).unwrap();
        let x = [0.4, 0.5];
        let v = m.decision_value(&x).unwrap();
        let shifted = m.with_bias(m.b + 0.125).decision_value(&x).unwrap();
        assert!((shifted - v - 0.125).abs() <= 1e-15);
        let mut doc = m.to_document();
        doc.b *= 2.0;
        doc.support.iter_mut().for_each(|s| s.alpha *= 2.0);
        let doubled = SvmModel::from_document(&doc).unwrap();
        assert_eq!(doubled.predict(&x).unwrap(), m.predict(&x).unwrap());
    }

    #[test]
    fn accuracy_edges() {
        let d = Dataset::from_rows(vec![vec![0.0], vec![1.0]], &[1.0, -1.0]).unwrap();
        let m = train_nu_svm(&d, 1.0, KernelConfig::linear()).unwrap();
        assert_eq!(accuracy(&m, &d).unwrap(), 1.0);
        let flipped = Dataset::from_rows(vec![vec![0.0], vec![1.0]], &[-1.0, 1.0]).unwrap();
        assert_eq!(accuracy(&m, &flipped).unwrap(), 0.0);
        let rows: Vec<Vec<f64>> = vec![vec![0.0]; 10];
        let labels: Vec<f64> = (0..10).map(|i| if i < 5 { 1.0 } else { -1.0 }).collect();
        let half = Dataset::from_rows(rows, &labels).unwrap();
        assert!((accuracy(&m, &half).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn diminishing_rule_also_trains() {
        let rows = vec![vec![0.1], vec![0.2], vec![0.8], vec![0.9]];
        let d = Dataset::from_rows(rows, &[1.0, 1.0, -1.0, -1.0]).unwrap();
        let opts = SolverOptions { step_rule: StepRule::Diminishing { s0: None }, ..Default::default() };
        let m = train_nu_svm_with(&d, 0.5, KernelConfig::rbf(0.5).unwrap(), &opts).unwrap();
        assert_eq!(accuracy(&m, &d).unwrap(), 1.0);
    }

    #[test]
    fn document_round_trip() {
        let rows = vec![vec![0.1, 0.3], vec![0.2, 0.1], vec![0.8, 0.7], vec![0.9, 0.6], vec![0.4, 0.5]];
        let d = Dataset::from_rows(rows, &[1.0, 1.0, -1.0, -1.0, 1.0]).unwrap();
        let m = train_nu_svm(&d, 0.6, KernelConfig::rbf(0.7).unwrap()).unwrap();
        let json = serde_json::to_string(&m.to_document()).unwrap();
        let back = SvmModel::from_document(&serde_json::from_str(&json).unwrap()).unwrap();
        for s in d.samples() {
            assert_eq!(m.decision_value(&s.features).unwrap(), back.decision_value(&s.features).unwrap());
        }
    }
}
