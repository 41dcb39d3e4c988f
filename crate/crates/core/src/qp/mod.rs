//! Convex minimization over the ν-SVM dual feasible set
//! A = {α : αᵀy = 0, 0 ≤ α ≤ 1/N, αᵀ1 ≥ ν}.
//!
//! [`solve_projected_gradient`] is the production solver and
//! [`solve_bruteforce`] a grid-refinement oracle for tiny instances.

mod bruteforce;
mod projection;

pub use bruteforce::{solve_bruteforce, solve_bruteforce_with, BruteForceOptions};
pub use projection::project_onto_a;

use serde::{Deserialize, Serialize};

use crate::error::{PrismError, Result};

/// Feasible-set residual allowed on every reported iterate.
pub const FEASIBILITY_TOL: f64 = 1e-9;

const PROJECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSetA {
    y: Vec<f64>,
    upper: f64,
    nu: f64,
    n_pos: usize,
    n_neg: usize,
}

/// `2·min(N⁺, N⁻)/N`.
pub fn nu_max_of(n_pos: usize, n_neg: usize) -> f64 {
    let n = n_pos + n_neg;
    if n == 0 {
        return 0.0;
    }
    2.0 * n_pos.min(n_neg) as f64 / n as f64
}

impl FeasibleSetA {
    /// `y` holds ±1 labels. A `nu` that overshoots `nu_max` by rounding
    /// noise (≤ 1e-12) is clamped onto it.
    pub fn new(y: &[f64], nu: f64) -> Result<FeasibleSetA> {
        let n_pos = y.iter().filter(|&&v| v > 0.0).count();
        let n_neg = y.len() - n_pos;
        let nu_max = nu_max_of(n_pos, n_neg);
        if !(nu > 0.0) || nu > nu_max + 1e-12 || n_pos == 0 || n_neg == 0 {
            return Err(PrismError::InfeasibleSet { nu, nu_max });
        }
        Ok(FeasibleSetA {
            y: y.iter().map(|&v| if v > 0.0 { 1.0 } else { -1.0 }).collect(),
            upper: 1.0 / y.len() as f64,
            nu: nu.min(nu_max),
            n_pos,
            n_neg,
        })
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn nu_max(&self) -> f64 {
        nu_max_of(self.n_pos, self.n_neg)
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if n != self.y.len() {
            return Err(PrismError::DimensionMismatch { expected: self.y.len(), got: n });
        }
        Ok(())
    }

    /// A feasible starting point: each class carries ν/2 spread evenly.
    pub fn initial_point(&self) -> Vec<f64> {
        let p = 0.5 * self.nu / self.n_pos as f64;
        let m = 0.5 * self.nu / self.n_neg as f64;
        self.y.iter().map(|&v| if v > 0.0 { p } else { m }).collect()
    }

    /// Largest violation of the equality, box and sum constraints.
    pub fn max_residual(&self, alpha: &[f64]) -> f64 {
        let eq: f64 = alpha.iter().zip(&self.y).map(|(a, y)| a * y).sum::<f64>().abs();
        let boxv = alpha.iter().map(|&a| (-a).max(a - self.upper).max(0.0)).fold(0.0, f64::max);
        let sum = (self.nu - alpha.iter().sum::<f64>()).max(0.0);
        eq.max(boxv).max(sum)
    }

    pub fn contains(&self, alpha: &[f64], tol: f64) -> bool {
        alpha.len() == self.y.len() && self.max_residual(alpha) <= tol
    }
}

/// How an objective treats its scalar variable (the SVM bias, or τ).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarMode {
    /// The objective does not depend on the scalar.
    Unused,
    /// The objective minimizes the scalar out exactly via
    /// [`ConvexObjective::choose_scalar`].
    Eliminated,
}

/// A convex function of (α, s) for α in A and scalar s.
///
/// Evaluation goes through a cache vector that must be a *linear*
/// function of α (typically `K·(y∘α)`); the accelerated solver
/// extrapolates caches instead of recomputing them.
pub trait ConvexObjective: Sync {
    fn dim(&self) -> usize;

    fn scalar_mode(&self) -> ScalarMode {
        ScalarMode::Unused
    }

    /// Upper bound on the curvature of the smooth part (sets step sizes).
    fn curvature_bound(&self) -> f64;

    fn cache_len(&self) -> usize {
        0
    }

    fn fill_cache(&self, _alpha: &[f64], _cache: &mut [f64]) {}

    /// Scalar to use at `alpha`; `current` is returned unchanged unless
    /// the scalar is eliminated.
    fn choose_scalar(&self, _alpha: &[f64], _cache: &[f64], current: f64) -> f64 {
        current
    }

    /// `out = H·v` for the Hessian `H` of the smooth part, when available.
    /// Used to estimate curvature along the feasible directions.
    fn hessian_vec(&self, _v: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    fn value_cached(&self, alpha: &[f64], cache: &[f64], scalar: f64) -> f64;

    /// Writes a subgradient in α into `grad`.
    fn subgradient_cached(&self, alpha: &[f64], cache: &[f64], scalar: f64, grad: &mut [f64]);

    fn value(&self, alpha: &[f64], scalar: f64) -> f64 {
        let mut cache = vec![0.0; self.cache_len()];
        self.fill_cache(alpha, &mut cache);
        self.value_cached(alpha, &cache, scalar)
    }

    /// Value with the scalar chosen by the objective; returns (value, scalar).
    fn value_eliminated(&self, alpha: &[f64], scalar: f64) -> (f64, f64) {
        let mut cache = vec![0.0; self.cache_len()];
        self.fill_cache(alpha, &mut cache);
        let s = self.choose_scalar(alpha, &cache, scalar);
        (self.value_cached(alpha, &cache, s), s)
    }

    fn subgradient(&self, alpha: &[f64], scalar: f64, grad: &mut [f64]) {
        let mut cache = vec![0.0; self.cache_len()];
        self.fill_cache(alpha, &mut cache);
        self.subgradient_cached(alpha, &cache, scalar, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StepRule {
    /// `s_t = s0/√t`; `s0 = 1/L̂` when unset.
    Diminishing { s0: Option<f64> },
    /// Fixed step; `1/L̂` when unset.
    Constant { step: Option<f64> },
    /// Nesterov-accelerated projected steps of size `1/L̂` with
    /// function-value restarts.
    Accelerated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative best-objective improvement over `window` iterations
    /// below which the solve counts as converged.
    pub tol: f64,
    pub max_iter: usize,
    pub window: usize,
    pub step_rule: StepRule,
    #[serde(default)]
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-7,
            max_iter: 20_000,
            window: 50,
            step_rule: StepRule::Diminishing { s0: None },
            record_trace: false,
        }
    }
}

impl SolverOptions {
    pub fn accelerated() -> Self {
        SolverOptions { step_rule: StepRule::Accelerated, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub alpha: Vec<f64>,
    /// Scalar variable at the best iterate (0 when unused).
    pub b: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_step_norm: f64,
    /// Best-so-far objective after each iteration, when requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<f64>,
    /// Starting curvature estimate of the accelerated rule (0 otherwise).
    #[serde(default)]
    pub curvature: f64,
}

/// Starting point and curvature carried over from a related solve, e.g.
/// the neighbouring grid point with the same ν and kernel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WarmStart {
    pub alpha: Option<Vec<f64>>,
    pub curvature: Option<f64>,
}

impl WarmStart {
    pub fn from_report(report: &SolveReport) -> WarmStart {
        WarmStart {
            alpha: Some(report.alpha.clone()),
            curvature: (report.curvature > 0.0).then_some(report.curvature),
        }
    }
}

struct Best {
    value: f64,
    alpha: Vec<f64>,
    scalar: f64,
}

struct Monitor {
    history: Vec<f64>,
    tol: f64,
    window: usize,
}

impl Monitor {
    fn converged(&mut self, best: f64) -> bool {
        self.history.push(best);
        let t = self.history.len();
        if t <= self.window {
            return false;
        }
        let improvement = self.history[t - 1 - self.window] - best;
        improvement <= self.tol * best.abs()
    }
}

/// Projected (sub)gradient descent over A.
pub fn solve_projected_gradient(
    obj: &dyn ConvexObjective,
    set: &FeasibleSetA,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    solve_projected_gradient_warm(obj, set, opts, &WarmStart::default())
}

/// As [`solve_projected_gradient`], starting from the projection of
/// `warm.alpha` when given.
pub fn solve_projected_gradient_warm(
    obj: &dyn ConvexObjective,
    set: &FeasibleSetA,
    opts: &SolverOptions,
    warm: &WarmStart,
) -> Result<SolveReport> {
    let n = obj.dim();
    set.check_len(n)?;
    let start = match &warm.alpha {
        Some(a) => project_onto_a(a, set, PROJECTION_TOL)?,
        None => set.initial_point(),
    };
    let lhat = obj.curvature_bound().max(1e-12);
    match opts.step_rule {
        StepRule::Accelerated => accelerated(obj, set, opts, lhat, start, warm.curvature),
        StepRule::Diminishing { s0 } => plain(obj, set, opts, start, |t| s0.unwrap_or(1.0 / lhat) / (t as f64).sqrt()),
        StepRule::Constant { step } => plain(obj, set, opts, start, |_| step.unwrap_or(1.0 / lhat)),
    }
}

fn plain(
    obj: &dyn ConvexObjective,
    set: &FeasibleSetA,
    opts: &SolverOptions,
    mut alpha: Vec<f64>,
    step: impl Fn(usize) -> f64,
) -> Result<SolveReport> {
    let n = obj.dim();
    let mut cache = vec![0.0; obj.cache_len()];
    let mut grad = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut scalar = 0.0;
    let mut best = Best { value: f64::INFINITY, alpha: alpha.clone(), scalar };
    let mut monitor = Monitor { history: Vec::new(), tol: opts.tol, window: opts.window };
    let mut trace = Vec::new();
    let mut step_norm = 0.0;
    let mut converged = false;
    let mut iterations = 0;

    for t in 1..=opts.max_iter {
        iterations = t;
        obj.fill_cache(&alpha, &mut cache);
        scalar = obj.choose_scalar(&alpha, &cache, scalar);
        let value = obj.value_cached(&alpha, &cache, scalar);
        if value < best.value {
            best.value = value;
            best.alpha.copy_from_slice(&alpha);
            best.scalar = scalar;
        }
        if opts.record_trace {
            trace.push(best.value);
        }
        if monitor.converged(best.value) {
            converged = true;
            break;
        }
        obj.subgradient_cached(&alpha, &cache, scalar, &mut grad);
        let s = step(t);
        for ((tr, a), g) in trial.iter_mut().zip(&alpha).zip(&grad) {
            *tr = a - s * g;
        }
        let next = project_onto_a(&trial, set, PROJECTION_TOL)?;
        step_norm = norm_diff(&next, &alpha);
        alpha = next;
        if step_norm == 0.0 {
            // Fixed point of the projected step: stationary.
            converged = true;
            break;
        }
    }
    Ok(SolveReport {
        alpha: best.alpha,
        b: best.scalar,
        objective: best.value,
        iterations,
        converged,
        final_step_norm: step_norm,
        trace,
        curvature: 0.0,
    })
}

/// Largest eigenvalue of the Hessian restricted to `{d : dᵀy = 0}`, by
/// power iteration; `None` if the objective exposes no Hessian.
fn tangent_curvature(obj: &dyn ConvexObjective, set: &FeasibleSetA) -> Option<f64> {
    let n = obj.dim();
    let y = set.y();
    let project = |v: &mut [f64]| {
        let c = v.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        v.iter_mut().zip(y).for_each(|(a, b)| *a -= c * b);
    };
    // Deterministic, generic start vector.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0).collect();
    let mut hv = vec![0.0; n];
    project(&mut v);
    let mut lambda = 0.0;
    for _ in 0..CURVATURE_ITERS {
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Some(0.0);
        }
        v.iter_mut().for_each(|a| *a /= norm);
        if !obj.hessian_vec(&v, &mut hv) {
            return None;
        }
        project(&mut hv);
        lambda = v.iter().zip(&hv).map(|(a, b)| a * b).sum::<f64>();
        std::mem::swap(&mut v, &mut hv);
    }
    Some(lambda)
}

const CURVATURE_ITERS: usize = 30;

/// Accelerated projected steps with function-value restarts. The step
/// starts from the curvature along the equality-constrained subspace and
/// backtracks (up to `1/L̂`) whenever the quadratic upper model fails.
fn accelerated(
    obj: &dyn ConvexObjective,
    set: &FeasibleSetA,
    opts: &SolverOptions,
    lhat: f64,
    mut x: Vec<f64>,
    curvature: Option<f64>,
) -> Result<SolveReport> {
    let n = obj.dim();
    let m = obj.cache_len();
    let start_lip = match curvature.or_else(|| tangent_curvature(obj, set).map(|l| 1.1 * l)) {
        Some(l) if l > 0.0 => l.min(lhat),
        _ => lhat,
    };
    let mut lip = start_lip;
    let mut cx = vec![0.0; m];
    obj.fill_cache(&x, &mut cx);
    let mut scalar = obj.choose_scalar(&x, &cx, 0.0);
    let mut fx = obj.value_cached(&x, &cx, scalar);
    let mut x_prev = x.clone();
    let mut c_prev = cx.clone();
    let mut z = vec![0.0; n];
    let mut cz = vec![0.0; m];
    let mut grad = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut c_new = vec![0.0; m];
    let mut t_k = 1.0f64;
    let mut best = Best { value: fx, alpha: x.clone(), scalar };
    let mut monitor = Monitor { history: Vec::new(), tol: opts.tol, window: opts.window };
    let mut trace = Vec::new();
    let mut step_norm = 0.0;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=opts.max_iter {
        iterations = it;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_k * t_k).sqrt());
        let beta = (t_k - 1.0) / t_next;
        for i in 0..n {
            z[i] = x[i] + beta * (x[i] - x_prev[i]);
        }
        for i in 0..m {
            cz[i] = cx[i] + beta * (cx[i] - c_prev[i]);
        }
        let sz = obj.choose_scalar(&z, &cz, scalar);
        let fz = obj.value_cached(&z, &cz, sz);
        obj.subgradient_cached(&z, &cz, sz, &mut grad);
        let (x_new, s_new, f_new) = loop {
            let step = 1.0 / lip;
            for i in 0..n {
                trial[i] = z[i] - step * grad[i];
            }
            let x_new = project_onto_a(&trial, set, PROJECTION_TOL)?;
            obj.fill_cache(&x_new, &mut c_new);
            let s_new = obj.choose_scalar(&x_new, &c_new, sz);
            let f_new = obj.value_cached(&x_new, &c_new, s_new);
            let (mut lin, mut sq) = (0.0, 0.0);
            for i in 0..n {
                let d = x_new[i] - z[i];
                lin += grad[i] * d;
                sq += d * d;
            }
            let model = fz + lin + 0.5 * lip * sq;
            if f_new <= model + 1e-12 * fz.abs().max(f_new.abs()) || lip >= lhat {
                break (x_new, s_new, f_new);
            }
            lip = (2.0 * lip).min(lhat);
        };
        step_norm = norm_diff(&x_new, &x);

        if f_new > fx {
            // Restart: drop momentum, keep the better iterate.
            t_k = 1.0;
            x_prev.copy_from_slice(&x);
            c_prev.copy_from_slice(&cx);
        } else {
            t_k = t_next;
            x_prev = std::mem::replace(&mut x, x_new);
            std::mem::swap(&mut c_prev, &mut cx);
            cx.copy_from_slice(&c_new);
            fx = f_new;
            scalar = s_new;
        }
        if fx < best.value {
            best.value = fx;
            best.alpha.copy_from_slice(&x);
            best.scalar = scalar;
        }
        if opts.record_trace {
            trace.push(best.value);
        }
        if monitor.converged(best.value) {
            converged = true;
            break;
        }
        if step_norm == 0.0 && beta == 0.0 {
            converged = true;
            break;
        }
    }
    Ok(SolveReport {
        alpha: best.alpha,
        b: best.scalar,
        objective: best.value,
        iterations,
        converged,
        final_step_norm: step_norm,
        trace,
        curvature: start_lip,
    })
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
