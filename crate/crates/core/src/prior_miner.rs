//! Mining of linear class-boundary rules over feature pairs.
//!
//! For every pair (i, j) and every angle φ on a fixed grid, the line
//! `cos φ·x⁽ⁱ⁾ + sin φ·x⁽ʲ⁾ + c = 0` is pushed as far as it can go while
//! keeping every opposite-class sample strictly above it. The rule's
//! support is the number of target-class samples left on or below it.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Label};
use crate::error::{PrismError, Result};

/// Gap kept between the line and the nearest opposite-class sample.
pub const OFFSET_EPS: f64 = 1e-9;

pub const DEFAULT_ANGLE_STEP: f64 = 0.1;

/// A mined rule `cos φ·x⁽ⁱ⁾ + sin φ·x⁽ʲ⁾ + c ≤ 0 ⇒ y = class`.
/// Feature indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPrior {
    pub class: Label,
    pub i: usize,
    pub j: usize,
    pub phi: f64,
    pub c: f64,
    pub support: usize,
    pub coefficients: [f64; 2],
}

impl LinearPrior {
    pub fn new(class: Label, i: usize, j: usize, phi: f64, c: f64, support: usize) -> LinearPrior {
        LinearPrior { class, i, j, phi, c, support, coefficients: [phi.cos(), phi.sin()] }
    }

    /// `cos φ·x⁽ⁱ⁾ + sin φ·x⁽ʲ⁾ + c`.
    #[inline]
    pub fn antecedent_value(&self, x: &[f64]) -> f64 {
        self.coefficients[0] * x[self.i - 1] + self.coefficients[1] * x[self.j - 1] + self.c
    }

    /// Rendering of the left-hand side, e.g. `0.6347·x(1) − 0.7728·x(4) − 0.0156`.
    pub fn lhs_string(&self) -> String {
        let mut out = String::new();
        for (coef, idx) in [(self.coefficients[0], self.i), (self.coefficients[1], self.j)] {
            if format!("{:.4}", coef.abs()) == "0.0000" {
                continue;
            }
            push_term(&mut out, coef, Some(idx));
        }
        push_term(&mut out, self.c, None);
        out
    }
}

fn push_term(out: &mut String, v: f64, idx: Option<usize>) {
    let body = match idx {
        Some(i) => format!("{:.4}·x({i})", v.abs()),
        None => format!("{:.4}", v.abs()),
    };
    let negative = v < 0.0 && format!("{:.4}", v.abs()) != "0.0000";
    if out.is_empty() {
        if negative {
            out.push('−');
        }
    } else {
        out.push_str(if negative { " − " } else { " + " });
    }
    out.push_str(&body);
}

impl fmt::Display for LinearPrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ≤ 0 ⇒ y = {}", self.lhs_string(), self.class)
    }
}

/// Best line for one feature pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub i: usize,
    pub j: usize,
    pub phi: f64,
    pub c: f64,
    pub support: usize,
    /// Both features are constant on the mining set.
    #[serde(default)]
    pub constant_pair: bool,
}

impl PairResult {
    pub fn to_prior(&self, class: Label) -> LinearPrior {
        LinearPrior::new(class, self.i, self.j, self.phi, self.c, self.support)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningReport {
    pub class: Label,
    pub angle_step: f64,
    pub pairs: Vec<PairResult>,
    pub best: LinearPrior,
    /// Every prior attaining the best support, in pair order.
    pub all_best: Vec<LinearPrior>,
    pub seconds: f64,
}

impl MiningReport {
    /// Per-pair table in the layout `i-j | rule | Ω`.
    pub fn render_table(&self) -> String {
        let rules: Vec<String> = self.pairs.iter().map(|p| format!("{} ≤ 0", p.to_prior(self.class).lhs_string())).collect();
        let width = rules.iter().map(|r| r.chars().count()).max().unwrap_or(0).max(4);
        let mut out = format!("{:<6} {:<width$} {:>5}\n", "i-j", "rule", "Ω");
        for (p, rule) in self.pairs.iter().zip(&rules) {
            let pair = format!("{}-{}", p.i, p.j);
            let pad = width - rule.chars().count();
            let mark = if p.support == self.best.support { "*" } else { "" };
            out.push_str(&format!("{pair:<6} {rule}{} {:>5}{mark}\n", " ".repeat(pad), p.support));
        }
        out.push_str(&format!("best: {}  (Ω = {})\n", self.best, self.best.support));
        out
    }
}

/// The angle grid `{k·step : 0 ≤ k ≤ ⌊2π/step⌋}`.
pub fn angle_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(PrismError::InvalidConfig(format!("angle step must be positive, got {step}")));
    }
    let count = (std::f64::consts::TAU / step).floor() as usize;
    Ok((0..=count).map(|k| k as f64 * step).collect())
}

/// Offset putting the line just below `m`, strictly.
fn offset_below(m: f64) -> f64 {
    let mut c = -m + OFFSET_EPS;
    while m + c <= 0.0 {
        c = c.next_up();
    }
    c
}

struct PairData<'a> {
    target: Vec<(f64, f64)>,
    opposite: Vec<(f64, f64)>,
    angles: &'a [f64],
}

impl PairData<'_> {
    fn best(&self) -> (f64, f64, usize) {
        let mut best = (0.0, 0.0, 0usize);
        let mut first = true;
        for &phi in self.angles {
            let (cs, sn) = (phi.cos(), phi.sin());
            let m = self.opposite.iter().map(|&(a, b)| cs * a + sn * b).fold(f64::INFINITY, f64::min);
            let c = offset_below(m);
            let support = self.target.iter().filter(|&&(a, b)| cs * a + sn * b + c <= 0.0).count();
            if first || support > best.2 {
                best = (phi, c, support);
                first = false;
            }
        }
        best
    }
}

fn pair_data<'a>(train: &Dataset, i: usize, j: usize, target: Label, angles: &'a [f64]) -> PairData<'a> {
    let mut data = PairData { target: Vec::new(), opposite: Vec::new(), angles };
    for s in train.samples() {
        let point = (s.features[i - 1], s.features[j - 1]);
        if s.label == target {
            data.target.push(point);
        } else {
            data.opposite.push(point);
        }
    }
    data
}

fn check_pair(train: &Dataset, i: usize, j: usize) -> Result<()> {
    let n = train.n_features();
    if i == 0 || j == 0 || i > n || j > n {
        return Err(PrismError::DimensionMismatch { expected: n, got: i.max(j) });
    }
    if i == j {
        return Err(PrismError::InvalidConfig(format!("feature pair needs two distinct indices, got {i} twice")));
    }
    Ok(())
}

/// Best (φ, c, support) for the 1-based pair (i, j); ties go to the
/// smallest φ.
pub fn mine_pair(train: &Dataset, i: usize, j: usize, target: Label, angle_step: f64) -> Result<PairResult> {
    check_pair(train, i, j)?;
    if train.class_count(target.opposite()) == 0 {
        return Err(PrismError::NoOppositeClass);
    }
    let angles = angle_grid(angle_step)?;
    Ok(mine_pair_on(train, i, j, target, &angles))
}

fn mine_pair_on(train: &Dataset, i: usize, j: usize, target: Label, angles: &[f64]) -> PairResult {
    let data = pair_data(train, i, j, target, angles);
    let (phi, c, support) = data.best();
    let constant = |k: usize| {
        let first = train.samples()[0].features[k - 1];
        train.samples().iter().all(|s| s.features[k - 1] == first)
    };
    PairResult { i, j, phi, c, support, constant_pair: constant(i) && constant(j) }
}

/// Runs every pair and keeps the one with the largest support (ties go
/// to the lexicographically smallest pair).
pub fn mine_prior(train: &Dataset, target: Label, angle_step: f64) -> Result<(LinearPrior, MiningReport)> {
    let n = train.n_features();
    if n < 2 {
        return Err(PrismError::TooFewFeatures(n));
    }
    if train.class_count(target.opposite()) == 0 {
        return Err(PrismError::NoOppositeClass);
    }
    let angles = angle_grid(angle_step)?;
    let start = Instant::now();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 1..n {
        for j in i + 1..=n {
            pairs.push(mine_pair_on(train, i, j, target, &angles));
        }
    }
    let top = pairs.iter().map(|p| p.support).max().unwrap_or(0);
    let all_best: Vec<LinearPrior> = pairs.iter().filter(|p| p.support == top).map(|p| p.to_prior(target)).collect();
    let best = all_best[0].clone();
    let report = MiningReport {
        class: target,
        angle_step,
        pairs,
        best: best.clone(),
        all_best,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((best, report))
}

/// Whether `x` satisfies the rule's antecedent (boundary inclusive).
pub fn prior_satisfied(x: &[f64], p: &LinearPrior) -> Result<bool> {
    let need = p.i.max(p.j);
    if x.len() < need || p.i == 0 || p.j == 0 {
        return Err(PrismError::DimensionMismatch { expected: need, got: x.len() });
    }
    Ok(p.antecedent_value(x) <= 0.0)
}
