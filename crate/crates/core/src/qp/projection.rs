//! Euclidean projection onto {α : αᵀy = 0, 0 ≤ α ≤ u, αᵀ1 ≥ ν}.
//!
//! The KKT conditions give α_i = clip(v_i + η − μ y_i, 0, u) with η ≥ 0
//! the multiplier of the sum constraint and μ that of the equality. With
//! a = η − μ (positives) and c = η + μ (negatives) the problem splits
//! into monotone piecewise-linear scalar equations, each solved exactly.

use super::FeasibleSetA;
use crate::error::Result;

#[inline]
fn clip(v: f64, u: f64) -> f64 {
    v.clamp(0.0, u)
}

/// One term `w·clip(x + σs, 0, u)` with `w·σ = 1`, so it is nondecreasing in s.
#[derive(Clone, Copy)]
struct Term {
    x: f64,
    sigma: f64,
}

impl Term {
    #[inline]
    fn value(self, s: f64, u: f64) -> f64 {
        // w = σ for unit-slope terms.
        self.sigma * clip(self.x + self.sigma * s, u)
    }

    /// Kinks in increasing order.
    #[inline]
    fn kinks(self, u: f64) -> (f64, f64) {
        let a = -self.sigma * self.x;
        let b = self.sigma * (u - self.x);
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }
}

/// `(Σ terms(s) − target, slope)`; the slope counts terms strictly
/// inside their linear piece.
fn eval(terms: &[Term], u: f64, target: f64, s: f64) -> (f64, usize) {
    let mut f = -target;
    let mut slope = 0;
    for t in terms {
        let z = t.x + t.sigma * s;
        if z <= 0.0 {
            continue;
        }
        if z >= u {
            f += t.sigma * u;
        } else {
            f += t.sigma * z;
            slope += 1;
        }
    }
    (f, slope)
}

/// Root of `Σ terms(s) − target`, a nondecreasing piecewise-linear
/// function. A few safeguarded Newton steps usually land on the root's
/// linear piece; otherwise the bracket is handed to [`median_root`].
fn piecewise_root(terms: &[Term], u: f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut s = 0.0;
    for _ in 0..8 {
        let (f, slope) = eval(terms, u, target, s);
        if f == 0.0 {
            return s;
        }
        if f < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        if slope == 0 {
            break;
        }
        let next = s - f / slope as f64;
        if next == s {
            return s;
        }
        if !(next > lo && next < hi) {
            break;
        }
        s = next;
    }
    median_root(terms, u, target, lo, hi)
}

/// Median selection over the kinks inside `(lo, hi)` halves the bracket
/// each round; terms without a kink inside are folded into an affine
/// accumulator, so the total work is linear on average.
fn median_root(terms: &[Term], u: f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut open: Vec<Term> = terms.to_vec();
    let mut constant = -target;
    let mut slope = 0.0;
    let mut kinks = Vec::with_capacity(2 * terms.len());
    loop {
        open.retain(|t| {
            let (k1, k2) = t.kinks(u);
            if hi <= k1 {
                constant += t.value(k1, u);
                false
            } else if lo >= k2 {
                constant += t.value(k2, u);
                false
            } else if k1 <= lo && hi <= k2 {
                // w·(x + σs) with w = σ, σ² = 1.
                constant += t.sigma * t.x;
                slope += 1.0;
                false
            } else {
                true
            }
        });
        if open.is_empty() {
            break;
        }
        kinks.clear();
        for t in &open {
            let (k1, k2) = t.kinks(u);
            for k in [k1, k2] {
                if k > lo && k < hi {
                    kinks.push(k);
                }
            }
        }
        let mid_idx = kinks.len() / 2;
        let (_, &mut mid, _) = kinks.select_nth_unstable_by(mid_idx, f64::total_cmp);
        let f = constant + slope * mid + open.iter().map(|t| t.value(mid, u)).sum::<f64>();
        if f < 0.0 {
            lo = mid;
        } else if f > 0.0 {
            hi = mid;
        } else {
            return mid;
        }
    }
    if slope > 0.0 {
        (-constant / slope).clamp(lo, hi)
    } else if lo.is_finite() {
        lo
    } else if hi.is_finite() {
        hi
    } else {
        0.0
    }
}

/// Projection of `v` onto `set`. Box constraints hold exactly; the two
/// linear constraints hold to rounding, and `tol` decides whether the sum
/// constraint counts as active.
pub fn project_onto_a(v: &[f64], set: &FeasibleSetA, tol: f64) -> Result<Vec<f64>> {
    set.check_len(v.len())?;
    let y = set.y();
    let u = set.upper();
    let nu = set.nu();
    let pos: Vec<Term> = v.iter().zip(y).filter(|(_, &yi)| yi > 0.0).map(|(&x, _)| Term { x, sigma: 1.0 }).collect();
    let neg: Vec<Term> = v.iter().zip(y).filter(|(_, &yi)| yi <= 0.0).map(|(&x, _)| Term { x, sigma: 1.0 }).collect();

    // Sum constraint inactive: η = 0, so c = −a and the class sums balance.
    let mut balance = pos.clone();
    balance.extend(neg.iter().map(|t| Term { x: t.x, sigma: -1.0 }));
    let a = piecewise_root(&balance, u, 0.0);
    let total: f64 = v.iter().zip(y).map(|(&x, &yi)| clip(x + yi * a, u)).sum();
    let (a, c) = if total >= nu - tol * 1e-3 {
        (a, -a)
    } else {
        // Sum constraint active: each class carries ν/2.
        let half = 0.5 * nu;
        (piecewise_root(&pos, u, half), piecewise_root(&neg, u, half))
    };
    Ok(v.iter().zip(y).map(|(&vi, &yi)| clip(vi + if yi > 0.0 { a } else { c }, u)).collect())
}
