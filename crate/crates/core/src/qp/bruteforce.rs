//! Nested-grid oracle for tiny instances (N ≤ 8).
//!
//! The last coordinate is eliminated through αᵀy = 0. Every grid point is
//! evaluated twice: as is, and moved onto the face αᵀ1 = ν by adjusting
//! one coordinate of the class opposite the eliminated one (the sum only
//! depends on those coordinates). Each refinement pass re-grids a
//! window of two cells around the incumbent.

use super::{ConvexObjective, FeasibleSetA, ScalarMode, SolveReport};
use crate::error::{PrismError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteForceOptions {
    /// Grid points evaluated per pass (before feasibility filtering).
    pub points_per_pass: usize,
    /// When set, the scalar variable is gridded over this range
    /// instead of being chosen by the objective.
    pub scalar_range: Option<(f64, f64)>,
}

impl Default for BruteForceOptions {
    fn default() -> Self {
        BruteForceOptions { points_per_pass: 1_000_000, scalar_range: None }
    }
}

pub fn solve_bruteforce(obj: &dyn ConvexObjective, set: &FeasibleSetA, passes: usize) -> Result<SolveReport> {
    solve_bruteforce_with(obj, set, passes, &BruteForceOptions::default())
}

struct Axis {
    lo: f64,
    hi: f64,
    /// Hard limits of the original domain.
    min: f64,
    max: f64,
}

pub fn solve_bruteforce_with(
    obj: &dyn ConvexObjective,
    set: &FeasibleSetA,
    passes: usize,
    opts: &BruteForceOptions,
) -> Result<SolveReport> {
    let n = set.len();
    if n > 8 {
        return Err(PrismError::TooLarge(n));
    }
    set.check_len(obj.dim())?;
    let y = set.y();
    let u = set.upper();
    let nu = set.nu();
    let k = n - 1;
    let adjust = (0..k).find(|&i| y[i] != y[k]);
    let free = n - 1;
    let mut axes: Vec<Axis> = (0..free).map(|_| Axis { lo: 0.0, hi: u, min: 0.0, max: u }).collect();
    if let Some((lo, hi)) = opts.scalar_range {
        axes.push(Axis { lo, hi, min: lo, max: hi });
    }
    let dims = axes.len();
    let per_axis = ((opts.points_per_pass as f64).powf(1.0 / dims as f64).floor() as usize).max(3);

    let mut cache = vec![0.0; obj.cache_len()];
    let mut alpha = vec![0.0; n];
    let mut best_value = f64::INFINITY;
    let mut best_alpha = vec![0.0; n];
    let mut best_scalar = 0.0;
    let mut best_point = vec![0.0; dims];
    let mut evaluations = 0usize;

    let mut evaluate = |point: &[f64], alpha: &mut Vec<f64>| -> Option<(f64, f64)> {
        alpha[..free].copy_from_slice(&point[..free]);
        let s: f64 = (0..free).map(|i| y[i] * alpha[i]).sum();
        let last = -y[k] * s;
        if !(-1e-15..=u + 1e-15).contains(&last) {
            return None;
        }
        alpha[k] = last.clamp(0.0, u);
        if alpha.iter().sum::<f64>() < nu - 1e-12 {
            return None;
        }
        obj.fill_cache(alpha, &mut cache);
        let scalar = match (opts.scalar_range, obj.scalar_mode()) {
            (Some(_), _) => point[free],
            (None, ScalarMode::Eliminated) => obj.choose_scalar(alpha, &cache, 0.0),
            (None, ScalarMode::Unused) => 0.0,
        };
        Some((obj.value_cached(alpha, &cache, scalar), scalar))
    };

    for pass in 0..=passes {
        let steps: Vec<f64> = axes.iter().map(|a| (a.hi - a.lo) / (per_axis - 1) as f64).collect();
        let mut counter = vec![0usize; dims];
        let mut point = vec![0.0; dims];
        let mut face = vec![0.0; dims];
        'grid: loop {
            for d in 0..dims {
                point[d] = if counter[d] == per_axis - 1 { axes[d].hi } else { axes[d].lo + steps[d] * counter[d] as f64 };
            }
            evaluations += 1;
            if let Some((v, s)) = evaluate(&point, &mut alpha) {
                if v < best_value {
                    best_value = v;
                    best_alpha.copy_from_slice(&alpha);
                    best_scalar = s;
                    best_point.copy_from_slice(&point);
                }
            }
            if let Some(j) = adjust {
                // Snap onto αᵀ1 = ν: Σα = 2·Σ_{i: y_i ≠ y_k} α_i.
                let others: f64 = (0..free).filter(|&i| i != j && y[i] != y[k]).map(|i| point[i]).sum();
                let aj = 0.5 * nu - others;
                if (0.0..=u).contains(&aj) {
                    face.copy_from_slice(&point);
                    face[j] = aj;
                    if let Some((v, s)) = evaluate(&face, &mut alpha) {
                        if v < best_value {
                            best_value = v;
                            best_alpha.copy_from_slice(&alpha);
                            best_scalar = s;
                            best_point.copy_from_slice(&face);
                        }
                    }
                }
            }
            let mut d = 0;
            loop {
                counter[d] += 1;
                if counter[d] < per_axis {
                    break;
                }
                counter[d] = 0;
                d += 1;
                if d == dims {
                    break 'grid;
                }
            }
        }
        if pass < passes && best_value.is_finite() {
            for (d, axis) in axes.iter_mut().enumerate() {
                let h = 2.0 * steps[d];
                axis.lo = (best_point[d] - h).max(axis.min);
                axis.hi = (best_point[d] + h).min(axis.max);
            }
        }
    }

    Ok(SolveReport {
        alpha: best_alpha,
        b: best_scalar,
        objective: best_value,
        iterations: evaluations,
        converged: best_value.is_finite(),
        final_step_norm: 0.0,
        trace: Vec::new(),
        curvature: 0.0,
    })
}
