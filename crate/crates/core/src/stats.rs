//! Student t tail probabilities and the paired one-sided t-test.

use crate::error::{PrismError, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=1000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// `P(T > t)` for Student's t with `df` degrees of freedom.
pub fn t_upper_tail(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return if t > 0.0 { 0.0 } else { 1.0 };
    }
    let half_two_sided = 0.5 * incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
    if t >= 0.0 {
        half_two_sided
    } else {
        1.0 - half_two_sided
    }
}

/// Summary of a paired one-sided test of `with > without`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTTest {
    pub p_value: f64,
    pub t: Option<f64>,
    pub mean_diff: f64,
    /// Set when the standard deviation vanishes or `m = 1`.
    pub degenerate: bool,
}

/// `p = 1 − CDF_{t,m−1}(t)` for `d = with − without`.
pub fn paired_t_test(acc_with: &[f64], acc_without: &[f64]) -> Result<PairedTTest> {
    if acc_with.len() != acc_without.len() {
        return Err(PrismError::LengthMismatch(acc_with.len(), acc_without.len()));
    }
    let m = acc_with.len();
    if m == 0 {
        return Err(PrismError::InvalidConfig("paired t-test needs at least one pair".into()));
    }
    let d: Vec<f64> = acc_with.iter().zip(acc_without).map(|(a, b)| a - b).collect();
    let mean = d.iter().sum::<f64>() / m as f64;
    let sd = sample_std(&d);
    if m == 1 || sd == 0.0 {
        let p_value = if mean > 0.0 {
            0.0
        } else if mean < 0.0 {
            1.0
        } else {
            0.5
        };
        return Ok(PairedTTest { p_value, t: None, mean_diff: mean, degenerate: true });
    }
    let t = mean / (sd / (m as f64).sqrt());
    Ok(PairedTTest { p_value: t_upper_tail(t, (m - 1) as f64).clamp(0.0, 1.0), t: Some(t), mean_diff: mean, degenerate: false })
}

/// Sample standard deviation (divisor m−1); 0 for fewer than two values.
pub fn sample_std(v: &[f64]) -> f64 {
    let m = v.len();
    if m < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / m as f64;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1) as f64).sqrt()
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}
