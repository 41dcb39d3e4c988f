//! Kernel evaluation and dense Gram matrices.

use serde::{Deserialize, Serialize};

use crate::error::{PrismError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rbf,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub kind: KernelKind,
    /// RBF width; unused by the linear kernel.
    pub sigma: f64,
}

impl KernelConfig {
    pub fn rbf(sigma: f64) -> Result<KernelConfig> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(PrismError::InvalidConfig(format!("rbf sigma must be positive, got {sigma}")));
        }
        Ok(KernelConfig { kind: KernelKind::Rbf, sigma })
    }

    pub fn linear() -> KernelConfig {
        KernelConfig { kind: KernelKind::Linear, sigma: 1.0 }
    }

    #[inline]
    fn from_parts(&self, sq_dist: f64, dot: f64) -> f64 {
        match self.kind {
            KernelKind::Rbf => (-sq_dist / (self.sigma * self.sigma)).exp(),
            KernelKind::Linear => dot,
        }
    }
}

#[inline]
pub(crate) fn squared_distance(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
fn dot(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| a * b).sum()
}

/// `exp(-‖x−z‖²/σ²)` for RBF, `xᵀz` for linear.
pub fn eval(x: &[f64], z: &[f64], cfg: &KernelConfig) -> Result<f64> {
    if x.len() != z.len() {
        return Err(PrismError::DimensionMismatch { expected: x.len(), got: z.len() });
    }
    Ok(eval_unchecked(x, z, cfg))
}

#[inline]
pub(crate) fn eval_unchecked(x: &[f64], z: &[f64], cfg: &KernelConfig) -> f64 {
    match cfg.kind {
        KernelKind::Rbf => cfg.from_parts(squared_distance(x, z), 0.0),
        KernelKind::Linear => dot(x, z),
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> DenseMatrix {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `out = self · v`.
    pub fn matvec(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        for (i, o) in out.iter_mut().enumerate().take(self.rows) {
            *o = dot(self.row(i), v);
        }
    }

    /// Copies the block at (`row_idx` × `col_idx`).
    pub fn block(&self, row_idx: &[usize], col_idx: &[usize]) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(row_idx.len(), col_idx.len());
        for (a, &i) in row_idx.iter().enumerate() {
            let src = self.row(i);
            let dst = &mut m.data[a * col_idx.len()..(a + 1) * col_idx.len()];
            for (d, &j) in dst.iter_mut().zip(col_idx) {
                *d = src[j];
            }
        }
        m
    }

    /// Elementwise map into a new matrix.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

/// Symmetric kernel matrix over a fixed point set.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DenseMatrix,
    config: KernelConfig,
}

impl GramMatrix {
    pub fn len(&self) -> usize {
        self.entries.rows
    }

    pub fn is_empty(&self) -> bool {
        self.entries.rows == 0
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(i, j)
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        self.entries.row(i)
    }

    pub fn matvec(&self, v: &[f64], out: &mut [f64]) {
        self.entries.matvec(v, out)
    }

    /// Principal submatrix on `idx`.
    pub fn submatrix(&self, idx: &[usize]) -> GramMatrix {
        GramMatrix { entries: self.entries.block(idx, idx), config: self.config }
    }

    /// Largest absolute row sum, an upper bound on the spectral norm.
    pub fn max_abs_row_sum(&self) -> f64 {
        (0..self.len()).map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }
}

fn check_uniform(points: &[&[f64]]) -> Result<usize> {
    let d = points.first().map_or(0, |p| p.len());
    for p in points {
        if p.len() != d {
            return Err(PrismError::DimensionMismatch { expected: d, got: p.len() });
        }
    }
    Ok(d)
}

/// Builds the Gram matrix, computing the upper triangle once and mirroring it.
pub fn gram(points: &[&[f64]], cfg: &KernelConfig) -> Result<GramMatrix> {
    if points.is_empty() {
        return Err(PrismError::EmptyDataset);
    }
    check_uniform(points)?;
    let n = points.len();
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = eval_unchecked(points[i], points[j], cfg);
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    Ok(GramMatrix { entries: m, config: *cfg })
}

/// Pairwise squared distances, shared by all RBF widths over the same points.
#[derive(Debug, Clone)]
pub struct SquaredDistances {
    entries: DenseMatrix,
}

impl SquaredDistances {
    pub fn new(points: &[&[f64]]) -> Result<SquaredDistances> {
        if points.is_empty() {
            return Err(PrismError::EmptyDataset);
        }
        check_uniform(points)?;
        let n = points.len();
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v = squared_distance(points[i], points[j]);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        Ok(SquaredDistances { entries: m })
    }

    /// RBF Gram matrix for width `sigma`; bitwise equal to [`gram`].
    pub fn rbf_gram(&self, sigma: f64) -> Result<GramMatrix> {
        let config = KernelConfig::rbf(sigma)?;
        Ok(GramMatrix { entries: self.entries.map(|d| config.from_parts(d, 0.0)), config })
    }
}

/// Kernel values between `queries` (rows) and `points` (columns).
pub fn cross_kernel(queries: &[&[f64]], points: &[&[f64]], cfg: &KernelConfig) -> Result<DenseMatrix> {
    let d = check_uniform(points)?;
    for q in queries {
        if q.len() != d {
            return Err(PrismError::DimensionMismatch { expected: d, got: q.len() });
        }
    }
    let mut m = DenseMatrix::zeros(queries.len(), points.len());
    for (a, q) in queries.iter().enumerate() {
        for (b, p) in points.iter().enumerate() {
            m.set(a, b, eval_unchecked(q, p, cfg));
        }
    }
    Ok(m)
}
