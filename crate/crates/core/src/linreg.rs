//! Floating-point side of training: z-scoring, normal-equation weights with
//! an approximate inverse, the Newman bound and the residual sum of squares.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{CodecError, ScaledMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinregError {
    #[error("column {column} has zero variance")]
    ZeroVariance { column: String },
    #[error("X^T X is numerically singular")]
    Singular,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("inverse residual {residual} >= 1, the bound is undefined")]
    BoundUndefined { residual: f64 },
    #[error("need at least k + 2 = {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// `n` samples of `k` features plus one target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n: usize,
    k: usize,
    /// Row-major `n x k`.
    features: Vec<f64>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(k: usize, features: Vec<f64>, targets: Vec<f64>) -> Result<Self, LinregError> {
        let n = targets.len();
        if features.len() != n * k {
            return Err(LinregError::DimensionMismatch(format!(
                "{} feature values for {n} rows of {k} features",
                features.len()
            )));
        }
        Ok(Dataset { n, k, features, targets })
    }

    /// Builds from rows of `[x_1, .., x_k, y]`.
    pub fn from_rows(k: usize, rows: &[Vec<f64>]) -> Result<Self, LinregError> {
        let mut features = Vec::with_capacity(rows.len() * k);
        let mut targets = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k + 1 {
                return Err(LinregError::DimensionMismatch(format!(
                    "row {i} has {} values, expected {}",
                    row.len(),
                    k + 1
                )));
            }
            features.extend_from_slice(&row[..k]);
            targets.push(row[k]);
        }
        Self::new(k, features, targets)
    }

    /// Reads an `n x (k+1)` fixed-point matrix `[x_1 .. x_k, y]`.
    pub fn from_scaled(m: &ScaledMatrix) -> Result<Self, LinregError> {
        if m.cols() == 0 {
            return Err(LinregError::DimensionMismatch("matrix has no columns".into()));
        }
        let k = m.cols() - 1;
        let values = m.decode();
        let rows: Vec<Vec<f64>> = values.chunks(m.cols()).map(|r| r.to_vec()).collect();
        Self::from_rows(k, &rows)
    }

    /// Encodes as an `n x (k+1)` fixed-point matrix `[x_1 .. x_k, y]`.
    pub fn to_scaled(&self, d: u32) -> Result<ScaledMatrix, LinregError> {
        let mut values = Vec::with_capacity(self.n * (self.k + 1));
        for i in 0..self.n {
            values.extend_from_slice(self.row(i));
            values.push(self.targets[i]);
        }
        Ok(ScaledMatrix::encode(self.n, self.k + 1, &values, d)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.k..(i + 1) * self.k]
    }

    pub fn feature(&self, i: usize, j: usize) -> f64 {
        self.features[i * self.k + j]
    }

    pub fn set_feature(&mut self, i: usize, j: usize, v: f64) {
        self.features[i * self.k + j] = v;
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn targets_mut(&mut self) -> &mut [f64] {
        &mut self.targets
    }

    pub fn feature_column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.feature(i, j)).collect()
    }

    /// Row-major `n x (k+1)` design matrix with a leading ones column.
    pub fn design_matrix(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.n * (self.k + 1));
        for i in 0..self.n {
            x.push(1.0);
            x.extend_from_slice(self.row(i));
        }
        x
    }
}

pub fn column_name(j: usize, k: usize) -> String {
    if j < k {
        format!("x{}", j + 1)
    } else {
        "y".to_string()
    }
}

fn zscore(col: &[f64], name: String) -> Result<Vec<f64>, LinregError> {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > 1e-12 * (1.0 + mean.abs())) {
        return Err(LinregError::ZeroVariance { column: name });
    }
    Ok(col.iter().map(|v| (v - mean) / std).collect())
}

/// Population z-score of every feature column and of the target.
pub fn normalize(raw: &Dataset) -> Result<Dataset, LinregError> {
    let mut out = raw.clone();
    for j in 0..raw.k {
        let col = zscore(&raw.feature_column(j), column_name(j, raw.k))?;
        for (i, v) in col.into_iter().enumerate() {
            out.set_feature(i, j, v);
        }
    }
    out.targets = zscore(&raw.targets, column_name(raw.k, raw.k))?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    /// `beta_0 .. beta_k`.
    pub w: Vec<f64>,
    /// Row-major `(k+1) x (k+1)` approximate inverse of `X^T X`.
    pub z: Vec<f64>,
    pub residual: Vec<f64>,
    pub inverse_residual: f64,
}

/// `size * max |a_ij|` for a square row-major matrix.
pub fn matnorm(a: &[f64], size: usize) -> f64 {
    size as f64 * a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn matmul(a: &[f64], b: &[f64], rows: usize, inner: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for t in 0..inner {
            let av = a[i * inner + t];
            for j in 0..cols {
                out[i * cols + j] += av * b[t * cols + j];
            }
        }
    }
    out
}

/// `X^T X` and `X^T Y` for the design matrix with ones column.
pub fn normal_equations(ds: &Dataset) -> (Vec<f64>, Vec<f64>) {
    let m = ds.k + 1;
    let x = ds.design_matrix();
    let mut xtx = vec![0.0; m * m];
    let mut xty = vec![0.0; m];
    for i in 0..ds.n {
        let row = &x[i * m..(i + 1) * m];
        for a in 0..m {
            xty[a] += row[a] * ds.targets[i];
            for b in 0..m {
                xtx[a * m + b] += row[a] * row[b];
            }
        }
    }
    (xtx, xty)
}

/// Gauss-Jordan inversion with partial pivoting.
pub fn invert(a: &[f64], size: usize) -> Result<Vec<f64>, LinregError> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(LinregError::Singular);
    }
    let tol = 1e-10 * scale;
    let width = 2 * size;
    let mut aug = vec![0.0; size * width];
    for i in 0..size {
        aug[i * width..i * width + size].copy_from_slice(&a[i * size..(i + 1) * size]);
        aug[i * width + size + i] = 1.0;
    }
    for col in 0..size {
        let pivot = (col..size)
            .max_by(|&r, &s| aug[r * width + col].abs().total_cmp(&aug[s * width + col].abs()))
            .expect("nonempty range");
        if !(aug[pivot * width + col].abs() > tol) {
            return Err(LinregError::Singular);
        }
        if pivot != col {
            for j in 0..width {
                aug.swap(pivot * width + j, col * width + j);
            }
        }
        let inv = 1.0 / aug[col * width + col];
        for j in 0..width {
            aug[col * width + j] *= inv;
        }
        for r in 0..size {
            if r == col {
                continue;
            }
            let factor = aug[r * width + col];
            if factor != 0.0 {
                for j in 0..width {
                    aug[r * width + j] -= factor * aug[col * width + j];
                }
            }
        }
    }
    Ok((0..size)
        .flat_map(|i| aug[i * width + size..(i + 1) * width].to_vec())
        .collect())
}

/// `matnorm(A Z - I)`.
pub fn inverse_residual(a: &[f64], z: &[f64], size: usize) -> f64 {
    let mut r = matmul(a, z, size, size, size);
    for i in 0..size {
        r[i * size + i] -= 1.0;
    }
    matnorm(&r, size)
}

pub fn train(norm: &Dataset) -> Result<TrainedModel, LinregError> {
    if norm.n < norm.k + 2 {
        return Err(LinregError::TooFewSamples {
            need: norm.k + 2,
            got: norm.n,
        });
    }
    let m = norm.k + 1;
    let (xtx, xty) = normal_equations(norm);
    let z = invert(&xtx, m)?;
    let w = matmul(&z, &xty, m, m, 1);
    let x = norm.design_matrix();
    let fitted = matmul(&x, &w, norm.n, m, 1);
    let residual = norm.targets.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let inverse_residual = inverse_residual(&xtx, &z, m);
    Ok(TrainedModel {
        w,
        z,
        residual,
        inverse_residual,
    })
}

/// Upper bound on `matnorm(A^-1 - Z)` given `r = matnorm(A Z - I) < 1`.
pub fn newman_bound(z: &[f64], size: usize, inverse_residual: f64) -> Result<f64, LinregError> {
    if !(inverse_residual < 1.0) {
        return Err(LinregError::BoundUndefined {
            residual: inverse_residual,
        });
    }
    Ok(matnorm(z, size) * inverse_residual / (1.0 - inverse_residual))
}

/// Residual sum of squares of `w` (with intercept) on `test`.
pub fn rss_cost(w: &[f64], test: &Dataset) -> Result<f64, LinregError> {
    if w.len() != test.k + 1 {
        return Err(LinregError::DimensionMismatch(format!(
            "{} weights for {} features",
            w.len(),
            test.k
        )));
    }
    Ok((0..test.n)
        .map(|i| {
            let pred = w[0] + test.row(i).iter().zip(&w[1..]).map(|(x, b)| x * b).sum::<f64>();
            (test.targets[i] - pred).powi(2)
        })
        .sum())
}
