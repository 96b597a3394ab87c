//! Discretized Laplace noise with hash-derived, publicly checkable draws.

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{fp_decode, fp_encode, CodecError, FieldElement, ScaledMatrix, SignMag};
use crate::hash::{hash_sponge, HashAlg};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DpError {
    #[error("table granularity d_L = {0} must be at least 2")]
    Granularity(usize),
    #[error("epsilon and sensitivity must be positive and finite")]
    BadPrivacy,
    #[error("need {need} encoded targets for the noise pairing, got {got}")]
    NotEnoughTargets { need: usize, got: usize },
    #[error("weight vector must be a column at scale {table}, got {rows}x{cols} at scale {scale}")]
    WeightShape { rows: usize, cols: usize, scale: u32, table: u32 },
    #[error("noisy weight overflows: {0}")]
    Overflow(#[from] CodecError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    /// Sensitivity in scaled units.
    pub delta_sens: f64,
    pub d_l: usize,
    pub d: u32,
}

impl PrivacyParams {
    /// Sensitivity defaults to `2 * 10^d`.
    pub fn new(epsilon: f64, d_l: usize, d: u32) -> Self {
        PrivacyParams {
            epsilon,
            delta_sens: 2.0 * 10f64.powi(d as i32),
            d_l,
            d,
        }
    }

    /// Parameters whose real-unit scale is exactly `lambda_real`.
    pub fn with_lambda_real(lambda_real: f64, d_l: usize, d: u32) -> Self {
        PrivacyParams {
            epsilon: 1.0,
            delta_sens: lambda_real * 10f64.powi(d as i32),
            d_l,
            d,
        }
    }

    /// `Delta / epsilon` in scaled units.
    pub fn lambda(&self) -> f64 {
        self.delta_sens / self.epsilon
    }

    pub fn lambda_real(&self) -> f64 {
        self.lambda() / 10f64.powi(self.d as i32)
    }

    fn validate(&self) -> Result<(), DpError> {
        if self.d_l < 2 {
            return Err(DpError::Granularity(self.d_l));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite() && self.delta_sens > 0.0 && self.delta_sens.is_finite()) {
            return Err(DpError::BadPrivacy);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseTable {
    /// `entries[p-1]` for `p = 1 .. d_L-1`, at scale `d`.
    pub entries: Vec<SignMag>,
    pub params: PrivacyParams,
}

impl NoiseTable {
    pub fn d_l(&self) -> usize {
        self.params.d_l
    }

    /// Noise for draw `p` in `1 ..= d_L-1`.
    pub fn entry(&self, p: usize) -> SignMag {
        self.entries[p - 1]
    }

    pub fn decoded(&self) -> Vec<f64> {
        self.entries.iter().map(|&e| fp_decode(e, self.params.d)).collect()
    }

    /// Variance (real units) of an entry drawn uniformly from the table.
    pub fn exact_variance(&self) -> f64 {
        let vals = self.decoded();
        let m = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / m;
        vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m
    }
}

/// Inverse Laplace CDF at `u = p / d_L`, rounded to `d` decimals.
pub fn build_noise_table(params: &PrivacyParams) -> Result<NoiseTable, DpError> {
    params.validate()?;
    let d_l = params.d_l as i64;
    let lambda = params.lambda_real();
    let entries = (1..d_l)
        .map(|p| {
            // |u - 1/2| = a / (2 d_L); integer `a` keeps the two halves exact mirrors.
            let a = (2 * p - d_l).abs();
            let mag = -lambda * (-(a as f64) / d_l as f64).ln_1p();
            let signed = if 2 * p < d_l { -mag } else { mag };
            fp_encode(signed, params.d)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NoiseTable {
        entries,
        params: params.clone(),
    })
}

/// `p = 1 + (h mod (d_L - 1))`.
pub fn index_from_hash(h: FieldElement, d_l: usize) -> usize {
    let m = BigUint::from(d_l.saturating_sub(1).max(1));
    1 + (h.to_biguint() % m).to_usize().expect("remainder below d_L")
}

pub fn derive_randomness(block_hash: FieldElement, y_enc: FieldElement, d_l: usize, alg: HashAlg) -> (FieldElement, usize) {
    let h = hash_sponge(&[block_hash, y_enc], alg).expect("two inputs");
    (h, index_from_hash(h, d_l))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseDraw {
    pub p: usize,
    pub h: FieldElement,
    pub q: SignMag,
}

/// Adds table noise to each coefficient; coefficient `j` draws from the
/// hash of the block hash and the `j`-th encoded target.
pub fn perturb_weights(
    w: &ScaledMatrix,
    block_hash: FieldElement,
    y_enc: &[FieldElement],
    table: &NoiseTable,
    alg: HashAlg,
) -> Result<(ScaledMatrix, Vec<NoiseDraw>), DpError> {
    if w.cols() != 1 || w.scale() != table.params.d {
        return Err(DpError::WeightShape {
            rows: w.rows(),
            cols: w.cols(),
            scale: w.scale(),
            table: table.params.d,
        });
    }
    if y_enc.len() < w.rows() {
        return Err(DpError::NotEnoughTargets {
            need: w.rows(),
            got: y_enc.len(),
        });
    }
    let mut noisy = Vec::with_capacity(w.rows());
    let mut draws = Vec::with_capacity(w.rows());
    for (j, &y) in y_enc.iter().take(w.rows()).enumerate() {
        let (h, p) = derive_randomness(block_hash, y, table.d_l(), alg);
        let q = table.entry(p);
        noisy.push(w.get(j, 0).checked_add(&q).ok_or(CodecError::MagnitudeOverflow)?);
        draws.push(NoiseDraw { p, h, q });
    }
    Ok((ScaledMatrix::column_vector(noisy, w.scale()), draws))
}
