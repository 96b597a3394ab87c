//! Client-side pipeline: normalize, encode, train, perturb and assemble the
//! inputs of both circuits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::BoundSet;
use crate::circuits::{
    compute_cost, CircuitError, CostCircuitParams, CostPrivate, CostStatement, WeightCircuitParams, WeightPrivate,
    WeightStatement,
};
use crate::dp::{perturb_weights, DpError, NoiseDraw, NoiseTable};
use crate::field::{field_embed, CodecError, FieldElement, ScaledMatrix};
use crate::hash::HashAlg;
use crate::linreg::{normalize, train, Dataset, LinregError, TrainedModel};
use crate::merkle::{commit_dataset, MerkleCommitment, MerkleError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClientError {
    #[error(transparent)]
    Linreg(#[from] LinregError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error(transparent)]
    Merkle(#[from] MerkleError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Z-scores `raw` and encodes it at `d` decimals.
pub fn encode_normalized(raw: &Dataset, d: u32) -> Result<ScaledMatrix, ClientError> {
    Ok(normalize(raw)?.to_scaled(d)?)
}

/// A client's committed data and noise-free model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalModel {
    /// `n x (k+1)` normalized data at scale `d`.
    pub data: ScaledMatrix,
    /// Trained on the decoded fixed-point data, so it matches what is committed.
    pub model: TrainedModel,
    pub z: ScaledMatrix,
    pub w: ScaledMatrix,
}

impl LocalModel {
    pub fn from_raw(raw: &Dataset, d: u32) -> Result<Self, ClientError> {
        Self::from_encoded(encode_normalized(raw, d)?)
    }

    pub fn from_encoded(data: ScaledMatrix) -> Result<Self, ClientError> {
        let d = data.scale();
        let m = data.cols();
        let model = train(&Dataset::from_scaled(&data)?)?;
        let z = ScaledMatrix::encode(m, m, &model.z, d)?;
        let w = ScaledMatrix::encode(m, 1, &model.w, d)?;
        Ok(LocalModel { data, model, z, w })
    }

    pub fn k(&self) -> usize {
        self.data.cols() - 1
    }

    pub fn n(&self) -> usize {
        self.data.rows()
    }

    pub fn d(&self) -> u32 {
        self.data.scale()
    }

    pub fn commit(&self, alg: HashAlg) -> Result<MerkleCommitment, ClientError> {
        Ok(commit_dataset(&self.data, alg)?)
    }

    /// Encoded targets in row order, as used for the noise pairing.
    pub fn target_encodings(&self) -> Vec<FieldElement> {
        self.data.column(self.k()).into_iter().map(field_embed).collect()
    }

    pub fn perturb(
        &self,
        block_hash: FieldElement,
        table: &NoiseTable,
        alg: HashAlg,
    ) -> Result<(ScaledMatrix, Vec<NoiseDraw>), ClientError> {
        Ok(perturb_weights(&self.w, block_hash, &self.target_encodings(), table, alg)?)
    }

    pub fn weight_params(&self, d_l: usize, alg: HashAlg) -> Result<WeightCircuitParams, ClientError> {
        Ok(WeightCircuitParams::new(self.k(), self.n(), self.d(), d_l, alg)?)
    }

    /// Statement and private inputs for a claimed `w_noisy` with `draws`.
    pub fn weight_inputs(
        &self,
        root: FieldElement,
        table: &NoiseTable,
        block_hash: FieldElement,
        w_noisy: &ScaledMatrix,
        draws: Vec<NoiseDraw>,
        bounds: BoundSet,
    ) -> (WeightStatement, WeightPrivate) {
        let st = WeightStatement {
            root,
            table: table.entries.clone(),
            block_hash,
            w_noisy: w_noisy.entries().to_vec(),
            bounds,
        };
        let pv = WeightPrivate {
            data: self.data.clone(),
            z: self.z.clone(),
            draws,
        };
        (st, pv)
    }

    pub fn cost_params(&self, n_test: usize, alg: HashAlg) -> Result<CostCircuitParams, ClientError> {
        Ok(CostCircuitParams::new(self.k(), self.n(), n_test, self.d(), alg)?)
    }

    /// Honest cost on `test` and the matching circuit inputs.
    pub fn cost_inputs(
        &self,
        root_train: FieldElement,
        test: &ScaledMatrix,
        root_test: FieldElement,
        eps_w: u128,
    ) -> Result<(CostStatement, CostPrivate), ClientError> {
        let cost = compute_cost(test, &self.w)?;
        let st = CostStatement {
            cost,
            root_train,
            root_test,
            eps_w,
        };
        let pv = CostPrivate {
            data: self.data.clone(),
            test: test.clone(),
            z: self.z.clone(),
            w: self.w.clone(),
        };
        Ok((st, pv))
    }
}
