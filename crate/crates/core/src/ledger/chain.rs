use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::field::FieldElement;
use crate::hash::{hash_sponge, HashAlg};
use num_bigint::BigUint;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub prev_hash: FieldElement,
    pub tx_digest: FieldElement,
    pub hash: FieldElement,
}

impl Block {
    fn new(height: u64, prev_hash: FieldElement, tx_digest: FieldElement, alg: HashAlg) -> Self {
        let hash = hash_sponge(&[FieldElement::from_u64(height), prev_hash, tx_digest], alg).expect("three inputs");
        Block {
            height,
            prev_hash,
            tx_digest,
            hash,
        }
    }
}

/// SHA-256 of `bytes`, reduced into the field.
pub fn tx_digest(bytes: &[u8]) -> FieldElement {
    let digest = Sha256::digest(bytes);
    FieldElement::from_biguint(&BigUint::from_bytes_be(&digest))
}

/// Append-only block sequence; the genesis digest is the seed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain {
    alg: HashAlg,
    blocks: Vec<Block>,
}

impl Chain {
    pub fn new(seed: u64, alg: HashAlg) -> Self {
        let genesis = Block::new(0, FieldElement::ZERO, FieldElement::from_u64(seed), alg);
        Chain {
            alg,
            blocks: vec![genesis],
        }
    }

    pub fn head(&self) -> &Block {
        self.blocks.last().expect("genesis is always present")
    }

    pub fn height(&self) -> u64 {
        self.head().height
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn advance(&mut self, tx_digest: FieldElement) -> &Block {
        let head = self.head();
        let block = Block::new(head.height + 1, head.hash, tx_digest, self.alg);
        self.blocks.push(block);
        self.head()
    }
}
