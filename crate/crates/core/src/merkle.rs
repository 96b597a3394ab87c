//! Dataset commitments: six values per leaf, binary tree of sponge hashes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{field_embed, FieldElement, ScaledMatrix};
use crate::hash::{hash_sponge, HashAlg};

pub const LEAF_WIDTH: usize = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MerkleError {
    #[error("cannot commit to an empty dataset")]
    EmptyDataset,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerkleCommitment {
    pub root: FieldElement,
    pub depth: u32,
    pub value_count: usize,
    pub alg: HashAlg,
}

/// Number of leaf groups needed for `value_count` values.
pub fn group_count(value_count: usize) -> usize {
    value_count.div_ceil(LEAF_WIDTH)
}

/// Minimal tree depth for `value_count` values (0 for a single group).
pub fn tree_depth(value_count: usize) -> u32 {
    let groups = group_count(value_count).max(1);
    groups.next_power_of_two().trailing_zeros()
}

pub fn empty_group_hash(alg: HashAlg) -> FieldElement {
    static CACHE: std::sync::OnceLock<[FieldElement; 2]> = std::sync::OnceLock::new();
    let cached = CACHE.get_or_init(|| {
        HashAlg::ALL.map(|a| hash_sponge(&[FieldElement::ZERO; LEAF_WIDTH], a).expect("nonempty"))
    });
    cached[alg.tag() as usize]
}

/// Leaf and node hashing for [`fold_tree`].
pub trait TreeHasher {
    type Node: Clone;
    fn leaf(&mut self, group: &[Self::Node]) -> Self::Node;
    fn node(&mut self, left: &Self::Node, right: &Self::Node) -> Self::Node;
}

/// Walks the tree shape shared by the native commitment and the in-circuit
/// recomputation. Odd levels are padded with the hash of an empty subtree
/// of matching height.
pub fn fold_tree<H: TreeHasher>(hasher: &mut H, values: &[H::Node], depth: u32, zero: H::Node, empty_leaf: H::Node) -> H::Node {
    let mut level: Vec<H::Node> = values
        .chunks(LEAF_WIDTH)
        .map(|chunk| {
            if chunk.len() == LEAF_WIDTH {
                hasher.leaf(chunk)
            } else {
                let mut padded = chunk.to_vec();
                padded.resize(LEAF_WIDTH, zero.clone());
                hasher.leaf(&padded)
            }
        })
        .collect();
    debug_assert!(level.len() <= 1usize << depth);
    let mut empty = empty_leaf;
    for _ in 0..depth {
        if level.len() % 2 == 1 {
            level.push(empty.clone());
        }
        level = level.chunks(2).map(|pair| hasher.node(&pair[0], &pair[1])).collect();
        empty = hasher.node(&empty, &empty);
    }
    level.pop().unwrap_or(empty)
}

struct NativeHasher(HashAlg);

impl TreeHasher for NativeHasher {
    type Node = FieldElement;

    fn leaf(&mut self, group: &[FieldElement]) -> FieldElement {
        hash_sponge(group, self.0).expect("nonempty")
    }

    fn node(&mut self, left: &FieldElement, right: &FieldElement) -> FieldElement {
        hash_sponge(&[*left, *right], self.0).expect("nonempty")
    }
}

/// Column-major serialization: X_1 .. X_k, then Y.
pub fn serialize_columns(data: &ScaledMatrix) -> Vec<FieldElement> {
    (0..data.cols())
        .flat_map(|c| data.column(c).into_iter().map(field_embed))
        .collect()
}

pub fn merkle_root(values: &[FieldElement], alg: HashAlg) -> Result<MerkleCommitment, MerkleError> {
    if values.is_empty() {
        return Err(MerkleError::EmptyDataset);
    }
    let depth = tree_depth(values.len());
    let root = fold_tree(
        &mut NativeHasher(alg),
        values,
        depth,
        FieldElement::ZERO,
        empty_group_hash(alg),
    );
    Ok(MerkleCommitment {
        root,
        depth,
        value_count: values.len(),
        alg,
    })
}

/// Commits to an `n x (k+1)` matrix whose columns are X_1 .. X_k, Y.
pub fn commit_dataset(data: &ScaledMatrix, alg: HashAlg) -> Result<MerkleCommitment, MerkleError> {
    merkle_root(&serialize_columns(data), alg)
}
