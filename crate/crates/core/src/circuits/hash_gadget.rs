//! In-circuit permutation, sponge and Merkle recomputation.
//!
//! Inputs that are compile-time constants are hashed natively, so the
//! empty-subtree hashes of a partially filled tree cost no constraints.

use super::r1cs::{Lc, Synth};
use crate::hash::{hash_sponge, round_constant, HashAlg};
use crate::merkle::{empty_group_hash, fold_tree, tree_depth, TreeHasher};
use crate::field::FieldElement;

fn sbox(cs: &mut Synth, t: &Lc, alg: HashAlg) -> Lc {
    let t2 = cs.mul(t, t);
    let t4 = cs.mul(&t2, &t2);
    match alg {
        HashAlg::Mimc7 => {
            let t6 = cs.mul(&t4, &t2);
            cs.mul(&t6, t)
        }
        HashAlg::PoseidonLite => cs.mul(&t4, t),
    }
}

pub fn permute(cs: &mut Synth, x: &Lc, key: &Lc, alg: HashAlg) -> Lc {
    if let (Some(xv), Some(kv)) = (x.as_constant(), key.as_constant()) {
        return Lc::constant(alg.permute(xv, kv));
    }
    let mut t = x.clone();
    for i in 0..alg.rounds() {
        let input = t + key + &Lc::constant(round_constant(i));
        t = sbox(cs, &input, alg);
    }
    t + key
}

/// Sponge over combinations; the result is a single fresh variable unless
/// every input is constant.
pub fn sponge(cs: &mut Synth, values: &[Lc], alg: HashAlg) -> Lc {
    assert!(!values.is_empty(), "cannot hash an empty input list");
    let consts: Option<Vec<FieldElement>> = values.iter().map(|v| v.as_constant()).collect();
    if let Some(c) = consts {
        return Lc::constant(hash_sponge(&c, alg).expect("nonempty"));
    }
    let mut s = Lc::zero();
    for v in values {
        let u = s + v;
        s = permute(cs, &u, &Lc::zero(), alg) + &u;
    }
    cs.collapse(s)
}

struct GadgetHasher<'a> {
    cs: &'a mut Synth,
    alg: HashAlg,
}

impl TreeHasher for GadgetHasher<'_> {
    type Node = Lc;

    fn leaf(&mut self, group: &[Lc]) -> Lc {
        sponge(self.cs, group, self.alg)
    }

    fn node(&mut self, left: &Lc, right: &Lc) -> Lc {
        sponge(self.cs, &[left.clone(), right.clone()], self.alg)
    }
}

/// Root over `values` in commitment order at the minimal depth.
pub fn merkle_root(cs: &mut Synth, values: &[Lc], alg: HashAlg) -> Lc {
    let depth = tree_depth(values.len());
    fold_tree(
        &mut GadgetHasher { cs, alg },
        values,
        depth,
        Lc::zero(),
        Lc::constant(empty_group_hash(alg)),
    )
}
