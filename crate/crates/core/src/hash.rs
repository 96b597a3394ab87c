//! Algebraic permutations and the chaining sponge built on them.

use std::sync::LazyLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::FieldElement;

pub const MIMC7_ROUNDS: usize = 91;
pub const POSEIDON_LITE_ROUNDS: usize = 64;

const ROUND_STEP: u128 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HashError {
    #[error("cannot hash an empty input list")]
    EmptyInput,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HashAlg {
    Mimc7,
    PoseidonLite,
}

impl HashAlg {
    pub const ALL: [HashAlg; 2] = [HashAlg::Mimc7, HashAlg::PoseidonLite];

    pub fn tag(self) -> u8 {
        match self {
            HashAlg::Mimc7 => 0,
            HashAlg::PoseidonLite => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(HashAlg::Mimc7),
            1 => Some(HashAlg::PoseidonLite),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HashAlg::Mimc7 => "mimc7",
            HashAlg::PoseidonLite => "poseidon_lite",
        }
    }

    pub fn rounds(self) -> usize {
        match self {
            HashAlg::Mimc7 => MIMC7_ROUNDS,
            HashAlg::PoseidonLite => POSEIDON_LITE_ROUNDS,
        }
    }

    /// S-box exponent.
    pub fn exponent(self) -> u64 {
        match self {
            HashAlg::Mimc7 => 7,
            HashAlg::PoseidonLite => 5,
        }
    }

    pub fn permute(self, x: FieldElement, key: FieldElement) -> FieldElement {
        match self {
            HashAlg::Mimc7 => mimc7_permute(x, key),
            HashAlg::PoseidonLite => poseidon_lite_permute(x, key),
        }
    }

    pub fn sponge(self, values: &[FieldElement]) -> Result<FieldElement, HashError> {
        hash_sponge(values, self)
    }
}

impl std::fmt::Display for HashAlg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

static ROUND_CONSTANTS: LazyLock<Vec<FieldElement>> = LazyLock::new(|| {
    (0..MIMC7_ROUNDS.max(POSEIDON_LITE_ROUNDS))
        .map(|i| FieldElement::from_u128(i as u128 * ROUND_STEP))
        .collect()
});

/// Round constant `c_i = i * 0x9E3779B97F4A7C15`; `c_0 = 0`.
pub fn round_constant(i: usize) -> FieldElement {
    ROUND_CONSTANTS[i]
}

fn permute_with(x: FieldElement, key: FieldElement, rounds: usize, sbox: impl Fn(FieldElement) -> FieldElement) -> FieldElement {
    let mut t = x;
    for c in &ROUND_CONSTANTS[..rounds] {
        t = sbox(t + key + c);
    }
    t + key
}

pub fn mimc7_permute(x: FieldElement, key: FieldElement) -> FieldElement {
    permute_with(x, key, MIMC7_ROUNDS, |t| {
        let t2 = t * t;
        let t4 = t2 * t2;
        t4 * t2 * t
    })
}

pub fn poseidon_lite_permute(x: FieldElement, key: FieldElement) -> FieldElement {
    permute_with(x, key, POSEIDON_LITE_ROUNDS, |t| {
        let t2 = t * t;
        t2 * t2 * t
    })
}

/// `s_{i+1} = permute(s_i + v_i, 0) + s_i + v_i`, starting from zero.
pub fn hash_sponge(values: &[FieldElement], alg: HashAlg) -> Result<FieldElement, HashError> {
    if values.is_empty() {
        return Err(HashError::EmptyInput);
    }
    Ok(values.iter().fold(FieldElement::ZERO, |s, v| {
        let u = s + v;
        alg.permute(u, FieldElement::ZERO) + u
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn oracle_permute(x: &BigUint, key: &BigUint, rounds: usize, e: u32) -> BigUint {
        let p = FieldElement::modulus();
        let mut t = x % p;
        for i in 0..rounds {
            let c = BigUint::from(i as u128 * 0x9E37_79B9_7F4A_7C15u128) % p;
            t = (&t + key + c).modpow(&BigUint::from(e), p);
        }
        (t + key) % p
    }

    fn random_fe(rng: &mut ChaCha8Rng) -> FieldElement {
        let bytes: [u8; 32] = rng.random();
        FieldElement::from_biguint(&BigUint::from_bytes_le(&bytes))
    }

    #[test]
    fn mimc7_matches_bigint_oracle() {
        let zero = BigUint::from(0u32);
        assert_eq!(
            mimc7_permute(FieldElement::ZERO, FieldElement::ZERO).to_biguint(),
            oracle_permute(&zero, &zero, 91, 7)
        );
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let (x, k) = (random_fe(&mut rng), random_fe(&mut rng));
            assert_eq!(
                mimc7_permute(x, k).to_biguint(),
                oracle_permute(&x.to_biguint(), &k.to_biguint(), 91, 7)
            );
            assert_eq!(
                poseidon_lite_permute(x, k).to_biguint(),
                oracle_permute(&x.to_biguint(), &k.to_biguint(), 64, 5)
            );
        }
    }

    #[test]
    fn permutation_is_deterministic() {
        let x = FieldElement::from_u64(12345);
        assert_eq!(mimc7_permute(x, x), mimc7_permute(x, x));
        assert_ne!(mimc7_permute(x, FieldElement::ZERO), poseidon_lite_permute(x, FieldElement::ZERO));
    }

    #[test]
    fn sponge_single_value_unrolls() {
        for alg in HashAlg::ALL {
            let v = FieldElement::from_u64(99);
            assert_eq!(
                hash_sponge(&[v], alg).unwrap(),
                alg.permute(v, FieldElement::ZERO) + v
            );
        }
    }

    #[test]
    fn sponge_is_order_sensitive() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for alg in HashAlg::ALL {
            for _ in 0..10 {
                let (a, b) = (random_fe(&mut rng), random_fe(&mut rng));
                assert_ne!(hash_sponge(&[a, b], alg), hash_sponge(&[b, a], alg));
            }
        }
    }

    #[test]
    fn sponge_rejects_empty() {
        assert_eq!(hash_sponge(&[], HashAlg::Mimc7), Err(HashError::EmptyInput));
    }

    #[test]
    fn no_collisions_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut seen = HashSet::new();
        for _ in 0..10_000 {
            let pair = [random_fe(&mut rng), random_fe(&mut rng)];
            assert!(seen.insert(hash_sponge(&pair, HashAlg::PoseidonLite).unwrap()));
        }
    }

    #[test]
    fn tags_round_trip() {
        for alg in HashAlg::ALL {
            assert_eq!(HashAlg::from_tag(alg.tag()), Some(alg));
        }
        assert_eq!(serde_json::to_string(&HashAlg::PoseidonLite).unwrap(), "\"poseidon_lite\"");
    }
}
