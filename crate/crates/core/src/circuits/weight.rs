//! Weight statement: the noisy weights were computed from the committed,
//! normalized data with an approximate inverse and table noise selected by
//! the block hash.
//!
//! Public inputs, in order: `k, n, d, root, table[0 .. d_L-2], d_L,
//! block_hash, w'[0 .. k], eps_mu, eps_sigma, eps_inverse, theta_z,
//! theta_xty, eps_w_noisy`.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::gadgets::{abs, bit_length, abs_leq, cmp, lookup, modulo, quotient_width, range_check, signed_range_check, CmpMode, DATA_BITS};
use super::hash_gadget::{merkle_root, sponge};
use super::r1cs::{ConstraintSystem, Lc, Mode, Synth, Var, Violation, Witness};
use super::{
    alloc_columns, alloc_rows, check_matrix, fe, gram, residual_checks, round_weights, validate_common, xty, CircuitError,
    MAX_TABLE,
};
use crate::bounds::BoundSet;
use crate::dp::NoiseDraw;
use crate::field::{field_embed, pow10, FieldElement, ScaledMatrix, SignMag, COMPARATOR_BITS};
use crate::hash::HashAlg;
use crate::linreg::column_name;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightCircuitParams {
    pub k: usize,
    pub n: usize,
    pub d: u32,
    pub d_l: usize,
    pub hash_alg: HashAlg,
}

impl WeightCircuitParams {
    pub fn new(k: usize, n: usize, d: u32, d_l: usize, hash_alg: HashAlg) -> Result<Self, CircuitError> {
        let p = WeightCircuitParams { k, n, d, d_l, hash_alg };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        validate_common(self.k, self.n, self.d)?;
        if self.d_l < 2 || self.d_l > MAX_TABLE {
            return Err(CircuitError::Params(format!("d_L = {} outside 2 ..= {MAX_TABLE}", self.d_l)));
        }
        Ok(())
    }

    pub fn num_public(&self) -> usize {
        12 + (self.d_l - 1) + (self.k + 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightStatement {
    pub root: FieldElement,
    pub table: Vec<SignMag>,
    pub block_hash: FieldElement,
    pub w_noisy: Vec<SignMag>,
    pub bounds: BoundSet,
}

impl WeightStatement {
    fn placeholder(p: &WeightCircuitParams) -> Self {
        WeightStatement {
            root: FieldElement::ZERO,
            table: vec![SignMag::default(); p.d_l - 1],
            block_hash: FieldElement::ZERO,
            w_noisy: vec![SignMag::default(); p.k + 1],
            bounds: BoundSet::zero(),
        }
    }

    fn check(&self, p: &WeightCircuitParams) -> Result<(), CircuitError> {
        if self.table.len() != p.d_l - 1 {
            return Err(CircuitError::Shape(format!("table has {} entries, expected {}", self.table.len(), p.d_l - 1)));
        }
        if self.w_noisy.len() != p.k + 1 {
            return Err(CircuitError::Shape(format!("w' has {} entries, expected {}", self.w_noisy.len(), p.k + 1)));
        }
        Ok(())
    }

    pub fn to_public_inputs(&self, p: &WeightCircuitParams) -> Result<Vec<FieldElement>, CircuitError> {
        self.check(p)?;
        let b = &self.bounds;
        let mut out = vec![fe(p.k as u128), fe(p.n as u128), fe(p.d as u128), self.root];
        out.extend(self.table.iter().map(|&e| field_embed(e)));
        out.push(fe(p.d_l as u128));
        out.push(self.block_hash);
        out.extend(self.w_noisy.iter().map(|&e| field_embed(e)));
        out.extend([b.eps_mu, b.eps_sigma, b.eps_inverse, b.theta_z, b.theta_xty, b.eps_w_noisy].map(fe));
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightPrivate {
    /// `n x (k+1)` normalized data at scale `d`, target in the last column.
    pub data: ScaledMatrix,
    /// Approximate inverse of `X^T X`, `(k+1) x (k+1)` at scale `d`.
    pub z: ScaledMatrix,
    pub draws: Vec<NoiseDraw>,
}

impl WeightPrivate {
    fn placeholder(p: &WeightCircuitParams) -> Self {
        let m = p.k + 1;
        WeightPrivate {
            data: ScaledMatrix::zeros(p.n, m, p.d),
            z: ScaledMatrix::zeros(m, m, p.d),
            draws: vec![
                NoiseDraw {
                    p: 1,
                    h: FieldElement::ZERO,
                    q: SignMag::default(),
                };
                m
            ],
        }
    }

    fn check(&self, p: &WeightCircuitParams) -> Result<(), CircuitError> {
        let m = p.k + 1;
        check_matrix("data", &self.data, p.n, m, p.d)?;
        check_matrix("Z", &self.z, m, m, p.d)?;
        if self.draws.len() != m {
            return Err(CircuitError::Shape(format!("{} noise draws, expected {m}", self.draws.len())));
        }
        Ok(())
    }
}

fn synth(cs: &mut Synth, p: &WeightCircuitParams, st: &WeightStatement, pv: &WeightPrivate) {
    let (k, n, d) = (p.k, p.n, p.d);
    let m = k + 1;
    let publics = st.to_public_inputs(p).expect("statement checked");
    let vars: Vec<Var> = publics.iter().map(|&v| cs.alloc_public(v)).collect();
    let (pk, pn, pd, proot) = (vars[0], vars[1], vars[2], vars[3]);
    let table: Vec<Lc> = vars[4..4 + p.d_l - 1].iter().map(|&v| v.into()).collect();
    let rest = &vars[4 + p.d_l - 1..];
    let (pdl, pbh) = (rest[0], rest[1]);
    let w_noisy = &rest[2..2 + m];
    let [b_mu, b_sigma, b_inv, b_z, b_xty, b_wn]: [Var; 6] = rest[2 + m..].try_into().expect("six bounds");

    cs.scoped("public_inputs", |cs| {
        for (name, var, val) in [("k", pk, k as u128), ("n", pn, n as u128), ("d", pd, d as u128), ("d_L", pdl, p.d_l as u128)] {
            cs.scoped(name, |cs| cs.enforce_eq(var.into(), Lc::constant(fe(val))));
        }
        let full = COMPARATOR_BITS as usize;
        // eps_inverse is compared after scaling by 10^d.
        let inv_width = full - bit_length(&BigUint::from(pow10(d)));
        for (name, var, width) in [
            ("eps_mu", b_mu, full),
            ("eps_sigma", b_sigma, full),
            ("eps_inverse", b_inv, inv_width),
            ("theta_z", b_z, full),
            ("theta_xty", b_xty, full),
            ("eps_w_noisy", b_wn, full),
        ] {
            cs.scoped(name, |cs| range_check(cs, &var.into(), width));
        }
    });

    let cols = alloc_columns(cs, &pv.data);
    let z = alloc_rows(cs, &pv.z);

    cs.scoped("data_range", |cs| {
        for (c, col) in cols.iter().enumerate() {
            for (r, v) in col.iter().enumerate() {
                cs.scoped(format!("{}[{r}]", column_name(c, k)), |cs| {
                    signed_range_check(cs, v, DATA_BITS);
                });
            }
        }
    });

    let squares = cs.scoped("normalization", |cs| {
        for (c, col) in cols.iter().enumerate() {
            cs.scoped(format!("mean[{}]", column_name(c, k)), |cs| abs_leq(cs, &Lc::sum(col), &b_mu.into()));
        }
        let target = Lc::constant(fe(n as u128 * pow10(2 * d)));
        let mut squares = Vec::with_capacity(m);
        for (c, col) in cols.iter().enumerate() {
            let sq: Vec<Lc> = col.iter().map(|v| cs.mul(v, v)).collect();
            cs.scoped(format!("variance[{}]", column_name(c, k)), |cs| {
                abs_leq(cs, &(Lc::sum(&sq) - &target), &b_sigma.into())
            });
            squares.push(sq);
        }
        squares
    });

    cs.scoped("merkle_root", |cs| {
        let values: Vec<Lc> = cols.concat();
        let root = merkle_root(cs, &values, p.hash_alg);
        cs.enforce_eq(root, proot.into());
    });

    let (x, y) = cols.split_at(k);
    let y = &y[0];

    cs.scoped("inverse_residual", |cs| {
        let a = gram(cs, x, Some(&squares[..k]), n, d);
        let bound = Lc::from(b_inv).scale(fe(pow10(d)));
        residual_checks(cs, &a, &z, &bound, d);
    });

    cs.scoped("z_norm", |cs| {
        for (i, row) in z.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                cs.scoped(format!("[{i}][{j}]"), |cs| {
                    let (_, mag) = abs(cs, v, DATA_BITS);
                    let scaled = Lc::from(mag).scale(fe(m as u128));
                    let ok = cmp(cs, &scaled, &b_z.into(), COMPARATOR_BITS as usize, CmpMode::Leq);
                    cs.enforce_eq(ok.into(), Lc::one());
                });
            }
        }
    });

    let b = cs.scoped("xty_norm", |cs| {
        let b = xty(cs, x, y, d);
        for (j, bj) in b.iter().enumerate() {
            cs.scoped(format!("[{j}]"), |cs| abs_leq(cs, bj, &b_xty.into()));
        }
        b
    });

    let noise: Vec<Lc> = cs.scoped("noise_derivation", |cs| {
        let modulus = (p.d_l - 1) as u64;
        let qw = quotient_width(modulus);
        (0..m)
            .map(|j| {
                cs.scoped(format!("[{j}]"), |cs| {
                    let h = sponge(cs, &[pbh.into(), y[j].clone()], p.hash_alg);
                    let hint = fe(pv.draws[j].p as u128) - FieldElement::ONE;
                    let r = modulo(cs, &h, modulus, qw, Some(hint));
                    lookup(cs, &r, &table)
                })
            })
            .collect()
    });

    cs.scoped("noisy_weight", |cs| {
        let w_tilde = round_weights(cs, &z, &b, d);
        for j in 0..m {
            cs.scoped(format!("[{j}]"), |cs| {
                let diff = Lc::from(w_noisy[j]) - &w_tilde[j] - &noise[j];
                abs_leq(cs, &diff, &b_wn.into());
            });
        }
    });
}

pub fn build_weight_circuit(p: &WeightCircuitParams) -> Result<ConstraintSystem, CircuitError> {
    p.validate()?;
    let mut cs = Synth::new(Mode::Shape);
    synth(&mut cs, p, &WeightStatement::placeholder(p), &WeightPrivate::placeholder(p));
    Ok(cs.into_constraint_system())
}

pub fn count_weight_constraints(p: &WeightCircuitParams) -> Result<usize, CircuitError> {
    p.validate()?;
    let mut cs = Synth::new(Mode::Count);
    synth(&mut cs, p, &WeightStatement::placeholder(p), &WeightPrivate::placeholder(p));
    Ok(cs.num_constraints())
}

/// Full assignment plus the first unsatisfied constraint, if any. A
/// dishonest input still yields a witness that verification will reject.
pub fn synthesize_weight_witness(
    p: &WeightCircuitParams,
    st: &WeightStatement,
    pv: &WeightPrivate,
) -> Result<(Witness, Option<Violation>), CircuitError> {
    p.validate()?;
    st.check(p)?;
    pv.check(p)?;
    let mut cs = Synth::new(Mode::Witness);
    synth(&mut cs, p, st, pv);
    Ok(cs.into_witness())
}

pub fn gen_weight_witness(p: &WeightCircuitParams, st: &WeightStatement, pv: &WeightPrivate) -> Result<Witness, CircuitError> {
    match synthesize_weight_witness(p, st, pv)? {
        (w, None) => Ok(w),
        (_, Some(v)) => Err(CircuitError::from_violation(&v)),
    }
}
