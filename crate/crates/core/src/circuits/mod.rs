//! Constraint systems for the weight statement and the cost statement.

pub mod cost;
pub mod gadgets;
pub mod hash_gadget;
pub mod r1cs;
pub mod weight;

use thiserror::Error;

use crate::field::{pow10, FieldElement, ScaledMatrix, COMPARATOR_BITS};
use gadgets::{abs_leq, round_div};
use r1cs::{Lc, Synth};

pub use cost::{
    build_cost_circuit, compute_cost, count_cost_constraints, gen_cost_witness, synthesize_cost_witness, CostCircuitParams,
    CostPrivate, CostStatement,
};
pub use r1cs::{cs_verify, ConstraintSystem, LinearCombination, Var, Verdict, VerifyError, Violation, Witness};
pub use weight::{
    build_weight_circuit, count_weight_constraints, gen_weight_witness, synthesize_weight_witness, WeightCircuitParams,
    WeightPrivate, WeightStatement,
};

/// Largest supported number of decimals; `10^(3d)` must fit in 128 bits.
pub const MAX_DECIMALS: u32 = 12;

/// Largest supported noise-table granularity.
pub const MAX_TABLE: usize = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CircuitError {
    #[error("invalid circuit parameters: {0}")]
    Params(String),
    #[error("input shape mismatch: {0}")]
    Shape(String),
    #[error("{check} check fails at {label}")]
    Unsatisfied { check: String, label: String },
}

impl CircuitError {
    fn from_violation(v: &Violation) -> Self {
        CircuitError::Unsatisfied {
            check: v.check().to_string(),
            label: v.label.clone(),
        }
    }
}

fn fe(v: u128) -> FieldElement {
    FieldElement::from_u128(v)
}

fn check_matrix(name: &str, m: &ScaledMatrix, rows: usize, cols: usize, scale: u32) -> Result<(), CircuitError> {
    if m.rows() != rows || m.cols() != cols || m.scale() != scale {
        return Err(CircuitError::Shape(format!(
            "{name} is {}x{} at scale {}, expected {rows}x{cols} at scale {scale}",
            m.rows(),
            m.cols(),
            m.scale()
        )));
    }
    Ok(())
}

/// Allocates a matrix column by column; returns `cols[c][r]`.
fn alloc_columns(cs: &mut Synth, m: &ScaledMatrix) -> Vec<Vec<Lc>> {
    (0..m.cols())
        .map(|c| {
            m.column(c)
                .into_iter()
                .map(|v| cs.alloc(crate::field::field_embed(v)).into())
                .collect()
        })
        .collect()
}

/// Allocates a matrix row by row; returns `rows[r][c]`.
fn alloc_rows(cs: &mut Synth, m: &ScaledMatrix) -> Vec<Vec<Lc>> {
    (0..m.rows())
        .map(|r| {
            (0..m.cols())
                .map(|c| cs.alloc(crate::field::field_embed(m.get(r, c))).into())
                .collect()
        })
        .collect()
}

/// `X^T X` at scale `2d` for the design matrix with a ones column at scale
/// `d`. Diagonal feature entries reuse `squares` when supplied.
fn gram(cs: &mut Synth, x: &[Vec<Lc>], squares: Option<&[Vec<Lc>]>, n: usize, d: u32) -> Vec<Vec<Lc>> {
    let k = x.len();
    let m = k + 1;
    let mut a = vec![vec![Lc::zero(); m]; m];
    a[0][0] = Lc::constant(fe(n as u128 * pow10(2 * d)));
    for j in 0..k {
        let s = cs.collapse(Lc::sum(&x[j]).scale(fe(pow10(d))));
        a[0][j + 1] = s.clone();
        a[j + 1][0] = s;
        for l in j..k {
            let products: Vec<Lc> = match squares {
                Some(sq) if l == j => sq[j].clone(),
                _ => x[j].iter().zip(&x[l]).map(|(u, v)| cs.mul(u, v)).collect(),
            };
            let s = cs.collapse(Lc::sum(&products));
            a[j + 1][l + 1] = s.clone();
            a[l + 1][j + 1] = s;
        }
    }
    a
}

/// `X^T Y` at scale `2d`.
fn xty(cs: &mut Synth, x: &[Vec<Lc>], y: &[Lc], d: u32) -> Vec<Lc> {
    let mut b = vec![cs.collapse(Lc::sum(y).scale(fe(pow10(d))))];
    for col in x {
        let products: Vec<Lc> = col.iter().zip(y).map(|(u, v)| cs.mul(u, v)).collect();
        b.push(cs.collapse(Lc::sum(&products)));
    }
    b
}

/// `|(A Z - I)_ij| <= bound` entrywise, at scale `3d`.
fn residual_checks(cs: &mut Synth, a: &[Vec<Lc>], z: &[Vec<Lc>], bound: &Lc, d: u32) {
    let m = a.len();
    let unit = fe(pow10(3 * d));
    for i in 0..m {
        for j in 0..m {
            cs.scoped(format!("[{i}][{j}]"), |cs| {
                let mut r = Lc::zero();
                for t in 0..m {
                    r = r + cs.mul(&a[i][t], &z[t][j]);
                }
                if i == j {
                    r = r - Lc::constant(unit);
                }
                abs_leq(cs, &r, bound);
            });
        }
    }
}

/// `round(Z X^T Y)` from scale `3d` down to `d`.
fn round_weights(cs: &mut Synth, z: &[Vec<Lc>], b: &[Lc], d: u32) -> Vec<Lc> {
    let m = b.len();
    (0..m)
        .map(|j| {
            cs.scoped(format!("round[{j}]"), |cs| {
                let mut p = Lc::zero();
                for t in 0..m {
                    p = p + cs.mul(&z[j][t], &b[t]);
                }
                round_div(cs, &p, pow10(2 * d), COMPARATOR_BITS as usize)
            })
        })
        .collect()
}

fn validate_common(k: usize, n: usize, d: u32) -> Result<(), CircuitError> {
    if d > MAX_DECIMALS {
        return Err(CircuitError::Params(format!("d = {d} exceeds {MAX_DECIMALS}")));
    }
    if n < k + 2 {
        return Err(CircuitError::Params(format!("n = {n} must be at least k + 2 = {}", k + 2)));
    }
    Ok(())
}
