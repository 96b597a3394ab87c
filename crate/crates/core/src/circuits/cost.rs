//! Cost statement: `c` is the squared error on the committed test set of
//! weights consistent with the committed training data.
//!
//! Public inputs, in order: `c, k, n, n_test, d, root_train, root_test, eps_w`.

use serde::{Deserialize, Serialize};

use super::gadgets::{abs, abs_leq, range_check, round_div, signed_range_check, DATA_BITS};
use super::hash_gadget::merkle_root;
use super::r1cs::{ConstraintSystem, Lc, Mode, Synth, Var, Violation, Witness};
use super::{
    alloc_columns, alloc_rows, check_matrix, fe, gram, residual_checks, round_weights, validate_common, xty, CircuitError,
};
use crate::bounds::DEFAULT_EPS_INVERSE;
use crate::field::{div_round_half_away_i128, fp_encode, pow10, FieldElement, ScaledMatrix, COMPARATOR_BITS};
use crate::hash::HashAlg;
use crate::linreg::column_name;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostCircuitParams {
    pub k: usize,
    pub n: usize,
    pub n_test: usize,
    pub d: u32,
    pub hash_alg: HashAlg,
    /// Residual tolerance for `Z`, at scale `2d`; fixed per circuit.
    pub eps_inverse: u128,
}

impl CostCircuitParams {
    /// Uses the default inverse tolerance.
    pub fn new(k: usize, n: usize, n_test: usize, d: u32, hash_alg: HashAlg) -> Result<Self, CircuitError> {
        if d > super::MAX_DECIMALS {
            return Err(CircuitError::Params(format!("d = {d} exceeds {}", super::MAX_DECIMALS)));
        }
        let eps_inverse = fp_encode(DEFAULT_EPS_INVERSE, 2 * d).expect("default tolerance encodes").mag();
        let p = CostCircuitParams {
            k,
            n,
            n_test,
            d,
            hash_alg,
            eps_inverse,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        validate_common(self.k, self.n, self.d)?;
        if self.n_test == 0 {
            return Err(CircuitError::Params("empty test set".into()));
        }
        let scaled = self.eps_inverse.checked_mul(pow10(self.d));
        if scaled.is_none_or(|s| s >> COMPARATOR_BITS != 0) {
            return Err(CircuitError::Params("eps_inverse too large for the comparator".into()));
        }
        Ok(())
    }

    pub fn num_public(&self) -> usize {
        8
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostStatement {
    /// Sum of squared errors at scale `2d`.
    pub cost: u128,
    pub root_train: FieldElement,
    pub root_test: FieldElement,
    /// At scale `d`.
    pub eps_w: u128,
}

impl CostStatement {
    pub fn to_public_inputs(&self, p: &CostCircuitParams) -> Vec<FieldElement> {
        vec![
            fe(self.cost),
            fe(p.k as u128),
            fe(p.n as u128),
            fe(p.n_test as u128),
            fe(p.d as u128),
            self.root_train,
            self.root_test,
            fe(self.eps_w),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostPrivate {
    /// `n x (k+1)` training data at scale `d`.
    pub data: ScaledMatrix,
    /// `n_test x (k+1)` test data at scale `d`.
    pub test: ScaledMatrix,
    pub z: ScaledMatrix,
    /// Noise-free weights, `(k+1) x 1` at scale `d`.
    pub w: ScaledMatrix,
}

impl CostPrivate {
    fn placeholder(p: &CostCircuitParams) -> Self {
        let m = p.k + 1;
        CostPrivate {
            data: ScaledMatrix::zeros(p.n, m, p.d),
            test: ScaledMatrix::zeros(p.n_test, m, p.d),
            z: ScaledMatrix::zeros(m, m, p.d),
            w: ScaledMatrix::zeros(m, 1, p.d),
        }
    }

    fn check(&self, p: &CostCircuitParams) -> Result<(), CircuitError> {
        let m = p.k + 1;
        check_matrix("data", &self.data, p.n, m, p.d)?;
        check_matrix("test", &self.test, p.n_test, m, p.d)?;
        check_matrix("Z", &self.z, m, m, p.d)?;
        check_matrix("w", &self.w, m, 1, p.d)
    }
}

/// Squared error at scale `2d` of integer predictions rounded to scale `d`,
/// computed exactly as the circuit does.
pub fn compute_cost(test: &ScaledMatrix, w: &ScaledMatrix) -> Result<u128, CircuitError> {
    let m = test.cols();
    if w.rows() != m || w.cols() != 1 || w.scale() != test.scale() {
        return Err(CircuitError::Shape("weights do not match the test set".into()));
    }
    let overflow = || CircuitError::Shape("cost overflows 128 bits".into());
    let unit = pow10(test.scale()) as i128;
    let w = w.to_i128();
    let t = test.to_i128();
    let mut total: u128 = 0;
    for row in t.chunks(m) {
        let mut acc = unit.checked_mul(w[0]).ok_or_else(overflow)?;
        for j in 0..m - 1 {
            acc = row[j].checked_mul(w[j + 1]).and_then(|v| v.checked_add(acc)).ok_or_else(overflow)?;
        }
        let pred = div_round_half_away_i128(acc, unit);
        let err = row[m - 1].checked_sub(pred).ok_or_else(overflow)?.unsigned_abs();
        total = err.checked_mul(err).and_then(|e| e.checked_add(total)).ok_or_else(overflow)?;
    }
    Ok(total)
}

fn synth(cs: &mut Synth, p: &CostCircuitParams, st: &CostStatement, pv: &CostPrivate) {
    let (k, n, d) = (p.k, p.n, p.d);
    let m = k + 1;
    let vars: Vec<Var> = st.to_public_inputs(p).iter().map(|&v| cs.alloc_public(v)).collect();
    let [pc, pk, pn, pnt, pd, proot, proot_test, peps]: [Var; 8] = vars.try_into().expect("eight publics");

    cs.scoped("public_inputs", |cs| {
        for (name, var, val) in [("k", pk, k), ("n", pn, n), ("n_test", pnt, p.n_test), ("d", pd, d as usize)] {
            cs.scoped(name, |cs| cs.enforce_eq(var.into(), Lc::constant(fe(val as u128))));
        }
        cs.scoped("eps_w", |cs| range_check(cs, &peps.into(), COMPARATOR_BITS as usize));
    });

    let cols = alloc_columns(cs, &pv.data);
    let test = alloc_columns(cs, &pv.test);
    let z = alloc_rows(cs, &pv.z);
    let w: Vec<Lc> = alloc_columns(cs, &pv.w).remove(0);

    cs.scoped("data_range", |cs| {
        for (set, data) in [("train", &cols), ("test", &test)] {
            for (c, col) in data.iter().enumerate() {
                for (r, v) in col.iter().enumerate() {
                    cs.scoped(format!("{set}/{}[{r}]", column_name(c, k)), |cs| {
                        signed_range_check(cs, v, DATA_BITS);
                    });
                }
            }
        }
    });

    cs.scoped("merkle_root_train", |cs| {
        let root = merkle_root(cs, &cols.concat(), p.hash_alg);
        cs.enforce_eq(root, proot.into());
    });
    cs.scoped("merkle_root_test", |cs| {
        let root = merkle_root(cs, &test.concat(), p.hash_alg);
        cs.enforce_eq(root, proot_test.into());
    });

    let (x, y) = cols.split_at(k);
    let y = &y[0];

    cs.scoped("inverse_residual", |cs| {
        for (i, row) in z.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                cs.scoped(format!("Z[{i}][{j}]"), |cs| {
                    abs(cs, v, DATA_BITS);
                });
            }
        }
        let a = gram(cs, x, None, n, d);
        let bound = Lc::constant(fe(p.eps_inverse * pow10(d)));
        residual_checks(cs, &a, &z, &bound, d);
    });

    cs.scoped("weight_consistency", |cs| {
        let b = xty(cs, x, y, d);
        let w_tilde = round_weights(cs, &z, &b, d);
        for j in 0..m {
            cs.scoped(format!("[{j}]"), |cs| {
                abs_leq(cs, &(w[j].clone() - &w_tilde[j]), &peps.into());
            });
        }
    });

    let (tx, ty) = test.split_at(k);
    let ty = &ty[0];
    let unit = pow10(d);
    let preds: Vec<Lc> = cs.scoped("prediction", |cs| {
        (0..p.n_test)
            .map(|i| {
                cs.scoped(format!("[{i}]"), |cs| {
                    let mut acc = w[0].scale(fe(unit));
                    for j in 0..k {
                        acc = acc + cs.mul(&tx[j][i], &w[j + 1]);
                    }
                    round_div(cs, &acc, unit, COMPARATOR_BITS as usize)
                })
            })
            .collect()
    });

    cs.scoped("cost", |cs| {
        let mut total = Lc::zero();
        for (yi, pi) in ty.iter().zip(&preds) {
            let e = yi.clone() - pi;
            total = total + cs.mul(&e, &e);
        }
        cs.enforce_eq(total, pc.into());
    });
}

pub fn build_cost_circuit(p: &CostCircuitParams) -> Result<ConstraintSystem, CircuitError> {
    p.validate()?;
    let mut cs = Synth::new(Mode::Shape);
    let st = CostStatement {
        cost: 0,
        root_train: FieldElement::ZERO,
        root_test: FieldElement::ZERO,
        eps_w: 0,
    };
    synth(&mut cs, p, &st, &CostPrivate::placeholder(p));
    Ok(cs.into_constraint_system())
}

pub fn count_cost_constraints(p: &CostCircuitParams) -> Result<usize, CircuitError> {
    p.validate()?;
    let mut cs = Synth::new(Mode::Count);
    let st = CostStatement {
        cost: 0,
        root_train: FieldElement::ZERO,
        root_test: FieldElement::ZERO,
        eps_w: 0,
    };
    synth(&mut cs, p, &st, &CostPrivate::placeholder(p));
    Ok(cs.num_constraints())
}

pub fn synthesize_cost_witness(
    p: &CostCircuitParams,
    st: &CostStatement,
    pv: &CostPrivate,
) -> Result<(Witness, Option<Violation>), CircuitError> {
    p.validate()?;
    pv.check(p)?;
    let mut cs = Synth::new(Mode::Witness);
    synth(&mut cs, p, st, pv);
    Ok(cs.into_witness())
}

pub fn gen_cost_witness(p: &CostCircuitParams, st: &CostStatement, pv: &CostPrivate) -> Result<Witness, CircuitError> {
    match synthesize_cost_witness(p, st, pv)? {
        (w, None) => Ok(w),
        (_, Some(v)) => Err(CircuitError::from_violation(&v)),
    }
}
