//! Rank-1 constraint systems, a synthesizer that either records shape,
//! fills in a witness or only counts, and the satisfaction checker.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::FieldElement;

/// Variable index; index 0 is the constant one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Var(pub u32);

impl Var {
    pub const ONE: Var = Var(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Sparse `sum coeff * var`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinearCombination(pub Vec<(Var, FieldElement)>);

pub type Lc = LinearCombination;

impl LinearCombination {
    pub fn zero() -> Self {
        LinearCombination(Vec::new())
    }

    pub fn constant(c: FieldElement) -> Self {
        if c.is_zero() {
            Self::zero()
        } else {
            LinearCombination(vec![(Var::ONE, c)])
        }
    }

    pub fn constant_u128(c: u128) -> Self {
        Self::constant(FieldElement::from_u128(c))
    }

    pub fn one() -> Self {
        Self::constant(FieldElement::ONE)
    }

    pub fn term(v: Var, c: FieldElement) -> Self {
        LinearCombination(vec![(v, c)])
    }

    pub fn terms(&self) -> &[(Var, FieldElement)] {
        &self.0
    }

    pub fn push(&mut self, v: Var, c: FieldElement) {
        self.0.push((v, c));
    }

    pub fn scale(&self, c: FieldElement) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        LinearCombination(self.0.iter().map(|&(v, k)| (v, k * c)).collect())
    }

    /// The value when only the constant wire appears.
    pub fn as_constant(&self) -> Option<FieldElement> {
        self.0
            .iter()
            .try_fold(FieldElement::ZERO, |acc, &(v, c)| (v == Var::ONE).then(|| acc + c))
    }

    pub fn eval(&self, values: &[FieldElement]) -> FieldElement {
        self.0.iter().map(|&(v, c)| values[v.index()] * c).sum()
    }

    /// Sorts by variable, merges duplicates and drops zero coefficients.
    pub fn compact(mut self) -> Self {
        if self.0.len() <= 1 {
            self.0.retain(|(_, c)| !c.is_zero());
            return self;
        }
        self.0.sort_by_key(|&(v, _)| v);
        let mut out: Vec<(Var, FieldElement)> = Vec::with_capacity(self.0.len());
        for (v, c) in self.0 {
            match out.last_mut() {
                Some((last, acc)) if *last == v => *acc += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|(_, c)| !c.is_zero());
        LinearCombination(out)
    }

    pub fn sum<'a>(items: impl IntoIterator<Item = &'a LinearCombination>) -> Self {
        let mut out = Vec::new();
        for lc in items {
            out.extend_from_slice(&lc.0);
        }
        LinearCombination(out)
    }
}

impl From<Var> for LinearCombination {
    fn from(v: Var) -> Self {
        LinearCombination(vec![(v, FieldElement::ONE)])
    }
}

impl Add for LinearCombination {
    type Output = LinearCombination;
    fn add(mut self, rhs: LinearCombination) -> LinearCombination {
        self.0.extend(rhs.0);
        self
    }
}

impl Add<&LinearCombination> for LinearCombination {
    type Output = LinearCombination;
    fn add(mut self, rhs: &LinearCombination) -> LinearCombination {
        self.0.extend_from_slice(&rhs.0);
        self
    }
}

impl Sub for LinearCombination {
    type Output = LinearCombination;
    fn sub(self, rhs: LinearCombination) -> LinearCombination {
        self + (-rhs)
    }
}

impl Sub<&LinearCombination> for LinearCombination {
    type Output = LinearCombination;
    fn sub(mut self, rhs: &LinearCombination) -> LinearCombination {
        self.0.extend(rhs.0.iter().map(|&(v, c)| (v, -c)));
        self
    }
}

impl Neg for LinearCombination {
    type Output = LinearCombination;
    fn neg(self) -> LinearCombination {
        LinearCombination(self.0.into_iter().map(|(v, c)| (v, -c)).collect())
    }
}

impl Mul<FieldElement> for LinearCombination {
    type Output = LinearCombination;
    fn mul(self, rhs: FieldElement) -> LinearCombination {
        self.scale(rhs)
    }
}

/// `<a, z> * <b, z> = <c, z>`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub a: LinearCombination,
    pub b: LinearCombination,
    pub c: LinearCombination,
    /// Index into [`ConstraintSystem::labels`].
    pub label: u32,
}

impl Constraint {
    pub fn is_satisfied(&self, values: &[FieldElement]) -> bool {
        self.a.eval(values) * self.b.eval(values) == self.c.eval(values)
    }

    fn max_var(&self) -> Option<Var> {
        [&self.a, &self.b, &self.c]
            .iter()
            .flat_map(|lc| lc.0.iter().map(|&(v, _)| v))
            .max()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSystem {
    pub num_vars: usize,
    pub public_indices: Vec<Var>,
    pub constraints: Vec<Constraint>,
    pub labels: Vec<String>,
}

impl ConstraintSystem {
    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_public(&self) -> usize {
        self.public_indices.len()
    }

    pub fn label(&self, constraint: usize) -> &str {
        &self.labels[self.constraints[constraint].label as usize]
    }

    /// Checks that every referenced index is allocated.
    pub fn is_well_formed(&self) -> bool {
        self.public_indices.iter().all(|v| v.index() < self.num_vars && *v != Var::ONE)
            && self
                .constraints
                .iter()
                .all(|c| c.max_var().is_none_or(|v| v.index() < self.num_vars) && (c.label as usize) < self.labels.len())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub assignment: Vec<FieldElement>,
}

impl Witness {
    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }
}

/// First check name of a `/`-separated label.
pub fn check_of(label: &str) -> &str {
    label.split('/').next().unwrap_or(label)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    pub label: String,
}

impl Violation {
    pub fn check(&self) -> &str {
        check_of(&self.label)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Pass { evaluated: usize },
    Fail { index: usize, label: String, evaluated: usize },
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass { .. })
    }

    pub fn evaluated(&self) -> usize {
        match self {
            Verdict::Pass { evaluated } | Verdict::Fail { evaluated, .. } => *evaluated,
        }
    }

    pub fn check(&self) -> Option<&str> {
        match self {
            Verdict::Pass { .. } => None,
            Verdict::Fail { label, .. } => Some(check_of(label)),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifyError {
    #[error("malformed proof: {0}")]
    Malformed(String),
}

/// Binds `publics`, checks the constant wire and evaluates every
/// constraint; a failure names the first violated constraint.
pub fn cs_verify(cs: &ConstraintSystem, witness: &Witness, publics: &[FieldElement]) -> Result<Verdict, VerifyError> {
    if publics.len() != cs.public_indices.len() {
        return Err(VerifyError::Malformed(format!(
            "expected {} public inputs, got {}",
            cs.public_indices.len(),
            publics.len()
        )));
    }
    if witness.assignment.len() != cs.num_vars {
        return Err(VerifyError::Malformed(format!(
            "expected {} witness values, got {}",
            cs.num_vars,
            witness.assignment.len()
        )));
    }
    let mut values = witness.assignment.clone();
    for (v, &x) in cs.public_indices.iter().zip(publics) {
        values[v.index()] = x;
    }
    if cs.num_vars > 0 && values[0] != FieldElement::ONE {
        return Ok(Verdict::Fail {
            index: 0,
            label: "constant_one".into(),
            evaluated: 0,
        });
    }
    let first = cs.constraints.iter().position(|c| !c.is_satisfied(&values));
    let evaluated = cs.constraints.len();
    Ok(match first {
        None => Verdict::Pass { evaluated },
        Some(index) => Verdict::Fail {
            index,
            label: cs.label(index).to_string(),
            evaluated,
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Record constraints.
    Shape,
    /// Assign values and note the first unsatisfied constraint.
    Witness,
    /// Count constraints only.
    Count,
}

/// Circuit builder shared by shape extraction, witness generation and
/// counting. Values are propagated in every mode so gadgets can branch on
/// them uniformly; in shape and count mode the inputs are placeholders.
pub struct Synth {
    mode: Mode,
    values: Vec<FieldElement>,
    public: Vec<Var>,
    constraints: Vec<Constraint>,
    labels: Vec<String>,
    label_ids: HashMap<String, u32>,
    scopes: Vec<String>,
    current: u32,
    count: usize,
    violation: Option<Violation>,
}

impl Synth {
    pub fn new(mode: Mode) -> Self {
        let mut s = Synth {
            mode,
            values: vec![FieldElement::ONE],
            public: Vec::new(),
            constraints: Vec::new(),
            labels: Vec::new(),
            label_ids: HashMap::new(),
            scopes: Vec::new(),
            current: 0,
            count: 0,
            violation: None,
        };
        s.current = s.intern("unscoped".into());
        s
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    fn intern(&mut self, label: String) -> u32 {
        if let Some(&id) = self.label_ids.get(&label) {
            return id;
        }
        let id = self.labels.len() as u32;
        self.labels.push(label.clone());
        self.label_ids.insert(label, id);
        id
    }

    fn refresh_label(&mut self) {
        let label = if self.scopes.is_empty() {
            "unscoped".to_string()
        } else {
            self.scopes.join("/")
        };
        self.current = self.intern(label);
    }

    /// Runs `f` with `name` appended to the label path.
    pub fn scoped<R>(&mut self, name: impl Into<String>, f: impl FnOnce(&mut Self) -> R) -> R {
        self.scopes.push(name.into());
        self.refresh_label();
        let out = f(self);
        self.scopes.pop();
        self.refresh_label();
        out
    }

    /// Publics must be allocated before any private variable.
    pub fn alloc_public(&mut self, value: FieldElement) -> Var {
        assert_eq!(
            self.values.len(),
            self.public.len() + 1,
            "public inputs are allocated first"
        );
        let v = self.alloc(value);
        self.public.push(v);
        v
    }

    pub fn alloc(&mut self, value: FieldElement) -> Var {
        let v = Var(self.values.len() as u32);
        self.values.push(value);
        v
    }

    pub fn value(&self, v: Var) -> FieldElement {
        self.values[v.index()]
    }

    pub fn eval(&self, lc: &LinearCombination) -> FieldElement {
        lc.eval(&self.values)
    }

    pub fn enforce(&mut self, a: LinearCombination, b: LinearCombination, c: LinearCombination) {
        let index = self.count;
        self.count += 1;
        match self.mode {
            Mode::Count => {}
            Mode::Witness => {
                if self.violation.is_none() && self.eval(&a) * self.eval(&b) != self.eval(&c) {
                    self.violation = Some(Violation {
                        index,
                        label: self.labels[self.current as usize].clone(),
                    });
                }
            }
            Mode::Shape => self.constraints.push(Constraint {
                a: a.compact(),
                b: b.compact(),
                c: c.compact(),
                label: self.current,
            }),
        }
    }

    /// `lhs = rhs` as one linear constraint.
    pub fn enforce_eq(&mut self, lhs: LinearCombination, rhs: LinearCombination) {
        self.enforce(lhs, LinearCombination::one(), rhs);
    }

    /// Product of two combinations; constants fold without constraints.
    pub fn mul(&mut self, a: &LinearCombination, b: &LinearCombination) -> LinearCombination {
        if let Some(c) = a.as_constant() {
            return b.scale(c);
        }
        if let Some(c) = b.as_constant() {
            return a.scale(c);
        }
        let v = self.alloc(self.eval(a) * self.eval(b));
        self.enforce(a.clone(), b.clone(), v.into());
        v.into()
    }

    /// Replaces a long combination by a single fresh variable.
    pub fn collapse(&mut self, lc: LinearCombination) -> LinearCombination {
        if lc.as_constant().is_some() {
            return lc;
        }
        if let [(v, c)] = lc.0.as_slice() {
            if *c == FieldElement::ONE {
                return (*v).into();
            }
        }
        let v = self.alloc(self.eval(&lc));
        self.enforce_eq(v.into(), lc);
        v.into()
    }

    pub fn num_constraints(&self) -> usize {
        self.count
    }

    pub fn num_vars(&self) -> usize {
        self.values.len()
    }

    pub fn violation(&self) -> Option<&Violation> {
        self.violation.as_ref()
    }

    pub fn public_values(&self) -> Vec<FieldElement> {
        self.public.iter().map(|&v| self.value(v)).collect()
    }

    pub fn into_constraint_system(self) -> ConstraintSystem {
        ConstraintSystem {
            num_vars: self.values.len(),
            public_indices: self.public,
            constraints: self.constraints,
            labels: self.labels,
        }
    }

    pub fn into_witness(self) -> (Witness, Option<Violation>) {
        (
            Witness {
                assignment: self.values,
            },
            self.violation,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fe(v: u64) -> FieldElement {
        FieldElement::from_u64(v)
    }

    /// x * y = out, x public.
    fn product_circuit(mode: Mode, x: u64, y: u64) -> Synth {
        let mut cs = Synth::new(mode);
        let px = cs.alloc_public(fe(x));
        let out = cs.alloc_public(fe(x * y));
        cs.scoped("product", |cs| {
            let vy = cs.alloc(fe(y));
            let prod = cs.mul(&px.into(), &vy.into());
            cs.enforce_eq(prod, out.into());
        });
        cs
    }

    #[test]
    fn empty_system_passes() {
        let cs = Synth::new(Mode::Shape).into_constraint_system();
        let w = Witness {
            assignment: vec![FieldElement::ONE],
        };
        assert_eq!(cs_verify(&cs, &w, &[]).unwrap(), Verdict::Pass { evaluated: 0 });
    }

    #[test]
    fn product_round_trip() {
        let shape = product_circuit(Mode::Shape, 0, 0).into_constraint_system();
        assert!(shape.is_well_formed());
        assert_eq!(shape.num_constraints(), 2);
        assert_eq!(shape.public_indices, vec![Var(1), Var(2)]);
        let (w, violation) = product_circuit(Mode::Witness, 6, 7).into_witness();
        assert!(violation.is_none());
        assert!(cs_verify(&shape, &w, &[fe(6), fe(42)]).unwrap().is_pass());

        let verdict = cs_verify(&shape, &w, &[fe(6), fe(41)]).unwrap();
        assert_eq!(verdict.check(), Some("product"));

        let mut tampered = w.clone();
        tampered.assignment[3] = fe(8);
        assert!(!cs_verify(&shape, &tampered, &[fe(6), fe(42)]).unwrap().is_pass());
    }

    #[test]
    fn constant_wire_is_checked() {
        let shape = product_circuit(Mode::Shape, 0, 0).into_constraint_system();
        let (mut w, _) = product_circuit(Mode::Witness, 6, 7).into_witness();
        w.assignment[0] = fe(2);
        assert_eq!(
            cs_verify(&shape, &w, &[fe(6), fe(42)]).unwrap().check(),
            Some("constant_one")
        );
    }

    #[test]
    fn length_mismatch_is_malformed() {
        let shape = product_circuit(Mode::Shape, 0, 0).into_constraint_system();
        let (w, _) = product_circuit(Mode::Witness, 6, 7).into_witness();
        assert!(matches!(cs_verify(&shape, &w, &[fe(6)]), Err(VerifyError::Malformed(_))));
        let short = Witness {
            assignment: w.assignment[..2].to_vec(),
        };
        assert!(matches!(
            cs_verify(&shape, &short, &[fe(6), fe(42)]),
            Err(VerifyError::Malformed(_))
        ));
    }

    #[test]
    fn witness_mode_reports_first_violation() {
        let mut cs = Synth::new(Mode::Witness);
        cs.scoped("a", |cs| cs.enforce_eq(LinearCombination::one(), LinearCombination::one()));
        cs.scoped("b", |cs| cs.scoped("inner", |cs| cs.enforce_eq(LinearCombination::one(), LinearCombination::zero())));
        cs.scoped("c", |cs| cs.enforce_eq(LinearCombination::one(), LinearCombination::zero()));
        let v = cs.violation().unwrap();
        assert_eq!((v.index, v.label.as_str(), v.check()), (1, "b/inner", "b"));
    }

    #[test]
    fn count_mode_matches_shape() {
        let shape = product_circuit(Mode::Shape, 0, 0);
        let count = product_circuit(Mode::Count, 0, 0);
        assert_eq!(shape.num_constraints(), count.num_constraints());
    }

    #[test]
    fn compact_merges_terms() {
        let lc = LinearCombination(vec![(Var(2), fe(1)), (Var(1), fe(3)), (Var(2), fe(4)), (Var(3), fe(0))]);
        assert_eq!(lc.compact().0, vec![(Var(1), fe(3)), (Var(2), fe(5))]);
        let cancel = LinearCombination::from(Var(4)) - LinearCombination::from(Var(4));
        assert!(cancel.compact().0.is_empty());
    }

    #[test]
    fn json_form_uses_decimal_strings() {
        let shape = product_circuit(Mode::Shape, 0, 0).into_constraint_system();
        let json = shape.to_json();
        assert!(json.contains("\"num_vars\":5"));
        assert!(json.contains("[1,\"1\"]"));
        let back: ConstraintSystem = serde_json::from_str(&json).unwrap();
        assert_eq!(back, shape);
    }
}
