//! Bit decomposition, comparison, absolute value, modular reduction,
//! table lookup and fixed-point rounding.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};

use super::r1cs::{Lc, LinearCombination, Synth, Var};
use crate::field::{div_round_half_away, FieldElement, COMPARATOR_BITS};

/// Widest decomposition that is still unique below the modulus.
pub const MAX_BITS: usize = 253;

/// Width of signed data values: `x + 2^63` must fit 64 bits.
pub const DATA_BITS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpMode {
    Geq,
    Leq,
}

pub fn pow2(e: usize) -> FieldElement {
    FieldElement::from_u64(2).pow(e as u64)
}

/// Number of bits of `v` (0 for 0).
pub fn bit_length(v: &BigUint) -> usize {
    v.bits() as usize
}

/// `b * (b - 1) = 0`.
pub fn enforce_boolean(cs: &mut Synth, b: Var) {
    cs.enforce(b.into(), Lc::from(b) - Lc::one(), Lc::zero());
}

pub fn alloc_boolean(cs: &mut Synth, value: bool) -> Var {
    let b = cs.alloc(if value { FieldElement::ONE } else { FieldElement::ZERO });
    enforce_boolean(cs, b);
    b
}

/// Little-endian bits of `value`, constrained to recompose to it.
pub fn num2bits(cs: &mut Synth, value: &Lc, width: usize) -> Vec<Var> {
    assert!(width <= MAX_BITS, "decomposition width {width} exceeds {MAX_BITS}");
    let v = cs.eval(value);
    let bits: Vec<Var> = (0..width).map(|i| alloc_boolean(cs, v.bit(i))).collect();
    let mut recomposed = Lc::zero();
    let mut coeff = FieldElement::ONE;
    for &b in &bits {
        recomposed.push(b, coeff);
        coeff = coeff + coeff;
    }
    cs.enforce_eq(recomposed, value.clone());
    bits
}

/// Proves `0 <= value < 2^width`.
pub fn range_check(cs: &mut Synth, value: &Lc, width: usize) {
    num2bits(cs, value, width);
}

/// Proves a sign-embedded value lies in `[-2^(width-1), 2^(width-1))`.
pub fn signed_range_check(cs: &mut Synth, value: &Lc, width: usize) {
    let shifted = value.clone() + Lc::constant(pow2(width - 1));
    range_check(cs, &shifted, width);
}

/// Output bit of `lhs >= rhs` (or `<=`); operands must be below `2^width`.
pub fn cmp(cs: &mut Synth, lhs: &Lc, rhs: &Lc, width: usize, mode: CmpMode) -> Var {
    assert!(width <= COMPARATOR_BITS as usize, "comparator width {width} exceeds {COMPARATOR_BITS}");
    let (big, small) = match mode {
        CmpMode::Geq => (lhs, rhs),
        CmpMode::Leq => (rhs, lhs),
    };
    let diff = big.clone() - small + Lc::constant(pow2(width));
    let bits = num2bits(cs, &diff, width + 1);
    bits[width]
}

/// Sign bit `s` and magnitude `m` with `(1 - 2s) * m = value`, `m < 2^width`.
pub fn abs(cs: &mut Synth, value: &Lc, width: usize) -> (Var, Var) {
    let signed = cs.eval(value).to_signed();
    let negative = signed < BigInt::zero();
    let s = alloc_boolean(cs, negative);
    let m = cs.alloc(FieldElement::from_biguint(signed.magnitude()));
    let factor = Lc::one() - Lc::from(s).scale(FieldElement::from_u64(2));
    cs.enforce(factor, m.into(), value.clone());
    range_check(cs, &m.into(), width);
    (s, m)
}

/// Enforces `|value| <= bound`; `bound` must already be below `2^126`.
pub fn abs_leq(cs: &mut Synth, value: &Lc, bound: &Lc) {
    let width = COMPARATOR_BITS as usize;
    let (_, m) = abs(cs, value, width);
    let ok = cmp(cs, &m.into(), bound, width, CmpMode::Leq);
    cs.enforce_eq(ok.into(), Lc::one());
}

/// Quotient width that admits every `value < p` for modulus `m`.
pub fn quotient_width(m: u64) -> usize {
    let q_max = (FieldElement::modulus() - 1u32) / m;
    bit_length(&q_max).min(MAX_BITS)
}

/// Remainder of `value` modulo the constant `m >= 1`.
///
/// `hint` replaces the honest remainder when a prover claims a different
/// one; the recomposition constraint then fails.
pub fn modulo(cs: &mut Synth, value: &Lc, m: u64, quot_width: usize, hint: Option<FieldElement>) -> Lc {
    assert!(m >= 1, "modulus must be positive");
    if m == 1 {
        return Lc::zero();
    }
    let p = FieldElement::modulus();
    let v = cs.eval(value).to_biguint();
    let mb = BigUint::from(m);
    let r = hint.map(|h| h.to_biguint()).unwrap_or_else(|| &v % &mb);
    let q = if v >= r { (&v - &r) / &mb } else { BigUint::zero() };
    let qt = cs.alloc(FieldElement::from_biguint(&q));
    let rv = cs.alloc(FieldElement::from_biguint(&r));
    let fm = FieldElement::from_u64(m);
    cs.enforce_eq(Lc::from(qt).scale(fm) + Lc::from(rv), value.clone());

    let r_bits = bit_length(&BigUint::from(m - 1));
    range_check(cs, &rv.into(), r_bits);
    range_check(cs, &(Lc::constant(FieldElement::from_u64(m - 1)) - Lc::from(rv)), r_bits);
    range_check(cs, &qt.into(), quot_width);

    // Without this a quotient near 2^quot_width could wrap qt * m + r past p.
    // Values within m of p are then unprovable, which the hash outputs
    // this is used on hit with negligible probability.
    let wraps = (BigUint::one() << quot_width) * &mb > *p;
    if wraps {
        let q_max = (p - &mb) / &mb;
        let slack = Lc::constant(FieldElement::from_biguint(&q_max)) - Lc::from(qt);
        range_check(cs, &slack, quot_width);
    }
    rv.into()
}

/// `table[index]` via one-hot selection.
pub fn lookup(cs: &mut Synth, index: &Lc, table: &[Lc]) -> Lc {
    assert!(!table.is_empty(), "lookup table must be nonempty");
    let idx = cs.eval(index).to_biguint().to_usize();
    let selectors: Vec<Var> = (0..table.len())
        .map(|i| alloc_boolean(cs, idx == Some(i)))
        .collect();
    let one_hot = LinearCombination(selectors.iter().map(|&e| (e, FieldElement::ONE)).collect());
    cs.enforce_eq(one_hot, Lc::one());
    let weighted = LinearCombination(
        selectors
            .iter()
            .enumerate()
            .map(|(i, &e)| (e, FieldElement::from_u64(i as u64)))
            .collect(),
    );
    cs.enforce_eq(weighted, index.clone());
    let mut out = Lc::zero();
    for (&e, entry) in selectors.iter().zip(table) {
        out = out + cs.mul(&e.into(), entry);
    }
    out
}

/// `round(value / divisor)` with ties away from zero, for a positive
/// constant divisor. The witness supplies the quotient `w` and an offset
/// `r` in `[0, divisor]` with `value = w * divisor + r - floor(divisor / 2)`.
/// `w` is range-checked to `out_width` signed bits, which pins it down:
/// any other offset would need a quotient wrapped around the field.
pub fn round_div(cs: &mut Synth, value: &Lc, divisor: u128, out_width: usize) -> Lc {
    assert!(divisor >= 1);
    let dv = BigInt::from(divisor);
    let half = BigInt::from(divisor / 2);
    let signed = cs.eval(value).to_signed();
    let w = div_round_half_away(&signed, &dv);
    let r = &signed + &half - &w * &dv;
    let wv = cs.alloc(FieldElement::from_bigint(&w));
    let rv = cs.alloc(FieldElement::from_bigint(&r));
    let fd = FieldElement::from_u128(divisor);
    cs.enforce_eq(
        Lc::from(wv).scale(fd) + Lc::from(rv) - Lc::constant(FieldElement::from_bigint(&half)),
        value.clone(),
    );
    let width = bit_length(&BigUint::from(divisor));
    range_check(cs, &rv.into(), width);
    range_check(cs, &(Lc::constant(fd) - Lc::from(rv)), width);
    signed_range_check(cs, &wv.into(), out_width);
    wv.into()
}

/// Whether `w` is an admissible output of [`round_div`] for `value`.
pub fn is_valid_rounding(value: &BigInt, divisor: u128, w: &BigInt) -> bool {
    let r = value + BigInt::from(divisor / 2) - w * BigInt::from(divisor);
    r >= BigInt::zero() && r <= BigInt::from(divisor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::r1cs::{cs_verify, Mode};
    use proptest::prelude::*;

    fn fe(v: u64) -> FieldElement {
        FieldElement::from_u64(v)
    }

    /// Runs `f` in witness mode and returns whether it was satisfied.
    fn satisfied(f: impl FnOnce(&mut Synth)) -> bool {
        let mut cs = Synth::new(Mode::Witness);
        f(&mut cs);
        cs.violation().is_none()
    }

    /// Builds shape and witness from the same closure and verifies.
    fn verifies(f: impl Fn(&mut Synth)) -> bool {
        let mut shape = Synth::new(Mode::Shape);
        f(&mut shape);
        let cs = shape.into_constraint_system();
        let mut wit = Synth::new(Mode::Witness);
        f(&mut wit);
        let publics = wit.public_values();
        let (w, _) = wit.into_witness();
        cs_verify(&cs, &w, &publics).unwrap().is_pass()
    }

    #[test]
    fn num2bits_examples() {
        let mut cs = Synth::new(Mode::Witness);
        let v = cs.alloc(fe(5));
        let bits = num2bits(&mut cs, &v.into(), 3);
        let vals: Vec<_> = bits.iter().map(|&b| cs.value(b)).collect();
        assert_eq!(vals, vec![fe(1), fe(0), fe(1)]);
        assert!(cs.violation().is_none());

        assert!(!satisfied(|cs| {
            let v = cs.alloc(fe(8));
            num2bits(cs, &v.into(), 3);
        }));
        assert!(verifies(|cs| {
            let v = cs.alloc_public(fe(5));
            num2bits(cs, &v.into(), 3);
        }));
    }

    #[test]
    fn forged_bits_are_rejected() {
        // A witness claiming bits of 8 mod 8 = 0 must fail recomposition.
        let mut shape = Synth::new(Mode::Shape);
        let v = shape.alloc_public(FieldElement::ZERO);
        num2bits(&mut shape, &v.into(), 3);
        let cs = shape.into_constraint_system();
        let w = crate::circuits::r1cs::Witness {
            assignment: vec![FieldElement::ONE, fe(8), fe(0), fe(0), fe(0)],
        };
        assert!(!cs_verify(&cs, &w, &[fe(8)]).unwrap().is_pass());
    }

    #[test]
    fn cmp_examples() {
        let run = |a: u64, b: u64, mode| {
            let mut cs = Synth::new(Mode::Witness);
            let (x, y) = (cs.alloc(fe(a)), cs.alloc(fe(b)));
            let out = cmp(&mut cs, &x.into(), &y.into(), 8, mode);
            assert!(cs.violation().is_none());
            cs.value(out)
        };
        assert_eq!(run(7, 7, CmpMode::Geq), FieldElement::ONE);
        assert_eq!(run(3, 7, CmpMode::Geq), FieldElement::ZERO);
        assert_eq!(run(3, 7, CmpMode::Leq), FieldElement::ONE);
    }

    #[test]
    fn cmp_is_exhaustively_correct_at_width_8() {
        for a in 0..256u64 {
            for b in 0..256u64 {
                let mut cs = Synth::new(Mode::Witness);
                let (x, y) = (cs.alloc(fe(a)), cs.alloc(fe(b)));
                let geq = cmp(&mut cs, &x.into(), &y.into(), 8, CmpMode::Geq);
                let leq = cmp(&mut cs, &x.into(), &y.into(), 8, CmpMode::Leq);
                assert!(cs.violation().is_none());
                assert_eq!(cs.value(geq) == FieldElement::ONE, a >= b, "{a} >= {b}");
                assert_eq!(cs.value(leq) == FieldElement::ONE, a <= b, "{a} <= {b}");
            }
        }
    }

    #[test]
    fn abs_leq_accepts_and_rejects() {
        for (v, bound, ok) in [(-5i128, 5u64, true), (5, 5, true), (-6, 5, false), (0, 0, true), (6, 5, false)] {
            assert_eq!(
                satisfied(|cs| {
                    let x = cs.alloc(FieldElement::from_i128(v));
                    let b = cs.alloc(fe(bound));
                    abs_leq(cs, &x.into(), &b.into());
                }),
                ok,
                "|{v}| <= {bound}"
            );
        }
    }

    #[test]
    fn abs_rejects_forged_sign() {
        // Claiming s = 0, m = p - 5 for value -5 fails the magnitude range.
        let mut shape = Synth::new(Mode::Shape);
        let v = shape.alloc_public(FieldElement::ZERO);
        abs(&mut shape, &v.into(), 8);
        let cs = shape.into_constraint_system();
        let mut wit = Synth::new(Mode::Witness);
        let v = wit.alloc_public(FieldElement::from_i128(-5));
        abs(&mut wit, &v.into(), 8);
        let (mut w, violation) = wit.into_witness();
        assert!(violation.is_none());
        w.assignment[2] = FieldElement::ZERO;
        w.assignment[3] = FieldElement::from_i128(-5);
        assert!(!cs_verify(&cs, &w, &[FieldElement::from_i128(-5)]).unwrap().is_pass());
    }

    #[test]
    fn modulo_examples() {
        let run = |v: u64, m: u64| {
            let mut cs = Synth::new(Mode::Witness);
            let x = cs.alloc(fe(v));
            let r = modulo(&mut cs, &x.into(), m, quotient_width(m), None);
            assert!(cs.violation().is_none());
            cs.eval(&r)
        };
        assert_eq!(run(10, 3), fe(1));
        assert_eq!(run(6, 3), fe(0));
        for v in 0..1000u64 {
            assert_eq!(run(v, 7), fe(v % 7));
        }
        assert_eq!(run(123, 1), fe(0));
    }

    #[test]
    fn modulo_of_full_field_values() {
        for m in [2u64, 3, 999, 1 << 40] {
            for v in [-FieldElement::from_u128(1 << 100), FieldElement::from_u128(u128::MAX), FieldElement::ZERO] {
                let mut cs = Synth::new(Mode::Witness);
                let x = cs.alloc(v);
                let r = modulo(&mut cs, &x.into(), m, quotient_width(m), None);
                assert!(cs.violation().is_none(), "m = {m}");
                assert_eq!(cs.eval(&r).to_biguint(), v.to_biguint() % m);
            }
        }
    }

    #[test]
    fn modulo_rejects_wrong_remainder() {
        assert!(!satisfied(|cs| {
            let x = cs.alloc(fe(10));
            modulo(cs, &x.into(), 3, quotient_width(3), Some(fe(2 + 1)));
        }));
        // The aliased decomposition v = qt*m + r - p is excluded.
        let m = 999u64;
        let v = fe(5);
        let alias_r = (FieldElement::modulus() + 5u32) % m;
        assert_ne!(alias_r, BigUint::from(5u32));
        assert!(!satisfied(|cs| {
            let x = cs.alloc(v);
            modulo(cs, &x.into(), m, quotient_width(m), Some(FieldElement::from_biguint(&alias_r)));
        }));
    }

    #[test]
    fn lookup_examples() {
        let run = |idx: u64| {
            let mut cs = Synth::new(Mode::Witness);
            let table: Vec<Lc> = [11u64, 22, 33].iter().map(|&t| cs.alloc(fe(t)).into()).collect();
            let i = cs.alloc(fe(idx));
            let out = lookup(&mut cs, &i.into(), &table);
            (cs.eval(&out), cs.violation().is_none())
        };
        assert_eq!(run(0), (fe(11), true));
        assert_eq!(run(2), (fe(33), true));
        assert!(!run(3).1);
    }

    #[test]
    fn round_div_ties_and_signs() {
        for (v, d, want) in [(25i128, 10u128, 3i128), (-25, 10, -3), (24, 10, 2), (-26, 10, -3), (7, 1, 7), (-7, 3, -2)] {
            let mut cs = Synth::new(Mode::Witness);
            let x = cs.alloc(FieldElement::from_i128(v));
            let out = round_div(&mut cs, &x.into(), d, 64);
            assert!(cs.violation().is_none(), "{v}/{d}");
            assert_eq!(cs.eval(&out).to_i128(), Some(want));
            assert!(is_valid_rounding(&BigInt::from(v), d, &BigInt::from(want)));
        }
        // Only the two neighbours of an exact tie are admissible.
        assert!(is_valid_rounding(&BigInt::from(25), 10, &BigInt::from(2)));
        assert!(!is_valid_rounding(&BigInt::from(25), 10, &BigInt::from(4)));
        assert!(!is_valid_rounding(&BigInt::from(24), 10, &BigInt::from(3)));
    }

    proptest! {
        #[test]
        fn num2bits_accepts_random_126_bit_values(v in any::<u128>()) {
            let v = v >> 2;
            let ok = satisfied(|cs| {
                let x = cs.alloc(FieldElement::from_u128(v));
                num2bits(cs, &x.into(), 126);
            });
            prop_assert!(ok);
        }

        #[test]
        fn lookup_matches_array(table in proptest::collection::vec(any::<u64>(), 1..20), pick in any::<usize>()) {
            let idx = pick % table.len();
            let mut cs = Synth::new(Mode::Witness);
            let vars: Vec<Lc> = table.iter().map(|&t| cs.alloc(fe(t)).into()).collect();
            let i = cs.alloc(fe(idx as u64));
            let out = lookup(&mut cs, &i.into(), &vars);
            prop_assert!(cs.violation().is_none());
            prop_assert_eq!(cs.eval(&out), fe(table[idx]));
        }

        #[test]
        fn round_div_matches_codec(v in any::<i64>(), d in 1u128..1_000_000) {
            let mut cs = Synth::new(Mode::Witness);
            let x = cs.alloc(FieldElement::from_i128(v as i128));
            let out = round_div(&mut cs, &x.into(), d, 64);
            prop_assert!(cs.violation().is_none());
            prop_assert_eq!(
                cs.eval(&out).to_i128(),
                Some(crate::field::div_round_half_away_i128(v as i128, d as i128))
            );
        }
    }
}
