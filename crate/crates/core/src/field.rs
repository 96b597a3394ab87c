//! Prime-field elements and the sign/magnitude fixed-point codec.
//!
//! Real-valued protocol data (features, targets, approximate inverses,
//! weights, noise) enters the constraint systems as integers: each value is
//! rounded to `d` decimals, scaled by `10^d` and split into a sign bit and a
//! non-negative magnitude. Inside constraints a signed value is embedded in
//! the field as `mag` or `p - mag`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use ark_bn254::Fr;
use ark_ff::{AdditiveGroup, BigInteger, Field, PrimeField, Zero};
use num_bigint::{BigInt, BigUint, Sign};
use std::sync::LazyLock;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Decimal form of the protocol prime (the BN254 scalar field).
pub const PROTOCOL_PRIME: &str =
    "21888242871839275222246405745257275088548364400416034343698204186575808495617";

/// Magnitudes entering comparators must stay below `2^COMPARATOR_BITS`.
pub const COMPARATOR_BITS: u32 = 126;

static MODULUS: LazyLock<BigUint> = LazyLock::new(|| Fr::MODULUS.into());
static HALF_MODULUS: LazyLock<BigUint> = LazyLock::new(|| &*MODULUS >> 1);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("value {value} is not finite")]
    NotFinite { value: f64 },
    #[error("|{value}| * 10^{scale} does not fit below 2^{bits}")]
    EncodingOverflow { value: f64, scale: u32, bits: u32 },
    #[error("dimension mismatch: {left_rows}x{left_cols} times {right_rows}x{right_cols}")]
    DimensionMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("matrix entries overflow the 128-bit magnitude range")]
    MagnitudeOverflow,
    #[error("matrix shape {rows}x{cols} does not match {len} entries")]
    BadShape { rows: usize, cols: usize, len: usize },
    #[error("field element {0} is not a small signed value")]
    NotSmall(String),
    #[error("invalid field element literal {0:?}")]
    BadLiteral(String),
}

/// An element of the protocol prime field.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct FieldElement(Fr);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(Fr::ZERO);
    pub const ONE: FieldElement = FieldElement(Fr::ONE);

    pub fn zero() -> Self {
        Self::ZERO
    }

    pub fn one() -> Self {
        Self::ONE
    }

    pub fn from_u64(v: u64) -> Self {
        FieldElement(Fr::from(v))
    }

    pub fn from_u128(v: u128) -> Self {
        FieldElement(Fr::from(v))
    }

    /// Signed embedding: negative values map to `p - |v|`.
    pub fn from_i128(v: i128) -> Self {
        let mag = FieldElement(Fr::from(v.unsigned_abs()));
        if v < 0 {
            -mag
        } else {
            mag
        }
    }

    /// Reduces an arbitrary natural number modulo `p`.
    pub fn from_biguint(v: &BigUint) -> Self {
        FieldElement(Fr::from_le_bytes_mod_order(&v.to_bytes_le()))
    }

    /// Reduces a signed integer modulo `p`.
    pub fn from_bigint(v: &BigInt) -> Self {
        let mag = Self::from_biguint(v.magnitude());
        if v.sign() == Sign::Minus {
            -mag
        } else {
            mag
        }
    }

    pub fn to_biguint(&self) -> BigUint {
        self.0.into_bigint().into()
    }

    /// Interprets the element as a signed integer in `(-p/2, p/2]`.
    pub fn to_signed(&self) -> BigInt {
        let v = self.to_biguint();
        if v > *HALF_MODULUS {
            -BigInt::from(&*MODULUS - v)
        } else {
            BigInt::from(v)
        }
    }

    /// Signed value when it fits in an `i128`.
    pub fn to_i128(&self) -> Option<i128> {
        i128::try_from(self.to_signed()).ok()
    }

    pub fn bit(&self, i: usize) -> bool {
        i < 256 && self.0.into_bigint().get_bit(i)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn pow(&self, exp: u64) -> Self {
        FieldElement(self.0.pow([exp]))
    }

    pub fn modulus() -> &'static BigUint {
        &MODULUS
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fe({})", self.0)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // `Fr` prints its canonical integer in decimal; zero prints as "0".
        if self.0.is_zero() {
            f.write_str("0")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for FieldElement {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v = BigUint::from_str(s).map_err(|_| CodecError::BadLiteral(s.to_string()))?;
        if v >= *MODULUS {
            return Err(CodecError::BadLiteral(s.to_string()));
        }
        Ok(Self::from_biguint(&v))
    }
}

impl Serialize for FieldElement {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FieldElement {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl From<u64> for FieldElement {
    fn from(v: u64) -> Self {
        Self::from_u64(v)
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $assign_trait:ident, $assign_method:ident, $op:tt) => {
        impl $trait for FieldElement {
            type Output = FieldElement;
            #[inline]
            fn $method(self, rhs: FieldElement) -> FieldElement {
                FieldElement(self.0 $op rhs.0)
            }
        }
        impl<'a> $trait<&'a FieldElement> for FieldElement {
            type Output = FieldElement;
            #[inline]
            fn $method(self, rhs: &'a FieldElement) -> FieldElement {
                FieldElement(self.0 $op rhs.0)
            }
        }
        impl $assign_trait for FieldElement {
            #[inline]
            fn $assign_method(&mut self, rhs: FieldElement) {
                self.0 = self.0 $op rhs.0;
            }
        }
    };
}

impl_binop!(Add, add, AddAssign, add_assign, +);
impl_binop!(Sub, sub, SubAssign, sub_assign, -);
impl_binop!(Mul, mul, MulAssign, mul_assign, *);

impl Neg for FieldElement {
    type Output = FieldElement;
    #[inline]
    fn neg(self) -> FieldElement {
        FieldElement(-self.0)
    }
}

impl std::iter::Sum for FieldElement {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |acc, x| acc + x)
    }
}

/// A signed fixed-point magnitude: `(-1)^negative * mag`.
///
/// Zero is always stored with `negative == false`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct SignMag {
    negative: bool,
    mag: u128,
}

impl SignMag {
    pub const ZERO: SignMag = SignMag {
        negative: false,
        mag: 0,
    };

    pub fn new(negative: bool, mag: u128) -> Self {
        SignMag {
            negative: negative && mag != 0,
            mag,
        }
    }

    pub fn from_i128(v: i128) -> Self {
        SignMag::new(v < 0, v.unsigned_abs())
    }

    /// Sign bit as used in the circuits: 0 for non-negative, 1 for negative.
    pub fn sign(&self) -> u8 {
        self.negative as u8
    }

    pub fn is_negative(&self) -> bool {
        self.negative
    }

    pub fn mag(&self) -> u128 {
        self.mag
    }

    /// Signed value; `None` when the magnitude exceeds `i128::MAX`.
    pub fn to_i128(&self) -> Option<i128> {
        let m = i128::try_from(self.mag).ok()?;
        Some(if self.negative { -m } else { m })
    }

    pub fn to_bigint(&self) -> BigInt {
        let m = BigInt::from(self.mag);
        if self.negative {
            -m
        } else {
            m
        }
    }

    pub fn try_from_bigint(v: &BigInt) -> Result<Self, CodecError> {
        let mag = u128::try_from(v.magnitude()).map_err(|_| CodecError::MagnitudeOverflow)?;
        Ok(SignMag::new(v.sign() == Sign::Minus, mag))
    }

    pub fn negate(&self) -> Self {
        SignMag::new(!self.negative, self.mag)
    }

    pub fn checked_add(&self, other: &SignMag) -> Option<SignMag> {
        let sum = self.to_i128()?.checked_add(other.to_i128()?)?;
        Some(SignMag::from_i128(sum))
    }
}

impl Serialize for SignMag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        (self.sign(), self.mag).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SignMag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let (sign, mag) = <(u8, u128)>::deserialize(deserializer)?;
        if sign > 1 {
            return Err(serde::de::Error::custom("sign must be 0 or 1"));
        }
        Ok(SignMag::new(sign == 1, mag))
    }
}

/// Rounds `x` to `d` decimals (half away from zero) and scales by `10^d`.
///
/// Rounding operates on the shortest decimal representation of `x`, so a
/// literal such as `-1.255` rounds as written rather than as its nearest
/// binary approximation.
pub fn fp_encode(x: f64, d: u32) -> Result<SignMag, CodecError> {
    if !x.is_finite() {
        return Err(CodecError::NotFinite { value: x });
    }
    if x == 0.0 {
        return Ok(SignMag::ZERO);
    }
    let overflow = || CodecError::EncodingOverflow {
        value: x,
        scale: d,
        bits: COMPARATOR_BITS,
    };
    // "{:e}" yields the shortest round-trip digits, e.g. "1.255e0".
    let repr = format!("{:e}", x.abs());
    let (mantissa, exp) = repr.split_once('e').expect("exponent form");
    let exp: i64 = exp.parse().expect("integer exponent");
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits: Vec<u8> = int_part
        .bytes()
        .chain(frac_part.bytes())
        .map(|b| b - b'0')
        .collect();
    // value = 0.digits * 10^point, so the scaled integer part holds `point + d` digits.
    let point = int_part.len() as i64 + exp;
    let keep = point + d as i64;
    let mut mag: u128 = 0;
    if keep > 0 {
        for i in 0..keep as usize {
            let digit = digits.get(i).copied().unwrap_or(0) as u128;
            mag = mag
                .checked_mul(10)
                .and_then(|m| m.checked_add(digit))
                .ok_or_else(overflow)?;
        }
    }
    let next = if keep >= 0 {
        digits.get(keep as usize).copied().unwrap_or(0)
    } else {
        0
    };
    if next >= 5 {
        mag = mag.checked_add(1).ok_or_else(overflow)?;
    }
    if mag >= 1u128 << COMPARATOR_BITS {
        return Err(overflow());
    }
    Ok(SignMag::new(x < 0.0, mag))
}

/// Inverse of [`fp_encode`]: `(-1)^sign * mag * 10^-d`.
pub fn fp_decode(v: SignMag, d: u32) -> f64 {
    let magnitude = if v.mag < (1u128 << 53) && d <= 22 {
        v.mag as f64 / 10f64.powi(d as i32)
    } else {
        format!("{}e-{}", v.mag, d).parse().expect("decimal literal")
    };
    if v.negative {
        -magnitude
    } else {
        magnitude
    }
}

/// Embeds a signed magnitude into the field (`p - mag` for negatives).
///
/// Magnitudes are at most 128 bits, so every value lies below `p`.
pub fn field_embed(v: SignMag) -> FieldElement {
    let mag = FieldElement::from_u128(v.mag);
    if v.negative {
        -mag
    } else {
        mag
    }
}

/// Reads a sign-embedded field element back; fails for values whose
/// signed magnitude does not fit in 128 bits.
pub fn field_unembed(fe: FieldElement) -> Result<SignMag, CodecError> {
    SignMag::try_from_bigint(&fe.to_signed()).map_err(|_| CodecError::NotSmall(fe.to_string()))
}

/// `10^e` as an integer.
pub fn pow10(e: u32) -> u128 {
    10u128.pow(e)
}

/// Integer division rounding half away from zero. `den` must be positive.
pub fn div_round_half_away(num: &BigInt, den: &BigInt) -> BigInt {
    debug_assert!(den.sign() == Sign::Plus);
    let twice: BigInt = num * 2;
    let q = (twice.magnitude() + den.magnitude()) / (den.magnitude() * 2u32);
    let q = BigInt::from(q);
    if num.sign() == Sign::Minus {
        -q
    } else {
        q
    }
}

/// [`div_round_half_away`] on `i128`.
pub fn div_round_half_away_i128(num: i128, den: i128) -> i128 {
    debug_assert!(den > 0);
    let q = (2 * num.unsigned_abs() + den.unsigned_abs()) / (2 * den.unsigned_abs());
    if num < 0 {
        -(q as i128)
    } else {
        q as i128
    }
}

/// A dense matrix of fixed-point entries sharing one decimal scale.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaledMatrix {
    rows: usize,
    cols: usize,
    /// Row-major.
    entries: Vec<SignMag>,
    scale: u32,
}

impl ScaledMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<SignMag>, scale: u32) -> Result<Self, CodecError> {
        if entries.len() != rows * cols {
            return Err(CodecError::BadShape {
                rows,
                cols,
                len: entries.len(),
            });
        }
        Ok(ScaledMatrix {
            rows,
            cols,
            entries,
            scale,
        })
    }

    pub fn zeros(rows: usize, cols: usize, scale: u32) -> Self {
        ScaledMatrix {
            rows,
            cols,
            entries: vec![SignMag::ZERO; rows * cols],
            scale,
        }
    }

    /// `10^scale` on the diagonal, i.e. the real identity matrix.
    pub fn identity(size: usize, scale: u32) -> Self {
        let mut m = Self::zeros(size, size, scale);
        for i in 0..size {
            m.entries[i * size + i] = SignMag::new(false, pow10(scale));
        }
        m
    }

    pub fn from_i128(rows: usize, cols: usize, values: &[i128], scale: u32) -> Result<Self, CodecError> {
        Self::new(
            rows,
            cols,
            values.iter().map(|&v| SignMag::from_i128(v)).collect(),
            scale,
        )
    }

    /// Encodes a row-major real matrix at `scale` decimals.
    pub fn encode(rows: usize, cols: usize, values: &[f64], scale: u32) -> Result<Self, CodecError> {
        let entries = values
            .iter()
            .map(|&x| fp_encode(x, scale))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(rows, cols, entries, scale)
    }

    pub fn column_vector(values: Vec<SignMag>, scale: u32) -> Self {
        ScaledMatrix {
            rows: values.len(),
            cols: 1,
            entries: values,
            scale,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn entries(&self) -> &[SignMag] {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> SignMag {
        self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: SignMag) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn column(&self, c: usize) -> Vec<SignMag> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// Row-major real values.
    pub fn decode(&self) -> Vec<f64> {
        self.entries.iter().map(|&v| fp_decode(v, self.scale)).collect()
    }

    /// Signed integer entries (row-major); every codec-produced magnitude fits.
    pub fn to_i128(&self) -> Vec<i128> {
        self.entries
            .iter()
            .map(|v| v.to_i128().expect("magnitude below 2^127"))
            .collect()
    }
}

/// Exact product of two fixed-point matrices; the result scale is the sum
/// of the operand scales and no rounding takes place.
pub fn scaled_matmul(a: &ScaledMatrix, b: &ScaledMatrix) -> Result<ScaledMatrix, CodecError> {
    if a.cols != b.rows {
        return Err(CodecError::DimensionMismatch {
            left_rows: a.rows,
            left_cols: a.cols,
            right_rows: b.rows,
            right_cols: b.cols,
        });
    }
    let lhs = a
        .entries
        .iter()
        .map(|v| v.to_i128().ok_or(CodecError::MagnitudeOverflow))
        .collect::<Result<Vec<_>, _>>()?;
    let rhs = b
        .entries
        .iter()
        .map(|v| v.to_i128().ok_or(CodecError::MagnitudeOverflow))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::with_capacity(a.rows * b.cols);
    for r in 0..a.rows {
        for c in 0..b.cols {
            let mut acc: i128 = 0;
            for t in 0..a.cols {
                let prod = lhs[r * a.cols + t]
                    .checked_mul(rhs[t * b.cols + c])
                    .ok_or(CodecError::MagnitudeOverflow)?;
                acc = acc.checked_add(prod).ok_or(CodecError::MagnitudeOverflow)?;
            }
            out.push(SignMag::from_i128(acc));
        }
    }
    Ok(ScaledMatrix {
        rows: a.rows,
        cols: b.cols,
        entries: out,
        scale: a.scale + b.scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn modulus_matches_protocol_prime() {
        assert_eq!(FieldElement::modulus().to_string(), PROTOCOL_PRIME);
    }

    #[test]
    fn encode_examples() {
        assert_eq!(fp_encode(2.5347725, 5).unwrap(), SignMag::new(false, 253477));
        assert_eq!(fp_encode(0.0, 7).unwrap(), SignMag::ZERO);
        assert_eq!(fp_encode(-0.0, 7).unwrap(), SignMag::ZERO);
        assert_eq!(fp_encode(-1.255, 2).unwrap(), SignMag::new(true, 126));
        assert_eq!(fp_encode(0.004, 2).unwrap(), SignMag::ZERO);
        assert_eq!(fp_encode(0.005, 2).unwrap(), SignMag::new(false, 1));
        assert_eq!(fp_encode(1e-9, 3).unwrap(), SignMag::ZERO);
        assert_eq!(fp_encode(123.0, 0).unwrap(), SignMag::new(false, 123));
    }

    #[test]
    fn encode_rejects_overflow_and_nan() {
        assert!(matches!(
            fp_encode(1e30, 10),
            Err(CodecError::EncodingOverflow { .. })
        ));
        assert!(matches!(fp_encode(f64::NAN, 2), Err(CodecError::NotFinite { .. })));
        // 2^126 - 1 still fits, 2^126 does not.
        assert!(fp_encode(2f64.powi(126), 0).is_err());
        assert!(fp_encode(2f64.powi(125), 0).is_ok());
    }

    #[test]
    fn decode_examples() {
        assert_eq!(fp_decode(SignMag::new(false, 253477), 5), 2.53477);
        assert_eq!(fp_decode(SignMag::new(true, 126), 2), -1.26);
        assert_eq!(fp_decode(SignMag::ZERO, 9), 0.0);
    }

    #[test]
    fn canonical_zero() {
        assert_eq!(SignMag::new(true, 0), SignMag::ZERO);
        assert_eq!(SignMag::new(true, 0).sign(), 0);
    }

    #[test]
    fn embed_examples() {
        assert_eq!(field_embed(SignMag::new(false, 7)), FieldElement::from_u64(7));
        let p = FieldElement::modulus();
        assert_eq!(
            field_embed(SignMag::new(true, 7)).to_biguint(),
            p - BigUint::from(7u32)
        );
        assert_eq!(field_embed(SignMag::ZERO), FieldElement::ZERO);
        assert_eq!(
            field_unembed(field_embed(SignMag::new(true, 42))).unwrap(),
            SignMag::new(true, 42)
        );
    }

    #[test]
    fn field_element_serde_is_decimal() {
        let fe = FieldElement::from_i128(-1);
        let json = serde_json::to_string(&fe).unwrap();
        assert_eq!(json, format!("\"{}\"", FieldElement::modulus() - 1u32));
        let back: FieldElement = serde_json::from_str(&json).unwrap();
        assert_eq!(back, fe);
        assert_eq!(FieldElement::ZERO.to_string(), "0");
        assert!(PROTOCOL_PRIME.parse::<FieldElement>().is_err());
    }

    #[test]
    fn signmag_serializes_as_pair() {
        let json = serde_json::to_string(&SignMag::new(true, 6931)).unwrap();
        assert_eq!(json, "[1,6931]");
    }

    #[test]
    fn matmul_examples() {
        let m = ScaledMatrix::from_i128(2, 2, &[3, -4, 5, 6], 0).unwrap();
        let id = ScaledMatrix::identity(2, 0);
        assert_eq!(scaled_matmul(&id, &m).unwrap(), m);

        let a = ScaledMatrix::from_i128(1, 1, &[2], 1).unwrap();
        let b = ScaledMatrix::from_i128(1, 1, &[-3], 1).unwrap();
        let prod = scaled_matmul(&a, &b).unwrap();
        assert_eq!(prod.scale(), 2);
        assert_eq!(prod.get(0, 0), SignMag::new(true, 6));
        assert!((prod.decode()[0] + 0.06).abs() < 1e-15);

        let bad = ScaledMatrix::zeros(3, 1, 0);
        assert!(matches!(
            scaled_matmul(&m, &bad),
            Err(CodecError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn matmul_overflow_is_reported() {
        let big = ScaledMatrix::from_i128(1, 1, &[1i128 << 100], 0).unwrap();
        assert_eq!(
            scaled_matmul(&big, &big),
            Err(CodecError::MagnitudeOverflow)
        );
    }

    #[test]
    fn rounding_division() {
        let r = |n: i64, d: i64| div_round_half_away(&BigInt::from(n), &BigInt::from(d));
        assert_eq!(r(25, 10), BigInt::from(3));
        assert_eq!(r(-25, 10), BigInt::from(-3));
        assert_eq!(r(24, 10), BigInt::from(2));
        assert_eq!(r(-26, 10), BigInt::from(-3));
        assert_eq!(r(7, 3), BigInt::from(2));
        for n in -50i128..50 {
            for d in 1i128..12 {
                assert_eq!(
                    BigInt::from(div_round_half_away_i128(n, d)),
                    div_round_half_away(&BigInt::from(n), &BigInt::from(d)),
                    "{n}/{d}"
                );
            }
        }
    }

    fn bigint_matmul(a: &[i64], b: &[i64], r: usize, inner: usize, c: usize) -> Vec<BigInt> {
        let mut out = vec![BigInt::from(0); r * c];
        for i in 0..r {
            for j in 0..c {
                for t in 0..inner {
                    out[i * c + j] += BigInt::from(a[i * inner + t]) * BigInt::from(b[t * c + j]);
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn encode_decode_error_is_half_ulp(x in -1e9f64..1e9, d in 0u32..8) {
            let v = fp_encode(x, d).unwrap();
            let back = fp_decode(v, d);
            let tol = 0.5 * 10f64.powi(-(d as i32)) * (1.0 + 1e-9) + 4.0 * f64::EPSILON * x.abs();
            prop_assert!((back - x).abs() <= tol, "x={x} d={d} back={back}");
        }

        #[test]
        fn decode_then_encode_is_identity(mag in 0u128..1_000_000_000_000_000, neg: bool, d in 0u32..10) {
            let v = SignMag::new(neg, mag);
            prop_assert_eq!(fp_encode(fp_decode(v, d), d).unwrap(), v);
        }

        #[test]
        fn embed_is_injective_on_small_values(a in any::<i64>(), b in any::<i64>()) {
            let ea = field_embed(SignMag::from_i128(a as i128));
            let eb = field_embed(SignMag::from_i128(b as i128));
            prop_assert_eq!(ea == eb, a == b);
        }

        #[test]
        fn matmul_matches_bigint_oracle(
            a in proptest::collection::vec(-(1i64 << 40)..(1i64 << 40), 9),
            b in proptest::collection::vec(-(1i64 << 40)..(1i64 << 40), 9),
            sa in 0u32..6, sb in 0u32..6,
        ) {
            let ma = ScaledMatrix::from_i128(3, 3, &a.iter().map(|&v| v as i128).collect::<Vec<_>>(), sa).unwrap();
            let mb = ScaledMatrix::from_i128(3, 3, &b.iter().map(|&v| v as i128).collect::<Vec<_>>(), sb).unwrap();
            let prod = scaled_matmul(&ma, &mb).unwrap();
            prop_assert_eq!(prod.scale(), sa + sb);
            let oracle = bigint_matmul(&a, &b, 3, 3, 3);
            for (got, want) in prod.entries().iter().zip(oracle) {
                prop_assert_eq!(got.to_bigint(), want);
            }
        }

        #[test]
        fn field_ops_match_bigint(a in any::<u128>(), b in any::<u128>()) {
            let p = FieldElement::modulus();
            let fa = FieldElement::from_u128(a);
            let fb = FieldElement::from_u128(b);
            prop_assert_eq!((fa * fb).to_biguint(), (BigUint::from(a) * BigUint::from(b)) % p);
            prop_assert_eq!((fa + fb).to_biguint(), (BigUint::from(a) + BigUint::from(b)) % p);
            prop_assert_eq!((fa - fb).to_biguint(), (BigUint::from(a) + p - BigUint::from(b)) % p);
        }
    }
}
