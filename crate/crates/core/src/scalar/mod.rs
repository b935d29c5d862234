//! Scalar back ends for weights and evaluation: binary64, a fixed-limb binary
//! float, and exact rationals.

mod bigfloat;

pub use bigfloat::{BigFloat, MAX_LIMBS};

use std::fmt::{self, Debug};
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Arithmetic used for weights and forward passes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScalarKind {
    F64,
    /// Mantissa width in bits; rounded up to a whole number of 64-bit limbs.
    BigFloat { bits: u32 },
    Rational,
}

impl ScalarKind {
    pub fn bigfloat(bits: u32) -> Self {
        ScalarKind::BigFloat { bits }
    }

    /// Limb count for bigfloat kinds (1 for the others, unused).
    pub fn limbs(self) -> usize {
        match self {
            ScalarKind::BigFloat { bits } => (bits as usize).div_ceil(64).max(1),
            _ => 1,
        }
    }

    pub fn validate(self) -> Result<Self> {
        if let ScalarKind::BigFloat { bits } = self {
            if bits < 64 || bits as usize > 64 * MAX_LIMBS {
                return Err(Error::InvalidArgument(format!(
                    "bigfloat mantissa bits must lie in [64, {}], got {bits}",
                    64 * MAX_LIMBS
                )));
            }
        }
        Ok(self)
    }
}

impl fmt::Display for ScalarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarKind::F64 => write!(f, "f64"),
            ScalarKind::BigFloat { bits } => write!(f, "bigfloat:{bits}"),
            ScalarKind::Rational => write!(f, "rational"),
        }
    }
}

impl FromStr for ScalarKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "f64" | "binary64" => Ok(ScalarKind::F64),
            "rational" => Ok(ScalarKind::Rational),
            "bigfloat" => Ok(ScalarKind::BigFloat { bits: 256 }),
            other => {
                let bits = other
                    .strip_prefix("bigfloat:")
                    .and_then(|b| b.parse::<u32>().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown scalar kind {other:?}")))?;
                ScalarKind::BigFloat { bits }.validate()
            }
        }
    }
}

/// Real-number operations needed by the network evaluator and constructions.
pub trait Real:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn from_rational(q: &BigRational, kind: ScalarKind) -> Self;
    /// Exact (rational, bigfloat) or identical (f64) conversion of a binary64 value.
    fn from_f64(v: f64, kind: ScalarKind) -> Result<Self>;
    fn to_rational(&self) -> Result<BigRational>;
    fn to_f64(&self) -> f64;
    fn is_zero(&self) -> bool;
    fn is_finite(&self) -> bool {
        true
    }
    fn relu(&self) -> Self;
    fn abs(&self) -> Self;
    /// `self += a * b`.
    fn mul_acc(&mut self, a: &Self, b: &Self);
    /// `2^(k/l)`; exact kinds reject irrational values.
    fn pow2_frac(k: i64, l: u32, kind: ScalarKind) -> Result<Self>;
    fn to_text(&self) -> String;
    fn parse_text(s: &str, kind: ScalarKind) -> Result<Self>;
    fn kind(&self) -> ScalarKind;
}

impl Real for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_rational(q: &BigRational, _kind: ScalarKind) -> Self {
        ToPrimitive::to_f64(q).unwrap_or(f64::NAN)
    }
    fn from_f64(v: f64, _kind: ScalarKind) -> Result<Self> {
        Ok(v)
    }
    fn to_rational(&self) -> Result<BigRational> {
        BigRational::from_float(*self).ok_or_else(|| Error::NonFinite(format!("{self}")))
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    #[inline]
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    #[inline]
    fn relu(&self) -> Self {
        self.max(0.0)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    #[inline]
    fn mul_acc(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    fn pow2_frac(k: i64, l: u32, _kind: ScalarKind) -> Result<Self> {
        Ok(2f64.powf(k as f64 / l as f64))
    }
    fn to_text(&self) -> String {
        // Debug formatting is the shortest string that parses back to the same bits.
        format!("{self:?}")
    }
    fn parse_text(s: &str, _kind: ScalarKind) -> Result<Self> {
        let v: f64 = s.trim().parse().map_err(|_| Error::ScalarParse(s.to_string()))?;
        if !v.is_finite() {
            return Err(Error::ScalarParse(s.to_string()));
        }
        Ok(v)
    }
    fn kind(&self) -> ScalarKind {
        ScalarKind::F64
    }
}

impl Real for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn from_rational(q: &BigRational, _kind: ScalarKind) -> Self {
        q.clone()
    }
    fn from_f64(v: f64, _kind: ScalarKind) -> Result<Self> {
        BigRational::from_float(v).ok_or_else(|| Error::NonFinite(format!("{v}")))
    }
    fn to_rational(&self) -> Result<BigRational> {
        Ok(self.clone())
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    #[inline]
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn relu(&self) -> Self {
        if self.is_negative() {
            Zero::zero()
        } else {
            self.clone()
        }
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn mul_acc(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    fn pow2_frac(k: i64, l: u32, _kind: ScalarKind) -> Result<Self> {
        if l == 0 || k % l as i64 != 0 {
            return Err(Error::Precondition(format!(
                "2^({k}/{l}) is irrational; use a bigfloat scalar kind"
            )));
        }
        Ok(pow2(k / l as i64))
    }
    fn to_text(&self) -> String {
        format!("{}/{}", self.numer(), self.denom())
    }
    fn parse_text(s: &str, _kind: ScalarKind) -> Result<Self> {
        parse_rational(s).ok_or_else(|| Error::ScalarParse(s.to_string()))
    }
    fn kind(&self) -> ScalarKind {
        ScalarKind::Rational
    }
}

impl Real for BigFloat {
    fn zero() -> Self {
        BigFloat::zero(1)
    }
    fn one() -> Self {
        BigFloat::from_u64(1, 1)
    }
    fn from_i64(v: i64) -> Self {
        BigFloat::from_i64(v, 1)
    }
    fn from_rational(q: &BigRational, kind: ScalarKind) -> Self {
        BigFloat::from_rational(q, kind.limbs())
    }
    fn from_f64(v: f64, kind: ScalarKind) -> Result<Self> {
        BigFloat::from_f64(v, kind.limbs()).ok_or_else(|| Error::NonFinite(format!("{v}")))
    }
    fn to_rational(&self) -> Result<BigRational> {
        Ok(BigFloat::to_rational(self))
    }
    fn to_f64(&self) -> f64 {
        BigFloat::to_f64(self)
    }
    #[inline]
    fn is_zero(&self) -> bool {
        BigFloat::is_zero(self)
    }
    #[inline]
    fn relu(&self) -> Self {
        if self.is_negative() {
            BigFloat::zero(self.limbs())
        } else {
            *self
        }
    }
    fn abs(&self) -> Self {
        if self.is_negative() {
            -*self
        } else {
            *self
        }
    }
    #[inline]
    fn mul_acc(&mut self, a: &Self, b: &Self) {
        *self = *self + *a * *b;
    }
    fn pow2_frac(k: i64, l: u32, kind: ScalarKind) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidArgument("zero root index".into()));
        }
        Ok(BigFloat::pow2_frac(k, l, kind.limbs()))
    }
    fn to_text(&self) -> String {
        self.to_hex_string()
    }
    fn parse_text(s: &str, kind: ScalarKind) -> Result<Self> {
        BigFloat::parse_hex(s, kind.limbs())
            .or_else(|| parse_rational(s).map(|q| BigFloat::from_rational(&q, kind.limbs())))
            .ok_or_else(|| Error::ScalarParse(s.to_string()))
    }
    fn kind(&self) -> ScalarKind {
        ScalarKind::BigFloat {
            bits: self.precision_bits(),
        }
    }
}

/// `2^k` as an exact rational.
pub fn pow2(k: i64) -> BigRational {
    if k >= 0 {
        BigRational::from_integer(BigInt::one() << k as u64)
    } else {
        BigRational::new(BigInt::one(), BigInt::one() << (-k) as u64)
    }
}

/// `3^k` as an exact rational.
pub fn pow3(k: i64) -> BigRational {
    let p = num_traits::pow(BigInt::from(3), k.unsigned_abs() as usize);
    if k >= 0 {
        BigRational::from_integer(p)
    } else {
        BigRational::new(BigInt::one(), p)
    }
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Parses `p/q`, an integer, or a decimal literal (exactly).
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let t = s.trim();
    if let Some((p, q)) = t.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(BigRational::new(p, q));
    }
    if let Ok(i) = t.parse::<BigInt>() {
        return Some(BigRational::from_integer(i));
    }
    let v: f64 = t.parse().ok()?;
    BigRational::from_float(v)
}
