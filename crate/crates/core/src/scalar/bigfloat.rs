//! Fixed-capacity binary floating point with a configurable number of 64-bit
//! mantissa limbs.
//!
//! A nonzero value is `(-1)^neg * M * 2^exp` where `M` is an integer of exactly
//! `64 * limbs` bits with its top bit set. All arithmetic rounds to nearest
//! (ties away from zero). Operands of different precision are combined at the
//! larger one.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub const MAX_LIMBS: usize = 16;

#[derive(Clone, Copy)]
pub struct BigFloat {
    neg: bool,
    exp: i64,
    limbs: u8,
    mant: [u64; MAX_LIMBS],
}

/// Returns 64 bits of `buf` starting at bit `pos` (negative positions read zeros).
#[inline]
fn bits_at(buf: &[u64], pos: i64) -> u64 {
    let idx = pos.div_euclid(64);
    let off = pos.rem_euclid(64) as u32;
    let get = |i: i64| -> u64 {
        if i < 0 || i >= buf.len() as i64 {
            0
        } else {
            buf[i as usize]
        }
    };
    if off == 0 {
        get(idx)
    } else {
        (get(idx) >> off) | (get(idx + 1) << (64 - off))
    }
}

#[inline]
fn top_bit(buf: &[u64]) -> Option<i64> {
    for i in (0..buf.len()).rev() {
        if buf[i] != 0 {
            return Some(i as i64 * 64 + 63 - buf[i].leading_zeros() as i64);
        }
    }
    None
}

/// True if any bit of `buf` strictly below position `pos` is set.
fn any_below(buf: &[u64], pos: i64) -> bool {
    if pos <= 0 {
        return false;
    }
    let full = (pos / 64) as usize;
    let rem = (pos % 64) as u32;
    for &w in buf.iter().take(full.min(buf.len())) {
        if w != 0 {
            return true;
        }
    }
    if rem > 0 && full < buf.len() {
        let mask = (1u64 << rem) - 1;
        if buf[full] & mask != 0 {
            return true;
        }
    }
    false
}

fn check_limbs(n: usize) -> usize {
    assert!(
        (1..=MAX_LIMBS).contains(&n),
        "bigfloat precision must be between 64 and {} bits",
        MAX_LIMBS * 64
    );
    n
}

impl BigFloat {
    pub fn zero(limbs: usize) -> Self {
        BigFloat {
            neg: false,
            exp: 0,
            limbs: check_limbs(limbs) as u8,
            mant: [0; MAX_LIMBS],
        }
    }

    pub fn limbs(&self) -> usize {
        self.limbs as usize
    }

    pub fn precision_bits(&self) -> u32 {
        self.limbs as u32 * 64
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.mant[self.limbs as usize - 1] == 0
    }

    pub fn is_negative(&self) -> bool {
        self.neg && !self.is_zero()
    }

    /// Rounds the integer `buf * 2^e` into an `n`-limb value.
    fn round_from(buf: &[u64], e: i64, neg: bool, n: usize) -> Self {
        let mut out = BigFloat::zero(n);
        let p = match top_bit(buf) {
            None => return out,
            Some(p) => p,
        };
        let width = 64 * n as i64;
        let shift = p - (width - 1);
        for i in 0..n {
            out.mant[i] = bits_at(buf, shift + 64 * i as i64);
        }
        let mut exp = e + shift;
        if shift >= 1 {
            let round = bits_at(buf, shift - 1) & 1 == 1;
            if round {
                let mut carry = true;
                for limb in out.mant.iter_mut().take(n) {
                    if !carry {
                        break;
                    }
                    let (v, c) = limb.overflowing_add(1);
                    *limb = v;
                    carry = c;
                }
                if carry {
                    out.mant[n - 1] = 1u64 << 63;
                    exp += 1;
                }
            }
        }
        out.neg = neg;
        out.exp = exp;
        out
    }

    /// Same value at a new precision (exact when widening).
    pub fn with_limbs(&self, n: usize) -> Self {
        let n = check_limbs(n);
        let cur = self.limbs as usize;
        if n == cur {
            return *self;
        }
        if self.is_zero() {
            return BigFloat::zero(n);
        }
        if n > cur {
            let k = n - cur;
            let mut out = BigFloat::zero(n);
            out.mant[k..(cur + k)].copy_from_slice(&self.mant[..cur]);
            out.neg = self.neg;
            out.exp = self.exp - 64 * k as i64;
            out
        } else {
            Self::round_from(&self.mant[..cur], self.exp, self.neg, n)
        }
    }

    pub fn from_u64(v: u64, n: usize) -> Self {
        Self::round_from(&[v], 0, false, check_limbs(n))
    }

    pub fn from_i64(v: i64, n: usize) -> Self {
        Self::round_from(&[v.unsigned_abs()], 0, v < 0, check_limbs(n))
    }

    pub fn from_f64(v: f64, n: usize) -> Option<Self> {
        if !v.is_finite() {
            return None;
        }
        if v == 0.0 {
            return Some(BigFloat::zero(n));
        }
        let bits = v.to_bits();
        let neg = bits >> 63 == 1;
        let bexp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (m, e) = if bexp == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), bexp - 1075)
        };
        Some(Self::round_from(&[m], e, neg, check_limbs(n)))
    }

    pub fn from_biguint_exp(m: &BigUint, e: i64, neg: bool, n: usize) -> Self {
        let digits = m.to_u64_digits();
        Self::round_from(&digits, e, neg, check_limbs(n))
    }

    pub fn from_rational(q: &BigRational, n: usize) -> Self {
        let n = check_limbs(n);
        if q.is_zero() {
            return BigFloat::zero(n);
        }
        let neg = q.is_negative();
        let p = q.numer().abs().to_biguint().expect("nonnegative");
        let d = q.denom().to_biguint().expect("positive denominator");
        let k = 64 * n as i64 + 2 + d.bits() as i64 - p.bits() as i64;
        let (num, den) = if k >= 0 {
            (p << (k as u64), d)
        } else {
            (p, d << ((-k) as u64))
        };
        let (w, r) = num.div_rem(&den);
        let mut digits = w.to_u64_digits();
        if !r.is_zero() {
            digits[0] |= 1;
        }
        Self::round_from(&digits, -k, neg, n)
    }

    pub fn to_rational(&self) -> BigRational {
        if self.is_zero() {
            return BigRational::zero();
        }
        let m = BigUint::from_slice(
            &self.mant[..self.limbs as usize]
                .iter()
                .flat_map(|w| [*w as u32, (*w >> 32) as u32])
                .collect::<Vec<u32>>(),
        );
        let mut num = BigInt::from_biguint(if self.neg { Sign::Minus } else { Sign::Plus }, m);
        let mut den = BigInt::one();
        if self.exp >= 0 {
            num <<= self.exp as u64;
        } else {
            den <<= (-self.exp) as u64;
        }
        BigRational::new(num, den)
    }

    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let n = self.limbs as usize;
        let top = self.mant[n - 1];
        let e = self.exp + 64 * (n as i64 - 1);
        let v = ldexp(top as f64, e);
        if self.neg {
            -v
        } else {
            v
        }
    }

    /// `2^(k/l)` rounded to `n` limbs.
    pub fn pow2_frac(k: i64, l: u32, n: usize) -> Self {
        let n = check_limbs(n);
        assert!(l >= 1);
        let l64 = l as i64;
        let q = k.div_euclid(l64);
        let r = k.rem_euclid(l64);
        if r == 0 {
            let mut one = BigFloat::from_u64(1, n);
            one.exp += q;
            return one;
        }
        let p = 64 * n as i64 + 64;
        let big = BigUint::one() << ((r + l64 * p) as u64);
        let root = big.nth_root(l);
        Self::from_biguint_exp(&root, q - p, false, n)
    }

    fn cmp_mag(a: &Self, b: &Self) -> Ordering {
        debug_assert_eq!(a.limbs, b.limbs);
        match (a.is_zero(), b.is_zero()) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            _ => {}
        }
        match a.exp.cmp(&b.exp) {
            Ordering::Equal => {}
            o => return o,
        }
        for i in (0..a.limbs as usize).rev() {
            match a.mant[i].cmp(&b.mant[i]) {
                Ordering::Equal => {}
                o => return o,
            }
        }
        Ordering::Equal
    }

    fn unify(a: &Self, b: &Self) -> (Self, Self, usize) {
        let n = a.limbs.max(b.limbs) as usize;
        (a.with_limbs(n), b.with_limbs(n), n)
    }

    /// Signed addition: adds magnitudes for equal signs, otherwise subtracts the
    /// smaller magnitude from the larger.
    fn add_signed(a: &Self, b: &Self) -> Self {
        let (a, b, n) = Self::unify(a, b);
        if b.is_zero() {
            return a;
        }
        if a.is_zero() {
            return b;
        }
        let same = a.neg == b.neg;
        let (big, small) = match Self::cmp_mag(&a, &b) {
            Ordering::Less => (b, a),
            Ordering::Equal if !same => return BigFloat::zero(n),
            _ => (a, b),
        };
        let len = n + 3;
        let mut buf = [0u64; MAX_LIMBS + 3];
        let mut sb = [0u64; MAX_LIMBS + 3];
        buf[2..(n + 2)].copy_from_slice(&big.mant[..n]);
        let d = big.exp - small.exp;
        let sm = &small.mant[..n];
        if d < 64 * n as i64 + 128 {
            for (i, slot) in sb.iter_mut().enumerate().take(n + 2) {
                *slot = bits_at(sm, 64 * i as i64 - 128 + d);
            }
            if any_below(sm, d - 128) {
                sb[0] |= 1;
            }
        } else {
            sb[0] = 1;
        }
        if same {
            let mut carry = 0u64;
            for i in 0..len {
                let (s1, c1) = buf[i].overflowing_add(sb[i]);
                let (s2, c2) = s1.overflowing_add(carry);
                buf[i] = s2;
                carry = (c1 as u64) + (c2 as u64);
            }
        } else {
            let mut borrow = 0u64;
            for i in 0..len {
                let (s1, b1) = buf[i].overflowing_sub(sb[i]);
                let (s2, b2) = s1.overflowing_sub(borrow);
                buf[i] = s2;
                borrow = (b1 as u64) + (b2 as u64);
            }
        }
        Self::round_from(&buf[..len], big.exp - 128, big.neg, n)
    }

    fn mul_impl(a: &Self, b: &Self) -> Self {
        let (a, b, n) = Self::unify(a, b);
        if a.is_zero() || b.is_zero() {
            return BigFloat::zero(n);
        }
        let mut prod = [0u64; 2 * MAX_LIMBS];
        // Short dyadic weights leave low limbs empty; skip them.
        let lo_b = b.mant[..n].iter().position(|&w| w != 0).unwrap_or(n);
        for i in 0..n {
            if a.mant[i] == 0 {
                continue;
            }
            let ai = a.mant[i] as u128;
            let mut carry: u128 = 0;
            for j in lo_b..n {
                let t = prod[i + j] as u128 + ai * b.mant[j] as u128 + carry;
                prod[i + j] = t as u64;
                carry = t >> 64;
            }
            prod[i + n] = carry as u64;
        }
        Self::round_from(&prod[..2 * n], a.exp + b.exp, a.neg != b.neg, n)
    }

    /// Hex-mantissa text form `[-]0x<hex>p<exp>`, exact at any precision.
    pub fn to_hex_string(&self) -> String {
        if self.is_zero() {
            return "0x0p0".to_string();
        }
        let n = self.limbs as usize;
        // Drop trailing zero limbs to keep the text short; the exponent compensates.
        let mut lo = 0;
        while lo < n - 1 && self.mant[lo] == 0 {
            lo += 1;
        }
        let mut s = String::new();
        if self.neg {
            s.push('-');
        }
        s.push_str("0x");
        s.push_str(&format!("{:x}", self.mant[n - 1]));
        for i in (lo..n - 1).rev() {
            s.push_str(&format!("{:016x}", self.mant[i]));
        }
        s.push_str(&format!("p{}", self.exp + 64 * lo as i64));
        s
    }

    pub fn parse_hex(text: &str, n: usize) -> Option<Self> {
        let t = text.trim();
        let (neg, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t),
        };
        let body = body.strip_prefix("0x")?;
        let (hex, exp) = body.split_once('p')?;
        let m = BigUint::parse_bytes(hex.as_bytes(), 16)?;
        let e: i64 = exp.parse().ok()?;
        Some(Self::from_biguint_exp(&m, e, neg, check_limbs(n)))
    }
}

/// `x * 2^e` without intermediate overflow for large `|e|`.
pub(crate) fn ldexp(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
        if x.is_infinite() {
            return x;
        }
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
        if x == 0.0 {
            return x;
        }
    }
    x * 2f64.powi(e as i32)
}

impl Add for BigFloat {
    type Output = BigFloat;
    fn add(self, rhs: BigFloat) -> BigFloat {
        BigFloat::add_signed(&self, &rhs)
    }
}

impl Sub for BigFloat {
    type Output = BigFloat;
    fn sub(self, rhs: BigFloat) -> BigFloat {
        BigFloat::add_signed(&self, &-rhs)
    }
}

impl Mul for BigFloat {
    type Output = BigFloat;
    fn mul(self, rhs: BigFloat) -> BigFloat {
        BigFloat::mul_impl(&self, &rhs)
    }
}

impl Neg for BigFloat {
    type Output = BigFloat;
    fn neg(mut self) -> BigFloat {
        if !self.is_zero() {
            self.neg = !self.neg;
        }
        self
    }
}

impl PartialEq for BigFloat {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for BigFloat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        let (a, b, _) = BigFloat::unify(self, other);
        let an = a.is_negative();
        let bn = b.is_negative();
        Some(match (an, bn) {
            (false, true) => {
                if a.is_zero() && b.is_zero() {
                    Ordering::Equal
                } else {
                    Ordering::Greater
                }
            }
            (true, false) => Ordering::Less,
            (false, false) => BigFloat::cmp_mag(&a, &b),
            (true, true) => BigFloat::cmp_mag(&b, &a),
        })
    }
}

impl fmt::Debug for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}b]", self.to_hex_string(), self.precision_bits())
    }
}

impl fmt::Display for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}
