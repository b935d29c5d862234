//! Ternary packing of binary digits and the networks that unpack them.
//!
//! A bit stream `θ_1, θ_2, …` is stored as `Σ θ_k 3^{-k}`. Fixing the first
//! `n` digits confines the value to `[P, P + 3^{-n}/2]` where `P` is the
//! prefix sum, and distinct prefixes are at least `3^{-n}/2` apart. The
//! networks below read digits with an exact piecewise-linear lookup over the
//! `2^n` prefix classes.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::net::{compose, Layer, Network};
use crate::pwl::pwl_net_multi;
use crate::scalar::{int, pow2, pow3, ScalarKind};

/// Finite bit stream; the tail is implicitly zero.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct BitStream {
    pub bits: Vec<u8>,
}

impl BitStream {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument("bits must be 0 or 1".into()));
        }
        Ok(BitStream { bits })
    }
}

/// `Σ θ_k 3^{-k}`.
pub fn ternary_encode(bits: &[u8]) -> BigRational {
    let mut num = BigInt::zero();
    for &b in bits {
        num = num * 3 + BigInt::from(b);
    }
    BigRational::new(num, num_traits::pow(BigInt::from(3), bits.len()))
}

/// `i`-th binary digit of `v ∈ [0, 1)`, counting from 1.
pub fn bit(v: &BigRational, i: u32) -> u8 {
    let scaled = v * pow2(i as i64);
    let fl = scaled.floor().to_integer();
    if fl.is_odd() {
        1
    } else {
        0
    }
}

/// First `c` binary digits of `v`.
pub fn binary_digits(v: &BigRational, c: u32) -> Vec<u8> {
    (1..=c).map(|i| bit(v, i)).collect()
}

/// Packs the first `c` binary digits of each value, block after block:
/// `Σ_j Σ_{i≤c} bit_i(v_j) 3^{-((j−1)c+i)}`.
pub fn block_encode(values: &[BigRational], c: u32) -> Result<BigRational> {
    let mut bits = Vec::with_capacity(values.len() * c as usize);
    for v in values {
        if *v < BigRational::zero() || *v >= BigRational::one() {
            return Err(Error::InvalidArgument(format!("value {v} outside [0, 1)")));
        }
        bits.extend(binary_digits(v, c));
    }
    Ok(ternary_encode(&bits))
}

/// All `2^n` digit prefixes in increasing order of their ternary value.
fn prefixes(n: u32) -> Vec<Vec<u8>> {
    // Binary counting order is also increasing ternary order.
    (0..(1u64 << n))
        .map(|m| (0..n).map(|j| ((m >> (n - 1 - j)) & 1) as u8).collect())
        .collect()
}

/// Exact lookup from an encoded value to per-class outputs: breakpoints at
/// both ends of each prefix class `[P, P + 3^{-n}/2]`, constant on classes.
fn lookup(n: u32, outputs: &[Box<dyn Fn(&[u8]) -> BigRational>]) -> Result<Network<BigRational>> {
    let half = pow3(-(n as i64)) / int(2);
    let mut xs = Vec::new();
    let mut ys: Vec<Vec<BigRational>> = vec![Vec::new(); outputs.len()];
    for p in prefixes(n) {
        let start = ternary_encode(&p);
        xs.push(start.clone());
        xs.push(&start + &half);
        for (k, f) in outputs.iter().enumerate() {
            let v = f(&p);
            ys[k].push(v.clone());
            ys[k].push(v);
        }
    }
    pwl_net_multi(&xs, &ys)
}

/// One decoding step on `(y, x)`: reads `n` digits at offset `off` and returns
/// `(y + Σ_j θ_j 2^{-(off+j)}, 3^n x − Σ_j θ_j 3^{n−j})`. Depth 1; the
/// nonnegative inputs `y` and `x` pass through single ReLU units.
fn decode_block(n: u32, off: u32) -> Result<Network<BigRational>> {
    let value: Box<dyn Fn(&[u8]) -> BigRational> = Box::new(move |p: &[u8]| {
        p.iter()
            .enumerate()
            .map(|(j, &b)| int(b as i64) * pow2(-((off + j as u32 + 1) as i64)))
            .sum()
    });
    let prefix: Box<dyn Fn(&[u8]) -> BigRational> = Box::new(|p: &[u8]| ternary_encode(p));
    let lk = lookup(n, &[value, prefix])?;
    let (a, b) = (&lk.layers()[0], &lk.layers()[1]);
    let units = a.rows;
    let scale = pow3(n as i64);
    let mut l0 = Layer::zeros(units + 2, 2);
    for u in 0..units {
        l0.set(u, 1, a.at(u, 0).clone());
        l0.v[u] = a.v[u].clone();
    }
    l0.set(units, 0, int(1));
    l0.set(units + 1, 1, int(1));
    let mut l1 = Layer::zeros(2, units + 2);
    for u in 0..units {
        l1.set(0, u, b.at(0, u).clone());
        l1.set(1, u, -(&scale * b.at(1, u)));
    }
    l1.set(0, units, int(1));
    l1.set(1, units + 1, scale.clone());
    l1.v[0] = b.v[0].clone();
    l1.v[1] = -(&scale * &b.v[1]);
    Network::new(vec![l0, l1], ScalarKind::Rational)
}

/// Maps `Σ θ_k 3^{-k}` to `(Σ_{j≤ℓ} θ_j 2^{-j}, Σ_k θ_{ℓ+k} 3^{-k})` with
/// `⌈ℓ/n⌉` hidden layers, each reading up to `n` digits.
pub fn bit_decode_net(n: u32, l: u32) -> Result<Network<BigRational>> {
    if n == 0 || l == 0 {
        return Err(Error::InvalidArgument("digits per step and digit count must be ≥ 1".into()));
    }
    let blocks = l.div_ceil(n);
    // x -> (0, x)
    let start = Layer::new(2, 1, vec![int(0), int(1)], vec![int(0), int(0)])?;
    let mut net = Network::new(vec![start], ScalarKind::Rational)?;
    for m in 0..blocks {
        let off = m * n;
        let width = n.min(l - off);
        net = compose(&decode_block(width, off)?, &net)?;
    }
    Ok(net)
}

/// Two-input network `(x, i) -> (Σ_{j≤min(i,n)} θ_j, 3^n x − Σ_{j≤n} θ_j 3^{n−j})`
/// for integer `i ≥ 0`. Depth 2; the gate
/// `θ_j 1{j≤i} = σ(θ_j + σ(i−j+1) − σ(i−j) − 1)` selects the digits.
pub fn bit_sum_net(n: u32) -> Result<Network<BigRational>> {
    if n == 0 {
        return Err(Error::InvalidArgument("digits per step must be ≥ 1".into()));
    }
    let mut outputs: Vec<Box<dyn Fn(&[u8]) -> BigRational>> = Vec::new();
    for j in 0..n as usize {
        outputs.push(Box::new(move |p: &[u8]| int(p[j] as i64)));
    }
    outputs.push(Box::new(|p: &[u8]| ternary_encode(p)));
    let lk = lookup(n, &outputs)?;
    let (a, b) = (&lk.layers()[0], &lk.layers()[1]);
    let units = a.rows;
    let nn = n as usize;
    // hidden 1: lookup units, σ(x), then σ(i−j+1), σ(i−j) for each j
    let h1 = units + 1 + 2 * nn;
    let mut l0 = Layer::zeros(h1, 2);
    for u in 0..units {
        l0.set(u, 0, a.at(u, 0).clone());
        l0.v[u] = a.v[u].clone();
    }
    l0.set(units, 0, int(1));
    for j in 1..=nn {
        let r = units + 1 + 2 * (j - 1);
        l0.set(r, 1, int(1));
        l0.v[r] = int(1 - j as i64);
        l0.set(r + 1, 1, int(1));
        l0.v[r + 1] = int(-(j as i64));
    }
    // hidden 2: gates for each digit, then the tail
    let scale = pow3(n as i64);
    let mut l1 = Layer::zeros(nn + 1, h1);
    for j in 0..nn {
        for u in 0..units {
            l1.set(j, u, b.at(j, u).clone());
        }
        let r = units + 1 + 2 * j;
        l1.set(j, r, int(1));
        l1.set(j, r + 1, int(-1));
        l1.v[j] = &b.v[j] - int(1);
    }
    for u in 0..units {
        l1.set(nn, u, -(&scale * b.at(nn, u)));
    }
    l1.set(nn, units, scale.clone());
    l1.v[nn] = -(&scale * &b.v[nn]);
    let mut l2 = Layer::zeros(2, nn + 1);
    for j in 0..nn {
        l2.set(0, j, int(1));
    }
    l2.set(1, nn, int(1));
    Network::new(vec![l0, l1, l2], ScalarKind::Rational)
}

/// Reference digit sum and tail for the bit-sum network.
pub fn bit_sum_reference(bits: &[u8], n: usize, i: usize) -> (BigRational, BigRational) {
    let sum: i64 = bits.iter().take(n.min(i)).map(|&b| b as i64).sum();
    let tail = if bits.len() > n { ternary_encode(&bits[n..]) } else { BigRational::zero() };
    (int(sum), tail)
}

/// Reference output of the decoder for a stream.
pub fn decode_reference(bits: &[u8], l: usize) -> (BigRational, BigRational) {
    let y: BigRational = bits
        .iter()
        .take(l)
        .enumerate()
        .map(|(j, &b)| int(b as i64) * pow2(-(j as i64 + 1)))
        .sum();
    let tail = if bits.len() > l { ternary_encode(&bits[l..]) } else { BigRational::zero() };
    (y, tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn encode_examples() {
        assert_eq!(ternary_encode(&[1, 0, 1]), rat(10, 27));
        assert_eq!(ternary_encode(&[]), int(0));
        let p = 59049; // 3^10
        assert_eq!(ternary_encode(&[1; 10]), rat(p - 1, 2 * p));
    }

    #[test]
    fn block_encode_examples() {
        assert_eq!(block_encode(&[rat(1, 2)], 2).unwrap(), rat(1, 3));
        assert_eq!(block_encode(&[rat(1, 2), rat(1, 4)], 2).unwrap(), rat(28, 81));
        assert_eq!(block_encode(&[], 2).unwrap(), int(0));
        assert!(block_encode(&[int(1)], 2).is_err());
    }

    #[test]
    fn bit_sum_examples() {
        let net = bit_sum_net(2).unwrap();
        let x = ternary_encode(&[1, 0, 1]);
        assert_eq!(net.evaluate(&[x.clone(), int(2)]).unwrap(), vec![int(1), rat(1, 3)]);
        assert_eq!(net.evaluate(&[int(0), int(2)]).unwrap(), vec![int(0), int(0)]);
        assert_eq!(net.evaluate(&[x, int(0)]).unwrap(), vec![int(0), rat(1, 3)]);
        assert_eq!(net.depth(), 2);
    }

    #[test]
    fn bit_sum_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in 1..=4u32 {
            let net = bit_sum_net(n).unwrap();
            for _ in 0..40 {
                let len = rng.random_range(0..12);
                let bits: Vec<u8> = (0..len).map(|_| rng.random_range(0..2)).collect();
                let i = rng.random_range(0..6usize);
                let (s, t) = bit_sum_reference(&bits, n as usize, i);
                let out = net.evaluate(&[ternary_encode(&bits), int(i as i64)]).unwrap();
                assert_eq!(out, vec![s, t]);
            }
        }
    }

    #[test]
    fn decode_examples() {
        let net = bit_decode_net(2, 2).unwrap();
        assert_eq!(net.evaluate(&[ternary_encode(&[1, 1])]).unwrap(), vec![rat(3, 4), int(0)]);
        assert_eq!(
            net.evaluate(&[ternary_encode(&[1, 0, 1, 1])]).unwrap(),
            vec![rat(1, 2), rat(4, 9)]
        );
        assert_eq!(bit_decode_net(3, 7).unwrap().depth(), 3);
    }

    #[test]
    fn iterated_tails_read_consecutive_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let l = 5;
        let net = bit_decode_net(2, l as u32).unwrap();
        for _ in 0..20 {
            let bits: Vec<u8> = (0..4 * l).map(|_| rng.random_range(0..2)).collect();
            let mut x = ternary_encode(&bits);
            for k in 0..4 {
                let out = net.evaluate(&[x]).unwrap();
                let (y, _) = decode_reference(&bits[k * l..], l);
                assert_eq!(out[0], y);
                x = out[1].clone();
            }
        }
    }

    #[test]
    fn block_codes_decode_to_values() {
        let vals = vec![rat(5, 8), rat(1, 8), rat(3, 4)];
        let c = 4;
        let code = block_encode(&vals, c).unwrap();
        let net = bit_decode_net(2, c).unwrap();
        let mut x = code;
        for v in &vals {
            let out = net.evaluate(&[x]).unwrap();
            assert_eq!(&out[0], v);
            x = out[1].clone();
        }
        assert_eq!(x, int(0));
    }
}
