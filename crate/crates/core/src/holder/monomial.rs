//! Squares, products and monomials on the unit cube from sawtooth
//! compositions.
//!
//! With base `b`, the tooth map `Z` folds `[0,1]` into `b` linear pieces and
//! `T` interpolates `t(1−t)` at the nodes `j/b`. Then
//! `x − Σ_{i<m} b^{-2i} T(Z^{(i)}(x))` is the piecewise-linear interpolant of
//! `x²` at spacing `b^{-m}`, with error at most `1/(4 b^{2m})`.

use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::net::{compose, relu_pass, select, side_by_side, Layer, Network};
use crate::scalar::{int, pow2, rat, ScalarKind};

/// Sup error of [`square_net`] on `[0,1]`.
pub fn square_error(b: usize, m: usize) -> BigRational {
    let bb = int(b as i64);
    let mut e = rat(1, 4);
    for _ in 0..2 * m {
        e /= &bb;
    }
    e
}

/// Depth-`m` approximation of `x²` on `[0,1]`, width `b + 2`.
pub fn square_net(b: usize, m: usize) -> Result<Network<BigRational>> {
    if b < 2 || m == 0 {
        return Err(Error::InvalidArgument("square network needs base ≥ 2 and depth ≥ 1".into()));
    }
    let bb = int(b as i64);
    let zc: Vec<BigRational> = (0..b)
        .map(|j| match j {
            0 => bb.clone(),
            _ if j % 2 == 1 => -int(2 * b as i64),
            _ => int(2 * b as i64),
        })
        .collect();
    let tc: Vec<BigRational> = (0..b)
        .map(|j| if j == 0 { rat(b as i64 - 1, b as i64) } else { rat(-2, b as i64) })
        .collect();
    // hidden layer: teeth u_0..u_{b-1}, x-pass, acc-pass
    let w = b + 2;
    let teeth = |layer: &mut Layer<BigRational>, src: &dyn Fn(&mut Layer<BigRational>, usize)| {
        for j in 0..b {
            src(layer, j);
            layer.v[j] = -rat(j as i64, b as i64);
        }
    };
    let mut layers = Vec::with_capacity(m + 1);
    let mut first = Layer::zeros(w, 1);
    teeth(&mut first, &|l, j| l.set(j, 0, int(1)));
    first.set(b, 0, int(1));
    layers.push(first);
    let mut scale = BigRational::from_integer(1.into());
    for _ in 1..m {
        // z = Σ zc u, x = pass, acc = pass + scale Σ tc u
        let mut l = Layer::zeros(w, w);
        let sc = scale.clone();
        teeth(&mut l, &|l, j| {
            for (c, zcv) in zc.iter().enumerate() {
                l.set(j, c, zcv.clone());
            }
        });
        l.set(b, b, int(1));
        l.set(b + 1, b + 1, int(1));
        for (c, t) in tc.iter().enumerate() {
            l.set(b + 1, c, &sc * t);
        }
        layers.push(l);
        scale = scale / (&bb * &bb);
    }
    let mut out = Layer::zeros(1, w);
    out.set(0, b, int(1));
    out.set(0, b + 1, int(-1));
    for (c, t) in tc.iter().enumerate() {
        out.set(0, c, -(&scale * t));
    }
    layers.push(out);
    Network::new(layers, ScalarKind::Rational)
}

/// Depth of [`mult01_net`].
pub fn mult_depth(m: usize) -> usize {
    m + 2
}

/// `(x, y) -> xy` on `[0,1]²` via `S((x+y)/2) − S(|x−y|/2)`, clamped to
/// `[0,1]`. Error at most `2·square_error(b, m)`.
pub fn mult01_net(b: usize, m: usize) -> Result<Network<BigRational>> {
    let half = rat(1, 2);
    let pre = Network::new(
        vec![
            Layer::from_rows(
                vec![vec![int(1), int(1)], vec![int(1), int(-1)], vec![int(-1), int(1)]],
                vec![BigRational::zero(); 3],
            )?,
            Layer::from_rows(
                vec![
                    vec![half.clone(), BigRational::zero(), BigRational::zero()],
                    vec![BigRational::zero(), half.clone(), half.clone()],
                ],
                vec![BigRational::zero(); 2],
            )?,
        ],
        ScalarKind::Rational,
    )?;
    let sq = square_net(b, m)?;
    let both = side_by_side(&[sq.clone(), sq])?;
    let diff = Network::new(
        vec![Layer::from_rows(vec![vec![int(1), int(-1)]], vec![BigRational::zero()])?],
        ScalarKind::Rational,
    )?;
    let clamp = Network::new(
        vec![
            Layer::from_rows(vec![vec![int(1)], vec![int(1)]], vec![BigRational::zero(), int(-1)])?,
            Layer::from_rows(vec![vec![int(1), int(-1)]], vec![BigRational::zero()])?,
        ],
        ScalarKind::Rational,
    )?;
    let core = compose(&diff, &compose(&both, &pre)?)?;
    compose(&clamp, &core)
}

/// `x -> x^α` on `[0,1]^D` by multiplying in one factor at a time with
/// [`mult01_net`]. Error at most `2(|α|−1)·square_error(b, m)`.
pub fn monomial_chain(alpha: &[usize], b: usize, m: usize) -> Result<Network<BigRational>> {
    let d = alpha.len();
    if d == 0 {
        return Err(Error::InvalidArgument("empty multi-index".into()));
    }
    let k: usize = alpha.iter().sum();
    let factors: Vec<usize> = alpha
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| std::iter::repeat_n(i, a))
        .collect();
    if k == 0 {
        let l = Layer::new(1, d, vec![BigRational::zero(); d], vec![int(1)])?;
        return Network::new(vec![l], ScalarKind::Rational);
    }
    let mut net: Network<BigRational> = {
        // (p, x_1..x_D) with p = first factor
        let mut idx = vec![factors[0]];
        idx.extend(0..d);
        select(d, &idx, ScalarKind::Rational)
    };
    if k > 1 {
        let mult = mult01_net(b, m)?;
        let pass = relu_pass::<BigRational>(d, mult.depth(), ScalarKind::Rational);
        let step = side_by_side(&[mult, pass])?;
        for &f in &factors[1..] {
            // (p, x) -> (p, x_f, x) -> (p·x_f, x)
            let mut idx = vec![0, 1 + f];
            idx.extend(1..=d);
            let spread = select(1 + d, &idx, ScalarKind::Rational);
            net = compose(&compose(&step, &spread)?, &net)?;
        }
    }
    compose(&select(1 + d, &[0], ScalarKind::Rational), &net)
}

/// Error bound `9k(N+1)^{-7kL}` for [`monomial_net`].
pub fn monomial_bound(n: usize, l: usize, k: usize) -> BigRational {
    let base = int(n as i64 + 1);
    let mut e = int(9 * k as i64);
    for _ in 0..7 * k * l {
        e /= &base;
    }
    e
}

/// Approximates `x^α` on `[0,1]^D` for `|α| ≤ k` within
/// [`monomial_bound`]`(n, l, k)`, using base `N+1` and `⌈7kL/2⌉` squaring
/// levels.
pub fn monomial_net(alpha: &[usize], n: usize, l: usize, k: usize) -> Result<Network<BigRational>> {
    let total: usize = alpha.iter().sum();
    if total > k {
        return Err(Error::Precondition(format!("|α| = {total} exceeds the configured degree {k}")));
    }
    if n == 0 || l == 0 {
        return Err(Error::InvalidArgument("width and depth budgets must be ≥ 1".into()));
    }
    monomial_chain(alpha, n + 1, (7 * k * l).div_ceil(2))
}

/// Fewest squaring levels with `2(k−1)·square_error(b, m) ≤ 2^{-bits}`.
pub fn levels_for(b: usize, k: usize, bits: i64) -> usize {
    let target = pow2(-bits);
    let mut m = 1;
    while int(2 * k.saturating_sub(1) as i64) * square_error(b, m) > target {
        m += 1;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::BigFloat;
    use num_traits::Signed;

    fn grid(n: usize) -> Vec<BigRational> {
        (0..=n).map(|i| rat(i as i64, n as i64)).collect()
    }

    #[test]
    fn square_is_the_interpolant() {
        for (b, m) in [(2, 1), (2, 3), (3, 2), (5, 1)] {
            let net = square_net(b, m).unwrap();
            let mut worst = BigRational::zero();
            for x in grid(600) {
                let e = (net.evaluate(&[x.clone()]).unwrap()[0].clone() - &x * &x).abs();
                assert!(e >= BigRational::zero());
                worst = worst.max(e);
            }
            assert!(worst <= square_error(b, m), "b={b} m={m}");
            // exact at the finest nodes
            let nodes = (b as i64).pow(m as u32);
            for i in 0..=nodes {
                let x = rat(i, nodes);
                assert_eq!(net.evaluate(&[x.clone()]).unwrap()[0], &x * &x);
            }
        }
    }

    #[test]
    fn product_error() {
        let net = mult01_net(3, 2).unwrap();
        let bound = square_error(3, 2) * int(2);
        for x in grid(30) {
            for y in grid(17) {
                let out = net.evaluate(&[x.clone(), y.clone()]).unwrap()[0].clone();
                assert!((out - &x * &y).abs() <= bound);
            }
        }
    }

    #[test]
    fn degree_one_is_exact() {
        let net = monomial_net(&[1, 0], 2, 1, 2).unwrap();
        for x in grid(7) {
            let y = rat(1, 3);
            assert_eq!(net.evaluate(&[x.clone(), y]).unwrap()[0], x);
        }
        let one = monomial_net(&[0, 0], 2, 1, 2).unwrap();
        assert_eq!(one.evaluate(&[rat(1, 5), rat(2, 5)]).unwrap()[0], int(1));
    }

    #[test]
    fn sizes_within_statement() {
        for (alpha, n, l, k) in [(vec![2], 1, 1, 2), (vec![2, 1], 2, 1, 3), (vec![1, 1], 3, 2, 2)] {
            let net = monomial_net(&alpha, n, l, k).unwrap();
            assert!(net.width() <= 9 * (n + 1) + k - 1, "width {}", net.width());
            assert!(net.depth() <= 7 * k * k * l);
        }
    }

    #[test]
    fn cubic_in_bigfloat() {
        let kind = ScalarKind::bigfloat(256);
        let net = monomial_net(&[3], 1, 1, 3).unwrap().cast::<BigFloat>(kind).unwrap();
        let bound = monomial_bound(1, 1, 3);
        for x in grid(200) {
            let out = net.evaluate(&[BigFloat::from_rational(&x, kind.limbs())]).unwrap()[0].to_rational();
            assert!((out - &x * &x * &x).abs() <= bound);
        }
    }

    #[test]
    fn level_count() {
        let m = levels_for(3, 2, 30);
        assert!(int(2) * square_error(3, m) <= pow2(-30));
        assert!(int(2) * square_error(3, m - 1) > pow2(-30));
    }
}
