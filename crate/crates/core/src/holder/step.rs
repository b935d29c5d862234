//! Staircase networks: the one-dimensional step function and the grid snap
//! `x -> x_β` that maps a point to the lower corner of its grid cell.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::net::{compose, side_by_side, Circuit, Layer, Network};
use crate::pwl::pwl_net_multi;
use crate::scalar::{int, rat, ScalarKind};

/// `n` plateaus `j/n` on `[j/n, (j+1)/n − w]`, linear ramps of width `w`
/// before each grid line, constant outside `[0, 1]`.
fn staircase(n: usize, w: &BigRational) -> Result<Network<BigRational>> {
    let nn = int(n as i64);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    if n == 1 {
        xs.extend([BigRational::zero(), BigRational::one()]);
        ys.extend([BigRational::zero(), BigRational::zero()]);
    }
    for j in 1..n as i64 {
        let line = int(j) / &nn;
        xs.push(&line - w);
        ys.push(int(j - 1) / &nn);
        xs.push(line.clone());
        ys.push(line);
    }
    pwl_net_multi(&xs, &[ys])
}

/// Split `K = K1·K2` with `K1` the largest divisor not above `√K`.
fn split(k: usize) -> (usize, usize) {
    let mut k1 = (k as f64).sqrt().floor() as usize;
    while k1 > 1 && k % k1 != 0 {
        k1 -= 1;
    }
    let k1 = k1.max(1);
    (k1, k / k1)
}

fn check_gap(k: usize, gap: &BigRational) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("resolution K must be positive".into()));
    }
    if !gap.is_positive() || *gap >= rat(1, k as i64) {
        return Err(Error::Precondition(format!("ramp width must lie in (0, 1/K) for K={k}")));
    }
    Ok(())
}

/// Coarse stage for one coordinate: `x -> (x, ψ1(x))`.
fn coarse_stage(k1: usize, gap: &BigRational) -> Result<Network<BigRational>> {
    let psi = staircase(k1, gap)?;
    let (p0, p1) = (&psi.layers()[0], &psi.layers()[1]);
    let u = p0.rows;
    let mut l0 = Layer::zeros(2 + u, 1);
    l0.set(0, 0, int(1));
    l0.set(1, 0, int(-1));
    let mut l1 = Layer::zeros(2, 2 + u);
    l1.set(0, 0, int(1));
    l1.set(0, 1, int(-1));
    for i in 0..u {
        l0.set(2 + i, 0, p0.at(i, 0).clone());
        l0.v[2 + i] = p0.v[i].clone();
        l1.set(1, 2 + i, p1.at(0, i).clone());
    }
    l1.v[1] = p1.v[0].clone();
    Network::new(vec![l0, l1], ScalarKind::Rational)
}

/// Fine stage for one coordinate: `(x, ψ1) -> ψ1 + ψ2(K1(x − ψ1))/K1`,
/// followed by `x` itself when `keep` is set.
fn fine_stage(k1: usize, k2: usize, gap: &BigRational, keep: bool) -> Result<Network<BigRational>> {
    let k1r = int(k1 as i64);
    let psi = staircase(k2, &(gap * &k1r))?;
    let (q0, q1) = (&psi.layers()[0], &psi.layers()[1]);
    let u = q0.rows;
    let extra = if keep { 3 } else { 1 };
    let mut l0 = Layer::zeros(u + extra, 2);
    let mut l1 = Layer::zeros(if keep { 2 } else { 1 }, u + extra);
    for i in 0..u {
        let a = q0.at(i, 0);
        l0.set(i, 0, a * &k1r);
        l0.set(i, 1, -(a * &k1r));
        l0.v[i] = q0.v[i].clone();
        l1.set(0, i, q1.at(0, i) / &k1r);
    }
    l0.set(u, 1, int(1));
    l1.set(0, u, int(1));
    l1.v[0] = &q1.v[0] / &k1r;
    if keep {
        l0.set(u + 1, 0, int(1));
        l0.set(u + 2, 0, int(-1));
        l1.set(1, u + 1, int(1));
        l1.set(1, u + 2, int(-1));
    }
    Network::new(vec![l0, l1], ScalarKind::Rational)
}

/// The two stages for `d` coordinates, outputs interleaved per coordinate.
fn stages(k: usize, d: usize, gap: &BigRational, keep: bool) -> Result<(Network<BigRational>, Network<BigRational>)> {
    check_gap(k, gap)?;
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let (k1, k2) = split(k);
    let a = coarse_stage(k1, gap)?;
    let b = fine_stage(k1, k2, gap, keep)?;
    Ok((side_by_side(&vec![a; d])?, side_by_side(&vec![b; d])?))
}

/// Step function with `K` plateaus `⌊Kx⌋/K` and ramps of width `gap` just
/// below each grid line, built as `ψ1(x) + ψ2(K1(x − ψ1(x)))/K1` with
/// `K = K1·K2`. Depth 2.
pub fn step_net_gap(k: usize, gap: &BigRational) -> Result<Network<BigRational>> {
    let (a, b) = stages(k, 1, gap, false)?;
    compose(&b, &a)
}

fn check_budget(k: usize, n: usize, l: usize) -> Result<()> {
    let cap = (n as u128).pow(2) * (l as u128).pow(2);
    if n == 0 || l == 0 || k as u128 > cap {
        return Err(Error::Budget(format!("resolution K={k} exceeds N²L² = {cap}")));
    }
    Ok(())
}

/// [`step_net_gap`] with ramps of width `1/(4K^r)`; requires `K ≤ N²L²`.
pub fn step_net(k: usize, n: usize, l: usize, r: u32) -> Result<Network<BigRational>> {
    if r == 0 {
        return Err(Error::InvalidArgument("ramp exponent r must be ≥ 1".into()));
    }
    check_budget(k, n, l)?;
    let kr = num_bigint::BigInt::from(k).pow(r);
    step_net_gap(k, &BigRational::new(1.into(), kr * 4))
}

/// Coordinatewise snap `x -> (⌊Kx_i⌋/K)_i` off the band set with half-width
/// `delta`; requires `K ≤ N²L²`.
pub fn grid_snap_net(k: usize, d: usize, n: usize, l: usize, delta: &BigRational) -> Result<Network<BigRational>> {
    check_budget(k, n, l)?;
    let (a, b) = stages(k, d, delta, false)?;
    compose(&b, &a)
}

/// Structured snap used by the approximator: `x -> (x_β, K(x − x_β))`, the
/// two stages joined as a chain.
pub fn snap_circuit(k: usize, d: usize, delta: &BigRational) -> Result<Circuit<BigRational>> {
    let (a, b) = stages(k, d, delta, true)?;
    // (β_1, x_1, β_2, x_2, …) -> (β_1..β_d, t_1..t_d)
    let kk = int(k as i64);
    let mut head = Layer::zeros(2 * d, 2 * d);
    for i in 0..d {
        head.set(i, 2 * i, int(1));
        head.set(d + i, 2 * i + 1, kk.clone());
        head.set(d + i, 2 * i, -kk.clone());
    }
    Circuit::chain(vec![Circuit::net(a), Circuit::net(b)])?.then_affine(&head)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pwl::in_band;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn floor_k(x: &BigRational, k: usize) -> BigRational {
        let kk = int(k as i64);
        let v = (x * &kk).floor().max(BigRational::zero()).min(int(k as i64 - 1));
        v / kk
    }

    #[test]
    fn spec_examples() {
        let net = step_net(4, 1, 2, 1).unwrap();
        assert_eq!(net.evaluate(&[rat(3, 10)]).unwrap()[0], rat(1, 4));
        assert_eq!(net.evaluate(&[rat(-1, 2)]).unwrap()[0], int(0));
        assert_eq!(net.evaluate(&[rat(3, 2)]).unwrap()[0], rat(3, 4));
        assert_eq!(net.depth(), 2);
        let snap = grid_snap_net(4, 2, 1, 2, &rat(1, 64)).unwrap();
        assert_eq!(snap.evaluate(&[rat(3, 10), rat(7, 10)]).unwrap(), vec![rat(1, 4), rat(1, 2)]);
    }

    #[test]
    fn budget_is_checked() {
        assert!(matches!(step_net(17, 2, 2, 1), Err(Error::Budget(_))));
        assert!(step_net(16, 2, 2, 1).is_ok());
    }

    #[test]
    fn plateau_midpoints_exact() {
        for k in [1usize, 2, 3, 7, 12, 64, 97] {
            let net = step_net_gap(k, &rat(1, 4 * k as i64 * k as i64)).unwrap();
            for j in 0..k as i64 {
                let mid = rat(2 * j + 1, 2 * k as i64) - rat(1, 8 * k as i64 * k as i64);
                assert_eq!(net.evaluate(&[mid]).unwrap()[0], rat(j, k as i64), "K={k} j={j}");
            }
        }
    }

    #[test]
    fn off_band_points_match_floor() {
        let (k, d) = (36usize, 3usize);
        let delta = rat(1, 3 * k as i64);
        let snap = grid_snap_net(k, d, 6, 1, &delta).unwrap();
        let circ = snap_circuit(k, d, &delta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut tested = 0;
        while tested < 200 {
            let x: Vec<BigRational> = (0..d).map(|_| rat(rng.random_range(0..100_000), 100_000)).collect();
            if in_band(&x, k, &delta) {
                continue;
            }
            tested += 1;
            let want: Vec<BigRational> = x.iter().map(|v| floor_k(v, k)).collect();
            assert_eq!(snap.evaluate(&x).unwrap(), want);
            let out = circ.evaluate(&x).unwrap();
            assert_eq!(out[..d].to_vec(), want);
            for i in 0..d {
                assert_eq!(out[d + i], (&x[i] - &want[i]) * int(k as i64));
            }
        }
    }
}
