//! Exact piecewise-linear networks, the separation bump, the three-input
//! median and coordinatewise median smoothing.

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::net::{compose, Circuit, Layer, Network};
use crate::scalar::{int, pow2, rat, ScalarKind};

/// Breakpoints `(x_i, y_i)` with strictly increasing `x_i`. The interpolant is
/// extended by constants on both sides.
#[derive(Clone, Debug, PartialEq)]
pub struct PwlSpec {
    pub points: Vec<(BigRational, BigRational)>,
}

impl PwlSpec {
    pub fn new(points: Vec<(BigRational, BigRational)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Precondition("need at least two breakpoints".into()));
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Precondition("breakpoints must be strictly increasing".into()));
        }
        Ok(PwlSpec { points })
    }

    /// Direct linear interpolation, used as the reference for the network.
    pub fn interpolate(&self, x: &BigRational) -> BigRational {
        let p = &self.points;
        if *x <= p[0].0 {
            return p[0].1.clone();
        }
        if *x >= p[p.len() - 1].0 {
            return p[p.len() - 1].1.clone();
        }
        let i = p.partition_point(|(xi, _)| xi <= x);
        let (x0, y0) = &p[i - 1];
        let (x1, y1) = &p[i];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Minimum gap normalized by `max(1, max |x_i|)`.
    pub fn normalized_gap(&self) -> BigRational {
        let gap = self
            .points
            .windows(2)
            .map(|w| &w[1].0 - &w[0].0)
            .min()
            .unwrap();
        let scale = self
            .points
            .iter()
            .map(|(x, _)| x.abs())
            .fold(BigRational::one(), |a, b| if b > a { b } else { a });
        gap / scale
    }
}

/// The size budget quoted for a depth-efficient piecewise-linear network,
/// `(N, L, (M^6 δ^{-4} ȳ)^{1/L})`, kept for comparison with measured sizes.
#[derive(Clone, Debug, serde::Serialize)]
pub struct PwlBudget {
    pub width: usize,
    pub depth: usize,
    pub magnitude: f64,
}

pub fn pwl_budget(spec: &PwlSpec, n: usize, l: usize) -> PwlBudget {
    let m = spec.points.len() as f64;
    let delta = spec.normalized_gap().to_f64().unwrap_or(f64::MIN_POSITIVE);
    let ybar = spec
        .points
        .iter()
        .map(|(_, y)| y.abs().to_f64().unwrap_or(0.0))
        .fold(0.0, f64::max)
        .max(1.0);
    let log_b = (6.0 * m.ln() - 4.0 * delta.ln() + ybar.ln()) / l as f64;
    PwlBudget {
        width: n,
        depth: l,
        magnitude: log_b.exp(),
    }
}

/// Power of two closest to `sqrt(|c|)`, used to balance inner and outer weights.
fn balance(c: &BigRational) -> BigRational {
    let v = c.abs().to_f64().unwrap_or(1.0);
    if v == 0.0 || !v.is_finite() {
        return BigRational::one();
    }
    pow2((v.log2() / 2.0).round() as i64)
}

/// One-hidden-layer network sharing breakpoints across several outputs:
/// `φ_k(x) = y_{1,k} + Σ_i c_{i,k} σ(x − x_i)` with `c` the slope jumps.
/// Each unit is scaled as `σ(a x − a x_i)` with outer weight `c/a`, `a` a
/// power of two, so inner and outer magnitudes stay balanced.
pub fn pwl_net_multi(xs: &[BigRational], ys: &[Vec<BigRational>]) -> Result<Network<BigRational>> {
    let m = xs.len();
    if m < 2 {
        return Err(Error::Precondition("need at least two breakpoints".into()));
    }
    if xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("breakpoints must be strictly increasing".into()));
    }
    if ys.is_empty() || ys.iter().any(|y| y.len() != m) {
        return Err(Error::Precondition("every output needs one value per breakpoint".into()));
    }
    let outs = ys.len();
    // coeff[i][k]: jump of output k at breakpoint i
    let mut coeff = vec![vec![BigRational::zero(); outs]; m];
    for (k, y) in ys.iter().enumerate() {
        let slopes: Vec<BigRational> = (0..m - 1)
            .map(|i| (&y[i + 1] - &y[i]) / (&xs[i + 1] - &xs[i]))
            .collect();
        coeff[0][k] = slopes[0].clone();
        for i in 1..m - 1 {
            coeff[i][k] = &slopes[i] - &slopes[i - 1];
        }
        coeff[m - 1][k] = -slopes[m - 2].clone();
    }
    let units: Vec<usize> = (0..m)
        .filter(|&i| coeff[i].iter().any(|c| !c.is_zero()))
        .collect();
    let width = units.len().max(1);
    let mut l0 = Layer::zeros(width, 1);
    let mut l1 = Layer::zeros(outs, width);
    for (u, &i) in units.iter().enumerate() {
        let big = coeff[i]
            .iter()
            .map(|c| c.abs())
            .fold(BigRational::zero(), |a, b| if b > a { b } else { a });
        let a = balance(&big);
        l0.set(u, 0, a.clone());
        l0.v[u] = -(&a * &xs[i]);
        for k in 0..outs {
            l1.set(k, u, &coeff[i][k] / &a);
        }
    }
    for k in 0..outs {
        l1.v[k] = ys[k][0].clone();
    }
    Network::new(vec![l0, l1], ScalarKind::Rational)
}

/// Exact one-hidden-layer interpolant of `spec`.
pub fn pwl_net(spec: &PwlSpec) -> Result<Network<BigRational>> {
    let xs: Vec<BigRational> = spec.points.iter().map(|p| p.0.clone()).collect();
    let ys: Vec<BigRational> = spec.points.iter().map(|p| p.1.clone()).collect();
    pwl_net_multi(&xs, &[ys])
}

/// The separation bump: `2^{-s}` on `[-2^{-(s+2)}, 2^{-(s+2)}]`, zero outside
/// `(-2^{-(s+1)}, 2^{-(s+1)})`, linear in between.
pub fn bump_spec(s: u32) -> PwlSpec {
    let s = s as i64;
    let h = pow2(-s);
    let pts = vec![
        (int(-2), int(0)),
        (-pow2(-(s + 1)), int(0)),
        (-pow2(-(s + 2)), h.clone()),
        (pow2(-(s + 2)), h),
        (pow2(-(s + 1)), int(0)),
        (int(2), int(0)),
    ];
    PwlSpec::new(pts).expect("bump breakpoints are increasing")
}

pub fn bump_net(s: u32) -> Result<Network<BigRational>> {
    if s < 1 {
        return Err(Error::Precondition("separation exponent must be ≥ 1".into()));
    }
    pwl_net(&bump_spec(s))
}

/// Median of three inputs: width 8, depth 2, all weights in `{-1, 0, 1}`.
///
/// With `m = max(a,b)` and `n = min(a,b)` the output is
/// `(a+b−c) − σ(m−c) + σ(c−n)`, which clamps `c` into `[n, m]`.
pub fn mid_net() -> Network<BigRational> {
    let one = int(1);
    let neg = int(-1);
    // hidden 1: σ(a−b), σ(b), σ(−b), σ(c), σ(−c), σ(b−a), σ(a), σ(−a)
    let rows1: Vec<[i64; 3]> = vec![
        [1, -1, 0],
        [0, 1, 0],
        [0, -1, 0],
        [0, 0, 1],
        [0, 0, -1],
        [-1, 1, 0],
        [1, 0, 0],
        [-1, 0, 0],
    ];
    let l0 = Layer::from_rows(
        rows1.iter().map(|r| r.iter().map(|&v| int(v)).collect()).collect(),
        vec![int(0); 8],
    )
    .unwrap();
    // m − c = u1 + u2 − u3 − u4 + u5; c − n = u4 − u5 − u2 + u3 + u6;
    // a + b − c = u7 − u8 + u2 − u3 − u4 + u5
    let rows2: Vec<[i64; 8]> = vec![
        [1, 1, -1, -1, 1, 0, 0, 0],
        [0, -1, 1, 1, -1, 1, 0, 0],
        [0, 1, -1, -1, 1, 0, 1, -1],
        [0, -1, 1, 1, -1, 0, -1, 1],
    ];
    let l1 = Layer::from_rows(
        rows2.iter().map(|r| r.iter().map(|&v| int(v)).collect()).collect(),
        vec![int(0); 4],
    )
    .unwrap();
    let l2 = Layer::from_rows(vec![vec![neg, one.clone(), one, int(-1)]], vec![int(0)]).unwrap();
    Network::new(vec![l0, l1, l2], ScalarKind::Rational).unwrap()
}

/// Grid resolution and band half-width for median smoothing.
#[derive(Clone, Debug)]
pub struct SmoothingConfig {
    pub k: usize,
    pub delta: BigRational,
    pub d: usize,
    /// Allow `d > 8` despite the `3^d` width growth.
    pub allow_large: bool,
}

pub const MAX_SMOOTH_DIM: usize = 8;

impl SmoothingConfig {
    pub fn new(k: usize, delta: BigRational, d: usize) -> Result<Self> {
        let cfg = SmoothingConfig {
            k,
            delta,
            d,
            allow_large: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.d == 0 {
            return Err(Error::Precondition("K and D must be positive".into()));
        }
        if !self.delta.is_positive() || self.delta > rat(1, 3 * self.k as i64) {
            return Err(Error::Precondition(format!(
                "band half-width must lie in (0, 1/(3K)] = (0, 1/{}]",
                3 * self.k
            )));
        }
        if self.d > MAX_SMOOTH_DIM && !self.allow_large {
            return Err(Error::Budget(format!(
                "median smoothing in dimension {} needs width 3^{} times the base; set allow_large to build it anyway",
                self.d, self.d
            )));
        }
        Ok(())
    }
}

/// Membership in the band set: some coordinate lies in `(k/K − δ, k/K)` for
/// `k = 1, …, K−1`.
pub fn in_band(x: &[BigRational], k: usize, delta: &BigRational) -> bool {
    let kk = BigRational::from_integer(k.into());
    x.iter().any(|xj| {
        let scaled = xj * &kk;
        // the nearest grid line above x_j
        let above = scaled.floor() + BigRational::one();
        let idx = above.to_integer();
        if idx < 1.into() || idx > (k as i64 - 1).into() {
            return false;
        }
        let line = above / &kk;
        xj > &(&line - delta) && xj < &line
    })
}

/// Binary64 version of [`in_band`].
pub fn in_band_f64(x: &[f64], k: usize, delta: f64) -> bool {
    x.iter().any(|&xj| {
        let above = (xj * k as f64).floor() + 1.0;
        if above < 1.0 || above > (k - 1) as f64 {
            return false;
        }
        let line = above / k as f64;
        xj > line - delta && xj < line
    })
}

fn shift_layer<T: crate::scalar::Real>(d: usize, axis: usize, by: &BigRational, kind: ScalarKind) -> Layer<T> {
    let mut l = Layer::zeros(d, d);
    for i in 0..d {
        l.set(i, i, T::one());
    }
    l.v[axis] = T::from_rational(by, kind);
    l
}

/// Dense median smoothing:
/// `M_{i}(x) = mid(M_{i−1}(x − δe_i), M_{i−1}(x), M_{i−1}(x + δe_i))`,
/// width at most `3^D (N + 4)` and depth `L + 2D`.
pub fn median_smooth<T: crate::scalar::Real>(net: &Network<T>, cfg: &SmoothingConfig) -> Result<Network<T>> {
    cfg.validate()?;
    if net.input_dim() != cfg.d {
        return Err(Error::DimMismatch {
            expected: cfg.d,
            got: net.input_dim(),
        });
    }
    if net.output_dim() != 1 {
        return Err(Error::Precondition("median smoothing needs a scalar output".into()));
    }
    let kind = net.kind();
    let mid: Network<T> = mid_net().cast(kind)?;
    let mut cur = net.clone();
    for axis in 0..cfg.d {
        let minus = Network::new(vec![shift_layer(cfg.d, axis, &-cfg.delta.clone(), kind)], kind)?;
        let plus = Network::new(vec![shift_layer(cfg.d, axis, &cfg.delta, kind)], kind)?;
        let copies = vec![compose(&cur, &minus)?, cur.clone(), compose(&cur, &plus)?];
        let stacked = crate::net::stack(&copies, kind)?;
        cur = compose(&mid, &stacked)?;
    }
    Ok(cur)
}

/// Structured median smoothing of a circuit. Copies share the inner leaves;
/// only the first leaves absorb the shifts. Each level joins the mid network
/// through an identity bottleneck, so depth grows by 3 per coordinate.
pub fn median_smooth_circuit<T: crate::scalar::Real>(c: &Circuit<T>, cfg: &SmoothingConfig) -> Result<Circuit<T>> {
    cfg.validate()?;
    if c.input_dim() != cfg.d || c.output_dim() != 1 {
        return Err(Error::Precondition(
            "median smoothing needs a D-input scalar circuit".into(),
        ));
    }
    let kind = c.kind();
    let mid = std::sync::Arc::new(mid_net().cast::<T>(kind)?);
    let mut cur = c.clone();
    for axis in 0..cfg.d {
        let minus = shift_layer(cfg.d, axis, &-cfg.delta.clone(), kind);
        let plus = shift_layer(cfg.d, axis, &cfg.delta, kind);
        let fan = Circuit::fan(
            vec![cur.after_affine(&minus)?, cur.clone(), cur.after_affine(&plus)?],
            None,
        )?;
        cur = Circuit::chain(vec![fan, Circuit::shared(mid.clone())])?;
    }
    Ok(cur)
}
