//! Exact point fitting: project the samples to a line, truncate, pack groups
//! of truncated positions and labels into ternary codes, then unpack them
//! one point at a time and fire a gate only at the matching position.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bitcodec::{bit_decode_net, block_encode};
use crate::error::{Error, Result};
use crate::net::{compose, relu_pass, scaling_chain, select, side_by_side, Layer, Network, SizeReport};
use crate::pwl::{bump_net, pwl_net_multi};
use crate::scalar::{int, pow2, ScalarKind};

/// Multiplicative slack allowed between measured sizes and the budget.
pub const BUDGET_CONSTANT: f64 = 8.0;

/// Labeled points in `[0,1]^D` with labels below `2^r`.
#[derive(Clone, Debug, PartialEq)]
pub struct MemorizationInstance {
    pub dim: usize,
    pub r: u32,
    pub xs: Vec<Vec<BigRational>>,
    pub ys: Vec<u64>,
    /// Minimum pairwise ∞-distance.
    pub delta: BigRational,
}

#[derive(Serialize, Deserialize)]
struct SampleDoc {
    x: Vec<Value>,
    y: u64,
}

#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    #[serde(rename = "D")]
    dim: usize,
    r: u32,
    samples: Vec<SampleDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<String>,
}

fn coord(v: &Value) -> Result<BigRational> {
    match v {
        Value::Number(n) => {
            let f = n.as_f64().ok_or_else(|| Error::ScalarParse(n.to_string()))?;
            BigRational::from_float(f).ok_or_else(|| Error::ScalarParse(n.to_string()))
        }
        Value::String(s) => crate::scalar::parse_rational(s).ok_or_else(|| Error::ScalarParse(s.clone())),
        other => Err(Error::ScalarParse(other.to_string())),
    }
}

fn linf(a: &[BigRational], b: &[BigRational]) -> BigRational {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(BigRational::zero(), |m, d| if d > m { d } else { m })
}

fn min_pairwise(xs: &[Vec<BigRational>]) -> Option<BigRational> {
    let mut best: Option<BigRational> = None;
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let d = linf(&xs[i], &xs[j]);
            if best.as_ref().is_none_or(|b| d < *b) {
                best = Some(d);
            }
        }
    }
    best
}

impl MemorizationInstance {
    /// Validates the points and labels; `delta` is the measured separation.
    pub fn new(dim: usize, r: u32, xs: Vec<Vec<BigRational>>, ys: Vec<u64>) -> Result<Self> {
        if dim == 0 || xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::InvalidArgument("need D ≥ 1 and one label per point".into()));
        }
        if r == 0 || r > 62 {
            return Err(Error::InvalidArgument(format!("label width r={r} outside 1..=62")));
        }
        for (j, x) in xs.iter().enumerate() {
            if x.len() != dim {
                return Err(Error::DimMismatch { expected: dim, got: x.len() });
            }
            if x.iter().any(|c| c.is_negative() || *c > BigRational::one()) {
                return Err(Error::Precondition(format!("point {j} leaves [0,1]^D")));
            }
        }
        if let Some(y) = ys.iter().find(|&&y| y >> r != 0) {
            return Err(Error::Precondition(format!("label {y} does not fit in {r} bits")));
        }
        let delta = match min_pairwise(&xs) {
            Some(d) if d.is_zero() => return Err(Error::Precondition("duplicate point".into())),
            Some(d) => d,
            None => BigRational::one(),
        };
        Ok(MemorizationInstance { dim, r, xs, ys, delta })
    }

    /// Declares a separation `delta` no larger than the measured one, so the
    /// construction is sized for it.
    pub fn with_delta(mut self, delta: BigRational) -> Result<Self> {
        if !delta.is_positive() || delta > self.delta {
            return Err(Error::Precondition(format!(
                "declared separation {delta} exceeds measured {}",
                self.delta
            )));
        }
        self.delta = delta;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// `R = 2 J² D / δ`.
    pub fn ratio(&self) -> BigRational {
        let j = self.len() as i64;
        int(2 * j * j * self.dim as i64) / &self.delta
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: InstanceDoc = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        let mut xs = Vec::with_capacity(doc.samples.len());
        let mut ys = Vec::with_capacity(doc.samples.len());
        for s in &doc.samples {
            xs.push(s.x.iter().map(coord).collect::<Result<Vec<_>>>()?);
            ys.push(s.y);
        }
        let inst = Self::new(doc.dim, doc.r, xs, ys)?;
        match &doc.delta {
            Some(d) => {
                let d = crate::scalar::parse_rational(d).ok_or_else(|| Error::ScalarParse(d.clone()))?;
                inst.with_delta(d)
            }
            None => Ok(inst),
        }
    }

    pub fn to_json(&self) -> String {
        let doc = InstanceDoc {
            dim: self.dim,
            r: self.r,
            samples: self
                .xs
                .iter()
                .zip(&self.ys)
                .map(|(x, &y)| SampleDoc {
                    x: x.iter().map(|c| Value::String(c.to_string())).collect(),
                    y,
                })
                .collect(),
            delta: Some(self.delta.to_string()),
        };
        serde_json::to_string_pretty(&doc).expect("instance documents serialize")
    }
}

/// Smallest `k` with `2^k ≥ q` for `q > 0`.
pub fn ceil_log2(q: &BigRational) -> i64 {
    let mut k = (q.numer().bits() as i64) - (q.denom().bits() as i64) - 1;
    while pow2(k) < *q {
        k += 1;
    }
    while k > i64::MIN + 1 && pow2(k - 1) >= *q {
        k -= 1;
    }
    k
}

#[derive(Clone, Debug)]
pub struct ProjectionResult {
    /// Unit direction as sampled.
    pub u: Vec<f64>,
    /// Dyadic rounding of `u/√D`, shrunk so that `‖ũ‖₁ ≤ 1 − 2^{-8}`.
    pub u_scaled: Vec<BigRational>,
    /// `min_{i≠j} |ũᵀ(x_i − x_j)|`; `None` for a single point.
    pub achieved_gap: Option<BigRational>,
    pub tries: usize,
}

fn dot(u: &[BigRational], x: &[BigRational]) -> BigRational {
    u.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Samples Gaussian directions until the projected gap reaches `1/R` with
/// `R = 2 J² D / δ`, `δ` the measured minimum ∞-distance.
pub fn separating_direction(points: &[Vec<BigRational>], max_tries: usize, seed: u64) -> Result<ProjectionResult> {
    let delta = min_pairwise(points);
    if delta.as_ref().is_some_and(Zero::is_zero) {
        return Err(Error::Precondition("points must be pairwise distinct".into()));
    }
    separating_direction_for(points, delta, max_tries, seed)
}

/// As [`separating_direction`] with a known lower bound `delta` on the
/// pairwise ∞-distance (`None` for a single point).
pub fn separating_direction_for(
    points: &[Vec<BigRational>],
    delta: Option<BigRational>,
    max_tries: usize,
    seed: u64,
) -> Result<ProjectionResult> {
    let d = points.first().map(Vec::len).unwrap_or(0);
    if d == 0 {
        return Err(Error::InvalidArgument("need at least one nonempty point".into()));
    }
    let j = points.len();
    let delta = if j > 1 { delta } else { None };
    let target = delta
        .as_ref()
        .map(|dl| dl / int(2 * (j * j * d) as i64));
    let prec = match &target {
        Some(t) => (-ceil_log2(t)).max(0) + 24,
        None => 24,
    };
    let shrink = 1.0 - 2f64.powi(-8);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for tries in 1..=max_tries.max(1) {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let u: Vec<f64> = g.iter().map(|v| v / norm).collect();
        let scale = pow2(prec);
        let u_scaled: Vec<BigRational> = u
            .iter()
            .map(|&c| {
                let q = BigRational::from_float(c * shrink / (d as f64).sqrt()).unwrap();
                (q * &scale).trunc() / &scale
            })
            .collect();
        let Some(target) = &target else {
            return Ok(ProjectionResult { u, u_scaled, achieved_gap: None, tries });
        };
        let proj: Vec<BigRational> = points.iter().map(|x| dot(&u_scaled, x)).collect();
        let mut sorted = proj.clone();
        sorted.sort();
        let gap = sorted.windows(2).map(|w| &w[1] - &w[0]).min().unwrap();
        if gap >= *target {
            return Ok(ProjectionResult { u, u_scaled, achieved_gap: Some(gap), tries });
        }
    }
    Err(Error::Exhausted {
        tries: max_tries,
        what: "no direction separated the points; retry with another seed".into(),
    })
}

/// Derived sizes of the construction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MemoPlan {
    /// Digits read per decoding layer.
    pub digits_per_layer: u32,
    /// Points per group.
    pub group_size: usize,
    pub groups: usize,
    /// Bits per packed value.
    pub code_bits: u32,
    /// Truncation bits.
    pub trunc_bits: u32,
    pub s: u32,
    pub r: u32,
}

impl MemoPlan {
    pub fn new(j: usize, n_budget: usize, l_budget: usize, s: u32, r: u32) -> Result<Self> {
        if n_budget == 0 || l_budget == 0 {
            return Err(Error::InvalidArgument("width and depth budgets must be ≥ 1".into()));
        }
        let cap = (n_budget as u128).pow(2) * (l_budget as u128).pow(2);
        if j as u128 > cap {
            return Err(Error::Budget(format!("{j} points exceed N²L² = {cap}")));
        }
        let mut n = 0u32;
        while 3usize.pow(n + 1) <= n_budget {
            n += 1;
        }
        let n = n.max(1);
        let nl = ((n_budget * l_budget).max(2)) as f64;
        let lp = (l_budget as f64 * (n as f64 / nl.log2()).sqrt()).ceil().max(1.0) as usize;
        let lp = lp.min(j.max(1));
        let trunc_bits = s + 2;
        Ok(MemoPlan {
            digits_per_layer: n,
            group_size: lp,
            groups: j.div_ceil(lp).max(1),
            code_bits: r.max(trunc_bits),
            trunc_bits,
            s,
            r,
        })
    }

    /// Hidden layers of the built network for depth budget `l`.
    pub fn depth(&self, l: usize) -> usize {
        1 + self.group_size * (self.code_bits.div_ceil(self.digits_per_layer) as usize + 2) + l
    }
}

/// Budget from the size statement: width `N`, depth
/// `L + L(√log L + (s+r)/√log NL)/√log N`, magnitude `N + 2^{(r + log R)/L}`.
#[derive(Clone, Debug, Serialize)]
pub struct BudgetReport {
    pub measured: SizeReport,
    pub width_budget: f64,
    pub depth_budget: f64,
    pub magnitude_budget: f64,
    pub constant: f64,
    pub plan: MemoPlan,
    pub within: bool,
}

pub fn budget_report(measured: SizeReport, plan: MemoPlan, n: usize, l: usize, log_ratio: f64) -> BudgetReport {
    let lg = |v: f64| v.max(2.0).log2();
    let (nf, lf) = (n as f64, l as f64);
    let sr = (plan.s + plan.r) as f64;
    let depth_budget = lf + lf * ((lf.log2()).sqrt() + sr / lg(nf * lf).sqrt()) / lg(nf).sqrt();
    let magnitude_budget = nf + 2f64.powf((plan.r as f64 + log_ratio) / lf);
    let c = BUDGET_CONSTANT;
    let within = (measured.width as f64) <= c * nf
        && (measured.depth as f64) <= c * depth_budget
        && measured.max_magnitude.log2() <= c * magnitude_budget.log2();
    BudgetReport {
        measured,
        width_budget: nf,
        depth_budget,
        magnitude_budget,
        constant: c,
        plan,
        within,
    }
}

fn truncate(x: &BigRational, bits: u32) -> BigRational {
    let scale = pow2(bits as i64);
    (x * &scale).floor() / scale
}

/// Depth-1 head: `z -> (z, U(z), W_1(z), …, W_A(z), 0, …, 0)`, every code
/// constant on each group.
fn code_lookup(bounds: &[(BigRational, BigRational)], codes: &[Vec<BigRational>]) -> Result<Network<BigRational>> {
    let outs = codes.len();
    let mut xs = Vec::new();
    let mut ys: Vec<Vec<BigRational>> = vec![Vec::new(); outs];
    for (g, (a, b)) in bounds.iter().enumerate() {
        let reps = if b > a { 2 } else { 1 };
        xs.push(a.clone());
        if reps == 2 {
            xs.push(b.clone());
        }
        for (k, col) in codes.iter().enumerate() {
            for _ in 0..reps {
                ys[k].push(col[g].clone());
            }
        }
    }
    if xs.len() == 1 {
        xs.push(&xs[0] + int(1));
        for y in ys.iter_mut() {
            y.push(y[0].clone());
        }
    }
    let lk = pwl_net_multi(&xs, &ys)?;
    let (a, b) = (&lk.layers()[0], &lk.layers()[1]);
    let units = a.rows;
    let mut l0 = Layer::zeros(units + 1, 1);
    for u in 0..units {
        l0.set(u, 0, a.at(u, 0).clone());
        l0.v[u] = a.v[u].clone();
    }
    l0.set(units, 0, int(1));
    // codes then zero accumulators
    let mut l1 = Layer::zeros(1 + outs + outs - 1, units + 1);
    l1.set(0, units, int(1));
    for k in 0..outs {
        for u in 0..units {
            l1.set(1 + k, u, b.at(k, u).clone());
        }
        l1.v[1 + k] = b.v[k].clone();
    }
    Network::new(vec![l0, l1], ScalarKind::Rational)
}

/// One matching step on the unpacked state
/// `(z, x̂, U, ŷ_1, W_1, …, ŷ_A, W_A, acc_1, …, acc_A)`, returning
/// `(z, U, W_1, …, W_A, acc_a + σ(2^{-s} ŷ_a + bump(z − x̂) − 2^{-s}))`.
fn match_step(s: u32, labels: usize) -> Result<Network<BigRational>> {
    let bump = bump_net(s)?;
    let (a, b) = (&bump.layers()[0], &bump.layers()[1]);
    let k = a.rows;
    let la = labels;
    let d_in = 3 + 3 * la;
    // inputs other than x̂ pass through single units, in input order
    let keep: Vec<usize> = (0..d_in).filter(|&i| i != 1).collect();
    let mut l0 = Layer::zeros(k + keep.len(), d_in);
    for u in 0..k {
        l0.set(u, 0, a.at(u, 0).clone());
        l0.set(u, 1, -a.at(u, 0).clone());
        l0.v[u] = a.v[u].clone();
    }
    for (i, &col) in keep.iter().enumerate() {
        l0.set(k + i, col, int(1));
    }
    let unit = |col: usize| k + keep.iter().position(|&c| c == col).unwrap();
    let h = pow2(-(s as i64));
    // hidden 2: z, U, W_a, acc_a, gate_a
    let width2 = 2 + 3 * la;
    let mut l1 = Layer::zeros(width2, k + keep.len());
    l1.set(0, unit(0), int(1));
    l1.set(1, unit(2), int(1));
    for q in 0..la {
        l1.set(2 + q, unit(4 + 2 * q), int(1));
        l1.set(2 + la + q, unit(3 + 2 * la + q), int(1));
        let g = 2 + 2 * la + q;
        for u in 0..k {
            l1.set(g, u, b.at(0, u).clone());
        }
        l1.set(g, unit(3 + 2 * q), h.clone());
        l1.v[g] = &b.v[0] - &h;
    }
    let mut l2 = Layer::zeros(2 + 2 * la, width2);
    for i in 0..2 + 2 * la {
        l2.set(i, i, int(1));
    }
    for q in 0..la {
        l2.set(2 + la + q, 2 + 2 * la + q, int(1));
    }
    Network::new(vec![l0, l1, l2], ScalarKind::Rational)
}

/// The rational part of the memorizer: output `a` is `2^{-(s+r)} y_{j,a}` at `x_j`.
fn memorize_core(xs: &[BigRational], ys: &[Vec<u64>], plan: &MemoPlan) -> Result<Network<BigRational>> {
    let lp = plan.group_size;
    let c = plan.code_bits;
    let la = ys[0].len();
    let total = plan.groups * lp;
    let mut hats: Vec<BigRational> = xs.iter().map(|x| truncate(x, plan.trunc_bits)).collect();
    hats.resize(total, BigRational::zero());
    let scale = pow2(-(plan.r as i64));
    let mut bounds = Vec::with_capacity(plan.groups);
    let mut codes = vec![Vec::with_capacity(plan.groups); 1 + la];
    for m in 0..plan.groups {
        let lo = m * lp;
        let hi = ((m + 1) * lp).min(xs.len());
        bounds.push((xs[lo].clone(), xs[hi - 1].clone()));
        codes[0].push(block_encode(&hats[lo..lo + lp], c)?);
        for q in 0..la {
            let vals: Vec<BigRational> = (lo..lo + lp)
                .map(|j| match ys.get(j) {
                    Some(y) => int(y[q] as i64) * &scale,
                    None => BigRational::zero(),
                })
                .collect();
            codes[1 + q].push(block_encode(&vals, c)?);
        }
    }
    let mut net = code_lookup(&bounds, &codes)?;
    let decode = bit_decode_net(plan.digits_per_layer, c)?;
    let pass = relu_pass::<BigRational>(1, decode.depth(), ScalarKind::Rational);
    let mut parts = vec![pass.clone()];
    parts.extend(std::iter::repeat_n(decode, 1 + la));
    parts.extend(std::iter::repeat_n(pass, la));
    let unpack = side_by_side(&parts)?;
    let step = match_step(plan.s, la)?;
    for _ in 0..lp {
        net = compose(&unpack, &net)?;
        net = compose(&step, &net)?;
    }
    let accs: Vec<usize> = (2 + la..2 + 2 * la).collect();
    compose(&select(2 + 2 * la, &accs, ScalarKind::Rational), &net)
}

fn check_labels(ys: &[Vec<u64>], r: u32) -> Result<()> {
    if r == 0 || r > 62 {
        return Err(Error::InvalidArgument(format!("label width r={r} outside 1..=62")));
    }
    let width = ys.first().map_or(0, Vec::len);
    if width == 0 || ys.iter().any(|y| y.len() != width) {
        return Err(Error::InvalidArgument("every point needs the same nonzero number of labels".into()));
    }
    match ys.iter().flatten().find(|&&y| y >> r != 0) {
        Some(y) => Err(Error::Precondition(format!("label {y} does not fit in {r} bits"))),
        None => Ok(()),
    }
}

/// Sorts the points and checks `[0,1)` membership and `2^{-s}` separation.
fn sorted_points(xs: &[BigRational], ys: &[Vec<u64>], s: u32) -> Result<(Vec<BigRational>, Vec<Vec<u64>>)> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::InvalidArgument("need one label per point and at least one point".into()));
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].cmp(&xs[b]));
    let sx: Vec<BigRational> = order.iter().map(|&i| xs[i].clone()).collect();
    let sy: Vec<Vec<u64>> = order.iter().map(|&i| ys[i].clone()).collect();
    if sx[0].is_negative() || sx[sx.len() - 1] >= BigRational::one() {
        return Err(Error::Precondition("points must lie in [0,1)".into()));
    }
    let sep = pow2(-(s as i64));
    if sx.windows(2).any(|w| &w[1] - &w[0] < sep) {
        return Err(Error::Precondition(format!("points closer than 2^-{s}")));
    }
    Ok((sx, sy))
}

fn finish<T: crate::scalar::Real>(core: &Network<BigRational>, plan: &MemoPlan, l: usize, kind: ScalarKind) -> Result<Network<T>> {
    let chain = scaling_chain::<T>((plan.s + plan.r) as i64, l, kind)?;
    let la = core.output_dim();
    let scale = if la == 1 { chain } else { side_by_side(&vec![chain; la])? };
    compose(&scale, &core.cast::<T>(kind)?)
}

/// Network with `φ(x_j) = y_j` for separated points `x_j ∈ [0,1)` and labels
/// below `2^r`. In rational mode the depth budget `l` must divide `s + r`.
pub fn memorize_1d<T: crate::scalar::Real>(
    xs: &[BigRational],
    ys: &[u64],
    n: usize,
    l: usize,
    s: u32,
    r: u32,
    kind: ScalarKind,
) -> Result<(Network<T>, BudgetReport)> {
    let ys: Vec<Vec<u64>> = ys.iter().map(|&y| vec![y]).collect();
    memorize_1d_multi(xs, &ys, n, l, s, r, kind)
}

/// [`memorize_1d`] with several labels per point, one output each. The
/// labels share the position decoder.
pub fn memorize_1d_multi<T: crate::scalar::Real>(
    xs: &[BigRational],
    ys: &[Vec<u64>],
    n: usize,
    l: usize,
    s: u32,
    r: u32,
    kind: ScalarKind,
) -> Result<(Network<T>, BudgetReport)> {
    check_labels(ys, r)?;
    if s == 0 {
        return Err(Error::InvalidArgument("separation exponent must be ≥ 1".into()));
    }
    let (sx, sy) = sorted_points(xs, ys, s)?;
    let plan = MemoPlan::new(sx.len(), n, l, s, r)?;
    let core = memorize_core(&sx, &sy, &plan)?;
    let net = finish::<T>(&core, &plan, l, kind)?;
    let report = budget_report(net.size_report(), plan, n, l, (s - 1) as f64);
    Ok((net, report))
}

/// Memorizer for points in `[0,1]^D`: a separating projection
/// `z = 1/2 + ũᵀx/2` followed by [`memorize_1d`] with `s = ⌈log R⌉ + 1`.
pub fn memorize_nd<T: crate::scalar::Real>(
    inst: &MemorizationInstance,
    n: usize,
    l: usize,
    seed: u64,
    kind: ScalarKind,
) -> Result<(Network<T>, BudgetReport)> {
    let ys: Vec<Vec<u64>> = inst.ys.iter().map(|&y| vec![y]).collect();
    memorize_nd_multi(&inst.xs, &inst.delta, &ys, inst.r, n, l, seed, kind)
}

/// Multi-label [`memorize_nd`] for points `xs` with pairwise ∞-distance at
/// least `delta` (not re-checked).
#[allow(clippy::too_many_arguments)]
pub fn memorize_nd_multi<T: crate::scalar::Real>(
    xs: &[Vec<BigRational>],
    delta: &BigRational,
    ys: &[Vec<u64>],
    r: u32,
    n: usize,
    l: usize,
    seed: u64,
    kind: ScalarKind,
) -> Result<(Network<T>, BudgetReport)> {
    check_labels(ys, r)?;
    let j = xs.len();
    let dim = xs.first().map_or(0, Vec::len);
    if j == 0 || dim == 0 || j != ys.len() {
        return Err(Error::InvalidArgument("need points of positive dimension, one label row each".into()));
    }
    let cap = (n as u128).pow(2) * (l as u128).pow(2);
    if j as u128 > cap {
        return Err(Error::Budget(format!("{j} points exceed N²L² = {cap}")));
    }
    let ratio = int(2 * (j * j * dim) as i64) / delta;
    let s = (ceil_log2(&ratio) + 1).max(1) as u32;
    let proj = separating_direction_for(xs, Some(delta.clone()), 10 * j * j, seed)?;
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let zs: Vec<BigRational> = xs.iter().map(|x| &half + dot(&proj.u_scaled, x) * &half).collect();
    let (sx, sy) = sorted_points(&zs, ys, s)?;
    let plan = MemoPlan::new(j, n, l, s, r)?;
    let core = memorize_core(&sx, &sy, &plan)?;
    let row: Vec<BigRational> = proj.u_scaled.iter().map(|c| c * &half).collect();
    let project = Network::new(vec![Layer::from_rows(vec![row], vec![half])?], ScalarKind::Rational)?;
    let core = compose(&core, &project)?;
    let net = finish::<T>(&core, &plan, l, kind)?;
    let log_ratio = ratio.to_f64().map(f64::log2).unwrap_or(f64::INFINITY);
    let report = budget_report(net.size_report(), plan, n, l, log_ratio);
    Ok((net, report))
}

/// Largest absolute recall error over the instance, measured exactly.
pub fn recall_error<T: crate::scalar::Real>(net: &Network<T>, inst: &MemorizationInstance) -> Result<BigRational> {
    let mut worst = BigRational::zero();
    for (x, &y) in inst.xs.iter().zip(&inst.ys) {
        let xi: Vec<T> = x.iter().map(|c| T::from_rational(c, net.kind())).collect();
        let out = net.evaluate(&xi)?[0].to_rational()?;
        let e = (out - int(y as i64)).abs();
        if e > worst {
            worst = e;
        }
    }
    Ok(worst)
}

/// Random instance with points on the grid `δ·ℤ^D ∩ [0,1]^D`, pairwise ∞-distance ≥ δ.
pub fn random_instance(j: usize, dim: usize, delta_log2: u32, r: u32, seed: u64) -> Result<MemorizationInstance> {
    use rand::Rng;
    use std::collections::BTreeSet;
    let cells = 1u64 << delta_log2;
    if (cells as f64).powi(dim as i32) < j as f64 {
        return Err(Error::InvalidArgument("grid too small for the requested count".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut xs = Vec::with_capacity(j);
    while xs.len() < j {
        let p: Vec<u64> = (0..dim).map(|_| rng.random_range(0..cells)).collect();
        if seen.insert(p.clone()) {
            xs.push(p.iter().map(|&c| int(c as i64) * pow2(-(delta_log2 as i64))).collect());
        }
    }
    let ys = (0..j).map(|_| rng.random_range(0..(1u64 << r))).collect();
    MemorizationInstance::new(dim, r, xs, ys)
}
