//! Compositional models `f = g_ℓ ∘ … ∘ g_0` with sparse, smooth components on
//! low-dimensional sets: validation, error propagation, covering bounds for
//! enlarged sets, and the level-by-level approximator.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{geometric_grid, minkowski_slope, PointCloud};
use crate::holder::target::{finite_difference, multi_indices, PartialFn, SamplerFn, ValueFn};
use crate::holder::{holder_approx_net, plan_approx, recommended_kind, ApproxConfig, HolderTarget};
use crate::net::{Circuit, Layer};
use crate::scalar::{BigFloat, ScalarKind};

/// One component `g_ij`, evaluated on the full level input of length `D_i`
/// but declared to read only the coordinates in `support`.
#[derive(Clone)]
pub struct Component {
    pub name: String,
    pub support: Vec<usize>,
    pub s: f64,
    pub d: f64,
    value: ValueFn,
    partial: PartialFn,
}

impl std::fmt::Debug for Component {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Component")
            .field("name", &self.name)
            .field("support", &self.support)
            .field("s", &self.s)
            .field("d", &self.d)
            .finish()
    }
}

impl Component {
    /// `partial(α, z)` takes `α` over the full input, like `value`.
    pub fn new(name: &str, support: Vec<usize>, s: f64, d: f64, value: ValueFn, partial: PartialFn) -> Self {
        Component {
            name: name.to_string(),
            support,
            s,
            d,
            value,
            partial,
        }
    }

    /// Derivatives by central differences; see [`finite_difference`].
    pub fn from_value(name: &str, support: Vec<usize>, s: f64, d: f64, value: ValueFn) -> Self {
        let partial = finite_difference(value.clone());
        Component::new(name, support, s, d, value, partial)
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        (self.value)(z)
    }

    pub fn partial(&self, alpha: &[usize], z: &[f64]) -> f64 {
        if alpha.iter().all(|&a| a == 0) {
            return self.eval(z);
        }
        (self.partial)(alpha, z)
    }
}

#[derive(Clone, Debug)]
pub enum Level {
    Identity,
    Map(Vec<Component>),
}

/// A model on `M ⊆ ℝ^{D_0}` given by its sampler; `levels[i]` maps
/// `ℝ^{D_i} → ℝ^{D_{i+1}}` and the last level has one output.
#[derive(Clone)]
pub struct CompositionalSpec {
    pub input_dim: usize,
    pub levels: Vec<Level>,
    /// Range bound, also used as the ∞-Lipschitz constant of every level.
    pub c: f64,
    pub domain: SamplerFn,
    pub domain_name: String,
}

impl std::fmt::Debug for CompositionalSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CompositionalSpec")
            .field("input_dim", &self.input_dim)
            .field("levels", &self.levels)
            .field("c", &self.c)
            .field("domain", &self.domain_name)
            .finish()
    }
}

impl CompositionalSpec {
    /// `ℓ`, one less than the number of levels.
    pub fn level(&self) -> usize {
        self.levels.len().saturating_sub(1)
    }

    /// `(D_0, …, D_{ℓ+1})`.
    pub fn dims(&self) -> Vec<usize> {
        let mut out = vec![self.input_dim];
        for lv in &self.levels {
            let prev = *out.last().unwrap();
            out.push(match lv {
                Level::Identity => prev,
                Level::Map(cs) => cs.len(),
            });
        }
        out
    }

    /// Shape checks that do not need sampling.
    pub fn check_shape(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::InvalidArgument("a model needs at least one level".into()));
        }
        if !(self.c > 0.0) {
            return Err(Error::InvalidArgument("range bound C must be positive".into()));
        }
        let dims = self.dims();
        if *dims.last().unwrap() != 1 {
            return Err(Error::InvalidArgument(format!("last level must have one output, got {}", dims.last().unwrap())));
        }
        for (i, lv) in self.levels.iter().enumerate() {
            if let Level::Map(cs) = lv {
                if cs.is_empty() {
                    return Err(Error::InvalidArgument(format!("level {i} has no components")));
                }
                for (j, c) in cs.iter().enumerate() {
                    let bad = |reason: String| Error::Validation { level: i, index: j, reason };
                    if c.support.is_empty() || c.support.len() > dims[i] || c.support.iter().any(|&k| k >= dims[i]) {
                        return Err(bad(format!("support {:?} does not fit input dimension {}", c.support, dims[i])));
                    }
                    if !(c.s >= 1.0) || !(c.d > 0.0) {
                        return Err(bad("need s ≥ 1 and d > 0".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (self.domain)(rng)
    }

    /// `G_i(x) = g_i ∘ … ∘ g_0 (x)` for every `i`, starting with `x` itself.
    pub fn trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut out = vec![x.to_vec()];
        for lv in &self.levels {
            let z = out.last().unwrap();
            let next = match lv {
                Level::Identity => z.clone(),
                Level::Map(cs) => cs.iter().map(|c| c.eval(z)).collect(),
            };
            out.push(next);
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.trace(x).last().unwrap()[0]
    }

    /// Level with the largest `d/s` among components; ties go to the smaller
    /// `s`. Level 0 takes part only if `include_first`.
    pub fn hardest(&self, include_first: bool) -> Option<(usize, usize, f64, f64)> {
        let mut best: Option<(usize, usize, f64, f64)> = None;
        for (i, lv) in self.levels.iter().enumerate() {
            if i == 0 && !include_first && self.levels.len() > 1 {
                continue;
            }
            if let Level::Map(cs) = lv {
                for (j, c) in cs.iter().enumerate() {
                    let r = c.d / c.s;
                    let better = match best {
                        None => true,
                        Some((_, _, d, s)) => r > d / s + 1e-12 || ((r - d / s).abs() <= 1e-12 && c.s < s),
                    };
                    if better {
                        best = Some((i, j, c.d, c.s));
                    }
                }
            }
        }
        best
    }
}

/// Outcome of one condition check.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub level: usize,
    pub index: usize,
    pub condition: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub checks: Vec<Check>,
}

impl Diagnostics {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Relative slack for the smoothness and range checks.
pub const VALIDATION_TOL: f64 = 0.05;
/// Additive slack for the dimension check.
pub const DIMENSION_TOL: f64 = 0.35;

/// Checks sparsity (C), smoothness (S), low dimension (M) and the range
/// bound of every component on `probes` sampled inputs. The first failure is
/// returned as an error naming the component.
pub fn validate_model(spec: &CompositionalSpec, probes: usize, seed: u64) -> Result<Diagnostics> {
    let diag = diagnose(spec, probes, seed)?;
    if let Some(bad) = diag.checks.iter().find(|c| !c.passed) {
        return Err(Error::Validation {
            level: bad.level,
            index: bad.index,
            reason: format!("condition {} measured {} above {}", bad.condition, bad.value, bad.limit),
        });
    }
    Ok(diag)
}

/// [`validate_model`] without turning failures into errors.
pub fn diagnose(spec: &CompositionalSpec, probes: usize, seed: u64) -> Result<Diagnostics> {
    spec.check_shape()?;
    let probes = probes.max(8);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let traces: Vec<Vec<Vec<f64>>> = (0..probes).map(|_| spec.trace(&spec.sample(&mut rng))).collect();
    let c = spec.c;
    let mut checks = Vec::new();
    for (i, lv) in spec.levels.iter().enumerate() {
        let Level::Map(cs) = lv else { continue };
        for (j, comp) in cs.iter().enumerate() {
            let inputs: Vec<&Vec<f64>> = traces.iter().map(|t| &t[i]).collect();
            let mut push = |condition: &str, value: f64, limit: f64| {
                checks.push(Check {
                    level: i,
                    index: j,
                    condition: condition.to_string(),
                    value,
                    limit,
                    passed: value <= limit,
                });
            };
            // (C): moving coordinates outside the support must not matter
            let mut moved: f64 = 0.0;
            for z in &inputs {
                let base = comp.eval(z);
                let mut w = (*z).clone();
                for (k, v) in w.iter_mut().enumerate() {
                    if !comp.support.contains(&k) {
                        *v = rng.random_range(-c..=c);
                    }
                }
                moved = moved.max((comp.eval(&w) - base).abs() / base.abs().max(1.0));
            }
            push("C", moved, 1e-12);
            // range
            let range = inputs.iter().map(|z| comp.eval(z).abs()).fold(0.0, f64::max);
            push("range", range, c * (1.0 + VALIDATION_TOL));
            // (S): bounded derivatives up to ⌊s⌋ and a Hölder quotient of the top ones
            let order = comp.s.floor() as usize;
            let frac = comp.s - order as f64;
            let k = comp.support.len();
            let mut deriv: f64 = 0.0;
            let mut quotient: f64 = 0.0;
            for z in &inputs {
                for a in multi_indices(k, order) {
                    let mut full = vec![0usize; z.len()];
                    for (slot, &coord) in comp.support.iter().enumerate() {
                        full[coord] = a[slot];
                    }
                    let v = comp.partial(&full, z);
                    deriv = deriv.max(v.abs());
                    if frac > 0.0 && a.iter().sum::<usize>() == order {
                        for h in [1e-2, 1e-3] {
                            let mut w = (*z).clone();
                            for &coord in &comp.support {
                                w[coord] += h * rng.random_range(-1.0..=1.0);
                            }
                            let dist = comp.support.iter().map(|&q| (w[q] - z[q]).abs()).fold(0.0, f64::max);
                            if dist > 0.0 {
                                let q = (comp.partial(&full, &w) - v).abs() / dist.powf(frac);
                                quotient = quotient.max(q);
                            }
                        }
                    }
                }
            }
            push("S", deriv.max(quotient), c * (1.0 + VALIDATION_TOL));
            // (M): covering slope of the projected inputs
            let pts: Vec<Vec<f64>> = inputs.iter().map(|z| comp.support.iter().map(|&q| z[q]).collect()).collect();
            let dim = projected_dimension(&pts)?;
            push("M", dim, comp.d + DIMENSION_TOL);
        }
    }
    Ok(Diagnostics { checks })
}

/// Covering slope of a point set over scales from a quarter of its extent
/// down by a factor 40.
pub fn projected_dimension(points: &[Vec<f64>]) -> Result<f64> {
    let cloud = PointCloud::new(points.to_vec())?;
    let d = cloud.dim();
    let extent = (0..d)
        .map(|k| {
            let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[k]), b.max(p[k])));
            hi - lo
        })
        .fold(0.0, f64::max);
    if extent <= 0.0 {
        return Ok(0.0);
    }
    let grid = geometric_grid(extent / 4.0, extent / 160.0, 6);
    Ok(minkowski_slope(&cloud, &grid)?.slope.max(0.0))
}

/// Telescoped and coarse bounds on the propagated error.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropagationBound {
    /// `Σ_{i=1}^ℓ C^{ℓ−i} max_j ε_ij`.
    pub telescoped: f64,
    /// `ℓ·max{C^{ℓ−1}, 1}·max_{ij} ε_ij`.
    pub coarse: f64,
}

/// `eps[i-1]` holds the component errors of level `i = 1..=ℓ`.
pub fn propagate_errors(l: usize, c: f64, eps: &[Vec<f64>]) -> Result<PropagationBound> {
    if eps.len() != l {
        return Err(Error::DimMismatch { expected: l, got: eps.len() });
    }
    if eps.iter().flatten().any(|&e| !(e >= 0.0)) {
        return Err(Error::InvalidArgument("component errors must be nonnegative".into()));
    }
    let maxes: Vec<f64> = eps.iter().map(|row| row.iter().cloned().fold(0.0, f64::max)).collect();
    let telescoped = maxes
        .iter()
        .enumerate()
        .map(|(k, m)| c.powi((l - 1 - k) as i32) * m)
        .sum();
    let top = maxes.iter().cloned().fold(0.0, f64::max);
    let coarse = l as f64 * c.powi(l as i32 - 1).max(1.0) * top;
    Ok(PropagationBound { telescoped, coarse })
}

/// Constant in [`enlargement_cover_bound`].
pub const ENLARGEMENT_CONSTANT: f64 = 2.0;

/// `N_A·⌈1 + ε/η⌉^m` times [`ENLARGEMENT_CONSTANT`].
pub fn enlargement_cover_bound(cover_of_a: usize, eps: f64, eta: f64, m: usize) -> Result<f64> {
    if cover_of_a == 0 || !(eta > 0.0) || !(eps >= 0.0) || m == 0 {
        return Err(Error::InvalidArgument("need N_A ≥ 1, η > 0, ε ≥ 0, m ≥ 1".into()));
    }
    Ok(cover_of_a as f64 * (1.0 + eps / eta).ceil().powi(m as i32) * ENLARGEMENT_CONSTANT)
}

/// Random ∞-Lipschitz maps with constant `c`, composed level by level and
/// perturbed by at most `eps[i][j]`; returns the largest observed output
/// deviation over `points` inputs together with the bound.
pub fn simulate_propagation(
    dims: &[usize],
    c: f64,
    eps: &[Vec<f64>],
    points: usize,
    seed: u64,
) -> Result<(f64, PropagationBound)> {
    let l = dims.len() - 1;
    if eps.len() != l || eps.iter().zip(&dims[1..]).any(|(row, &d)| row.len() != d) {
        return Err(Error::InvalidArgument("one error per component and level".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // g(z) = c Σ_k w_k tanh(z_{q_k} + b_k) with Σ|w_k| ≤ 1
    struct Unit {
        terms: Vec<(usize, f64, f64)>,
        wobble: (f64, f64),
    }
    let mut levels: Vec<Vec<Unit>> = Vec::new();
    for i in 0..l {
        let mut row = Vec::new();
        for _ in 0..dims[i + 1] {
            let n = rng.random_range(1..=3);
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let total: f64 = raw.iter().map(|w: &f64| w.abs()).sum::<f64>().max(1e-9);
            let scale = rng.random_range(0.5..=1.0) / total;
            let terms = raw
                .iter()
                .map(|w| (rng.random_range(0..dims[i]), w * scale, rng.random_range(-1.0..1.0)))
                .collect();
            row.push(Unit {
                terms,
                wobble: (rng.random_range(1.0..20.0), rng.random_range(0.0..6.3)),
            });
        }
        levels.push(row);
    }
    let apply = |z: &[f64], i: usize, noisy: bool| -> Vec<f64> {
        levels[i]
            .iter()
            .enumerate()
            .map(|(j, u)| {
                let clean: f64 = c * u.terms.iter().map(|&(q, w, b)| w * (z[q] + b).tanh()).sum::<f64>();
                if noisy {
                    clean + eps[i][j] * (u.wobble.0 * z.iter().sum::<f64>() + u.wobble.1).sin()
                } else {
                    clean
                }
            })
            .collect()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let x: Vec<f64> = (0..dims[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (mut a, mut b) = (x.clone(), x);
        for i in 0..l {
            a = apply(&a, i, false);
            b = apply(&b, i, true);
        }
        worst = worst.max(a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max));
    }
    Ok((worst, propagate_errors(l, c, eps)?))
}

/// Accuracy schedule `ε_i = ε_0 (C+1)^i`.
#[derive(Clone, Debug, Serialize)]
pub struct ErrorSchedule {
    pub eps: f64,
    pub base: f64,
    /// `ε_0, …, ε_{ℓ+1}`.
    pub targets: Vec<f64>,
}

/// `ε_0 = ε/(n(C+1)^ℓ)` with `n` the number of approximated levels (`ℓ`
/// when the first level is the identity, `ℓ+1` otherwise).
pub fn schedule(spec: &CompositionalSpec, eps: f64) -> Result<ErrorSchedule> {
    let l = spec.level();
    let approximated = spec.levels.iter().filter(|lv| matches!(lv, Level::Map(_))).count().max(1);
    let base = eps / (approximated as f64 * (spec.c + 1.0).powi(l as i32));
    let targets: Vec<f64> = (0..=l + 1).map(|i| base * (spec.c + 1.0).powi(i as i32)).collect();
    if targets[l] > 1.0 {
        return Err(Error::Precondition(format!("schedule reaches ε_ℓ = {} > 1; lower ε", targets[l])));
    }
    Ok(ErrorSchedule { eps, base, targets })
}

/// Build settings for [`compositional_net`].
#[derive(Clone, Debug)]
pub struct CompositionalConfig {
    pub depth: usize,
    pub include_first_level: bool,
    pub discovery_samples: usize,
    pub component_test_points: usize,
    pub test_points: usize,
    pub max_attempts: usize,
    pub seed: u64,
}

impl Default for CompositionalConfig {
    fn default() -> Self {
        CompositionalConfig {
            depth: 2,
            include_first_level: false,
            discovery_samples: 200_000,
            component_test_points: 200,
            test_points: 300,
            max_attempts: 4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ComponentReport {
    pub level: usize,
    pub index: usize,
    pub name: String,
    pub eps_target: f64,
    pub measured_error: f64,
    pub n: usize,
    pub l: usize,
    pub k: usize,
    pub extra_bits: u32,
    pub attempts: usize,
    pub width: usize,
    pub depth: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompositionalReport {
    pub eps: f64,
    pub c: f64,
    pub level: usize,
    pub schedule: ErrorSchedule,
    pub d_star: f64,
    pub s_star: f64,
    pub hardest: (usize, usize),
    pub n: usize,
    pub l: usize,
    pub components: Vec<ComponentReport>,
    /// Measured `δ_i = sup ‖G_i − Ĝ_i‖_∞` for `i = 0..=ℓ`.
    pub delta: Vec<f64>,
    /// Propagation bound from the measured component errors.
    pub propagated_bound: f64,
    pub final_sup_error: f64,
    pub delta_within_schedule: bool,
    pub within_eps: bool,
    pub width: usize,
    pub depth: usize,
    pub magnitude: f64,
    pub scalar: String,
    pub seconds: f64,
}

impl CompositionalReport {
    pub const CSV_HEADER: &'static str = "level,component,eps_target,measured_error,N,L,K,width,depth";

    pub fn csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for c in &self.components {
            out.push_str(&format!(
                "{},{},{:e},{:e},{},{},{},{},{}\n",
                c.level, c.index, c.eps_target, c.measured_error, c.n, c.l, c.k, c.width, c.depth
            ));
        }
        out
    }
}

fn bf(v: f64, kind: ScalarKind) -> BigFloat {
    BigFloat::from_f64(v, kind.limbs()).unwrap_or_else(|| BigFloat::zero(kind.limbs()))
}

/// Dyadic box `lo + [0, 2^q]` per coordinate containing `[min, max]`.
fn dyadic_box(min: f64, max: f64) -> (f64, f64) {
    let span = (max - min).max(1e-6);
    let mut w = 2f64.powi(span.log2().ceil() as i32);
    loop {
        let g = w / 64.0;
        let lo = (min / g).floor() * g;
        if lo + w >= max {
            return (lo, w);
        }
        w *= 2.0;
    }
}

/// The component as a target on `[0,1]^{|S|}` after `z_S = lo + w·u`, with
/// inputs drawn from `π_S G_{i−1}(M)` plus uniform jitter of radius `jitter`.
fn component_target(
    spec: &Arc<CompositionalSpec>,
    level: usize,
    index: usize,
    jitter: f64,
    seed: u64,
) -> Result<(HolderTarget, Vec<(f64, f64)>)> {
    let Level::Map(cs) = &spec.levels[level] else {
        return Err(Error::InvalidArgument("identity levels are not approximated".into()));
    };
    let comp = cs[index].clone();
    let width_in = spec.dims()[level];
    // bounding box from a pilot sample
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let pilot: Vec<Vec<f64>> = (0..4000).map(|_| spec.trace(&spec.sample(&mut rng))[level].clone()).collect();
    let boxes: Vec<(f64, f64)> = comp
        .support
        .iter()
        .map(|&q| {
            let (a, b) = pilot.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), z| (a.min(z[q]), b.max(z[q])));
            let pad = jitter + 0.02 * (b - a) + 1e-9;
            dyadic_box(a - pad, b + pad)
        })
        .collect();
    let support = comp.support.clone();
    let embed = {
        let boxes = boxes.clone();
        let support = support.clone();
        move |u: &[f64]| -> Vec<f64> {
            let mut z = vec![0.0; width_in];
            for ((&q, &(lo, w)), &v) in support.iter().zip(&boxes).zip(u) {
                z[q] = lo + w * v;
            }
            z
        }
    };
    let embed = Arc::new(embed);
    let (c1, e1) = (comp.clone(), embed.clone());
    let value: ValueFn = Arc::new(move |u: &[f64]| c1.eval(&e1(u)));
    let (c2, e2, b2, s2) = (comp.clone(), embed.clone(), boxes.clone(), support.clone());
    let partial: PartialFn = Arc::new(move |a: &[usize], u: &[f64]| {
        let mut full = vec![0usize; width_in];
        let mut scale = 1.0;
        for ((&q, &(_, w)), &k) in s2.iter().zip(&b2).zip(a) {
            full[q] = k;
            scale *= w.powi(k as i32);
        }
        c2.partial(&full, &e2(u)) * scale
    });
    let (sp, b3, s3) = (spec.clone(), boxes.clone(), support.clone());
    let sampler: SamplerFn = Arc::new(move |rng: &mut ChaCha8Rng| {
        let z = sp.trace(&sp.sample(rng))[level].clone();
        s3.iter()
            .zip(&b3)
            .map(|(&q, &(lo, w))| {
                let v = z[q] + rng.random_range(-jitter..=jitter);
                ((v - lo) / w).clamp(0.0, 1.0)
            })
            .collect()
    });
    let big_w = boxes.iter().map(|b| b.1).fold(1.0, f64::max);
    let target = HolderTarget::new(
        &format!("{}[{level},{index}]", comp.name),
        support.len(),
        comp.s,
        spec.c * big_w.powf(comp.s),
        comp.d,
        value,
        partial,
        sampler,
    )?;
    Ok((target, boxes))
}

/// Approximates every component on its enlarged domain to its scheduled
/// accuracy and composes the levels. All parts share one extended-precision
/// scalar type.
pub fn compositional_net(
    spec: &CompositionalSpec,
    eps: f64,
    cfg: &CompositionalConfig,
) -> Result<(Circuit<BigFloat>, CompositionalReport)> {
    let start = Instant::now();
    spec.check_shape()?;
    let sched = schedule(spec, eps)?;
    let spec_arc = Arc::new(spec.clone());
    let dims = spec.dims();
    let (hi, hj, d_star, s_star) = spec.hardest(cfg.include_first_level).unwrap_or((0, 0, 1.0, 1.0));
    let l_budget = cfg.depth.max(1);
    let nl = sched.base.powf(-d_star / s_star).sqrt();
    let n_budget = ((nl / l_budget as f64).ceil() as usize).max(1);

    struct Built {
        level: usize,
        index: usize,
        circuit: Circuit<BigFloat>,
        boxes: Vec<(f64, f64)>,
        support: Vec<usize>,
    }
    let mut built: Vec<Built> = Vec::new();
    let mut reports = Vec::new();
    let mut bits = 128u32;
    for (i, lv) in spec.levels.iter().enumerate() {
        let Level::Map(cs) = lv else { continue };
        let target_eps = sched.targets[i];
        for j in 0..cs.len() {
            let seed = cfg.seed.wrapping_add(1000 * i as u64 + j as u64);
            let (target, boxes) = component_target(&spec_arc, i, j, target_eps, seed)?;
            let mut acfg = ApproxConfig {
                discovery_samples: cfg.discovery_samples,
                test_points: cfg.component_test_points,
                seed,
                ..ApproxConfig::new(n_budget, l_budget)
            };
            let mut attempt = 0;
            let (circuit, rep) = loop {
                attempt += 1;
                let plan = plan_approx(&target, &acfg)?;
                let (circ, rep) = holder_approx_net::<BigFloat>(&target, &acfg, recommended_kind(&plan))?;
                // keep a safety factor so composed errors stay inside the schedule
                if rep.measured_sup_error <= 0.5 * target_eps {
                    break (circ, rep);
                }
                if attempt >= cfg.max_attempts {
                    return Err(Error::Budget(format!(
                        "component ({i},{j}) reached {} against accuracy {} after {attempt} attempts",
                        rep.measured_sup_error, target_eps
                    )));
                }
                let taylor = rep.taylor_constant * (rep.k as f64).powf(-rep.s);
                if taylor > 0.25 * target_eps {
                    acfg.l *= 2;
                } else {
                    let ratio = rep.measured_sup_error / (0.25 * target_eps);
                    acfg.extra_bits += ratio.log2().ceil().max(1.0) as u32;
                }
            };
            bits = bits.max(match circuit.kind() {
                ScalarKind::BigFloat { bits } => bits,
                _ => 128,
            });
            reports.push(ComponentReport {
                level: i,
                index: j,
                name: target.name.clone(),
                eps_target: target_eps,
                measured_error: rep.measured_sup_error,
                n: acfg.n,
                l: acfg.l,
                k: rep.k,
                extra_bits: acfg.extra_bits,
                attempts: attempt,
                width: rep.width,
                depth: rep.depth,
            });
            built.push(Built {
                level: i,
                index: j,
                circuit,
                boxes,
                support: cs[j].support.clone(),
            });
        }
    }
    let kind = ScalarKind::bigfloat(bits);
    // assemble level circuits
    let mut parts: Vec<Circuit<BigFloat>> = Vec::new();
    for (i, lv) in spec.levels.iter().enumerate() {
        match lv {
            Level::Identity => {
                let d = dims[i];
                let mut id = Layer::zeros(d, d);
                for k in 0..d {
                    id.set(k, k, bf(1.0, kind));
                }
                parts.push(Circuit::affine(id, kind)?);
            }
            Level::Map(cs) => {
                let mut branches = Vec::with_capacity(cs.len());
                for b in built.iter().filter(|b| b.level == i) {
                    // u = (z_S − lo)/w
                    let k = b.support.len();
                    let mut pre = Layer::zeros(k, dims[i]);
                    for (r, (&q, &(lo, w))) in b.support.iter().zip(&b.boxes).enumerate() {
                        pre.set(r, q, bf(1.0 / w, kind));
                        pre.v[r] = bf(-lo / w, kind);
                    }
                    let c = if matches!(b.circuit.kind(), ScalarKind::BigFloat { bits: bb } if bb == bits) {
                        b.circuit.clone()
                    } else {
                        b.circuit.cast::<BigFloat>(kind)?
                    };
                    let _ = b.index;
                    branches.push(c.after_affine(&pre)?);
                }
                parts.push(Circuit::fan(branches, None)?);
            }
        }
    }
    let circuit = Circuit::chain(parts.clone())?;

    // measured δ_i over fresh samples of M
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(77));
    let l = spec.level();
    let mut delta = vec![0.0f64; l + 1];
    for _ in 0..cfg.test_points {
        let x = spec.sample(&mut rng);
        let exact = spec.trace(&x);
        let mut h: Vec<BigFloat> = x.iter().map(|&v| bf(v, kind)).collect();
        for (i, p) in parts.iter().enumerate() {
            h = p.evaluate(&h)?;
            let dev = h
                .iter()
                .zip(&exact[i + 1])
                .map(|(a, b)| (a.to_f64() - b).abs())
                .fold(0.0, f64::max);
            delta[i] = delta[i].max(if dev.is_nan() { f64::INFINITY } else { dev });
        }
    }
    let rows: Vec<Vec<f64>> = spec
        .levels
        .iter()
        .enumerate()
        .filter(|(_, lv)| matches!(lv, Level::Map(_)))
        .map(|(i, _)| reports.iter().filter(|r| r.level == i).map(|r| r.measured_error).collect())
        .collect();
    let propagated = if rows.is_empty() {
        0.0
    } else {
        propagate_errors(rows.len(), spec.c, &rows)?.telescoped
    };
    let size = circuit.size_report();
    let final_sup_error = *delta.last().unwrap();
    let report = CompositionalReport {
        eps,
        c: spec.c,
        level: l,
        delta_within_schedule: delta.iter().enumerate().all(|(i, &d)| d <= sched.targets[i + 1]),
        within_eps: final_sup_error <= eps,
        schedule: sched,
        d_star,
        s_star,
        hardest: (hi, hj),
        n: n_budget,
        l: l_budget,
        components: reports,
        delta,
        propagated_bound: propagated,
        final_sup_error,
        width: size.width,
        depth: size.depth,
        magnitude: size.max_magnitude,
        scalar: kind.to_string(),
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((circuit, report))
}

/// Named component functions for spec files.
pub const BUILTIN_COMPONENTS: &[&str] = &["square-sum", "square-diff", "quarter-diff", "product", "linear", "sin", "coordinate"];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComponentDoc {
    pub function: String,
    pub support: Vec<usize>,
    pub s: f64,
    pub d: f64,
    #[serde(default)]
    pub weights: Vec<f64>,
    #[serde(default)]
    pub bias: f64,
    #[serde(default = "one")]
    pub frequency: f64,
}

fn one() -> f64 {
    1.0
}

/// Spec file. `levels` lists components per level; the string `"identity"`
/// stands for an identity level. `domain` is `"cube"` (uniform on
/// `[0,1]^{input_dim}`) or `"curve"` (the curve of the Hölder targets, `D = 3`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpecDoc {
    pub input_dim: usize,
    pub c: f64,
    #[serde(default = "cube")]
    pub domain: String,
    pub levels: Vec<serde_json::Value>,
}

fn cube() -> String {
    "cube".into()
}

fn two_inputs(support: &[usize], name: &str) -> Result<(usize, usize)> {
    match support {
        [a, b] => Ok((*a, *b)),
        _ => Err(Error::Schema(format!("{name} reads exactly two coordinates"))),
    }
}

/// Builds a component from its file entry. Derivatives are analytic.
pub fn builtin_component(doc: &ComponentDoc) -> Result<Component> {
    let sup = doc.support.clone();
    let (s, d) = (doc.s, doc.d);
    // derivative of a function of one linear form u = Σ c_k z_k
    fn through(coefs: Vec<(usize, f64)>, outer: impl Fn(usize, f64) -> f64 + Send + Sync + 'static) -> (ValueFn, PartialFn) {
        let c1 = coefs.clone();
        let o = Arc::new(outer);
        let o1 = o.clone();
        let value: ValueFn = Arc::new(move |z: &[f64]| o1(0, c1.iter().map(|&(k, c)| c * z[k]).sum()));
        let partial: PartialFn = Arc::new(move |a: &[usize], z: &[f64]| {
            let u: f64 = coefs.iter().map(|&(k, c)| c * z[k]).sum();
            let mut factor = 1.0;
            for (k, &ak) in a.iter().enumerate() {
                if ak == 0 {
                    continue;
                }
                match coefs.iter().find(|&&(q, _)| q == k) {
                    Some(&(_, c)) => factor *= c.powi(ak as i32),
                    None => return 0.0,
                }
            }
            factor * o(a.iter().sum(), u)
        });
        (value, partial)
    }
    let square = |k: usize, u: f64| match k {
        0 => u * u,
        1 => 2.0 * u,
        2 => 2.0,
        _ => 0.0,
    };
    let (value, partial) = match doc.function.as_str() {
        "square-sum" => {
            let (a, b) = two_inputs(&sup, "square-sum")?;
            through(vec![(a, 1.0), (b, 1.0)], square)
        }
        "square-diff" => {
            let (a, b) = two_inputs(&sup, "square-diff")?;
            through(vec![(a, 1.0), (b, -1.0)], square)
        }
        "quarter-diff" => {
            let (a, b) = two_inputs(&sup, "quarter-diff")?;
            through(vec![(a, 0.25), (b, -0.25)], |k, u| match k {
                0 => u,
                1 => 1.0,
                _ => 0.0,
            })
        }
        "linear" => {
            if doc.weights.len() != sup.len() {
                return Err(Error::Schema("linear needs one weight per support coordinate".into()));
            }
            let bias = doc.bias;
            through(sup.iter().cloned().zip(doc.weights.iter().cloned()).collect(), move |k, u| match k {
                0 => u + bias,
                1 => 1.0,
                _ => 0.0,
            })
        }
        "coordinate" => {
            let [a] = sup[..] else {
                return Err(Error::Schema("coordinate reads one coordinate".into()));
            };
            through(vec![(a, 1.0)], |k, u| match k {
                0 => u,
                1 => 1.0,
                _ => 0.0,
            })
        }
        "sin" => {
            let [a] = sup[..] else {
                return Err(Error::Schema("sin reads one coordinate".into()));
            };
            let w = doc.frequency;
            let phase = doc.bias;
            through(vec![(a, 1.0)], move |k, u| w.powi(k as i32) * (w * u + phase + k as f64 * std::f64::consts::FRAC_PI_2).sin())
        }
        "product" => {
            let (a, b) = two_inputs(&sup, "product")?;
            let value: ValueFn = Arc::new(move |z: &[f64]| z[a] * z[b]);
            let partial: PartialFn = Arc::new(move |al: &[usize], z: &[f64]| {
                let others = al.iter().enumerate().any(|(k, &v)| v > 0 && k != a && k != b);
                if others || al[a] > 1 || al[b] > 1 {
                    return 0.0;
                }
                let fa = if al[a] == 1 { 1.0 } else { z[a] };
                let fb = if al[b] == 1 { 1.0 } else { z[b] };
                fa * fb
            });
            (value, partial)
        }
        other => {
            return Err(Error::Schema(format!(
                "unknown component {other:?}; builtins are {}",
                BUILTIN_COMPONENTS.join(", ")
            )))
        }
    };
    Ok(Component::new(&doc.function, sup, s, d, value, partial))
}

impl SpecDoc {
    pub fn parse(text: &str) -> Result<CompositionalSpec> {
        let doc: SpecDoc = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        doc.build()
    }

    pub fn build(&self) -> Result<CompositionalSpec> {
        let mut levels = Vec::new();
        for lv in &self.levels {
            if lv.as_str() == Some("identity") {
                levels.push(Level::Identity);
                continue;
            }
            let comps: Vec<ComponentDoc> = serde_json::from_value(lv.clone()).map_err(|e| Error::Schema(e.to_string()))?;
            levels.push(Level::Map(comps.iter().map(builtin_component).collect::<Result<Vec<_>>>()?));
        }
        let d = self.input_dim;
        let domain: SamplerFn = match self.domain.as_str() {
            "cube" => Arc::new(move |rng: &mut ChaCha8Rng| (0..d).map(|_| rng.random::<f64>()).collect()),
            "curve" if d == 3 => Arc::new(|rng: &mut ChaCha8Rng| crate::holder::target::curve_point(rng.random::<f64>())),
            other => return Err(Error::Schema(format!("unknown domain {other:?} for input dimension {d}"))),
        };
        let spec = CompositionalSpec {
            input_dim: d,
            levels,
            c: self.c,
            domain,
            domain_name: self.domain.clone(),
        };
        spec.check_shape()?;
        Ok(spec)
    }
}

/// `xy` on `[0,1]²` as `((x+y)² − (x−y)²)/4`, one level of squares and
/// one affine level, `C = 4`.
pub fn xy_model() -> CompositionalSpec {
    SpecDoc::parse(
        r#"{"input_dim": 2, "c": 4, "domain": "cube", "levels": [
            [{"function": "square-sum", "support": [0, 1], "s": 2, "d": 2},
             {"function": "square-diff", "support": [0, 1], "s": 2, "d": 2}],
            [{"function": "quarter-diff", "support": [0, 1], "s": 2, "d": 2}]]}"#,
    )
    .expect("builtin model parses")
}

/// The identity on `[0,1]`.
pub fn identity_model() -> CompositionalSpec {
    SpecDoc::parse(r#"{"input_dim": 1, "c": 1, "levels": ["identity"]}"#).expect("builtin model parses")
}

/// Mean of `m` smooth features `sin(πx_k)/2`, each reading one coordinate,
/// of a point on the curve.
pub fn aggregation_model() -> CompositionalSpec {
    SpecDoc::parse(
        r#"{"input_dim": 3, "c": 1, "domain": "curve", "levels": [
            [{"function": "sin", "support": [0], "s": 2, "d": 1, "frequency": 3.14159265358979},
             {"function": "sin", "support": [1], "s": 2, "d": 1, "frequency": 3.14159265358979},
             {"function": "sin", "support": [2], "s": 2, "d": 1, "frequency": 3.14159265358979}],
            [{"function": "linear", "support": [0, 1, 2], "weights": [0.3333, 0.3333, 0.3333], "s": 2, "d": 1}]]}"#,
    )
    .expect("builtin model parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn propagation_examples() {
        let one = propagate_errors(1, 3.0, &[vec![0.1, 0.4, 0.2]]).unwrap();
        assert_eq!(one.telescoped, 0.4);
        assert_eq!(one.telescoped, one.coarse);
        let two = propagate_errors(2, 2.0, &[vec![0.1, 0.1], vec![0.1]]).unwrap();
        assert!((two.telescoped - 0.3).abs() < 1e-15);
        assert!(two.telescoped <= two.coarse);
        assert!(propagate_errors(2, 2.0, &[vec![0.1]]).is_err());
    }

    #[test]
    fn simulated_errors_stay_below_bound() {
        for seed in 0..20 {
            let eps = vec![vec![0.01, 0.02, 0.005], vec![0.03, 0.001], vec![0.002]];
            let (seen, bound) = simulate_propagation(&[4, 3, 2, 1], 1.5, &eps, 200, seed).unwrap();
            assert!(seen <= bound.telescoped + 1e-12, "{seen} > {}", bound.telescoped);
            assert!(bound.telescoped <= bound.coarse);
        }
    }

    #[test]
    fn enlargement_examples() {
        assert_eq!(enlargement_cover_bound(7, 0.0, 0.1, 3).unwrap(), 7.0 * ENLARGEMENT_CONSTANT);
        assert_eq!(enlargement_cover_bound(1, 0.1, 0.1, 2).unwrap(), 4.0 * ENLARGEMENT_CONSTANT);
        assert!(enlargement_cover_bound(0, 0.1, 0.1, 2).is_err());
    }

    #[test]
    fn xy_model_validates() {
        let spec = xy_model();
        assert_eq!(spec.level(), 1);
        assert_eq!(spec.dims(), vec![2, 2, 1]);
        let diag = validate_model(&spec, 400, 1).unwrap();
        assert!(diag.passed());
        for x in [[0.3, 0.8], [1.0, 0.0]] {
            assert!((spec.eval(&x) - x[0] * x[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn planted_sparsity_bug() {
        let mut spec = xy_model();
        // declares only coordinate 0 but reads both
        let bad = Component::from_value("leaky", vec![0], 2.0, 2.0, Arc::new(|z: &[f64]| (z[0] + z[1]) / 2.0));
        if let Level::Map(cs) = &mut spec.levels[0] {
            cs[1] = bad;
        }
        match validate_model(&spec, 100, 2) {
            Err(Error::Validation { level: 0, index: 1, reason }) => assert!(reason.contains('C')),
            other => panic!("expected a sparsity violation, got {other:?}"),
        }
    }

    #[test]
    fn identity_model_passes() {
        let spec = identity_model();
        assert_eq!(spec.level(), 0);
        assert!(validate_model(&spec, 20, 0).unwrap().checks.is_empty());
        let (c, rep) = compositional_net(&spec, 0.01, &CompositionalConfig { test_points: 50, ..Default::default() }).unwrap();
        assert_eq!(rep.final_sup_error, 0.0);
        assert_eq!(c.input_dim(), 1);
    }

    #[test]
    fn schedule_is_geometric() {
        let s = schedule(&xy_model(), 0.01).unwrap();
        assert!((s.base - 0.001).abs() < 1e-15);
        assert!((s.targets[1] - 0.005).abs() < 1e-15);
        assert!(schedule(&xy_model(), 100.0).is_err());
    }

    #[test]
    fn hardest_component_tie_break() {
        let spec = SpecDoc::parse(
            r#"{"input_dim": 2, "c": 4, "levels": [
                [{"function": "coordinate", "support": [0], "s": 1, "d": 1},
                 {"function": "coordinate", "support": [1], "s": 1, "d": 1}],
                [{"function": "product", "support": [0, 1], "s": 4, "d": 4},
                 {"function": "product", "support": [0, 1], "s": 2, "d": 2}],
                [{"function": "quarter-diff", "support": [0, 1], "s": 3, "d": 1}]]}"#,
        )
        .unwrap();
        assert_eq!(spec.hardest(false), Some((1, 1, 2.0, 2.0)));
        assert_eq!(spec.hardest(true), Some((0, 0, 1.0, 1.0)));
    }

    #[test]
    fn image_dimension_not_larger() {
        let spec = aggregation_model();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let traces: Vec<Vec<Vec<f64>>> = (0..1500).map(|_| spec.trace(&spec.sample(&mut rng))).collect();
        let m: Vec<Vec<f64>> = traces.iter().map(|t| t[0].clone()).collect();
        let gm: Vec<Vec<f64>> = traces.iter().map(|t| t[1].clone()).collect();
        let (dm, dg) = (projected_dimension(&m).unwrap(), projected_dimension(&gm).unwrap());
        assert!(dg <= dm + DIMENSION_TOL, "{dg} vs {dm}");
    }

    #[test]
    fn unknown_component_rejected() {
        let r = SpecDoc::parse(r#"{"input_dim": 1, "c": 1, "levels": [[{"function": "nope", "support": [0], "s": 1, "d": 1}]]}"#);
        assert!(matches!(r, Err(Error::Schema(_))));
    }
}
