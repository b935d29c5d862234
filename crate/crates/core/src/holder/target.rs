//! Target functions of bounded Hölder norm together with derivative oracles
//! and a sampler for the set they live on.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type PartialFn = Arc<dyn Fn(&[usize], &[f64]) -> f64 + Send + Sync>;
pub type SamplerFn = Arc<dyn Fn(&mut ChaCha8Rng) -> Vec<f64> + Send + Sync>;

/// A function on `[0,1]^D` with smoothness `s`, norm bound `c`, and a sampler
/// for the set `M` it is evaluated on (intrinsic dimension `d`).
#[derive(Clone)]
pub struct HolderTarget {
    pub name: String,
    pub dim: usize,
    pub s: f64,
    pub c: f64,
    pub intrinsic_dim: f64,
    value: ValueFn,
    partial: PartialFn,
    sampler: SamplerFn,
}

impl std::fmt::Debug for HolderTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HolderTarget")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("s", &self.s)
            .field("c", &self.c)
            .field("intrinsic_dim", &self.intrinsic_dim)
            .finish()
    }
}

/// All multi-indices of `dim` entries with `|α| ≤ order`, graded, lexicographic
/// within a grade (largest first coordinate first).
pub fn multi_indices(dim: usize, order: usize) -> Vec<Vec<usize>> {
    fn rec(dim: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == dim - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for a in (0..=left).rev() {
            cur.push(a);
            rec(dim, left - a, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for k in 0..=order {
        rec(dim, k, &mut Vec::new(), &mut out);
    }
    out
}

pub fn factorial(alpha: &[usize]) -> f64 {
    alpha
        .iter()
        .map(|&a| (1..=a).map(|v| v as f64).product::<f64>())
        .product()
}

impl HolderTarget {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        dim: usize,
        s: f64,
        c: f64,
        intrinsic_dim: f64,
        value: ValueFn,
        partial: PartialFn,
        sampler: SamplerFn,
    ) -> Result<Self> {
        if dim == 0 || !(s > 0.0) || !(c > 0.0) || !(intrinsic_dim > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "target {name}: need D ≥ 1, s > 0, C > 0, d > 0"
            )));
        }
        Ok(HolderTarget {
            name: name.to_string(),
            dim,
            s,
            c,
            intrinsic_dim,
            value,
            partial,
            sampler,
        })
    }

    /// Highest derivative order used by the local polynomials, `⌊s⌋`.
    pub fn order(&self) -> usize {
        self.s.floor() as usize
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn partial(&self, alpha: &[usize], x: &[f64]) -> f64 {
        if alpha.iter().all(|&a| a == 0) {
            return self.eval(x);
        }
        (self.partial)(alpha, x)
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (self.sampler)(rng)
    }

    pub fn samples(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample(&mut rng)).collect()
    }

    /// Checks every partial of order `1..=order()` against a central difference
    /// of the next lower one at `probes` sampled points. Returns the largest
    /// relative mismatch.
    pub fn validate(&self, probes: usize, seed: u64) -> Result<f64> {
        const STEP: f64 = 1e-5;
        const TOL: f64 = 1e-4;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..probes {
            // keep the stencil inside the unit cube
            let x: Vec<f64> = self
                .sample(&mut rng)
                .iter()
                .map(|v| v.clamp(2.0 * STEP, 1.0 - 2.0 * STEP))
                .collect();
            if x.len() != self.dim {
                return Err(Error::DimMismatch {
                    expected: self.dim,
                    got: x.len(),
                });
            }
            for alpha in multi_indices(self.dim, self.order()) {
                let Some(i) = alpha.iter().position(|&a| a > 0) else {
                    continue;
                };
                let mut lower = alpha.clone();
                lower[i] -= 1;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += STEP;
                xm[i] -= STEP;
                let fd = (self.partial(&lower, &xp) - self.partial(&lower, &xm)) / (2.0 * STEP);
                let exact = self.partial(&alpha, &x);
                let rel = (fd - exact).abs() / exact.abs().max(1.0);
                if !rel.is_finite() || rel > TOL {
                    return Err(Error::Precondition(format!(
                        "target {}: derivative {:?} disagrees with finite differences at {:?} ({} vs {})",
                        self.name, alpha, x, exact, fd
                    )));
                }
                worst = worst.max(rel);
            }
        }
        Ok(worst)
    }
}

/// Central-difference partials of `value` with step `1e-5` per order.
/// Each order loses about five digits, so beyond second order the result is
/// only a rough estimate.
pub fn finite_difference(value: ValueFn) -> PartialFn {
    fn rec(value: &ValueFn, alpha: &mut Vec<usize>, x: &mut Vec<f64>) -> f64 {
        const STEP: f64 = 1e-5;
        let Some(i) = alpha.iter().position(|&a| a > 0) else {
            return value(x);
        };
        alpha[i] -= 1;
        let keep = x[i];
        x[i] = keep + STEP;
        let hi = rec(value, alpha, x);
        x[i] = keep - STEP;
        let lo = rec(value, alpha, x);
        x[i] = keep;
        alpha[i] += 1;
        (hi - lo) / (2.0 * STEP)
    }
    Arc::new(move |alpha: &[usize], x: &[f64]| rec(&value, &mut alpha.to_vec(), &mut x.to_vec()))
}

/// The curve `t -> (t, 0.3 + 0.4t², 0.5 + 0.2 sin(πt))` in `[0,1]³`.
pub fn curve_point(t: f64) -> Vec<f64> {
    vec![t, 0.3 + 0.4 * t * t, 0.5 + 0.2 * (PI * t).sin()]
}

fn curve_sampler() -> SamplerFn {
    Arc::new(|rng: &mut ChaCha8Rng| curve_point(rng.random::<f64>()))
}

fn cube_sampler(dim: usize) -> SamplerFn {
    Arc::new(move |rng: &mut ChaCha8Rng| (0..dim).map(|_| rng.random::<f64>()).collect())
}

/// k-th derivative of `sin(2πu)`.
fn dsin(k: usize, u: f64) -> f64 {
    let w = 2.0 * PI;
    w.powi(k as i32) * (w * u + k as f64 * PI / 2.0).sin()
}

/// `sin(2πx₁)` sampled on the curve, so that it reads `sin(2πt)` along it.
pub fn sin_curve(s: f64) -> Result<HolderTarget> {
    let c = (2.0 * PI).powf(s.ceil());
    HolderTarget::new(
        "sin-curve",
        3,
        s,
        c,
        1.0,
        Arc::new(|x: &[f64]| (2.0 * PI * x[0]).sin()),
        Arc::new(|a: &[usize], x: &[f64]| {
            if a[1] != 0 || a[2] != 0 {
                0.0
            } else {
                dsin(a[0], x[0])
            }
        }),
        curve_sampler(),
    )
}

/// `sin(2πx₁)·cos(2πx₂)` on the curve.
pub fn product_curve(s: f64) -> Result<HolderTarget> {
    let c = 2.0 * (2.0 * PI).powf(s.ceil());
    HolderTarget::new(
        "sin-cos-curve",
        3,
        s,
        c,
        1.0,
        Arc::new(|x: &[f64]| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos()),
        Arc::new(|a: &[usize], x: &[f64]| {
            if a[2] != 0 {
                return 0.0;
            }
            // cos(2πv) = sin(2πv + π/2) = sin(2π(v + 1/4))
            dsin(a[0], x[0]) * dsin(a[1], x[1] + 0.25)
        }),
        curve_sampler(),
    )
}

/// A polynomial `Σ coef·x^α` on the unit cube.
pub fn polynomial(name: &str, dim: usize, terms: Vec<(f64, Vec<usize>)>, s: f64) -> Result<HolderTarget> {
    if terms.iter().any(|(_, a)| a.len() != dim) {
        return Err(Error::InvalidArgument("monomial exponent length must equal D".into()));
    }
    let terms = Arc::new(terms);
    let c = terms.iter().map(|(k, a)| k.abs() * factorial(a).max(1.0)).sum::<f64>().max(1.0);
    let t1 = terms.clone();
    let value = Arc::new(move |x: &[f64]| {
        t1.iter()
            .map(|(k, a)| k * a.iter().zip(x).map(|(&e, &v)| v.powi(e as i32)).product::<f64>())
            .sum()
    });
    let t2 = terms.clone();
    let partial = Arc::new(move |alpha: &[usize], x: &[f64]| {
        t2.iter()
            .map(|(k, a)| {
                let mut v = *k;
                for ((&e, &d), &xi) in a.iter().zip(alpha).zip(x) {
                    if d > e {
                        return 0.0;
                    }
                    let fall: f64 = (0..d).map(|i| (e - i) as f64).product();
                    v *= fall * xi.powi((e - d) as i32);
                }
                v
            })
            .sum()
    });
    HolderTarget::new(name, dim, s, c, dim as f64, value, partial, cube_sampler(dim))
}

pub fn zero_target(dim: usize) -> Result<HolderTarget> {
    polynomial("zero", dim, vec![], 2.0)
}

pub fn constant_target(dim: usize, value: f64) -> Result<HolderTarget> {
    polynomial("constant", dim, vec![(value, vec![0; dim])], 2.0)
}

/// Derivative of order `k` of `u^p (1−u)^p` (zero outside `[0,1]`).
fn bump_1d(k: usize, p: f64, u: f64) -> f64 {
    if !(0.0..=1.0).contains(&u) {
        return 0.0;
    }
    let fall = |n: usize| -> f64 { (0..n).map(|i| p - i as f64).product() };
    let binom = |n: usize, i: usize| -> f64 { (0..i).map(|j| (n - j) as f64 / (j + 1) as f64).product() };
    (0..=k)
        .map(|i| {
            let left = fall(i) * u.powf(p - i as f64);
            let right = fall(k - i) * (1.0 - u).powf(p - (k - i) as f64) * if (k - i) % 2 == 1 { -1.0 } else { 1.0 };
            binom(k, i) * left * right
        })
        .sum()
}

/// Sum of rescaled bumps `a K^{-s} φ(Kx − β)` over the cells `β` in
/// `support`, with `φ(u) = ∏ u_j^{s+1}(1−u_j)^{s+1}` on the unit cell.
pub fn bump_target(dim: usize, k: usize, s: f64, a: f64, support: Vec<Vec<usize>>) -> Result<HolderTarget> {
    if support.iter().any(|b| b.len() != dim || b.iter().any(|&v| v >= k)) {
        return Err(Error::InvalidArgument("bump cells must be grid indices below K".into()));
    }
    let p = s + 1.0;
    let kf = k as f64;
    let support = Arc::new(support);
    let sup1 = support.clone();
    let value = Arc::new(move |x: &[f64]| {
        sup1.iter()
            .map(|b| {
                let prod: f64 = b.iter().zip(x).map(|(&bj, &xj)| bump_1d(0, p, kf * xj - bj as f64)).product();
                a * kf.powf(-s) * prod
            })
            .sum()
    });
    let sup2 = support.clone();
    let partial = Arc::new(move |alpha: &[usize], x: &[f64]| {
        let order: usize = alpha.iter().sum();
        sup2.iter()
            .map(|b| {
                let prod: f64 = b
                    .iter()
                    .zip(x)
                    .zip(alpha)
                    .map(|((&bj, &xj), &aj)| bump_1d(aj, p, kf * xj - bj as f64))
                    .product();
                a * kf.powf(order as f64 - s) * prod
            })
            .sum()
    });
    HolderTarget::new("bump", dim, s, a.abs().max(1e-300), dim as f64, value, partial, cube_sampler(dim))
}

/// Names accepted by [`builtin`].
pub const BUILTIN_TARGETS: &[&str] = &["sin-curve", "sin-cos-curve", "square", "affine", "affine-2d", "constant", "zero"];

pub fn builtin(name: &str, s: f64) -> Result<HolderTarget> {
    match name {
        "sin-curve" => sin_curve(s),
        "sin-cos-curve" => product_curve(s),
        "square" => polynomial("square", 1, vec![(1.0, vec![2])], s),
        "affine" => polynomial("affine", 1, vec![(0.25, vec![0]), (0.5, vec![1])], s),
        "affine-2d" => polynomial("affine-2d", 2, vec![(0.25, vec![0, 0]), (0.5, vec![1, 0]), (-0.25, vec![0, 1])], s),
        "constant" => constant_target(1, 0.5),
        "zero" => zero_target(1),
        other => Err(Error::InvalidArgument(format!(
            "unknown target {other:?}; builtins are {}",
            BUILTIN_TARGETS.join(", ")
        ))),
    }
}

/// Bump family parameters in a target file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BumpDoc {
    pub dim: usize,
    pub k: usize,
    pub a: f64,
    pub support: Vec<Vec<usize>>,
}

/// Target file: `{"builtin": "sin-curve", "s": 2}` or
/// `{"bump": {"dim": 2, "k": 4, "a": 1, "support": [[1, 2]]}, "s": 2}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TargetDoc {
    #[serde(default)]
    pub builtin: Option<String>,
    #[serde(default)]
    pub bump: Option<BumpDoc>,
    #[serde(default = "default_s")]
    pub s: f64,
}

fn default_s() -> f64 {
    1.0
}

impl TargetDoc {
    pub fn load(text: &str) -> Result<HolderTarget> {
        let doc: TargetDoc = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        match (doc.builtin, doc.bump) {
            (Some(name), None) => builtin(&name, doc.s),
            (None, Some(b)) => bump_target(b.dim, b.k, doc.s, b.a, b.support),
            _ => Err(Error::Schema("target file needs exactly one of \"builtin\" or \"bump\"".into())),
        }
    }
}
