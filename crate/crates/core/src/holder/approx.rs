//! The Hölder approximator: grid cells met by the sample set, local Taylor
//! polynomials with memorized coefficients, and a median-smoothing finish.

use std::collections::BTreeSet;
use std::time::Instant;

use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::monomial::{levels_for, monomial_chain, mult01_net};
use super::step::snap_circuit;
use super::target::{factorial, multi_indices, HolderTarget};
use crate::error::{Error, Result};
use crate::memorize::{ceil_log2, memorize_nd_multi, BudgetReport, MemoPlan};
use crate::net::{select, Circuit, Layer};
use crate::pwl::{median_smooth_circuit, SmoothingConfig};
use crate::scalar::{int, pow2, rat, BigFloat, Real, ScalarKind};

/// Grid cells `Q_β = ∏[β_i/K, (β_i+1)/K]` that the sample set comes close to.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridPartition {
    pub k: usize,
    pub dim: usize,
    /// Sorted multi-indices.
    pub occupied: Vec<Vec<usize>>,
}

impl GridPartition {
    /// Marks every cell within ∞-distance `dilation` of one of `samples`
    /// points drawn from the target's sampler.
    pub fn discover(target: &HolderTarget, k: usize, dilation: f64, samples: usize, seed: u64) -> Result<Self> {
        if k == 0 || samples == 0 {
            return Err(Error::InvalidArgument("need K ≥ 1 and at least one sample".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cells = BTreeSet::new();
        let kf = k as f64;
        for _ in 0..samples {
            let x = target.sample(&mut rng);
            let options: Vec<Vec<usize>> = x
                .iter()
                .map(|&v| {
                    let home = ((v * kf).floor() as i64).clamp(0, k as i64 - 1);
                    (home - 1..=home + 1)
                        .filter(|&b| b >= 0 && b < k as i64)
                        .filter(|&b| {
                            let (lo, hi) = (b as f64 / kf, (b + 1) as f64 / kf);
                            v >= lo - dilation && v <= hi + dilation
                        })
                        .map(|b| b as usize)
                        .collect()
                })
                .collect();
            let mut cur = vec![0usize; x.len()];
            product(&options, 0, &mut cur, &mut cells);
        }
        Ok(GridPartition {
            k,
            dim: target.dim,
            occupied: cells.into_iter().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    /// Cell corners `β/K`.
    pub fn corners(&self) -> Vec<Vec<BigRational>> {
        let k = self.k as i64;
        self.occupied
            .iter()
            .map(|b| b.iter().map(|&v| rat(v as i64, k)).collect())
            .collect()
    }
}

fn product(options: &[Vec<usize>], i: usize, cur: &mut Vec<usize>, out: &mut BTreeSet<Vec<usize>>) {
    if i == options.len() {
        out.insert(cur.clone());
        return;
    }
    for &b in &options[i] {
        cur[i] = b;
        product(options, i + 1, cur, out);
    }
}

/// Taylor coefficients `ξ_{β,α} = ∂^α f(β/K)/α!` for every occupied cell.
#[derive(Clone, Debug, Serialize)]
pub struct TaylorTable {
    pub alphas: Vec<Vec<usize>>,
    /// `coeffs[j][a]` for cell `j` and multi-index `a`.
    pub coeffs: Vec<Vec<f64>>,
}

pub fn taylor_coeffs(target: &HolderTarget, grid: &GridPartition) -> Result<TaylorTable> {
    let alphas = multi_indices(target.dim, target.order());
    let kf = grid.k as f64;
    let coeffs = grid
        .occupied
        .iter()
        .map(|b| {
            let x: Vec<f64> = b.iter().map(|&v| v as f64 / kf).collect();
            alphas
                .iter()
                .map(|a| {
                    let v = target.partial(a, &x) / factorial(a);
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::NonFinite(format!("derivative {a:?} of {} at {x:?}", target.name)))
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TaylorTable { alphas, coeffs })
}

/// Coefficients mapped to `[0,1)` with a per-index power-of-two bound `C_α`
/// and cut to `r` bits: `label = ⌊2^r (ξ + C_α)/(2C_α)⌋`.
#[derive(Clone, Debug, Serialize)]
pub struct Quantized {
    pub r: u32,
    pub bounds: Vec<f64>,
    pub labels: Vec<Vec<u64>>,
}

impl TaylorTable {
    pub fn quantize(&self, r: u32) -> Quantized {
        let bounds: Vec<f64> = (0..self.alphas.len())
            .map(|a| {
                let big = self.coeffs.iter().map(|c| c[a].abs()).fold(0.0, f64::max);
                if big == 0.0 {
                    1.0
                } else {
                    // strictly above the largest coefficient
                    2f64.powi((big.log2().floor() as i32) + 1)
                }
            })
            .collect();
        let top = (1u64 << r) - 1;
        let labels = self
            .coeffs
            .iter()
            .map(|c| {
                c.iter()
                    .zip(&bounds)
                    .map(|(&xi, &cb)| {
                        let v = ((xi + cb) / (2.0 * cb) * 2f64.powi(r as i32)).floor();
                        (v.max(0.0) as u64).min(top)
                    })
                    .collect()
            })
            .collect();
        Quantized { r, bounds, labels }
    }
}

impl Quantized {
    /// `2C_α·label·2^{-r} − C_α`.
    pub fn value(&self, cell: usize, a: usize) -> f64 {
        let cb = self.bounds[a];
        2.0 * cb * self.labels[cell][a] as f64 * 2f64.powi(-(self.r as i32)) - cb
    }
}

/// Sweep settings for [`holder_approx_net`].
#[derive(Clone, Debug)]
pub struct ApproxConfig {
    pub n: usize,
    pub l: usize,
    /// Intrinsic dimension used to pick `K`; defaults to the target's.
    pub intrinsic_dim: Option<f64>,
    pub discovery_samples: usize,
    pub test_points: usize,
    pub seed: u64,
    /// Coefficient bits beyond `⌈log2(1/ε)⌉`; also shrinks the band.
    pub extra_bits: u32,
}

impl ApproxConfig {
    pub fn new(n: usize, l: usize) -> Self {
        ApproxConfig {
            n,
            l,
            intrinsic_dim: None,
            discovery_samples: 1_000_000,
            test_points: 500,
            seed: 0,
            extra_bits: 0,
        }
    }
}

/// Constant in the reported bound `C″(NL)^{-2s/d}`.
pub const APPROX_CONSTANT: f64 = 16.0;

/// Everything decided before any network is built.
#[derive(Clone, Debug)]
pub struct ApproxPlan {
    pub k: usize,
    pub d: f64,
    pub eps: f64,
    pub r_tilde: u32,
    /// Band half-width, a power of two not above `ε/4`.
    pub delta: BigRational,
    pub grid: GridPartition,
    pub table: TaylorTable,
    pub quant: Quantized,
    /// Width budget handed to the coefficient memorizer.
    pub memo_width: usize,
    pub memo_plan: MemoPlan,
    pub mono_base: usize,
    pub mono_levels: usize,
    pub bits: u32,
}

/// `⌈(N²L²)^{1/d}⌉`, guarded against rounding just above an integer.
pub fn resolution(n: usize, l: usize, d: f64) -> usize {
    let v = ((n * n * l * l) as f64).powf(1.0 / d);
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r.max(1.0) as usize
    } else {
        v.ceil().max(1.0) as usize
    }
}

pub fn plan_approx(target: &HolderTarget, cfg: &ApproxConfig) -> Result<ApproxPlan> {
    if cfg.n == 0 || cfg.l == 0 {
        return Err(Error::InvalidArgument("width and depth budgets must be ≥ 1".into()));
    }
    let d = cfg.intrinsic_dim.unwrap_or(target.intrinsic_dim);
    if !(d > 0.0) {
        return Err(Error::InvalidArgument("intrinsic dimension must be positive".into()));
    }
    let k = resolution(cfg.n, cfg.l, d);
    let s = target.s;
    let eps = (k as f64).powf(-s);
    let r_tilde = ((s * (k as f64).log2()).ceil() as u32).max(1) + cfg.extra_bits;
    if r_tilde > 60 {
        return Err(Error::Budget(format!("coefficient precision of {r_tilde} bits is too fine")));
    }
    let delta = pow2(-(r_tilde as i64 + 2));
    let delta_f = 2f64.powi(-(r_tilde as i32 + 2));
    // A sampled point only certifies cells near it, so pad by a fraction of a cell.
    let dilation = 2.0 * delta_f + 1.0 / (8.0 * k as f64);
    let grid = GridPartition::discover(target, k, dilation, cfg.discovery_samples, cfg.seed)?;
    let table = taylor_coeffs(target, &grid)?;
    let quant = table.quantize(r_tilde);
    let j = grid.len();
    let cap = (cfg.n * cfg.n * cfg.l * cfg.l) as f64;
    let mut memo_width = if (j as f64) <= cap {
        cfg.n
    } else {
        (cfg.n as f64 * (j as f64 / cap).sqrt()).ceil() as usize
    };
    while (memo_width * memo_width * cfg.l * cfg.l) < j {
        memo_width += 1;
    }
    let ratio = int(2 * (j * j * target.dim) as i64) * int(k as i64);
    let s_mem = (ceil_log2(&ratio) + 1).max(1) as u32;
    let memo_plan = MemoPlan::new(j, memo_width, cfg.l, s_mem, r_tilde)?;
    let mono_base = cfg.n + 1;
    let top = table.alphas.iter().map(|a| a.iter().sum::<usize>()).max().unwrap_or(0);
    let mono_levels = levels_for(mono_base, top.max(2) + 1, r_tilde as i64 + 6);
    let lost = (memo_plan.group_size as f64 * memo_plan.code_bits as f64 * 3f64.log2()).ceil() as u32;
    let bits = (lost + s_mem + r_tilde + 128).div_ceil(64) * 64;
    Ok(ApproxPlan {
        k,
        d,
        eps,
        r_tilde,
        delta,
        grid,
        table,
        quant,
        memo_width,
        memo_plan,
        mono_base,
        mono_levels,
        bits: bits.clamp(128, 1024),
    })
}

/// Sizes, errors and constants of one approximator.
#[derive(Clone, Debug, Serialize)]
pub struct ApproxReport {
    pub target: String,
    pub n: usize,
    pub l: usize,
    pub k: usize,
    pub d: f64,
    pub s: f64,
    pub eps: f64,
    pub r_tilde: u32,
    pub delta: f64,
    pub occupied_cells: usize,
    pub coefficient_bounds: Vec<f64>,
    /// `Σ_α 2C_α 2^{-r̃} K^{-|α|}`.
    pub quantization_bound: f64,
    /// `max |f(x) − Σ ξ (x − x_β)^α| · K^s` over the test points.
    pub taylor_constant: f64,
    pub measured_sup_error: f64,
    /// `C″(NL)^{-2s/d}`.
    pub bound: f64,
    /// `measured_sup_error · (NL)^{2s/d}`.
    pub rate_constant: f64,
    pub width: usize,
    pub depth: usize,
    pub magnitude: f64,
    pub memorizer: BudgetReport,
    pub memorizer_width_budget: usize,
    pub monomial_levels: usize,
    pub scalar: String,
    pub test_points: usize,
    pub build_seconds: f64,
    pub eval_seconds: f64,
}

impl ApproxReport {
    pub const CSV_HEADER: &'static str = "N,L,K,measured_sup_error,bound,width,depth,B";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:e},{:e},{},{},{}",
            self.n, self.l, self.k, self.measured_sup_error, self.bound, self.width, self.depth, self.magnitude
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Scalar kind with enough bits for the coefficient memorizer of `plan`.
pub fn recommended_kind(plan: &ApproxPlan) -> ScalarKind {
    ScalarKind::bigfloat(plan.bits)
}

/// Builds the approximator circuit of `plan`:
/// snap `x -> (x_β, t)`, memorized labels at `x_β` next to monomials of `t`,
/// products of rescaled coefficients with monomials, and median smoothing.
pub fn build_approx<T: Real>(plan: &ApproxPlan, dim: usize, n: usize, l: usize, seed: u64, kind: ScalarKind) -> Result<(Circuit<T>, BudgetReport)> {
    let alphas = &plan.table.alphas;
    let la = alphas.len();
    let snap: Circuit<T> = snap_circuit(plan.k, dim, &plan.delta)?.cast(kind)?;
    let (mem, mem_report) = memorize_nd_multi::<T>(
        &plan.grid.corners(),
        &rat(1, plan.k as i64),
        &plan.quant.labels,
        plan.r_tilde,
        plan.memo_width,
        l,
        seed,
        kind,
    )?;
    let _ = n;
    let corner = select::<T>(2 * dim, &(0..dim).collect::<Vec<_>>(), kind).layers()[0].clone();
    let offset = select::<T>(2 * dim, &(dim..2 * dim).collect::<Vec<_>>(), kind).layers()[0].clone();
    let mut branches = vec![Circuit::net(mem).after_affine(&corner)?];
    let higher: Vec<usize> = (0..la).filter(|&a| alphas[a].iter().any(|&v| v > 0)).collect();
    for &a in &higher {
        let mono = monomial_chain(&alphas[a], plan.mono_base, plan.mono_levels)?.cast::<T>(kind)?;
        branches.push(Circuit::net(mono).after_affine(&offset)?);
    }
    let fan_b = Circuit::fan(branches, None)?;

    // stage input: labels (la), monomials (higher.len())
    let width_c = la + higher.len();
    let scale = pow2(-(plan.r_tilde as i64));
    let kinv = rat(1, plan.k as i64);
    let bound = |a: usize| BigRational::from_float(plan.quant.bounds[a]).expect("finite bound");
    let mut head_cols: Vec<BigRational> = Vec::new();
    let mut branches_c: Vec<Circuit<T>> = Vec::new();
    let mult = std::sync::Arc::new(mult01_net(plan.mono_base, plan.mono_levels)?.cast::<T>(kind)?);
    for (h, &a) in higher.iter().enumerate() {
        // (label_a 2^{-r}, m_a)
        let mut pick = Layer::zeros(2, width_c);
        pick.set(0, a, T::from_rational(&scale, kind));
        pick.set(1, la + h, T::one());
        branches_c.push(Circuit::shared(mult.clone()).after_affine(&pick)?);
        let deg = alphas[a].iter().sum::<usize>() as i32;
        let w = (0..deg).fold(bound(a), |acc, _| acc * &kinv);
        head_cols.push(int(2) * w);
    }
    // affine branch: label_0, then the monomials themselves
    let zero = (0..la).find(|&a| alphas[a].iter().all(|&v| v == 0)).expect("α = 0 is always present");
    let mut rest = Layer::zeros(1 + higher.len(), width_c);
    rest.set(0, zero, T::from_rational(&scale, kind));
    for h in 0..higher.len() {
        rest.set(1 + h, la + h, T::one());
    }
    branches_c.push(Circuit::affine(rest, kind)?);
    head_cols.push(int(2) * bound(zero));
    for &a in &higher {
        let deg = alphas[a].iter().sum::<usize>() as i32;
        let w = (0..deg).fold(bound(a), |acc, _| acc * &kinv);
        head_cols.push(-w);
    }
    let bias = -bound(zero);
    let head = Layer::new(
        1,
        head_cols.len(),
        head_cols.iter().map(|c| T::from_rational(c, kind)).collect(),
        vec![T::from_rational(&bias, kind)],
    )?;
    let fan_c = Circuit::fan(branches_c, Some(head))?;
    let inner = Circuit::chain(vec![snap, fan_b, fan_c])?;
    let cfg = SmoothingConfig::new(plan.k, plan.delta.clone(), dim)?;
    Ok((median_smooth_circuit(&inner, &cfg)?, mem_report))
}

/// Sup error of `circuit` against the target over `points`.
pub fn sup_error<T: Real>(circuit: &Circuit<T>, target: &HolderTarget, points: &[Vec<f64>]) -> Result<f64> {
    let kind = circuit.kind();
    let errs = points
        .par_iter()
        .map(|x| {
            let xi = x.iter().map(|&v| T::from_f64(v, kind)).collect::<Result<Vec<T>>>()?;
            let y = circuit.evaluate(&xi)?[0].to_f64();
            Ok((y - target.eval(x)).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errs.into_iter().fold(0.0, |a, e| if e.is_nan() || a.is_nan() { f64::NAN } else { a.max(e) }))
}

/// Largest unquantized Taylor remainder over `points`, scaled by `K^s`.
pub fn taylor_constant(plan: &ApproxPlan, target: &HolderTarget, points: &[Vec<f64>]) -> f64 {
    let kf = plan.k as f64;
    let mut worst: f64 = 0.0;
    for x in points {
        let beta: Vec<usize> = x.iter().map(|&v| ((v * kf).floor().max(0.0) as usize).min(plan.k - 1)).collect();
        let Ok(j) = plan.grid.occupied.binary_search(&beta) else {
            continue;
        };
        let approx: f64 = plan
            .table
            .alphas
            .iter()
            .enumerate()
            .map(|(a, alpha)| {
                let mono: f64 = alpha
                    .iter()
                    .zip(x)
                    .zip(&beta)
                    .map(|((&e, &xi), &b)| (xi - b as f64 / kf).powi(e as i32))
                    .product();
                plan.table.coeffs[j][a] * mono
            })
            .sum();
        worst = worst.max((target.eval(x) - approx).abs());
    }
    worst * kf.powf(target.s)
}

/// Plans, builds and measures the approximator in scalar type `T`.
pub fn holder_approx_net<T: Real>(target: &HolderTarget, cfg: &ApproxConfig, kind: ScalarKind) -> Result<(Circuit<T>, ApproxReport)> {
    let start = Instant::now();
    let plan = plan_approx(target, cfg)?;
    let (circuit, memorizer) = build_approx::<T>(&plan, target.dim, cfg.n, cfg.l, cfg.seed, kind)?;
    let build_seconds = start.elapsed().as_secs_f64();
    let size = circuit.size_report();
    let points = target.samples(cfg.test_points, cfg.seed.wrapping_add(1));
    let start = Instant::now();
    let measured = sup_error(&circuit, target, &points)?;
    let eval_seconds = start.elapsed().as_secs_f64();
    let nl = (cfg.n * cfg.l) as f64;
    let rate = nl.powf(-2.0 * target.s / plan.d);
    let quantization_bound = plan
        .table
        .alphas
        .iter()
        .zip(&plan.quant.bounds)
        .map(|(a, &c)| 2.0 * c * 2f64.powi(-(plan.r_tilde as i32)) * (plan.k as f64).powi(-(a.iter().sum::<usize>() as i32)))
        .sum();
    let report = ApproxReport {
        target: target.name.clone(),
        n: cfg.n,
        l: cfg.l,
        k: plan.k,
        d: plan.d,
        s: target.s,
        eps: plan.eps,
        r_tilde: plan.r_tilde,
        delta: 2f64.powi(-(plan.r_tilde as i32 + 2)),
        occupied_cells: plan.grid.len(),
        coefficient_bounds: plan.quant.bounds.clone(),
        quantization_bound,
        taylor_constant: taylor_constant(&plan, target, &points),
        measured_sup_error: measured,
        bound: APPROX_CONSTANT * rate,
        rate_constant: measured / rate,
        width: size.width,
        depth: size.depth,
        magnitude: size.max_magnitude,
        memorizer,
        memorizer_width_budget: plan.memo_width,
        monomial_levels: plan.mono_levels,
        scalar: kind.to_string(),
        test_points: points.len(),
        build_seconds,
        eval_seconds,
    };
    Ok((circuit, report))
}

/// [`holder_approx_net`] at the recommended extended precision.
pub fn holder_approx(target: &HolderTarget, cfg: &ApproxConfig) -> Result<(Circuit<BigFloat>, ApproxReport)> {
    let plan = plan_approx(target, cfg)?;
    holder_approx_net::<BigFloat>(target, cfg, recommended_kind(&plan))
}

#[cfg(test)]
mod tests {
    use super::super::target::{builtin, polynomial, sin_curve, zero_target};
    use super::*;
    use std::sync::Arc;

    fn small(n: usize, l: usize) -> ApproxConfig {
        ApproxConfig {
            discovery_samples: 20_000,
            test_points: 40,
            ..ApproxConfig::new(n, l)
        }
    }

    #[test]
    fn taylor_examples() {
        let sq = builtin("square", 2.0).unwrap();
        let grid = GridPartition {
            k: 2,
            dim: 1,
            occupied: vec![vec![0], vec![1]],
        };
        let t = taylor_coeffs(&sq, &grid).unwrap();
        assert_eq!(t.alphas, vec![vec![0], vec![1], vec![2]]);
        // β/K = 0.5: ξ_2 = f''/2 = 1
        assert_eq!(t.coeffs[1], vec![0.25, 1.0, 1.0]);

        let c = polynomial("c", 2, vec![(0.7, vec![0, 0])], 2.0).unwrap();
        let g2 = GridPartition {
            k: 3,
            dim: 2,
            occupied: vec![vec![1, 2]],
        };
        let t = taylor_coeffs(&c, &g2).unwrap();
        assert_eq!(t.coeffs[0], vec![0.7, 0.0, 0.0, 0.0, 0.0, 0.0]);

        let sin = HolderTarget::new(
            "sin",
            1,
            1.0,
            1.0,
            1.0,
            Arc::new(|x: &[f64]| x[0].sin()),
            Arc::new(|a: &[usize], x: &[f64]| if a[0] == 1 { x[0].cos() } else { -x[0].sin() }),
            Arc::new(|_: &mut ChaCha8Rng| vec![0.0]),
        )
        .unwrap();
        let g0 = GridPartition {
            k: 4,
            dim: 1,
            occupied: vec![vec![0]],
        };
        assert_eq!(taylor_coeffs(&sin, &g0).unwrap().coeffs[0], vec![0.0, 1.0]);
    }

    #[test]
    fn quantization_recovers_values() {
        let table = TaylorTable {
            alphas: vec![vec![0], vec![1]],
            coeffs: vec![vec![0.3, -5.0], vec![0.0, 2.5]],
        };
        let q = table.quantize(12);
        assert_eq!(q.bounds, vec![0.5, 8.0]);
        for j in 0..2 {
            for a in 0..2 {
                let err = table.coeffs[j][a] - q.value(j, a);
                assert!((0.0..=2.0 * q.bounds[a] / 4096.0).contains(&err));
            }
        }
        // zero is represented exactly
        assert_eq!(q.value(1, 0), 0.0);
    }

    #[test]
    fn discovery_finds_sample_cells() {
        let t = sin_curve(1.0).unwrap();
        let g = GridPartition::discover(&t, 8, 0.0, 5000, 1).unwrap();
        for x in t.samples(200, 77) {
            let b: Vec<usize> = x.iter().map(|&v| ((v * 8.0).floor() as usize).min(7)).collect();
            assert!(g.occupied.binary_search(&b).is_ok());
        }
        assert!(g.len() < 8 * 8 * 8 / 4);
    }

    #[test]
    fn zero_target_within_quantization() {
        let t = zero_target(1).unwrap();
        let (_, rep) = holder_approx(&t, &small(2, 1)).unwrap();
        assert!(rep.measured_sup_error <= 2f64.powi(-(rep.r_tilde as i32)), "{}", rep.measured_sup_error);
    }

    #[test]
    fn affine_within_quantization() {
        let t = builtin("affine", 2.0).unwrap();
        let (_, rep) = holder_approx(&t, &small(2, 2)).unwrap();
        assert_eq!(rep.k, 16);
        assert!(rep.measured_sup_error <= rep.quantization_bound + 1e-9, "{rep:?}");
    }

    #[test]
    fn curve_target_small_budget() {
        let t = sin_curve(1.0).unwrap();
        let (c, rep) = holder_approx(&t, &small(2, 1)).unwrap();
        assert_eq!(rep.k, 4);
        assert!(rep.measured_sup_error < 3.0, "{rep:?}");
        assert_eq!(c.input_dim(), 3);
        let row = rep.csv_row();
        assert_eq!(row.split(',').count(), ApproxReport::CSV_HEADER.split(',').count());
    }
}
