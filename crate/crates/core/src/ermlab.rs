//! Nonparametric regression experiments: data `Y = f_0(X) + noise`, trained
//! networks checked against the constructive approximator, Monte Carlo risk
//! and the log-log rate fit.

use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::compositional::CompositionalSpec;
use crate::error::{Error, Result};
use crate::geometry::class_covering_bound;
use crate::holder::target::{SamplerFn, ValueFn};
use crate::holder::{holder_approx_net, plan_approx, recommended_kind, ApproxConfig, HolderTarget};
use crate::net::{Circuit, Layer, Network};
use crate::scalar::{BigFloat, Real, ScalarKind};

/// Regression function together with its covariate law.
#[derive(Clone)]
pub struct RegressionTarget {
    pub name: String,
    pub s: f64,
    pub d: f64,
    pub input_dim: usize,
    value: ValueFn,
    sampler: SamplerFn,
    holder: Option<HolderTarget>,
}

impl std::fmt::Debug for RegressionTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RegressionTarget")
            .field("name", &self.name)
            .field("s", &self.s)
            .field("d", &self.d)
            .finish()
    }
}

impl RegressionTarget {
    pub fn holder(t: &HolderTarget) -> Self {
        let (a, b) = (t.clone(), t.clone());
        RegressionTarget {
            name: t.name.clone(),
            s: t.s,
            d: t.intrinsic_dim,
            input_dim: t.dim,
            value: Arc::new(move |x: &[f64]| a.eval(x)),
            sampler: Arc::new(move |rng: &mut ChaCha8Rng| b.sample(rng)),
            holder: Some(t.clone()),
        }
    }

    /// Rate parameters from the hardest component. No constructive benchmark.
    pub fn compositional(spec: &CompositionalSpec) -> Self {
        let (a, b) = (spec.clone(), spec.clone());
        let (_, _, d, s) = spec.hardest(true).unwrap_or((0, 0, spec.input_dim as f64, 1.0));
        RegressionTarget {
            name: "compositional".into(),
            s,
            d,
            input_dim: spec.input_dim,
            value: Arc::new(move |x: &[f64]| a.eval(x)),
            sampler: Arc::new(move |rng: &mut ChaCha8Rng| b.sample(rng)),
            holder: None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (self.sampler)(rng)
    }

    /// Rate exponent `−2s/(2s+d)`.
    pub fn exponent(&self) -> f64 {
        -2.0 * self.s / (2.0 * self.s + self.d)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimizerConfig {
    pub step_size: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// Lower bound on the number of steps per run.
    pub min_steps: usize,
    pub epochs: usize,
    pub restarts: usize,
    /// Gradient norm cap per step.
    pub grad_clip: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            step_size: 0.05,
            momentum: 0.9,
            batch_size: 32,
            min_steps: 4000,
            epochs: 60,
            restarts: 3,
            grad_clip: 5.0,
        }
    }
}

/// Trained architecture: `L` hidden layers of width `width_factor·N`,
/// weights clipped to `[−B, B]`.
#[derive(Clone, Debug, Serialize)]
pub struct Architecture {
    pub n: usize,
    pub l: usize,
    pub width: usize,
    pub magnitude: f64,
}

#[derive(Clone, Debug)]
pub struct RegressionConfig {
    pub target: RegressionTarget,
    pub sigma: f64,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    /// Depth `L_n`, fixed along the grid.
    pub depth: usize,
    pub width_factor: usize,
    pub magnitude: f64,
    pub optimizer: OptimizerConfig,
    pub mc_samples: usize,
    pub seed: u64,
    /// Skip the constructive benchmark (always skipped for compositional targets).
    pub benchmark: bool,
}

impl RegressionConfig {
    pub fn new(target: RegressionTarget, sigma: f64, n_grid: Vec<usize>, trials: usize) -> Self {
        RegressionConfig {
            target,
            sigma,
            n_grid,
            trials,
            depth: 1,
            width_factor: 8,
            magnitude: 64.0,
            optimizer: OptimizerConfig::default(),
            mc_samples: 4000,
            seed: 0,
            benchmark: true,
        }
    }

    fn check(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) || self.n_grid[0] == 0 {
            return Err(Error::InvalidArgument("n-grid must be ascending and positive".into()));
        }
        if self.trials < 3 {
            return Err(Error::InvalidArgument("need at least 3 trials per n".into()));
        }
        if !(self.sigma >= 0.0) || self.mc_samples < 1000 || self.depth == 0 || self.width_factor == 0 {
            return Err(Error::InvalidArgument("need σ ≥ 0, mc ≥ 1000, positive depth and width".into()));
        }
        Ok(())
    }

    /// `ε_n = n^{−s/(2s+d)} log(n)^{s/(2s+d)}`.
    pub fn eps_n(&self, n: usize) -> f64 {
        let (s, d) = (self.target.s, self.target.d);
        let e = s / (2.0 * s + d);
        (n as f64).powf(-e) * (n as f64).ln().max(1.0).powf(e)
    }

    /// `(N_n, L_n)` with `N_n²L_n² ≥ ε_n^{−d/s}`.
    pub fn architecture(&self, n: usize) -> Architecture {
        let (s, d) = (self.target.s, self.target.d);
        let nl = self.eps_n(n).powf(-d / s).sqrt();
        let nn = ((nl / self.depth as f64).ceil() as usize).max(1);
        Architecture {
            n: nn,
            l: self.depth,
            width: self.width_factor * nn,
            magnitude: self.magnitude,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

/// `n` pairs `(X_i, f_0(X_i) + σ ξ_i)` with standard Gaussian `ξ_i`.
pub fn gen_regression_data(target: &RegressionTarget, sigma: f64, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma.max(0.0)).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let p = target.sample(&mut rng);
        let e = if sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        y.push(target.eval(&p) + e);
        x.push(p);
    }
    Ok(Dataset { x, y })
}

/// Plain dense MLP in binary64 for training.
#[derive(Clone, Debug)]
struct Mlp {
    // per layer: (rows, cols, w row-major, b)
    layers: Vec<(usize, usize, Vec<f64>, Vec<f64>)>,
}

impl Mlp {
    fn init(input: usize, width: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut dims = vec![input];
        dims.extend(std::iter::repeat_n(width, hidden));
        dims.push(1);
        let layers = dims
            .windows(2)
            .map(|w| {
                let std = (2.0 / w[0] as f64).sqrt();
                let normal = Normal::new(0.0, std).unwrap();
                let weights = (0..w[0] * w[1]).map(|_| normal.sample(rng)).collect();
                let bias = (0..w[1]).map(|_| rng.random_range(-0.5..0.5) * std).collect();
                (w[1], w[0], weights, bias)
            })
            .collect();
        Mlp { layers }
    }

    /// Activations per layer (post-ReLU for hidden layers, raw for output).
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (k, (rows, cols, w, b)) in self.layers.iter().enumerate() {
            let h = acts.last().unwrap();
            let mut z: Vec<f64> = b.clone();
            for r in 0..*rows {
                let row = &w[r * cols..(r + 1) * cols];
                z[r] += row.iter().zip(h).map(|(a, b)| a * b).sum::<f64>();
            }
            if k < last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    fn predict(&self, x: &[f64]) -> f64 {
        self.forward(x).last().unwrap()[0]
    }

    fn loss(&self, data: &Dataset) -> f64 {
        data.x.iter().zip(&data.y).map(|(x, y)| (self.predict(x) - y).powi(2)).sum::<f64>() / data.x.len() as f64
    }

    fn zeros_like(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        self.layers.iter().map(|(_, _, w, b)| (vec![0.0; w.len()], vec![0.0; b.len()])).collect()
    }

    /// Adds the gradient of `(f(x) − y)²/m` into `grad`.
    fn backward(&self, x: &[f64], y: f64, m: f64, grad: &mut [(Vec<f64>, Vec<f64>)]) {
        let acts = self.forward(x);
        let mut delta = vec![2.0 * (acts.last().unwrap()[0] - y) / m];
        for k in (0..self.layers.len()).rev() {
            let (rows, cols, w, _) = &self.layers[k];
            let input = &acts[k];
            let (gw, gb) = &mut grad[k];
            for r in 0..*rows {
                gb[r] += delta[r];
                for c in 0..*cols {
                    gw[r * cols + c] += delta[r] * input[c];
                }
            }
            if k > 0 {
                let mut next = vec![0.0; *cols];
                for r in 0..*rows {
                    for c in 0..*cols {
                        next[c] += w[r * cols + c] * delta[r];
                    }
                }
                for (c, v) in next.iter_mut().enumerate() {
                    if input[c] <= 0.0 {
                        *v = 0.0;
                    }
                }
                delta = next;
            }
        }
    }

    fn to_network(&self) -> Result<Network<f64>> {
        let layers = self
            .layers
            .iter()
            .map(|(r, c, w, b)| Layer::new(*r, *c, w.clone(), b.clone()))
            .collect::<Result<Vec<_>>>()?;
        Network::new(layers, ScalarKind::F64)
    }
}

/// One training run of mini-batch SGD with momentum, gradient-norm capping
/// and weight clipping to `[−B, B]`.
fn sgd_run(data: &Dataset, arch: &Architecture, opt: &OptimizerConfig, seed: u64) -> Mlp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = data.x[0].len();
    let mut net = Mlp::init(input, arch.width, arch.l, &mut rng);
    let mut velocity = net.zeros_like();
    let n = data.x.len();
    let batch = opt.batch_size.min(n).max(1);
    let per_epoch = n.div_ceil(batch);
    let epochs = opt.epochs.max(opt.min_steps.div_ceil(per_epoch));
    let total = (epochs * per_epoch) as f64;
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0usize;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let mut grad = net.zeros_like();
            for &i in chunk {
                net.backward(&data.x[i], data.y[i], chunk.len() as f64, &mut grad);
            }
            let norm = grad.iter().flat_map(|(w, b)| w.iter().chain(b)).map(|g| g * g).sum::<f64>().sqrt();
            let cap = if norm > opt.grad_clip { opt.grad_clip / norm } else { 1.0 };
            // cosine decay
            let lr = opt.step_size * 0.5 * (1.0 + (std::f64::consts::PI * step as f64 / total).cos());
            for ((layer, (vw, vb)), (gw, gb)) in net.layers.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                for ((p, v), g) in layer.2.iter_mut().zip(vw.iter_mut()).zip(gw) {
                    *v = opt.momentum * *v - lr * cap * g;
                    *p = (*p + *v).clamp(-arch.magnitude, arch.magnitude);
                }
                for ((p, v), g) in layer.3.iter_mut().zip(vb.iter_mut()).zip(gb) {
                    *v = opt.momentum * *v - lr * cap * g;
                    *p = (*p + *v).clamp(-arch.magnitude, arch.magnitude);
                }
            }
            step += 1;
        }
    }
    net
}

/// Result of [`train_erm`].
#[derive(Clone, Debug)]
pub struct TrainedNet {
    pub network: Network<f64>,
    pub empirical_loss: f64,
    pub runs: usize,
    /// Set when no run reached `threshold`.
    pub suboptimal: bool,
}

/// Operational ERM: restarts SGD until the empirical loss is at most
/// `threshold` (the constructive benchmark) or the restart budget is spent,
/// keeping the best run. Pass `f64::INFINITY` to accept the first run.
pub fn train_erm(
    data: &Dataset,
    arch: &Architecture,
    opt: &OptimizerConfig,
    threshold: f64,
    seed: u64,
) -> Result<TrainedNet> {
    if data.x.is_empty() || data.x.len() != data.y.len() {
        return Err(Error::InvalidArgument("dataset must be nonempty with one response per input".into()));
    }
    if arch.width == 0 || arch.l == 0 || !(arch.magnitude > 0.0) {
        return Err(Error::InvalidArgument("architecture needs positive width, depth and B".into()));
    }
    let mut best: Option<(Mlp, f64)> = None;
    let mut runs = 0;
    for r in 0..=opt.restarts {
        runs += 1;
        let net = sgd_run(data, arch, opt, seed.wrapping_add(7919 * r as u64));
        let loss = net.loss(data);
        if best.as_ref().is_none_or(|(_, b)| loss < *b) {
            best = Some((net, loss));
        }
        if loss <= threshold {
            break;
        }
    }
    let (net, loss) = best.expect("at least one run");
    if !loss.is_finite() {
        return Err(Error::NonFinite("training diverged".into()));
    }
    Ok(TrainedNet {
        network: net.to_network()?,
        empirical_loss: loss,
        runs,
        suboptimal: loss > threshold,
    })
}

/// Monte Carlo estimate of `‖f̂ − f_0‖²_{L²(P_X)}`: mean and standard error.
pub fn risk_eval(
    predict: &(dyn Fn(&[f64]) -> f64 + Sync),
    target: &RegressionTarget,
    mc_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if mc_samples < 1000 {
        return Err(Error::InvalidArgument("risk estimates need at least 1000 samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Vec<f64>> = (0..mc_samples).map(|_| target.sample(&mut rng)).collect();
    let sq: Vec<f64> = xs.par_iter().map(|x| (predict(x) - target.eval(x)).powi(2)).collect();
    let m = mc_samples as f64;
    let mean = sq.iter().sum::<f64>() / m;
    let var = sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok((mean, (var / m).sqrt()))
}

/// One `(n, trial)` outcome.
#[derive(Clone, Debug, Serialize)]
pub struct TrialRecord {
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    #[serde(rename = "N")]
    pub big_n: usize,
    #[serde(rename = "L")]
    pub big_l: usize,
    #[serde(rename = "B")]
    pub magnitude: f64,
    pub empirical_loss: f64,
    pub benchmark_loss: f64,
    pub risk: f64,
    pub risk_se: f64,
    pub runs: usize,
    pub suboptimal: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RatePoint {
    pub n: usize,
    pub mean_risk: f64,
    pub std_risk: f64,
    pub eps_n: f64,
    /// `class_covering_bound(N_n, L_n, B, ε_n²)/n`.
    pub complexity_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateReport {
    pub target: String,
    pub sigma: f64,
    pub points: Vec<RatePoint>,
    pub slope: f64,
    pub intercept: f64,
    pub theoretical_exponent: f64,
    pub band: (f64, f64),
    pub passed: bool,
    pub suboptimal_runs: usize,
    pub records: Vec<TrialRecord>,
    pub seconds: f64,
}

impl RateReport {
    pub const CSV_HEADER: &'static str = "n,trial,seed,N,L,B,empirical_loss,benchmark_loss,risk,risk_se";

    /// One row per trial; trials that never beat the benchmark carry a
    /// trailing `suboptimal-ERM` field.
    pub fn csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:e},{:e},{:e},{:e}{}\n",
                r.n,
                r.trial,
                r.seed,
                r.big_n,
                r.big_l,
                r.magnitude,
                r.empirical_loss,
                r.benchmark_loss,
                r.risk,
                r.risk_se,
                if r.suboptimal { ",suboptimal-ERM" } else { "" }
            ));
        }
        out
    }
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let m = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Acceptance band `[1.4, 0.5]` times the theoretical exponent.
pub fn rate_band(exponent: f64) -> (f64, f64) {
    (1.4 * exponent, 0.5 * exponent)
}

type Benchmark = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// The constructive approximator for the budget `(N, L)`, or `None` when the
/// target has no Hölder description.
fn benchmark(target: &RegressionTarget, n: usize, l: usize, seed: u64) -> Result<Option<Benchmark>> {
    let Some(h) = &target.holder else { return Ok(None) };
    let cfg = ApproxConfig {
        seed,
        test_points: 1,
        discovery_samples: 200_000,
        ..ApproxConfig::new(n, l)
    };
    let kind = recommended_kind(&plan_approx(h, &cfg)?);
    let (circuit, _) = holder_approx_net::<BigFloat>(h, &cfg, kind)?;
    let circuit: Arc<Circuit<BigFloat>> = Arc::new(circuit);
    Ok(Some(Arc::new(move |x: &[f64]| {
        let xs: Vec<BigFloat> = x.iter().map(|&v| <BigFloat as Real>::from_f64(v, kind).expect("finite input")).collect();
        circuit.evaluate(&xs).map(|o| o[0].to_f64()).unwrap_or(f64::NAN)
    })))
}

/// Sweeps the `n` grid with independent seeded trials (in parallel), fits the
/// slope of log mean risk against log n and compares it with `−2s/(2s+d)`.
pub fn rate_experiment(cfg: &RegressionConfig) -> Result<RateReport> {
    cfg.check()?;
    let start = Instant::now();
    // one benchmark per distinct budget
    let mut benches: Vec<((usize, usize), Option<Benchmark>)> = Vec::new();
    if cfg.benchmark {
        for &n in &cfg.n_grid {
            let a = cfg.architecture(n);
            if !benches.iter().any(|(k, _)| *k == (a.n, a.l)) {
                benches.push(((a.n, a.l), benchmark(&cfg.target, a.n, a.l, cfg.seed)?));
            }
        }
    }
    let jobs: Vec<(usize, usize)> = cfg.n_grid.iter().flat_map(|&n| (0..cfg.trials).map(move |t| (n, t))).collect();
    let mut records: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(n, trial)| -> Result<TrialRecord> {
            let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add((n as u64) << 20 | trial as u64);
            let data = gen_regression_data(&cfg.target, cfg.sigma, n, seed)?;
            let arch = cfg.architecture(n);
            let bench = benches.iter().find(|(k, _)| *k == (arch.n, arch.l)).and_then(|(_, b)| b.clone());
            let benchmark_loss = match &bench {
                Some(f) => data.x.iter().zip(&data.y).map(|(x, y)| (f(x) - y).powi(2)).sum::<f64>() / n as f64,
                None => f64::NAN,
            };
            let threshold = if benchmark_loss.is_finite() { benchmark_loss } else { f64::INFINITY };
            let trained = train_erm(&data, &arch, &cfg.optimizer, threshold, seed ^ 0xa5a5)?;
            let net = &trained.network;
            let predict = |x: &[f64]| net.evaluate(x).map(|o| o[0]).unwrap_or(f64::NAN);
            let (risk, risk_se) = risk_eval(&predict, &cfg.target, cfg.mc_samples, seed ^ 0x5a5a)?;
            Ok(TrialRecord {
                n,
                trial,
                seed,
                big_n: arch.n,
                big_l: arch.l,
                magnitude: arch.magnitude,
                empirical_loss: trained.empirical_loss,
                benchmark_loss,
                risk,
                risk_se,
                runs: trained.runs,
                suboptimal: trained.suboptimal,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by_key(|r| (r.n, r.trial));
    let mut points = Vec::new();
    for &n in &cfg.n_grid {
        let risks: Vec<f64> = records.iter().filter(|r| r.n == n).map(|r| r.risk).collect();
        let m = risks.len() as f64;
        let mean = risks.iter().sum::<f64>() / m;
        let std = (risks.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0)).sqrt();
        let arch = cfg.architecture(n);
        let eps = cfg.eps_n(n);
        let complexity = class_covering_bound(arch.n, arch.l, arch.magnitude, eps * eps).map(|c| c / n as f64).unwrap_or(f64::NAN);
        points.push(RatePoint {
            n,
            mean_risk: mean,
            std_risk: std,
            eps_n: eps,
            complexity_ratio: complexity,
        });
    }
    let lx: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.mean_risk.max(1e-300).ln()).collect();
    let (slope, intercept) = fit_line(&lx, &ly);
    let exponent = cfg.target.exponent();
    let band = rate_band(exponent);
    Ok(RateReport {
        target: cfg.target.name.clone(),
        sigma: cfg.sigma,
        passed: slope >= band.0 && slope <= band.1,
        suboptimal_runs: records.iter().filter(|r| r.suboptimal).count(),
        points,
        slope,
        intercept,
        theoretical_exponent: exponent,
        band,
        records,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holder::target::{constant_target, sin_curve, zero_target};

    #[test]
    fn noiseless_data_is_exact() {
        let t = RegressionTarget::holder(&sin_curve(1.0).unwrap());
        let d = gen_regression_data(&t, 0.0, 50, 3).unwrap();
        for (x, y) in d.x.iter().zip(&d.y) {
            assert_eq!(*y, t.eval(x));
        }
        let again = gen_regression_data(&t, 0.0, 50, 3).unwrap();
        assert_eq!(d.x, again.x);
    }

    #[test]
    fn noise_variance() {
        let t = RegressionTarget::holder(&zero_target(1).unwrap());
        let n = 10_000;
        let d = gen_regression_data(&t, 0.5, n, 9).unwrap();
        let var = d.y.iter().map(|y| y * y).sum::<f64>() / n as f64;
        // standard error of the sample variance is σ²√(2/n)
        assert!((var - 0.25).abs() <= 3.0 * 0.25 * (2.0 / n as f64).sqrt(), "{var}");
    }

    #[test]
    fn zero_target_fits() {
        let t = RegressionTarget::holder(&zero_target(2).unwrap());
        let d = gen_regression_data(&t, 0.0, 64, 1).unwrap();
        let arch = Architecture { n: 1, l: 1, width: 8, magnitude: 10.0 };
        let out = train_erm(&d, &arch, &OptimizerConfig::default(), 1e-6, 2).unwrap();
        assert!(out.empirical_loss <= 1e-6, "{}", out.empirical_loss);
        assert!(!out.suboptimal);
    }

    #[test]
    fn training_is_deterministic() {
        let t = RegressionTarget::holder(&sin_curve(1.0).unwrap());
        let d = gen_regression_data(&t, 0.1, 64, 1).unwrap();
        let arch = Architecture { n: 1, l: 1, width: 6, magnitude: 10.0 };
        let opt = OptimizerConfig { min_steps: 300, ..Default::default() };
        let a = train_erm(&d, &arch, &opt, f64::INFINITY, 5).unwrap();
        let b = train_erm(&d, &arch, &opt, f64::INFINITY, 5).unwrap();
        assert_eq!(a.network, b.network);
        assert_eq!(a.runs, 1);
    }

    #[test]
    fn weights_respect_magnitude() {
        let t = RegressionTarget::holder(&constant_target(1, 0.9).unwrap());
        let d = gen_regression_data(&t, 0.0, 32, 1).unwrap();
        let arch = Architecture { n: 1, l: 2, width: 4, magnitude: 0.3 };
        let out = train_erm(&d, &arch, &OptimizerConfig { min_steps: 200, ..Default::default() }, f64::INFINITY, 1).unwrap();
        assert!(out.network.size_report().max_magnitude <= 0.3);
    }

    #[test]
    fn risk_closed_forms() {
        let t = RegressionTarget::holder(&constant_target(2, 0.25).unwrap());
        let (r, se) = risk_eval(&|_| 0.75, &t, 1000, 0).unwrap();
        assert!((r - 0.25).abs() < 1e-12 && se < 1e-12);
        let s = RegressionTarget::holder(&sin_curve(1.0).unwrap());
        let copy = s.clone();
        assert_eq!(risk_eval(&|x| copy.eval(x), &s, 1000, 0).unwrap().0, 0.0);
        assert!(risk_eval(&|_| 0.0, &s, 999, 0).is_err());
    }

    #[test]
    fn risk_estimate_self_consistent() {
        let s = RegressionTarget::holder(&sin_curve(1.0).unwrap());
        let f = |x: &[f64]| 0.3 * x[0];
        let (a, se_a) = risk_eval(&f, &s, 2000, 1).unwrap();
        let (b, se_b) = risk_eval(&f, &s, 20000, 2).unwrap();
        assert!((a - b).abs() <= 3.0 * (se_a * se_a + se_b * se_b).sqrt());
    }

    #[test]
    fn schedule_and_exponent() {
        let t = RegressionTarget::holder(&sin_curve(1.0).unwrap());
        assert_eq!(t.exponent(), -2.0 / 3.0);
        let cfg = RegressionConfig::new(t, 0.1, vec![128, 4096], 3);
        let (a, b) = (cfg.architecture(128), cfg.architecture(4096));
        assert!(a.n <= b.n);
        assert!(cfg.eps_n(4096) < cfg.eps_n(128));
        assert!(RegressionConfig::new(cfg.target.clone(), 0.1, vec![256, 128], 3).check().is_err());
    }

    #[test]
    fn line_fit() {
        let (s, c) = fit_line(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((s - 2.0).abs() < 1e-15 && (c - 1.0).abs() < 1e-15);
    }
}
