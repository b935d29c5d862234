//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the test
//! harness so the lines always show. Set `RELUFORGE_SKIP_SLOW=1` to skip the
//! regression sweep (criterion 11).

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reluforge::bitcodec::{bit_decode_net, decode_reference, ternary_encode};
use reluforge::compositional::{
    compositional_net, enlargement_cover_bound, simulate_propagation, xy_model, CompositionalConfig,
};
use reluforge::ermlab::{rate_experiment, RegressionConfig, RegressionTarget};
use reluforge::geometry::{enlarge, greedy_cover, segment, uniform_cube, PointCloud};
use reluforge::holder::target::sin_curve;
use reluforge::holder::{holder_approx, monomial_bound, monomial_net, step_net_gap, ApproxConfig};
use reluforge::memorize::{memorize_nd, random_instance, recall_error, BUDGET_CONSTANT};
use reluforge::net::side_by_side;
use reluforge::pwl::{in_band_f64, median_smooth, pwl_net, PwlSpec, SmoothingConfig};
use reluforge::scalar::{int, pow2, rat};
use reluforge::{compose, parallelize, BigFloat, Layer, Network, ScalarKind};

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_net(rng: &mut ChaCha8Rng, d_in: usize, d_out: usize, depth: usize) -> Network<BigRational> {
    let mut dims = vec![d_in];
    for _ in 0..depth {
        dims.push(rng.random_range(1..=5));
    }
    dims.push(d_out);
    let layers = dims
        .windows(2)
        .map(|w| {
            let mut l = Layer::zeros(w[1], w[0]);
            for i in 0..w[1] {
                for j in 0..w[0] {
                    l.set(i, j, rat(rng.random_range(-9..=9), rng.random_range(1..=4)));
                }
                l.v[i] = rat(rng.random_range(-9..=9), rng.random_range(1..=4));
            }
            l
        })
        .collect();
    Network::new(layers, ScalarKind::Rational).unwrap()
}

fn random_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<BigRational> {
    (0..d).map(|_| rat(rng.random_range(-200..=200), 64)).collect()
}

fn close_f64(a: &[f64], b: &[BigRational]) -> bool {
    a.iter().zip(b).all(|(x, y)| {
        let y = reluforge::Real::to_f64(y);
        (x - y).abs() <= 1e-12 * y.abs().max(1.0)
    })
}

fn combinators() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    for _ in 0..1000 {
        let d0 = rng.random_range(1..=4);
        let d1 = rng.random_range(1..=4);
        let d2 = rng.random_range(1..=4);
        let depth = rng.random_range(0..=3);
        let g = random_net(&mut rng, d0, d1, depth);
        let depth = rng.random_range(0..=3);
        let f = random_net(&mut rng, d1, d2, depth);
        let depth = rng.random_range(1..=3);
        let h = random_net(&mut rng, d0, d2, depth);
        let fg = compose(&f, &g).map_err(|e| e.to_string())?;
        let gh = parallelize(&g, &h).map_err(|e| e.to_string())?;
        let target = g.depth().max(1) + rng.random_range(0..3);
        let ga = g.depth_align(target).map_err(|e| e.to_string())?;
        // accounting
        ensure(fg.depth() == f.depth() + g.depth(), || "compose depth".into())?;
        ensure(fg.width() <= f.width().max(g.width()), || "compose width".into())?;
        ensure(gh.depth() == g.depth().max(h.depth()), || "parallel depth".into())?;
        let pad = |n: &Network<BigRational>| if n.depth() < gh.depth() { n.width().max(2 * n.output_dim()) } else { n.width() };
        ensure(gh.width() <= pad(&g) + pad(&h), || "parallel width".into())?;
        ensure(ga.depth() == target, || "aligned depth".into())?;
        let aw = if target > g.depth() { g.width().max(2 * d1) } else { g.width() };
        ensure(ga.width() == aw, || format!("aligned width {} vs {aw}", ga.width()))?;
        // evaluation, exact and binary64
        let (f64f, f64g, f64h) = (
            f.cast::<f64>(ScalarKind::F64).unwrap(),
            g.cast::<f64>(ScalarKind::F64).unwrap(),
            h.cast::<f64>(ScalarKind::F64).unwrap(),
        );
        let fg64 = compose(&f64f, &f64g).unwrap();
        for _ in 0..3 {
            let x = random_point(&mut rng, d0);
            let gx = g.evaluate(&x).unwrap();
            let want = f.evaluate(&gx).unwrap();
            ensure(fg.evaluate(&x).unwrap() == want, || "compose value".into())?;
            let mut both = gx.clone();
            both.extend(h.evaluate(&x).unwrap());
            ensure(gh.evaluate(&x).unwrap() == both, || "parallel value".into())?;
            ensure(ga.evaluate(&x).unwrap() == gx, || "aligned value".into())?;
            let xf: Vec<f64> = x.iter().map(reluforge::Real::to_f64).collect();
            ensure(close_f64(&fg64.evaluate(&xf).unwrap(), &want), || "binary64 compose".into())?;
            ensure(close_f64(&parallelize(&f64g, &f64h).unwrap().evaluate(&xf).unwrap(), &both), || "binary64 parallel".into())?;
            checked += 1;
        }
    }
    Ok(format!("1000 random triples, {checked} points"))
}

fn bit_codec() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let len = rng.random_range(1..=48);
        let bits: Vec<u8> = (0..len).map(|_| rng.random_range(0..=1)).collect();
        let l = rng.random_range(1..=len) as u32;
        let n = rng.random_range(1..=4);
        let net = bit_decode_net(n, l).map_err(|e| e.to_string())?;
        let out = net.evaluate(&[ternary_encode(&bits)]).unwrap();
        let (y, tail) = decode_reference(&bits, l as usize);
        ensure(out == vec![y, tail], || format!("stream {bits:?} with l={l}, n={n}"))?;
    }
    Ok("200 streams exact".into())
}

fn memorization() -> Check {
    let inst = random_instance(64, 4, 8, 8, 2024).and_then(|i| i.with_delta(pow2(-8))).map_err(|e| e.to_string())?;
    // L = 8 divides s + r: exact rational recall
    let (net, rep) = memorize_nd::<BigRational>(&inst, 8, 8, 1, ScalarKind::Rational).map_err(|e| e.to_string())?;
    ensure((rep.plan.s + rep.plan.r) % 8 == 0, || "L does not divide s + r".into())?;
    let err = recall_error(&net, &inst).unwrap();
    ensure(err.is_zero(), || format!("rational recall error {err}"))?;
    ensure(rep.within, || format!("rational sizes outside {BUDGET_CONSTANT}× budget: {rep:?}"))?;
    // L = 6 does not: bigfloat recall
    let (net, rep2) = memorize_nd::<BigFloat>(&inst, 8, 6, 1, ScalarKind::bigfloat(256)).map_err(|e| e.to_string())?;
    ensure((rep2.plan.s + rep2.plan.r) % 6 != 0, || "expected a non-dividing depth".into())?;
    let err = recall_error(&net, &inst).unwrap();
    ensure(err <= pow2(-40), || "bigfloat recall error above 2^-40".into())?;
    ensure(rep2.within, || format!("bigfloat sizes outside budget: {rep2:?}"))?;
    Ok(format!(
        "exact at L=8 (width {}, depth {}), err≈2^{:.0} at L=6",
        rep.measured.width,
        rep.measured.depth,
        reluforge::Real::to_f64(&err).log2()
    ))
}

fn step_snap() -> Check {
    let mut ks: Vec<usize> = (1..=16).collect();
    ks.extend([31, 64, 100, 256, 511, 777, 1024]);
    let mut total = 0;
    for &k in &ks {
        let kk = k as i64;
        let net = step_net_gap(k, &rat(1, 4 * kk * kk)).map_err(|e| e.to_string())?;
        for j in 0..kk {
            // midpoint of the plateau [j/K, (j+1)/K − gap]
            let mid = rat(2 * j + 1, 2 * kk) - rat(1, 8 * kk * kk);
            ensure(net.evaluate(&[mid]).unwrap()[0] == rat(j, kk), || format!("K={k} plateau {j}"))?;
            total += 1;
        }
    }
    Ok(format!("{total} plateau midpoints exact, K ≤ 1024"))
}

/// Random Lipschitz piecewise-linear function on `[−1, 2]`: breakpoints and slope bound.
fn random_lipschitz(rng: &mut ChaCha8Rng) -> (Vec<(f64, f64)>, f64) {
    let lip = rng.random_range(0.2..3.0);
    let mut xs: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..2.0)).collect();
    xs.extend([-1.0, 2.0]);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut y: f64 = rng.random_range(-1.0..1.0);
    let mut pts = vec![(xs[0], y)];
    for w in xs.windows(2) {
        y += lip * rng.random_range(-1.0..=1.0) * (w[1] - w[0]);
        pts.push((w[1], y));
    }
    (pts, lip)
}

fn interp(pts: &[(f64, f64)], x: f64) -> f64 {
    let i = pts.partition_point(|p| p.0 <= x).clamp(1, pts.len() - 1);
    let ((x0, y0), (x1, y1)) = (pts[i - 1], pts[i]);
    y0 + (y1 - y0) * (x.clamp(x0, x1) - x0) / (x1 - x0)
}

/// `g` within `eps` of `f` off the band set and arbitrary (spikes) on it.
fn corrupted(rng: &mut ChaCha8Rng, f: &[(f64, f64)], k: usize, delta: f64, eps: f64) -> Network<BigRational> {
    let q = |v: f64| BigRational::from_float(v).unwrap();
    let mut nodes: Vec<f64> = f.iter().map(|p| p.0).filter(|&x| !in_band_f64(&[x], k, delta)).collect();
    for j in 1..k {
        let line = j as f64 / k as f64;
        nodes.extend([line - delta, line]);
    }
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let mut pts: Vec<(BigRational, BigRational)> = Vec::new();
    for (i, &x) in nodes.iter().enumerate() {
        pts.push((q(x), q(interp(f, x) + rng.random_range(-eps..=eps))));
        // spike inside the band that starts here
        if i + 1 < nodes.len() && in_band_f64(&[(x + nodes[i + 1]) / 2.0], k, delta) {
            let mid = (x + nodes[i + 1]) / 2.0;
            pts.push((q(mid), q(rng.random_range(-100.0..100.0))));
        }
    }
    pwl_net(&PwlSpec::new(pts).unwrap()).unwrap()
}

fn median_smoothing() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_ratio: f64 = 0.0;
    for t in 0..100 {
        let d = if t % 2 == 0 { 1 } else { 2 };
        let k = rng.random_range(3..=12);
        let delta_q = rat(1, 3 * k as i64 * rng.random_range(1..=3));
        let delta = reluforge::Real::to_f64(&delta_q);
        let eps = rng.random_range(0.0..0.05);
        let mut fs = Vec::new();
        let mut parts = Vec::new();
        for _ in 0..d {
            let (f, lip) = random_lipschitz(&mut rng);
            parts.push(corrupted(&mut rng, &f, k, delta, eps / d as f64));
            fs.push((f, lip));
        }
        let g = if d == 1 {
            parts.pop().unwrap()
        } else {
            let sum = Network::new(vec![Layer::from_rows(vec![vec![int(1), int(1)]], vec![int(0)]).unwrap()], ScalarKind::Rational).unwrap();
            compose(&sum, &side_by_side(&parts).unwrap()).unwrap()
        };
        let cfg = SmoothingConfig::new(k, delta_q, d).map_err(|e| e.to_string())?;
        let m = median_smooth(&g, &cfg).map_err(|e| e.to_string())?.cast::<f64>(ScalarKind::F64).unwrap();
        // modulus of continuity of f at δ in the ∞-norm
        let omega: f64 = fs.iter().map(|(_, lip)| lip * delta).sum();
        let bound = eps + d as f64 * omega * 1.05;
        for _ in 0..200 {
            let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let fx: f64 = fs.iter().zip(&x).map(|((f, _), &xi)| interp(f, xi)).sum();
            let err = (m.evaluate(&x).unwrap()[0] - fx).abs();
            worst_ratio = worst_ratio.max(err / bound);
            ensure(err <= bound + 1e-9, || format!("target {t}: |M_g − f| = {err} above {bound}"))?;
        }
    }
    Ok(format!("100 targets × 200 points, worst error/bound {worst_ratio:.3}"))
}

fn monomials() -> Check {
    let kind = ScalarKind::bigfloat(256);
    let alphas: [&[usize]; 4] = [&[2], &[3], &[1, 1], &[2, 1]];
    let mut worst: f64 = 0.0;
    for alpha in alphas {
        let k: usize = alpha.iter().sum();
        for (n, l) in [(1, 1), (2, 1), (1, 2)] {
            let net = monomial_net(alpha, n, l, k).map_err(|e| e.to_string())?.cast::<BigFloat>(kind).unwrap();
            let bound = monomial_bound(n, l, k);
            let grid: Vec<Vec<BigRational>> = if alpha.len() == 1 {
                (0..10_000).map(|i| vec![rat(i, 9_999)]).collect()
            } else {
                (0..100).flat_map(|i| (0..100).map(move |j| vec![rat(i, 99), rat(j, 99)])).collect()
            };
            for x in &grid {
                let xs: Vec<BigFloat> = x.iter().map(|c| BigFloat::from_rational(c, kind.limbs())).collect();
                let out = net.evaluate(&xs).unwrap()[0].to_rational();
                let exact: BigRational = x.iter().zip(alpha).map(|(c, &a)| num_traits::pow(c.clone(), a)).product();
                let err = (out - exact).abs();
                ensure(err <= bound, || format!("α={alpha:?} N={n} L={l} at {x:?}"))?;
                worst = worst.max(reluforge::Real::to_f64(&(err / &bound)));
            }
        }
    }
    Ok(format!("4 exponents × 3 budgets on 10⁴ points, worst error/bound {worst:.3}"))
}

fn holder_rate() -> Check {
    let mut notes = Vec::new();
    for s in [1.0, 2.0] {
        let target = sin_curve(s).map_err(|e| e.to_string())?;
        let (mut lx, mut ly) = (Vec::new(), Vec::new());
        for (n, l) in [(1, 2), (2, 2), (2, 4), (4, 8)] {
            let cfg = ApproxConfig {
                test_points: 200,
                ..ApproxConfig::new(n, l)
            };
            let (_, rep) = holder_approx(&target, &cfg).map_err(|e| e.to_string())?;
            ensure(rep.measured_sup_error <= rep.bound, || format!("s={s} NL={}: error above bound", n * l))?;
            lx.push(((n * l) as f64).ln());
            ly.push(rep.measured_sup_error.ln());
        }
        let (slope, _) = reluforge::ermlab::fit_line(&lx, &ly);
        let rate = -2.0 * s;
        ensure(slope >= 1.4 * rate && slope <= 0.6 * rate, || format!("s={s}: slope {slope:.2} outside [{:.1}, {:.1}]", 1.4 * rate, 0.6 * rate))?;
        notes.push(format!("s={s} slope {slope:.2}"));
    }
    Ok(notes.join(", "))
}

fn propagation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut tightest: f64 = 0.0;
    for sim in 0..500 {
        let levels = rng.random_range(1..=4);
        let mut dims = vec![rng.random_range(1..=4)];
        for i in 0..levels {
            dims.push(if i + 1 == levels { 1 } else { rng.random_range(1..=4) });
        }
        let c = rng.random_range(0.5..3.0);
        let eps: Vec<Vec<f64>> = dims[1..].iter().map(|&d| (0..d).map(|_| rng.random_range(0.0..0.1)).collect()).collect();
        let (seen, bound) = simulate_propagation(&dims, c, &eps, 50, sim).map_err(|e| e.to_string())?;
        ensure(seen <= bound.telescoped * (1.0 + 1e-12), || format!("simulation {sim}: {seen} > {}", bound.telescoped))?;
        if bound.telescoped > 0.0 {
            tightest = tightest.max(seen / bound.telescoped);
        }
    }
    Ok(format!("500 simulations, largest deviation/bound {tightest:.3}"))
}

fn enlargement() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for c in 0..50u64 {
        let m = rng.random_range(1..=5);
        let base: PointCloud = if c % 2 == 0 {
            let a: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            segment(150, &a, &b, c)
        } else {
            uniform_cube(60, m, c)
        };
        let eta = rng.random_range(0.05..0.3);
        let eps = rng.random_range(0.0..0.3);
        let plain = greedy_cover(&base, eta).map_err(|e| e.to_string())?.count;
        let wide = greedy_cover(&enlarge(&base, eps, 40, c), eta).map_err(|e| e.to_string())?.count;
        let bound = enlargement_cover_bound(plain, eps, eta, m).map_err(|e| e.to_string())?;
        ensure(wide as f64 <= bound, || format!("cloud {c}: {wide} > {bound}"))?;
        worst = worst.max(wide as f64 / bound);
    }
    Ok(format!("50 clouds, worst count/bound {worst:.3}"))
}

fn xy() -> Check {
    let (_, rep) = compositional_net(&xy_model(), 0.01, &CompositionalConfig::default()).map_err(|e| e.to_string())?;
    ensure(rep.final_sup_error <= 0.01, || format!("sup error {}", rep.final_sup_error))?;
    ensure(rep.delta_within_schedule, || format!("δ {:?} vs ε {:?}", rep.delta, rep.schedule.targets))?;
    // direct check of xy on a grid through the report's circuit is part of the δ estimate
    Ok(format!("sup error {:.2e}, δ = {:?}", rep.final_sup_error, rep.delta))
}

fn erm() -> Check {
    let target = RegressionTarget::holder(&sin_curve(1.0).map_err(|e| e.to_string())?);
    let cfg = RegressionConfig::new(target, 0.1, vec![128, 256, 512, 1024, 2048, 4096], 5);
    let rep = rate_experiment(&cfg).map_err(|e| e.to_string())?;
    ensure(rep.passed, || format!("slope {:.3} outside {:?}", rep.slope, rep.band))?;
    Ok(format!("slope {:.3} in [{:.3}, {:.3}], {} suboptimal runs", rep.slope, rep.band.0, rep.band.1, rep.suboptimal_runs))
}

fn main() -> ExitCode {
    let skip_slow = std::env::var("RELUFORGE_SKIP_SLOW").is_ok_and(|v| v == "1");
    let criteria: Vec<(u32, &str, u64, fn() -> Check)> = vec![
        (1, "combinator algebra", 30, combinators),
        (2, "bit decoding round trip", 30, bit_codec),
        (3, "memorization of 64 points", 60, memorization),
        (4, "step and snap exactness", 30, step_snap),
        (5, "median smoothing under band corruption", 60, median_smoothing),
        (6, "monomial error bound", 60, monomials),
        (7, "Hölder approximation rate", 300, holder_rate),
        (8, "error propagation bound", 30, propagation),
        (9, "covering of enlarged sets", 60, enlargement),
        (10, "xy through squares", 120, xy),
        (11, "regression rate (slow)", 1800, erm),
    ];
    let mut failed = 0;
    for (id, name, limit, run) in criteria {
        if id == 11 && skip_slow {
            println!("[SKIP] {id:>2} {name}: RELUFORGE_SKIP_SLOW=1");
            continue;
        }
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        let took = start.elapsed();
        let out = out.and_then(|m| {
            if took > Duration::from_secs(limit) {
                Err(format!("{m}; took {took:.1?}, limit {limit}s"))
            } else {
                Ok(m)
            }
        });
        match out {
            Ok(m) => println!("[PASS] {id:>2} {name}: {m} ({took:.1?})"),
            Err(m) => {
                failed += 1;
                println!("[FAIL] {id:>2} {name}: {m} ({took:.1?})");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
