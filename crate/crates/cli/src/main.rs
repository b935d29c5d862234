use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use reluforge::compositional::{compositional_net, validate_model, CompositionalConfig, SpecDoc};
use reluforge::ermlab::{rate_experiment, RegressionConfig, RegressionTarget};
use reluforge::geometry::{cover, exact_small_cover, geometric_grid, greedy_cover, minkowski_slope, PointCloud};
use reluforge::holder::{holder_approx_net, plan_approx, recommended_kind, ApproxConfig, ApproxReport, HolderTarget, TargetDoc};
use reluforge::memorize::{memorize_nd, recall_error, BudgetReport, MemorizationInstance};
use reluforge::scalar::{parse_rational, pow2};
use reluforge::{AnyNetwork, BigFloat, Circuit, Error, Real, ScalarKind};

#[derive(Parser)]
#[command(name = "reluforge", version, about = "Explicit ReLU network constructions and experiments")]
struct Cli {
    /// Arithmetic: f64, bigfloat:<bits> or rational. Each command has its own default.
    #[arg(long, global = true)]
    scalar: Option<ScalarKind>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a network file on inputs.
    Eval(EvalArgs),
    /// Build a network that recalls the labels of a point instance.
    Memorize(MemorizeArgs),
    /// Approximate a Hölder target under a width/depth budget.
    Approx(ApproxArgs),
    /// Validate and approximate a compositional model.
    Compose(ComposeArgs),
    /// ∞-ball covering number of a point cloud.
    Cover(CoverArgs),
    /// Covering-slope dimension estimate of a point cloud.
    Dim(DimArgs),
    /// Regression rate sweep with trained networks.
    ErmSweep(ErmArgs),
    /// Check a network file against a memorization instance.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    net: PathBuf,
    /// Comma-separated coordinates (decimals or p/q); repeat for several points.
    #[arg(long)]
    input: Vec<String>,
    /// CSV file with one input per row.
    #[arg(long)]
    inputs: Option<PathBuf>,
}

#[derive(Args)]
struct MemorizeArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long = "N")]
    n: usize,
    #[arg(long = "L")]
    l: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fail unless every label is recalled (exactly in rational mode, within 2^-40 otherwise).
    #[arg(long)]
    verify: bool,
}

#[derive(Args)]
struct ApproxArgs {
    /// Target file, or the name of a builtin target.
    #[arg(long)]
    target: String,
    /// Smoothness for builtin names.
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    #[arg(long = "N")]
    n: usize,
    #[arg(long = "L")]
    l: usize,
    /// CSV row with the measured error.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Flattened network file (can be large).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    test_points: usize,
    #[arg(long, default_value_t = 1_000_000)]
    discovery_samples: usize,
    /// Fail when the measured error exceeds the bound.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct ComposeArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Only check the model conditions.
    #[arg(long)]
    validate_only: bool,
    #[arg(long, default_value_t = 500)]
    probes: usize,
    #[arg(long, default_value_t = 2)]
    depth: usize,
}

#[derive(Args)]
struct CoverArgs {
    /// CSV (one point per row) or JSON cloud.
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long)]
    eps: f64,
    #[arg(long, value_parser = ["auto", "greedy", "exact"], default_value = "auto")]
    method: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DimArgs {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long)]
    hi: f64,
    #[arg(long)]
    lo: f64,
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ErmArgs {
    /// Target file, builtin name, or a compositional spec file (with --compositional).
    #[arg(long, default_value = "sin-curve")]
    target: String,
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    #[arg(long)]
    compositional: bool,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [128usize, 256, 512, 1024, 2048, 4096])]
    n: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, default_value_t = 4000)]
    mc: usize,
    #[arg(long)]
    no_benchmark: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Fail when the fitted slope is outside the band.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    instance: PathBuf,
    /// Allowed absolute recall error; defaults to 0 for rational networks and 2^-40 otherwise.
    #[arg(long)]
    tol: Option<f64>,
}

/// Reasons for a nonzero exit.
enum Failure {
    Assertion(String),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_)
            | Error::Json(_)
            | Error::Schema(_)
            | Error::ScalarParse(_)
            | Error::DimMismatch { .. }
            | Error::InvalidArgument(_)
            | Error::Validation { .. } => Failure::Input(e.to_string()),
            other => Failure::Assertion(other.to_string()),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn read(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize")
}

fn parse_point(text: &str) -> std::result::Result<Vec<BigRational>, Failure> {
    text.split(',')
        .map(|c| parse_rational(c.trim()).ok_or_else(|| Failure::Input(format!("bad coordinate {c:?}"))))
        .collect()
}

fn load_target(spec: &str, s: f64) -> std::result::Result<HolderTarget, Failure> {
    let path = Path::new(spec);
    if path.exists() {
        return Ok(TargetDoc::load(&read(path)?)?);
    }
    Ok(reluforge::holder::builtin(spec, s)?)
}

fn load_cloud(path: &Path) -> std::result::Result<PointCloud, Failure> {
    let text = read(path)?;
    let cloud = if path.extension().is_some_and(|e| e == "json") {
        PointCloud::from_json(&text)?
    } else {
        PointCloud::from_csv(&text)?
    };
    Ok(cloud)
}

fn eval(a: &EvalArgs) -> Outcome {
    let net = AnyNetwork::from_json(&read(&a.net)?)?;
    let mut points = Vec::new();
    for p in &a.input {
        points.push(parse_point(p)?);
    }
    if let Some(path) = &a.inputs {
        for line in read(path)?.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            points.push(parse_point(line)?);
        }
    }
    if points.is_empty() {
        return Err(Failure::Input("no inputs given".into()));
    }
    for p in &points {
        println!("{}", net.evaluate_text(p)?.join(","));
    }
    Ok(())
}

fn memorize(a: &MemorizeArgs, scalar: Option<ScalarKind>, seed: u64) -> Outcome {
    let inst = MemorizationInstance::from_json(&read(&a.instance)?)?;
    fn build<T: Real>(
        inst: &MemorizationInstance,
        a: &MemorizeArgs,
        seed: u64,
        kind: ScalarKind,
    ) -> std::result::Result<(String, BigRational, BudgetReport), Error> {
        let (net, report) = memorize_nd::<T>(inst, a.n, a.l, seed, kind)?;
        Ok((net.to_json(), recall_error(&net, inst)?, report))
    }
    let run = |kind: ScalarKind| match kind {
        ScalarKind::F64 => build::<f64>(&inst, a, seed, kind),
        ScalarKind::BigFloat { .. } => build::<BigFloat>(&inst, a, seed, kind),
        ScalarKind::Rational => build::<BigRational>(&inst, a, seed, kind),
    };
    // rational when the depth divides the bit count, else bigfloat
    let (kind, built) = match scalar {
        Some(k) => (k, run(k)),
        None => match run(ScalarKind::Rational) {
            Err(Error::Precondition(_)) => (ScalarKind::bigfloat(256), run(ScalarKind::bigfloat(256))),
            other => (ScalarKind::Rational, other),
        },
    };
    let (json, err, report) = built?;
    let err_f = rat_to_f64(&err);
    println!(
        "points {} scalar {kind} width {} depth {} magnitude {:.3e} within_budget {} recall_error {:e}",
        inst.len(),
        report.measured.width,
        report.measured.depth,
        report.measured.max_magnitude,
        report.within,
        err_f
    );
    if let Some(out) = &a.out {
        write(out, &json)?;
    }
    if a.verify {
        let tol = if kind == ScalarKind::Rational { BigRational::from_integer(0.into()) } else { pow2(-40) };
        if err > tol {
            return Err(Failure::Assertion(format!("recall error {err_f:e} above tolerance")));
        }
        println!("verified: all labels recalled");
    }
    Ok(())
}

fn rat_to_f64(q: &BigRational) -> f64 {
    <f64 as Real>::from_rational(q, ScalarKind::F64)
}

fn approx(a: &ApproxArgs, scalar: Option<ScalarKind>, seed: u64) -> Outcome {
    let target = load_target(&a.target, a.s)?;
    let cfg = ApproxConfig {
        seed,
        test_points: a.test_points,
        discovery_samples: a.discovery_samples,
        ..ApproxConfig::new(a.n, a.l)
    };
    let kind = match scalar {
        Some(k) => k,
        None => recommended_kind(&plan_approx(&target, &cfg)?),
    };
    fn run<T: Real>(
        t: &HolderTarget,
        cfg: &ApproxConfig,
        kind: ScalarKind,
        out: bool,
    ) -> std::result::Result<(ApproxReport, Option<String>), Error> {
        let (c, rep): (Circuit<T>, ApproxReport) = holder_approx_net::<T>(t, cfg, kind)?;
        let json = if out { Some(c.to_network()?.to_json()) } else { None };
        Ok((rep, json))
    }
    let want = a.out.is_some();
    let (rep, json) = match kind {
        ScalarKind::F64 => run::<f64>(&target, &cfg, kind, want)?,
        ScalarKind::BigFloat { .. } => run::<BigFloat>(&target, &cfg, kind, want)?,
        ScalarKind::Rational => run::<BigRational>(&target, &cfg, kind, want)?,
    };
    println!(
        "target {} K {} cells {} measured_sup_error {:.4e} bound {:.4e} width {} depth {} scalar {}",
        rep.target, rep.k, rep.occupied_cells, rep.measured_sup_error, rep.bound, rep.width, rep.depth, rep.scalar
    );
    if let Some(p) = &a.report {
        write(p, &format!("{}\n{}\n", ApproxReport::CSV_HEADER, rep.csv_row()))?;
    }
    if let Some(p) = &a.json {
        write(p, &rep.to_json())?;
    }
    if let (Some(p), Some(j)) = (&a.out, json) {
        write(p, &j)?;
    }
    if a.check && rep.measured_sup_error > rep.bound {
        return Err(Failure::Assertion("measured error above the bound".into()));
    }
    Ok(())
}

fn compose(a: &ComposeArgs, seed: u64) -> Outcome {
    let spec = SpecDoc::parse(&read(&a.spec)?)?;
    let diag = validate_model(&spec, a.probes, seed)?;
    println!("model conditions hold ({} checks)", diag.checks.len());
    if a.validate_only {
        return Ok(());
    }
    let cfg = CompositionalConfig {
        depth: a.depth,
        seed,
        ..Default::default()
    };
    let (_, rep) = compositional_net(&spec, a.eps, &cfg)?;
    print!("{}", rep.csv());
    println!(
        "final_sup_error {:.4e} eps {} propagated_bound {:.4e} delta_within_schedule {} width {} depth {}",
        rep.final_sup_error, rep.eps, rep.propagated_bound, rep.delta_within_schedule, rep.width, rep.depth
    );
    if let Some(p) = &a.report {
        write(p, &rep.csv())?;
    }
    if let Some(p) = &a.json {
        write(p, &to_json(&rep))?;
    }
    if !rep.within_eps {
        return Err(Failure::Assertion("composed error above ε".into()));
    }
    Ok(())
}

fn cover_cmd(a: &CoverArgs) -> Outcome {
    let cloud = load_cloud(&a.cloud)?;
    let rep = match a.method.as_str() {
        "greedy" => greedy_cover(&cloud, a.eps)?,
        "exact" => exact_small_cover(&cloud, a.eps)?,
        _ => cover(&cloud, a.eps)?,
    };
    if !rep.covers(&cloud) {
        return Err(Failure::Assertion("centers do not cover the cloud".into()));
    }
    println!("count {}", rep.count);
    if let Some(p) = &a.out {
        write(p, &to_json(&rep))?;
    }
    Ok(())
}

fn dim(a: &DimArgs) -> Outcome {
    let cloud = load_cloud(&a.cloud)?;
    let fit = minkowski_slope(&cloud, &geometric_grid(a.hi, a.lo, a.k))?;
    println!("slope {:.4}", fit.slope);
    if let Some(p) = &a.out {
        write(p, &to_json(&fit))?;
    }
    Ok(())
}

fn erm(a: &ErmArgs, seed: u64) -> Outcome {
    let target = if a.compositional {
        RegressionTarget::compositional(&SpecDoc::parse(&read(Path::new(&a.target))?)?)
    } else {
        RegressionTarget::holder(&load_target(&a.target, a.s)?)
    };
    let mut cfg = RegressionConfig::new(target, a.sigma, a.n.clone(), a.trials);
    cfg.mc_samples = a.mc;
    cfg.seed = seed;
    cfg.benchmark = !a.no_benchmark;
    let rep = rate_experiment(&cfg)?;
    match &a.out {
        Some(p) => write(p, &rep.csv())?,
        None => print!("{}", rep.csv()),
    }
    if let Some(p) = &a.json {
        write(p, &to_json(&rep))?;
    }
    println!(
        "slope {:.3} exponent {:.3} band [{:.3}, {:.3}] passed {} suboptimal_runs {}",
        rep.slope, rep.theoretical_exponent, rep.band.0, rep.band.1, rep.passed, rep.suboptimal_runs
    );
    if a.check && !rep.passed {
        return Err(Failure::Assertion("fitted slope outside the band".into()));
    }
    Ok(())
}

fn verify(a: &VerifyArgs) -> Outcome {
    let net = AnyNetwork::from_json(&read(&a.net)?)?;
    let inst = MemorizationInstance::from_json(&read(&a.instance)?)?;
    let err = match &net {
        AnyNetwork::F64(n) => recall_error(n, &inst)?,
        AnyNetwork::BigFloat(n) => recall_error(n, &inst)?,
        AnyNetwork::Rational(n) => recall_error(n, &inst)?,
    };
    let err_f = rat_to_f64(&err);
    let ok = match a.tol {
        Some(t) => err_f <= t,
        None if net.kind() == ScalarKind::Rational => err == BigRational::from_integer(0.into()),
        None => err <= pow2(-40),
    };
    println!("points {} recall_error {err_f:e}", inst.len());
    if !ok {
        return Err(Failure::Assertion("recall error above tolerance".into()));
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global()
            .map_err(|e| Failure::Input(e.to_string()))?;
    }
    match &cli.command {
        Command::Eval(a) => eval(a),
        Command::Memorize(a) => memorize(a, cli.scalar, cli.seed),
        Command::Approx(a) => approx(a, cli.scalar, cli.seed),
        Command::Compose(a) => compose(a, cli.seed),
        Command::Cover(a) => cover_cmd(a),
        Command::Dim(a) => dim(a),
        Command::ErmSweep(a) => erm(a, cli.seed),
        Command::Verify(a) => verify(a),
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on unknown subcommands and bad flags
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion(m)) => {
            eprintln!("assertion failed: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Input(m)) => {
            eprintln!("invalid input: {m}");
            ExitCode::from(3)
        }
    }
}
