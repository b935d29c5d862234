use reluforge::ermlab::{rate_experiment, RegressionConfig, RegressionTarget};
use reluforge::holder::target::sin_curve;

fn main() {
    let trials: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(5);
    let target = RegressionTarget::holder(&sin_curve(1.0).unwrap());
    let cfg = RegressionConfig::new(target, 0.1, vec![128, 256, 512, 1024, 2048, 4096], trials);
    let rep = rate_experiment(&cfg).expect("sweep");
    print!("{}", rep.csv());
    for p in &rep.points {
        println!("n={} risk={:.3e} sd={:.2e} complexity={:.3}", p.n, p.mean_risk, p.std_risk, p.complexity_ratio);
    }
    println!("slope {:.3} band {:?} passed {} suboptimal {} seconds {:.1}", rep.slope, rep.band, rep.passed, rep.suboptimal_runs, rep.seconds);
}
