//! Prints one approximation report row per budget for the curve target.

use reluforge::holder::{holder_approx, target::sin_curve, ApproxConfig, ApproxReport};

fn main() -> reluforge::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let s: f64 = args.get(1).map_or(1.0, |v| v.parse().expect("smoothness"));
    let tests: usize = args.get(2).map_or(300, |v| v.parse().expect("test points"));
    let target = sin_curve(s)?;
    println!("{},occupied,bits,rate_constant,taylor_constant,seconds", ApproxReport::CSV_HEADER);
    for (n, l) in [(1, 2), (2, 2), (2, 4), (4, 8)] {
        let cfg = ApproxConfig { test_points: tests, ..ApproxConfig::new(n, l) };
        let (_, rep) = holder_approx(&target, &cfg)?;
        println!(
            "{},{},{},{:.3},{:.3},{:.1}+{:.1}",
            rep.csv_row(),
            rep.occupied_cells,
            rep.scalar,
            rep.rate_constant,
            rep.taylor_constant,
            rep.build_seconds,
            rep.eval_seconds
        );
    }
    Ok(())
}
