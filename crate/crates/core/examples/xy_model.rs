use reluforge::compositional::{compositional_net, xy_model, CompositionalConfig};

fn main() {
    let eps: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0.01);
    let (_, rep) = compositional_net(&xy_model(), eps, &CompositionalConfig::default()).expect("build");
    println!("{}", serde_json::to_string_pretty(&rep).unwrap());
}
