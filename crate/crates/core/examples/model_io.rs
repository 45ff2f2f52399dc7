//! Save a fitted model as JSON, reload it, and predict with the copy.

use lgl::prelude::*;

fn main() -> Result<()> {
    let cfg = SimConfig {
        seed: 6,
        ..SimConfig::scaled(10, 12, 30)
    };
    let sim = generate_regression(&cfg)?;
    let design = build_lagged(&sim.dataset, cfg.tau, false)?;
    let result = fit(&design, Family::Gaussian, CorrelationStructure::Exchangeable, &FitConfig::new(5.0, 5.0))?;

    let json = result.to_json()?;
    let restored = FitResult::from_json(&json)?;
    let a = predict(&result, &design)?;
    let b = predict(&restored, &design)?;
    println!("{} bytes of JSON, predictions identical after reload: {}", json.len(), a == b);

    let mut trace = Vec::new();
    result.write_trace_csv(&mut trace)?;
    let text = String::from_utf8(trace).expect("csv is utf-8");
    println!("trace has {} rows; first lines:", text.lines().count() - 1);
    for line in text.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
