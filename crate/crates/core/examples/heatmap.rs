//! Print |W| as a text heatmap and write the CSV form.

use lgl::fista::lambda_max;
use lgl::prelude::*;

const SHADES: [char; 5] = [' ', '.', ':', '*', '#'];

fn main() -> Result<()> {
    let cfg = SimConfig {
        seed: 5,
        ..SimConfig::scaled(24, 20, 60)
    };
    let sim = generate_regression(&cfg)?;
    let design = build_lagged(&sim.dataset, cfg.tau, false)?;
    let (m1, m2) = lambda_max(&design, Family::Gaussian)?;
    let result = fit(&design, Family::Gaussian, CorrelationStructure::Ar1, &FitConfig::new(1e-3 * m1, 1.3e-3 * m2))?;

    let w = result.w().mapv(f64::abs);
    let max = w.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    println!("feature | lag 0..{}", cfg.tau);
    for (i, row) in w.rows().into_iter().enumerate() {
        let cells: String = row
            .iter()
            .map(|&x| SHADES[((x / max) * (SHADES.len() - 1) as f64).round() as usize])
            .collect();
        println!("{:>7} | {cells}", i + 1);
    }
    result.write_heatmap_csv(std::fs::File::create("heatmap.csv")?)?;
    println!("wrote heatmap.csv");
    Ok(())
}
