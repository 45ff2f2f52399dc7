//! Build working correlation matrices and recover alpha from residuals.

use lgl::correlation::{build_r, estimate_alpha, estimate_phi, pearson_residuals};
use lgl::prelude::*;

fn main() -> Result<()> {
    for structure in [
        CorrelationStructure::Independent,
        CorrelationStructure::Exchangeable,
        CorrelationStructure::TriDiagonal,
        CorrelationStructure::Ar1,
    ] {
        println!("{}:\n{:.3}", structure.name(), build_r(structure, 0.4, 4)?);
    }

    // residuals at the true coefficients carry the simulated AR(1) structure
    let cfg = SimConfig {
        seed: 3,
        alpha: 0.5,
        ..SimConfig::scaled(10, 20, 300)
    };
    let sim = generate_regression(&cfg)?;
    let design = build_lagged(&sim.dataset, cfg.tau, false)?;
    let gamma = pearson_residuals(&design, &sim.w(), Family::Gaussian, 1.0)?;
    let (n_total, p) = (design.n_total(), design.n_params());
    let phi = estimate_phi(&gamma, n_total, p)?;
    for structure in [CorrelationStructure::Ar1, CorrelationStructure::Exchangeable] {
        let alpha = estimate_alpha(&gamma, structure, n_total, p, phi)?;
        println!("{} alpha estimate {alpha:.3} (simulated AR(1) alpha {})", structure.name(), cfg.alpha);
    }
    println!("phi estimate {phi:.3}");
    Ok(())
}
