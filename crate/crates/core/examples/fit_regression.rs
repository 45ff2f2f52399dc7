//! Fit the longitudinal model on simulated data and score the holdout.

use lgl::fista::lambda_max;
use lgl::prelude::*;

fn main() -> Result<()> {
    let cfg = SimConfig {
        seed: 1,
        ..SimConfig::scaled(30, 25, 80)
    };
    let sim = generate_regression(&cfg)?;
    let (train, test) = split_temporal(&sim.dataset, 5, cfg.tau)?;
    let train_design = build_lagged(&train, cfg.tau, false)?;
    let test_design = build_lagged(&test, cfg.tau, false)?;

    let (m1, m2) = lambda_max(&train_design, Family::Gaussian)?;
    let fit_cfg = FitConfig::new(1e-4 * m1, 1.3e-4 * m2);
    let result = fit(&train_design, Family::Gaussian, CorrelationStructure::Ar1, &fit_cfg)?;

    let predictions = predict(&result, &test_design)?;
    println!("status {:?} after {} rounds", result.status, result.outer_iterations);
    println!("alpha {:.3} (true {}), phi {:.3}", result.working.alpha, cfg.alpha, result.working.phi);
    println!("holdout nMSE {:.3e}", nmse(predictions.view(), test_design.outcomes())?);

    let support = selected_support(&result, 1e-3);
    println!("selected lags {:?}", support.lags);
    println!("selected features ({}) {:?}", support.features.len(), support.features);
    let err = (&result.w() - &sim.w()).iter().map(|x| x * x).sum::<f64>().sqrt();
    println!("||W - W*||_F = {err:.3}");
    Ok(())
}
