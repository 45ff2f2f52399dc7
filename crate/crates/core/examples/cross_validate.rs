//! Subject-level K-fold search over the penalty grid.

use lgl::prelude::*;

fn main() -> Result<()> {
    let cfg = SimConfig {
        seed: 4,
        ..SimConfig::scaled(20, 20, 60)
    };
    let sim = generate_regression(&cfg)?;
    let (train, test) = split_temporal(&sim.dataset, 4, cfg.tau)?;

    let mut spec = CvSpec::scale_ratio_grid(&train, cfg.tau, Family::Gaussian, false, &[1e-4, 1e-3, 1e-2], &[1.0, 1.3])?;
    spec.folds = 3;
    spec.seed = 9;
    let cv = grid_cv(&train, cfg.tau, Family::Gaussian, CorrelationStructure::Ar1, &spec)?;
    for cell in &cv.cells {
        let mean = cell.mean().map_or("failed".to_string(), |m| format!("{m:.3e}"));
        println!("lambda1 {:>10.3} lambda2 {:>10.3}: mean {} {mean}", cell.lambda1, cell.lambda2, cv.metric);
    }
    println!("best: lambda1 {:.3}, lambda2 {:.3}", cv.lambda1, cv.lambda2);

    let design = build_lagged(&train, cfg.tau, false)?;
    let result = fit(&design, Family::Gaussian, CorrelationStructure::Ar1, &FitConfig::new(cv.lambda1, cv.lambda2))?;
    let test_design = build_lagged(&test, cfg.tau, false)?;
    let p = predict(&result, &test_design)?;
    println!("refit holdout nMSE {:.3e}", nmse(p.view(), test_design.outcomes())?);
    cv.write_csv(std::io::stdout())?;
    Ok(())
}
