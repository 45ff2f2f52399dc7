//! Binary outcomes: logistic fit scored by holdout AUC.

use lgl::fista::lambda_max;
use lgl::prelude::*;

fn main() -> Result<()> {
    let cfg = SimConfig {
        seed: 2,
        ..SimConfig::scaled(20, 20, 80)
    };
    let sim = generate_classification(&cfg)?;
    let (train, test) = split_temporal(&sim.dataset, 5, cfg.tau)?;
    let train_design = build_lagged(&train, cfg.tau, false)?;
    let test_design = build_lagged(&test, cfg.tau, false)?;
    let positives = train_design.outcomes().sum() / train_design.n_total() as f64;
    println!("training prevalence {positives:.2}");

    let (m1, m2) = lambda_max(&train_design, Family::Bernoulli)?;
    for scale in [1e-3, 1e-2, 1e-1] {
        let r = fit(
            &train_design,
            Family::Bernoulli,
            CorrelationStructure::Exchangeable,
            &FitConfig::new(scale * m1, scale * m2),
        )?;
        let p = predict(&r, &test_design)?;
        println!(
            "scale {scale:>6}: holdout AUC {:.3}, alpha {:.3}, {} features",
            auc(p.view(), test_design.outcomes())?,
            r.working.alpha,
            selected_support(&r, 1e-3).features.len()
        );
    }
    Ok(())
}
