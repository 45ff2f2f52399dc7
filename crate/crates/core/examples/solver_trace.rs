//! Compare inner-solver step rules on one fixed working correlation.

use lgl::correlation::WorkingCorrelation;
use lgl::fista::lambda_max;
use lgl::prelude::*;

fn main() -> Result<()> {
    let cfg = SimConfig {
        seed: 11,
        ..SimConfig::scaled(30, 20, 60)
    };
    let sim = generate_regression(&cfg)?;
    let design = build_lagged(&sim.dataset, cfg.tau, false)?;
    let working = WorkingCorrelation::new(CorrelationStructure::Ar1, 0.5, 1.0, design.n_examples())?;
    let (m1, m2) = lambda_max(&design, Family::Gaussian)?;
    println!("zeroing weights: lambda1 {m1:.1}, lambda2 {m2:.1}");

    for (label, step_mode, restart) in [
        ("fixed step", StepMode::Fixed, false),
        ("backtracking", StepMode::Backtracking, false),
        ("backtracking + restart", StepMode::Backtracking, true),
    ] {
        let inner = InnerConfig {
            step_mode,
            restart,
            max_iterations: 5000,
            ..InnerConfig::with_lambdas(0.01 * m1, 0.012 * m2)
        };
        let r = inner_solve(&design, Family::Gaussian, &working, &inner)?;
        let at = |k: usize| r.trace.get(k - 1).map_or(f64::NAN, |e| e.objective);
        println!(
            "{label:>24}: {:5} iterations, converged {}, objective at 10/100/end = {:.4e} / {:.4e} / {:.6e}",
            r.iterations(),
            r.converged,
            at(10),
            at(100),
            r.final_objective()
        );
    }
    Ok(())
}
