//! Generate a seeded synthetic panel and write it as long-format CSV.
//!
//! cargo run --example simulate_dataset -- [out.csv]

use lgl::prelude::*;

fn main() -> Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "simulated.csv".into());
    let cfg = SimConfig {
        seed: 7,
        ..SimConfig::scaled(20, 15, 50)
    };
    let sim = generate_regression(&cfg)?;
    sim.dataset.write_csv(std::fs::File::create(&out)?)?;

    let w = sim.w();
    let active_rows = sim.u.rows().into_iter().filter(|r| r.iter().any(|&x| x != 0.0)).count();
    println!(
        "{} subjects x {} times x {} features -> {out}",
        sim.dataset.n_subjects(),
        sim.dataset.n_times(),
        sim.dataset.n_features()
    );
    println!("true W is {:?}, {active_rows} nonzero rows in U, zero lag columns {:?}", w.dim(), cfg.zero_lag_columns);
    println!("working correlation: {} with alpha {}", cfg.structure.name(), cfg.alpha);
    Ok(())
}
