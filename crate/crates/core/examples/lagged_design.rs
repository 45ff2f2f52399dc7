//! Load a small CSV and inspect the lagged examples built from it.

use lgl::prelude::*;

const DATA: &str = "\
subject_id,time,y,heart_rate,steps
1,1,0.2,61,3000
1,2,0.4,64,4200
1,3,0.1,58,2500
1,4,0.9,70,8000
2,1,1.1,75,1000
2,2,1.3,77,900
2,3,0.8,72,1500
2,4,1.0,74,1200
";

fn main() -> Result<()> {
    let ds = load_csv(DATA.as_bytes(), &CsvSchema::default())?;
    println!("features: {:?}", ds.feature_names());

    let tau = 2;
    let design = build_lagged(&ds, tau, true)?;
    println!(
        "tau = {tau}: {} examples per subject, {} rows per example (lagged outcome appended)",
        design.n_examples(),
        design.n_features()
    );
    for i in 0..design.n_subjects() {
        for k in 0..design.n_examples() {
            println!(
                "subject {} time {}: y = {}\n{}",
                design.subject_ids()[i],
                design.times()[i * design.n_examples() + k],
                design.subject_outcomes(i)[k],
                design.example(i, k)
            );
        }
    }

    let (train, test) = split_temporal(&ds, 1, tau)?;
    println!("train keeps {} times, test keeps {} (tau context + holdout)", train.n_times(), test.n_times());
    Ok(())
}
