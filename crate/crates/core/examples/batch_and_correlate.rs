//! Drive the command-line workflow from code: synthesize a few units, run a
//! batch over a manifest, then correlate the indices with a covariate table.

use clap::Parser;
use resilience::cli::{run_batch, run_correlate, Cli, Command};
use resilience::synth::{generate, InjectedDisruption, ScenarioSpec, Trend};

fn run_args(args: &[&str]) -> Command {
    Cli::parse_from(std::iter::once("resilience").chain(args.iter().copied())).command
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut manifest = String::from("label,observed_path,expected_path,group\n");
    let mut covariates = String::from("unit,capacity\n");
    for (i, capacity) in [1.0_f64, 1.5, 2.0, 2.5, 3.0].iter().enumerate() {
        // more capacity, shallower and shorter disruptions
        let truth = generate(&ScenarioSpec {
            label: format!("unit{i}"),
            start: "2020-01".parse()?,
            horizon: 36,
            trend: Trend::Linear {
                level: 1.0,
                slope: 0.0,
            },
            seasonal_amplitude: 0.0,
            noise_sd: 0.005,
            disruptions: vec![InjectedDisruption {
                alpha: 0.5 / capacity,
                theta: 1.0,
                vartheta: 2.0,
                duration: (24.0 / capacity).round(),
                start: 3.0,
                decoy: false,
            }],
            seed: i as u64,
        })?;
        let observed = dir.path().join(format!("unit{i}_observed.csv"));
        let expected = dir.path().join(format!("unit{i}_expected.csv"));
        std::fs::write(&observed, truth.observed.to_csv())?;
        std::fs::write(&expected, truth.expected.to_csv())?;
        let group = if i < 3 { "low" } else { "high" };
        manifest.push_str(&format!("unit{i},unit{i}_observed.csv,unit{i}_expected.csv,{group}\n"));
        covariates.push_str(&format!("unit{i},{capacity}\n"));
    }
    std::fs::write(dir.path().join("manifest.csv"), manifest)?;
    std::fs::write(dir.path().join("covariates.csv"), covariates)?;

    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let Command::Batch(batch) = run_args(&["batch", "--manifest", &path("manifest.csv"), "--out", &path("out"), "--window", "1"])
    else {
        unreachable!()
    };
    let summary = run_batch(&batch)?;
    for row in &summary.rows {
        let ix = row.indices.as_ref().expect("row analysed");
        println!("{:<6} {:<5} rho {:+.3}  r {:.3}", row.label, row.group, ix.rho, ix.r);
    }

    let Command::Correlate(correlate) = run_args(&[
        "correlate",
        "--indices",
        &path("out/indices.csv"),
        "--covariates",
        &path("covariates.csv"),
        "--out",
        &path("out/correlations.json"),
    ]) else {
        unreachable!()
    };
    let table = run_correlate(&correlate)?;
    let cell = &table.cells["r"]["capacity"];
    match (cell.coefficient, cell.p) {
        (Some(c), Some(p)) => println!("corr(r, capacity) = {c:.3}, p = {p:.4}, n = {}", cell.n),
        _ => println!("corr(r, capacity) unavailable: {:?}", cell.error),
    }
    Ok(())
}
