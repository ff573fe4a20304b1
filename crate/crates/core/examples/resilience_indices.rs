//! Adaptability and resilience from a sequence of disruption rates.

use resilience::indices::{adaptability_from_rates, classify, IndexPair, Thresholds};
use resilience::synth::{generate, InjectedDisruption, ScenarioSpec, Trend};

fn disruption(alpha: f64, theta: f64, duration: f64, start: f64) -> InjectedDisruption {
    InjectedDisruption {
        alpha,
        theta,
        vartheta: 1.5,
        duration,
        start,
        decoy: false,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // each disruption slower to bite than the last: u falls, ρ > 0
    let rates = [0.5, 0.25, 0.2];
    println!("u = {rates:?} gives rho = {:.3}", adaptability_from_rates(&rates, 1.0));

    for (name, later) in [("absorbing", 30.0), ("worsening", 6.0)] {
        let truth = generate(&ScenarioSpec {
            label: name.into(),
            start: "2020-01".parse()?,
            horizon: 56,
            trend: Trend::Linear {
                level: 1.0,
                slope: 0.0,
            },
            seasonal_amplitude: 0.0,
            noise_sd: 0.0,
            disruptions: vec![disruption(0.4, 1.0, 12.0, 2.0), disruption(0.2, 1.0, later, 18.0)],
            seed: 0,
        })?;
        let pair = classify(truth.true_indices.clone(), Thresholds::default());
        println!(
            "{name:>10}: rho {:+.3} (high: {}), r {:.3} (high: {})",
            pair.rho, pair.high_adaptability, pair.r, pair.high_resilience
        );
    }

    // classification is strict: exactly on the threshold is not high
    let edge = IndexPair::new("edge", 0.5, 0.7, 2);
    println!("rho 0.5, r 0.7 -> high adaptability {}, high resilience {}", edge.high_adaptability, edge.high_resilience);
    Ok(())
}
