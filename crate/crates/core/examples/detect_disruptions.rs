//! Segment the relative loss and extract admitted disruption windows.

use resilience::baseline::BaselineForecast;
use resilience::detect::{detect, residuals, DetectOptions, Penalty};
use resilience::series::PerformanceSeries;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let start = "2020-01".parse()?;
    let expected = vec![100.0; 24];
    let observed: Vec<f64> = [
        100.0, 99.0, 101.0, 82.0, 70.0, 74.0, 85.0, 95.0, 100.0, 101.0, 99.0, 100.0, //
        97.0, 100.0, 88.0, 80.0, 84.0, 91.0, 97.0, 101.0, 100.0, 99.0, 101.0, 100.0,
    ]
    .to_vec();
    let observed = PerformanceSeries::new(start, observed, "clinic")?;
    let forecast = BaselineForecast::supplied(start, expected)?;

    let res = residuals(&observed, &forecast)?;
    // a small fixed penalty shows the phases; the default scales with the data
    let options = DetectOptions {
        penalty: Penalty::Fixed(0.005),
        ..DetectOptions::default()
    };
    let (segments, windows) = detect(&res, &options);
    println!("{} segments:", segments.len());
    for s in &segments {
        println!("  months {:>2}..={:>2}  mean relative loss {:+.3}", s.first, s.last, s.mean_loss);
    }
    println!("{} disruptions:", windows.len());
    for w in &windows {
        let r = w.record(start);
        println!(
            "  {} to {}, peak {} at {:.0}%",
            r.start_month,
            r.end_month,
            r.peak_month,
            100.0 * w.peak_relative_loss
        );
    }
    // the one-month dip in month 12 is too short to count
    Ok(())
}
