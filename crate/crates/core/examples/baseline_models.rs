//! Fit the three baseline families on a pre-period and compare forecasts.

use resilience::baseline::{fit, forecast, BaselineKind};
use resilience::series::split_at;
use resilience::synth::{generate, ScenarioSpec, Trend};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // growing adoption with seasonality and no disruption
    let truth = generate(&ScenarioSpec {
        label: "adoption".into(),
        start: "2017-01".parse()?,
        horizon: 60,
        trend: Trend::Logistic {
            a: 50.0,
            k: 150.0,
            q: 4.0,
            b: 0.05,
            nu: 1.0,
        },
        seasonal_amplitude: 0.05,
        noise_sd: 0.01,
        disruptions: vec![],
        seed: 11,
    })?;
    let (pre, _) = split_at(&truth.observed, "2020-01".parse()?)?;

    println!("{:<24} {:>10} {:>12} {:>12}", "model", "fit SSE", "forecast 48", "truth 48");
    for kind in [
        BaselineKind::Covariate,
        BaselineKind::GeneralizedLogistic,
        BaselineKind::ExponentialSmoothing,
    ] {
        let model = fit(kind, &pre, Some(&truth.covariates))?;
        let f = forecast(&model, Some(&truth.covariates), truth.observed.len())?;
        println!(
            "{:<24} {:>10.2} {:>12.2} {:>12.2}",
            format!("{kind:?}"),
            model.fit_sse,
            f.values()[48],
            truth.expected.values()[48]
        );
    }
    Ok(())
}
