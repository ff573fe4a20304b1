//! Properties that span several modules: synthetic scenarios through
//! detection, baselines and the report format.

use std::collections::BTreeMap;

use proptest::prelude::*;
use resilience::baseline::{fit, forecast, BaselineKind};
use resilience::detect::{detect, residuals, DetectOptions};
use resilience::pipeline::{analyze, AnalysisConfig, BaselineSource, ResilienceReport};
use resilience::series::split_at;
use resilience::synth::{generate, InjectedDisruption, ScenarioSpec, Trend};

fn scenario(
    shapes: &[(f64, f64, f64, usize)],
    gaps: &[usize],
    noise_sd: f64,
    seed: u64,
) -> Option<resilience::synth::ScenarioTruth> {
    let mut t = 3usize;
    let mut disruptions = Vec::new();
    for (k, &(alpha, theta, vartheta, duration)) in shapes.iter().enumerate() {
        disruptions.push(InjectedDisruption {
            alpha,
            theta,
            vartheta,
            duration: duration as f64,
            start: t as f64,
            decoy: false,
        });
        t += duration + gaps[k];
    }
    generate(&ScenarioSpec {
        label: "prop".into(),
        start: "2020-01".parse().unwrap(),
        horizon: t + 3,
        trend: Trend::Linear {
            level: 1.0,
            slope: 0.0,
        },
        seasonal_amplitude: 0.0,
        noise_sd,
        disruptions,
        seed,
    })
    .ok()
}

fn shape() -> impl Strategy<Value = (f64, f64, f64, usize)> {
    (0.15f64..0.5, 0.6f64..1.5, 0.8f64..3.0, 8usize..20)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// k admissible disruptions two or more recovered months apart, at most
    /// 1% noise: exactly k windows. Without noise each window is within a
    /// month of the truth; with noise the fitted curve is within three.
    #[test]
    fn detection_finds_each_separated_disruption(
        shapes in prop::collection::vec(shape(), 1..4),
        gaps in prop::collection::vec(3usize..7, 3),
        noise in prop_oneof![Just(0.0), 0.0f64..0.01],
        seed in 0u64..1000,
    ) {
        // a gap of g months after the curve ends leaves g − 1 zero-loss months
        let Some(truth) = scenario(&shapes, &gaps, noise, seed) else {
            return Err(TestCaseError::reject("inadmissible"));
        };
        let forecast = resilience::baseline::BaselineForecast::supplied(
            truth.expected.start(),
            truth.expected.values().to_vec(),
        ).unwrap();
        let res = residuals(&truth.observed, &forecast).unwrap();
        let (_, windows) = detect(&res, &DetectOptions::default());
        prop_assert_eq!(windows.len(), truth.disruptions.len());
        if noise == 0.0 {
            for (w, d) in windows.iter().zip(&truth.disruptions) {
                prop_assert!(w.start_index.abs_diff(d.start_index) <= 1, "{:?} vs {:?}", w, d);
                prop_assert!(w.end_index.abs_diff(d.end_index) <= 1, "{:?} vs {:?}", w, d);
            }
        } else {
            // noise months next to a sharp onset can widen the window itself,
            // so the fitted curve carries the boundary check
            let a = analyze(
                &truth.observed,
                &BaselineSource::Supplied(truth.expected.clone()),
                &AnalysisConfig { window: 1, ..Default::default() },
                BTreeMap::new(),
            ).unwrap();
            prop_assert_eq!(a.fitted.len(), truth.disruptions.len());
            for (f, d) in a.fitted.iter().zip(&truth.disruptions) {
                prop_assert!((f.params.start - d.params.start).abs() <= 3.0, "{:?} vs {:?}", f.params, d.params);
                prop_assert!((f.params.end() - d.params.end()).abs() <= 3.0, "{:?} vs {:?}", f.params, d.params);
            }
        }
    }

    /// Strictly positive pre-period values give strictly positive forecasts
    /// for every model family.
    #[test]
    fn forecasts_stay_positive(
        level in 0.5f64..500.0,
        slope in -0.01f64..0.02,
        amplitude in 0.0f64..0.3,
        seed in 0u64..1000,
    ) {
        let truth = generate(&ScenarioSpec {
            label: "pos".into(),
            start: "2017-01".parse().unwrap(),
            horizon: 72,
            trend: Trend::Linear { level, slope: slope * level },
            seasonal_amplitude: amplitude,
            noise_sd: 0.02,
            disruptions: vec![],
            seed,
        }).unwrap();
        prop_assume!(truth.observed.values().iter().all(|v| *v > 0.0));
        let (pre, _) = split_at(&truth.observed, "2020-01".parse().unwrap()).unwrap();
        for kind in [BaselineKind::Covariate, BaselineKind::GeneralizedLogistic, BaselineKind::ExponentialSmoothing] {
            let model = fit(kind, &pre, Some(&truth.covariates)).unwrap();
            let f = forecast(&model, Some(&truth.covariates), 72).unwrap();
            prop_assert!(f.values().iter().all(|v| *v > 0.0), "{:?}", kind);
        }
    }

    /// Every number in a report survives a JSON round trip.
    #[test]
    fn report_numbers_round_trip(
        shapes in prop::collection::vec(shape(), 1..3),
        seed in 0u64..1000,
    ) {
        let Some(truth) = scenario(&shapes, &[4, 4, 4], 0.01, seed) else {
            return Err(TestCaseError::reject("inadmissible"));
        };
        let analysis = analyze(
            &truth.observed,
            &BaselineSource::Supplied(truth.expected.clone()),
            &AnalysisConfig::default(),
            BTreeMap::new(),
        ).unwrap();
        let json = analysis.report.to_json();
        let back: ResilienceReport = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(&back, &analysis.report);
        prop_assert_eq!(back.to_json(), json);
    }
}
