//! Fit the beta loss curve to one detected window and read off its rates.

use resilience::baseline::BaselineForecast;
use resilience::betafit::{beta_loss, beta_loss_integral, fit_disruption, BetaDisruptionParams};
use resilience::detect::{detect, residuals, DetectOptions};
use resilience::series::PerformanceSeries;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let start = "2020-01".parse()?;
    let truth = BetaDisruptionParams::new(0.35, 1.0, 2.5, 14.0, 3.0)?;
    let observed: Vec<f64> = (0..24).map(|t| 1.0 - beta_loss(&truth, t as f64)).collect();
    let observed = PerformanceSeries::new(start, observed, "unit")?;
    let forecast = BaselineForecast::supplied(start, vec![1.0; 24])?;

    let (_, windows) = detect(&residuals(&observed, &forecast)?, &DetectOptions::default());
    let fitted = fit_disruption(&windows[0], &observed, &forecast)?;
    let p = fitted.params;
    println!("            alpha   theta  vartheta      T     t_s");
    println!(
        "injected  {:6.3}  {:6.3}  {:8.3}  {:5.1}  {:6.1}",
        truth.alpha, truth.theta, truth.vartheta, truth.duration, truth.start
    );
    println!(
        "fitted    {:6.3}  {:6.3}  {:8.3}  {:5.1}  {:6.1}",
        p.alpha, p.theta, p.vartheta, p.duration, p.start
    );
    println!(
        "disruption rate u = {:.4}/month, recovery rate v = {:.4}/month, lost area {:.3}",
        fitted.rates.u,
        fitted.rates.v,
        beta_loss_integral(&p)
    );
    Ok(())
}
