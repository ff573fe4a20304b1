//! Group means with confidence intervals, and index/covariate correlations.

use resilience::stats::{correlation_table, group_mean_ci, pearson, UnitTable};

const INDICES: &str = "\
unit,rho,r
AL,0.41,0.66
AK,0.62,0.74
AZ,0.55,0.71
CA,0.70,0.78
CO,0.66,0.77
FL,0.48,0.69
GA,0.44,0.67
NY,0.73,0.80
";

const COVARIATES: &str = "\
unit,physicians_per_1000,vulnerability
AL,2.1,0.71
AK,2.6,0.42
AZ,2.4,0.55
CA,2.9,0.48
CO,2.8,0.31
FL,2.5,0.63
GA,2.2,0.66
NY,3.3,0.52
TX,2.3,0.60
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let indices = UnitTable::parse(INDICES)?;
    let covariates = UnitTable::parse(COVARIATES)?;

    let r: Vec<f64> = [0.66, 0.74, 0.71, 0.78, 0.77, 0.69, 0.67, 0.80].to_vec();
    let g = group_mean_ci("all", &r)?;
    println!("mean r {:.3}, 95% CI [{:.3}, {:.3}] over {} units", g.mean, g.ci_low, g.ci_high, g.count);

    let single = pearson(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0])?;
    println!("pearson on a 4-point fixture: {:.3} (p {:.3})", single.coefficient, single.p_value);

    let table = correlation_table(&indices, &covariates)?;
    println!("{} units joined, {} dropped", table.joined_units, table.dropped_units);
    println!("{}", serde_json::to_string_pretty(&table)?);
    Ok(())
}
