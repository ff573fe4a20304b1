//! Parse a monthly series, smooth it and normalize it at the first month.

use resilience::series::{moving_average, normalize_at_origin, parse_series, split_at};

const CSV: &str = "\
month,value,label
2019-10,1180,clinic
2019-11,1215,clinic
2019-12,1090,clinic
2020-01,1240,clinic
2020-02,1262,clinic
2020-03,905,clinic
2020-04,610,clinic
2020-05,790,clinic
2020-06,1010,clinic
2020-07,1150,clinic
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let series = parse_series(CSV)?;
    println!("{} months from {} to {}", series.len(), series.start(), series.end());

    let smoothed = moving_average(&series, 3)?;
    let normalized = normalize_at_origin(&smoothed)?;
    for (i, v) in normalized.values().iter().enumerate() {
        println!("{}  {:>8.1}  {:.3}", normalized.month_at(i), smoothed.values()[i], v);
    }

    let (pre, post) = split_at(&normalized, "2020-03".parse()?)?;
    println!("pre-period {} months, disrupted period {} months", pre.len(), post.len());
    Ok(())
}
