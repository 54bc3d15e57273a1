//! Bundled data.

const FAITHFUL_CSV: &str = include_str!("../data/faithful_eruptions.csv");

/// Old Faithful eruption durations in minutes (272 observations).
pub fn faithful_eruptions() -> Vec<f64> {
    FAITHFUL_CSV.lines().skip(1).filter(|l| !l.trim().is_empty()).map(|l| l.trim().parse().expect("bundled data")).collect()
}
