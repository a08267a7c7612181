//! Error metrics for volume predictions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which error metric a report or curve is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mae,
    Smape,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Mae => "mae",
            Metric::Smape => "smape",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mae" => Ok(Metric::Mae),
            "smape" => Ok(Metric::Smape),
            other => Err(Error::config(format!("unknown metric: {other}"))),
        }
    }

    pub fn compute(self, actual: &[f64], predicted: &[f64]) -> Result<f64> {
        match self {
            Metric::Mae => mae(actual, predicted),
            Metric::Smape => smape(actual, predicted),
        }
    }
}

fn check_pair(actual: &[f64], predicted: &[f64]) -> Result<()> {
    if actual.len() != predicted.len() {
        return Err(Error::data(format!(
            "metric input length mismatch: {} actual vs {} predicted",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::data("metric of empty input"));
    }
    if actual.iter().chain(predicted).any(|v| !v.is_finite()) {
        return Err(Error::data("metric input contains non-finite values"));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted)?;
    let n = actual.len() as f64;
    Ok(actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (p - a).abs())
        .sum::<f64>()
        / n)
}

/// Symmetric mean absolute percentage error, in percent.
///
/// Each term is |p − a| divided by the pair mean (a + p)/2; a pair that is
/// exactly 0 = 0 contributes zero. For non-negative inputs the result lies in
/// [0, 200]. A pair whose mean is zero but whose difference is not has no
/// defined value and is rejected.
pub fn smape(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted)?;
    let n = actual.len() as f64;
    let mut sum = 0.0;
    for (a, p) in actual.iter().zip(predicted) {
        let num = (p - a).abs();
        let den = (a + p) / 2.0;
        if num == 0.0 && den == 0.0 {
            continue;
        }
        if den == 0.0 {
            return Err(Error::runtime(format!(
                "smape undefined for pair actual={a}, predicted={p}"
            )));
        }
        sum += num / den;
    }
    Ok(sum / n * 100.0)
}
