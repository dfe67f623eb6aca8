//! Accuracy assessment: residual statistics, the flat-surface scanner
//! protocol, error budgets and clearance scenario comparison.

mod flat;
mod scenarios;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use flat::{flat_surface_protocol, FlatSurfaceSpec, PLATE_SIZES_M};
pub use scenarios::{
    read_scenarios, run_scenarios, synthetic_scenarios, Scenario, ScenarioJoints, ScenarioReport, ScenarioRow,
    SYNTHETIC_NOISE_MM,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae_mm: f64,
    pub rmse_mm: f64,
    pub max_mm: f64,
    pub n: usize,
}

impl MetricsReport {
    pub fn zero() -> Self {
        Self {
            mae_mm: 0.0,
            rmse_mm: 0.0,
            max_mm: 0.0,
            n: 1,
        }
    }

    /// Field-wise mean of several reports; `n` is the total count.
    pub fn mean(reports: &[MetricsReport]) -> Result<MetricsReport> {
        if reports.is_empty() {
            return Err(Error::EmptyInput("no reports to average"));
        }
        let k = reports.len() as f64;
        Ok(MetricsReport {
            mae_mm: reports.iter().map(|r| r.mae_mm).sum::<f64>() / k,
            rmse_mm: reports.iter().map(|r| r.rmse_mm).sum::<f64>() / k,
            max_mm: reports.iter().map(|r| r.max_mm).sum::<f64>() / k,
            n: reports.iter().map(|r| r.n).sum(),
        })
    }
}

impl fmt::Display for MetricsReport {
    /// Rounded to whole millimeters for display; the fields keep full
    /// precision.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "MAE {:.0} mm, RMSE {:.0} mm, max {:.0} mm (n = {})",
            self.mae_mm, self.rmse_mm, self.max_mm, self.n
        )
    }
}

/// Mean absolute, root-mean-square and maximum absolute value of `errors`.
pub fn metrics(errors: &[f64]) -> Result<MetricsReport> {
    if errors.is_empty() {
        return Err(Error::EmptyInput("metrics need at least one residual"));
    }
    if let Some(i) = errors.iter().position(|e| !e.is_finite()) {
        return Err(Error::InvalidGeometry(format!("residual {i} is not finite")));
    }
    let n = errors.len() as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut max = 0.0f64;
    for e in errors {
        let a = e.abs();
        abs_sum += a;
        sq_sum += a * a;
        max = max.max(a);
    }
    let mae = abs_sum / n;
    // Rounding can leave the mean a hair above the RMS or the RMS above the
    // max when every residual is equal.
    let rmse = (sq_sum / n).sqrt().max(mae).min(max);
    Ok(MetricsReport {
        mae_mm: mae.min(rmse),
        rmse_mm: rmse,
        max_mm: max,
        n: errors.len(),
    })
}

/// Upper bound on patient model error from adding per-stage errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub scanner: MetricsReport,
    pub reconstruction: MetricsReport,
    pub decimation_bound_mm: f64,
    pub composed_mae_mm: f64,
    pub composed_max_mm: f64,
}

pub fn compose_budget(scanner: &MetricsReport, recon: &MetricsReport, decimation_bound_mm: f64) -> ErrorBudget {
    ErrorBudget {
        scanner: *scanner,
        reconstruction: *recon,
        decimation_bound_mm,
        composed_mae_mm: scanner.mae_mm + recon.mae_mm + decimation_bound_mm,
        composed_max_mm: scanner.max_mm + recon.max_mm + decimation_bound_mm,
    }
}
