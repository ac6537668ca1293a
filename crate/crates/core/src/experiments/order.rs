//! Least-squares convergence-order fits on log-log data.

use log::warn;

use crate::error::{Error, Result};

/// Errors below this are treated as round-off and excluded from fits.
pub const ERROR_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OrderFit {
    /// Least-squares gradient of `ln(error)` against `ln(step)`.
    pub slope: f64,
    /// Order between each pair of consecutive usable points.
    pub per_interval: Vec<f64>,
    /// The `(step, error)` pairs the fit used.
    pub used: Vec<(f64, f64)>,
    pub excluded: usize,
}

impl OrderFit {
    /// Population standard deviation of the per-interval orders.
    pub fn per_interval_spread(&self) -> f64 {
        let k = self.per_interval.len();
        if k == 0 {
            return 0.0;
        }
        let mean = self.per_interval.iter().sum::<f64>() / k as f64;
        (self.per_interval.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / k as f64).sqrt()
    }
}

/// Fits with the default [`ERROR_FLOOR`].
pub fn fit_order(points: &[(f64, f64)]) -> Result<OrderFit> {
    fit_order_with_floor(points, ERROR_FLOOR)
}

/// `points` are `(step, error)` with strictly decreasing steps. Non-finite,
/// non-positive and below-floor errors are dropped with a warning.
pub fn fit_order_with_floor(points: &[(f64, f64)], floor: f64) -> Result<OrderFit> {
    if points.windows(2).any(|w| !(w[1].0 < w[0].0)) {
        return Err(Error::Fit("steps must be strictly decreasing".into()));
    }
    if points.iter().any(|&(s, _)| !(s > 0.0 && s.is_finite())) {
        return Err(Error::Fit("steps must be positive and finite".into()));
    }
    let used: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(s, e)| {
            let keep = e.is_finite() && e > 0.0 && e >= floor;
            if !keep {
                warn!("excluding point (step {s:e}, error {e:e}) from order fit");
            }
            keep
        })
        .collect();
    let excluded = points.len() - used.len();
    if used.len() < 2 {
        return Err(Error::Fit(format!(
            "need at least two usable points, have {}",
            used.len()
        )));
    }
    let xs: Vec<f64> = used.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let per_interval = used
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln())
        .collect();
    Ok(OrderFit {
        slope: sxy / sxx,
        per_interval,
        used,
        excluded,
    })
}
