//! Covariance estimators on raw tick series: realized covariance on a
//! previous-tick grid, and the Hayashi-Yoshida overlap estimator.

use serde::Serialize;

use crate::data::{TickSeries, NANOS_PER_SEC};
use crate::error::{Error, Result};

fn require_ticks(s: &TickSeries, stage: &str) -> Result<()> {
    if s.len() < 2 {
        return Err(Error::insufficient(
            stage,
            format!("{} has {} observation(s), need at least 2", s.symbol(), s.len()),
        ));
    }
    Ok(())
}

/// Regular grid `start, start + step, ...` inside the common span of both
/// series.
fn common_grid(x: &TickSeries, y: &TickSeries, sample_interval_secs: f64) -> Result<Vec<i64>> {
    let step = (sample_interval_secs * NANOS_PER_SEC as f64).round() as i64;
    if !(sample_interval_secs > 0.0) || step <= 0 {
        return Err(Error::invalid(format!(
            "sample interval {sample_interval_secs}s must be positive"
        )));
    }
    require_ticks(x, "realized-covariance")?;
    require_ticks(y, "realized-covariance")?;
    let start = x.first_timestamp().max(y.first_timestamp()).unwrap_or_default();
    let end = x.last_timestamp().min(y.last_timestamp()).unwrap_or_default();
    if end < start {
        return Err(Error::insufficient(
            "realized-covariance",
            format!("{} and {} do not share a session", x.symbol(), y.symbol()),
        ));
    }
    let n_points = ((end - start) / step + 1) as usize;
    if n_points < 2 {
        return Err(Error::insufficient(
            "realized-covariance",
            "fewer than 2 grid points in the common span",
        ));
    }
    Ok((0..n_points as i64).map(|m| start + m * step).collect())
}

/// Previous-tick log prices of `s` at each (increasing) grid time.
fn sample_log_prices(s: &TickSeries, grid: &[i64]) -> Vec<f64> {
    let ticks = s.ticks();
    let mut idx = 0;
    grid.iter()
        .map(|&g| {
            while idx + 1 < ticks.len() && ticks[idx + 1].timestamp_ns <= g {
                idx += 1;
            }
            ticks[idx].price.ln()
        })
        .collect()
}

fn increments(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Sum over grid intervals of products of log-price increments, after
/// previous-tick sampling of both series onto a regular grid starting at
/// the later of the two first observations.
pub fn realized_covariance(x: &TickSeries, y: &TickSeries, sample_interval_secs: f64) -> Result<f64> {
    let grid = common_grid(x, y, sample_interval_secs)?;
    let dx = increments(&sample_log_prices(x, &grid));
    let dy = increments(&sample_log_prices(y, &grid));
    Ok(dx.iter().zip(&dy).map(|(a, b)| a * b).sum())
}

/// Realized correlation on a common previous-tick grid; `None` if either
/// series has zero realized variance there.
pub fn realized_correlation(
    x: &TickSeries,
    y: &TickSeries,
    sample_interval_secs: f64,
) -> Result<Option<f64>> {
    let grid = common_grid(x, y, sample_interval_secs)?;
    let dx = increments(&sample_log_prices(x, &grid));
    let dy = increments(&sample_log_prices(y, &grid));
    let cov: f64 = dx.iter().zip(&dy).map(|(a, b)| a * b).sum();
    let vx: f64 = dx.iter().map(|a| a * a).sum();
    let vy: f64 = dy.iter().map(|b| b * b).sum();
    if vx == 0.0 || vy == 0.0 {
        return Ok(None);
    }
    Ok(Some(cov / (vx * vy).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyEstimate {
    pub covariance: f64,
    /// `None` when either series has zero total variation.
    pub correlation: Option<f64>,
    /// Number of overlapping increment pairs.
    pub overlaps: usize,
}

/// Log-price increments with their half-open intervals `(start, end]`.
pub(crate) struct Increments {
    pub starts: Vec<i64>,
    pub ends: Vec<i64>,
    pub returns: Vec<f64>,
}

impl Increments {
    pub(crate) fn of(s: &TickSeries) -> Self {
        let t = s.ticks();
        let n = t.len().saturating_sub(1);
        let mut inc = Increments {
            starts: Vec::with_capacity(n),
            ends: Vec::with_capacity(n),
            returns: Vec::with_capacity(n),
        };
        for w in t.windows(2) {
            inc.starts.push(w[0].timestamp_ns);
            inc.ends.push(w[1].timestamp_ns);
            inc.returns.push(w[1].price.ln() - w[0].price.ln());
        }
        inc
    }

    fn sum_sq(&self) -> f64 {
        self.returns.iter().map(|r| r * r).sum()
    }
}

/// Sum of `r_i^X r_j^Y` over all pairs of increments whose intervals
/// `(t_{i-1}, t_i]` and `(s_{j-1}, s_j]` overlap.
///
/// One linear sweep: always retire the interval that ends first. The
/// overlapping pairs form a chain that is monotone in both indices, so the
/// summation order is the same whichever series comes first and the result
/// is bit-symmetric in its arguments.
fn overlap_sum(x: &Increments, y: &Increments) -> (f64, usize) {
    let (nx, ny) = (x.returns.len(), y.returns.len());
    let (mut i, mut j) = (0, 0);
    let mut sum = 0.0;
    let mut overlaps = 0;
    while i < nx && j < ny {
        if x.starts[i] < y.ends[j] && y.starts[j] < x.ends[i] {
            sum += x.returns[i] * y.returns[j];
            overlaps += 1;
        }
        match x.ends[i].cmp(&y.ends[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    (sum, overlaps)
}

/// Hayashi-Yoshida covariance of two asynchronously observed log-price
/// series, and its normalized correlation
/// `cov / sqrt(sum (r^X)^2 * sum (r^Y)^2)`.
pub fn hayashi_yoshida(x: &TickSeries, y: &TickSeries) -> Result<HyEstimate> {
    require_ticks(x, "hayashi-yoshida")?;
    require_ticks(y, "hayashi-yoshida")?;
    let (ix, iy) = (Increments::of(x), Increments::of(y));
    let (covariance, overlaps) = overlap_sum(&ix, &iy);
    let (vx, vy) = (ix.sum_sq(), iy.sum_sq());
    let correlation = (vx > 0.0 && vy > 0.0).then(|| covariance / (vx * vy).sqrt());
    Ok(HyEstimate {
        covariance,
        correlation,
        overlaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Tick;

    fn series(sym: &str, pts: &[(i64, f64)]) -> TickSeries {
        TickSeries::new(
            sym,
            pts.iter()
                .map(|&(t, p)| Tick::new(t * NANOS_PER_SEC, p))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn copy_gives_realized_variance() {
        let x = series("X", &[(0, 10.0), (1, 10.5), (2, 10.2), (3, 11.0)]);
        let rv: f64 = [10.0f64, 10.5, 10.2, 11.0]
            .windows(2)
            .map(|w| (w[1].ln() - w[0].ln()).powi(2))
            .sum();
        assert_eq!(realized_covariance(&x, &x, 1.0).unwrap(), rv);
    }

    #[test]
    fn constant_series_has_zero_covariance() {
        let x = series("X", &[(0, 5.0), (2, 5.0), (4, 5.0)]);
        let y = series("Y", &[(0, 1.0), (1, 2.0), (4, 1.5)]);
        assert_eq!(realized_covariance(&x, &y, 1.0).unwrap(), 0.0);
        let hy = hayashi_yoshida(&x, &y).unwrap();
        assert_eq!(hy.covariance, 0.0);
        assert_eq!(hy.correlation, None);
    }

    #[test]
    fn previous_tick_sampling() {
        // x observed at 0 and 3; grid 0,2,4 samples 10, 10, 20
        let x = series("X", &[(0, 10.0), (3, 20.0), (4, 20.0)]);
        let y = series("Y", &[(0, 1.0), (1, 2.0), (4, 4.0)]);
        let cov = realized_covariance(&x, &y, 2.0).unwrap();
        let expect = (20f64.ln() - 10f64.ln()) * (4f64.ln() - 2f64.ln());
        assert!((cov - expect).abs() < 1e-15);
    }

    #[test]
    fn realized_needs_two_grid_points() {
        let x = series("X", &[(0, 1.0), (1, 1.1)]);
        assert!(realized_covariance(&x, &x, 5.0).is_err());
        assert!(realized_covariance(&x, &x, 0.0).is_err());
    }

    #[test]
    fn disjoint_sessions_do_not_overlap() {
        let x = series("X", &[(0, 1.0), (10, 1.1), (20, 1.2)]);
        let y = series("Y", &[(20, 1.0), (30, 1.3), (40, 1.1)]);
        let hy = hayashi_yoshida(&x, &y).unwrap();
        assert_eq!(hy.covariance, 0.0);
        assert_eq!(hy.overlaps, 0);
        assert_eq!(hy.correlation, Some(0.0));
    }

    #[test]
    fn overlap_counts_shared_endpoints_correctly() {
        // x: (0,2],(2,4]; y: (1,2],(2,3] -> overlaps (0,2)&(1,2) and (2,4)&(2,3)
        let x = series("X", &[(0, 1.0), (2, 2.0), (4, 3.0)]);
        let y = series("Y", &[(1, 1.0), (2, 5.0), (3, 7.0)]);
        let hy = hayashi_yoshida(&x, &y).unwrap();
        assert_eq!(hy.overlaps, 2);
        let expect = 2f64.ln() * 5f64.ln() + (3f64.ln() - 2f64.ln()) * (7f64.ln() - 5f64.ln());
        assert!((hy.covariance - expect).abs() < 1e-15);
    }

    #[test]
    fn single_observation_rejected() {
        let x = series("X", &[(0, 1.0)]);
        let y = series("Y", &[(0, 1.0), (1, 2.0)]);
        assert!(matches!(hayashi_yoshida(&x, &y), Err(Error::Insufficient { .. })));
    }
}
