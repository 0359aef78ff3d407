//! Shared data model: tick series, binning calendars, return panels and
//! the correlation / distance matrix containers.

mod binning;
mod daily;
pub mod io;
mod matrix;

pub use binning::{bin_panel, BinGrid, BinnedReturnPanel};
pub use daily::{DailyCloses, DailyReturns};
pub use matrix::{CorrelationMatrix, DistanceMatrix, EstimatorTag, CLIP_TOLERANCE};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NANOS_PER_SEC: i64 = 1_000_000_000;

/// A single trade observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tick {
    /// Nanoseconds since the Unix epoch.
    pub timestamp_ns: i64,
    pub price: f64,
}

impl Tick {
    pub fn new(timestamp_ns: i64, price: f64) -> Self {
        Tick {
            timestamp_ns,
            price,
        }
    }
}

/// One instrument's irregular price observations.
///
/// Timestamps are strictly increasing and every price is strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickSeries {
    symbol: String,
    ticks: Vec<Tick>,
}

impl TickSeries {
    pub fn new(symbol: impl Into<String>, ticks: Vec<Tick>) -> Result<Self> {
        let symbol = symbol.into();
        for (index, tick) in ticks.iter().enumerate() {
            if !(tick.price > 0.0) || !tick.price.is_finite() {
                return Err(Error::NonPositivePrice {
                    symbol,
                    index,
                    price: tick.price,
                });
            }
        }
        if let Some(w) = ticks
            .windows(2)
            .position(|w| w[1].timestamp_ns <= w[0].timestamp_ns)
        {
            return Err(Error::invalid(format!(
                "{symbol}: timestamps not strictly increasing at observation {}",
                w + 1
            )));
        }
        Ok(TickSeries { symbol, ticks })
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn ticks(&self) -> &[Tick] {
        &self.ticks
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn first_timestamp(&self) -> Option<i64> {
        self.ticks.first().map(|t| t.timestamp_ns)
    }

    pub fn last_timestamp(&self) -> Option<i64> {
        self.ticks.last().map(|t| t.timestamp_ns)
    }

    /// Index of the last tick with `timestamp_ns <= at`.
    pub fn index_at_or_before(&self, at: i64) -> Option<usize> {
        let n = self.ticks.partition_point(|t| t.timestamp_ns <= at);
        n.checked_sub(1)
    }

    /// Previous-tick price at `at`.
    pub fn price_at_or_before(&self, at: i64) -> Option<f64> {
        self.index_at_or_before(at).map(|i| self.ticks[i].price)
    }

    /// Ticks with timestamps inside `[from, to]`.
    pub fn slice_between(&self, from: i64, to: i64) -> &[Tick] {
        let lo = self.ticks.partition_point(|t| t.timestamp_ns < from);
        let hi = self.ticks.partition_point(|t| t.timestamp_ns <= to);
        &self.ticks[lo..hi.max(lo)]
    }

    /// The series seen from inside `(from, to]`: a synthetic first tick at
    /// `from` carrying the previous-tick price (searched no earlier than
    /// `floor`), followed by the trades in `(from, to]`. `None` when no
    /// anchor price exists.
    pub fn window(&self, from: i64, to: i64, floor: i64) -> Option<TickSeries> {
        let anchor = self.index_at_or_before(from).map(|i| self.ticks[i])?;
        if anchor.timestamp_ns < floor {
            return None;
        }
        let mut ticks = vec![Tick::new(from, anchor.price)];
        ticks.extend(
            self.slice_between(from + 1, to)
                .iter()
                .copied(),
        );
        Some(TickSeries {
            symbol: self.symbol.clone(),
            ticks,
        })
    }

    pub fn log_prices(&self) -> Vec<(i64, f64)> {
        self.ticks
            .iter()
            .map(|t| (t.timestamp_ns, t.price.ln()))
            .collect()
    }
}

/// Natural log of every price, timestamps unchanged.
///
/// Fails on the first non-positive price, reporting its index.
pub fn log_price_series(symbol: &str, ticks: &[Tick]) -> Result<Vec<(i64, f64)>> {
    ticks
        .iter()
        .enumerate()
        .map(|(index, t)| {
            if t.price > 0.0 {
                Ok((t.timestamp_ns, t.price.ln()))
            } else {
                Err(Error::NonPositivePrice {
                    symbol: symbol.to_string(),
                    index,
                    price: t.price,
                })
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ticks(prices: &[f64]) -> Vec<Tick> {
        prices
            .iter()
            .enumerate()
            .map(|(i, &p)| Tick::new(i as i64 * NANOS_PER_SEC, p))
            .collect()
    }

    #[test]
    fn log_of_unit_prices_is_zero() {
        let lp = log_price_series("A", &ticks(&[1.0, 1.0])).unwrap();
        assert_eq!(lp, vec![(0, 0.0), (NANOS_PER_SEC, 0.0)]);
    }

    #[test]
    fn log_of_e_powers() {
        let e = std::f64::consts::E;
        let lp = log_price_series("A", &ticks(&[e, e * e])).unwrap();
        assert!((lp[0].1 - 1.0).abs() < 1e-15);
        assert!((lp[1].1 - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_price_rejected_with_index() {
        match log_price_series("A", &ticks(&[1.0, 2.0, 0.0])) {
            Err(Error::NonPositivePrice { index, .. }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
        match TickSeries::new("A", ticks(&[1.0, -1.0])) {
            Err(Error::NonPositivePrice { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn timestamps_must_increase() {
        let t = vec![Tick::new(5, 1.0), Tick::new(5, 1.0)];
        assert!(TickSeries::new("A", t).is_err());
    }

    #[test]
    fn previous_tick_lookup() {
        let s = TickSeries::new("A", vec![Tick::new(10, 1.0), Tick::new(20, 2.0)]).unwrap();
        assert_eq!(s.price_at_or_before(9), None);
        assert_eq!(s.price_at_or_before(10), Some(1.0));
        assert_eq!(s.price_at_or_before(19), Some(1.0));
        assert_eq!(s.price_at_or_before(25), Some(2.0));
        assert_eq!(s.slice_between(11, 20).len(), 1);
        assert_eq!(s.slice_between(21, 30).len(), 0);
    }
}
