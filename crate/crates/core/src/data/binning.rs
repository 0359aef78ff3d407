use chrono::{NaiveDate, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use super::{TickSeries, NANOS_PER_SEC};
use crate::error::{Error, Result};

/// Intraday session split into equal-width bins, repeated over a list of
/// trading days.
///
/// Bin `k` of day `t` covers `(start + k*width, start + (k+1)*width]`,
/// measured from midnight UTC of that day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinGrid {
    session_start: NaiveTime,
    session_end: NaiveTime,
    bin_width_secs: u32,
    trading_days: Vec<NaiveDate>,
}

impl BinGrid {
    pub fn new(
        session_start: NaiveTime,
        session_end: NaiveTime,
        bin_width_secs: u32,
        trading_days: Vec<NaiveDate>,
    ) -> Result<Self> {
        if bin_width_secs == 0 {
            return Err(Error::invalid("bin width must be positive"));
        }
        let start = session_start.num_seconds_from_midnight();
        let end = session_end.num_seconds_from_midnight();
        if session_start.nanosecond() != 0 || session_end.nanosecond() != 0 {
            return Err(Error::invalid("session bounds must be whole seconds"));
        }
        if end <= start {
            return Err(Error::invalid(format!(
                "session {session_start}-{session_end} is empty (K = 0)"
            )));
        }
        if !(end - start).is_multiple_of(bin_width_secs) {
            return Err(Error::invalid(format!(
                "bin width {bin_width_secs}s does not divide the session {session_start}-{session_end}"
            )));
        }
        if trading_days.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("trading days must be strictly increasing"));
        }
        Ok(BinGrid {
            session_start,
            session_end,
            bin_width_secs,
            trading_days,
        })
    }

    pub fn session_start(&self) -> NaiveTime {
        self.session_start
    }

    pub fn session_end(&self) -> NaiveTime {
        self.session_end
    }

    pub fn bin_width_secs(&self) -> u32 {
        self.bin_width_secs
    }

    pub fn trading_days(&self) -> &[NaiveDate] {
        &self.trading_days
    }

    /// Number of bins per day.
    pub fn n_bins(&self) -> usize {
        let span = self.session_end.num_seconds_from_midnight()
            - self.session_start.num_seconds_from_midnight();
        (span / self.bin_width_secs) as usize
    }

    pub fn n_days(&self) -> usize {
        self.trading_days.len()
    }

    pub fn day_midnight_ns(&self, day: usize) -> i64 {
        midnight_ns(self.trading_days[day])
    }

    /// Timestamp of boundary `j` (0..=K) on day `day`; boundary `k` opens bin `k`.
    pub fn boundary_ns(&self, day: usize, j: usize) -> i64 {
        self.day_midnight_ns(day)
            + (self.session_start.num_seconds_from_midnight() as i64
                + j as i64 * self.bin_width_secs as i64)
                * NANOS_PER_SEC
    }

    /// Same session with bins `factor` times wider.
    pub fn coarsen(&self, factor: usize) -> Result<BinGrid> {
        if factor == 0 || !self.n_bins().is_multiple_of(factor) {
            return Err(Error::invalid(format!(
                "cannot merge {} bins in groups of {factor}",
                self.n_bins()
            )));
        }
        BinGrid::new(
            self.session_start,
            self.session_end,
            self.bin_width_secs * factor as u32,
            self.trading_days.clone(),
        )
    }
}

pub(crate) fn midnight_ns(day: NaiveDate) -> i64 {
    day.and_time(NaiveTime::MIN).and_utc().timestamp() * NANOS_PER_SEC
}

/// Log returns `r[i][k][t]` for N symbols, K bins and T days. `None` marks
/// a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedReturnPanel {
    symbols: Vec<String>,
    grid: BinGrid,
    returns: Vec<Option<f64>>,
}

impl BinnedReturnPanel {
    /// `returns` is row-major over (symbol, bin, day).
    pub fn new(symbols: Vec<String>, grid: BinGrid, returns: Vec<Option<f64>>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::invalid("panel needs at least one symbol"));
        }
        let expected = symbols.len() * grid.n_bins() * grid.n_days();
        if returns.len() != expected {
            return Err(Error::invalid(format!(
                "panel holds {} cells, expected {expected} (N x K x T)",
                returns.len()
            )));
        }
        if returns.iter().flatten().any(|r| !r.is_finite()) {
            return Err(Error::invalid("panel returns must be finite"));
        }
        Ok(BinnedReturnPanel {
            symbols,
            grid,
            returns,
        })
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn grid(&self) -> &BinGrid {
        &self.grid
    }

    pub fn n_symbols(&self) -> usize {
        self.symbols.len()
    }

    pub fn n_bins(&self) -> usize {
        self.grid.n_bins()
    }

    pub fn n_days(&self) -> usize {
        self.grid.n_days()
    }

    /// `(N, K, T)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_symbols(), self.n_bins(), self.n_days())
    }

    fn index(&self, i: usize, k: usize, t: usize) -> usize {
        (i * self.n_bins() + k) * self.n_days() + t
    }

    pub fn get(&self, i: usize, k: usize, t: usize) -> Option<f64> {
        self.returns[self.index(i, k, t)]
    }

    pub(crate) fn set(&mut self, i: usize, k: usize, t: usize, value: Option<f64>) {
        let idx = self.index(i, k, t);
        self.returns[idx] = value;
    }

    /// Row-major (symbol, bin, day) cells.
    pub fn cells(&self) -> &[Option<f64>] {
        &self.returns
    }

    /// Returns of symbol `i` in bin `k`, over days.
    pub fn series(&self, i: usize, k: usize) -> &[Option<f64>] {
        let start = self.index(i, k, 0);
        &self.returns[start..start + self.n_days()]
    }

    pub fn missing_count(&self) -> usize {
        self.returns.iter().filter(|r| r.is_none()).count()
    }

    /// Merge groups of `factor` consecutive bins by summing their returns.
    /// A merged cell is missing if any constituent is missing.
    pub fn rebin(&self, factor: usize) -> Result<BinnedReturnPanel> {
        let grid = self.grid.coarsen(factor)?;
        let (n, k_new, t_len) = (self.n_symbols(), grid.n_bins(), grid.n_days());
        let mut returns = Vec::with_capacity(n * k_new * t_len);
        for i in 0..n {
            for kb in 0..k_new {
                for t in 0..t_len {
                    let sum: Option<f64> = (kb * factor..(kb + 1) * factor)
                        .map(|k| self.get(i, k, t))
                        .sum();
                    returns.push(sum);
                }
            }
        }
        BinnedReturnPanel::new(self.symbols.clone(), grid, returns)
    }
}

/// Bin tick series onto `grid` with previous-tick anchors.
///
/// The anchor at a boundary is the last trade at or before it on the same
/// calendar day; a return is never formed across days. A cell is missing
/// when either of its two anchors is unavailable.
pub fn bin_panel(ticks: &[TickSeries], grid: &BinGrid) -> Result<BinnedReturnPanel> {
    if ticks.is_empty() {
        return Err(Error::invalid("no symbols to bin"));
    }
    let (k_len, t_len) = (grid.n_bins(), grid.n_days());
    let mut returns = Vec::with_capacity(ticks.len() * k_len * t_len);
    let mut anchors = vec![None; k_len + 1];
    let mut by_day = vec![None; k_len * t_len];
    for series in ticks {
        for t in 0..t_len {
            let midnight = grid.day_midnight_ns(t);
            for (j, anchor) in anchors.iter_mut().enumerate() {
                *anchor = series
                    .index_at_or_before(grid.boundary_ns(t, j))
                    .map(|idx| series.ticks()[idx])
                    .filter(|tick| tick.timestamp_ns >= midnight)
                    .map(|tick| tick.price.ln());
            }
            for k in 0..k_len {
                by_day[k * t_len + t] = match (anchors[k], anchors[k + 1]) {
                    (Some(a), Some(b)) => Some(b - a),
                    _ => None,
                };
            }
        }
        returns.extend_from_slice(&by_day);
    }
    let symbols = ticks.iter().map(|s| s.symbol().to_string()).collect();
    BinnedReturnPanel::new(symbols, grid.clone(), returns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Tick;

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2011, 3, d).unwrap()
    }

    fn hm(h: u32, m: u32) -> NaiveTime {
        NaiveTime::from_hms_opt(h, m, 0).unwrap()
    }

    fn grid(width: u32, days: Vec<NaiveDate>) -> BinGrid {
        BinGrid::new(hm(10, 0), hm(16, 0), width, days).unwrap()
    }

    #[test]
    fn five_and_thirty_minute_bin_counts() {
        assert_eq!(grid(300, vec![day(1)]).n_bins(), 72);
        assert_eq!(grid(1800, vec![day(1)]).n_bins(), 12);
    }

    #[test]
    fn grid_validation() {
        assert!(BinGrid::new(hm(10, 0), hm(16, 0), 7 * 60, vec![]).is_err());
        assert!(BinGrid::new(hm(10, 0), hm(10, 0), 300, vec![]).is_err());
        assert!(BinGrid::new(hm(10, 0), hm(16, 0), 0, vec![]).is_err());
        assert!(BinGrid::new(hm(10, 0), hm(16, 0), 300, vec![day(2), day(1)]).is_err());
    }

    #[test]
    fn constant_price_gives_zero_returns() {
        let g = grid(1800, vec![day(1), day(2)]);
        let ticks: Vec<Tick> = (0..2)
            .flat_map(|t| {
                let open = g.boundary_ns(t, 0) - 60 * NANOS_PER_SEC;
                (0..50).map(move |m| Tick::new(open + m * 600 * NANOS_PER_SEC, 42.0))
            })
            .collect();
        let s = TickSeries::new("A", ticks).unwrap();
        let panel = bin_panel(&[s], &g).unwrap();
        assert_eq!(panel.shape(), (1, 12, 2));
        assert!(panel.cells().iter().all(|c| *c == Some(0.0)));
    }

    #[test]
    fn missing_when_no_tick_before_bin_start() {
        let g = grid(1800, vec![day(1)]);
        // first trade lands inside bin 2
        let first = g.boundary_ns(0, 2) + NANOS_PER_SEC;
        let s = TickSeries::new("A", vec![Tick::new(first, 10.0), Tick::new(first + 1, 11.0)])
            .unwrap();
        let panel = bin_panel(&[s], &g).unwrap();
        for k in 0..3 {
            assert_eq!(panel.get(0, k, 0), None, "bin {k}");
        }
        assert_eq!(panel.get(0, 3, 0), Some(0.0));
    }

    #[test]
    fn overnight_ticks_do_not_anchor_next_day() {
        let g = grid(1800, vec![day(1), day(2)]);
        let s = TickSeries::new(
            "A",
            vec![
                Tick::new(g.boundary_ns(0, 0), 10.0),
                Tick::new(g.boundary_ns(0, 12), 12.0),
            ],
        )
        .unwrap();
        let panel = bin_panel(&[s], &g).unwrap();
        assert!(panel.series(0, 0)[0].is_some());
        assert!(panel.series(0, 0)[1].is_none());
    }

    #[test]
    fn boundary_tick_belongs_to_ending_bin() {
        let g = grid(1800, vec![day(1)]);
        let s = TickSeries::new(
            "A",
            vec![
                Tick::new(g.boundary_ns(0, 0), 10.0),
                Tick::new(g.boundary_ns(0, 1), 20.0),
            ],
        )
        .unwrap();
        let panel = bin_panel(&[s], &g).unwrap();
        assert!((panel.get(0, 0, 0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(panel.get(0, 1, 0), Some(0.0));
    }

    #[test]
    fn rejects_empty_symbol_list() {
        assert!(bin_panel(&[], &grid(300, vec![day(1)])).is_err());
    }
}
