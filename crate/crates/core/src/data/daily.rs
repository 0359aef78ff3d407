use chrono::NaiveDate;

use crate::error::{Error, Result};

/// Daily closing prices on a shared calendar (the union of all dates seen).
#[derive(Debug, Clone, PartialEq)]
pub struct DailyCloses {
    pub symbols: Vec<String>,
    pub dates: Vec<NaiveDate>,
    /// `closes[i][d]` is the close of symbol `i` on `dates[d]`.
    pub closes: Vec<Vec<Option<f64>>>,
}

/// Daily log returns; `returns[i][d]` is the return realised on `dates[d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyReturns {
    pub symbols: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub returns: Vec<Vec<Option<f64>>>,
}

impl DailyCloses {
    pub fn new(
        symbols: Vec<String>,
        dates: Vec<NaiveDate>,
        closes: Vec<Vec<Option<f64>>>,
    ) -> Result<Self> {
        if closes.len() != symbols.len() || closes.iter().any(|c| c.len() != dates.len()) {
            return Err(Error::invalid("close table does not match symbols x dates"));
        }
        if dates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("dates must be strictly increasing"));
        }
        for (sym, row) in symbols.iter().zip(&closes) {
            if let Some(d) = row.iter().position(|c| matches!(c, Some(p) if !(*p > 0.0))) {
                return Err(Error::NonPositivePrice {
                    symbol: sym.clone(),
                    index: d,
                    price: row[d].unwrap_or(f64::NAN),
                });
            }
        }
        Ok(DailyCloses {
            symbols,
            dates,
            closes,
        })
    }

    /// `ln P(d) - ln P(d-1)` between consecutive calendar dates; missing
    /// when either close is absent.
    pub fn log_returns(&self) -> DailyReturns {
        let returns = self
            .closes
            .iter()
            .map(|row| {
                row.windows(2)
                    .map(|w| match (w[0], w[1]) {
                        (Some(a), Some(b)) => Some(b.ln() - a.ln()),
                        _ => None,
                    })
                    .collect()
            })
            .collect();
        DailyReturns {
            symbols: self.symbols.clone(),
            dates: self.dates.iter().skip(1).copied().collect(),
            returns,
        }
    }
}

impl DailyReturns {
    pub fn n_days(&self) -> usize {
        self.dates.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_returns_skip_gaps() {
        let d = |x| NaiveDate::from_ymd_opt(2008, 1, x).unwrap();
        let closes = DailyCloses::new(
            vec!["A".into()],
            vec![d(2), d(3), d(4), d(7)],
            vec![vec![Some(1.0), Some(std::f64::consts::E), None, Some(1.0)]],
        )
        .unwrap();
        let r = closes.log_returns();
        assert_eq!(r.dates, vec![d(3), d(4), d(7)]);
        assert!((r.returns[0][0].unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(r.returns[0][1], None);
        assert_eq!(r.returns[0][2], None);
    }
}
