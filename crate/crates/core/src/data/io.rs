//! CSV ingestion of ticks and daily closes, and the panel JSON layout.
//!
//! Tick CSV: `timestamp_ns,symbol,price`, sorted per symbol.
//! Daily CSV: `date,symbol,close` with ISO-8601 dates.
//! Panel JSON: `{"symbols": [..], "grid": {..}, "shape": [N, K, T],
//! "returns": [..]}` where `returns` is row-major over (symbol, bin, day)
//! and `null` marks a missing cell.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{BinGrid, BinnedReturnPanel, DailyCloses, Tick, TickSeries};
use crate::error::{Error, Result};

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader)
}

fn check_header(
    rdr: &mut csv::Reader<impl Read>,
    expected: &[&str],
    label: &Path,
) -> Result<()> {
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(label, 1, e.to_string()))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(parse_err(
            label,
            1,
            format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

/// Parse tick CSV rows into per-symbol series, in order of first appearance.
pub fn read_ticks<R: Read>(reader: R, label: &Path) -> Result<Vec<TickSeries>> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, &["timestamp_ns", "symbol", "price"], label)?;
    let mut order: Vec<String> = Vec::new();
    let mut by_symbol: HashMap<String, Vec<Tick>> = HashMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(label, line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 3 {
            return Err(parse_err(label, line, "expected 3 fields"));
        }
        let ts: i64 = row[0]
            .parse()
            .map_err(|_| parse_err(label, line, format!("bad timestamp `{}`", &row[0])))?;
        let price: f64 = row[2]
            .parse()
            .map_err(|_| parse_err(label, line, format!("bad price `{}`", &row[2])))?;
        if !(price > 0.0) || !price.is_finite() {
            return Err(parse_err(label, line, format!("non-positive price {price}")));
        }
        let symbol = &row[1];
        if symbol.is_empty() {
            return Err(parse_err(label, line, "empty symbol"));
        }
        let ticks = match by_symbol.get_mut(symbol) {
            Some(t) => t,
            None => {
                order.push(symbol.to_string());
                by_symbol.entry(symbol.to_string()).or_default()
            }
        };
        if let Some(prev) = ticks.last() {
            if ts <= prev.timestamp_ns {
                return Err(parse_err(
                    label,
                    line,
                    format!("timestamps for {symbol} not strictly increasing"),
                ));
            }
        }
        ticks.push(Tick::new(ts, price));
    }
    order
        .into_iter()
        .map(|s| {
            let ticks = by_symbol.remove(&s).unwrap_or_default();
            TickSeries::new(s, ticks)
        })
        .collect()
}

pub fn read_ticks_file(path: &Path) -> Result<Vec<TickSeries>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_ticks(std::io::BufReader::new(file), path)
}

/// Write ticks merged in time order (ties broken by input order).
pub fn write_ticks<W: Write>(writer: W, series: &[TickSeries]) -> Result<()> {
    let mut rows: Vec<(i64, usize, f64)> = series
        .iter()
        .enumerate()
        .flat_map(|(s, ts)| ts.ticks().iter().map(move |t| (t.timestamp_ns, s, t.price)))
        .collect();
    rows.sort_by_key(|&(ts, s, _)| (ts, s));
    let mut w = std::io::BufWriter::new(writer);
    let io_err = |e| Error::io("<tick csv>", e);
    writeln!(w, "timestamp_ns,symbol,price").map_err(io_err)?;
    for (ts, s, price) in rows {
        writeln!(w, "{ts},{},{price}", series[s].symbol()).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Parse daily close CSV onto the union calendar of all dates present.
pub fn read_daily<R: Read>(reader: R, label: &Path) -> Result<DailyCloses> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, &["date", "symbol", "close"], label)?;
    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<(NaiveDate, usize, f64, u64)> = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(label, line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 3 {
            return Err(parse_err(label, line, "expected 3 fields"));
        }
        let date = NaiveDate::parse_from_str(&row[0], "%Y-%m-%d")
            .map_err(|_| parse_err(label, line, format!("bad date `{}`", &row[0])))?;
        let close: f64 = row[2]
            .parse()
            .map_err(|_| parse_err(label, line, format!("bad close `{}`", &row[2])))?;
        if !(close > 0.0) || !close.is_finite() {
            return Err(parse_err(label, line, format!("non-positive close {close}")));
        }
        let sym = &row[1];
        let idx = *index.entry(sym.to_string()).or_insert_with(|| {
            order.push(sym.to_string());
            order.len() - 1
        });
        rows.push((date, idx, close, line));
    }
    let dates: Vec<NaiveDate> = rows
        .iter()
        .map(|r| r.0)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let date_idx: HashMap<NaiveDate, usize> =
        dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let mut closes = vec![vec![None; dates.len()]; order.len()];
    for (date, s, close, line) in rows {
        let cell = &mut closes[s][date_idx[&date]];
        if cell.is_some() {
            return Err(parse_err(
                label,
                line,
                format!("duplicate close for {} on {date}", order[s]),
            ));
        }
        *cell = Some(close);
    }
    DailyCloses::new(order, dates, closes)
}

pub fn read_daily_file(path: &Path) -> Result<DailyCloses> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_daily(std::io::BufReader::new(file), path)
}

pub fn write_daily<W: Write>(writer: W, closes: &DailyCloses) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    let io_err = |e| Error::io("<daily csv>", e);
    writeln!(w, "date,symbol,close").map_err(io_err)?;
    for (d, date) in closes.dates.iter().enumerate() {
        for (s, sym) in closes.symbols.iter().enumerate() {
            if let Some(c) = closes.closes[s][d] {
                writeln!(w, "{},{sym},{c}", date.format("%Y-%m-%d")).map_err(io_err)?;
            }
        }
    }
    w.flush().map_err(io_err)
}

#[derive(Serialize, Deserialize)]
struct PanelFile {
    symbols: Vec<String>,
    grid: BinGrid,
    shape: [usize; 3],
    returns: Vec<Option<f64>>,
}

pub fn panel_to_json(panel: &BinnedReturnPanel) -> Result<String> {
    let (n, k, t) = panel.shape();
    let file = PanelFile {
        symbols: panel.symbols().to_vec(),
        grid: panel.grid().clone(),
        shape: [n, k, t],
        returns: panel.cells().to_vec(),
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn panel_from_json(s: &str) -> Result<BinnedReturnPanel> {
    let file: PanelFile = serde_json::from_str(s)?;
    // re-validate the grid; serde bypasses the constructor
    let grid = BinGrid::new(
        file.grid.session_start(),
        file.grid.session_end(),
        file.grid.bin_width_secs(),
        file.grid.trading_days().to_vec(),
    )?;
    let expected = [file.symbols.len(), grid.n_bins(), grid.n_days()];
    if file.shape != expected {
        return Err(Error::invalid(format!(
            "panel shape {:?} disagrees with symbols/grid {:?}",
            file.shape, expected
        )));
    }
    BinnedReturnPanel::new(file.symbols, grid, file.returns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveTime;

    fn label() -> &'static Path {
        Path::new("test.csv")
    }

    #[test]
    fn reads_interleaved_ticks() {
        let csv = "timestamp_ns,symbol,price\n1,A,10\n2,B,20\n3,A,11\n";
        let s = read_ticks(csv.as_bytes(), label()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].symbol(), "A");
        assert_eq!(s[0].len(), 2);
        assert_eq!(s[1].ticks()[0], Tick::new(2, 20.0));
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let csv = "timestamp_ns,symbol,price\n1,A,10\n2,A,abc\n";
        match read_ticks(csv.as_bytes(), label()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let csv = "timestamp_ns,symbol,price\n5,A,10\n2,A,11\n";
        match read_ticks(csv.as_bytes(), label()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let csv = "ts,symbol,price\n";
        assert!(matches!(
            read_ticks(csv.as_bytes(), label()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn tick_csv_round_trip() {
        let a = TickSeries::new("A", vec![Tick::new(1, 1.5), Tick::new(4, 2.25)]).unwrap();
        let b = TickSeries::new("B", vec![Tick::new(2, 3.0)]).unwrap();
        let mut buf = Vec::new();
        write_ticks(&mut buf, &[a.clone(), b.clone()]).unwrap();
        let back = read_ticks(buf.as_slice(), label()).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn daily_union_calendar_and_duplicates() {
        let csv = "date,symbol,close\n2008-01-02,A,10\n2008-01-03,A,11\n2008-01-03,B,5\n";
        let d = read_daily(csv.as_bytes(), label()).unwrap();
        assert_eq!(d.dates.len(), 2);
        assert_eq!(d.closes[1], vec![None, Some(5.0)]);
        let dup = "date,symbol,close\n2008-01-02,A,10\n2008-01-02,A,11\n";
        assert!(matches!(
            read_daily(dup.as_bytes(), label()),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn panel_json_uses_null_for_missing() {
        let grid = BinGrid::new(
            NaiveTime::from_hms_opt(10, 0, 0).unwrap(),
            NaiveTime::from_hms_opt(11, 0, 0).unwrap(),
            1800,
            vec![NaiveDate::from_ymd_opt(2011, 3, 1).unwrap()],
        )
        .unwrap();
        let panel =
            BinnedReturnPanel::new(vec!["A".into()], grid, vec![Some(0.5), None]).unwrap();
        let json = panel_to_json(&panel).unwrap();
        assert!(json.contains("\"returns\":[0.5,null]"));
        assert!(json.contains("\"shape\":[1,2,1]"));
        assert_eq!(panel_from_json(&json).unwrap(), panel);
    }
}
