use chrono::NaiveDate;
use rayon::prelude::*;
use serde::Serialize;

use super::artifacts::{series_csv, ArtifactSet};
use super::config::{MissingPolicy, PipelineConfig};
use super::{dropped_names, fully_defined_symbols, maps_csv, provenance, restrict};
use crate::data::io::read_daily_file;
use crate::data::{CorrelationMatrix, DailyCloses, DistanceMatrix, EstimatorTag};
use crate::embedding::{default_penalty_weight, mds_embed, mean_distance_from_center, to_distance, EmbeddingMap};
use crate::error::{Error, Result};
use crate::estimators::{pearson_matrix, WindowSpec};
use crate::spectral::{clean_spectrum, eigendecompose};

/// Mean distance from center per emitted window, keyed by window end date.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DailySeries {
    pub dates: Vec<NaiveDate>,
    pub mean_distance: Vec<f64>,
}

pub struct DailyOutput {
    pub series: DailySeries,
    pub maps: Vec<EmbeddingMap>,
    pub artifacts: ArtifactSet,
}

#[derive(Serialize)]
struct WindowRecord<'a> {
    start: NaiveDate,
    end: NaiveDate,
    dropped: &'a [String],
    /// Whether the map was warm-started from the previous window.
    chained: bool,
    correlation: &'a CorrelationMatrix,
    distance: &'a DistanceMatrix,
    map: &'a EmbeddingMap,
}

struct Prepared {
    start: NaiveDate,
    end: NaiveDate,
    dropped: Vec<String>,
    correlation: CorrelationMatrix,
    distance: DistanceMatrix,
}

/// Read the configured daily CSV and run the daily pipeline on it.
pub fn run_daily_pipeline(config: &PipelineConfig) -> Result<DailyOutput> {
    config.validate()?;
    let [path] = config.inputs.as_slice() else {
        return Err(Error::invalid("daily mode reads exactly one input file"));
    };
    daily_from_closes(&read_daily_file(path)?, config)
}

/// Windowed correlations of daily log returns, optional spectral cleaning,
/// distances and chained maps.
///
/// A map is warm-started from the previous window's map when both cover the
/// same symbols, otherwise it starts cold.
pub fn daily_from_closes(closes: &DailyCloses, config: &PipelineConfig) -> Result<DailyOutput> {
    config.validate()?;
    let width = config.window.expect("validated");
    let spec = WindowSpec::new(width, config.step.unwrap_or(width))?;
    let returns = closes.log_returns();
    let total = returns.n_days();
    if spec.count(total) == 0 {
        return Err(Error::insufficient(
            "windows",
            format!("{total} daily returns cannot fill a window of {width}"),
        ));
    }
    let mut art = ArtifactSet::new(provenance(config));
    let ranges: Vec<std::ops::Range<usize>> = spec.ranges(total).collect();

    let prepared: Vec<std::result::Result<Prepared, String>> = ranges
        .par_iter()
        .map(|range| prepare_window(&returns, range.clone(), config))
        .collect::<Result<_>>()?;

    let mut records: Vec<(Prepared, EmbeddingMap, bool)> = Vec::new();
    for p in prepared {
        let p = match p {
            Ok(p) => p,
            Err(reason) => {
                art.note(reason);
                continue;
            }
        };
        let prev = records
            .last()
            .map(|(_, m, _)| m)
            .filter(|m| m.symbols == p.distance.symbols());
        let weight = config
            .penalty_weight
            .unwrap_or_else(|| default_penalty_weight(&p.distance));
        let map = mds_embed(&p.distance, &config.annealing, prev, weight, config.seed)?;
        let chained = prev.is_some();
        records.push((p, map, chained));
    }
    if records.is_empty() {
        return Err(Error::insufficient("windows", "every window was skipped"));
    }

    let series = DailySeries {
        dates: records.iter().map(|(p, _, _)| p.end).collect(),
        mean_distance: records.iter().map(|(_, m, _)| mean_distance_from_center(m)).collect(),
    };
    art.add_csv(
        "mean_distance.csv",
        &series_csv("date,value", series.dates.iter().zip(&series.mean_distance).map(|(d, v)| (d, Some(*v)))),
    );
    let keyed: Vec<(NaiveDate, &EmbeddingMap)> = records.iter().map(|(p, m, _)| (p.end, m)).collect();
    art.add_csv("maps.csv", &maps_csv("date", &keyed));
    let windows: Vec<WindowRecord> = records
        .iter()
        .map(|(p, map, chained)| WindowRecord {
            start: p.start,
            end: p.end,
            dropped: &p.dropped,
            chained: *chained,
            correlation: &p.correlation,
            distance: &p.distance,
            map,
        })
        .collect();
    art.add_json("windows.json", &windows)?;
    let maps = records.into_iter().map(|(_, m, _)| m).collect();
    Ok(DailyOutput {
        series,
        maps,
        artifacts: art,
    })
}

/// Correlation and distance of one window, or the reason it is skipped.
fn prepare_window(
    returns: &crate::data::DailyReturns,
    range: std::ops::Range<usize>,
    config: &PipelineConfig,
) -> Result<std::result::Result<Prepared, String>> {
    let (start, end) = (returns.dates[range.start], returns.dates[range.end - 1]);
    let label = format!("window {start}..{end}");
    let n = returns.symbols.len();
    let complete: Vec<usize> = (0..n)
        .filter(|&i| returns.returns[i][range.clone()].iter().all(Option::is_some))
        .collect();
    let incomplete = dropped_names(&returns.symbols, &complete);
    if config.missing == MissingPolicy::SkipWindow && !incomplete.is_empty() {
        return Ok(Err(format!(
            "{label} skipped: missing dates for {}",
            incomplete.join(", ")
        )));
    }
    let symbols: Vec<String> = complete.iter().map(|&i| returns.symbols[i].clone()).collect();
    let samples: Vec<&[Option<f64>]> = complete
        .iter()
        .map(|&i| &returns.returns[i][range.clone()])
        .collect();
    let raw = pearson_matrix(&symbols, &samples, EstimatorTag::PearsonDaily)?;
    // constant series leave undefined rows
    let keep = fully_defined_symbols(&[&raw], symbols.len());
    let mut dropped = incomplete;
    dropped.extend(dropped_names(&symbols, &keep));
    if keep.len() < 2 {
        return Ok(Err(format!(
            "{label} skipped: fewer than two usable symbols (dropped: {})",
            dropped.join(", ")
        )));
    }
    let mut correlation = restrict(&raw, &keep)?;
    if config.clean {
        let q = correlation.n() as f64 / range.len() as f64;
        correlation = clean_spectrum(&eigendecompose(&correlation)?, q)?;
    }
    let distance = to_distance(&correlation)?;
    Ok(Ok(Prepared {
        start,
        end,
        dropped,
        correlation,
        distance,
    }))
}
