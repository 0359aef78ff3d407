use std::collections::BTreeSet;

use chrono::{DateTime, NaiveDate, NaiveTime, Timelike};
use rayon::prelude::*;
use serde::Serialize;

use super::artifacts::{fmt_opt, series_csv, ArtifactSet};
use super::config::{Estimator, MissingPolicy, Mode, PipelineConfig};
use super::{dropped_names, fully_defined_symbols, maps_csv, provenance, restrict};
use crate::data::io::{panel_from_json, read_ticks_file};
use crate::data::{bin_panel, BinGrid, BinnedReturnPanel, CorrelationMatrix, EstimatorTag, TickSeries};
use crate::embedding::{
    align_to, average_coords_across_days, average_correlations_across_days, chain_embed,
    mean_distance_from_center, to_distance, EmbeddingMap,
};
use crate::error::{Error, Result};
use crate::estimators::{
    average_pairwise_correlation, binwise_correlation, dispersion, hayashi_yoshida, normalized,
    realized_correlation, temporal_moments,
};
use crate::spectral::{binwise_spectrum_series, spectrum_series_csv};
use crate::stats::{mean, sample_std};

/// Headline per-bin series of an intraday run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntradaySeries {
    /// `lambda_1(k) / N` of the normalized binwise correlation matrix.
    pub lambda1_over_n: Vec<Option<f64>>,
    /// Average pairwise correlation per bin (across-day mean for tick
    /// estimators).
    pub avg_correlation: Vec<Option<f64>>,
    /// Across-day sample standard deviation; absent with fewer than two
    /// days or for binned estimators.
    pub avg_correlation_std: Option<Vec<Option<f64>>>,
    /// Mean distance from center of the map built from day-averaged
    /// correlations, one entry per map bin.
    pub mean_distance_avg_correlations: Vec<f64>,
    /// Same for the map obtained by averaging daily coordinates; tick
    /// estimators only.
    pub mean_distance_avg_coordinates: Option<Vec<f64>>,
}

pub struct IntradayOutput {
    pub series: IntradaySeries,
    pub artifacts: ArtifactSet,
}

#[derive(Serialize)]
struct BinMap<'a> {
    bin: usize,
    start: String,
    end: String,
    map: &'a EmbeddingMap,
}

#[derive(Serialize)]
struct BinMatrix<'a> {
    bin: usize,
    matrix: &'a CorrelationMatrix,
}

/// Read the configured inputs and run the intraday pipeline on them.
pub fn run_intraday_pipeline(config: &PipelineConfig) -> Result<IntradayOutput> {
    config.validate()?;
    if config.inputs.is_empty() {
        return Err(Error::invalid("no input files given"));
    }
    match config.mode {
        Mode::IntradayTicks => {
            let mut all = Vec::new();
            for path in &config.inputs {
                all.extend(read_ticks_file(path)?);
            }
            intraday_from_ticks(&all, config)
        }
        Mode::IntradayBinned => {
            if config.inputs.len() != 1 {
                return Err(Error::invalid("binned mode reads exactly one panel file"));
            }
            let path = &config.inputs[0];
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let panel = panel_from_json(&text)?;
            intraday_from_panel(&panel, config)
        }
        Mode::Daily => Err(Error::invalid("daily mode given to the intraday pipeline")),
    }
}

/// UTC dates with at least one trade inside the session.
fn trading_days(ticks: &[TickSeries], start: NaiveTime, end: NaiveTime) -> BTreeSet<NaiveDate> {
    let (lo, hi) = (start.num_seconds_from_midnight(), end.num_seconds_from_midnight());
    ticks
        .iter()
        .flat_map(|s| s.ticks())
        .map(|t| DateTime::from_timestamp_nanos(t.timestamp_ns).naive_utc())
        .filter(|dt| {
            let s = dt.time().num_seconds_from_midnight();
            s >= lo && s <= hi
        })
        .map(|dt| dt.date())
        .collect()
}

/// Intraday pipeline on in-memory tick series.
pub fn intraday_from_ticks(ticks: &[TickSeries], config: &PipelineConfig) -> Result<IntradayOutput> {
    config.validate()?;
    if ticks.is_empty() {
        return Err(Error::invalid("no tick series"));
    }
    let mut seen = BTreeSet::new();
    if let Some(dup) = ticks.iter().find(|s| !seen.insert(s.symbol())) {
        return Err(Error::invalid(format!("symbol {} appears in more than one input", dup.symbol())));
    }
    let session = config.session();
    let days: Vec<NaiveDate> = trading_days(ticks, session.start, session.end).into_iter().collect();
    if days.is_empty() {
        return Err(Error::insufficient("binning", format!("no trades inside the session {session}")));
    }
    let grid = BinGrid::new(session.start, session.end, config.bin_width(), days)?;
    let panel = bin_panel(ticks, &grid)?;
    run(&panel, Some(ticks), config)
}

/// Intraday pipeline on an already binned panel (binned estimators only).
pub fn intraday_from_panel(panel: &BinnedReturnPanel, config: &PipelineConfig) -> Result<IntradayOutput> {
    config.validate()?;
    let est = config.estimator();
    if est != Estimator::PearsonBinned {
        return Err(Error::invalid(format!("estimator {est} needs tick data")));
    }
    let grid = panel.grid();
    if let Some(w) = config.bin_width {
        if w != grid.bin_width_secs() {
            return Err(Error::invalid(format!(
                "configured bin width {w}s differs from the panel's {}s",
                grid.bin_width_secs()
            )));
        }
    }
    if let Some(s) = config.session {
        if (s.start, s.end) != (grid.session_start(), grid.session_end()) {
            return Err(Error::invalid(format!("configured session {s} differs from the panel's")));
        }
    }
    run(panel, None, config)
}

fn run(panel: &BinnedReturnPanel, ticks: Option<&[TickSeries]>, config: &PipelineConfig) -> Result<IntradayOutput> {
    let mut art = ArtifactSet::new(provenance(config));
    let grid = panel.grid();
    let (n, k_len, t_len) = panel.shape();
    art.note(format!("{n} symbols, {k_len} bins, {t_len} day(s)"));

    // (a) volatility and dispersion profiles
    let vol = temporal_moments(panel).mean_sigma_by_bin();
    let disp = dispersion(panel);
    art.add_csv("volatility.csv", &series_csv("bin,value", vol.iter().copied().enumerate()));
    art.add_csv(
        "dispersion_sigma.csv",
        &series_csv("bin,value", disp.mean_sigma_d_by_bin().into_iter().enumerate()),
    );
    art.add_csv(
        "dispersion_abs_mu.csv",
        &series_csv("bin,value", disp.mean_abs_mu_d_by_bin().into_iter().enumerate()),
    );

    // (b) spectra of the normalized panel
    let (norm, report) = normalized(panel)?;
    if !report.dropped.is_empty() {
        art.note(format!(
            "{} return(s) dropped in normalization (zero or undefined dispersion)",
            report.dropped.len()
        ));
    }
    let spectra = binwise_spectrum_series(&norm);
    for (k, s) in spectra.iter().enumerate() {
        if let Err(e) = s {
            art.note(format!("spectrum bin {k}: {e}"));
        }
    }
    art.add_csv("spectrum.csv", &spectrum_series_csv(&spectra));
    let lambda1_over_n: Vec<Option<f64>> = spectra
        .iter()
        .map(|s| s.as_ref().ok().and_then(|v| v.first().copied()))
        .collect();

    let est = config.estimator();
    let cell_estimator = match (est, ticks) {
        (Estimator::HayashiYoshida, Some(t)) => Some((t, EstimatorTag::HayashiYoshida)),
        (Estimator::Realized, Some(t)) => Some((t, EstimatorTag::Realized)),
        _ => None,
    };

    // (c) average pairwise correlation per bin
    let base_cells = match cell_estimator {
        Some((ticks, tag)) => Some(cell_matrices(ticks, grid, tag, config.realized_interval(), &mut art)?),
        None => None,
    };
    let (avg_correlation, avg_correlation_std) = match &base_cells {
        Some(cells) => {
            let mut means = Vec::with_capacity(k_len);
            let mut stds = Vec::with_capacity(k_len);
            for k in 0..k_len {
                let daily: Vec<f64> = (0..t_len)
                    .filter_map(|t| average_pairwise_correlation(&cells[k * t_len + t]).ok())
                    .map(|a| a.mean)
                    .collect();
                means.push(mean(&daily));
                stds.push(sample_std(&daily));
            }
            let stds = (t_len >= 2).then_some(stds);
            (means, stds)
        }
        None => {
            let mut means = Vec::with_capacity(k_len);
            for k in 0..k_len {
                let m = binwise_correlation(&norm, k)?;
                means.push(average_pairwise_correlation(&m).ok().map(|a| a.mean));
            }
            (means, None)
        }
    };
    art.add_csv("avg_correlation.csv", &series_csv("bin,value", avg_correlation.iter().copied().enumerate()));
    if let Some(stds) = &avg_correlation_std {
        let mut body = String::from("bin,lower,upper\n");
        for (k, (m, s)) in avg_correlation.iter().zip(stds).enumerate() {
            let (lo, hi) = match (m, s) {
                (Some(m), Some(s)) => (Some(m - s), Some(m + s)),
                _ => (None, None),
            };
            body.push_str(&format!("{k},{},{}\n", fmt_opt(lo), fmt_opt(hi)));
        }
        art.add_csv("avg_correlation_bands.csv", &body);
    }

    // (d) maps, possibly on coarser bins
    let factor = match config.map_bin_width {
        Some(w) => {
            if w % grid.bin_width_secs() != 0 {
                return Err(Error::invalid(format!(
                    "map bin width {w}s is not a multiple of {}s",
                    grid.bin_width_secs()
                )));
            }
            (w / grid.bin_width_secs()) as usize
        }
        None => 1,
    };
    let map_grid = grid.coarsen(factor)?;
    let (mean_distance_avg_correlations, mean_distance_avg_coordinates) = match cell_estimator {
        Some((ticks, tag)) => {
            let coarse;
            let cells = match &base_cells {
                Some(c) if factor == 1 => c,
                _ => {
                    coarse = cell_matrices(ticks, &map_grid, tag, config.realized_interval(), &mut art)?;
                    &coarse
                }
            };
            let (a, b) = tick_maps(cells, &map_grid, config, &mut art)?;
            (a, Some(b))
        }
        None => {
            let coarse = if factor == 1 { panel.clone() } else { panel.rebin(factor)? };
            let (coarse_norm, _) = normalized(&coarse)?;
            let matrices: Vec<CorrelationMatrix> = (0..map_grid.n_bins())
                .map(|k| binwise_correlation(&coarse_norm, k))
                .collect::<Result<_>>()?;
            let keep = select_symbols(&matrices.iter().collect::<Vec<_>>(), n, panel.symbols(), &mut art)?;
            let restricted: Vec<CorrelationMatrix> =
                matrices.iter().map(|m| restrict(m, &keep)).collect::<Result<_>>()?;
            let maps = chain_bins(&restricted, config)?;
            emit_maps(&mut art, "average_correlations", &map_grid, &maps)?;
            emit_matrices(&mut art, &restricted)?;
            (maps.iter().map(mean_distance_from_center).collect(), None)
        }
    };

    let series = IntradaySeries {
        lambda1_over_n,
        avg_correlation,
        avg_correlation_std,
        mean_distance_avg_correlations,
        mean_distance_avg_coordinates,
    };
    Ok(IntradayOutput { series, artifacts: art })
}

/// Correlation matrix of every (bin, day) cell from the trades inside it,
/// stored at `k * T + t`.
fn cell_matrices(
    ticks: &[TickSeries],
    grid: &BinGrid,
    tag: EstimatorTag,
    realized_interval: f64,
    art: &mut ArtifactSet,
) -> Result<Vec<CorrelationMatrix>> {
    let (k_len, t_len) = (grid.n_bins(), grid.n_days());
    let symbols: Vec<String> = ticks.iter().map(|s| s.symbol().to_string()).collect();
    let results: Vec<Result<(CorrelationMatrix, usize)>> = (0..k_len * t_len)
        .into_par_iter()
        .map(|cell| {
            let (k, t) = (cell / t_len, cell % t_len);
            let (from, to) = (grid.boundary_ns(t, k), grid.boundary_ns(t, k + 1));
            let floor = grid.day_midnight_ns(t);
            let windows: Vec<Option<TickSeries>> = ticks
                .iter()
                .map(|s| s.window(from, to, floor).filter(|w| w.len() >= 2))
                .collect();
            cell_matrix(&symbols, &windows, tag, realized_interval, (to - from) as f64 / 1e9)
        })
        .collect();
    let mut out = Vec::with_capacity(results.len());
    let mut clipped = 0;
    for r in results {
        let (m, c) = r?;
        clipped += c;
        out.push(m);
    }
    if clipped > 0 {
        art.note(format!(
            "{clipped} {tag} estimate(s) outside [-1, 1] clamped on grid of {}s",
            grid.bin_width_secs()
        ));
    }
    Ok(out)
}

fn cell_matrix(
    symbols: &[String],
    windows: &[Option<TickSeries>],
    tag: EstimatorTag,
    realized_interval: f64,
    width_secs: f64,
) -> Result<(CorrelationMatrix, usize)> {
    let n = symbols.len();
    let mut values = vec![None; n * n];
    let mut support = vec![0; n * n];
    let mut clipped = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let (Some(x), Some(y)) = (&windows[i], &windows[j]) else { continue };
            let (rho, count) = match tag {
                EstimatorTag::HayashiYoshida => {
                    let e = hayashi_yoshida(x, y)?;
                    (e.correlation, e.overlaps)
                }
                _ => match realized_correlation(x, y, realized_interval) {
                    Ok(r) => (r, (width_secs / realized_interval) as usize),
                    Err(Error::Insufficient { .. }) => (None, 0),
                    Err(e) => return Err(e),
                },
            };
            // sparse cells can push the HY ratio past 1 in magnitude
            let rho = rho.map(|r| {
                if r.abs() > 1.0 {
                    clipped += 1;
                }
                r.clamp(-1.0, 1.0)
            });
            values[i * n + j] = rho;
            values[j * n + i] = rho;
            support[i * n + j] = count;
            support[j * n + i] = count;
        }
    }
    Ok((CorrelationMatrix::new(symbols.to_vec(), tag, values, support)?, clipped))
}

fn select_symbols(
    matrices: &[&CorrelationMatrix],
    n: usize,
    symbols: &[String],
    art: &mut ArtifactSet,
) -> Result<Vec<usize>> {
    let keep = fully_defined_symbols(matrices, n);
    let dropped = dropped_names(symbols, &keep);
    if keep.len() < 2 {
        return Err(Error::insufficient(
            "map",
            format!("fewer than two symbols with complete correlations (dropped: {})", dropped.join(", ")),
        ));
    }
    if !dropped.is_empty() {
        art.note(format!("map stage dropped symbols: {}", dropped.join(", ")));
    }
    Ok(keep)
}

fn chain_bins(matrices: &[CorrelationMatrix], config: &PipelineConfig) -> Result<Vec<EmbeddingMap>> {
    let dists = matrices.iter().map(to_distance).collect::<Result<Vec<_>>>()?;
    chain_embed(&dists, &config.annealing, config.penalty_weight, config.seed)
}

/// Both averaging schemes over the per-day cell matrices of `grid`.
fn tick_maps(
    cells: &[CorrelationMatrix],
    grid: &BinGrid,
    config: &PipelineConfig,
    art: &mut ArtifactSet,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (k_len, t_len) = (grid.n_bins(), grid.n_days());
    let symbols = cells[0].symbols().to_vec();
    let n = symbols.len();
    let day_cells = |t: usize| -> Vec<&CorrelationMatrix> { (0..k_len).map(|k| &cells[k * t_len + t]).collect() };

    let (days, keep): (Vec<usize>, Vec<usize>) = match config.missing {
        MissingPolicy::DropSymbols => {
            let all: Vec<&CorrelationMatrix> = cells.iter().collect();
            ((0..t_len).collect(), select_symbols(&all, n, &symbols, art)?)
        }
        MissingPolicy::SkipWindow => {
            let days: Vec<usize> = (0..t_len)
                .filter(|&t| day_cells(t).iter().all(|m| m.is_complete()))
                .collect();
            let skipped: Vec<String> = (0..t_len)
                .filter(|t| !days.contains(t))
                .map(|t| grid.trading_days()[t].to_string())
                .collect();
            if !skipped.is_empty() {
                art.note(format!("map stage skipped days with incomplete data: {}", skipped.join(", ")));
            }
            if days.is_empty() {
                return Err(Error::insufficient("map", "every day has incomplete correlation data"));
            }
            (days, (0..n).collect())
        }
    };

    let restricted: Vec<Vec<CorrelationMatrix>> = days
        .iter()
        .map(|&t| day_cells(t).into_iter().map(|m| restrict(m, &keep)).collect())
        .collect::<Result<_>>()?;

    // scheme 1: average correlations over days, then embed
    let averaged: Vec<CorrelationMatrix> = (0..k_len)
        .map(|k| {
            let per_day: Vec<CorrelationMatrix> = restricted.iter().map(|d| d[k].clone()).collect();
            average_correlations_across_days(&per_day)
        })
        .collect::<Result<_>>()?;
    let avg_corr_maps = chain_bins(&averaged, config)?;
    emit_maps(art, "average_correlations", grid, &avg_corr_maps)?;
    emit_matrices(art, &averaged)?;

    // scheme 2: embed each day, align onto the first day, average coordinates
    let day_maps: Vec<Vec<EmbeddingMap>> = restricted
        .par_iter()
        .map(|d| chain_bins(d, config))
        .collect::<Result<_>>()?;
    let mut avg_coord_maps = Vec::with_capacity(k_len);
    for k in 0..k_len {
        let reference = &day_maps[0][k];
        let aligned: Vec<EmbeddingMap> = day_maps
            .iter()
            .map(|d| {
                let mut m = d[k].clone();
                m.coords = align_to(&m.coords, &reference.coords)?.coords;
                Ok(m)
            })
            .collect::<Result<_>>()?;
        avg_coord_maps.push(average_coords_across_days(&aligned)?);
    }
    emit_maps(art, "average_coordinates", grid, &avg_coord_maps)?;

    Ok((
        avg_corr_maps.iter().map(mean_distance_from_center).collect(),
        avg_coord_maps.iter().map(mean_distance_from_center).collect(),
    ))
}

fn bin_label(grid: &BinGrid, k: usize) -> (String, String) {
    let w = grid.bin_width_secs() as i64;
    let start = grid.session_start() + chrono::Duration::seconds(w * k as i64);
    let end = start + chrono::Duration::seconds(w);
    (start.format("%H:%M:%S").to_string(), end.format("%H:%M:%S").to_string())
}

fn emit_maps(art: &mut ArtifactSet, scheme: &str, grid: &BinGrid, maps: &[EmbeddingMap]) -> Result<()> {
    let entries: Vec<BinMap> = maps
        .iter()
        .enumerate()
        .map(|(k, map)| {
            let (start, end) = bin_label(grid, k);
            BinMap { bin: k, start, end, map }
        })
        .collect();
    art.add_json(&format!("maps_{scheme}.json"), &entries)?;
    let keyed: Vec<(usize, &EmbeddingMap)> = maps.iter().enumerate().collect();
    art.add_csv(&format!("maps_{scheme}.csv"), &maps_csv("bin", &keyed));
    art.add_csv(
        &format!("mean_distance_{scheme}.csv"),
        &series_csv("bin,value", maps.iter().map(|m| Some(mean_distance_from_center(m))).enumerate()),
    );
    Ok(())
}

fn emit_matrices(art: &mut ArtifactSet, matrices: &[CorrelationMatrix]) -> Result<()> {
    let entries: Vec<BinMatrix> = matrices
        .iter()
        .enumerate()
        .map(|(bin, matrix)| BinMatrix { bin, matrix })
        .collect();
    art.add_json("map_correlations.json", &entries)
}
