//! End-to-end runs: ingestion, estimators, spectra, distances and chained
//! maps, emitted as provenance-stamped artifact sets.

mod artifacts;
mod config;
mod daily;
mod intraday;

pub use artifacts::{ArtifactSet, Provenance};
pub use config::{Estimator, MissingPolicy, Mode, PipelineConfig, Session, DEFAULT_BIN_WIDTH};
pub use daily::{daily_from_closes, run_daily_pipeline, DailyOutput, DailySeries};
pub use intraday::{
    intraday_from_panel, intraday_from_ticks, run_intraday_pipeline, IntradayOutput, IntradaySeries,
};

use std::path::Path;

use serde_json::json;

use crate::data::CorrelationMatrix;
use crate::embedding::EmbeddingMap;
use crate::error::{Error, Result};

/// Run the pipeline selected by `config.mode` and write its artifacts and
/// `manifest.json` to `config.out` (default `out`).
pub fn run(config: &PipelineConfig) -> Result<ArtifactSet> {
    config.validate()?;
    let artifacts = match config.mode {
        Mode::IntradayTicks | Mode::IntradayBinned => run_intraday_pipeline(config)?.artifacts,
        Mode::Daily => run_daily_pipeline(config)?.artifacts,
    };
    let out = config.out.clone().unwrap_or_else(|| "out".into());
    write_with_manifest(&artifacts, config, &out)?;
    Ok(artifacts)
}

/// Write `artifacts` plus a `manifest.json` under `dir`.
pub fn write_with_manifest(artifacts: &ArtifactSet, config: &PipelineConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    artifacts.write_to(dir)?;
    let mut canonical = config.clone();
    canonical.out = None;
    let manifest = artifacts.manifest(json!({ "config": canonical }))?;
    let path = dir.join("manifest.json");
    std::fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}

pub(crate) fn provenance(config: &PipelineConfig) -> Provenance {
    Provenance {
        config_hash: config.hash(),
        seed: config.seed,
    }
}

/// Sub-matrix on the symbols at `keep` (indices in increasing order).
pub(crate) fn restrict(m: &CorrelationMatrix, keep: &[usize]) -> Result<CorrelationMatrix> {
    let n = keep.len();
    let mut values = Vec::with_capacity(n * n);
    let mut support = Vec::with_capacity(n * n);
    for &i in keep {
        for &j in keep {
            values.push(m.get(i, j));
            support.push(m.support(i, j));
        }
    }
    let symbols = keep.iter().map(|&i| m.symbols()[i].clone()).collect();
    let out = CorrelationMatrix::new(symbols, m.estimator_tag(), values, support)?;
    Ok(if m.is_averaged() { out.mark_averaged() } else { out })
}

/// Indices of a symbol subset on which every matrix is fully defined.
///
/// Greedy: repeatedly drop the symbol involved in the most undefined pairs
/// (the first on ties) until none remain.
pub(crate) fn fully_defined_symbols(matrices: &[&CorrelationMatrix], n: usize) -> Vec<usize> {
    let mut keep: Vec<usize> = (0..n).collect();
    loop {
        let counts: Vec<usize> = keep
            .iter()
            .map(|&i| {
                matrices
                    .iter()
                    .map(|m| keep.iter().filter(|&&j| j != i && m.get(i, j).is_none()).count())
                    .sum()
            })
            .collect();
        let (worst, &most) = match counts.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))) {
            Some(x) => x,
            None => return keep,
        };
        if most == 0 {
            return keep;
        }
        keep.remove(worst);
    }
}

/// Names of the symbols left out of `keep`.
pub(crate) fn dropped_names(symbols: &[String], keep: &[usize]) -> Vec<String> {
    symbols
        .iter()
        .enumerate()
        .filter(|(i, _)| !keep.contains(i))
        .map(|(_, s)| s.clone())
        .collect()
}

/// Long-format map CSV `<key>,symbol,x,y`.
pub(crate) fn maps_csv<K: std::fmt::Display>(key: &str, maps: &[(K, &EmbeddingMap)]) -> String {
    let mut out = format!("{key},symbol");
    let dims = maps.first().map_or(2, |(_, m)| m.dims());
    for a in 0..dims {
        match a {
            0 => out.push_str(",x"),
            1 => out.push_str(",y"),
            _ => out.push_str(&format!(",x{}", a + 1)),
        }
    }
    out.push('\n');
    for (k, m) in maps {
        for (s, c) in m.symbols.iter().zip(&m.coords) {
            out.push_str(&format!("{k},{s}"));
            for v in c {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
    }
    out
}
