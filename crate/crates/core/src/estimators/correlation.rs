use serde::{Deserialize, Serialize};

use crate::data::{BinnedReturnPanel, CorrelationMatrix, DailyReturns, EstimatorTag};
use crate::error::{Error, Result};

/// Rolling-window layout over trading days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub width: usize,
    pub step: usize,
}

impl WindowSpec {
    pub fn new(width: usize, step: usize) -> Result<Self> {
        if width < 2 {
            return Err(Error::invalid(format!("window width {width} < 2")));
        }
        if step < 1 {
            return Err(Error::invalid("window step must be >= 1"));
        }
        Ok(WindowSpec { width, step })
    }

    /// Non-overlapping windows.
    pub fn non_overlapping(width: usize) -> Result<Self> {
        Self::new(width, width)
    }

    /// `floor((total - width) / step) + 1`, or 0 if one window does not fit.
    pub fn count(&self, total: usize) -> usize {
        if total < self.width {
            0
        } else {
            (total - self.width) / self.step + 1
        }
    }

    /// Day ranges `[start, start + width)` of every window.
    pub fn ranges(&self, total: usize) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        (0..self.count(total)).map(move |m| m * self.step..m * self.step + self.width)
    }
}

/// Pearson correlation over the positions where both samples are present.
/// Returns the estimate (if defined) and the number of common samples.
pub(crate) fn pairwise_pearson(x: &[Option<f64>], y: &[Option<f64>]) -> (Option<f64>, usize) {
    let pairs: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
        .collect();
    let n = pairs.len();
    if n < 2 {
        return (None, n);
    }
    let nf = n as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return (None, n);
    }
    (Some(sxy / (sxx * syy).sqrt()), n)
}

/// Pairwise-complete Pearson matrix of the given sample vectors.
pub(crate) fn pearson_matrix(
    symbols: &[String],
    samples: &[&[Option<f64>]],
    tag: EstimatorTag,
) -> Result<CorrelationMatrix> {
    let n = samples.len();
    let mut values = vec![None; n * n];
    let mut support = vec![0; n * n];
    for i in 0..n {
        support[i * n + i] = samples[i].iter().flatten().count();
        for j in (i + 1)..n {
            let (rho, count) = pairwise_pearson(samples[i], samples[j]);
            values[i * n + j] = rho;
            values[j * n + i] = rho;
            support[i * n + j] = count;
            support[j * n + i] = count;
        }
    }
    CorrelationMatrix::new(symbols.to_vec(), tag, values, support)
}

/// Correlation matrix of normalized returns in bin `k`, estimated across days.
///
/// Entries use pairwise-complete days; a stock with zero temporal variance
/// leaves its row and column undefined (see
/// [`CorrelationMatrix::undefined_symbols`]).
pub fn binwise_correlation(norm_panel: &BinnedReturnPanel, k: usize) -> Result<CorrelationMatrix> {
    if k >= norm_panel.n_bins() {
        return Err(Error::invalid(format!(
            "bin {k} out of range (K = {})",
            norm_panel.n_bins()
        )));
    }
    let samples: Vec<&[Option<f64>]> = (0..norm_panel.n_symbols())
        .map(|i| norm_panel.series(i, k))
        .collect();
    pearson_matrix(norm_panel.symbols(), &samples, EstimatorTag::PearsonBinned)
}

/// Equal-time Pearson matrices over rolling windows of daily returns.
pub fn pearson_windowed(returns: &DailyReturns, spec: WindowSpec) -> Result<Vec<CorrelationMatrix>> {
    let total = returns.n_days();
    if spec.count(total) == 0 {
        return Err(Error::insufficient(
            "pearson-windowed",
            format!("{total} days cannot fill a window of {}", spec.width),
        ));
    }
    spec.ranges(total)
        .map(|range| {
            let samples: Vec<&[Option<f64>]> =
                returns.returns.iter().map(|r| &r[range.clone()]).collect();
            pearson_matrix(&returns.symbols, &samples, EstimatorTag::PearsonDaily)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairwiseAverage {
    pub mean: f64,
    /// Pairs that entered the mean.
    pub used: usize,
    /// Undefined pairs left out.
    pub excluded: usize,
}

/// Mean of the strictly-upper-triangle entries, skipping undefined ones.
pub fn average_pairwise_correlation(m: &CorrelationMatrix) -> Result<PairwiseAverage> {
    let n = m.n();
    if n < 2 {
        return Err(Error::invalid("average correlation needs at least two symbols"));
    }
    let (mut sum, mut used, mut excluded) = (0.0, 0, 0);
    for i in 0..n {
        for j in (i + 1)..n {
            match m.get(i, j) {
                Some(v) => {
                    sum += v;
                    used += 1;
                }
                None => excluded += 1,
            }
        }
    }
    if used == 0 {
        return Err(Error::insufficient(
            "average-correlation",
            "every pairwise correlation is undefined",
        ));
    }
    Ok(PairwiseAverage {
        mean: sum / used as f64,
        used,
        excluded,
    })
}
