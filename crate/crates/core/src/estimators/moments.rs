use serde::Serialize;

use crate::data::BinnedReturnPanel;
use crate::error::Result;
use crate::stats::mean_and_population_variance;

/// Per-(stock, bin) temporal mean and standard deviation over days.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinMoments {
    n_symbols: usize,
    n_bins: usize,
    mu: Vec<Option<f64>>,
    sigma: Vec<Option<f64>>,
}

impl BinMoments {
    pub fn mu(&self, i: usize, k: usize) -> Option<f64> {
        self.mu[i * self.n_bins + k]
    }

    /// `None` when fewer than two days were observed for the cell.
    pub fn sigma(&self, i: usize, k: usize) -> Option<f64> {
        self.sigma[i * self.n_bins + k]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_symbols, self.n_bins)
    }

    /// Cross-stock average of the defined `sigma_i(k)`, per bin.
    pub fn mean_sigma_by_bin(&self) -> Vec<Option<f64>> {
        (0..self.n_bins)
            .map(|k| {
                let v: Vec<f64> = (0..self.n_symbols).filter_map(|i| self.sigma(i, k)).collect();
                crate::stats::mean(&v)
            })
            .collect()
    }
}

/// Temporal moments of each (stock, bin) cell over non-missing days, with
/// the population convention `sigma^2 = <r^2> - mu^2`.
pub fn temporal_moments(panel: &BinnedReturnPanel) -> BinMoments {
    let (n, k_len, _) = panel.shape();
    let mut mu = Vec::with_capacity(n * k_len);
    let mut sigma = Vec::with_capacity(n * k_len);
    let mut buf = Vec::new();
    for i in 0..n {
        for k in 0..k_len {
            buf.clear();
            buf.extend(panel.series(i, k).iter().flatten());
            match mean_and_population_variance(&buf) {
                Some((m, v)) => {
                    mu.push(Some(m));
                    sigma.push((buf.len() >= 2).then(|| v.sqrt()));
                }
                None => {
                    mu.push(None);
                    sigma.push(None);
                }
            }
        }
    }
    BinMoments {
        n_symbols: n,
        n_bins: k_len,
        mu,
        sigma,
    }
}

/// Cross-sectional mean `mu_d(k;t)` and dispersion `sigma_d(k;t)` of the
/// returns of all stocks within one bin of one day.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionSeries {
    n_bins: usize,
    n_days: usize,
    mu_d: Vec<Option<f64>>,
    sigma_d: Vec<Option<f64>>,
}

impl DispersionSeries {
    pub fn mu_d(&self, k: usize, t: usize) -> Option<f64> {
        self.mu_d[k * self.n_days + t]
    }

    /// `None` when fewer than two stocks are observed in the cell.
    pub fn sigma_d(&self, k: usize, t: usize) -> Option<f64> {
        self.sigma_d[k * self.n_days + t]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_bins, self.n_days)
    }

    /// Day-averaged dispersion `<sigma_d(k;t)>` per bin.
    pub fn mean_sigma_d_by_bin(&self) -> Vec<Option<f64>> {
        self.day_average(|k, t| self.sigma_d(k, t))
    }

    /// Day-averaged `<|mu_d(k;t)|>` per bin, the equal-weight index volatility proxy.
    pub fn mean_abs_mu_d_by_bin(&self) -> Vec<Option<f64>> {
        self.day_average(|k, t| self.mu_d(k, t).map(f64::abs))
    }

    fn day_average(&self, f: impl Fn(usize, usize) -> Option<f64>) -> Vec<Option<f64>> {
        (0..self.n_bins)
            .map(|k| {
                let v: Vec<f64> = (0..self.n_days).filter_map(|t| f(k, t)).collect();
                crate::stats::mean(&v)
            })
            .collect()
    }
}

pub fn dispersion(panel: &BinnedReturnPanel) -> DispersionSeries {
    let (n, k_len, t_len) = panel.shape();
    let mut mu_d = Vec::with_capacity(k_len * t_len);
    let mut sigma_d = Vec::with_capacity(k_len * t_len);
    let mut buf = Vec::with_capacity(n);
    for k in 0..k_len {
        for t in 0..t_len {
            buf.clear();
            buf.extend((0..n).filter_map(|i| panel.get(i, k, t)));
            match mean_and_population_variance(&buf) {
                Some((m, v)) => {
                    mu_d.push(Some(m));
                    sigma_d.push((buf.len() >= 2).then(|| v.sqrt()));
                }
                None => {
                    mu_d.push(None);
                    sigma_d.push(None);
                }
            }
        }
    }
    DispersionSeries {
        n_bins: k_len,
        n_days: t_len,
        mu_d,
        sigma_d,
    }
}

/// Cells that carried a return but could not be normalized.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NormalizationReport {
    /// `(symbol index, bin, day)` of each dropped cell.
    pub dropped: Vec<(usize, usize, usize)>,
}

/// Divide every return by the dispersion of its (bin, day) cell.
///
/// Returns whose cell has zero or undefined dispersion become missing and
/// are listed in the report.
pub fn normalize_panel(
    panel: &BinnedReturnPanel,
    disp: &DispersionSeries,
) -> Result<(BinnedReturnPanel, NormalizationReport)> {
    let (n, k_len, t_len) = panel.shape();
    if disp.shape() != (k_len, t_len) {
        return Err(crate::error::Error::invalid(format!(
            "dispersion shape {:?} does not match panel bins x days ({k_len}, {t_len})",
            disp.shape()
        )));
    }
    let mut out = panel.clone();
    let mut report = NormalizationReport::default();
    for i in 0..n {
        for k in 0..k_len {
            for t in 0..t_len {
                let Some(r) = panel.get(i, k, t) else { continue };
                match disp.sigma_d(k, t) {
                    Some(s) if s > 0.0 => out.set(i, k, t, Some(r / s)),
                    _ => {
                        out.set(i, k, t, None);
                        report.dropped.push((i, k, t));
                    }
                }
            }
        }
    }
    Ok((out, report))
}

/// Convenience: the normalized panel `r / sigma_d` in one call.
pub fn normalized(panel: &BinnedReturnPanel) -> Result<(BinnedReturnPanel, NormalizationReport)> {
    normalize_panel(panel, &dispersion(panel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::BinGrid;
    use chrono::{NaiveDate, NaiveTime};

    fn grid(k: usize, t: usize) -> BinGrid {
        let start = NaiveTime::from_hms_opt(10, 0, 0).unwrap();
        let end = start + chrono::Duration::seconds(300 * k as i64);
        let days = (0..t)
            .map(|d| NaiveDate::from_ymd_opt(2011, 3, 1).unwrap() + chrono::Days::new(d as u64))
            .collect();
        BinGrid::new(start, end, 300, days).unwrap()
    }

    /// cells[i][k][t]
    fn panel(cells: Vec<Vec<Vec<Option<f64>>>>) -> BinnedReturnPanel {
        let n = cells.len();
        let k = cells[0].len();
        let t = cells[0][0].len();
        let flat = cells.into_iter().flatten().flatten().collect();
        let syms = (0..n).map(|i| format!("S{i}")).collect();
        BinnedReturnPanel::new(syms, grid(k, t), flat).unwrap()
    }

    #[test]
    fn constant_series_has_zero_sigma() {
        let p = panel(vec![vec![vec![Some(0.01); 3]]]);
        let m = temporal_moments(&p);
        assert!((m.mu(0, 0).unwrap() - 0.01).abs() < 1e-17);
        assert!(m.sigma(0, 0).unwrap().abs() < 1e-17);
    }

    #[test]
    fn symmetric_pair_moments() {
        let a = 0.03;
        let p = panel(vec![vec![vec![Some(a), Some(-a)]]]);
        let m = temporal_moments(&p);
        assert_eq!(m.mu(0, 0), Some(0.0));
        assert_eq!(m.sigma(0, 0), Some(a));
    }

    #[test]
    fn single_day_sigma_undefined() {
        let p = panel(vec![vec![vec![Some(0.1), None]]]);
        let m = temporal_moments(&p);
        assert_eq!(m.mu(0, 0), Some(0.1));
        assert_eq!(m.sigma(0, 0), None);
    }

    #[test]
    fn identical_cross_section_has_zero_dispersion() {
        let p = panel(vec![vec![vec![Some(0.02)]]; 4]);
        let d = dispersion(&p);
        assert!((d.mu_d(0, 0).unwrap() - 0.02).abs() < 1e-17);
        assert!(d.sigma_d(0, 0).unwrap().abs() < 1e-17);
    }

    #[test]
    fn two_stock_dispersion() {
        let a = 0.5;
        let p = panel(vec![vec![vec![Some(a)]], vec![vec![Some(-a)]]]);
        let d = dispersion(&p);
        assert_eq!(d.mu_d(0, 0), Some(0.0));
        assert_eq!(d.sigma_d(0, 0), Some(a));
        assert_eq!(d.mean_abs_mu_d_by_bin(), vec![Some(0.0)]);
    }

    #[test]
    fn all_missing_cross_section_undefined() {
        let p = panel(vec![vec![vec![None]], vec![vec![None]]]);
        let d = dispersion(&p);
        assert_eq!(d.mu_d(0, 0), None);
        assert_eq!(d.sigma_d(0, 0), None);
    }

    #[test]
    fn normalization_divides_and_reports_zero_dispersion() {
        // bin 0: returns 0.03 and 0.01 -> sigma_d 0.01; bin 1: identical -> dropped
        let p = panel(vec![
            vec![vec![Some(0.03)], vec![Some(0.0)]],
            vec![vec![Some(0.01)], vec![Some(0.0)]],
        ]);
        let d = dispersion(&p);
        let (norm, report) = normalize_panel(&p, &d).unwrap();
        assert!((norm.get(0, 0, 0).unwrap() - 3.0).abs() < 1e-12);
        assert!((norm.get(1, 0, 0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(norm.get(0, 1, 0), None);
        assert_eq!(report.dropped, vec![(0, 1, 0), (1, 1, 0)]);
    }

    #[test]
    fn direct_division_examples() {
        let p = panel(vec![
            vec![vec![Some(0.02)]],
            vec![vec![Some(0.0)]],
            vec![vec![Some(0.01)]],
        ]);
        let d = dispersion(&p);
        let s = d.sigma_d(0, 0).unwrap();
        let (norm, _) = normalize_panel(&p, &d).unwrap();
        assert_eq!(norm.get(0, 0, 0), Some(0.02 / s));
        assert_eq!(norm.get(1, 0, 0), Some(0.0));
    }
}
