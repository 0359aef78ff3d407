use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Overshoot beyond [-1, 1] that is silently clipped; anything larger is an error.
pub const CLIP_TOLERANCE: f64 = 1e-9;

const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorTag {
    PearsonBinned,
    PearsonDaily,
    Realized,
    HayashiYoshida,
}

impl fmt::Display for EstimatorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EstimatorTag::PearsonBinned => "pearson-binned",
            EstimatorTag::PearsonDaily => "pearson-daily",
            EstimatorTag::Realized => "realized",
            EstimatorTag::HayashiYoshida => "hayashi-yoshida",
        };
        f.write_str(s)
    }
}

/// Clip a correlation estimate into [-1, 1], rejecting overshoot larger
/// than [`CLIP_TOLERANCE`].
pub(crate) fn clip_correlation(value: f64) -> Result<f64> {
    if !value.is_finite() || value.abs() > 1.0 + CLIP_TOLERANCE {
        return Err(Error::Numerical(format!(
            "correlation estimate {value} outside [-1, 1]"
        )));
    }
    Ok(value.clamp(-1.0, 1.0))
}

/// Symmetric N x N correlation matrix with unit diagonal. Off-diagonal
/// entries may be undefined (`None`) when an estimator had no usable data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    symbols: Vec<String>,
    estimator_tag: EstimatorTag,
    #[serde(default)]
    averaged: bool,
    values: Vec<Option<f64>>,
    support: Vec<usize>,
}

impl CorrelationMatrix {
    /// Build from row-major `values` and `support` counts. Entries are
    /// clipped into [-1, 1]; the diagonal is forced to 1.
    pub fn new(
        symbols: Vec<String>,
        estimator_tag: EstimatorTag,
        mut values: Vec<Option<f64>>,
        support: Vec<usize>,
    ) -> Result<Self> {
        let n = symbols.len();
        if values.len() != n * n || support.len() != n * n {
            return Err(Error::invalid(format!(
                "correlation matrix for {n} symbols needs {} entries",
                n * n
            )));
        }
        for i in 0..n {
            values[i * n + i] = Some(1.0);
            for j in (i + 1)..n {
                let (a, b) = (values[i * n + j], values[j * n + i]);
                let v = match (a, b) {
                    (Some(a), Some(b)) if (a - b).abs() <= SYMMETRY_TOLERANCE => {
                        Some(clip_correlation(a)?)
                    }
                    (None, None) => None,
                    _ => {
                        return Err(Error::invalid(format!(
                            "correlation matrix not symmetric at ({i}, {j})"
                        )))
                    }
                };
                values[i * n + j] = v;
                values[j * n + i] = v;
                if support[i * n + j] != support[j * n + i] {
                    return Err(Error::invalid("support counts not symmetric"));
                }
            }
        }
        Ok(CorrelationMatrix {
            symbols,
            estimator_tag,
            averaged: false,
            values,
            support,
        })
    }

    /// Complete matrix from dense row-major values, support counts left at zero.
    pub fn from_dense(
        symbols: Vec<String>,
        estimator_tag: EstimatorTag,
        values: &[f64],
    ) -> Result<Self> {
        let n = symbols.len();
        Self::new(
            symbols,
            estimator_tag,
            values.iter().map(|&v| Some(v)).collect(),
            vec![0; n * n],
        )
    }

    pub fn identity(symbols: Vec<String>, estimator_tag: EstimatorTag) -> Self {
        let n = symbols.len();
        let mut values = vec![Some(0.0); n * n];
        for i in 0..n {
            values[i * n + i] = Some(1.0);
        }
        CorrelationMatrix {
            symbols,
            estimator_tag,
            averaged: false,
            values,
            support: vec![0; n * n],
        }
    }

    pub(crate) fn mark_averaged(mut self) -> Self {
        self.averaged = true;
        self
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn n(&self) -> usize {
        self.symbols.len()
    }

    pub fn estimator_tag(&self) -> EstimatorTag {
        self.estimator_tag
    }

    pub fn is_averaged(&self) -> bool {
        self.averaged
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.n() + j]
    }

    pub fn support(&self, i: usize, j: usize) -> usize {
        self.support[i * self.n() + j]
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    /// Number of undefined strictly-upper-triangle entries.
    pub fn undefined_pairs(&self) -> usize {
        let n = self.n();
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.get(i, j).is_none())
            .count()
    }

    /// Symbols whose every off-diagonal entry is undefined.
    pub fn undefined_symbols(&self) -> Vec<&str> {
        let n = self.n();
        (0..n)
            .filter(|&i| n > 1 && (0..n).filter(|&j| j != i).all(|j| self.get(i, j).is_none()))
            .map(|i| self.symbols[i].as_str())
            .collect()
    }

    /// Dense row-major values, or `None` if any entry is undefined.
    pub fn to_dense(&self) -> Option<Vec<f64>> {
        self.values.iter().copied().collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: CorrelationMatrix = serde_json::from_str(s)?;
        let averaged = raw.averaged;
        let mut m = CorrelationMatrix::new(raw.symbols, raw.estimator_tag, raw.values, raw.support)?;
        m.averaged = averaged;
        Ok(m)
    }

    /// Square CSV with a symbol header row and column; undefined entries are empty.
    pub fn to_csv(&self) -> String {
        let n = self.n();
        let mut out = String::from("symbol");
        for s in &self.symbols {
            out.push(',');
            out.push_str(s);
        }
        out.push('\n');
        for i in 0..n {
            out.push_str(&self.symbols[i]);
            for j in 0..n {
                out.push(',');
                if let Some(v) = self.get(i, j) {
                    out.push_str(&format!("{v}"));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Symmetric N x N distance matrix with zero diagonal and entries in [0, 2].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    symbols: Vec<String>,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(symbols: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = symbols.len();
        if values.len() != n * n {
            return Err(Error::invalid(format!(
                "distance matrix for {n} symbols needs {} entries",
                n * n
            )));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::invalid(format!("nonzero diagonal at {i}")));
            }
            for j in (i + 1)..n {
                let v = values[i * n + j];
                if v != values[j * n + i] {
                    return Err(Error::invalid(format!(
                        "distance matrix not symmetric at ({i}, {j})"
                    )));
                }
                if !(0.0..=2.0).contains(&v) {
                    return Err(Error::invalid(format!(
                        "distance {v} at ({i}, {j}) outside [0, 2]"
                    )));
                }
            }
        }
        Ok(DistanceMatrix { symbols, values })
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn n(&self) -> usize {
        self.symbols.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mean over unordered pairs.
    pub fn mean_distance(&self) -> f64 {
        let n = self.n();
        if n < 2 {
            return 0.0;
        }
        let sum: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .sum();
        sum / (n * (n - 1) / 2) as f64
    }

    /// Mean of squared distances over unordered pairs.
    pub fn mean_squared_distance(&self) -> f64 {
        let n = self.n();
        if n < 2 {
            return 0.0;
        }
        let sum: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j).powi(2))
            .sum();
        sum / (n * (n - 1) / 2) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn syms(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("S{i}")).collect()
    }

    #[test]
    fn diagonal_forced_and_overshoot_clipped() {
        let m = CorrelationMatrix::from_dense(syms(2), EstimatorTag::PearsonDaily, &[0.5, 1.0 + 1e-12, 1.0 + 1e-12, 7.0])
            .unwrap();
        assert_eq!(m.get(0, 0), Some(1.0));
        assert_eq!(m.get(1, 1), Some(1.0));
        assert_eq!(m.get(0, 1), Some(1.0));
    }

    #[test]
    fn large_overshoot_is_error() {
        let r = CorrelationMatrix::from_dense(syms(2), EstimatorTag::PearsonDaily, &[1.0, 1.1, 1.1, 1.0]);
        assert!(matches!(r, Err(Error::Numerical(_))));
    }

    #[test]
    fn asymmetry_rejected() {
        let r = CorrelationMatrix::from_dense(syms(2), EstimatorTag::PearsonDaily, &[1.0, 0.2, 0.3, 1.0]);
        assert!(r.is_err());
    }

    #[test]
    fn undefined_entries_reported() {
        let m = CorrelationMatrix::new(
            syms(3),
            EstimatorTag::PearsonBinned,
            vec![None, None, None, None, None, Some(0.4), None, Some(0.4), None],
            vec![0; 9],
        )
        .unwrap();
        assert!(!m.is_complete());
        assert_eq!(m.undefined_pairs(), 2);
        assert_eq!(m.undefined_symbols(), vec!["S0"]);
        assert!(m.to_dense().is_none());
    }

    #[test]
    fn json_round_trip_and_csv() {
        let m = CorrelationMatrix::from_dense(syms(2), EstimatorTag::HayashiYoshida, &[1.0, -0.25, -0.25, 1.0])
            .unwrap();
        let back = CorrelationMatrix::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(m.to_json().unwrap().contains("\"hayashi-yoshida\""));
        assert_eq!(m.to_csv(), "symbol,S0,S1\nS0,1,-0.25\nS1,-0.25,1\n");
    }

    #[test]
    fn distance_validation() {
        assert!(DistanceMatrix::new(syms(2), vec![0.0, 1.0, 1.0, 0.0]).is_ok());
        assert!(DistanceMatrix::new(syms(2), vec![0.0, 2.5, 2.5, 0.0]).is_err());
        assert!(DistanceMatrix::new(syms(2), vec![0.0, 1.0, 0.9, 0.0]).is_err());
        assert!(DistanceMatrix::new(syms(2), vec![0.1, 1.0, 1.0, 0.0]).is_err());
    }
}
