//! Eigen-spectra of correlation matrices: cyclic Jacobi decomposition,
//! market-mode strength, per-bin spectrum series and optional
//! Marchenko-Pastur clipping.

use serde::Serialize;

use crate::data::{BinnedReturnPanel, CorrelationMatrix, EstimatorTag};
use crate::error::{Error, Result};
use crate::estimators::binwise_correlation;

/// Off-diagonal Frobenius norm at which the Jacobi sweeps stop.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;
const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Number of leading eigenvalues reported per bin.
pub const TOP_EIGENVALUES: usize = 7;

/// Eigenvalues and eigenvectors of a real symmetric matrix by cyclic Jacobi
/// rotations.
///
/// `a` is row-major `n x n`. Returns `(eigenvalues, eigenvectors)` unsorted,
/// the eigenvectors stored column-wise in a row-major `n x n` matrix.
pub fn jacobi_eigen(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.len() != n * n {
        return Err(Error::invalid(format!("expected {} entries for a {n}x{n} matrix", n * n)));
    }
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let off_norm = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    s += a[p * n + q] * a[p * n + q];
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while off_norm(&a) >= JACOBI_TOLERANCE {
        if sweeps == MAX_SWEEPS {
            return Err(Error::Numerical(format!(
                "Jacobi did not converge in {MAX_SWEEPS} sweeps (off-diagonal norm {})",
                off_norm(&a)
            )));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[i * n + i]).collect();
    Ok((values, v))
}

/// Full spectrum of a correlation matrix, eigenvalues descending.
///
/// Each eigenvector is signed so that its largest-magnitude component is
/// positive (first such component on ties).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenSpectrum {
    symbols: Vec<String>,
    eigenvalues: Vec<f64>,
    /// Row-major `n x n`; column `k` is the eigenvector of `eigenvalues[k]`.
    eigenvectors: Vec<f64>,
    source_tag: EstimatorTag,
}

impl EigenSpectrum {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn source_tag(&self) -> EstimatorTag {
        self.source_tag
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        let n = self.n();
        (0..n).map(|i| self.eigenvectors[i * n + k]).collect()
    }

    /// Row-major eigenvector matrix (columns are eigenvectors).
    pub fn eigenvector_matrix(&self) -> &[f64] {
        &self.eigenvectors
    }

    /// `V diag(values) V^T`, row-major.
    pub fn reconstruct_with(&self, values: &[f64]) -> Vec<f64> {
        let n = self.n();
        let v = &self.eigenvectors;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..n).map(|k| v[i * n + k] * values[k] * v[j * n + k]).sum();
                out[i * n + j] = s;
                out[j * n + i] = s;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Vec<f64> {
        self.reconstruct_with(&self.eigenvalues)
    }

    /// `lambda_k / N` for the leading `count` eigenvalues.
    pub fn top_normalized(&self, count: usize) -> Vec<f64> {
        let n = self.n() as f64;
        self.eigenvalues.iter().take(count).map(|l| l / n).collect()
    }
}

pub fn eigendecompose(m: &CorrelationMatrix) -> Result<EigenSpectrum> {
    let n = m.n();
    let dense = m.to_dense().ok_or_else(|| {
        Error::invalid(format!(
            "correlation matrix has {} undefined pair(s)",
            m.undefined_pairs()
        ))
    })?;
    for i in 0..n {
        for j in (i + 1)..n {
            if (dense[i * n + j] - dense[j * n + i]).abs() > SYMMETRY_TOLERANCE {
                return Err(Error::invalid(format!("matrix not symmetric at ({i}, {j})")));
            }
        }
    }
    let (values, vectors) = jacobi_eigen(&dense, n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| values[k]).collect();
    let mut eigenvectors = vec![0.0; n * n];
    for (col, &k) in order.iter().enumerate() {
        let mut pivot = 0;
        for i in 1..n {
            if vectors[i * n + k].abs() > vectors[pivot * n + k].abs() {
                pivot = i;
            }
        }
        let sign = if vectors[pivot * n + k] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            eigenvectors[i * n + col] = sign * vectors[i * n + k];
        }
    }
    Ok(EigenSpectrum {
        symbols: m.symbols().to_vec(),
        eigenvalues,
        eigenvectors,
        source_tag: m.estimator_tag(),
    })
}

/// `lambda_1 / N`, a proxy for the average correlation between stocks.
pub fn market_mode_strength(spec: &EigenSpectrum) -> f64 {
    spec.eigenvalues[0] / spec.n() as f64
}

/// Leading normalized eigenvalues `lambda_i(k) / N` of each bin's
/// correlation matrix. Bins whose matrix cannot be decomposed carry the
/// error.
pub fn binwise_spectrum_series(norm_panel: &BinnedReturnPanel) -> Vec<Result<Vec<f64>>> {
    (0..norm_panel.n_bins())
        .map(|k| {
            let m = binwise_correlation(norm_panel, k)?;
            let spec = eigendecompose(&m).map_err(|e| match e {
                Error::Invalid(msg) => Error::insufficient(format!("spectrum bin {k}"), msg),
                other => other,
            })?;
            Ok(spec.top_normalized(TOP_EIGENVALUES))
        })
        .collect()
}

/// CSV `bin,lambda1_over_N,...,lambda7_over_N`; failed bins leave empty fields.
pub fn spectrum_series_csv(series: &[Result<Vec<f64>>]) -> String {
    let mut out = String::from("bin");
    for i in 1..=TOP_EIGENVALUES {
        out.push_str(&format!(",lambda{i}_over_N"));
    }
    out.push('\n');
    for (k, row) in series.iter().enumerate() {
        out.push_str(&k.to_string());
        for i in 0..TOP_EIGENVALUES {
            out.push(',');
            if let Some(v) = row.as_ref().ok().and_then(|r| r.get(i)) {
                out.push_str(&format!("{v}"));
            }
        }
        out.push('\n');
    }
    out
}

/// Upper Marchenko-Pastur edge `(1 + sqrt(q))^2` for aspect ratio `q = N/T`.
pub fn marchenko_pastur_edge(q: f64) -> f64 {
    (1.0 + q.sqrt()).powi(2)
}

/// Replace every eigenvalue below the Marchenko-Pastur edge by their
/// average, rebuild, and rescale to unit diagonal.
pub fn clean_spectrum(spec: &EigenSpectrum, q: f64) -> Result<CorrelationMatrix> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::invalid(format!("aspect ratio q = {q} must be positive")));
    }
    let edge = marchenko_pastur_edge(q);
    let noise: Vec<f64> = spec.eigenvalues.iter().copied().filter(|&l| l < edge).collect();
    let mut values = spec.eigenvalues.clone();
    if !noise.is_empty() {
        let avg = noise.iter().sum::<f64>() / noise.len() as f64;
        for l in values.iter_mut().filter(|l| **l < edge) {
            *l = avg;
        }
    }
    let n = spec.n();
    let raw = spec.reconstruct_with(&values);
    let scale: Vec<f64> = (0..n).map(|i| raw[i * n + i].sqrt()).collect();
    if scale.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Numerical("cleaned matrix has a non-positive diagonal".into()));
    }
    let mut dense = vec![0.0; n * n];
    for i in 0..n {
        dense[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let v = 0.5 * (raw[i * n + j] + raw[j * n + i]) / (scale[i] * scale[j]);
            dense[i * n + j] = v;
            dense[j * n + i] = v;
        }
    }
    CorrelationMatrix::from_dense(spec.symbols.clone(), spec.source_tag, &dense)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn syms(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("S{i}")).collect()
    }

    fn equicorrelated(n: usize, rho: f64) -> CorrelationMatrix {
        let mut v = vec![rho; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        CorrelationMatrix::from_dense(syms(n), EstimatorTag::PearsonDaily, &v).unwrap()
    }

    #[test]
    fn identity_spectrum() {
        let s = eigendecompose(&equicorrelated(5, 0.0)).unwrap();
        assert!(s.eigenvalues().iter().all(|&l| l == 1.0));
        assert_eq!(market_mode_strength(&s), 0.2);
        let s10 = eigendecompose(&equicorrelated(10, 0.0)).unwrap();
        assert_eq!(market_mode_strength(&s10), 0.1);
    }

    #[test]
    fn two_by_two_closed_form() {
        for rho in [-0.9, -0.3, 0.25, 0.8] {
            let s = eigendecompose(&equicorrelated(2, rho)).unwrap();
            let (hi, lo) = (1.0 + rho.abs(), 1.0 - rho.abs());
            assert!((s.eigenvalues()[0] - hi).abs() < 1e-14);
            assert!((s.eigenvalues()[1] - lo).abs() < 1e-14);
        }
    }

    #[test]
    fn all_ones_is_rank_one() {
        let s = eigendecompose(&equicorrelated(6, 1.0)).unwrap();
        assert!((market_mode_strength(&s) - 1.0).abs() < 1e-12);
        let v = s.eigenvector(0);
        let expect = 1.0 / 6f64.sqrt();
        assert!(v.iter().all(|x| (x - expect).abs() < 1e-12));
    }

    #[test]
    fn undefined_entries_rejected() {
        let m = CorrelationMatrix::new(
            syms(2),
            EstimatorTag::PearsonBinned,
            vec![None, None, None, None],
            vec![0; 4],
        )
        .unwrap();
        assert!(eigendecompose(&m).is_err());
    }

    #[test]
    fn sign_convention_positive_pivot() {
        let s = eigendecompose(&equicorrelated(4, -0.2)).unwrap();
        for k in 0..4 {
            let v = s.eigenvector(k);
            let pivot = v
                .iter()
                .copied()
                .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn cleaning_with_uniform_noise_band_is_noop() {
        // eigenvalues (2, 0.5, 0.5): the noise band is already flat
        let m = equicorrelated(3, 0.5);
        let s = eigendecompose(&m).unwrap();
        let c = clean_spectrum(&s, 0.01).unwrap();
        for (a, b) in c.values().iter().zip(m.values()) {
            assert!((a.unwrap() - b.unwrap()).abs() < 1e-9);
        }
        assert!(clean_spectrum(&s, 0.0).is_err());
    }

    #[test]
    fn spectrum_csv_layout() {
        let csv = spectrum_series_csv(&[Ok(vec![0.5, 0.25]), Err(Error::invalid("x"))]);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "bin,lambda1_over_N,lambda2_over_N,lambda3_over_N,lambda4_over_N,lambda5_over_N,lambda6_over_N,lambda7_over_N"
        );
        assert_eq!(lines.next().unwrap(), "0,0.5,0.25,,,,,");
        assert_eq!(lines.next().unwrap(), "1,,,,,,,");
    }
}
