//! Correlation-to-distance transform and low-dimensional maps of the
//! resulting distance matrices.

mod align;
mod anneal;

pub use align::{align_to, aligned_rms, AlignedCoords};
pub use anneal::{chain_embed, mds_embed, AnnealingConfig, AnnealingSchedule};
pub(crate) use anneal::default_penalty_weight;

use serde::{Deserialize, Serialize};

use crate::data::{CorrelationMatrix, DistanceMatrix, CLIP_TOLERANCE};
use crate::error::{Error, Result};

/// Centroid-centered coordinates of N symbols in D dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMap {
    pub symbols: Vec<String>,
    pub coords: Vec<Vec<f64>>,
    /// Stress of `coords` against the target distances. For a map averaged
    /// over several days this is the mean stress of the member maps.
    pub stress: f64,
    /// Stress plus the warm-start penalty actually minimized.
    pub penalized_cost: f64,
    pub seed: u64,
    pub penalty_weight: f64,
    /// Resolved annealing parameters; absent for averaged maps.
    pub schedule: Option<AnnealingSchedule>,
}

impl EmbeddingMap {
    pub fn n(&self) -> usize {
        self.symbols.len()
    }

    pub fn dims(&self) -> usize {
        self.coords.first().map_or(0, Vec::len)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// CSV `symbol,x,y` (further axes continue as `x3,x4,...`).
    pub fn to_csv(&self) -> String {
        let axes = ["x", "y"];
        let mut out = String::from("symbol");
        for a in 0..self.dims() {
            out.push(',');
            match axes.get(a) {
                Some(name) => out.push_str(name),
                None => out.push_str(&format!("x{}", a + 1)),
            }
        }
        out.push('\n');
        for (s, c) in self.symbols.iter().zip(&self.coords) {
            out.push_str(s);
            for v in c {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// `d_ij = sqrt(2 (1 - rho_ij))`, mapping correlation 1 to 0 and -1 to 2.
pub fn to_distance(m: &CorrelationMatrix) -> Result<DistanceMatrix> {
    let n = m.n();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let rho = m.get(i, j).ok_or_else(|| {
                Error::invalid(format!(
                    "correlation between {} and {} is undefined",
                    m.symbols()[i],
                    m.symbols()[j]
                ))
            })?;
            if rho.abs() > 1.0 + CLIP_TOLERANCE {
                return Err(Error::invalid(format!("correlation {rho} outside [-1, 1]")));
            }
            let d = (2.0 * (1.0 - rho.clamp(-1.0, 1.0))).sqrt();
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    DistanceMatrix::new(m.symbols().to_vec(), values)
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// `sum_{i<j} (|x_i - x_j| - d_ij)^2`.
pub fn stress(coords: &[Vec<f64>], d: &DistanceMatrix) -> Result<f64> {
    let n = d.n();
    if coords.len() != n {
        return Err(Error::invalid(format!(
            "{} points for a {n}x{n} distance matrix",
            coords.len()
        )));
    }
    let dims = coords.first().map_or(0, Vec::len);
    if coords.iter().any(|c| c.len() != dims) {
        return Err(Error::invalid("points have inconsistent dimension"));
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += (euclidean(&coords[i], &coords[j]) - d.get(i, j)).powi(2);
        }
    }
    Ok(s)
}

pub(crate) fn centroid(coords: &[Vec<f64>]) -> Vec<f64> {
    let dims = coords.first().map_or(0, Vec::len);
    let n = coords.len() as f64;
    (0..dims)
        .map(|a| coords.iter().map(|c| c[a]).sum::<f64>() / n)
        .collect()
}

/// Subtract the centroid. A centroid already at round-off level is left
/// alone so that re-centering a centered map is the identity.
pub(crate) fn center_coords(coords: &mut [Vec<f64>]) {
    let c = centroid(coords);
    let scale = coords.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if c.iter().all(|m| m.abs() <= 1e-14 * scale) {
        return;
    }
    for p in coords.iter_mut() {
        for (x, m) in p.iter_mut().zip(&c) {
            *x -= m;
        }
    }
}

/// Translate the map so its centroid is the origin.
pub fn center(map: &EmbeddingMap) -> EmbeddingMap {
    let mut out = map.clone();
    center_coords(&mut out.coords);
    out
}

/// `(1/N) sum_i |x_i|`.
pub fn mean_distance_from_center(map: &EmbeddingMap) -> f64 {
    if map.coords.is_empty() {
        return 0.0;
    }
    let origin = vec![0.0; map.dims()];
    map.coords.iter().map(|c| euclidean(c, &origin)).sum::<f64>() / map.n() as f64
}

/// Per-symbol mean of the coordinates of maps that share symbols and
/// dimension, re-centered.
pub fn average_coords_across_days(maps: &[EmbeddingMap]) -> Result<EmbeddingMap> {
    let first = maps
        .first()
        .ok_or_else(|| Error::invalid("no maps to average"))?;
    for m in maps {
        if m.symbols != first.symbols {
            return Err(Error::SymbolMismatch("maps carry different symbols".into()));
        }
        if m.dims() != first.dims() {
            return Err(Error::invalid("maps have different dimensions"));
        }
    }
    let count = maps.len() as f64;
    let mut coords = vec![vec![0.0; first.dims()]; first.n()];
    for m in maps {
        for (acc, c) in coords.iter_mut().zip(&m.coords) {
            for (a, v) in acc.iter_mut().zip(c) {
                *a += v;
            }
        }
    }
    for c in coords.iter_mut() {
        for v in c.iter_mut() {
            *v /= count;
        }
    }
    center_coords(&mut coords);
    Ok(EmbeddingMap {
        symbols: first.symbols.clone(),
        coords,
        stress: maps.iter().map(|m| m.stress).sum::<f64>() / count,
        penalized_cost: maps.iter().map(|m| m.penalized_cost).sum::<f64>() / count,
        seed: first.seed,
        penalty_weight: first.penalty_weight,
        schedule: None,
    })
}

/// Entrywise mean of correlation matrices over days, unit diagonal. An
/// entry undefined on some day averages over the days where it is defined.
pub fn average_correlations_across_days(matrices: &[CorrelationMatrix]) -> Result<CorrelationMatrix> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::invalid("no matrices to average"))?;
    if matrices.iter().any(|m| m.symbols() != first.symbols()) {
        return Err(Error::SymbolMismatch("matrices carry different symbols".into()));
    }
    let n = first.n();
    let mut values = vec![None; n * n];
    let mut support = vec![0; n * n];
    for idx in 0..n * n {
        let defined: Vec<f64> = matrices.iter().filter_map(|m| m.values()[idx]).collect();
        if !defined.is_empty() {
            values[idx] = Some(defined.iter().sum::<f64>() / defined.len() as f64);
        }
        support[idx] = matrices.iter().map(|m| m.support(idx / n, idx % n)).sum();
    }
    Ok(CorrelationMatrix::new(first.symbols().to_vec(), first.estimator_tag(), values, support)?
        .mark_averaged())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::EstimatorTag;

    fn syms(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("S{i}")).collect()
    }

    fn map(coords: Vec<Vec<f64>>) -> EmbeddingMap {
        EmbeddingMap {
            symbols: syms(coords.len()),
            coords,
            stress: 0.0,
            penalized_cost: 0.0,
            seed: 0,
            penalty_weight: 0.0,
            schedule: None,
        }
    }

    #[test]
    fn distance_endpoints() {
        for (rho, d) in [(1.0, 0.0), (0.0, std::f64::consts::SQRT_2), (-1.0, 2.0)] {
            let m = CorrelationMatrix::from_dense(syms(2), EstimatorTag::PearsonDaily, &[1.0, rho, rho, 1.0])
                .unwrap();
            let dm = to_distance(&m).unwrap();
            assert_eq!(dm.get(0, 1), d);
            assert_eq!(dm.get(0, 0), 0.0);
        }
    }

    #[test]
    fn undefined_correlation_rejected() {
        let m = CorrelationMatrix::new(syms(2), EstimatorTag::PearsonBinned, vec![None; 4], vec![0; 4])
            .unwrap();
        assert!(to_distance(&m).is_err());
    }

    #[test]
    fn stress_of_single_pair() {
        let d = DistanceMatrix::new(syms(2), vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(stress(&[vec![0.0, 0.0], vec![2.0, 0.0]], &d).unwrap(), 1.0);
        assert_eq!(stress(&[vec![0.0, 0.0], vec![0.6, 0.8]], &d).unwrap(), 0.0);
        assert!(stress(&[vec![0.0, 0.0]], &d).is_err());
    }

    #[test]
    fn centering_examples() {
        let m = center(&map(vec![vec![0.0, 0.0], vec![2.0, 0.0]]));
        assert_eq!(m.coords, vec![vec![-1.0, 0.0], vec![1.0, 0.0]]);
        assert_eq!(center(&m), m);
        assert_eq!(mean_distance_from_center(&m), 1.0);
        assert_eq!(mean_distance_from_center(&map(vec![vec![0.0, 0.0]; 3])), 0.0);
    }

    #[test]
    fn mirrored_maps_average_to_zero() {
        let a = map(vec![vec![1.0, 2.0], vec![-1.0, -2.0]]);
        let b = map(vec![vec![-1.0, -2.0], vec![1.0, 2.0]]);
        let avg = average_coords_across_days(&[a.clone(), b]).unwrap();
        assert!(avg.coords.iter().flatten().all(|v| *v == 0.0));
        assert_eq!(average_coords_across_days(&[a.clone(), a.clone()]).unwrap().coords, a.coords);
    }

    #[test]
    fn averaging_rejects_symbol_mismatch() {
        let a = map(vec![vec![1.0, 0.0], vec![-1.0, 0.0]]);
        let mut b = a.clone();
        b.symbols[1] = "Z".into();
        assert!(matches!(average_coords_across_days(&[a, b]), Err(Error::SymbolMismatch(_))));
    }

    #[test]
    fn correlation_averaging_cancels() {
        let p = CorrelationMatrix::from_dense(syms(2), EstimatorTag::HayashiYoshida, &[1.0, 0.4, 0.4, 1.0])
            .unwrap();
        let q = CorrelationMatrix::from_dense(syms(2), EstimatorTag::HayashiYoshida, &[1.0, -0.4, -0.4, 1.0])
            .unwrap();
        let avg = average_correlations_across_days(&[p.clone(), q]).unwrap();
        assert_eq!(avg.get(0, 1), Some(0.0));
        assert_eq!(avg.get(0, 0), Some(1.0));
        assert!(avg.is_averaged());
        assert_eq!(avg.estimator_tag(), EstimatorTag::HayashiYoshida);
        let same = average_correlations_across_days(&[p.clone(), p.clone()]).unwrap();
        assert_eq!(same.values(), p.values());
    }

    #[test]
    fn csv_layout() {
        let m = map(vec![vec![0.5, -1.0], vec![-0.5, 1.0]]);
        assert_eq!(m.to_csv(), "symbol,x,y\nS0,0.5,-1\nS1,-0.5,1\n");
    }
}
