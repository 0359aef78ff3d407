use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Coordinates moved onto a target by the best rigid motion.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedCoords {
    pub coords: Vec<Vec<f64>>,
    /// Root mean squared point-to-point distance after alignment.
    pub rms: f64,
}

fn to_centered_matrix(coords: &[Vec<f64>]) -> (DMatrix<f64>, Vec<f64>) {
    let n = coords.len();
    let dims = coords.first().map_or(0, Vec::len);
    let c = super::centroid(coords);
    let m = DMatrix::from_fn(n, dims, |i, a| coords[i][a] - c[a]);
    (m, c)
}

/// Orthogonal Procrustes with translation: the rotation (or reflection)
/// and shift of `source` that best matches `target` in least squares.
pub fn align_to(source: &[Vec<f64>], target: &[Vec<f64>]) -> Result<AlignedCoords> {
    if source.len() != target.len() || source.is_empty() {
        return Err(Error::invalid("alignment needs equally many points"));
    }
    let dims = target[0].len();
    if source.iter().chain(target).any(|p| p.len() != dims) {
        return Err(Error::invalid("alignment needs equal dimensions"));
    }
    let (a, _) = to_centered_matrix(source);
    let (b, b_mean) = to_centered_matrix(target);
    let h = a.transpose() * &b;
    let svd = h.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Numerical("SVD failed during alignment".into())),
    };
    let rotation = u * v_t;
    let moved = a * rotation;
    let coords: Vec<Vec<f64>> = (0..moved.nrows())
        .map(|i| (0..dims).map(|k| moved[(i, k)] + b_mean[k]).collect())
        .collect();
    let rms = aligned_rms_raw(&coords, target);
    Ok(AlignedCoords { coords, rms })
}

fn aligned_rms_raw(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let ss: f64 = a
        .iter()
        .zip(b)
        .map(|(p, q)| super::euclidean(p, q).powi(2))
        .sum();
    (ss / a.len() as f64).sqrt()
}

/// RMS point error of `source` against `target` after optimal alignment.
pub fn aligned_rms(source: &[Vec<f64>], target: &[Vec<f64>]) -> Result<f64> {
    align_to(source, target).map(|a| a.rms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_rotation_translation_and_reflection() {
        let target = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 1.0]];
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let rotated: Vec<Vec<f64>> = target
            .iter()
            .map(|p| vec![c * p[0] - s * p[1] + 5.0, s * p[0] + c * p[1] - 2.0])
            .collect();
        assert!(aligned_rms(&rotated, &target).unwrap() < 1e-12);
        let mirrored: Vec<Vec<f64>> = target.iter().map(|p| vec![-p[0], p[1]]).collect();
        assert!(aligned_rms(&mirrored, &target).unwrap() < 1e-12);
    }

    #[test]
    fn mismatched_sizes_rejected() {
        assert!(align_to(&[vec![0.0]], &[vec![0.0], vec![1.0]]).is_err());
    }
}
