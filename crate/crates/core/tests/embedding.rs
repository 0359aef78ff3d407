use proptest::prelude::*;

use comove::data::{CorrelationMatrix, DistanceMatrix, EstimatorTag};
use comove::embedding::{
    aligned_rms, center, chain_embed, mds_embed, mean_distance_from_center, stress, to_distance,
    AnnealingConfig,
};
use comove::synth::random_correlation_matrix;

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("P{i}")).collect()
}

fn distances_of(points: &[[f64; 2]]) -> DistanceMatrix {
    let n = points.len();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            v[i * n + j] = ((points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2)).sqrt();
        }
    }
    DistanceMatrix::new(names(n), v).unwrap()
}

fn uniform(n: usize, d: f64) -> DistanceMatrix {
    DistanceMatrix::new(names(n), (0..n * n).map(|x| if x / n == x % n { 0.0 } else { d }).collect()).unwrap()
}

fn equicorrelated(n: usize, rho: f64) -> CorrelationMatrix {
    let v: Vec<f64> = (0..n * n).map(|x| if x / n == x % n { 1.0 } else { rho }).collect();
    CorrelationMatrix::from_dense(names(n), EstimatorTag::PearsonDaily, &v).unwrap()
}

fn cfg() -> AnnealingConfig {
    AnnealingConfig::default()
}

#[test]
fn distance_endpoints() {
    let m = CorrelationMatrix::from_dense(names(3), EstimatorTag::PearsonDaily, &[1.0, 1.0, -1.0, 1.0, 1.0, 0.0, -1.0, 0.0, 1.0]).unwrap();
    let d = to_distance(&m).unwrap();
    assert_eq!(d.get(0, 1), 0.0);
    assert_eq!(d.get(0, 2), 2.0);
    assert_eq!(d.get(1, 2), 2f64.sqrt());
}

#[test]
fn equilateral_triangle_embeds_exactly() {
    let map = mds_embed(&uniform(3, 1.0), &cfg(), None, 0.0, 4).unwrap();
    assert!(map.stress < 1e-12, "{}", map.stress);
    assert!((mean_distance_from_center(&map) - 1.0 / 3f64.sqrt()).abs() < 1e-6);
}

#[test]
fn unit_square_embeds_exactly() {
    let square = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let d = distances_of(&square);
    let map = mds_embed(&d, &cfg(), None, 0.0, 12).unwrap();
    assert!(map.stress < 1e-12, "{}", map.stress);
    let target: Vec<Vec<f64>> = square.iter().map(|p| vec![p[0] - 0.5, p[1] - 0.5]).collect();
    assert!(aligned_rms(&map.coords, &target).unwrap() < 1e-6);
}

#[test]
fn tetrahedron_stress_floor_is_consistent_across_seeds() {
    // four equidistant points do not fit in the plane
    let d = uniform(4, 1.0);
    let floors: Vec<f64> = (0..10).map(|s| mds_embed(&d, &cfg(), None, 0.0, s).unwrap().stress).collect();
    let lo = floors.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = floors.iter().copied().fold(0.0, f64::max);
    assert!(lo > 1e-3);
    assert!(hi <= 1.2 * lo, "{floors:?}");
}

#[test]
fn stronger_correlation_pulls_stocks_together() {
    let means: Vec<f64> = [0.1, 0.3, 0.5, 0.7, 0.9]
        .iter()
        .map(|&rho| {
            let d = to_distance(&equicorrelated(12, rho)).unwrap();
            mean_distance_from_center(&mds_embed(&d, &cfg(), None, 0.0, 1).unwrap())
        })
        .collect();
    assert!(means.windows(2).all(|w| w[1] < w[0]), "{means:?}");
}

#[test]
fn chain_without_penalty_repeats_its_map() {
    let d = to_distance(&random_correlation_matrix(10, 40, 3).unwrap()).unwrap();
    let maps = chain_embed(&vec![d; 4], &cfg(), Some(0.0), 8).unwrap();
    for m in &maps[1..] {
        assert_eq!(m.coords, maps[0].coords);
    }
}

#[test]
fn chain_of_one_is_a_plain_embedding() {
    let d = to_distance(&random_correlation_matrix(8, 30, 5).unwrap()).unwrap();
    let chained = chain_embed(std::slice::from_ref(&d), &cfg(), None, 2).unwrap();
    let direct = mds_embed(&d, &cfg(), None, 0.0, 2).unwrap();
    assert_eq!(chained.len(), 1);
    assert_eq!(chained[0].coords, direct.coords);
    assert_eq!(chained[0].stress, direct.stress);
}

#[test]
fn chain_tracks_an_abrupt_change() {
    let before = to_distance(&random_correlation_matrix(15, 60, 20).unwrap()).unwrap();
    let after = to_distance(&random_correlation_matrix(15, 60, 21).unwrap()).unwrap();
    let maps = chain_embed(&[before.clone(), before, after.clone()], &cfg(), None, 3).unwrap();
    let cold = mds_embed(&after, &cfg(), None, 0.0, 3).unwrap();
    assert!(maps[2].stress <= 1.1 * cold.stress + 1e-12, "{} vs {}", maps[2].stress, cold.stress);
}

#[test]
fn large_map_is_centered() {
    let d = to_distance(&random_correlation_matrix(40, 120, 9).unwrap()).unwrap();
    let map = mds_embed(&d, &cfg(), None, 0.0, 0).unwrap();
    for a in 0..2 {
        let mean = map.coords.iter().map(|c| c[a]).sum::<f64>() / 40.0;
        assert!(mean.abs() < 1e-12);
    }
    assert_eq!(center(&map).coords, map.coords);
}

#[test]
fn perturbed_square_stress() {
    let d = distances_of(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
    let moved = vec![vec![0.1, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
    // only the three pairs touching the moved point change
    let expected = (0.9f64 - 1.0).powi(2) + ((0.81f64 + 1.0).sqrt() - 2f64.sqrt()).powi(2) + ((0.01f64 + 1.0).sqrt() - 1.0).powi(2);
    assert!((stress(&moved, &d).unwrap() - expected).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn stress_is_invariant_under_rigid_motions(
        pts in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 3..15),
        target in prop::collection::vec(0.0f64..2.0, 15 * 15),
        angle in 0.0f64..std::f64::consts::TAU,
        shift in (-5.0f64..5.0, -5.0f64..5.0),
        flip in any::<bool>(),
    ) {
        let n = pts.len();
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                v[i * n + j] = target[i * 15 + j];
                v[j * n + i] = target[i * 15 + j];
            }
        }
        let d = DistanceMatrix::new(names(n), v).unwrap();
        let coords: Vec<Vec<f64>> = pts.iter().map(|&(x, y)| vec![x, y]).collect();
        let (c, s) = (angle.cos(), angle.sin());
        let moved: Vec<Vec<f64>> = pts
            .iter()
            .map(|&(x, y)| {
                let y = if flip { -y } else { y };
                vec![c * x - s * y + shift.0, s * x + c * y + shift.1]
            })
            .collect();
        let (a, b) = (stress(&coords, &d).unwrap(), stress(&moved, &d).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }
}
