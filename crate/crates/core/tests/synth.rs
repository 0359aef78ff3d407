use chrono::{NaiveDate, NaiveTime};

use comove::data::NANOS_PER_SEC;
use comove::synth::{
    business_days, cholesky_psd, simulate_asynchronous_ticks, simulate_daily_closes, simulate_planted_panel,
    simulate_trading_days, synthetic_grid, DiffusionSpec,
};

#[test]
fn increments_have_variance_sigma_squared_dt() {
    let mut spec = DiffusionSpec::equicorrelated(3, 0.4, 0.5, 20_000.0, 77);
    spec.volatility = vec![1e-4, 2e-4, 5e-4];
    let series = simulate_asynchronous_ticks(&spec).unwrap();
    for (s, vol) in series.iter().zip(&spec.volatility) {
        let lp = s.log_prices();
        let z: Vec<f64> = lp
            .windows(2)
            .map(|w| {
                let dt = (w[1].0 - w[0].0) as f64 / NANOS_PER_SEC as f64;
                (w[1].1 - w[0].1) / (vol * dt.sqrt())
            })
            .collect();
        let var = z.iter().map(|v| v * v).sum::<f64>() / z.len() as f64;
        // ~10^4 standardized increments
        assert!((var - 1.0).abs() < 0.05, "{}: {var}", s.symbol());
    }
}

#[test]
fn trade_counts_are_poisson() {
    let (rate, length) = (0.05, 21_600.0);
    let mean = rate * length;
    for seed in 0..10 {
        let spec = DiffusionSpec::pair(0.0, rate, rate, length, seed);
        for s in simulate_asynchronous_ticks(&spec).unwrap() {
            // endpoints are anchored
            let count = (s.len() - 2) as f64;
            assert!((count - mean).abs() <= 3.0 * mean.sqrt(), "seed {seed}: {count}");
        }
    }
}

#[test]
fn same_seed_same_bits() {
    let spec = DiffusionSpec::equicorrelated(5, 0.3, 0.1, 3600.0, 123);
    assert_eq!(simulate_asynchronous_ticks(&spec).unwrap(), simulate_asynchronous_ticks(&spec).unwrap());
    let other = DiffusionSpec { seed: 124, ..spec.clone() };
    assert_ne!(simulate_asynchronous_ticks(&spec).unwrap(), simulate_asynchronous_ticks(&other).unwrap());
    let grid = synthetic_grid(6, 20).unwrap();
    assert_eq!(
        simulate_planted_panel(8, &grid, &[0.2; 6], 5).unwrap(),
        simulate_planted_panel(8, &grid, &[0.2; 6], 5).unwrap()
    );
    let dates = business_days(NaiveDate::from_ymd_opt(2007, 1, 1).unwrap(), 30);
    assert_eq!(
        simulate_daily_closes(4, &dates, &[0.3; 29], 0.01, 2).unwrap(),
        simulate_daily_closes(4, &dates, &[0.3; 29], 0.01, 2).unwrap()
    );
}

#[test]
fn adding_an_asset_leaves_the_others_alone() {
    let small = DiffusionSpec::equicorrelated(3, 0.3, 0.1, 3600.0, 9);
    let large = DiffusionSpec::equicorrelated(4, 0.3, 0.1, 3600.0, 9);
    let a = simulate_asynchronous_ticks(&small).unwrap();
    let b = simulate_asynchronous_ticks(&large).unwrap();
    assert_eq!(a[..], b[..3]);
}

#[test]
fn perfectly_correlated_shared_times_coincide() {
    let mut spec = DiffusionSpec::pair(1.0, 0.2, 0.2, 3600.0, 31);
    spec.shared_observation_times = true;
    let s = simulate_asynchronous_ticks(&spec).unwrap();
    assert_eq!(s[0].ticks(), s[1].ticks());
}

#[test]
fn trading_days_stay_inside_their_sessions() {
    let spec = DiffusionSpec::equicorrelated(2, 0.5, 0.02, 6.0 * 3600.0, 4);
    let days: Vec<NaiveDate> = (1..=3).map(|d| NaiveDate::from_ymd_opt(2011, 3, d).unwrap()).collect();
    let series = simulate_trading_days(&spec, &days, NaiveTime::from_hms_opt(10, 0, 0).unwrap()).unwrap();
    for s in &series {
        for t in s.ticks() {
            let secs = t.timestamp_ns.rem_euclid(86_400 * NANOS_PER_SEC) / NANOS_PER_SEC;
            assert!((36_000..=57_600).contains(&secs));
        }
    }
}

#[test]
fn cholesky_of_psd_factor() {
    // rank-one matrix: all ones
    let l = cholesky_psd(&[1.0; 9], 3).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let v: f64 = (0..3).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
            assert!((v - 1.0).abs() < 1e-12);
        }
    }
    assert!(cholesky_psd(&[1.0, 2.0, 2.0, 1.0], 2).is_err());
}

#[test]
fn invalid_specs_are_rejected() {
    let mut spec = DiffusionSpec::pair(0.5, 0.1, 0.1, 100.0, 0);
    spec.volatility = vec![1e-4];
    assert!(simulate_asynchronous_ticks(&spec).is_err());
    let grid = synthetic_grid(2, 5).unwrap();
    assert!(simulate_planted_panel(3, &grid, &[0.2, 1.0], 0).is_err());
    assert!(simulate_planted_panel(3, &grid, &[0.2], 0).is_err());
}
