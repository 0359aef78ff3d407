//! Synthetic ground truth: correlated diffusions observed at independent
//! Poisson times, planted one-factor return panels, and random correlation
//! matrices.
//!
//! Randomness comes from ChaCha8 seeded with the caller's seed. Each asset
//! owns its own streams: stream `2i` drives asset `i`'s observation times
//! and stream `2i + 1` the `i`-th independent Brownian driver, which is
//! addressed by position rather than drawn sequentially. Adding an asset
//! therefore leaves the existing assets' ticks bit-for-bit unchanged. Planted panels use
//! stream 0 for the common factor and stream `i + 1` for asset `i`.

use chrono::{NaiveDate, NaiveTime, Timelike};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{
    BinGrid, BinnedReturnPanel, CorrelationMatrix, DailyCloses, EstimatorTag, Tick, TickSeries,
    NANOS_PER_SEC,
};
use crate::error::{Error, Result};

const PSD_TOLERANCE: f64 = 1e-12;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Constant-coefficient multivariate diffusion of log-prices,
/// `dX_i = mu_i dt + sigma_i dW_i` with `d<W_i, W_j> = rho_ij dt`, observed
/// at independent Poisson times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSpec {
    pub symbols: Vec<String>,
    /// Per second.
    pub drift: Vec<f64>,
    /// Per square-root second.
    pub volatility: Vec<f64>,
    /// Row-major N x N correlation of the driving noises.
    pub correlation: Vec<f64>,
    pub session_length_secs: f64,
    /// Poisson intensity of trades per asset, events per second.
    pub observation_rate: Vec<f64>,
    pub seed: u64,
    /// Session start, nanoseconds since the epoch.
    #[serde(default)]
    pub start_ns: i64,
    #[serde(default = "default_initial_price")]
    pub initial_price: f64,
    /// Also observe every asset at the session start and end.
    #[serde(default = "default_true")]
    pub anchor_endpoints: bool,
    /// Every asset trades at asset 0's Poisson times.
    #[serde(default)]
    pub shared_observation_times: bool,
}

fn default_initial_price() -> f64 {
    100.0
}

fn default_true() -> bool {
    true
}

impl DiffusionSpec {
    /// Two assets with unit-free volatility `1e-4` per root second.
    pub fn pair(rho: f64, rate_x: f64, rate_y: f64, session_length_secs: f64, seed: u64) -> Self {
        DiffusionSpec {
            symbols: vec!["X".into(), "Y".into()],
            drift: vec![0.0; 2],
            volatility: vec![1e-4; 2],
            correlation: vec![1.0, rho, rho, 1.0],
            session_length_secs,
            observation_rate: vec![rate_x, rate_y],
            seed,
            start_ns: 0,
            initial_price: 100.0,
            anchor_endpoints: true,
            shared_observation_times: false,
        }
    }

    /// `n` assets with common pairwise correlation `rho`.
    pub fn equicorrelated(
        n: usize,
        rho: f64,
        rate: f64,
        session_length_secs: f64,
        seed: u64,
    ) -> Self {
        let mut correlation = vec![rho; n * n];
        for i in 0..n {
            correlation[i * n + i] = 1.0;
        }
        DiffusionSpec {
            symbols: (0..n).map(|i| format!("S{i:02}")).collect(),
            drift: vec![0.0; n],
            volatility: vec![1e-4; n],
            correlation,
            session_length_secs,
            observation_rate: vec![rate; n],
            seed,
            start_ns: 0,
            initial_price: 100.0,
            anchor_endpoints: true,
            shared_observation_times: false,
        }
    }

    pub fn n_assets(&self) -> usize {
        self.symbols.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_assets();
        if n == 0 {
            return Err(Error::invalid("diffusion needs at least one asset"));
        }
        if self.drift.len() != n
            || self.volatility.len() != n
            || self.observation_rate.len() != n
            || self.correlation.len() != n * n
        {
            return Err(Error::invalid("diffusion parameter lengths disagree with asset count"));
        }
        if self.volatility.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid("volatility must be non-negative"));
        }
        if self.observation_rate.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::invalid("observation rates must be positive"));
        }
        if !(self.session_length_secs > 0.0) {
            return Err(Error::invalid("session length must be positive"));
        }
        if !(self.initial_price > 0.0) {
            return Err(Error::invalid("initial price must be positive"));
        }
        for i in 0..n {
            if self.correlation[i * n + i] != 1.0 {
                return Err(Error::invalid("correlation diagonal must be 1"));
            }
            for j in 0..i {
                if self.correlation[i * n + j] != self.correlation[j * n + i] {
                    return Err(Error::invalid("correlation must be symmetric"));
                }
            }
        }
        Ok(())
    }
}

/// Lower-triangular `L` with `L L^T = a` for a positive semidefinite `a`.
/// Zero pivots (within tolerance) yield zero columns; negative pivots fail.
pub fn cholesky_psd(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let d = a[j * n + j] - (0..j).map(|k| l[j * n + k] * l[j * n + k]).sum::<f64>();
        if d < -PSD_TOLERANCE {
            return Err(Error::invalid(format!(
                "correlation matrix is not positive semidefinite (pivot {d} at {j})"
            )));
        }
        let pivot = d.max(0.0).sqrt();
        l[j * n + j] = pivot;
        for i in (j + 1)..n {
            let s = a[i * n + j] - (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum::<f64>();
            if pivot > PSD_TOLERANCE {
                l[i * n + j] = s / pivot;
            } else if s.abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "correlation matrix is not positive semidefinite (column {j})"
                )));
            }
        }
    }
    Ok(l)
}

fn poisson_times(rng: &mut ChaCha8Rng, rate: f64, length_ns: i64) -> Vec<i64> {
    let exp = Exp::new(rate).expect("positive rate");
    let mut t = 0.0;
    let mut out = Vec::new();
    loop {
        t += rng.sample::<f64, _>(exp);
        let ns = (t * NANOS_PER_SEC as f64).round() as i64;
        if ns >= length_ns {
            break;
        }
        if ns > 0 && out.last().is_none_or(|&last| ns > last) {
            out.push(ns);
        }
    }
    out
}

/// One session of asynchronously observed prices.
///
/// Every reported price is an exact sample of the latent diffusion at its
/// own observation instant; there is no interpolation between grid points.
/// Sessions are limited to about 9.8 hours.
pub fn simulate_asynchronous_ticks(spec: &DiffusionSpec) -> Result<Vec<TickSeries>> {
    spec.validate()?;
    let log_start: Vec<f64> = vec![spec.initial_price.ln(); spec.n_assets()];
    let (series, _) = simulate_session(spec, &log_start, spec.seed)?;
    Ok(series)
}

/// A standard Brownian motion on integer nanoseconds `[0, 2^LEVELS]`,
/// built by dyadic midpoint refinement (Levy's construction). The Gaussian
/// at each tree node is read from a fixed counter position of the driver's
/// own ChaCha8 stream, so `W(t)` is a fixed function of the seed, the driver
/// and `t`: which other times are queried, or how many assets share the
/// driver, never changes it.
struct BrownianPath {
    rng: ChaCha8Rng,
    /// Refinement path to the last queried time: `(lo, hi, w_lo, w_hi, node)`.
    stack: Vec<(i64, i64, f64, f64, u64)>,
}

/// `2^45` ns is about 9.8 hours, longer than any single session.
const LEVELS: u32 = 45;

impl BrownianPath {
    fn new(seed: u64, stream: u64) -> Self {
        let mut rng = stream_rng(seed, stream);
        let horizon = 1i64 << LEVELS;
        let w_end = Self::node_normal(&mut rng, 1) * (horizon as f64 / NANOS_PER_SEC as f64).sqrt();
        BrownianPath {
            rng,
            stack: vec![(0, horizon, 0.0, w_end, 1)],
        }
    }

    /// Box-Muller on the four 32-bit words at the node's counter position.
    fn node_normal(rng: &mut ChaCha8Rng, node: u64) -> f64 {
        rng.set_word_pos(node as u128 * 4);
        let u1 = ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
        let u2 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// `W(t)` in units of root seconds. Cheapest for non-decreasing queries.
    fn at(&mut self, t: i64) -> f64 {
        debug_assert!((0..=1i64 << LEVELS).contains(&t));
        while self.stack.len() > 1 {
            let (lo, hi, ..) = *self.stack.last().expect("non-empty");
            if lo <= t && t <= hi {
                break;
            }
            self.stack.pop();
        }
        loop {
            let (lo, hi, w_lo, w_hi, node) = *self.stack.last().expect("non-empty");
            if t == lo {
                return w_lo;
            }
            if t == hi {
                return w_hi;
            }
            let mid = lo + (hi - lo) / 2;
            let sd = ((hi - lo) as f64 / NANOS_PER_SEC as f64 / 4.0).sqrt();
            let w_mid = 0.5 * (w_lo + w_hi) + sd * Self::node_normal(&mut self.rng, node);
            // children of node k are 2k and 2k + 1
            if t <= mid {
                self.stack.push((lo, mid, w_lo, w_mid, 2 * node));
            } else {
                self.stack.push((mid, hi, w_mid, w_hi, 2 * node + 1));
            }
        }
    }
}

/// Simulates one session starting from `log_start`; returns the tick
/// series and the log-prices at the session end.
///
/// Asset `i` is `X_i(t) = X_i(0) + mu_i t + sigma_i sum_j L_ij W_j(t)` with
/// `L` the Cholesky factor of the correlation and `W_j` independent
/// Brownian motions, evaluated exactly at the asset's own observation times.
fn simulate_session(
    spec: &DiffusionSpec,
    log_start: &[f64],
    seed: u64,
) -> Result<(Vec<TickSeries>, Vec<f64>)> {
    use rayon::prelude::*;

    let n = spec.n_assets();
    let chol = cholesky_psd(&spec.correlation, n)?;
    let length_ns = (spec.session_length_secs * NANOS_PER_SEC as f64).round() as i64;
    if length_ns > 1i64 << LEVELS {
        return Err(Error::invalid(format!(
            "session of {} s is longer than the simulator's {} s horizon",
            spec.session_length_secs,
            (1i64 << LEVELS) / NANOS_PER_SEC
        )));
    }

    let simulated: Vec<(Vec<Tick>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (stream, rate) = if spec.shared_observation_times {
                (0, spec.observation_rate[0])
            } else {
                (2 * i as u64, spec.observation_rate[i])
            };
            let mut times = poisson_times(&mut stream_rng(seed, stream), rate, length_ns);
            if spec.anchor_endpoints {
                times.insert(0, 0);
                times.push(length_ns);
            }
            times.push(length_ns); // session end, for the carry-over
            let mut noise = vec![0.0; times.len()];
            for j in (0..=i).filter(|&j| chol[i * n + j] != 0.0) {
                let mut w = BrownianPath::new(seed, 2 * j as u64 + 1);
                for (acc, &t) in noise.iter_mut().zip(&times) {
                    *acc += chol[i * n + j] * w.at(t);
                }
            }
            let x: Vec<f64> = times
                .iter()
                .zip(&noise)
                .map(|(&t, z)| {
                    let secs = t as f64 / NANOS_PER_SEC as f64;
                    log_start[i] + spec.drift[i] * secs + spec.volatility[i] * z
                })
                .collect();
            let last = x[x.len() - 1];
            let ticks = times[..times.len() - 1]
                .iter()
                .zip(&x)
                .map(|(&t, v)| Tick::new(spec.start_ns + t, v.exp()))
                .collect();
            (ticks, last)
        })
        .collect();

    let mut end = Vec::with_capacity(n);
    let mut series = Vec::with_capacity(n);
    for (sym, (ticks, last)) in spec.symbols.iter().zip(simulated) {
        series.push(TickSeries::new(sym.clone(), ticks)?);
        end.push(last);
    }
    Ok((series, end))
}

/// The same diffusion run over several trading days, one session per day
/// starting at `session_start`. Prices carry over unchanged between
/// sessions; day `d` uses seed `spec.seed + d`.
pub fn simulate_trading_days(
    spec: &DiffusionSpec,
    days: &[NaiveDate],
    session_start: NaiveTime,
) -> Result<Vec<TickSeries>> {
    spec.validate()?;
    let n = spec.n_assets();
    let mut log_price = vec![spec.initial_price.ln(); n];
    let mut all: Vec<Vec<Tick>> = vec![Vec::new(); n];
    for (d, day) in days.iter().enumerate() {
        let mut day_spec = spec.clone();
        day_spec.start_ns = day.and_time(NaiveTime::MIN).and_utc().timestamp() * NANOS_PER_SEC
            + session_start.num_seconds_from_midnight() as i64 * NANOS_PER_SEC;
        let (series, end) = simulate_session(&day_spec, &log_price, spec.seed.wrapping_add(d as u64))?;
        log_price = end;
        for (acc, s) in all.iter_mut().zip(series) {
            acc.extend_from_slice(s.ticks());
        }
    }
    spec.symbols
        .iter()
        .zip(all)
        .map(|(s, t)| TickSeries::new(s.clone(), t))
        .collect()
}

/// Grid with `k` bins from 10:00 over consecutive calendar days starting
/// 2011-03-01. Bins split 10:00-16:00 evenly when `k` divides 21600
/// seconds, otherwise they are 300 seconds wide.
pub fn synthetic_grid(k: usize, t: usize) -> Result<BinGrid> {
    let start = NaiveTime::from_hms_opt(10, 0, 0).expect("valid time");
    let width = if k > 0 && 21_600 % k == 0 { 21_600 / k } else { 300 };
    let end_secs = 36_000 + width * k;
    if k == 0 || end_secs >= 86_400 {
        return Err(Error::invalid(format!("cannot lay out {k} bins in one day")));
    }
    let end = NaiveTime::from_num_seconds_from_midnight_opt(end_secs as u32, 0).expect("in day");
    let first = NaiveDate::from_ymd_opt(2011, 3, 1).expect("valid date");
    let days = (0..t).map(|d| first + chrono::Days::new(d as u64)).collect();
    BinGrid::new(start, end, width as u32, days)
}

/// Scale of planted returns.
const PLANTED_VOLATILITY: f64 = 1e-3;

/// One-factor panel `r_i(k;t) = s (sqrt(rho_k) f(k;t) + sqrt(1 - rho_k) e_i(k;t))`
/// with standard normal factor and idiosyncratic terms, so the population
/// pairwise correlation in bin `k` is `rho_k`.
pub fn simulate_planted_panel(
    n_assets: usize,
    grid: &BinGrid,
    rho_of_k: &[f64],
    seed: u64,
) -> Result<BinnedReturnPanel> {
    let (k_len, t_len) = (grid.n_bins(), grid.n_days());
    if rho_of_k.len() != k_len {
        return Err(Error::invalid(format!(
            "{} planted correlations for {k_len} bins",
            rho_of_k.len()
        )));
    }
    if let Some(r) = rho_of_k.iter().find(|r| !(0.0..1.0).contains(*r)) {
        return Err(Error::invalid(format!("planted correlation {r} outside [0, 1)")));
    }
    if n_assets == 0 {
        return Err(Error::invalid("panel needs at least one asset"));
    }
    let mut factor_rng = stream_rng(seed, 0);
    let factor: Vec<f64> = (0..k_len * t_len).map(|_| factor_rng.sample(StandardNormal)).collect();
    let mut returns = Vec::with_capacity(n_assets * k_len * t_len);
    for i in 0..n_assets {
        let mut rng = stream_rng(seed, i as u64 + 1);
        for (k, &rho) in rho_of_k.iter().enumerate() {
            let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
            for t in 0..t_len {
                let e: f64 = rng.sample(StandardNormal);
                returns.push(Some(PLANTED_VOLATILITY * (a * factor[k * t_len + t] + b * e)));
            }
        }
    }
    let symbols = (0..n_assets).map(|i| format!("S{i:02}")).collect();
    BinnedReturnPanel::new(symbols, grid.clone(), returns)
}

/// Daily closes from a one-factor model whose correlation may change per
/// day: the log-return on day `d` is
/// `vol (sqrt(rho_d) f_d + sqrt(1 - rho_d) e_{i,d})`. `rho_of_day` has one
/// entry per return, i.e. `dates.len() - 1` entries.
pub fn simulate_daily_closes(
    n_assets: usize,
    dates: &[NaiveDate],
    rho_of_day: &[f64],
    daily_vol: f64,
    seed: u64,
) -> Result<DailyCloses> {
    if dates.len() < 2 || rho_of_day.len() != dates.len() - 1 {
        return Err(Error::invalid("need one planted correlation per daily return"));
    }
    if let Some(r) = rho_of_day.iter().find(|r| !(0.0..1.0).contains(*r)) {
        return Err(Error::invalid(format!("planted correlation {r} outside [0, 1)")));
    }
    let mut factor_rng = stream_rng(seed, 0);
    let factor: Vec<f64> = rho_of_day.iter().map(|_| factor_rng.sample(StandardNormal)).collect();
    let closes = (0..n_assets)
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64 + 1);
            let mut lp = 100f64.ln();
            let mut row = vec![Some(lp.exp())];
            for (d, &rho) in rho_of_day.iter().enumerate() {
                let e: f64 = rng.sample(StandardNormal);
                lp += daily_vol * (rho.sqrt() * factor[d] + (1.0 - rho).sqrt() * e);
                row.push(Some(lp.exp()));
            }
            row
        })
        .collect();
    let symbols = (0..n_assets).map(|i| format!("S{i:02}")).collect();
    DailyCloses::new(symbols, dates.to_vec(), closes)
}

/// Weekday calendar of `n` dates starting from `first`.
pub fn business_days(first: NaiveDate, n: usize) -> Vec<NaiveDate> {
    use chrono::Datelike;
    let mut out = Vec::with_capacity(n);
    let mut d = first;
    while out.len() < n {
        if d.weekday().num_days_from_monday() < 5 {
            out.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

/// Sample correlation matrix of `t_samples` Gaussian draws whose loadings on
/// a handful of random factors are themselves random, giving a generic
/// full-rank correlation matrix when `t_samples > n`.
pub fn random_correlation_matrix(n: usize, t_samples: usize, seed: u64) -> Result<CorrelationMatrix> {
    let mut rng = stream_rng(seed, 0);
    let factors = 3;
    let loadings: Vec<f64> = (0..n * factors).map(|_| rng.random_range(-1.0..1.0)).collect();
    let samples: Vec<Vec<Option<f64>>> = {
        let mut cols = vec![Vec::with_capacity(t_samples); n];
        for _ in 0..t_samples {
            let f: Vec<f64> = (0..factors).map(|_| rng.sample(StandardNormal)).collect();
            for (i, col) in cols.iter_mut().enumerate() {
                let e: f64 = rng.sample(StandardNormal);
                let common: f64 = (0..factors).map(|q| loadings[i * factors + q] * f[q]).sum();
                col.push(Some(common + e));
            }
        }
        cols
    };
    let refs: Vec<&[Option<f64>]> = samples.iter().map(|c| c.as_slice()).collect();
    let symbols: Vec<String> = (0..n).map(|i| format!("S{i:02}")).collect();
    crate::estimators::pearson_matrix(&symbols, &refs, EstimatorTag::PearsonDaily)
}
