//! Metric MDS by simulated annealing of single-point Gaussian moves,
//! followed by a zero-temperature greedy polish.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{center_coords, EmbeddingMap};
use crate::data::DistanceMatrix;
use crate::error::{Error, Result};

/// Resolved annealing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealingSchedule {
    pub initial_temperature: f64,
    pub cooling_factor: f64,
    pub steps_per_temperature: usize,
    pub min_temperature: f64,
    /// Per-coordinate standard deviation of a proposal at the initial
    /// temperature; it shrinks with the square root of the temperature.
    pub proposal_scale: f64,
}

impl AnnealingSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_temperature > 0.0 && self.initial_temperature > self.min_temperature) {
            return Err(Error::invalid(format!(
                "annealing needs initial temperature {} > min temperature {} > 0",
                self.initial_temperature, self.min_temperature
            )));
        }
        if !(self.cooling_factor > 0.0 && self.cooling_factor < 1.0) {
            return Err(Error::invalid(format!(
                "cooling factor {} outside (0, 1)",
                self.cooling_factor
            )));
        }
        if self.steps_per_temperature == 0 || !(self.proposal_scale > 0.0) {
            return Err(Error::invalid("annealing steps and proposal scale must be positive"));
        }
        Ok(())
    }
}

/// Annealing settings. `None` fields are derived from the problem when a
/// run starts: the initial temperature is the starting cost divided by N,
/// steps per temperature are `100 N`, and the proposal scale is half
/// the mean target distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealingConfig {
    pub dims: usize,
    pub initial_temperature: Option<f64>,
    pub cooling_factor: f64,
    pub steps_per_temperature: Option<usize>,
    /// Minimum temperature as a fraction of the initial one.
    pub min_temperature_ratio: f64,
    pub proposal_scale: Option<f64>,
}

impl Default for AnnealingConfig {
    fn default() -> Self {
        AnnealingConfig {
            dims: 2,
            initial_temperature: None,
            cooling_factor: 0.95,
            steps_per_temperature: None,
            min_temperature_ratio: 1e-6,
            proposal_scale: None,
        }
    }
}

impl AnnealingConfig {
    fn resolve(&self, n: usize, initial_cost: f64, mean_distance: f64) -> Result<AnnealingSchedule> {
        let base = if mean_distance > 0.0 { mean_distance } else { 1.0 };
        let scale_floor = f64::EPSILON * base;
        let initial_temperature = self
            .initial_temperature
            .unwrap_or((initial_cost / n as f64).max(scale_floor * scale_floor));
        let schedule = AnnealingSchedule {
            initial_temperature,
            cooling_factor: self.cooling_factor,
            steps_per_temperature: self.steps_per_temperature.unwrap_or(100 * n),
            min_temperature: initial_temperature * self.min_temperature_ratio,
            proposal_scale: self
                .proposal_scale
                .unwrap_or((0.5 * mean_distance).max(scale_floor)),
        };
        schedule.validate()?;
        Ok(schedule)
    }
}

/// Cost `stress + weight * sum_i |x_i - a_i|^2` over flat coordinates.
struct Problem<'a> {
    d: &'a DistanceMatrix,
    n: usize,
    dims: usize,
    anchor: Option<Vec<f64>>,
    weight: f64,
}

impl Problem<'_> {
    fn dist(&self, x: &[f64], i: usize, pos: &[f64]) -> f64 {
        let xi = &x[i * self.dims..(i + 1) * self.dims];
        xi.iter().zip(pos).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }

    /// Cost terms that involve point `i` placed at `pos`.
    fn point_cost(&self, x: &[f64], i: usize, pos: &[f64]) -> f64 {
        let mut s = 0.0;
        for j in 0..self.n {
            if j != i {
                s += (self.dist(x, j, pos) - self.d.get(i, j)).powi(2);
            }
        }
        if let Some(a) = &self.anchor {
            let ai = &a[i * self.dims..(i + 1) * self.dims];
            s += self.weight * ai.iter().zip(pos).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
        }
        s
    }

    /// `(stress, penalty)`.
    fn cost_parts(&self, x: &[f64]) -> (f64, f64) {
        let mut stress = 0.0;
        for i in 0..self.n {
            let xi = &x[i * self.dims..(i + 1) * self.dims];
            for j in (i + 1)..self.n {
                stress += (self.dist(x, j, xi) - self.d.get(i, j)).powi(2);
            }
        }
        let penalty = match &self.anchor {
            Some(a) => self.weight * a.iter().zip(x).map(|(p, q)| (p - q).powi(2)).sum::<f64>(),
            None => 0.0,
        };
        (stress, penalty)
    }

    fn cost(&self, x: &[f64]) -> f64 {
        let (s, p) = self.cost_parts(x);
        s + p
    }

    fn gradient(&self, x: &[f64], i: usize, out: &mut [f64]) {
        out.fill(0.0);
        let xi = &x[i * self.dims..(i + 1) * self.dims];
        for j in 0..self.n {
            if j == i {
                continue;
            }
            let r = self.dist(x, j, xi);
            if r == 0.0 {
                continue;
            }
            let f = 2.0 * (r - self.d.get(i, j)) / r;
            for a in 0..self.dims {
                out[a] += f * (xi[a] - x[j * self.dims + a]);
            }
        }
        if let Some(anchor) = &self.anchor {
            for a in 0..self.dims {
                out[a] += 2.0 * self.weight * (xi[a] - anchor[i * self.dims + a]);
            }
        }
    }
}

const POLISH_MAX_SWEEPS: usize = 5000;
const POLISH_MAX_HALVINGS: usize = 40;
/// A warm start is replaced only by a result that beats it by this relative margin.
const WARM_START_MARGIN: f64 = 1e-9;

/// Greedy block-coordinate descent: each point steps down its own
/// gradient with a backtracking step length, accepting only decreases.
fn polish(p: &Problem<'_>, x: &mut [f64]) {
    let (n, dims) = (p.n, p.dims);
    let mut alpha = vec![0.25 / ((n - 1) as f64 + p.weight); n];
    let mut g = vec![0.0; dims];
    let mut cand = vec![0.0; dims];
    for _ in 0..POLISH_MAX_SWEEPS {
        let mut gain = 0.0;
        for i in 0..n {
            p.gradient(x, i, &mut g);
            if g.iter().all(|v| *v == 0.0) {
                continue;
            }
            let old = p.point_cost(x, i, &x[i * dims..(i + 1) * dims]);
            for _ in 0..POLISH_MAX_HALVINGS {
                for a in 0..dims {
                    cand[a] = x[i * dims + a] - alpha[i] * g[a];
                }
                let new = p.point_cost(x, i, &cand);
                if new < old {
                    x[i * dims..(i + 1) * dims].copy_from_slice(&cand);
                    gain += old - new;
                    alpha[i] *= 1.5;
                    break;
                }
                alpha[i] *= 0.5;
            }
        }
        if gain <= 1e-15 * (1.0 + p.cost(x)) {
            break;
        }
    }
}

/// Embed `d` in `config.dims` dimensions by minimizing
/// `sum_{i<j} (|x_i - x_j| - d_ij)^2`, plus
/// `penalty_weight * sum_i |x_i - x_i^init|^2` when warm-started from `init`.
///
/// Runs Metropolis annealing with geometric cooling, keeps the best state
/// visited, polishes it greedily and centers the result. A warm start is
/// returned unchanged (re-centered) unless the run improves on it. The
/// output is a deterministic function of the inputs and `seed`.
pub fn mds_embed(
    d: &DistanceMatrix,
    config: &AnnealingConfig,
    init: Option<&EmbeddingMap>,
    penalty_weight: f64,
    seed: u64,
) -> Result<EmbeddingMap> {
    let n = d.n();
    let dims = config.dims;
    if n < 2 {
        return Err(Error::invalid(format!("embedding needs at least 2 points, got {n}")));
    }
    if dims < 1 {
        return Err(Error::invalid("embedding dimension must be at least 1"));
    }
    if !(penalty_weight >= 0.0) {
        return Err(Error::invalid(format!("penalty weight {penalty_weight} must be >= 0")));
    }
    if let Some(m) = init {
        if m.symbols != d.symbols() {
            return Err(Error::SymbolMismatch(
                "warm start symbols differ from the distance matrix".into(),
            ));
        }
        if m.dims() != dims || m.coords.iter().any(|c| c.len() != dims) {
            return Err(Error::invalid(format!(
                "warm start has dimension {}, expected {dims}",
                m.dims()
            )));
        }
    }

    let mean_distance = d.mean_distance();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start: Vec<f64> = match init {
        Some(m) => m.coords.iter().flatten().copied().collect(),
        None => (0..n * dims)
            .map(|_| mean_distance * (rng.random::<f64>() - 0.5))
            .collect(),
    };
    let weight = if init.is_some() { penalty_weight } else { 0.0 };
    let problem = Problem {
        d,
        n,
        dims,
        anchor: init.map(|_| start.clone()),
        weight,
    };

    let start_cost = problem.cost(&start);
    let schedule = config.resolve(n, start_cost, mean_distance)?;
    let mut x = start.clone();
    let mut best = start.clone();

    if start_cost > 0.0 {
        let mut current = start_cost;
        let mut best_cost = start_cost;
        let mut temperature = schedule.initial_temperature;
        let mut proposal = vec![0.0; dims];
        while temperature > schedule.min_temperature {
            let step = schedule.proposal_scale
                * (temperature / schedule.initial_temperature).sqrt();
            for _ in 0..schedule.steps_per_temperature {
                let i = rng.random_range(0..n);
                for (a, v) in proposal.iter_mut().enumerate() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = x[i * dims + a] + step * z;
                }
                let old = problem.point_cost(&x, i, &x[i * dims..(i + 1) * dims]);
                let delta = problem.point_cost(&x, i, &proposal) - old;
                if delta <= 0.0 || rng.random::<f64>() < (-delta / temperature).exp() {
                    x[i * dims..(i + 1) * dims].copy_from_slice(&proposal);
                    current += delta;
                    if current < best_cost {
                        best_cost = current;
                        best.copy_from_slice(&x);
                    }
                }
            }
            // resynchronize the running cost with an exact evaluation
            current = problem.cost(&x);
            temperature *= schedule.cooling_factor;
        }
        polish(&problem, &mut best);
    }

    let mut coords_flat = best;
    if init.is_some() {
        let final_cost = problem.cost(&coords_flat);
        if final_cost >= start_cost - WARM_START_MARGIN * start_cost {
            coords_flat = start;
        }
    }
    let mut coords: Vec<Vec<f64>> = coords_flat.chunks(dims).map(<[f64]>::to_vec).collect();
    center_coords(&mut coords);
    let flat: Vec<f64> = coords.iter().flatten().copied().collect();
    // the penalty is measured against the centered warm start, which is
    // where chained maps live
    let (stress, penalty) = problem.cost_parts(&flat);
    Ok(EmbeddingMap {
        symbols: d.symbols().to_vec(),
        coords,
        stress,
        penalized_cost: stress + penalty,
        seed,
        penalty_weight: weight,
        schedule: Some(schedule),
    })
}

/// Embed a sequence of distance matrices, warm-starting each from its
/// predecessor with the deviation penalty active. The same seed drives
/// every step.
///
/// `penalty_weight = None` uses `0.01` times the mean squared target
/// distance of each step.
pub fn chain_embed(
    matrices: &[DistanceMatrix],
    config: &AnnealingConfig,
    penalty_weight: Option<f64>,
    seed: u64,
) -> Result<Vec<EmbeddingMap>> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::invalid("chain needs at least one distance matrix"))?;
    if let Some(bad) = matrices.iter().position(|m| m.symbols() != first.symbols()) {
        return Err(Error::SymbolMismatch(format!(
            "matrix {bad} of the chain carries different symbols"
        )));
    }
    let mut maps: Vec<EmbeddingMap> = Vec::with_capacity(matrices.len());
    for d in matrices {
        let weight = penalty_weight.unwrap_or_else(|| default_penalty_weight(d));
        let map = mds_embed(d, config, maps.last(), weight, seed)?;
        maps.push(map);
    }
    Ok(maps)
}

/// `0.01 *` mean squared target distance.
pub(crate) fn default_penalty_weight(d: &DistanceMatrix) -> f64 {
    0.01 * d.mean_squared_distance()
}
