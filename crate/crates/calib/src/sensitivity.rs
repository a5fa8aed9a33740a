//! Morris screening: one-at-a-time trajectories, elementary effects, and
//! the mu / sigma / mu* summary statistics used to rank variables.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::design_space::ParameterSpace;
use crate::error::{CalibError, Result};

/// Default number of grid levels for trajectory bases.
pub const DEFAULT_GRID_LEVELS: usize = 4;

/// The standard Morris step for `p` grid levels: delta = p / (2(p-1)).
pub fn default_delta(grid_levels: usize) -> f64 {
    grid_levels as f64 / (2.0 * (grid_levels as f64 - 1.0))
}

/// One Morris trajectory of d+1 unit-cube points; consecutive points
/// differ in exactly one coordinate by +-delta.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub points: Vec<Vec<f64>>,
    pub perturbed_dim: Vec<usize>,
    pub delta: f64,
}

/// r x d matrix of elementary effects (trajectory i, variable j).
#[derive(Debug, Clone)]
pub struct ElementaryEffects {
    ee: Vec<Vec<f64>>,
}

impl ElementaryEffects {
    pub fn n_trajectories(&self) -> usize {
        self.ee.len()
    }

    pub fn dimension(&self) -> usize {
        self.ee.first().map_or(0, |r| r.len())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.ee.iter().map(|r| r[j]).collect()
    }

    pub fn from_matrix(ee: Vec<Vec<f64>>) -> Result<Self> {
        if ee.is_empty() {
            return Err(CalibError::InvalidArgument("need at least one trajectory".into()));
        }
        let d = ee[0].len();
        if ee.iter().any(|r| r.len() != d) {
            return Err(CalibError::DimensionMismatch { expected: d, got: 0 });
        }
        if ee.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CalibError::NonFinite("elementary effects must be finite".into()));
        }
        Ok(Self { ee })
    }
}

/// The three Morris statistics per variable.
#[derive(Debug, Clone)]
pub struct MorrisStats {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub mu_star: Vec<f64>,
}

/// Qualitative classification attached to each ranked variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariableClass {
    Negligible,
    Monotone,
    NonlinearOrInteracting,
}

impl VariableClass {
    pub fn label(self) -> &'static str {
        match self {
            VariableClass::Negligible => "negligible",
            VariableClass::Monotone => "monotone",
            VariableClass::NonlinearOrInteracting => "nonlinear_or_interacting",
        }
    }
}

/// Build `r` trajectories. Base points sit on the grid of `grid_levels`
/// values per coordinate, restricted so every signed step stays inside
/// [0,1]; each dimension is perturbed exactly once in a random order.
pub fn build_trajectories(
    s: &ParameterSpace,
    r: usize,
    delta: f64,
    grid_levels: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    if r == 0 {
        return Err(CalibError::InvalidArgument("need r >= 1 trajectories".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CalibError::InvalidArgument(format!("delta must be in (0,1), got {delta}")));
    }
    if grid_levels < 2 {
        return Err(CalibError::InvalidArgument("need at least 2 grid levels".into()));
    }
    let d = s.dimension();
    let grid: Vec<f64> = (0..grid_levels)
        .map(|i| i as f64 / (grid_levels - 1) as f64)
        .collect();
    let up_ok: Vec<f64> = grid.iter().cloned().filter(|g| g + delta <= 1.0 + 1e-12).collect();
    let down_ok: Vec<f64> = grid.iter().cloned().filter(|g| g - delta >= -1e-12).collect();
    if up_ok.is_empty() && down_ok.is_empty() {
        return Err(CalibError::InvalidArgument(format!(
            "delta {delta} leaves no feasible base on a {grid_levels}-level grid"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trajectories = Vec::with_capacity(r);
    for _ in 0..r {
        // per-coordinate signed step plus a feasible base value for it
        let mut base = vec![0.0; d];
        let mut step = vec![0.0; d];
        for j in 0..d {
            let sign_up = if up_ok.is_empty() {
                false
            } else if down_ok.is_empty() {
                true
            } else {
                rng.gen::<bool>()
            };
            let feasible = if sign_up { &up_ok } else { &down_ok };
            base[j] = feasible[rng.gen_range(0..feasible.len())];
            step[j] = if sign_up { delta } else { -delta };
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.shuffle(&mut rng);

        let mut points = Vec::with_capacity(d + 1);
        let mut current = base.clone();
        points.push(current.clone());
        for &j in &order {
            current[j] = (current[j] + step[j]).clamp(0.0, 1.0);
            points.push(current.clone());
        }
        trajectories.push(Trajectory { points, perturbed_dim: order, delta });
    }
    Ok(trajectories)
}

/// Elementary effects from evaluated losses, one loss per trajectory point
/// in trajectory order. The divisor is the signed step actually taken.
pub fn elementary_effects(trajs: &[Trajectory], losses: &[f64]) -> Result<ElementaryEffects> {
    let total: usize = trajs.iter().map(|t| t.points.len()).sum();
    if losses.len() != total {
        return Err(CalibError::DimensionMismatch { expected: total, got: losses.len() });
    }
    if losses.iter().any(|v| !v.is_finite()) {
        return Err(CalibError::NonFinite("losses contain NaN or infinity".into()));
    }
    let d = trajs.first().map_or(0, |t| t.perturbed_dim.len());
    let mut ee = Vec::with_capacity(trajs.len());
    let mut offset = 0;
    for t in trajs {
        let mut row = vec![0.0; d];
        for (k, &j) in t.perturbed_dim.iter().enumerate() {
            let before = &t.points[k];
            let after = &t.points[k + 1];
            let signed_delta = after[j] - before[j];
            row[j] = (losses[offset + k + 1] - losses[offset + k]) / signed_delta;
        }
        ee.push(row);
        offset += t.points.len();
    }
    ElementaryEffects::from_matrix(ee)
}

/// mu, sigma (population normalization), and mu* per column.
pub fn morris_stats(ee: &ElementaryEffects) -> Result<MorrisStats> {
    let r = ee.n_trajectories();
    if r == 0 {
        return Err(CalibError::InvalidArgument("no elementary effects".into()));
    }
    let d = ee.dimension();
    let mut mu = vec![0.0; d];
    let mut sigma = vec![0.0; d];
    let mut mu_star = vec![0.0; d];
    for j in 0..d {
        let col = ee.column(j);
        mu[j] = col.iter().sum::<f64>() / r as f64;
        mu_star[j] = col.iter().map(|v| v.abs()).sum::<f64>() / r as f64;
        sigma[j] = (col.iter().map(|v| (v - mu[j]) * (v - mu[j])).sum::<f64>() / r as f64).sqrt();
    }
    Ok(MorrisStats { mu, sigma, mu_star })
}

/// Sort variables by mu* descending and attach qualitative tags.
///
/// Thresholds are tool heuristics: monotone when |mu|/mu* >= 0.9,
/// nonlinear/interacting when sigma/mu* >= 0.5, negligible when mu* is
/// zero within tolerance. Tags may combine.
pub fn rank_variables(stats: &MorrisStats) -> Vec<(usize, Vec<VariableClass>)> {
    let d = stats.mu.len();
    let scale = stats.mu_star.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-10 * (1.0 + scale);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        stats.mu_star[b]
            .partial_cmp(&stats.mu_star[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
        .into_iter()
        .map(|j| {
            let mut tags = Vec::new();
            if stats.mu_star[j] <= tol {
                tags.push(VariableClass::Negligible);
            } else {
                if stats.mu[j].abs() / stats.mu_star[j] >= 0.9 {
                    tags.push(VariableClass::Monotone);
                }
                if stats.sigma[j] / stats.mu_star[j] >= 0.5 {
                    tags.push(VariableClass::NonlinearOrInteracting);
                }
            }
            (j, tags)
        })
        .collect()
}
