//! Linear dimension reduction by active subspaces: regression-based
//! gradient estimates, the averaged outer-product matrix, its
//! eigendecomposition with bootstrap intervals, and projection /
//! bounded reconstruction between the full box and the active
//! coordinates.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::design_space::{unscale, DesignPoint, ParameterSpace};
use crate::error::{CalibError, Result};

/// How per-sample gradients are estimated from (X, Y) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMethod {
    /// One least-squares slope shared by every row.
    GlobalLinear,
    /// Per-point slope from the k nearest neighbors (Euclidean, unit cube).
    LocalLinear { k: usize },
}

/// Estimated gradients, one row per sample.
#[derive(Debug, Clone)]
pub struct GradientEstimates {
    pub grads: DMatrix<f64>,
    pub method: GradientMethod,
}

/// Eigendecomposition of the gradient outer-product matrix with the
/// detected active dimension.
#[derive(Debug, Clone)]
pub struct ActiveSubspace {
    /// descending, length d
    pub eigvals: Vec<f64>,
    /// d x d orthonormal, columns ordered with eigvals
    pub w: DMatrix<f64>,
    /// active dimension, 1 <= q < d (or q = d when d == 1)
    pub q: usize,
    /// log10 eigenvalue ratio at the selected gap
    pub gap_log10: f64,
    /// set when no clear spectral gap exists and q is a tie-break choice
    pub low_confidence: bool,
}

impl ActiveSubspace {
    pub fn dimension(&self) -> usize {
        self.w.nrows()
    }

    /// First q columns of W.
    pub fn w1(&self) -> DMatrix<f64> {
        self.w.columns(0, self.q).into_owned()
    }

    /// Remaining d - q columns of W.
    pub fn w2(&self) -> DMatrix<f64> {
        self.w.columns(self.q, self.w.ncols() - self.q).into_owned()
    }
}

/// Per-index eigenvalue bounds from resampling.
#[derive(Debug, Clone)]
pub struct BootstrapIntervals {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub replicates: usize,
    /// degenerate resamples that were re-drawn
    pub redraws: usize,
}

/// Least-squares slope of Y on X with an intercept. Errors when the
/// design matrix is rank-deficient.
fn linear_slope(x: &[Vec<f64>], y: &[f64]) -> Result<DVector<f64>> {
    let n = x.len();
    let d = x[0].len();
    let mut design = DMatrix::zeros(n, d + 1);
    for (i, row) in x.iter().enumerate() {
        design[(i, 0)] = 1.0;
        for (j, &v) in row.iter().enumerate() {
            design[(i, j + 1)] = v;
        }
    }
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax.max(1.0)) {
        return Err(CalibError::LinAlg("rank-deficient regression matrix".into()));
    }
    let beta = svd
        .solve(&DVector::from_column_slice(y), 0.0)
        .map_err(|e| CalibError::LinAlg(e.to_string()))?;
    Ok(beta.rows(1, d).into_owned())
}

/// Estimate per-sample gradients of the loss surface. Inputs are unit-cube
/// coordinates.
pub fn estimate_gradients(x: &[Vec<f64>], y: &[f64], method: GradientMethod) -> Result<GradientEstimates> {
    let n = x.len();
    if n == 0 || y.len() != n {
        return Err(CalibError::InvalidArgument("X and Y must be non-empty and equal length".into()));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(CalibError::DimensionMismatch { expected: d, got: 0 });
    }
    if x.iter().flatten().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(CalibError::NonFinite("gradient estimation inputs not finite".into()));
    }
    let mut grads = DMatrix::zeros(n, d);
    match method {
        GradientMethod::GlobalLinear => {
            if n < d + 1 {
                return Err(CalibError::InvalidArgument(format!(
                    "global regression needs n >= d+1 ({} < {})",
                    n,
                    d + 1
                )));
            }
            let beta = linear_slope(x, y)?;
            for i in 0..n {
                grads.row_mut(i).copy_from(&beta.transpose());
            }
        }
        GradientMethod::LocalLinear { k } => {
            if k < d + 1 || k > n {
                return Err(CalibError::InvalidArgument(format!(
                    "local regression needs d+1 <= k <= n (k={k}, d={d}, n={n})"
                )));
            }
            for i in 0..n {
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| {
                    let da: f64 = x[a].iter().zip(&x[i]).map(|(p, q)| (p - q) * (p - q)).sum();
                    let db: f64 = x[b].iter().zip(&x[i]).map(|(p, q)| (p - q) * (p - q)).sum();
                    da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
                });
                let xs: Vec<Vec<f64>> = order[..k].iter().map(|&j| x[j].clone()).collect();
                let ys: Vec<f64> = order[..k].iter().map(|&j| y[j]).collect();
                let beta = linear_slope(&xs, &ys)?;
                grads.row_mut(i).copy_from(&beta.transpose());
            }
        }
    }
    Ok(GradientEstimates { grads, method })
}

/// Average of gradient outer products, (1/n) sum g_i g_i^T.
pub fn compute_c(g: &GradientEstimates) -> DMatrix<f64> {
    let n = g.grads.nrows();
    let d = g.grads.ncols();
    let mut c = DMatrix::zeros(d, d);
    for i in 0..n {
        let row = g.grads.row(i);
        for a in 0..d {
            for b in 0..d {
                c[(a, b)] += row[a] * row[b];
            }
        }
    }
    c / n as f64
}

/// Gaps below this log10 ratio are treated as no clear spectral break.
const GAP_CONFIDENCE_LOG10: f64 = 0.5;

/// Eigendecompose a symmetric matrix and pick the active dimension at
/// the largest consecutive log10 eigenvalue ratio; ties break toward the
/// smaller dimension.
pub fn decompose_and_gap(c: &DMatrix<f64>) -> Result<ActiveSubspace> {
    let d = c.nrows();
    if d == 0 || c.ncols() != d {
        return Err(CalibError::InvalidArgument("matrix must be square and non-empty".into()));
    }
    let asym = (c - c.transpose()).abs().max();
    if asym > 1e-8 * (1.0 + c.abs().max()) {
        return Err(CalibError::InvalidArgument("matrix is not symmetric".into()));
    }
    let eig = c.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigvals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut w = DMatrix::zeros(d, d);
    for (col, &i) in order.iter().enumerate() {
        w.set_column(col, &eig.eigenvectors.column(i));
    }
    if eigvals.iter().any(|&e| e < -1e-8 * eigvals[0].abs().max(1.0)) {
        return Err(CalibError::LinAlg("matrix has significantly negative eigenvalues".into()));
    }
    if d == 1 {
        return Ok(ActiveSubspace { eigvals, w, q: 1, gap_log10: f64::INFINITY, low_confidence: false });
    }
    // zero-protected ratio floor relative to the spectrum scale
    let floor = 1e-300f64.max(1e-16 * eigvals[0].abs());
    let mut q = 1;
    let mut best = f64::NEG_INFINITY;
    for i in 0..d - 1 {
        let gap = (eigvals[i].max(floor) / eigvals[i + 1].max(floor)).log10();
        if gap > best + 1e-12 {
            best = gap;
            q = i + 1;
        }
    }
    Ok(ActiveSubspace { eigvals, w, q, gap_log10: best, low_confidence: best < GAP_CONFIDENCE_LOG10 })
}

/// Full pipeline: gradients, outer-product average, decomposition.
pub fn fit_active_subspace(x: &[Vec<f64>], y: &[f64], method: GradientMethod) -> Result<ActiveSubspace> {
    let g = estimate_gradients(x, y, method)?;
    decompose_and_gap(&compute_c(&g))
}

const BOOTSTRAP_REDRAW_CAP: usize = 100;

/// Percentile (2.5% / 97.5%) eigenvalue intervals from resampling rows
/// with replacement. Replicate b derives its seed from `seed + b`, so
/// results are independent of evaluation order. Intervals are widened,
/// if needed, to contain the full-data point estimates.
pub fn bootstrap_eigenvalues(
    x: &[Vec<f64>],
    y: &[f64],
    method: GradientMethod,
    b: usize,
    seed: u64,
) -> Result<BootstrapIntervals> {
    if b < 2 {
        return Err(CalibError::InvalidArgument("bootstrap needs B >= 2".into()));
    }
    let n = x.len();
    let d = x.first().map(|r| r.len()).unwrap_or(0);
    let point = fit_active_subspace(x, y, method)?.eigvals;

    let mut spectra: Vec<Vec<f64>> = Vec::with_capacity(b);
    let mut redraws = 0usize;
    for rep in 0..b as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(rep));
        let mut attempts = 0;
        loop {
            let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let xs: Vec<Vec<f64>> = idx.iter().map(|&i| x[i].clone()).collect();
            let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            match fit_active_subspace(&xs, &ys, method) {
                Ok(a) => {
                    spectra.push(a.eigvals);
                    break;
                }
                Err(_) => {
                    attempts += 1;
                    redraws += 1;
                    if attempts > BOOTSTRAP_REDRAW_CAP {
                        return Err(CalibError::LinAlg(
                            "bootstrap replicate degenerate after repeated redraws".into(),
                        ));
                    }
                }
            }
        }
    }

    let mut lower = vec![0.0; d];
    let mut upper = vec![0.0; d];
    for j in 0..d {
        let mut vals: Vec<f64> = spectra.iter().map(|s| s[j]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        lower[j] = percentile(&vals, 0.025).min(point[j]);
        upper[j] = percentile(&vals, 0.975).max(point[j]);
    }
    Ok(BootstrapIntervals { lower, upper, replicates: b, redraws })
}

/// Linear-interpolated percentile of sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Project a unit-cube point into the active coordinates, centering the
/// cube at the origin first.
pub fn project(a: &ActiveSubspace, theta_unit: &[f64]) -> Result<Vec<f64>> {
    let d = a.dimension();
    if theta_unit.len() != d {
        return Err(CalibError::DimensionMismatch { expected: d, got: theta_unit.len() });
    }
    let centered = DVector::from_iterator(d, theta_unit.iter().map(|&v| v - 0.5));
    let v = a.w1().transpose() * centered;
    Ok(v.iter().cloned().collect())
}

/// How reconstruction treats the inactive coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconstructMode {
    /// z = 0, clip the result to the box.
    Zero,
    /// minimum-norm z keeping the point inside the box; falls back to
    /// clipped zero mode when no feasible z exists.
    Feasible,
}

/// A reconstructed design point plus diagnostic flags.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub point: DesignPoint,
    /// feasible mode could not satisfy the box and clipped instead
    pub infeasible_fallback: bool,
    /// worst box violation of the unclipped candidate, unit-cube scale
    pub constraint_residual: f64,
}

const DYKSTRA_MAX_ITERS: usize = 20_000;
const DYKSTRA_TOL: f64 = 1e-12;

/// Map active coordinates back to a bounded design point.
pub fn reconstruct(a: &ActiveSubspace, v: &[f64], space: &ParameterSpace, mode: ReconstructMode) -> Result<Reconstruction> {
    if v.len() != a.q {
        return Err(CalibError::DimensionMismatch { expected: a.q, got: v.len() });
    }
    let d = a.dimension();
    if space.dimension() != d {
        return Err(CalibError::DimensionMismatch { expected: d, got: space.dimension() });
    }
    let w1 = a.w1();
    let vv = DVector::from_column_slice(v);
    let base = &w1 * &vv; // centered unit-cube coordinates

    let finish = |centered: &DVector<f64>, fallback: bool| -> Result<Reconstruction> {
        let residual = centered
            .iter()
            .map(|&c| (c.abs() - 0.5).max(0.0))
            .fold(0.0f64, f64::max);
        let unit: Vec<f64> = centered.iter().map(|&c| (c + 0.5).clamp(0.0, 1.0)).collect();
        Ok(Reconstruction {
            point: unscale(&unit, space)?,
            infeasible_fallback: fallback,
            constraint_residual: residual,
        })
    };

    match mode {
        ReconstructMode::Zero => finish(&base, false),
        ReconstructMode::Feasible => {
            // Dykstra's alternating projections between the box
            // [-1/2, 1/2]^d and the affine set {theta : W1^T theta = v},
            // started at W1 v: the limit is the intersection point
            // closest to W1 v, i.e. the minimum-norm inactive offset z.
            let mut xcur = base.clone();
            let mut p = DVector::zeros(d);
            let mut q = DVector::zeros(d);
            for _ in 0..DYKSTRA_MAX_ITERS {
                let y: DVector<f64> = (&xcur + &p).map(|t| t.clamp(-0.5, 0.5));
                p = &xcur + &p - &y;
                let yq = &y + &q;
                let xnext = &yq - &w1 * (w1.transpose() * &yq - &vv);
                q = yq - &xnext;
                let delta = (&xnext - &xcur).abs().max();
                xcur = xnext;
                if delta < DYKSTRA_TOL {
                    break;
                }
            }
            let box_violation = xcur.iter().map(|&c| (c.abs() - 0.5).max(0.0)).fold(0.0f64, f64::max);
            let affine_violation = (w1.transpose() * &xcur - &vv).abs().max();
            if box_violation <= 1e-8 && affine_violation <= 1e-8 {
                finish(&xcur, false)
            } else {
                finish(&base, true)
            }
        }
    }
}
