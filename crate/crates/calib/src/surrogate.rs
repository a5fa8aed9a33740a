//! Gaussian-process regression over the (possibly reduced) search space:
//! Matérn kernel with nugget, zero or network mean, marginal-likelihood
//! hyperparameter fitting, and closed-form posterior prediction.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

use crate::dimred_nn::Network;
use crate::error::{CalibError, Result};

/// Matérn smoothness, restricted to the closed-form cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    Half,
    ThreeHalves,
    FiveHalves,
}

/// Kernel hyperparameters: anisotropic lengthscales, signal variance and
/// the diagonal nugget.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    pub nu: Smoothness,
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub nugget_variance: f64,
}

impl KernelConfig {
    pub fn new(nu: Smoothness, lengthscales: Vec<f64>, signal_variance: f64, nugget_variance: f64) -> Result<Self> {
        if lengthscales.is_empty() || lengthscales.iter().any(|&l| l <= 0.0) {
            return Err(CalibError::InvalidArgument("lengthscales must be positive".into()));
        }
        if signal_variance <= 0.0 || nugget_variance < 0.0 {
            return Err(CalibError::InvalidArgument("signal variance must be positive, nugget >= 0".into()));
        }
        Ok(Self { nu, lengthscales, signal_variance, nugget_variance })
    }

    /// Sensible default for `d` unit-cube inputs.
    pub fn default_for(d: usize) -> Self {
        Self { nu: Smoothness::FiveHalves, lengthscales: vec![0.3; d], signal_variance: 1.0, nugget_variance: 1e-6 }
    }
}

/// GP mean function: zero, or a trained regression net with an affine
/// de-standardization wrapper.
#[derive(Clone)]
pub enum MeanFunction {
    Zero,
    Network { net: Arc<Network>, offset: f64, scale: f64 },
}

impl std::fmt::Debug for MeanFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeanFunction::Zero => write!(f, "Zero"),
            MeanFunction::Network { offset, scale, .. } => {
                write!(f, "Network(offset={offset}, scale={scale})")
            }
        }
    }
}

impl MeanFunction {
    pub fn network(net: Arc<Network>) -> Self {
        MeanFunction::Network { net, offset: 0.0, scale: 1.0 }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            MeanFunction::Zero => Ok(0.0),
            MeanFunction::Network { net, offset, scale } => Ok(offset + scale * net.forward(x)?[0]),
        }
    }
}

/// Posterior mean and variance at one query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorPrediction {
    pub mean: f64,
    pub variance: f64,
    /// true when the raw variance was negative and clamped to zero.
    pub variance_clamped: bool,
}

/// Anisotropic scaled distance r = sqrt(sum ((x_i - y_i) / l_i)^2).
fn scaled_distance(x: &[f64], y: &[f64], lengthscales: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(lengthscales)
        .map(|((a, b), l)| {
            let d = (a - b) / l;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Matérn covariance between two points.
pub fn matern_kernel(x: &[f64], x2: &[f64], c: &KernelConfig) -> Result<f64> {
    if x.len() != c.lengthscales.len() || x2.len() != c.lengthscales.len() {
        return Err(CalibError::DimensionMismatch { expected: c.lengthscales.len(), got: x.len().max(x2.len()) });
    }
    if c.lengthscales.iter().any(|&l| l <= 0.0) {
        return Err(CalibError::InvalidArgument("non-positive lengthscale".into()));
    }
    let r = scaled_distance(x, x2, &c.lengthscales);
    let corr = match c.nu {
        Smoothness::Half => (-r).exp(),
        Smoothness::ThreeHalves => {
            let a = 3f64.sqrt() * r;
            (1.0 + a) * (-a).exp()
        }
        Smoothness::FiveHalves => {
            let a = 5f64.sqrt() * r;
            (1.0 + a + 5.0 * r * r / 3.0) * (-a).exp()
        }
    };
    Ok(c.signal_variance * corr)
}

/// Dense covariance of a point set with the nugget on the diagonal.
pub fn build_covariance(points: &[Vec<f64>], c: &KernelConfig) -> Result<DMatrix<f64>> {
    let n = points.len();
    if n == 0 {
        return Err(CalibError::InvalidArgument("empty point set".into()));
    }
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = matern_kernel(&points[i], &points[j], c)?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    for i in 0..n {
        k[(i, i)] += c.nugget_variance;
    }
    Ok(k)
}

/// Jitter ladder; values are relative to the mean diagonal.
const JITTER_LADDER: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Cholesky with escalating diagonal jitter. Returns the factor and the
/// jitter that succeeded (absolute).
fn factorize(k: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let diag_scale = k.diagonal().mean().max(1e-300);
    for &rel in &JITTER_LADDER {
        let jitter = rel * diag_scale;
        let mut kj = k.clone();
        for i in 0..k.nrows() {
            kj[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(kj) {
            return Ok((chol, jitter));
        }
    }
    Err(CalibError::LinAlg(format!(
        "covariance not positive definite after jitter up to {:.1e}",
        JITTER_LADDER.last().unwrap() * diag_scale
    )))
}

/// A fitted GP; immutable, safe to share across threads for prediction.
#[derive(Debug, Clone)]
pub struct GPModel {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    config: KernelConfig,
    mean: MeanFunction,
    /// standardization of the residuals y - m(x)
    y_offset: f64,
    y_scale: f64,
    /// residuals carried no variation: the posterior is the constant
    /// mean with zero variance
    degenerate: bool,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
}

impl GPModel {
    /// Fit the factored model. Residuals against the mean function are
    /// standardized internally; hyperparameters refer to the standardized
    /// scale.
    pub fn fit(inputs: Vec<Vec<f64>>, targets: Vec<f64>, config: KernelConfig, mean: MeanFunction) -> Result<Self> {
        let n = inputs.len();
        if n == 0 || targets.len() != n {
            return Err(CalibError::InvalidArgument("inputs and targets must be non-empty and equal length".into()));
        }
        let d = config.lengthscales.len();
        if inputs.iter().any(|x| x.len() != d) {
            return Err(CalibError::DimensionMismatch { expected: d, got: 0 });
        }
        let residuals: Vec<f64> = inputs
            .iter()
            .zip(&targets)
            .map(|(x, &y)| mean.eval(x).map(|m| y - m))
            .collect::<Result<_>>()?;
        if residuals.iter().any(|v| !v.is_finite()) {
            return Err(CalibError::NonFinite("targets or mean values not finite".into()));
        }
        let y_offset = residuals.iter().sum::<f64>() / n as f64;
        let var = residuals.iter().map(|r| (r - y_offset) * (r - y_offset)).sum::<f64>() / n as f64;
        let degenerate = var.sqrt() <= 1e-12 * (1.0 + y_offset.abs());
        let y_scale = if degenerate { 1.0 } else { var.sqrt() };
        let z = DVector::from_iterator(n, residuals.iter().map(|r| (r - y_offset) / y_scale));

        let k = build_covariance(&inputs, &config)?;
        let (chol, jitter) = factorize(&k)?;
        let alpha = chol.solve(&z);
        Ok(Self { inputs, targets, config, mean, y_offset, y_scale, degenerate, chol, alpha, jitter })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    /// Posterior mean and variance at `x`, in raw target units.
    pub fn posterior(&self, x: &[f64]) -> Result<PosteriorPrediction> {
        let d = self.config.lengthscales.len();
        if x.len() != d {
            return Err(CalibError::DimensionMismatch { expected: d, got: x.len() });
        }
        let n = self.inputs.len();
        let kvec = DVector::from_iterator(
            n,
            self.inputs
                .iter()
                .map(|xi| matern_kernel(x, xi, &self.config))
                .collect::<Result<Vec<_>>>()?,
        );
        let mean_std = kvec.dot(&self.alpha);
        let solved = self.chol.solve(&kvec);
        let prior = matern_kernel(x, x, &self.config)? + self.config.nugget_variance;
        let raw_var = if self.degenerate { 0.0 } else { prior - kvec.dot(&solved) };
        let (var_std, clamped) = if raw_var < 0.0 { (0.0, true) } else { (raw_var, false) };
        let mean = self.mean.eval(x)? + self.y_offset + self.y_scale * mean_std;
        Ok(PosteriorPrediction {
            mean,
            variance: self.y_scale * self.y_scale * var_std,
            variance_clamped: clamped,
        })
    }

    /// New model with (x, y) appended and the covariance refactored;
    /// hyperparameters and standardization unchanged.
    pub fn condition_on_pseudo(&self, x: &[f64], y: f64) -> Result<Self> {
        let d = self.config.lengthscales.len();
        if x.len() != d {
            return Err(CalibError::DimensionMismatch { expected: d, got: x.len() });
        }
        let mut inputs = self.inputs.clone();
        let mut targets = self.targets.clone();
        inputs.push(x.to_vec());
        targets.push(y);
        let z = DVector::from_iterator(
            inputs.len(),
            inputs
                .iter()
                .zip(&targets)
                .map(|(xi, &yi)| {
                    self.mean
                        .eval(xi)
                        .map(|m| (yi - m - self.y_offset) / self.y_scale)
                })
                .collect::<Result<Vec<_>>>()?,
        );
        let k = build_covariance(&inputs, &self.config)?;
        let (chol, jitter) = factorize(&k)?;
        let alpha = chol.solve(&z);
        Ok(Self {
            inputs,
            targets,
            config: self.config.clone(),
            mean: self.mean.clone(),
            y_offset: self.y_offset,
            y_scale: self.y_scale,
            degenerate: self.degenerate,
            chol,
            alpha,
            jitter,
        })
    }
}

/// Log marginal likelihood of standardized residuals under a config.
fn log_marginal_likelihood(points: &[Vec<f64>], z: &DVector<f64>, config: &KernelConfig) -> Result<f64> {
    let k = build_covariance(points, config)?;
    let (chol, _) = factorize(&k)?;
    let alpha = chol.solve(z);
    let log_det: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum();
    let n = points.len() as f64;
    Ok(-0.5 * z.dot(&alpha) - log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln())
}

/// Box bounds for the log-space hyperparameter search, on the
/// standardized-residual scale.
#[derive(Debug, Clone)]
pub struct FitBounds {
    pub lengthscale: (f64, f64),
    pub signal_variance: (f64, f64),
    pub nugget_variance: (f64, f64),
}

impl Default for FitBounds {
    fn default() -> Self {
        // standardized residuals have variance 1
        Self { lengthscale: (1e-2, 10.0), signal_variance: (1e-6, 100.0), nugget_variance: (1e-8, 1.0) }
    }
}

const FIT_STARTS: usize = 8;
const NM_MAX_ITERS: usize = 200;

/// Maximize the log marginal likelihood over lengthscales, signal
/// variance and nugget with a multi-start Nelder-Mead simplex in
/// log-hyperparameter space. Deterministic given the seed.
pub fn fit_hyperparameters(
    inputs: &[Vec<f64>],
    targets: &[f64],
    mean: &MeanFunction,
    nu: Smoothness,
    bounds: &FitBounds,
    seed: u64,
) -> Result<KernelConfig> {
    let n = inputs.len();
    if n < 3 {
        return Err(CalibError::InvalidArgument("hyperparameter fitting needs N >= 3".into()));
    }
    let d = inputs[0].len();
    let residuals: Vec<f64> = inputs
        .iter()
        .zip(targets)
        .map(|(x, &y)| mean.eval(x).map(|m| y - m))
        .collect::<Result<_>>()?;
    let off = residuals.iter().sum::<f64>() / n as f64;
    let var = residuals.iter().map(|r| (r - off) * (r - off)).sum::<f64>() / n as f64;
    let scale = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    let z = DVector::from_iterator(n, residuals.iter().map(|r| (r - off) / scale));

    let lo: Vec<f64> = std::iter::repeat(bounds.lengthscale.0.ln())
        .take(d)
        .chain([bounds.signal_variance.0.ln(), bounds.nugget_variance.0.ln()])
        .collect();
    let hi: Vec<f64> = std::iter::repeat(bounds.lengthscale.1.ln())
        .take(d)
        .chain([bounds.signal_variance.1.ln(), bounds.nugget_variance.1.ln()])
        .collect();
    let clamp = |p: &[f64]| -> Vec<f64> {
        p.iter().zip(&lo).zip(&hi).map(|((v, l), h)| v.clamp(*l, *h)).collect()
    };
    let to_config = |p: &[f64]| -> KernelConfig {
        let p = clamp(p);
        KernelConfig {
            nu,
            lengthscales: p[..d].iter().map(|v| v.exp()).collect(),
            signal_variance: p[d].exp(),
            nugget_variance: p[d + 1].exp(),
        }
    };
    let objective = |p: &[f64]| -> f64 {
        match log_marginal_likelihood(inputs, &z, &to_config(p)) {
            Ok(lml) => -lml,
            Err(_) => f64::INFINITY,
        }
    };

    let default_start: Vec<f64> = std::iter::repeat(0.3f64.ln())
        .take(d)
        .chain([0.0, 1e-4f64.ln()])
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![default_start.clone()];
    for _ in 1..FIT_STARTS {
        starts.push(
            lo.iter()
                .zip(&hi)
                .map(|(l, h)| l + rng.gen::<f64>() * (h - l))
                .collect(),
        );
    }

    let mut best_p = default_start.clone();
    let mut best_f = objective(&default_start);
    for start in starts {
        let (p, f) = nelder_mead(&objective, &start, 0.5, NM_MAX_ITERS);
        if f < best_f {
            best_f = f;
            best_p = p;
        }
    }
    if !best_f.is_finite() {
        return Err(CalibError::LinAlg("all hyperparameter starts failed factorization".into()));
    }
    Ok(to_config(&best_p))
}

/// Standard Nelder-Mead simplex minimization; deterministic.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, start: &[f64], step: f64, max_iters: usize) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), f(start)));
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += step;
        let v = f(&p);
        simplex.push((p, v));
    }
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    for _ in 0..max_iters {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(p, _)| p[j]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let reflect: Vec<f64> = centroid.iter().zip(&worst.0).map(|(c, w)| c + alpha * (c - w)).collect();
        let fr = f(&reflect);
        if fr < simplex[0].1 {
            let expand: Vec<f64> = centroid.iter().zip(&worst.0).map(|(c, w)| c + gamma * (c - w)).collect();
            let fe = f(&expand);
            simplex[n] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflect, fr);
        } else {
            let contract: Vec<f64> = centroid.iter().zip(&worst.0).map(|(c, w)| c + rho * (w - c)).collect();
            let fc = f(&contract);
            if fc < worst.1 {
                simplex[n] = (contract, fc);
            } else {
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let shrunk: Vec<f64> = best.iter().zip(&entry.0).map(|(b, p)| b + sigma * (p - b)).collect();
                    entry.1 = f(&shrunk);
                    entry.0 = shrunk;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    simplex.swap_remove(0)
}
