//! Feed-forward networks with manual backpropagation, and the combined
//! encoder/regressor/decoder used for nonlinear dimension reduction.
//!
//! The combined net shares one encoder between a loss regressor and an
//! input-reconstructing decoder; the bottleneck activation is bounded so
//! the latent space is a known box. Training is plain gradient descent
//! with learning-rate halving on plateau, fully deterministic for a
//! fixed seed.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

use crate::error::{CalibError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    /// ReLU clamped into [lb, ub].
    BoundedRelu(f64, f64),
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::BoundedRelu(lb, ub) => x.clamp(lb, ub),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative as a function of the pre-activation value.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::BoundedRelu(lb, ub) => {
                if x > lb && x < ub {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }

    /// Output interval, when the activation bounds it.
    pub fn range(self) -> Option<(f64, f64)> {
        match self {
            Activation::Tanh => Some((-1.0, 1.0)),
            Activation::BoundedRelu(lb, ub) => Some((lb, ub)),
            _ => None,
        }
    }

    fn encode(self) -> String {
        match self {
            Activation::Identity => "identity".into(),
            Activation::Relu => "relu".into(),
            Activation::Tanh => "tanh".into(),
            Activation::BoundedRelu(lb, ub) => format!("brelu:{lb}:{ub}"),
        }
    }

    fn decode(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => {
                if let Some(rest) = other.strip_prefix("brelu:") {
                    let parts: Vec<&str> = rest.split(':').collect();
                    if parts.len() == 2 {
                        let lb = parts[0].parse().map_err(|_| bad_act(other))?;
                        let ub = parts[1].parse().map_err(|_| bad_act(other))?;
                        return Ok(Activation::BoundedRelu(lb, ub));
                    }
                }
                Err(bad_act(other))
            }
        }
    }
}

fn bad_act(s: &str) -> CalibError {
    CalibError::InvalidArgument(format!("unknown activation {s}"))
}

/// Layer widths and activations for a network, input dimension first.
#[derive(Debug, Clone)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub layers: Vec<(usize, Activation)>,
}

impl NetworkSpec {
    pub fn new(input_dim: usize, layers: Vec<(usize, Activation)>) -> Result<Self> {
        if input_dim == 0 || layers.is_empty() || layers.iter().any(|(w, _)| *w == 0) {
            return Err(CalibError::InvalidArgument("network needs positive widths and at least one layer".into()));
        }
        Ok(Self { input_dim, layers })
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().0
    }
}

#[derive(Debug, Clone)]
struct Layer {
    w: DMatrix<f64>,
    b: DVector<f64>,
    act: Activation,
}

/// A feed-forward network; immutable after training.
#[derive(Debug, Clone)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
}

/// Per-layer forward cache (pre-activation, post-activation).
struct ForwardCache {
    input: DVector<f64>,
    pre: Vec<DVector<f64>>,
    post: Vec<DVector<f64>>,
}

/// Per-layer weight and bias gradients.
#[derive(Debug, Clone)]
pub struct NetGrads {
    dw: Vec<DMatrix<f64>>,
    db: Vec<DVector<f64>>,
}

impl NetGrads {
    fn zeros(net: &Network) -> Self {
        Self {
            dw: net.layers.iter().map(|l| DMatrix::zeros(l.w.nrows(), l.w.ncols())).collect(),
            db: net.layers.iter().map(|l| DVector::zeros(l.b.len())).collect(),
        }
    }

    fn add(&mut self, other: &NetGrads) {
        for (a, b) in self.dw.iter_mut().zip(&other.dw) {
            *a += b;
        }
        for (a, b) in self.db.iter_mut().zip(&other.db) {
            *a += b;
        }
    }

}

/// Deterministic Adam state for one network.
struct Adam {
    m: NetGrads,
    v: NetGrads,
    t: u64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Cap on the per-sample-mean gradient norm; the bound-violation penalty
/// is steep enough to overshoot otherwise.
const GRAD_CLIP_NORM: f64 = 10.0;

impl Adam {
    fn new(net: &Network) -> Self {
        Self { m: NetGrads::zeros(net), v: NetGrads::zeros(net), t: 0 }
    }

    /// One Adam step from raw summed gradients scaled by 1/scale.
    fn step(&mut self, net: &mut Network, g: &NetGrads, lr: f64, scale: f64) {
        let mut sq = 0.0;
        for gw in &g.dw {
            sq += gw.iter().map(|v| (v / scale) * (v / scale)).sum::<f64>();
        }
        for gb in &g.db {
            sq += gb.iter().map(|v| (v / scale) * (v / scale)).sum::<f64>();
        }
        let norm = sq.sqrt();
        let clip = if norm > GRAD_CLIP_NORM { GRAD_CLIP_NORM / norm } else { 1.0 };
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        for idx in 0..net.layers.len() {
            for ((w, m), (gv, vv)) in net.layers[idx]
                .w
                .iter_mut()
                .zip(self.m.dw[idx].iter_mut())
                .zip(g.dw[idx].iter().zip(self.v.dw[idx].iter_mut()))
            {
                let grad = gv * clip / scale;
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * grad;
                *vv = ADAM_BETA2 * *vv + (1.0 - ADAM_BETA2) * grad * grad;
                *w -= lr * (*m / bc1) / ((*vv / bc2).sqrt() + ADAM_EPS);
            }
            for ((b, m), (gv, vv)) in net.layers[idx]
                .b
                .iter_mut()
                .zip(self.m.db[idx].iter_mut())
                .zip(g.db[idx].iter().zip(self.v.db[idx].iter_mut()))
            {
                let grad = gv * clip / scale;
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * grad;
                *vv = ADAM_BETA2 * *vv + (1.0 - ADAM_BETA2) * grad * grad;
                *b -= lr * (*m / bc1) / ((*vv / bc2).sqrt() + ADAM_EPS);
            }
        }
    }
}

impl Network {
    /// Seeded init: uniform in +-1/sqrt(fan_in).
    pub fn init(spec: &NetworkSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(spec.layers.len());
        let mut fan_in = spec.input_dim;
        for &(width, act) in &spec.layers {
            let scale = 1.0 / (fan_in as f64).sqrt();
            let w = DMatrix::from_fn(width, fan_in, |_, _| (rng.gen::<f64>() * 2.0 - 1.0) * scale);
            let b = DVector::from_fn(width, |_, _| (rng.gen::<f64>() * 2.0 - 1.0) * scale);
            layers.push(Layer { w, b, act });
            fan_in = width;
        }
        Self { input_dim: spec.input_dim, layers }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().b.len()
    }

    /// Output activation of the final layer.
    pub fn output_activation(&self) -> Activation {
        self.layers.last().unwrap().act
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(CalibError::DimensionMismatch { expected: self.input_dim, got: x.len() });
        }
        let mut z = DVector::from_column_slice(x);
        for layer in &self.layers {
            z = (&layer.w * z + &layer.b).map(|v| layer.act.apply(v));
        }
        Ok(z.as_slice().to_vec())
    }

    fn forward_cache(&self, x: &DVector<f64>) -> ForwardCache {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut z = x.clone();
        for layer in &self.layers {
            let p = &layer.w * &z + &layer.b;
            z = p.map(|v| layer.act.apply(v));
            pre.push(p);
            post.push(z.clone());
        }
        ForwardCache { input: x.clone(), pre, post }
    }

    /// Backpropagate d(loss)/d(output); returns parameter gradients and
    /// d(loss)/d(input).
    fn backward(&self, cache: &ForwardCache, grad_out: &DVector<f64>) -> (NetGrads, DVector<f64>) {
        let mut grads = NetGrads::zeros(self);
        let mut delta = grad_out.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let pre = &cache.pre[idx];
            let local = DVector::from_fn(delta.len(), |i, _| delta[i] * layer.act.derivative(pre[i]));
            let below = if idx == 0 { &cache.input } else { &cache.post[idx - 1] };
            grads.dw[idx] = &local * below.transpose();
            grads.db[idx] = local.clone();
            delta = layer.w.transpose() * local;
        }
        (grads, delta)
    }

    /// All parameters as one vector: per layer, weights row-major then
    /// biases.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.w.row_iter().flat_map(|r| r.iter().cloned().collect::<Vec<_>>()));
            out.extend(l.b.iter().cloned());
        }
        out
    }

    /// Inverse of [`Network::params_flat`].
    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        let mut it = params.iter();
        for l in &mut self.layers {
            for i in 0..l.w.nrows() {
                for j in 0..l.w.ncols() {
                    l.w[(i, j)] = *it.next().ok_or_else(|| {
                        CalibError::DimensionMismatch { expected: 0, got: params.len() }
                    })?;
                }
            }
            for i in 0..l.b.len() {
                l.b[i] = *it.next().ok_or_else(|| {
                    CalibError::DimensionMismatch { expected: 0, got: params.len() }
                })?;
            }
        }
        if it.next().is_some() {
            return Err(CalibError::DimensionMismatch { expected: self.params_flat().len(), got: params.len() });
        }
        Ok(())
    }

    fn params_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().all(|v| v.is_finite()) && l.b.iter().all(|v| v.is_finite()))
    }

    fn write_into(&self, out: &mut String) {
        writeln!(out, "layers,{}", self.layers.len()).unwrap();
        let mut fan_in = self.input_dim;
        for layer in &self.layers {
            writeln!(out, "layer,{},{},{}", fan_in, layer.b.len(), layer.act.encode()).unwrap();
            let w_flat: Vec<String> = layer.w.row_iter().flat_map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>()).collect();
            writeln!(out, "w,{}", w_flat.join(",")).unwrap();
            let b_flat: Vec<String> = layer.b.iter().map(|v| v.to_string()).collect();
            writeln!(out, "b,{}", b_flat.join(",")).unwrap();
            fan_in = layer.b.len();
        }
    }

    fn read_from<'a>(lines: &mut impl Iterator<Item = &'a str>) -> Result<Self> {
        let header = lines.next().ok_or_else(|| truncated())?;
        let n_layers: usize = header
            .strip_prefix("layers,")
            .ok_or_else(|| corrupt(header))?
            .parse()
            .map_err(|_| corrupt(header))?;
        let mut layers = Vec::with_capacity(n_layers);
        let mut input_dim = 0;
        for i in 0..n_layers {
            let meta = lines.next().ok_or_else(truncated)?;
            let parts: Vec<&str> = meta.strip_prefix("layer,").ok_or_else(|| corrupt(meta))?.split(',').collect();
            if parts.len() != 3 {
                return Err(corrupt(meta));
            }
            let fan_in: usize = parts[0].parse().map_err(|_| corrupt(meta))?;
            let width: usize = parts[1].parse().map_err(|_| corrupt(meta))?;
            let act = Activation::decode(parts[2])?;
            if i == 0 {
                input_dim = fan_in;
            }
            let wline = lines.next().ok_or_else(truncated)?;
            let w_vals = parse_floats(wline.strip_prefix("w,").ok_or_else(|| corrupt(wline))?)?;
            if w_vals.len() != width * fan_in {
                return Err(corrupt(wline));
            }
            let bline = lines.next().ok_or_else(truncated)?;
            let b_vals = parse_floats(bline.strip_prefix("b,").ok_or_else(|| corrupt(bline))?)?;
            if b_vals.len() != width {
                return Err(corrupt(bline));
            }
            layers.push(Layer {
                w: DMatrix::from_row_slice(width, fan_in, &w_vals),
                b: DVector::from_column_slice(&b_vals),
                act,
            });
        }
        Ok(Self { input_dim, layers })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write_into(&mut out);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        Self::read_from(&mut lines)
    }
}

fn truncated() -> CalibError {
    CalibError::InvalidArgument("truncated network file".into())
}

fn corrupt(line: &str) -> CalibError {
    CalibError::InvalidArgument(format!("malformed network line: {line}"))
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| corrupt(s)))
        .collect()
}

/// Shared-encoder network: encoder phi, loss regressor F, decoder s.
#[derive(Debug, Clone)]
pub struct CombinedNet {
    pub encoder: Network,
    pub regressor: Network,
    pub decoder: Network,
}

impl CombinedNet {
    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    /// Latent box guaranteed by the bottleneck activation.
    pub fn latent_box(&self) -> (f64, f64) {
        self.encoder.output_activation().range().expect("bounded bottleneck")
    }

    pub fn encode(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.encoder.forward(theta)
    }

    /// Raw decoder output; may leave the box (the training penalty acts on it).
    pub fn decode_raw(&self, psi: &[f64]) -> Result<Vec<f64>> {
        self.decoder.forward(psi)
    }

    /// Decoder output clipped into [lb, ub] per coordinate, for dispatch.
    pub fn decode_clipped(&self, psi: &[f64], bounds: &[(f64, f64)]) -> Result<Vec<f64>> {
        let raw = self.decode_raw(psi)?;
        if raw.len() != bounds.len() {
            return Err(CalibError::DimensionMismatch { expected: bounds.len(), got: raw.len() });
        }
        Ok(raw.iter().zip(bounds).map(|(&v, &(lo, hi))| v.clamp(lo, hi)).collect())
    }

    pub fn predict_loss(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.regressor.forward(&self.encode(theta)?)?[0])
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("combined\n");
        self.encoder.write_into(&mut out);
        self.regressor.write_into(&mut out);
        self.decoder.write_into(&mut out);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let tag = lines.next().ok_or_else(truncated)?;
        if tag != "combined" {
            return Err(corrupt(tag));
        }
        let encoder = Network::read_from(&mut lines)?;
        let regressor = Network::read_from(&mut lines)?;
        let decoder = Network::read_from(&mut lines)?;
        Ok(Self { encoder, regressor, decoder })
    }
}

/// Architecture of the combined net.
#[derive(Debug, Clone)]
pub struct CombinedSpec {
    pub encoder: NetworkSpec,
    pub regressor: NetworkSpec,
    pub decoder: NetworkSpec,
}

impl CombinedSpec {
    /// Default shape: encoder d -> 8 -> q (tanh bottleneck),
    /// regressor q -> 8 -> 1, decoder q -> 8 -> d.
    pub fn default_for(d: usize, q: usize) -> Result<Self> {
        Ok(Self {
            encoder: NetworkSpec::new(d, vec![(8, Activation::Tanh), (q, Activation::Tanh)])?,
            regressor: NetworkSpec::new(q, vec![(8, Activation::Tanh), (1, Activation::Identity)])?,
            decoder: NetworkSpec::new(q, vec![(8, Activation::Tanh), (d, Activation::Identity)])?,
        })
    }

    fn validate(&self) -> Result<()> {
        let q = self.encoder.output_dim();
        let (_, bottleneck) = *self.encoder.layers.last().unwrap();
        if bottleneck.range().is_none() {
            return Err(CalibError::InvalidArgument("encoder bottleneck must use a bounded activation".into()));
        }
        if self.regressor.input_dim != q || self.decoder.input_dim != q {
            return Err(CalibError::InvalidArgument("regressor and decoder must consume the encoder output".into()));
        }
        if self.regressor.output_dim() != 1 {
            return Err(CalibError::InvalidArgument("regressor must emit a scalar".into()));
        }
        if self.decoder.output_dim() != self.encoder.input_dim {
            return Err(CalibError::InvalidArgument("decoder must reconstruct the input dimension".into()));
        }
        Ok(())
    }
}

/// Training hyperparameters for the combined net and the mean net.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub penalty: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 1000, learning_rate: 0.01, lambda: 0.005, penalty: 200.0, batch: 16, seed: 0 }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0
            || self.learning_rate <= 0.0
            || self.lambda <= 0.0
            || self.penalty <= 0.0
            || self.batch == 0
        {
            return Err(CalibError::InvalidArgument("train config fields must be positive".into()));
        }
        Ok(())
    }
}

/// The combined training loss over a batch:
/// lambda * sum (L - Lhat)^2
///   + sum over samples and coordinates of (theta - thetahat)^2
///   + P * (max(0, thetahat - ub)^2 + max(0, lb - thetahat)^2).
pub fn combined_loss(
    net: &CombinedNet,
    batch: &[(Vec<f64>, f64)],
    cfg: &TrainConfig,
    bounds: &[(f64, f64)],
) -> Result<f64> {
    if batch.is_empty() {
        return Err(CalibError::InvalidArgument("empty batch".into()));
    }
    let mut total = 0.0;
    for (theta, loss) in batch {
        let psi = net.encode(theta)?;
        let lhat = net.regressor.forward(&psi)?[0];
        let that = net.decode_raw(&psi)?;
        total += cfg.lambda * (loss - lhat) * (loss - lhat);
        for ((&t, &th), &(lo, hi)) in theta.iter().zip(&that).zip(bounds) {
            total += (t - th) * (t - th);
            let over = (th - hi).max(0.0);
            let under = (lo - th).max(0.0);
            total += cfg.penalty * (over * over + under * under);
        }
    }
    Ok(total)
}

struct CombinedGrads {
    loss: f64,
    encoder: NetGrads,
    regressor: NetGrads,
    decoder: NetGrads,
}

fn combined_grads(
    net: &CombinedNet,
    batch: &[(Vec<f64>, f64)],
    cfg: &TrainConfig,
    bounds: &[(f64, f64)],
) -> CombinedGrads {
    let mut loss = 0.0;
    let mut ge = NetGrads::zeros(&net.encoder);
    let mut gf = NetGrads::zeros(&net.regressor);
    let mut gs = NetGrads::zeros(&net.decoder);
    for (theta, target) in batch {
        let x = DVector::from_column_slice(theta);
        let cache_e = net.encoder.forward_cache(&x);
        let psi = cache_e.post.last().unwrap().clone();
        let cache_f = net.regressor.forward_cache(&psi);
        let cache_s = net.decoder.forward_cache(&psi);
        let lhat = cache_f.post.last().unwrap()[0];
        let that = cache_s.post.last().unwrap();

        loss += cfg.lambda * (target - lhat) * (target - lhat);
        let grad_lhat = DVector::from_element(1, -2.0 * cfg.lambda * (target - lhat));
        let mut grad_that = DVector::zeros(that.len());
        for (k, (&t, &(lo, hi))) in theta.iter().zip(bounds).enumerate() {
            let th = that[k];
            loss += (t - th) * (t - th);
            let over = (th - hi).max(0.0);
            let under = (lo - th).max(0.0);
            loss += cfg.penalty * (over * over + under * under);
            grad_that[k] = -2.0 * (t - th) + 2.0 * cfg.penalty * over - 2.0 * cfg.penalty * under;
        }

        let (gf_i, gpsi_f) = net.regressor.backward(&cache_f, &grad_lhat);
        let (gs_i, gpsi_s) = net.decoder.backward(&cache_s, &grad_that);
        let (ge_i, _) = net.encoder.backward(&cache_e, &(gpsi_f + gpsi_s));
        gf.add(&gf_i);
        gs.add(&gs_i);
        ge.add(&ge_i);
    }
    CombinedGrads { loss, encoder: ge, regressor: gf, decoder: gs }
}

impl CombinedNet {
    /// Flattened parameters: encoder, regressor, decoder in order.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = self.encoder.params_flat();
        out.extend(self.regressor.params_flat());
        out.extend(self.decoder.params_flat());
        out
    }

    /// Inverse of [`CombinedNet::params_flat`].
    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        let ne = self.encoder.params_flat().len();
        let nf = self.regressor.params_flat().len();
        let ns = self.decoder.params_flat().len();
        if params.len() != ne + nf + ns {
            return Err(CalibError::DimensionMismatch { expected: ne + nf + ns, got: params.len() });
        }
        self.encoder.set_params_flat(&params[..ne])?;
        self.regressor.set_params_flat(&params[ne..ne + nf])?;
        self.decoder.set_params_flat(&params[ne + nf..])?;
        Ok(())
    }
}

/// Combined loss and its analytic parameter gradient, flattened in
/// [`CombinedNet::params_flat`] order.
pub fn combined_loss_grad(
    net: &CombinedNet,
    batch: &[(Vec<f64>, f64)],
    cfg: &TrainConfig,
    bounds: &[(f64, f64)],
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(CalibError::InvalidArgument("empty batch".into()));
    }
    let g = combined_grads(net, batch, cfg, bounds);
    let flatten = |ng: &NetGrads| -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in ng.dw.iter().zip(&ng.db) {
            out.extend(w.row_iter().flat_map(|r| r.iter().cloned().collect::<Vec<_>>()));
            out.extend(b.iter().cloned());
        }
        out
    };
    let mut grad = flatten(&g.encoder);
    grad.extend(flatten(&g.regressor));
    grad.extend(flatten(&g.decoder));
    Ok((g.loss, grad))
}

/// Plateau window for learning-rate halving, in epochs.
const PLATEAU_WINDOW: usize = 50;

/// Jointly train encoder, regressor and decoder on the combined loss.
pub fn train_combined(
    data: &[(Vec<f64>, f64)],
    spec: &CombinedSpec,
    cfg: &TrainConfig,
    bounds: &[(f64, f64)],
) -> Result<CombinedNet> {
    cfg.validate()?;
    spec.validate()?;
    if data.len() < 2 {
        return Err(CalibError::InvalidArgument("need at least 2 training samples".into()));
    }
    if data.iter().any(|(t, _)| t.len() != spec.encoder.input_dim) {
        return Err(CalibError::DimensionMismatch { expected: spec.encoder.input_dim, got: 0 });
    }
    let mut net = CombinedNet {
        encoder: Network::init(&spec.encoder, cfg.seed),
        regressor: Network::init(&spec.regressor, cfg.seed.wrapping_add(1)),
        decoder: Network::init(&spec.decoder, cfg.seed.wrapping_add(2)),
    };
    // start the decoder at the box center so the penalty is inactive at init
    {
        let last = net.decoder.layers.last_mut().unwrap();
        for (k, v) in last.b.iter_mut().enumerate() {
            *v = 0.5 * (bounds[k].0 + bounds[k].1);
        }
    }
    let mut lr = cfg.learning_rate;
    let mut window_best = f64::INFINITY;
    let mut prev_window_best = f64::INFINITY;
    let mut opt_e = Adam::new(&net.encoder);
    let mut opt_f = Adam::new(&net.regressor);
    let mut opt_s = Adam::new(&net.decoder);
    for epoch in 0..cfg.epochs {
        let mut epoch_loss = 0.0;
        for chunk in data.chunks(cfg.batch.max(1)) {
            let g = combined_grads(&net, chunk, cfg, bounds);
            epoch_loss += g.loss;
            // per-sample mean gradient so the rate does not depend on
            // batch size
            let scale = chunk.len() as f64;
            opt_e.step(&mut net.encoder, &g.encoder, lr, scale);
            opt_f.step(&mut net.regressor, &g.regressor, lr, scale);
            opt_s.step(&mut net.decoder, &g.decoder, lr, scale);
        }
        if !epoch_loss.is_finite() || !net.encoder.params_finite() {
            return Err(CalibError::Diverged(format!(
                "combined training diverged at epoch {epoch} (loss {epoch_loss}, lr {lr})"
            )));
        }
        window_best = window_best.min(epoch_loss);
        if (epoch + 1) % PLATEAU_WINDOW == 0 {
            if window_best >= prev_window_best * (1.0 - 1e-10) {
                lr *= 0.5;
            }
            prev_window_best = window_best;
            window_best = f64::INFINITY;
        }
    }
    Ok(net)
}

/// Train a plain regression net on mean squared error; used as the GP
/// mean function.
pub fn train_mean_net(
    data: &[(Vec<f64>, f64)],
    spec: &NetworkSpec,
    cfg: &TrainConfig,
) -> Result<Network> {
    cfg.validate()?;
    if data.len() < 2 {
        return Err(CalibError::InvalidArgument("need at least 2 training samples".into()));
    }
    if spec.output_dim() != 1 {
        return Err(CalibError::InvalidArgument("mean net must emit a scalar".into()));
    }
    let mut net = Network::init(spec, cfg.seed);
    let n = data.len() as f64;
    let mut lr = cfg.learning_rate;
    let mut window_best = f64::INFINITY;
    let mut prev_window_best = f64::INFINITY;
    let mut opt = Adam::new(&net);
    for epoch in 0..cfg.epochs {
        let mut grads = NetGrads::zeros(&net);
        let mut epoch_loss = 0.0;
        for (x, y) in data {
            let xv = DVector::from_column_slice(x);
            let cache = net.forward_cache(&xv);
            let pred = cache.post.last().unwrap()[0];
            epoch_loss += (y - pred) * (y - pred) / n;
            let grad_out = DVector::from_element(1, -2.0 * (y - pred) / n);
            let (g, _) = net.backward(&cache, &grad_out);
            grads.add(&g);
        }
        if !epoch_loss.is_finite() || !net.params_finite() {
            return Err(CalibError::Diverged(format!(
                "mean-net training diverged at epoch {epoch} (loss {epoch_loss}, lr {lr})"
            )));
        }
        opt.step(&mut net, &grads, lr, 1.0);
        window_best = window_best.min(epoch_loss);
        if (epoch + 1) % PLATEAU_WINDOW == 0 {
            if window_best >= prev_window_best * (1.0 - 1e-10) {
                lr *= 0.5;
            }
            prev_window_best = window_best;
            window_best = f64::INFINITY;
        }
    }
    Ok(net)
}

/// Defaults matching the mean-net training profile: 800 epochs, lr 0.01.
pub fn mean_net_train_config(seed: u64) -> TrainConfig {
    TrainConfig { epochs: 800, learning_rate: 0.01, seed, ..Default::default() }
}
