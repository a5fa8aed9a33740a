//! Evaluation targets: a small activity-based toy simulator built from
//! hazard/logit/probit choice models, the MSE calibration loss over the
//! 288-bin travel-time series, and standard benchmark functions.
//!
//! The toy simulator replaces kinematic-wave network loading with an
//! algebraic volume-delay congestion function; routing is a fixed
//! destination-to-links table.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::design_space::{DesignPoint, ParameterSpace};
use crate::error::{CalibError, Result};

/// Number of 5-minute bins over 24 hours.
pub const N_BINS: usize = 288;

/// 24 hours of simulated travel times averaged over 5-minute bins, minutes.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSeries {
    values: Vec<f64>,
}

impl OutputSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != N_BINS {
            return Err(CalibError::DimensionMismatch { expected: N_BINS, got: values.len() });
        }
        if values.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(CalibError::NonFinite("output series must be finite and >= 0".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Weibull hazard rate h(t) = gamma * t^(gamma-1) * exp(-beta'x).
pub fn weibull_hazard(t: f64, gamma: f64, beta_dot_x: f64) -> Result<f64> {
    if t <= 0.0 {
        return Err(CalibError::InvalidArgument(format!("hazard needs t > 0, got {t}")));
    }
    if gamma <= 0.0 {
        return Err(CalibError::InvalidArgument(format!("hazard needs gamma > 0, got {gamma}")));
    }
    Ok(gamma * t.powf(gamma - 1.0) * (-beta_dot_x).exp())
}

/// Multinomial logit choice probabilities with max-shift overflow guard.
pub fn mnl_probabilities(utilities: &[f64]) -> Result<Vec<f64>> {
    if utilities.is_empty() {
        return Err(CalibError::InvalidArgument("empty choice set".into()));
    }
    if utilities.iter().any(|v| !v.is_finite()) {
        return Err(CalibError::NonFinite("utilities must be finite".into()));
    }
    let vmax = utilities.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = utilities.iter().map(|v| (v - vmax).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Ordered probit class probabilities over K classes given K-1 strictly
/// increasing thresholds: p(y=k) = Phi(a_k - eta) - Phi(a_{k-1} - eta).
pub fn ordered_probit(eta: f64, alphas: &[f64]) -> Result<Vec<f64>> {
    if alphas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CalibError::InvalidArgument("thresholds must be strictly increasing".into()));
    }
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut cdf_prev = 0.0;
    let mut probs = Vec::with_capacity(alphas.len() + 1);
    for &a in alphas {
        let c = std_normal.cdf(a - eta);
        probs.push(c - cdf_prev);
        cdf_prev = c;
    }
    probs.push(1.0 - cdf_prev);
    Ok(probs)
}

/// Mean squared error over the 288-bin series: (1/288) * sum (y_i - eta_i)^2.
pub fn loss_mse(observed: &OutputSeries, simulated: &OutputSeries) -> f64 {
    let s: f64 = observed
        .values()
        .iter()
        .zip(simulated.values())
        .map(|(y, e)| (y - e) * (y - e))
        .sum();
    s / N_BINS as f64
}

/// One road segment of the toy network.
#[derive(Debug, Clone)]
pub struct Link {
    /// Free-flow traversal time, minutes.
    pub free_flow_time: f64,
    /// Vehicles per 5-minute bin before heavy congestion.
    pub capacity: f64,
}

/// Fixed, non-calibrated inputs of the toy simulator.
#[derive(Debug, Clone)]
pub struct ToySimConfig {
    pub population: usize,
    pub links: Vec<Link>,
    /// links used by trips to each destination (indices into `links`).
    pub routes: Vec<Vec<usize>>,
    /// per-destination retail accessibility attribute.
    pub retail_access: Vec<f64>,
    /// per-destination log-distance attribute.
    pub log_distance: Vec<f64>,
    /// Weibull shape for activity start times.
    pub activity_gamma: f64,
    /// coefficient on the traveler attribute inside the hazard.
    pub activity_beta: f64,
    /// centering constants for the taxi and bike utilities.
    pub taxi_cost: f64,
    pub bike_cost: f64,
    /// road volume contributed per taxi trip (> 1 models repositioning).
    pub taxi_load_factor: f64,
    /// ordered-probit coefficient and thresholds for planning order.
    pub probit_beta: f64,
    pub probit_alphas: Vec<f64>,
    /// trip duration in bins while a vehicle occupies its route.
    pub trip_bins: usize,
    /// observation noise sd (minutes) used when generating observed data.
    pub noise_sd: f64,
    /// seed for the ground-truth observed series.
    pub truth_seed: u64,
}

impl Default for ToySimConfig {
    fn default() -> Self {
        Self {
            population: 300,
            links: vec![
                Link { free_flow_time: 2.0, capacity: 16.0 },
                Link { free_flow_time: 1.5, capacity: 12.0 },
                Link { free_flow_time: 3.0, capacity: 20.0 },
                Link { free_flow_time: 2.5, capacity: 14.0 },
            ],
            routes: vec![vec![0, 1], vec![1, 2], vec![2, 3]],
            retail_access: vec![0.25, 0.55, 0.85],
            log_distance: vec![0.30, 0.55, 0.80],
            activity_gamma: 2.0,
            activity_beta: 7.0,
            taxi_cost: 3.9,
            bike_cost: 3.4,
            taxi_load_factor: 1.7,
            probit_beta: 0.8,
            probit_alphas: vec![0.2, 0.6],
            trip_bins: 4,
            noise_sd: 0.005,
            truth_seed: 20191201,
        }
    }
}

impl ToySimConfig {
    fn validate(&self) -> Result<()> {
        if self.links.is_empty() || self.links.iter().any(|l| l.free_flow_time <= 0.0 || l.capacity <= 0.0) {
            return Err(CalibError::InvalidArgument("links need t0 > 0 and capacity > 0".into()));
        }
        if self.routes.len() != self.retail_access.len() || self.routes.len() != self.log_distance.len() {
            return Err(CalibError::InvalidArgument("destination tables must agree in length".into()));
        }
        if self.probit_alphas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CalibError::InvalidArgument("probit thresholds must increase".into()));
        }
        Ok(())
    }
}

/// The Table-1-shaped calibration space the toy simulator expects.
pub fn toy_parameter_space() -> ParameterSpace {
    ParameterSpace::from_bounds(&[
        ("HBO_B_male_taxi", 0.298, 2.298),
        ("NHB_B_dens_bike", 6.601, 8.601),
        ("HBO_ASC_TAXI", 2.34, 4.34),
        ("THETAR_WORK", -8.553, -6.553),
        ("GAMMA_SERVICE", 7.038, 9.038),
    ])
    .expect("toy space bounds")
}

fn mix_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finalizer over master xor index
    let mut z = master ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic-given-(theta, seed) toy activity-based simulator.
///
/// Each traveler draws attributes from a per-traveler generator derived
/// from the master seed and picks an activity start bin through the
/// Weibull hazard. Destination (MNL), mode (MNL) and planning-order class
/// (ordered probit) enter through their closed-form choice probabilities:
/// every (destination, class) combination loads its route links with the
/// traveler's probability mass, so link volumes are exact conditional
/// expectations given the drawn attributes. The per-bin travel time comes
/// from a BPR-style volume-delay function averaged over links.
pub fn toy_simulator(theta: &DesignPoint, seed: u64, cfg: &ToySimConfig) -> Result<OutputSeries> {
    cfg.validate()?;
    let v = theta.values();
    if v.len() != 5 {
        return Err(CalibError::DimensionMismatch { expected: 5, got: v.len() });
    }
    let (b_male_taxi, b_dens_bike, asc_taxi, thetar_work, gamma_service) =
        (v[0], v[1], v[2], v[3], v[4]);

    let n_links = cfg.links.len();
    let mut volume = vec![vec![0.0f64; N_BINS]; n_links];

    for traveler in 0..cfg.population {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, traveler as u64));
        let male = rng.gen::<f64>() < 0.5;
        let density: f64 = rng.gen();
        let attr: f64 = 0.45 + 0.55 * rng.gen::<f64>();

        // activity start time from the Weibull survival function
        let u_start: f64 = rng.gen::<f64>().max(1e-12);
        let beta_dot_x = cfg.activity_beta * attr;
        let t_start = (-(u_start.ln()) * beta_dot_x.exp()).powf(1.0 / cfg.activity_gamma);
        let t_start = t_start.clamp(0.0, 23.99);

        // destination choice: retail accessibility and distance decay
        let utilities: Vec<f64> = cfg
            .retail_access
            .iter()
            .zip(&cfg.log_distance)
            .map(|(&retail, &ld)| thetar_work * (retail - 0.5) - gamma_service * (ld - 0.5))
            .collect();
        let p_dest = mnl_probabilities(&utilities)?;

        // mode choice: car (reference), taxi, bike
        let v_car = 0.0;
        let v_taxi = asc_taxi + b_male_taxi * (male as u8 as f64) - cfg.taxi_cost;
        let v_bike = b_dens_bike * density - cfg.bike_cost;
        let p_mode = mnl_probabilities(&[v_car, v_taxi, v_bike])?;
        // bikes do not load road links; taxis load more than cars because
        // of empty repositioning legs
        let p_road = p_mode[0] + cfg.taxi_load_factor * p_mode[1];

        // planning order shifts the departure earlier or later
        let eta = cfg.probit_beta * attr;
        let p_class = ordered_probit(eta, &cfg.probit_alphas)?;

        // expected (probability-weighted) network loading: the closed-form
        // choice probabilities contribute fractional volume directly, so
        // link loads are exact conditional expectations given the
        // traveler's drawn attributes.
        let base_bin = (t_start / 24.0 * N_BINS as f64) as i64;
        for (class, &pc) in p_class.iter().enumerate() {
            let shift = (class as i64 - 1) * 6;
            let start_bin = (base_bin + shift).clamp(0, (N_BINS - cfg.trip_bins) as i64) as usize;
            for (dest, &pd) in p_dest.iter().enumerate() {
                let w = p_road * pc * pd;
                for &link in &cfg.routes[dest] {
                    for b in start_bin..start_bin + cfg.trip_bins {
                        volume[link][b] += w;
                    }
                }
            }
        }
    }

    let mut out = vec![0.0f64; N_BINS];
    for (b, slot) in out.iter_mut().enumerate() {
        let mut total = 0.0;
        for (l, link) in cfg.links.iter().enumerate() {
            let ratio = volume[l][b] / link.capacity;
            total += link.free_flow_time * (1.0 + 0.15 * ratio.powi(4));
        }
        *slot = total / n_links as f64;
    }
    OutputSeries::new(out)
}

/// Ground-truth parameter point used to generate the observed series,
/// expressed in unit-cube coordinates of [`toy_parameter_space`].
pub const TRUTH_UNIT: [f64; 5] = [0.70, 0.30, 0.62, 0.45, 0.80];

/// Observed target series: the simulator at the truth point plus seeded
/// Gaussian observation noise. Identical for every call with the same config.
pub fn generate_observed(cfg: &ToySimConfig) -> Result<OutputSeries> {
    let space = toy_parameter_space();
    let theta = crate::design_space::unscale(&TRUTH_UNIT, &space)?;
    let clean = toy_simulator(&theta, cfg.truth_seed, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.truth_seed, 0xA11CE));
    let normal = rand_distr_standard_normal(&mut rng, N_BINS);
    let values = clean
        .values()
        .iter()
        .zip(normal)
        .map(|(&v, z)| (v + cfg.noise_sd * z).max(0.0))
        .collect();
    OutputSeries::new(values)
}

fn rand_distr_standard_normal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    // Box-Muller; two draws per pair keeps the stream layout obvious.
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let u1: f64 = rng.gen::<f64>().max(1e-300);
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        out.push(r * (2.0 * std::f64::consts::PI * u2).cos());
        if out.len() < n {
            out.push(r * (2.0 * std::f64::consts::PI * u2).sin());
        }
    }
    out
}

/// Fixed ridge direction for `ridge5`, unit norm.
pub fn ridge5_direction() -> [f64; 5] {
    let w = [0.6, -0.3, 0.5, 0.2, -0.4];
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    [w[0] / norm, w[1] / norm, w[2] / norm, w[3] / norm, w[4] / norm]
}

/// Standard benchmark functions on their usual boxes.
///
/// * `branin2` on [-5, 10] x [0, 15], global minimum ~0.397887
/// * `hartmann6` on [0, 1]^6, global minimum ~-3.32237
/// * `ridge5` on [0, 1]^5, a one-dimensional ridge g(w'x)
pub fn benchmark(name: &str, x: &[f64]) -> Result<f64> {
    match name {
        "branin2" => {
            if x.len() != 2 {
                return Err(CalibError::DimensionMismatch { expected: 2, got: x.len() });
            }
            let (x1, x2) = (x[0], x[1]);
            let a = 1.0;
            let b = 5.1 / (4.0 * std::f64::consts::PI.powi(2));
            let c = 5.0 / std::f64::consts::PI;
            let r = 6.0;
            let s = 10.0;
            let t = 1.0 / (8.0 * std::f64::consts::PI);
            Ok(a * (x2 - b * x1 * x1 + c * x1 - r).powi(2) + s * (1.0 - t) * x1.cos() + s)
        }
        "hartmann6" => {
            if x.len() != 6 {
                return Err(CalibError::DimensionMismatch { expected: 6, got: x.len() });
            }
            let alpha = [1.0, 1.2, 3.0, 3.2];
            let a = [
                [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
                [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
                [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
                [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
            ];
            let p = [
                [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
                [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
                [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
                [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
            ];
            let mut total = 0.0;
            for i in 0..4 {
                let inner: f64 = (0..6).map(|j| a[i][j] * (x[j] - p[i][j]).powi(2)).sum();
                total += alpha[i] * (-inner).exp();
            }
            Ok(-total)
        }
        "ridge5" => {
            if x.len() != 5 {
                return Err(CalibError::DimensionMismatch { expected: 5, got: x.len() });
            }
            let w = ridge5_direction();
            let u: f64 = x.iter().zip(&w).map(|(xi, wi)| xi * wi).sum();
            Ok((1.4 * u).exp())
        }
        other => Err(CalibError::InvalidArgument(format!("unknown benchmark {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design_space::unscale;
    use rand::Rng;

    #[test]
    fn hazard_exponential_special_case() {
        for t in [0.5, 1.0, 7.3] {
            assert!((weibull_hazard(t, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hazard_hand_value() {
        assert!((weibull_hazard(3.0, 2.0, 0.0).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn hazard_scales_with_beta() {
        let h0 = weibull_hazard(2.0, 1.7, 0.0).unwrap();
        let h1 = weibull_hazard(2.0, 1.7, 0.9).unwrap();
        assert!((h1 / h0 - (-0.9f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn hazard_rejects_nonpositive_t() {
        assert!(weibull_hazard(0.0, 2.0, 0.0).is_err());
        assert!(weibull_hazard(-1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn mnl_equal_utilities_uniform() {
        let p = mnl_probabilities(&[2.0, 2.0, 2.0, 2.0]).unwrap();
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-12));
    }

    #[test]
    fn mnl_hand_value() {
        let p = mnl_probabilities(&[0.0, 3f64.ln()]).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-12);
        assert!((p[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn mnl_shift_invariant_and_simplex() {
        let v = [0.3, -1.2, 2.5];
        let p = mnl_probabilities(&v).unwrap();
        let q = mnl_probabilities(&[v[0] + 10.0, v[1] + 10.0, v[2] + 10.0]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mnl_rejects_empty() {
        assert!(mnl_probabilities(&[]).is_err());
    }

    #[test]
    fn probit_symmetric_binary() {
        let p = ordered_probit(0.0, &[0.0]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert!((p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn probit_sums_to_one() {
        let p = ordered_probit(0.37, &[-1.0, 0.2, 1.5]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn probit_stochastic_ordering() {
        // larger eta shifts mass to higher classes
        let alphas = [-0.5, 0.5];
        let mut prev_upper = 0.0;
        for i in 0..20 {
            let eta = -2.0 + 0.2 * i as f64;
            let p = ordered_probit(eta, &alphas).unwrap();
            let upper = p[2];
            assert!(upper >= prev_upper - 1e-12);
            prev_upper = upper;
        }
    }

    #[test]
    fn probit_rejects_nonmonotone() {
        assert!(ordered_probit(0.0, &[1.0, 0.5]).is_err());
    }

    #[test]
    fn loss_identical_zero_and_offset_four() {
        let a = OutputSeries::new(vec![3.0; N_BINS]).unwrap();
        let b = OutputSeries::new(vec![5.0; N_BINS]).unwrap();
        assert_eq!(loss_mse(&a, &a), 0.0);
        assert!((loss_mse(&a, &b) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn toy_sim_deterministic() {
        let space = toy_parameter_space();
        let cfg = ToySimConfig::default();
        let theta = unscale(&[0.3, 0.6, 0.2, 0.8, 0.5], &space).unwrap();
        let a = toy_simulator(&theta, 17, &cfg).unwrap();
        let b = toy_simulator(&theta, 17, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn toy_sim_zero_population_free_flow() {
        let space = toy_parameter_space();
        let cfg = ToySimConfig { population: 0, ..Default::default() };
        let theta = unscale(&[0.5; 5], &space).unwrap();
        let out = toy_simulator(&theta, 1, &cfg).unwrap();
        let t0_mean: f64 =
            cfg.links.iter().map(|l| l.free_flow_time).sum::<f64>() / cfg.links.len() as f64;
        assert!(out.values().iter().all(|&v| (v - t0_mean).abs() < 1e-12));
    }

    #[test]
    fn toy_sim_population_monotone() {
        let space = toy_parameter_space();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..3 {
            let u: Vec<f64> = (0..5).map(|_| rng.gen()).collect();
            let theta = unscale(&u, &space).unwrap();
            let small = toy_simulator(&theta, 9, &ToySimConfig { population: 150, ..Default::default() }).unwrap();
            let big = toy_simulator(&theta, 9, &ToySimConfig { population: 300, ..Default::default() }).unwrap();
            for (s, b) in small.values().iter().zip(big.values()) {
                assert!(*b >= s - 1e-12);
            }
        }
    }

    #[test]
    fn observed_loss_floor_near_noise_variance() {
        let cfg = ToySimConfig::default();
        let observed = generate_observed(&cfg).unwrap();
        let space = toy_parameter_space();
        let theta = unscale(&TRUTH_UNIT, &space).unwrap();
        let clean = toy_simulator(&theta, cfg.truth_seed, &cfg).unwrap();
        let floor = loss_mse(&observed, &clean);
        let var = cfg.noise_sd * cfg.noise_sd;
        assert!((floor - var).abs() / var < 0.2, "floor {floor} vs noise var {var}");
    }

    #[test]
    fn branin_minimum() {
        for m in [[-std::f64::consts::PI, 12.275], [std::f64::consts::PI, 2.275], [9.42478, 2.475]] {
            let v = benchmark("branin2", &m).unwrap();
            assert!((v - 0.397887).abs() < 1e-4, "branin at {m:?} = {v}");
        }
        // dense grid never goes below the published optimum
        let mut best = f64::INFINITY;
        for i in 0..200 {
            for j in 0..200 {
                let x = [-5.0 + 15.0 * i as f64 / 199.0, 15.0 * j as f64 / 199.0];
                best = best.min(benchmark("branin2", &x).unwrap());
            }
        }
        assert!(best >= 0.397887 - 1e-3);
        assert!(best <= 0.41);
    }

    #[test]
    fn hartmann6_minimum() {
        let xopt = [0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573];
        let v = benchmark("hartmann6", &xopt).unwrap();
        assert!((v - (-3.32237)).abs() < 1e-4);
        // local perturbations do not find anything deeper
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..2000 {
            let x: Vec<f64> = xopt.iter().map(|&c| (c + 0.02 * (rng.gen::<f64>() - 0.5)).clamp(0.0, 1.0)).collect();
            assert!(benchmark("hartmann6", &x).unwrap() >= -3.32238);
        }
    }

    #[test]
    fn ridge5_gradient_parallel_to_w() {
        // finite-difference gradient at random points is parallel to w
        let w = ridge5_direction();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let x: Vec<f64> = (0..5).map(|_| 0.1 + 0.8 * rng.gen::<f64>()).collect();
            let h = 1e-6;
            let mut g = [0.0; 5];
            for i in 0..5 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                g[i] = (benchmark("ridge5", &xp).unwrap() - benchmark("ridge5", &xm).unwrap()) / (2.0 * h);
            }
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            let cos: f64 = g.iter().zip(&w).map(|(gi, wi)| gi * wi).sum::<f64>() / norm;
            assert!(cos.abs() > 0.999999);
        }
    }

    #[test]
    fn benchmark_rejects_unknown() {
        assert!(benchmark("nope", &[0.0]).is_err());
    }
}
