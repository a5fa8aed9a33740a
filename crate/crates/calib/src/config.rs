//! Flat, line-oriented run configuration:
//!
//! ```text
//! # comments and blank lines are ignored
//! [simulator]
//! kind = toy              # toy | external | benchmark
//! exe = ./my-sim          # external only
//! benchmark = branin2     # benchmark only
//! timeout_secs = 3600
//!
//! [space]                 # one `name = lower, upper` per line;
//! x1 = -5, 10             # omit the section to use the simulator default
//!
//! [bo]
//! initial_design = 16
//! iterations = 20
//! batch = 2
//! pool = 2048
//! space_mode = orig       # orig | as | nn
//! gp_mean = zero          # zero | nn
//! latent_dim = 2
//! as_dim = 1              # optional; omit for automatic gap detection
//! workers = 1
//!
//! [morris]
//! trajectories = 6
//! grid_levels = 4
//!
//! [run]
//! seed = 0
//! out = ./out
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::design_space::{Parameter, ParameterSpace};
use crate::error::{CalibError, Result};
use crate::optimizer::{BOConfig, GpMeanMode, SpaceMode};

/// Which simulator a run drives.
#[derive(Debug, Clone, PartialEq)]
pub enum SimKind {
    Toy,
    External {
        exe: PathBuf,
        timeout_secs: u64,
        /// observed series in the output CSV format (`bin,value`)
        observed: PathBuf,
    },
    Benchmark { name: String },
}

/// Morris screening settings.
#[derive(Debug, Clone, PartialEq)]
pub struct MorrisSettings {
    pub trajectories: usize,
    pub grid_levels: usize,
}

impl Default for MorrisSettings {
    fn default() -> Self {
        Self { trajectories: 6, grid_levels: crate::sensitivity::DEFAULT_GRID_LEVELS }
    }
}

/// Everything a CLI command needs to run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// None = use the simulator's natural space
    pub space: Option<ParameterSpace>,
    pub simulator: SimKind,
    pub bo: BOConfig,
    pub morris: MorrisSettings,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            space: None,
            simulator: SimKind::Toy,
            bo: BOConfig::default(),
            morris: MorrisSettings::default(),
            seed: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse_num<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| CalibError::Config(format!("[{section}] {key}: cannot parse {value:?}")))
}

/// Parse the flat key = value grammar above.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut section = String::new();
    let mut space_entries: Vec<Parameter> = Vec::new();
    // simulator keys are interdependent; collect then resolve
    let mut sim_keys: BTreeMap<String, String> = BTreeMap::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            section = name.trim().to_string();
            match section.as_str() {
                "simulator" | "space" | "bo" | "morris" | "run" => {}
                other => return Err(CalibError::Config(format!("line {}: unknown section [{other}]", lineno + 1))),
            }
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CalibError::Config(format!("line {}: expected key = value, got {line:?}", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        match section.as_str() {
            "simulator" => {
                sim_keys.insert(key.to_string(), value.to_string());
            }
            "space" => {
                let (lo, hi) = value
                    .split_once(',')
                    .ok_or_else(|| CalibError::Config(format!("[space] {key}: expected `lower, upper`")))?;
                space_entries.push(Parameter {
                    name: key.to_string(),
                    lower: parse_num("space", key, lo)?,
                    upper: parse_num("space", key, hi)?,
                });
            }
            "bo" => match key {
                "initial_design" => cfg.bo.initial_design = parse_num(&section, key, value)?,
                "iterations" => cfg.bo.iterations = parse_num(&section, key, value)?,
                "batch" => cfg.bo.batch_size = parse_num(&section, key, value)?,
                "pool" => cfg.bo.candidate_pool = parse_num(&section, key, value)?,
                "latent_dim" => cfg.bo.latent_dim = parse_num(&section, key, value)?,
                "as_dim" => cfg.bo.as_dim = Some(parse_num(&section, key, value)?),
                "workers" => cfg.bo.workers = parse_num(&section, key, value)?,
                "space_mode" => cfg.bo.space_mode = parse_space_mode(value)?,
                "gp_mean" => cfg.bo.gp_mean = parse_gp_mean(value)?,
                other => return Err(CalibError::Config(format!("[bo] unknown key {other}"))),
            },
            "morris" => match key {
                "trajectories" => cfg.morris.trajectories = parse_num(&section, key, value)?,
                "grid_levels" => cfg.morris.grid_levels = parse_num(&section, key, value)?,
                other => return Err(CalibError::Config(format!("[morris] unknown key {other}"))),
            },
            "run" => match key {
                "seed" => cfg.seed = parse_num(&section, key, value)?,
                "out" => cfg.out_dir = PathBuf::from(value),
                other => return Err(CalibError::Config(format!("[run] unknown key {other}"))),
            },
            "" => return Err(CalibError::Config(format!("line {}: key outside any section", lineno + 1))),
            _ => unreachable!("section validated above"),
        }
    }

    if !space_entries.is_empty() {
        cfg.space = Some(ParameterSpace::new(space_entries)?);
    }
    cfg.simulator = resolve_simulator(&sim_keys)?;
    cfg.bo.seed = cfg.seed;
    Ok(cfg)
}

pub fn parse_space_mode(value: &str) -> Result<SpaceMode> {
    match value {
        "orig" => Ok(SpaceMode::Original),
        "as" => Ok(SpaceMode::ActiveSubspace),
        "nn" => Ok(SpaceMode::Neural),
        other => Err(CalibError::Config(format!("space_mode must be orig|as|nn, got {other}"))),
    }
}

pub fn parse_gp_mean(value: &str) -> Result<GpMeanMode> {
    match value {
        "zero" => Ok(GpMeanMode::Zero),
        "nn" => Ok(GpMeanMode::Network),
        other => Err(CalibError::Config(format!("gp_mean must be zero|nn, got {other}"))),
    }
}

fn resolve_simulator(keys: &BTreeMap<String, String>) -> Result<SimKind> {
    let kind = keys.get("kind").map(String::as_str).unwrap_or("toy");
    for k in keys.keys() {
        if !matches!(k.as_str(), "kind" | "exe" | "benchmark" | "timeout_secs" | "observed") {
            return Err(CalibError::Config(format!("[simulator] unknown key {k}")));
        }
    }
    match kind {
        "toy" => Ok(SimKind::Toy),
        "external" => {
            let exe = keys
                .get("exe")
                .ok_or_else(|| CalibError::Config("[simulator] kind = external requires exe".into()))?;
            let observed = keys
                .get("observed")
                .ok_or_else(|| CalibError::Config("[simulator] kind = external requires observed".into()))?;
            let timeout_secs = match keys.get("timeout_secs") {
                Some(v) => parse_num("simulator", "timeout_secs", v)?,
                None => 3600,
            };
            Ok(SimKind::External {
                exe: PathBuf::from(exe),
                timeout_secs,
                observed: PathBuf::from(observed),
            })
        }
        "benchmark" => {
            let name = keys
                .get("benchmark")
                .ok_or_else(|| CalibError::Config("[simulator] kind = benchmark requires benchmark".into()))?;
            Ok(SimKind::Benchmark { name: name.clone() })
        }
        other => Err(CalibError::Config(format!("[simulator] kind must be toy|external|benchmark, got {other}"))),
    }
}

/// Load and parse a config file.
pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CalibError::Config(format!("reading {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Natural parameter space for a simulator kind, used when the config
/// does not define one.
pub fn default_space(sim: &SimKind) -> Result<ParameterSpace> {
    match sim {
        SimKind::Toy => Ok(crate::sim::toy_parameter_space()),
        SimKind::External { .. } => Err(CalibError::Config(
            "external simulators require a [space] section".into(),
        )),
        SimKind::Benchmark { name } => match name.as_str() {
            "branin2" => ParameterSpace::from_bounds(&[("x1", -5.0, 10.0), ("x2", 0.0, 15.0)]),
            "hartmann6" => ParameterSpace::unit_cube(6),
            "ridge5" => ParameterSpace::unit_cube(5),
            other => Err(CalibError::Config(format!("unknown benchmark {other}"))),
        },
    }
}
