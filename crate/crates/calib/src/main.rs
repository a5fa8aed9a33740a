//! `calib` — sensitivity screening, subspace analysis, and calibration
//! runs over a simulator, emitting plot-ready CSV reports.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use calib::config::{default_space, load_config, parse_gp_mean, parse_space_mode, RunConfig, SimKind};
use calib::design_space::{latin_hypercube_unit, scale_to_unit, unscale, DesignPoint, ParameterSpace};
use calib::dimred_linear::{bootstrap_eigenvalues, fit_active_subspace, project, GradientMethod};
use calib::error::{CalibError, Result};
use calib::eval_pool::{
    derive_seed, read_series_csv, submit_batch, EvaluationJob, ExternalSimulator, JobStatus, SimOutput,
    Simulator,
};
use calib::optimizer::{run_calibration, GpMeanMode, SpaceMode};
use calib::report::{
    write_eigvals_csv, write_evaluations_csv, write_morris_csv, write_projection_csv, write_qq_csv,
    write_summary_csv, write_trace_csv, SummaryRow,
};
use calib::sensitivity::{build_trajectories, default_delta, elementary_effects, morris_stats, rank_variables};
use calib::sim::{benchmark, generate_observed, loss_mse, toy_simulator, OutputSeries, ToySimConfig};

#[derive(Parser)]
#[command(name = "calib", about = "Simulator calibration toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// configuration file (flat key = value format)
    #[arg(long)]
    config: Option<PathBuf>,
    /// master seed (overrides the config)
    #[arg(long)]
    seed: Option<u64>,
    /// output directory (overrides the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// concurrent simulator workers (overrides the config)
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Elementary-effects screening of the parameter space
    Morris {
        #[command(flatten)]
        common: CommonArgs,
        /// number of trajectories (overrides the config)
        #[arg(long)]
        trajectories: Option<usize>,
    },
    /// Active-subspace eigenvalue analysis with bootstrap intervals
    Asdim {
        #[command(flatten)]
        common: CommonArgs,
        /// training sample size
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// bootstrap replicates
        #[arg(long, default_value_t = 1000)]
        bootstrap: usize,
    },
    /// Bayesian-optimization calibration run
    Calibrate {
        #[command(flatten)]
        common: CommonArgs,
        /// search space: orig | as | nn (overrides the config)
        #[arg(long)]
        space: Option<String>,
        /// GP mean: zero | nn (overrides the config)
        #[arg(long)]
        mean: Option<String>,
        /// BO iterations (overrides the config)
        #[arg(long)]
        iters: Option<usize>,
        /// batch size (overrides the config)
        #[arg(long)]
        batch: Option<usize>,
    },
}

fn load(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        cfg.bo.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(w) = common.workers {
        cfg.bo.workers = w;
    }
    Ok(cfg)
}

/// Simulator handle plus whether it can produce output series for QQ data.
struct SimHandle {
    sim: Box<dyn Simulator>,
    has_series: bool,
}

fn build_simulator(cfg: &RunConfig, space: &ParameterSpace) -> Result<SimHandle> {
    match &cfg.simulator {
        SimKind::Toy => {
            let toy_cfg = ToySimConfig::default();
            let observed = generate_observed(&toy_cfg)?;
            let sim = move |theta: &DesignPoint, seed: u64| -> Result<SimOutput> {
                let series = toy_simulator(theta, seed, &toy_cfg)?;
                let loss = loss_mse(&observed, &series);
                Ok(SimOutput { series: Some(series), loss })
            };
            Ok(SimHandle { sim: Box::new(sim), has_series: true })
        }
        SimKind::Benchmark { name } => {
            let name = name.clone();
            let sim = move |theta: &DesignPoint, _seed: u64| -> Result<SimOutput> {
                Ok(SimOutput { series: None, loss: benchmark(&name, theta.values())? })
            };
            Ok(SimHandle { sim: Box::new(sim), has_series: false })
        }
        SimKind::External { exe, timeout_secs, observed } => {
            let observed = read_series_csv(observed)?;
            let ext = ExternalSimulator::new(
                exe.clone(),
                space.clone(),
                observed,
                cfg.out_dir.clone(),
                Some(Duration::from_secs(*timeout_secs)),
            )?;
            Ok(SimHandle { sim: Box::new(ext), has_series: true })
        }
    }
}

fn resolve_space(cfg: &RunConfig) -> Result<ParameterSpace> {
    match &cfg.space {
        Some(s) => Ok(s.clone()),
        None => default_space(&cfg.simulator),
    }
}

/// Evaluate a set of points, failing if any evaluation failed (Morris
/// and subspace analysis need a complete design).
fn evaluate_all(sim: &dyn Simulator, thetas: &[DesignPoint], master_seed: u64, workers: usize) -> Result<Vec<f64>> {
    let jobs: Vec<EvaluationJob> = thetas
        .iter()
        .enumerate()
        .map(|(i, t)| EvaluationJob { id: i as u64, theta: t.clone(), seed: derive_seed(master_seed, i as u64) })
        .collect();
    let results = submit_batch(sim, &jobs, workers)?;
    results
        .iter()
        .map(|r| match &r.status {
            JobStatus::Ok(out) => Ok(out.loss),
            JobStatus::Failed(m) => Err(CalibError::Simulator(format!("job {} failed: {m}", r.id))),
        })
        .collect()
}

fn cmd_morris(common: &CommonArgs, trajectories: Option<usize>) -> Result<()> {
    let cfg = load(common)?;
    let space = resolve_space(&cfg)?;
    let handle = build_simulator(&cfg, &space)?;
    let r = trajectories.unwrap_or(cfg.morris.trajectories);
    let delta = default_delta(cfg.morris.grid_levels);
    let trajs = build_trajectories(&space, r, delta, cfg.morris.grid_levels, derive_seed(cfg.seed, 0x30))?;

    let thetas: Vec<DesignPoint> = trajs
        .iter()
        .flat_map(|t| t.points.iter())
        .map(|u| unscale(u, &space))
        .collect::<Result<_>>()?;
    let losses = evaluate_all(handle.sim.as_ref(), &thetas, cfg.seed, cfg.bo.workers)?;
    println!("morris: {} evaluations ({} trajectories x {} points)", thetas.len(), r, space.dimension() + 1);

    let ee = elementary_effects(&trajs, &losses)?;
    let stats = morris_stats(&ee)?;
    let ranking = rank_variables(&stats);
    let out = cfg.out_dir.join("morris.csv");
    write_morris_csv(&out, &space, &stats, &ranking)?;
    for (dim, tags) in &ranking {
        let label = if tags.is_empty() {
            "unclassified".to_string()
        } else {
            tags.iter().map(|t| t.label()).collect::<Vec<_>>().join("+")
        };
        println!(
            "  {:<20} mu* = {:<12.6} sigma = {:<12.6} {label}",
            space.params()[*dim].name,
            stats.mu_star[*dim],
            stats.sigma[*dim]
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_asdim(common: &CommonArgs, samples: usize, bootstrap: usize) -> Result<()> {
    let cfg = load(common)?;
    let space = resolve_space(&cfg)?;
    let handle = build_simulator(&cfg, &space)?;

    let unit = latin_hypercube_unit(samples, space.dimension(), derive_seed(cfg.seed, 0x31))?;
    let thetas: Vec<DesignPoint> = unit.iter().map(|u| unscale(u, &space)).collect::<Result<_>>()?;
    let losses = evaluate_all(handle.sim.as_ref(), &thetas, cfg.seed, cfg.bo.workers)?;

    let subspace = fit_active_subspace(&unit, &losses, GradientMethod::GlobalLinear)?;
    let intervals = bootstrap_eigenvalues(
        &unit,
        &losses,
        GradientMethod::GlobalLinear,
        bootstrap,
        derive_seed(cfg.seed, 0x32),
    )?;
    let projected: Vec<Vec<f64>> = unit.iter().map(|u| project(&subspace, u)).collect::<Result<_>>()?;

    let eig_path = cfg.out_dir.join("eigvals.csv");
    let proj_path = cfg.out_dir.join("projection.csv");
    write_eigvals_csv(&eig_path, &subspace, &intervals)?;
    write_projection_csv(&proj_path, &projected, &losses)?;
    println!(
        "active dimension q = {}{} (gap = {:.2} decades)",
        subspace.q,
        if subspace.low_confidence { " [low confidence]" } else { "" },
        subspace.gap_log10
    );
    println!("wrote {} and {}", eig_path.display(), proj_path.display());
    Ok(())
}

fn config_label(space_mode: SpaceMode, gp_mean: GpMeanMode) -> String {
    let s = match space_mode {
        SpaceMode::Original => "orig",
        SpaceMode::ActiveSubspace => "as",
        SpaceMode::Neural => "nn",
    };
    let m = match gp_mean {
        GpMeanMode::Zero => "zero",
        GpMeanMode::Network => "nn",
    };
    format!("{s}/{m}")
}

fn cmd_calibrate(
    common: &CommonArgs,
    space_flag: Option<&str>,
    mean_flag: Option<&str>,
    iters: Option<usize>,
    batch: Option<usize>,
) -> Result<()> {
    let mut cfg = load(common)?;
    if let Some(s) = space_flag {
        cfg.bo.space_mode = parse_space_mode(s)?;
    }
    if let Some(m) = mean_flag {
        cfg.bo.gp_mean = parse_gp_mean(m)?;
    }
    if let Some(i) = iters {
        cfg.bo.iterations = i;
    }
    if let Some(b) = batch {
        cfg.bo.batch_size = b;
    }

    let space = resolve_space(&cfg)?;
    let handle = build_simulator(&cfg, &space)?;
    let state = run_calibration(handle.sim.as_ref(), &space, &cfg.bo)?;

    write_trace_csv(&cfg.out_dir.join("trace.csv"), &space, &state)?;
    write_evaluations_csv(&cfg.out_dir.join("evaluations.csv"), &space, &state)?;
    let summary = SummaryRow {
        configuration: config_label(cfg.bo.space_mode, cfg.bo.gp_mean),
        best_value: state.incumbent.1,
        improvement_pct: 100.0 * state.improvement_fraction(),
        iteration_found: state.incumbent_iteration,
    };
    write_summary_csv(&cfg.out_dir.join("summary.csv"), &[summary])?;

    if handle.has_series {
        write_qq_data(&cfg, &space, handle.sim.as_ref(), &state)?;
    }

    println!(
        "calibrate [{}]: best loss {} (initial {}, improvement {:.1}%, found at iteration {})",
        config_label(cfg.bo.space_mode, cfg.bo.gp_mean),
        state.incumbent.1,
        state.initial_best,
        100.0 * state.improvement_fraction(),
        state.incumbent_iteration
    );
    println!("wrote reports under {}", cfg.out_dir.display());
    Ok(())
}

/// Re-evaluate the incumbent and initial-best points with their original
/// seeds to recover the series behind the QQ comparison.
fn write_qq_data(cfg: &RunConfig, space: &ParameterSpace, sim: &dyn Simulator, state: &calib::optimizer::BOState) -> Result<()> {
    let observed = match &cfg.simulator {
        SimKind::Toy => generate_observed(&ToySimConfig::default())?,
        SimKind::External { observed, .. } => read_series_csv(observed)?,
        SimKind::Benchmark { .. } => return Ok(()),
    };
    let series_at = |target: f64| -> Result<OutputSeries> {
        let idx = state
            .evaluated
            .iter()
            .position(|e| e.loss == Some(target))
            .ok_or_else(|| CalibError::InvalidArgument("loss missing from evaluation log".into()))?;
        let out = sim.evaluate(&state.evaluated[idx].theta, derive_seed(cfg.seed, idx as u64))?;
        out.series
            .ok_or_else(|| CalibError::Simulator("simulator produced no series".into()))
    };
    let calibrated = series_at(state.incumbent.1)?;
    let initial = series_at(state.initial_best)?;
    write_qq_csv(&cfg.out_dir.join("qq.csv"), &observed, &calibrated, &initial)?;
    let _ = scale_to_unit(&state.incumbent.0, space)?; // sanity: incumbent in bounds
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Morris { common, trajectories } => cmd_morris(common, *trajectories),
        Command::Asdim { common, samples, bootstrap } => cmd_asdim(common, *samples, *bootstrap),
        Command::Calibrate { common, space, mean, iters, batch } => {
            cmd_calibrate(common, space.as_deref(), mean.as_deref(), *iters, *batch)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (CalibError::Config(_) | CalibError::InvalidArgument(_) | CalibError::InvalidSpace(_))) => {
            eprintln!("calib: configuration error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("calib: run failed: {e}");
            ExitCode::from(2)
        }
    }
}
