//! Standalone wrapper exposing the built-in toy simulator through the
//! external-executable CSV protocol: `toy-sim <input.csv> <output.csv>`.

use std::io::Write as _;
use std::process::ExitCode;

use calib::design_space::DesignPoint;
use calib::sim::{toy_parameter_space, toy_simulator, ToySimConfig};

fn run(input_path: &str, output_path: &str) -> Result<(), String> {
    let text = std::fs::read_to_string(input_path).map_err(|e| format!("reading {input_path}: {e}"))?;
    let mut lines = text.lines();
    if lines.next() != Some("name,value") {
        return Err("input must start with a name,value header".into());
    }
    let mut values = std::collections::HashMap::new();
    let mut seed: Option<u64> = None;
    for line in lines {
        let (name, value) = line
            .split_once(',')
            .ok_or_else(|| format!("malformed input row: {line}"))?;
        if name == "seed" {
            seed = Some(value.trim().parse().map_err(|e| format!("bad seed {value}: {e}"))?);
        } else {
            let v: f64 = value.trim().parse().map_err(|e| format!("bad value for {name}: {e}"))?;
            values.insert(name.to_string(), v);
        }
    }
    let seed = seed.ok_or("input is missing the seed row")?;

    let space = toy_parameter_space();
    let ordered: Vec<f64> = space
        .params()
        .iter()
        .map(|p| {
            values
                .get(&p.name)
                .copied()
                .ok_or_else(|| format!("input is missing parameter {}", p.name))
        })
        .collect::<Result<_, _>>()?;
    let theta = DesignPoint::new(ordered, &space).map_err(|e| e.to_string())?;

    let series = toy_simulator(&theta, seed, &ToySimConfig::default()).map_err(|e| e.to_string())?;
    let mut out = std::fs::File::create(output_path).map_err(|e| format!("creating {output_path}: {e}"))?;
    writeln!(out, "bin,value").map_err(|e| e.to_string())?;
    for (i, v) in series.values().iter().enumerate() {
        writeln!(out, "{i},{v}").map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if args.len() != 3 {
        eprintln!("usage: toy-sim <input.csv> <output.csv>");
        return ExitCode::from(2);
    }
    match run(&args[1], &args[2]) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("toy-sim: {e}");
            ExitCode::FAILURE
        }
    }
}
