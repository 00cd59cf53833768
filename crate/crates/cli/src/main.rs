//! `risnet` command-line runner.
//!
//! Results go to `--out` as CSV files with provenance headers; a one-line JSON
//! summary is printed on stdout. Failures print one JSON line
//! `{"error":{"kind":..,"message":..}}` on stderr and exit with status 2.

use std::f64::consts::FRAC_PI_8;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use risnet::em_network::MatrixCache;
use risnet::experiments::{
    convergence_ao, run_angle_sweep, run_beampattern, run_calibration, run_convergence, write_angle_sweep,
    write_beampattern, write_convergence, BeamSettings, ConvergenceSettings, InterfererGrid, SweepSettings, Variant,
};
use risnet::optimizer::AoConfig;
use risnet::scenario::ScenarioConfig;
use risnet::{Error, Exec};

#[derive(Parser)]
#[command(name = "risnet", version, about = "CSI-free RIS optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rate-bound convergence curves over spacings and uncertainty radii.
    Convergence(ConvergenceArgs),
    /// Mean rate versus interferer angle for each variant.
    AngleSweep(SweepArgs),
    /// Received power versus transmitter angle for optimized surfaces.
    Beampattern(BeamArgs),
    /// Noise power for the configured SNR, pre- and post-combining.
    Calibrate(CalibrateArgs),
}

#[derive(Args)]
struct Common {
    /// Scenario TOML file; overrides --preset.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value = "paper-default")]
    preset: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Directory for cached RIS impedance matrices.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Run everything on the calling thread.
    #[arg(long)]
    sequential: bool,
    /// Also write whitespace-separated `.dat` files for gnuplot.
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Args)]
struct AoArgs {
    /// Trust radius ε.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Stop on a rate-bound plateau instead of the relative MSE change.
    #[arg(long)]
    plateau: bool,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    ao: AoArgs,
    /// Element spacings in wavelengths.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.25, 0.125])]
    dx: Vec<f64>,
    /// Uncertainty radii in metres.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1.0])]
    sigma: Vec<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    ao: AoArgs,
    #[arg(long, default_value_t = 0.25)]
    dx: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, value_delimiter = ',', default_value = "OPT-NoCSI,CT-NoCSI,OPT-CSI")]
    variants: Vec<String>,
    /// Monte Carlo trials per point.
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Realizations per point for OPT-CSI.
    #[arg(long, default_value_t = 20)]
    csi_realizations: usize,
    /// `caption` (12 angles from π/8) or `body` (iπ/32, i = 1..15).
    #[arg(long, default_value = "caption")]
    grid: String,
}

#[derive(Args)]
struct BeamArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    ao: AoArgs,
    #[arg(long, default_value_t = 0.25)]
    dx: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 2.0])]
    sigma: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "OPT-NoCSI,CT-NoCSI")]
    variants: Vec<String>,
    /// Probe grid step in degrees.
    #[arg(long, default_value_t = 0.5)]
    step: f64,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    dx: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
}

impl Common {
    fn scenario(&self) -> Result<ScenarioConfig, Error> {
        match &self.scenario {
            Some(p) => ScenarioConfig::load(p),
            None => ScenarioConfig::preset(&self.preset),
        }
    }

    fn cache(&self) -> Option<MatrixCache> {
        self.cache.as_ref().map(MatrixCache::new)
    }

    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::default()
        }
    }
}

impl AoArgs {
    fn apply(&self, mut ao: AoConfig, seed: u64) -> AoConfig {
        ao.seed = seed;
        if let Some(e) = self.epsilon {
            ao.epsilon = e;
        }
        if self.plateau {
            let capped = convergence_ao();
            ao.plateau = capped.plateau;
            ao.mse_tolerance = capped.mse_tolerance;
            ao.max_iterations = capped.max_iterations;
        }
        if let Some(n) = self.max_iterations {
            ao.max_iterations = n;
        }
        ao
    }
}

fn variants(names: &[String]) -> Result<Vec<Variant>, Error> {
    names.iter().map(|s| s.trim().parse()).collect()
}

fn paths(files: &[PathBuf]) -> Vec<String> {
    files.iter().map(|p| p.display().to_string()).collect()
}

fn convergence(a: ConvergenceArgs) -> Result<Value, Error> {
    let base = a.common.scenario()?;
    let settings = ConvergenceSettings { spacings: a.dx, sigmas: a.sigma, ao: a.ao.apply(convergence_ao(), a.common.seed) };
    let cells = run_convergence(&base, &settings, a.common.cache().as_ref(), a.common.exec())?;
    let files = write_convergence(&a.common.out, &cells, &settings)?;
    let summary: Vec<_> = cells
        .iter()
        .map(|c| {
            json!({
                "dx": c.dx,
                "sigma": c.sigma,
                "iterations": c.outcome.state.iteration,
                "stop": c.outcome.stop,
                "final_rate_bound": c.final_rate(),
            })
        })
        .collect();
    Ok(json!({ "command": "convergence", "cells": summary, "files": paths(&files) }))
}

fn angle_sweep(a: SweepArgs) -> Result<Value, Error> {
    let base = a.common.scenario()?;
    let grid: InterfererGrid = a.grid.parse()?;
    let settings = SweepSettings {
        dx: a.dx,
        sigma: a.sigma,
        intended: FRAC_PI_8,
        interferer_angles: grid.angles(),
        variants: variants(&a.variants)?,
        trials: a.trials,
        csi_realizations: a.csi_realizations,
        ao: a.ao.apply(AoConfig::default(), a.common.seed),
        seed: a.common.seed,
    };
    let result = run_angle_sweep(&base, &settings, a.common.cache().as_ref(), a.common.exec())?;
    let files = write_angle_sweep(&a.common.out, &result, &settings, a.common.gnuplot)?;
    Ok(json!({ "command": "angle-sweep", "rows": result.rows, "files": paths(&files) }))
}

fn beampattern(a: BeamArgs) -> Result<Value, Error> {
    let base = a.common.scenario()?;
    let variants = variants(&a.variants)?;
    let mut files = Vec::new();
    let mut summary = Vec::new();
    for &sigma in &a.sigma {
        let settings = BeamSettings {
            dx: a.dx,
            sigma,
            variants: variants.clone(),
            step_deg: a.step,
            ao: a.ao.apply(convergence_ao(), a.common.seed),
            ..BeamSettings::default()
        };
        let results = run_beampattern(&base, &settings, a.common.cache().as_ref(), a.common.exec())?;
        files.extend(write_beampattern(&a.common.out, &results, &settings, a.common.gnuplot)?);
        summary.extend(results.iter().map(|r| json!({ "variant": r.variant, "dx": r.dx, "sigma": r.sigma, "metrics": r.metrics })));
    }
    Ok(json!({ "command": "beampattern", "patterns": summary, "files": paths(&files) }))
}

fn calibrate(a: CalibrateArgs) -> Result<Value, Error> {
    let mut scenario = a.common.scenario()?;
    if let Some(dx) = a.dx {
        scenario = scenario.with_spacing_x(dx);
    }
    if let Some(s) = a.sigma {
        scenario = scenario.with_uncertainty(s);
    }
    let report = run_calibration(&scenario, a.common.seed, a.common.cache().as_ref(), a.common.exec())?;
    std::fs::create_dir_all(&a.common.out)?;
    let path = a.common.out.join("calibration.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report).expect("report serializes"))?;
    Ok(json!({ "command": "calibrate", "report": report, "files": [display(&path)] }))
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn fail(kind: &str, message: &str) -> ExitCode {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("Usage", e.to_string().lines().next().unwrap_or("invalid arguments")),
    };
    let result = match cli.command {
        Command::Convergence(a) => convergence(a),
        Command::AngleSweep(a) => angle_sweep(a),
        Command::Beampattern(a) => beampattern(a),
        Command::Calibrate(a) => calibrate(a),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}
