//! Experiment drivers: convergence traces, interferer-angle sweeps,
//! beampatterns and noise calibration, with CSV persistence.
//!
//! Every output file starts with `#`-prefixed provenance lines (scenario hash,
//! seed, configuration echo) followed by a CSV table, so gnuplot and most CSV
//! readers can consume it after skipping comments.

use std::f64::consts::{FRAC_PI_8, PI};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::channel_stats::{build_statistics, known_channel_statistics, ChannelStatistics, RealizationModel};
use crate::em_network::{bs_combiner, build_network_with, ue_channel_with, CVector, ImpedanceNetwork, MatrixCache};
use crate::error::{Error, Result};
use crate::evaluator::{
    beampattern, calibrate_noise, monte_carlo_rate, pattern_metrics, EvaluationReport,
    PatternMetrics, PatternPoint,
};
use crate::exec::Exec;
use crate::geometry::ScenarioGeometry;
use crate::optimizer::{ao_optimize, ao_optimize_from, AoConfig, AoOutcome, Plateau, Problem};
use crate::ris_response::{loaded_inverse, RisModel};
use crate::scenario::{ScenarioConfig, SnrReference};

/// Optimization variants compared in the sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Variant {
    #[serde(rename = "OPT-NoCSI")]
    OptNoCsi,
    #[serde(rename = "CT-NoCSI")]
    CtNoCsi,
    #[serde(rename = "OPT-CSI")]
    OptCsi,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::OptNoCsi, Variant::CtNoCsi, Variant::OptCsi];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::OptNoCsi => "OPT-NoCSI",
            Variant::CtNoCsi => "CT-NoCSI",
            Variant::OptCsi => "OPT-CSI",
        }
    }

    /// Model the optimizer is given.
    pub fn model(self) -> RisModel {
        match self {
            Variant::CtNoCsi => RisModel::Ct,
            _ => RisModel::Mp,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "opt-nocsi" => Ok(Variant::OptNoCsi),
            "ct-nocsi" => Ok(Variant::CtNoCsi),
            "opt-csi" => Ok(Variant::OptCsi),
            _ => Err(Error::InvalidConfig(format!("unknown variant `{s}`"))),
        }
    }
}

/// Interferer positions for the angle sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterfererGrid {
    /// Twelve angles `π/8 + (i−1)π/32`, `i = 1..12`.
    #[default]
    Caption,
    /// Fifteen angles `iπ/32`, `i = 1..15`.
    Body,
}

impl InterfererGrid {
    pub fn angles(self) -> Vec<f64> {
        match self {
            InterfererGrid::Caption => (0..12).map(|i| FRAC_PI_8 + i as f64 * PI / 32.0).collect(),
            InterfererGrid::Body => (1..=15).map(|i| i as f64 * PI / 32.0).collect(),
        }
    }
}

impl FromStr for InterfererGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "caption" => Ok(InterfererGrid::Caption),
            "body" => Ok(InterfererGrid::Body),
            _ => Err(Error::InvalidConfig(format!("unknown interferer grid `{s}`"))),
        }
    }
}

/// Everything derived from one scenario that the optimizer and evaluator need.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: ScenarioConfig,
    pub geometry: ScenarioGeometry,
    pub network: ImpedanceNetwork,
    pub stats: ChannelStatistics,
    pub v: CVector,
    pub noise: f64,
}

impl Setup {
    /// Builds the network, prior statistics, combiner and calibrated noise.
    pub fn new(config: ScenarioConfig, cache: Option<&MatrixCache>, calibration_seed: u64, exec: Exec) -> Result<Self> {
        config.validate()?;
        let geometry = config.geometry()?;
        let network = build_network_with(&geometry, config.network_params(), cache, exec)?;
        Self::assemble(config, geometry, network, calibration_seed, exec)
    }

    /// Same RIS and BS with different UEs; reuses `Z_SS` and `S`.
    pub fn retarget(&self, config: ScenarioConfig, calibration_seed: u64, exec: Exec) -> Result<Self> {
        config.validate()?;
        let geometry = config.geometry()?;
        if geometry.ris != self.geometry.ris || geometry.bs != self.geometry.bs || geometry.wavelength != self.geometry.wavelength {
            return Err(Error::InvalidConfig("retarget may only change the UEs".into()));
        }
        let t = geometry
            .ues
            .iter()
            .map(|ue| ue_channel_with(&geometry, ue.nominal_position, exec))
            .collect::<Result<Vec<_>>>()?;
        let network = ImpedanceNetwork { t, ..self.network.clone() };
        Self::assemble(config, geometry, network, calibration_seed, exec)
    }

    fn assemble(
        config: ScenarioConfig,
        geometry: ScenarioGeometry,
        network: ImpedanceNetwork,
        calibration_seed: u64,
        exec: Exec,
    ) -> Result<Self> {
        let stats = build_statistics(&geometry, &config.rician, &network, config.response)?;
        let v = bs_combiner(&geometry);
        let noise = calibrate_noise(
            &network,
            &geometry,
            config.snr_db,
            config.calibration_configs,
            calibration_seed,
            config.snr_reference,
            exec,
        )?;
        Ok(Self { config, geometry, network, stats, v, noise })
    }

    pub fn optimize(&self, ao: &AoConfig) -> Result<AoOutcome> {
        ao_optimize(&self.network, &self.stats, &self.v, self.noise, ao)
    }

    /// `R_b` of reactances `b` on the multiport model under the prior.
    pub fn rate_bound_mp(&self, b: &DVector<f64>) -> Result<f64> {
        let p = Problem::new(&self.network, &self.stats, &self.v, self.noise, RisModel::Mp)?;
        Ok(p.powers(&p.row(b)?).rate_bound())
    }

    pub fn realization_model(&self) -> Result<RealizationModel> {
        RealizationModel::new(&self.geometry, &self.config.rician, &self.network, self.config.response)
    }

    pub fn tx_powers(&self) -> Vec<f64> {
        self.geometry.ues.iter().map(|u| u.tx_power).collect()
    }
}

/// Header echoed at the top of every output file.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub scenario_hash: String,
    pub seed: u64,
    pub config: String,
}

impl Provenance {
    pub fn new(scenario: &ScenarioConfig, seed: u64, extra: &impl Serialize) -> Self {
        let config = serde_json::json!({ "scenario": scenario, "run": extra });
        Self { scenario_hash: scenario.hash(), seed, config: config.to_string() }
    }

    pub fn write_header<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# scenario_hash={}", self.scenario_hash)?;
        writeln!(w, "# seed={}", self.seed)?;
        writeln!(w, "# config={}", self.config)?;
        Ok(())
    }
}

/// Provenance lines followed by a CSV table of `rows`.
pub fn write_csv<S: Serialize>(path: &Path, provenance: &Provenance, rows: &[S]) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    provenance.write_header(&mut file)?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Whitespace-separated blocks separated by two blank lines (gnuplot `index`).
pub fn write_gnuplot(path: &Path, provenance: &Provenance, columns: &[&str], blocks: &[(String, Vec<Vec<f64>>)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    provenance.write_header(&mut w)?;
    writeln!(w, "# columns: {}", columns.join(" "))?;
    for (i, (name, rows)) in blocks.iter().enumerate() {
        if i > 0 {
            writeln!(w)?;
            writeln!(w)?;
        }
        writeln!(w, "# {name}")?;
        for r in rows {
            let line: Vec<String> = r.iter().map(|x| format!("{x:.10e}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn label(x: f64) -> String {
    let s = format!("{x}");
    s.replace('.', "p")
}

// ---------------------------------------------------------------------------
// Convergence

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceSettings {
    /// Element spacings `d_x` in wavelengths.
    pub spacings: Vec<f64>,
    /// Uncertainty radii in metres.
    pub sigmas: Vec<f64>,
    pub ao: AoConfig,
}

impl Default for ConvergenceSettings {
    fn default() -> Self {
        Self {
            spacings: vec![0.5, 0.25, 0.125],
            sigmas: vec![0.0, 1.0],
            ao: convergence_ao(),
        }
    }
}

/// AO settings for convergence curves: the relative-MSE rule is replaced by
/// the plateau rule, with a larger iteration cap.
pub fn convergence_ao() -> AoConfig {
    AoConfig { max_iterations: 8000, mse_tolerance: 0.0, plateau: Some(Plateau::default()), ..AoConfig::default() }
}

#[derive(Debug, Clone)]
pub struct ConvergenceCell {
    pub dx: f64,
    pub sigma: f64,
    pub scenario: ScenarioConfig,
    pub outcome: AoOutcome,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub rate_bound: f64,
}

impl ConvergenceCell {
    /// Accepted iterations only.
    pub fn curve(&self) -> Vec<CurvePoint> {
        self.outcome
            .trace
            .accepted()
            .map(|r| CurvePoint { iteration: r.iteration, rate_bound: r.rate_bound_bits })
            .collect()
    }

    pub fn final_rate(&self) -> f64 {
        self.outcome.state.rate_bound
    }

    pub fn accepted_mse(&self) -> Vec<f64> {
        self.outcome.trace.accepted().map(|r| r.mse).collect()
    }
}

pub fn run_convergence(
    base: &ScenarioConfig,
    settings: &ConvergenceSettings,
    cache: Option<&MatrixCache>,
    exec: Exec,
) -> Result<Vec<ConvergenceCell>> {
    if settings.spacings.is_empty() || settings.sigmas.is_empty() {
        return Err(Error::InvalidConfig("convergence needs at least one spacing and one sigma".into()));
    }
    settings.ao.validate()?;
    let mut cells = Vec::new();
    for &dx in &settings.spacings {
        let cfg = base.clone().with_spacing_x(dx);
        let first = Setup::new(cfg.clone().with_uncertainty(settings.sigmas[0]), cache, settings.ao.seed, exec)?;
        let runs = exec.try_map(settings.sigmas.len(), |k| {
            let scenario = cfg.clone().with_uncertainty(settings.sigmas[k]);
            let setup = if k == 0 { first.clone() } else { first.retarget(scenario.clone(), settings.ao.seed, Exec::Sequential)? };
            let outcome = setup.optimize(&settings.ao)?;
            Ok::<_, Error>(ConvergenceCell { dx, sigma: settings.sigmas[k], scenario, outcome })
        })?;
        cells.extend(runs);
    }
    Ok(cells)
}

pub fn write_convergence(dir: &Path, cells: &[ConvergenceCell], settings: &ConvergenceSettings) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for c in cells {
        let prov = Provenance::new(&c.scenario, settings.ao.seed, settings);
        let stem = format!("convergence_dx{}_sigma{}", label(c.dx), label(c.sigma));
        let path = dir.join(format!("{stem}.csv"));
        write_csv(&path, &prov, &c.curve())?;
        files.push(path);
        let trace = dir.join(format!("{stem}_trace.csv"));
        let mut f = BufWriter::new(File::create(&trace)?);
        prov.write_header(&mut f)?;
        c.outcome.trace.write_csv(f)?;
        files.push(trace);
    }
    Ok(files)
}

// ---------------------------------------------------------------------------
// Interferer-angle sweep

#[derive(Debug, Clone, Serialize)]
pub struct SweepSettings {
    pub dx: f64,
    pub sigma: f64,
    /// Intended UE angle (rad).
    pub intended: f64,
    /// Interferer angles (rad).
    pub interferer_angles: Vec<f64>,
    pub variants: Vec<Variant>,
    pub trials: usize,
    /// Realizations averaged for OPT-CSI, each with its own optimization.
    pub csi_realizations: usize,
    pub ao: AoConfig,
    pub seed: u64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            dx: 0.25,
            sigma: 0.5,
            intended: FRAC_PI_8,
            interferer_angles: InterfererGrid::Caption.angles(),
            variants: Variant::ALL.to_vec(),
            trials: 200,
            csi_realizations: 20,
            ao: AoConfig::default(),
            seed: 1,
        }
    }
}

impl SweepSettings {
    fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(Error::InvalidConfig("at least one variant is required".into()));
        }
        if self.interferer_angles.is_empty() {
            return Err(Error::InvalidConfig("at least one interferer angle is required".into()));
        }
        if self.trials == 0 || self.csi_realizations == 0 {
            return Err(Error::InvalidConfig("trials and csi_realizations must be at least 1".into()));
        }
        self.ao.validate()
    }

    fn mc_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }

    fn csi_seed(&self) -> u64 {
        self.seed.wrapping_add(2)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub interferer_index: usize,
    pub interferer_angle: f64,
    pub variant: Variant,
    pub mean_rate: f64,
    pub stderr: f64,
    /// `R_b` of the final reactances on the multiport model under the prior.
    pub rate_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleRow {
    pub interferer_index: usize,
    pub variant: Variant,
    pub trial: usize,
    pub rate: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub samples: Vec<SampleRow>,
    pub scenario: ScenarioConfig,
}

impl SweepResult {
    pub fn get(&self, index: usize, variant: Variant) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.interferer_index == index && r.variant == variant)
    }
}

struct VariantOutcome {
    report: EvaluationReport,
    rate_bound: f64,
    b: Option<DVector<f64>>,
}

fn evaluate_variant(setup: &Setup, variant: Variant, settings: &SweepSettings, warm: Option<&DVector<f64>>, exec: Exec) -> Result<VariantOutcome> {
    let model = setup.realization_model()?;
    match variant {
        Variant::OptNoCsi | Variant::CtNoCsi => {
            let out = setup.optimize(&AoConfig { model: variant.model(), ..settings.ao.clone() })?;
            let report = monte_carlo_rate(
                &model,
                &setup.network,
                &setup.geometry,
                &out.state.b,
                &setup.v,
                setup.noise,
                settings.trials,
                settings.mc_seed(),
                exec,
            )?;
            Ok(VariantOutcome { report, rate_bound: setup.rate_bound_mp(&out.state.b)?, b: Some(out.state.b) })
        }
        Variant::OptCsi => {
            let start = match warm {
                Some(b) => b.clone(),
                None => setup.optimize(&settings.ao)?.state.b,
            };
            let powers = setup.tx_powers();
            let net = &setup.network;
            let per = exec.try_map(settings.csi_realizations, |r| {
                let real = model.sample_trial(settings.csi_seed(), r as u64)?;
                let known = ImpedanceNetwork { s: real.s.clone(), t: real.t.clone(), ..net.clone() };
                let stats = known_channel_statistics(&real.t, &powers);
                let out = ao_optimize_from(&known, &stats, &setup.v, setup.noise, &settings.ao, &start)?;
                let delta = loaded_inverse(&net.z_ss, net.r0, &out.state.b)? * Complex64::from(-2.0 * net.y0);
                let sample = crate::evaluator::link_sample(&real, &delta, &setup.v, setup.noise, &powers);
                Ok::<_, Error>((sample, setup.rate_bound_mp(&out.state.b)?))
            })?;
            let samples: Vec<_> = per.iter().map(|p| p.0).collect();
            let rate_bound = per.iter().map(|p| p.1).sum::<f64>() / per.len() as f64;
            Ok(VariantOutcome { report: EvaluationReport::from_samples(&samples, settings.csi_seed()), rate_bound, b: None })
        }
    }
}

pub fn run_angle_sweep(
    base: &ScenarioConfig,
    settings: &SweepSettings,
    cache: Option<&MatrixCache>,
    exec: Exec,
) -> Result<SweepResult> {
    settings.validate()?;
    let scenario = base
        .clone()
        .with_spacing_x(settings.dx)
        .with_ue_angles(&[settings.intended, settings.interferer_angles[0]])
        .with_uncertainty(settings.sigma);
    let first = Setup::new(scenario.clone(), cache, settings.seed, exec)?;
    let cells = exec.try_map(settings.interferer_angles.len(), |i| {
        let cfg = scenario.clone().with_ue_angles(&[settings.intended, settings.interferer_angles[i]]).with_uncertainty(settings.sigma);
        let setup = if i == 0 { first.clone() } else { first.retarget(cfg, settings.seed, Exec::Sequential)? };
        let mut rows = Vec::new();
        let mut samples = Vec::new();
        let mut warm = None;
        for &variant in &settings.variants {
            let out = evaluate_variant(&setup, variant, settings, warm.as_ref(), Exec::Sequential)?;
            if variant == Variant::OptNoCsi {
                // OPT-CSI starts from the statistics-based solution.
                warm = out.b.clone();
            }
            rows.push(SweepRow {
                interferer_index: i + 1,
                interferer_angle: settings.interferer_angles[i],
                variant,
                mean_rate: out.report.mean_rate,
                stderr: out.report.stderr,
                rate_bound: out.rate_bound,
            });
            samples.extend(out.report.rate_samples.iter().enumerate().map(|(trial, &rate)| SampleRow {
                interferer_index: i + 1,
                variant,
                trial,
                rate,
            }));
        }
        Ok::<_, Error>((rows, samples))
    })?;
    let mut result = SweepResult { rows: Vec::new(), samples: Vec::new(), scenario };
    for (r, s) in cells {
        result.rows.extend(r);
        result.samples.extend(s);
    }
    Ok(result)
}

pub fn write_angle_sweep(dir: &Path, result: &SweepResult, settings: &SweepSettings, gnuplot: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let prov = Provenance::new(&result.scenario, settings.seed, settings);
    let stem = format!("angle_sweep_dx{}_sigma{}", label(settings.dx), label(settings.sigma));
    let main = dir.join(format!("{stem}.csv"));
    write_csv(&main, &prov, &result.rows)?;
    let samples = dir.join(format!("{stem}_samples.csv"));
    write_csv(&samples, &prov, &result.samples)?;
    let mut files = vec![main, samples];
    if gnuplot {
        let blocks: Vec<_> = settings
            .variants
            .iter()
            .map(|&v| {
                let rows = result
                    .rows
                    .iter()
                    .filter(|r| r.variant == v)
                    .map(|r| vec![r.interferer_index as f64, r.interferer_angle, r.mean_rate, r.stderr, r.rate_bound])
                    .collect();
                (v.to_string(), rows)
            })
            .collect();
        let path = dir.join(format!("{stem}.dat"));
        write_gnuplot(&path, &prov, &["interferer_index", "interferer_angle", "mean_rate", "stderr", "rate_bound"], &blocks)?;
        files.push(path);
    }
    Ok(files)
}

// ---------------------------------------------------------------------------
// Beampattern

#[derive(Debug, Clone, Serialize)]
pub struct BeamSettings {
    pub dx: f64,
    pub sigma: f64,
    pub intended_deg: f64,
    pub interferer_deg: f64,
    pub variants: Vec<Variant>,
    pub step_deg: f64,
    pub distance: f64,
    /// Half-width of the window around the interferer searched for the null.
    pub null_window_deg: f64,
    /// Defaults to the plateau stop; the 500-iteration budget leaves dense surfaces unconverged.
    pub ao: AoConfig,
}

impl Default for BeamSettings {
    fn default() -> Self {
        Self {
            dx: 0.25,
            sigma: 0.5,
            intended_deg: 22.5,
            interferer_deg: 45.0,
            variants: vec![Variant::OptNoCsi, Variant::CtNoCsi],
            step_deg: 0.5,
            distance: 10.0,
            null_window_deg: 1.0,
            ao: convergence_ao(),
        }
    }
}

impl BeamSettings {
    /// Probe grid from 0° to 90° inclusive.
    pub fn grid(&self) -> Vec<f64> {
        let n = (90.0 / self.step_deg).round() as usize;
        (0..=n).map(|i| i as f64 * self.step_deg).collect()
    }
}

#[derive(Debug, Clone)]
pub struct BeamResult {
    pub variant: Variant,
    pub dx: f64,
    pub sigma: f64,
    pub pattern: Vec<PatternPoint>,
    pub metrics: PatternMetrics,
    pub scenario: ScenarioConfig,
}

pub fn run_beampattern(
    base: &ScenarioConfig,
    settings: &BeamSettings,
    cache: Option<&MatrixCache>,
    exec: Exec,
) -> Result<Vec<BeamResult>> {
    if settings.variants.is_empty() || settings.variants.contains(&Variant::OptCsi) {
        return Err(Error::InvalidConfig("beampatterns take OPT-NoCSI and/or CT-NoCSI".into()));
    }
    if !(settings.step_deg > 0.0 && settings.step_deg <= 0.5) {
        return Err(Error::InvalidConfig("beampattern step must lie in (0, 0.5] degrees".into()));
    }
    settings.ao.validate()?;
    let scenario = base
        .clone()
        .with_spacing_x(settings.dx)
        .with_ue_angles(&[settings.intended_deg.to_radians(), settings.interferer_deg.to_radians()])
        .with_uncertainty(settings.sigma);
    let setup = Setup::new(scenario.clone(), cache, settings.ao.seed, exec)?;
    let grid = settings.grid();
    let tx = setup.geometry.ues[0].tx_power;
    settings
        .variants
        .iter()
        .map(|&variant| {
            let out = setup.optimize(&AoConfig { model: variant.model(), ..settings.ao.clone() })?;
            let pattern = beampattern(&setup.network, &setup.geometry, &out.state.b, &setup.v, &grid, settings.distance, tx, exec)?;
            let metrics = pattern_metrics(&pattern, settings.interferer_deg, settings.null_window_deg);
            Ok(BeamResult { variant, dx: settings.dx, sigma: settings.sigma, pattern, metrics, scenario: scenario.clone() })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
struct MetricsRow {
    variant: Variant,
    dx: f64,
    sigma: f64,
    peak_angle_deg: f64,
    peak_db: f64,
    null_depth_db: f64,
    beamwidth_deg: f64,
}

pub fn write_beampattern(dir: &Path, results: &[BeamResult], settings: &BeamSettings, gnuplot: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let Some(first) = results.first() else { return Ok(files) };
    let prov = Provenance::new(&first.scenario, settings.ao.seed, settings);
    for r in results {
        let path = dir.join(format!("beampattern_{}_dx{}_sigma{}.csv", r.variant, label(r.dx), label(r.sigma)));
        write_csv(&path, &prov, &r.pattern)?;
        files.push(path);
    }
    let summary: Vec<_> = results
        .iter()
        .map(|r| MetricsRow {
            variant: r.variant,
            dx: r.dx,
            sigma: r.sigma,
            peak_angle_deg: r.metrics.peak_angle_deg,
            peak_db: r.metrics.peak_db,
            null_depth_db: r.metrics.null_depth_db,
            beamwidth_deg: r.metrics.beamwidth_deg,
        })
        .collect();
    let path = dir.join(format!("beampattern_summary_dx{}_sigma{}.csv", label(settings.dx), label(settings.sigma)));
    write_csv(&path, &prov, &summary)?;
    files.push(path);
    if gnuplot {
        let blocks: Vec<_> = results
            .iter()
            .map(|r| (r.variant.to_string(), r.pattern.iter().map(|p| vec![p.angle_deg, p.power_db]).collect()))
            .collect();
        let path = dir.join(format!("beampattern_dx{}_sigma{}.dat", label(settings.dx), label(settings.sigma)));
        write_gnuplot(&path, &prov, &["angle_deg", "power_db"], &blocks)?;
        files.push(path);
    }
    Ok(files)
}

// ---------------------------------------------------------------------------
// Calibration

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub scenario_hash: String,
    pub snr_db: f64,
    pub configs: usize,
    pub seed: u64,
    pub reference: SnrReference,
    pub noise_power: f64,
    pub noise_pre_combining: f64,
    pub noise_post_combining: f64,
}

pub fn run_calibration(scenario: &ScenarioConfig, seed: u64, cache: Option<&MatrixCache>, exec: Exec) -> Result<CalibrationReport> {
    scenario.validate()?;
    let geometry = scenario.geometry()?;
    let network = build_network_with(&geometry, scenario.network_params(), cache, exec)?;
    let noise = |r| calibrate_noise(&network, &geometry, scenario.snr_db, scenario.calibration_configs, seed, r, exec);
    let pre = noise(SnrReference::PreCombining)?;
    let post = noise(SnrReference::PostCombining)?;
    Ok(CalibrationReport {
        scenario_hash: scenario.hash(),
        snr_db: scenario.snr_db,
        configs: scenario.calibration_configs,
        seed,
        reference: scenario.snr_reference,
        noise_power: match scenario.snr_reference {
            SnrReference::PreCombining => pre,
            SnrReference::PostCombining => post,
        },
        noise_pre_combining: pre,
        noise_post_combining: post,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let c = InterfererGrid::Caption.angles();
        assert_eq!(c.len(), 12);
        assert!((c[0] - FRAC_PI_8).abs() < 1e-15);
        assert!((c[4] - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        let b = InterfererGrid::Body.angles();
        assert_eq!(b.len(), 15);
        assert!((b[14] - 15.0 * PI / 32.0).abs() < 1e-15);
        let g = BeamSettings::default().grid();
        assert_eq!(g.len(), 181);
        assert_eq!(*g.last().unwrap(), 90.0);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
        assert!("nope".parse::<Variant>().is_err());
        assert_eq!(label(0.125), "0p125");
    }
}
