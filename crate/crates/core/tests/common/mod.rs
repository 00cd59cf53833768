#![allow(dead_code)]

use risnet::channel_stats::{build_statistics, ChannelStatistics, RicianSpec};
use risnet::em_network::{bs_combiner, build_network_with, CMatrix, CVector, ImpedanceNetwork};
use risnet::evaluator::calibrate_noise;
use risnet::geometry::ScenarioGeometry;
use risnet::scenario::{ArrayConfig, ScenarioConfig};
use risnet::Exec;

pub struct Toy {
    pub cfg: ScenarioConfig,
    pub geometry: ScenarioGeometry,
    pub network: ImpedanceNetwork,
    pub stats: ChannelStatistics,
    pub v: CVector,
    pub noise: f64,
}

/// Small RIS (`columns × rows` at λ/2 × 3λ/4) with a 2-element BS.
pub fn toy_config(columns: usize, rows: usize, angles: &[f64], sigma: f64, rician: RicianSpec) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::paper_default().with_ue_angles(angles).with_uncertainty(sigma);
    cfg.ris = ArrayConfig { n_horizontal: Some(columns), aperture_x: None, n_vertical: rows, ..cfg.ris };
    cfg.bs = ArrayConfig { n_horizontal: Some(2), n_vertical: 1, ..cfg.bs };
    cfg.rician = rician;
    cfg.calibration_configs = 20;
    cfg
}

pub fn toy(cfg: ScenarioConfig) -> Toy {
    let geometry = cfg.geometry().unwrap();
    let network = build_network_with(&geometry, cfg.network_params(), None, Exec::Sequential).unwrap();
    let stats = build_statistics(&geometry, &cfg.rician, &network, cfg.response).unwrap();
    let v = bs_combiner(&geometry);
    let noise = calibrate_noise(&network, &geometry, cfg.snr_db, cfg.calibration_configs, 1, cfg.snr_reference, Exec::Sequential)
        .unwrap();
    Toy { cfg, geometry, network, stats, v, noise }
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
