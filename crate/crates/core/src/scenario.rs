//! Scenario configuration: TOML-loadable parameters, the `paper-default`
//! preset, and conversion into the geometric and network inputs.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel_stats::{ResponseModel, RicianSpec};
use crate::em_network::{NetworkParams, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::geometry::{ArraySpec, Point, ScenarioGeometry, UeSpec};

/// Reference point of the SNR used for noise calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnrReference {
    /// Mean per-antenna SNR at the BS, before combining.
    #[default]
    PreCombining,
    /// SNR at the combiner output.
    PostCombining,
}

/// Planar array; lengths are in wavelengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub center: [f64; 3],
    /// Explicit column count; when absent it is `round(aperture / spacing_x)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_horizontal: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aperture_x: Option<f64>,
    pub n_vertical: usize,
    pub spacing_x: f64,
    pub spacing_z: f64,
}

impl ArrayConfig {
    pub fn columns(&self) -> Result<usize> {
        match (self.n_horizontal, self.aperture_x) {
            (Some(n), _) => Ok(n),
            (None, Some(w)) => {
                let n = (w / self.spacing_x).round();
                if !(n >= 1.0 && n.is_finite()) {
                    return Err(Error::InvalidConfig("aperture gives no columns".into()));
                }
                Ok(n as usize)
            }
            (None, None) => Err(Error::InvalidConfig("array needs n_horizontal or aperture_x".into())),
        }
    }
}

/// UE at `distance (cos angle, sin angle, 0)` in the horizontal plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeConfig {
    /// Position angle from the +x axis (rad).
    pub angle: f64,
    pub distance: f64,
    #[serde(default)]
    pub uncertainty: f64,
    #[serde(default = "default_tx_power_dbm")]
    pub tx_power_dbm: f64,
}

fn default_tx_power_dbm() -> f64 {
    20.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub frequency_hz: f64,
    pub ris: ArrayConfig,
    pub bs: ArrayConfig,
    /// Dipole length in wavelengths.
    pub element_length: f64,
    /// Wire radius in wavelengths.
    pub element_radius: f64,
    pub ues: Vec<UeConfig>,
    #[serde(default = "default_z0")]
    pub z0: f64,
    #[serde(default = "default_r0")]
    pub r0: f64,
    #[serde(default)]
    pub rician: RicianSpec,
    #[serde(default)]
    pub response: ResponseModel,
    #[serde(default = "default_snr_db")]
    pub snr_db: f64,
    #[serde(default)]
    pub snr_reference: SnrReference,
    #[serde(default = "default_calibration_configs")]
    pub calibration_configs: usize,
}

fn default_z0() -> f64 {
    50.0
}
fn default_r0() -> f64 {
    0.1
}
fn default_snr_db() -> f64 {
    -20.0
}
fn default_calibration_configs() -> usize {
    100
}

impl ScenarioConfig {
    /// 30 GHz, RIS at (0,0,3) with a 16λ-wide aperture and four rows at 3λ/4,
    /// BS 8×2 at (−7,7,2), UEs at 10 m with 20 dBm.
    pub fn paper_default() -> Self {
        Self {
            frequency_hz: 30e9,
            ris: ArrayConfig {
                center: [0.0, 0.0, 3.0],
                n_horizontal: None,
                aperture_x: Some(16.0),
                n_vertical: 4,
                spacing_x: 0.5,
                spacing_z: 0.75,
            },
            bs: ArrayConfig {
                center: [-7.0, 7.0, 2.0],
                n_horizontal: Some(8),
                aperture_x: None,
                n_vertical: 2,
                spacing_x: 0.5,
                spacing_z: 0.75,
            },
            element_length: 0.46,
            element_radius: 1.0 / 500.0,
            ues: [FRAC_PI_8, FRAC_PI_4, 3.0 * FRAC_PI_8]
                .iter()
                .map(|&angle| UeConfig { angle, distance: 10.0, uncertainty: 0.0, tx_power_dbm: 20.0 })
                .collect(),
            z0: default_z0(),
            r0: default_r0(),
            rician: RicianSpec::default(),
            response: ResponseModel::default(),
            snr_db: default_snr_db(),
            snr_reference: SnrReference::default(),
            calibration_configs: default_calibration_configs(),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper-default" => Ok(Self::paper_default()),
            other => Err(Error::InvalidConfig(format!("unknown preset `{other}`"))),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency_hz
    }

    pub fn with_spacing_x(mut self, wavelengths: f64) -> Self {
        self.ris.spacing_x = wavelengths;
        self
    }

    pub fn with_uncertainty(mut self, sigma: f64) -> Self {
        for ue in &mut self.ues {
            ue.uncertainty = sigma;
        }
        self
    }

    pub fn with_ue_angles(mut self, angles: &[f64]) -> Self {
        let template = self.ues.first().cloned().unwrap_or(UeConfig {
            angle: 0.0,
            distance: 10.0,
            uncertainty: 0.0,
            tx_power_dbm: 20.0,
        });
        self.ues = angles.iter().map(|&angle| UeConfig { angle, ..template.clone() }).collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return Err(Error::InvalidConfig("frequency must be positive".into()));
        }
        if !(self.z0 > 0.0 && self.r0 >= 0.0) {
            return Err(Error::InvalidConfig("z0 must be positive and r0 non-negative".into()));
        }
        if self.calibration_configs == 0 {
            return Err(Error::InvalidConfig("calibration needs at least one configuration".into()));
        }
        self.rician.validate()?;
        self.geometry()?.validate()
    }

    pub fn network_params(&self) -> NetworkParams {
        NetworkParams { z0: self.z0, r0: self.r0 }
    }

    fn array(&self, a: &ArrayConfig) -> Result<ArraySpec> {
        let l = self.wavelength();
        Ok(ArraySpec {
            n_horizontal: a.columns()?,
            n_vertical: a.n_vertical,
            spacing_x: a.spacing_x * l,
            spacing_z: a.spacing_z * l,
            center: Point::from(a.center),
            element_length: self.element_length * l,
            element_radius: self.element_radius * l,
        })
    }

    pub fn geometry(&self) -> Result<ScenarioGeometry> {
        let ues = self
            .ues
            .iter()
            .map(|u| UeSpec {
                nominal_position: Point::new(u.distance * u.angle.cos(), u.distance * u.angle.sin(), 0.0),
                uncertainty_radius: u.uncertainty,
                tx_power: dbm_to_watts(u.tx_power_dbm),
            })
            .collect();
        Ok(ScenarioGeometry {
            bs: self.array(&self.bs)?,
            ris: self.array(&self.ris)?,
            ues,
            wavelength: self.wavelength(),
        })
    }

    /// Canonical JSON of the configuration.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_dimensions() {
        let g = ScenarioConfig::paper_default().geometry().unwrap();
        assert_eq!(g.ris.len(), 128);
        assert_eq!(g.bs.len(), 16);
        assert!((g.wavelength - 0.00999308).abs() < 1e-7);
        assert!((g.ues[0].tx_power - 0.1).abs() < 1e-15);
        for (dx, m) in [(0.25, 256), (0.125, 512)] {
            let g = ScenarioConfig::paper_default().with_spacing_x(dx).geometry().unwrap();
            assert_eq!(g.ris.len(), m);
        }
        let g = ScenarioConfig::paper_default().with_spacing_x(0.3).geometry().unwrap();
        assert_eq!(g.ris.n_horizontal, 53);
    }

    #[test]
    fn toml_round_trip_and_hash() {
        let cfg = ScenarioConfig::paper_default().with_uncertainty(0.5);
        let back = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
        assert_ne!(cfg.hash(), ScenarioConfig::paper_default().hash());
        assert_eq!(cfg.hash().len(), 16);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ScenarioConfig::preset("nope").is_err());
        assert!(ScenarioConfig::from_toml("frequency_hz = 1").is_err());
        let mut cfg = ScenarioConfig::paper_default();
        cfg.ues.clear();
        assert!(cfg.validate().is_err());
    }
}
