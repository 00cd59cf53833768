//! Rate evaluation on realized channels, noise calibration and beampatterns.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel_stats::{trial_rng, Realization, RealizationModel};
use crate::em_network::{ue_channel_with, CMatrix, CVector, ImpedanceNetwork};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{Point, ScenarioGeometry};
use crate::optimizer::CRow;
use crate::ris_response::{loaded_inverse, RisState, PHASE_GUARD};
use crate::scenario::SnrReference;

/// Noise variance giving `target_snr_db` for the intended UE, averaged over
/// `n_configs` random RIS configurations of the multiport model.
pub fn calibrate_noise(
    network: &ImpedanceNetwork,
    geometry: &ScenarioGeometry,
    target_snr_db: f64,
    n_configs: usize,
    seed: u64,
    reference: SnrReference,
    exec: Exec,
) -> Result<f64> {
    if n_configs == 0 {
        return Err(Error::InvalidConfig("calibration needs at least one configuration".into()));
    }
    let m = network.n_ris();
    let power = geometry.ues[0].tx_power;
    let v = crate::em_network::bs_combiner(geometry);
    let t1 = &network.t[0];
    let samples = exec.try_map(n_configs, |c| -> Result<f64> {
        let state = RisState::random(m, network.z0, PHASE_GUARD, &mut trial_rng(seed, c as u64));
        let mut x = network.z_ss.clone();
        for i in 0..m {
            x[(i, i)] += Complex64::new(network.r0, state.b[i]);
        }
        let sol = crate::linalg::solve(&x, &CMatrix::from_columns(&[t1.clone()]))
            .ok_or(Error::SingularNetwork { condition: f64::INFINITY })?;
        let y = &network.s * sol * Complex64::from(-2.0 * network.y0);
        Ok(match reference {
            SnrReference::PreCombining => y.norm_squared() * power / y.len() as f64,
            SnrReference::PostCombining => v.dotc(&y).norm_sqr() * power / v.norm_squared(),
        })
    })?;
    let mean = samples.iter().sum::<f64>() / n_configs as f64;
    Ok(mean / 10f64.powf(target_snr_db / 10.0))
}

/// Per-UE received powers `|vᴴ Φ t_i|² σ_i²` and the resulting SINR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSample {
    pub signal: f64,
    pub interference: f64,
    pub noise: f64,
}

impl LinkSample {
    pub fn sinr(&self) -> f64 {
        self.signal / (self.interference + self.noise)
    }

    pub fn rate(&self) -> f64 {
        self.sinr().ln_1p() / std::f64::consts::LN_2
    }
}

/// Link quality on a realization for the reflection operator `delta`.
pub fn link_sample(realization: &Realization, delta: &CMatrix, v: &CVector, noise: f64, powers: &[f64]) -> LinkSample {
    let h: CRow = v.adjoint() * &realization.s * delta;
    let p = |i: usize| (&h * &realization.t[i])[(0, 0)].norm_sqr() * powers[i];
    LinkSample {
        signal: p(0),
        interference: (1..realization.t.len()).map(p).sum(),
        noise: noise * v.norm_squared(),
    }
}

/// `log2(1 + γ)` with exact channel knowledge.
pub fn instantaneous_rate(realization: &Realization, delta: &CMatrix, v: &CVector, noise: f64, powers: &[f64]) -> f64 {
    link_sample(realization, delta, v, noise, powers).rate()
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EvaluationReport {
    pub mean_rate: f64,
    pub stderr: f64,
    pub rate_samples: Vec<f64>,
    pub sinr_samples: Vec<f64>,
    /// Statistics-based bound for the evaluated configuration, when known.
    pub rate_bound: Option<f64>,
    pub mean_signal_power: f64,
    pub mean_interference_power: f64,
    pub noise_power: f64,
    pub n_trials: usize,
    pub seed: u64,
}

impl EvaluationReport {
    pub fn from_samples(samples: &[LinkSample], seed: u64) -> Self {
        let n = samples.len();
        let rate_samples: Vec<f64> = samples.iter().map(LinkSample::rate).collect();
        let mean_rate = rate_samples.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            rate_samples.iter().map(|r| (r - mean_rate).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean_rate,
            stderr: (var / n as f64).sqrt(),
            sinr_samples: samples.iter().map(LinkSample::sinr).collect(),
            rate_samples,
            rate_bound: None,
            mean_signal_power: samples.iter().map(|s| s.signal).sum::<f64>() / n as f64,
            mean_interference_power: samples.iter().map(|s| s.interference).sum::<f64>() / n as f64,
            noise_power: samples[0].noise,
            n_trials: n,
            seed,
        }
    }

    /// `log2(1 + mean γ)` over the same samples, an upper bound on `mean_rate`.
    pub fn jensen_bound(&self) -> f64 {
        let g = self.sinr_samples.iter().sum::<f64>() / self.n_trials as f64;
        g.log2_1p()
    }
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}

/// Mean rate of the multiport network with reactances `b` over `n_trials`
/// realizations; trial `i` uses stream `i` of `seed`.
pub fn monte_carlo_rate(
    model: &RealizationModel,
    network: &ImpedanceNetwork,
    geometry: &ScenarioGeometry,
    b: &DVector<f64>,
    v: &CVector,
    noise: f64,
    n_trials: usize,
    seed: u64,
    exec: Exec,
) -> Result<EvaluationReport> {
    if n_trials == 0 {
        return Err(Error::InvalidConfig("n_trials must be at least 1".into()));
    }
    let delta = loaded_inverse(&network.z_ss, network.r0, b)? * Complex64::from(-2.0 * network.y0);
    let powers: Vec<f64> = geometry.ues.iter().map(|u| u.tx_power).collect();
    let samples = exec.try_map(n_trials, |i| {
        let r = model.sample_trial(seed, i as u64)?;
        Ok::<_, Error>(link_sample(&r, &delta, v, noise, &powers))
    })?;
    Ok(EvaluationReport::from_samples(&samples, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PatternPoint {
    pub angle_deg: f64,
    pub power_db: f64,
}

/// Received power from a single transmitter of power `tx_power` at
/// `distance (cos θ, sin θ, 0)` for each `θ` in `angles_deg`.
pub fn beampattern(
    network: &ImpedanceNetwork,
    geometry: &ScenarioGeometry,
    b: &DVector<f64>,
    v: &CVector,
    angles_deg: &[f64],
    distance: f64,
    tx_power: f64,
    exec: Exec,
) -> Result<Vec<PatternPoint>> {
    let delta = loaded_inverse(&network.z_ss, network.r0, b)? * Complex64::from(-2.0 * network.y0);
    let h: CRow = v.adjoint() * &network.s * delta;
    exec.try_map(angles_deg.len(), |i| {
        let th = angles_deg[i].to_radians();
        let p = Point::new(distance * th.cos(), distance * th.sin(), 0.0);
        let t = ue_channel_with(geometry, p, Exec::Sequential)?;
        let power = (&h * t)[(0, 0)].norm_sqr() * tx_power;
        Ok(PatternPoint { angle_deg: angles_deg[i], power_db: 10.0 * power.log10() })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PatternMetrics {
    pub peak_angle_deg: f64,
    pub peak_db: f64,
    /// Peak minus the lowest level within the null window.
    pub null_depth_db: f64,
    /// Width of the contiguous region around the peak within 3 dB of it.
    pub beamwidth_deg: f64,
}

/// Peak, null depth near `null_angle_deg` (±`window_deg`) and −3 dB width.
pub fn pattern_metrics(pattern: &[PatternPoint], null_angle_deg: f64, window_deg: f64) -> PatternMetrics {
    let (ip, peak) = pattern
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.power_db.total_cmp(&b.1.power_db))
        .map(|(i, p)| (i, *p))
        .expect("non-empty pattern");
    let floor = pattern
        .iter()
        .filter(|p| (p.angle_deg - null_angle_deg).abs() <= window_deg + 1e-9)
        .map(|p| p.power_db)
        .fold(f64::INFINITY, f64::min);
    let level = peak.power_db - 3.0;
    let crossing = |a: &PatternPoint, b: &PatternPoint| {
        a.angle_deg + (level - a.power_db) / (b.power_db - a.power_db) * (b.angle_deg - a.angle_deg)
    };
    let mut lo = pattern[0].angle_deg;
    for i in (1..=ip).rev() {
        if pattern[i - 1].power_db < level {
            lo = crossing(&pattern[i - 1], &pattern[i]);
            break;
        }
    }
    let mut hi = pattern[pattern.len() - 1].angle_deg;
    for i in ip..pattern.len() - 1 {
        if pattern[i + 1].power_db < level {
            hi = crossing(&pattern[i], &pattern[i + 1]);
            break;
        }
    }
    PatternMetrics {
        peak_angle_deg: peak.angle_deg,
        peak_db: peak.power_db,
        null_depth_db: peak.power_db - floor,
        beamwidth_deg: hi - lo,
    }
}
