//! RIS reflection operators and the reactance/phase parameterization.
//!
//! A port terminated by the reactance `j b` has reflection coefficient
//! `Γ = (j b − Z0) / (j b + Z0) = e^{jφ}`, hence `b = Z0 cot(φ/2)` and
//! `φ = 2 atan2(Z0, b)` in `(0, 2π)`.

use std::f64::consts::TAU;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::em_network::{CMatrix, ImpedanceNetwork};
use crate::error::{Error, Result};

/// Default distance kept from the branch point `φ ≡ 0 (mod 2π)`.
pub const PHASE_GUARD: f64 = 1e-3;

/// Condition estimates above this are reported as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RisModel {
    /// Multiport network with mutual coupling and structural scattering.
    Mp,
    /// Diagonal unit-modulus reflection.
    Ct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RisState {
    pub b: DVector<f64>,
    pub phi: DVector<f64>,
}

impl RisState {
    pub fn from_phases(phi: &[f64], z0: f64) -> Result<Self> {
        Self::from_phases_with_guard(phi, z0, PHASE_GUARD)
    }

    pub fn from_phases_with_guard(phi: &[f64], z0: f64, guard: f64) -> Result<Self> {
        let b = phi
            .iter()
            .map(|&p| phase_to_reactance_with_guard(p, z0, guard))
            .collect::<Result<Vec<_>>>()?;
        let phi = phi.iter().map(|p| p.rem_euclid(TAU)).collect::<Vec<_>>();
        Ok(Self {
            b: DVector::from_vec(b),
            phi: DVector::from_vec(phi),
        })
    }

    pub fn from_reactances(b: &[f64], z0: f64) -> Result<Self> {
        let phi = b.iter().map(|&x| reactance_to_phase(x, z0)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            b: DVector::from_column_slice(b),
            phi: DVector::from_vec(phi),
        })
    }

    /// Uniform phases in `(guard, 2π − guard)`.
    pub fn random<R: Rng + ?Sized>(m: usize, z0: f64, guard: f64, rng: &mut R) -> Self {
        let phi: Vec<f64> = (0..m).map(|_| rng.random_range(guard..TAU - guard)).collect();
        Self::from_phases_with_guard(&phi, z0, guard).expect("sampled phases respect the guard")
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }
}

pub fn phase_to_reactance(phi: f64, z0: f64) -> Result<f64> {
    phase_to_reactance_with_guard(phi, z0, PHASE_GUARD)
}

pub fn phase_to_reactance_with_guard(phi: f64, z0: f64, guard: f64) -> Result<f64> {
    let p = phi.rem_euclid(TAU);
    if !p.is_finite() || p < guard || p > TAU - guard {
        return Err(Error::PhaseAtBranchPoint(phi));
    }
    Ok(z0 / (0.5 * p).tan())
}

pub fn reactance_to_phase(b: f64, z0: f64) -> Result<f64> {
    if !b.is_finite() {
        return Err(Error::NonFiniteReactance(b));
    }
    Ok(2.0 * z0.atan2(b))
}

/// `Γ(jb)` for a lossless termination referenced to `z0`.
pub fn reflection_coefficient(b: f64, z0: f64) -> Complex64 {
    let jb = Complex64::new(0.0, b);
    (jb - z0) / (jb + z0)
}

/// `db/dφ = −(b² + Z0²) / (2 Z0)`.
pub fn reactance_jacobian(b: f64, z0: f64) -> f64 {
    -(b * b + z0 * z0) / (2.0 * z0)
}

/// `(Z + r0 I + j diag(b))⁻¹` with a 1-norm condition check.
pub fn loaded_inverse(z: &CMatrix, r0: f64, b: &DVector<f64>) -> Result<CMatrix> {
    let m = z.nrows();
    if z.ncols() != m || b.len() != m {
        return Err(Error::Dimension(format!("Z is {}x{}, b has {}", m, z.ncols(), b.len())));
    }
    let mut x = z.clone();
    for i in 0..m {
        x[(i, i)] += Complex64::new(r0, b[i]);
    }
    let norm = one_norm(&x);
    let inv = crate::linalg::inverse(&x).ok_or(Error::SingularNetwork { condition: f64::INFINITY })?;
    let condition = norm * one_norm(&inv);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::SingularNetwork { condition });
    }
    Ok(inv)
}

pub(crate) fn one_norm(x: &CMatrix) -> f64 {
    x.column_iter()
        .map(|c| c.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `Δ_MP = −2 Y0 (Z_SS + r0 I + j diag(b))⁻¹`.
pub fn delta_mp(network: &ImpedanceNetwork, state: &RisState) -> Result<CMatrix> {
    Ok(loaded_inverse(&network.z_ss, network.r0, &state.b)? * Complex64::from(-2.0 * network.y0))
}

/// `Δ_CT = (Y0/Z0) diag(e^{jφ})`.
pub fn delta_ct(state: &RisState, y0: f64, z0: f64) -> CMatrix {
    let d = state.phi.map(|p| Complex64::from_polar(y0 / z0, p));
    CMatrix::from_diagonal(&d)
}

/// `Δ_iMP = diag(−2 Y0 / (Z0 + j b))`, the multiport model without coupling.
pub fn delta_imp(state: &RisState, y0: f64, z0: f64) -> CMatrix {
    let d = state.b.map(|b| Complex64::from(-2.0 * y0) / Complex64::new(z0, b));
    CMatrix::from_diagonal(&d)
}

/// Reflection operator of `model` on `network`.
pub fn delta(model: RisModel, network: &ImpedanceNetwork, state: &RisState) -> Result<CMatrix> {
    match model {
        RisModel::Mp => delta_mp(network, state),
        RisModel::Ct => Ok(delta_ct(state, network.y0, network.z0)),
    }
}
