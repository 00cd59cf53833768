//! Physical scenario: planar dipole arrays for the BS and the RIS, UE nominal
//! positions with circular uncertainty, and the derived angles.
//!
//! Angles follow the RIS frame: the RIS lies in the x–z plane and azimuth is
//! measured from the +y (broadside) axis towards +x, so a plane wave from
//! azimuth `phi` produces the element phase `k * x * sin(phi)`.

use nalgebra::Vector3;
use rand::Rng;

use crate::error::{Error, Result};

pub type Point = Vector3<f64>;

/// A z-oriented thin-wire dipole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dipole {
    pub center: Point,
    pub length: f64,
    pub radius: f64,
}

/// Uniform planar array of z-oriented dipoles in a plane parallel to x–z.
#[derive(Debug, Clone, PartialEq)]
pub struct ArraySpec {
    pub n_horizontal: usize,
    pub n_vertical: usize,
    pub spacing_x: f64,
    pub spacing_z: f64,
    pub center: Point,
    pub element_length: f64,
    pub element_radius: f64,
}

impl ArraySpec {
    pub fn len(&self) -> usize {
        self.n_horizontal * self.n_vertical
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_horizontal == 0 || self.n_vertical == 0 {
            return Err(Error::InvalidConfig("array must have at least one element per axis".into()));
        }
        let positive = [self.spacing_x, self.spacing_z, self.element_length, self.element_radius];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidConfig(
                "array spacings, element length and radius must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn dipoles(&self) -> Vec<Dipole> {
        element_positions(self)
            .into_iter()
            .map(|center| Dipole {
                center,
                length: self.element_length,
                radius: self.element_radius,
            })
            .collect()
    }
}

/// Element centers on the regular grid, horizontal index fastest.
pub fn element_positions(array: &ArraySpec) -> Vec<Point> {
    let hx = (array.n_horizontal as f64 - 1.0) / 2.0;
    let hz = (array.n_vertical as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(array.len());
    for iv in 0..array.n_vertical {
        for ih in 0..array.n_horizontal {
            let offset = Vector3::new(
                (ih as f64 - hx) * array.spacing_x,
                0.0,
                (iv as f64 - hz) * array.spacing_z,
            );
            out.push(array.center + offset);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeSpec {
    pub nominal_position: Point,
    /// Radius of the horizontal uncertainty disk (m).
    pub uncertainty_radius: f64,
    /// Transmit power (W).
    pub tx_power: f64,
}

impl UeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.uncertainty_radius >= 0.0 && self.uncertainty_radius.is_finite()) {
            return Err(Error::InvalidConfig("uncertainty radius must be >= 0".into()));
        }
        if !(self.tx_power > 0.0 && self.tx_power.is_finite()) {
            return Err(Error::InvalidConfig("UE transmit power must be positive".into()));
        }
        Ok(())
    }

    /// Draws a true position uniformly inside the horizontal uncertainty disk.
    pub fn sample_position<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let u: f64 = rng.random();
        let angle = std::f64::consts::TAU * rng.random::<f64>();
        let r = self.uncertainty_radius * u.sqrt();
        self.nominal_position + Vector3::new(r * angle.cos(), r * angle.sin(), 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioGeometry {
    pub bs: ArraySpec,
    pub ris: ArraySpec,
    /// Index 0 is the intended user, the rest interfere.
    pub ues: Vec<UeSpec>,
    pub wavelength: f64,
}

impl ScenarioGeometry {
    pub fn validate(&self) -> Result<()> {
        self.bs.validate()?;
        self.ris.validate()?;
        if self.ues.is_empty() {
            return Err(Error::InvalidConfig("at least one UE is required".into()));
        }
        for ue in &self.ues {
            ue.validate()?;
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::InvalidConfig("wavelength must be positive".into()));
        }
        Ok(())
    }

    pub fn ue_dipole(&self, position: Point) -> Dipole {
        Dipole {
            center: position,
            length: self.ris.element_length,
            radius: self.ris.element_radius,
        }
    }
}

pub fn horizontal_distance(point: &Point, reference: &Point) -> f64 {
    (point.x - reference.x).hypot(point.y - reference.y)
}

/// Azimuth of `point` seen from `reference`, measured from +y towards +x.
pub fn azimuth_of(point: &Point, reference: &Point) -> Result<f64> {
    let dx = point.x - reference.x;
    let dy = point.y - reference.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::DegenerateDirection);
    }
    Ok(dx.atan2(dy))
}

/// Elevation of `point` above the horizontal plane through `reference`.
pub fn elevation_of(point: &Point, reference: &Point) -> f64 {
    (point.z - reference.z).atan2(horizontal_distance(point, reference))
}

/// Full azimuth width subtended by the uncertainty disk, `2 asin(sigma / d)`,
/// with `d` the horizontal distance from `reference` to the nominal position.
pub fn angular_spread(ue: &UeSpec, reference: &Point) -> Result<f64> {
    let d = horizontal_distance(&ue.nominal_position, reference);
    let sigma = ue.uncertainty_radius;
    if sigma >= d {
        return Err(Error::UncertaintyTooLarge { sigma, distance: d });
    }
    Ok(2.0 * (sigma / d).asin())
}
