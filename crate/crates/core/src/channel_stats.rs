//! Prior correlation matrices from angular uncertainty, their low-rank
//! factorization, and Rician channel realizations.
//!
//! A correlation is `β ∫ f(φ) a(φ) a(φ)ᴴ dφ` over `[φ_i − Δ/2, φ_i + Δ/2]`
//! with the density `f(φ) = 4|φ − φ_i| / Δ²`. Gauss–Legendre nodes give a
//! factor `F` with `F Fᴴ` equal to the quadrature sum, which is then
//! compressed to its numerical rank.

use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::em_network::{ue_channel_with, CMatrix, CVector, ImpedanceNetwork};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{angular_spread, azimuth_of, element_positions, elevation_of, Point, ScenarioGeometry};
use crate::quadrature::GaussLegendre;

/// Relative eigenvalue threshold for the numerical rank.
pub const RANK_TOLERANCE: f64 = 1e-9;

const QUAD_START_ORDER: usize = 64;
const QUAD_MAX_ORDER: usize = 4096;
const QUAD_REL_CHANGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RicianSpec {
    /// RIS–UE Rician factor; `inf` removes the scattered part.
    pub k_ris_ue: f64,
    /// BS–RIS Rician factor.
    pub k_bs_ris: f64,
    /// Angular width of the RIS–UE scattered part (rad).
    pub nlos_spread: f64,
    /// Angular width of the BS–RIS scattered part seen at the RIS (rad).
    pub nlos_spread_bs: f64,
}

impl Default for RicianSpec {
    fn default() -> Self {
        Self {
            k_ris_ue: 10.0,
            k_bs_ris: 20.0,
            nlos_spread: std::f64::consts::FRAC_PI_6,
            nlos_spread_bs: std::f64::consts::FRAC_PI_6,
        }
    }
}

impl RicianSpec {
    /// Pure line of sight on both hops.
    pub fn los_only() -> Self {
        Self {
            k_ris_ue: f64::INFINITY,
            k_bs_ris: f64::INFINITY,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_ris_ue > 0.0 && self.k_bs_ris > 0.0) {
            return Err(Error::InvalidConfig("Rician factors must be positive".into()));
        }
        let pi = std::f64::consts::PI;
        for s in [self.nlos_spread, self.nlos_spread_bs] {
            if !(s > 0.0 && s < pi) {
                return Err(Error::InvalidConfig("scattering spreads must lie in (0, pi)".into()));
            }
        }
        Ok(())
    }
}

/// How the prior array response treats the element heights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseModel {
    /// `exp(jk x sinφ)`: element heights ignored.
    Planar,
    /// `exp(jk (x sinφ cosθ + z sinθ))` with the nominal elevation `θ` held fixed.
    #[default]
    Elevated,
}

/// Nominal direction and azimuth width of a prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularPrior {
    pub azimuth: f64,
    pub spread: f64,
    pub elevation: f64,
}

/// `exp(j (2π/λ) x_m sin φ)`.
pub fn steering_vector(xs: &[f64], phi: f64, wavelength: f64) -> CVector {
    let k = std::f64::consts::TAU / wavelength;
    CVector::from_iterator(xs.len(), xs.iter().map(|x| Complex64::from_polar(1.0, k * x * phi.sin())))
}

/// Response to a plane wave from azimuth `phi`, elevation `elevation`;
/// positions are relative to the phase reference.
pub fn array_response(positions: &[Point], phi: f64, elevation: f64, wavelength: f64) -> CVector {
    let k = std::f64::consts::TAU / wavelength;
    let (se, ce) = elevation.sin_cos();
    let sp = phi.sin();
    CVector::from_iterator(
        positions.len(),
        positions.iter().map(|p| Complex64::from_polar(1.0, k * (p.x * sp * ce + p.z * se))),
    )
}

/// Triangular density `4|φ − φ_i| / Δ²` on `[φ_i − Δ/2, φ_i + Δ/2]`.
pub fn prior_density(phi: f64, center: f64, spread: f64) -> f64 {
    if spread <= 0.0 || (phi - center).abs() > 0.5 * spread {
        return 0.0;
    }
    4.0 * (phi - center).abs() / (spread * spread)
}

/// Factor `F` with `F Fᴴ = β ∫ f a aᴴ`, unreduced, at a fixed order per half.
fn quadrature_factor(positions: &[Point], prior: &AngularPrior, beta: f64, wavelength: f64, order: usize) -> CMatrix {
    let m = positions.len();
    let gl = GaussLegendre::new(order);
    let half = 0.5 * prior.spread;
    let c = prior.azimuth;
    let mut cols = Vec::with_capacity(2 * order);
    for (a, b) in [(c - half, c), (c, c + half)] {
        for (phi, w) in gl.mapped(a, b) {
            let weight = (beta * w * prior_density(phi, c, prior.spread)).sqrt();
            cols.push(array_response(positions, phi, prior.elevation, wavelength) * Complex64::from(weight));
        }
    }
    let mut f = CMatrix::zeros(m, cols.len());
    for (j, col) in cols.iter().enumerate() {
        f.set_column(j, col);
    }
    f
}

/// Factor of the prior correlation; one column when the spread is zero.
pub fn correlation_factor(positions: &[Point], prior: &AngularPrior, beta: f64, wavelength: f64) -> CMatrix {
    if beta == 0.0 {
        return CMatrix::zeros(positions.len(), 0);
    }
    if prior.spread <= 0.0 {
        let a = array_response(positions, prior.azimuth, prior.elevation, wavelength) * Complex64::from(beta.sqrt());
        return CMatrix::from_columns(&[a]);
    }
    let mut order = QUAD_START_ORDER;
    let mut f = quadrature_factor(positions, prior, beta, wavelength, order);
    let mut r = &f * f.adjoint();
    while order < QUAD_MAX_ORDER {
        order *= 2;
        let f2 = quadrature_factor(positions, prior, beta, wavelength, order);
        let r2 = &f2 * f2.adjoint();
        let change = (&r2 - &r).norm() / r2.norm();
        f = f2;
        r = r2;
        if change < QUAD_REL_CHANGE {
            break;
        }
    }
    compress(&f).factor()
}

pub fn correlation(positions: &[Point], prior: &AngularPrior, beta: f64, wavelength: f64) -> CMatrix {
    let f = correlation_factor(positions, prior, beta, wavelength);
    &f * f.adjoint()
}

/// LOS prior for a horizontal line array with coordinates `xs`.
pub fn los_correlation(xs: &[f64], azimuth: f64, spread: f64, beta: f64, wavelength: f64) -> CMatrix {
    let positions: Vec<Point> = xs.iter().map(|&x| Point::new(x, 0.0, 0.0)).collect();
    let prior = AngularPrior { azimuth, spread, elevation: 0.0 };
    correlation(&positions, &prior, beta, wavelength)
}

/// Scattered-part correlation: the LOS prior with width `Δ_m` and gain `β/K`.
pub fn nlos_correlation(xs: &[f64], azimuth: f64, spread: f64, beta: f64, k_factor: f64, wavelength: f64) -> CMatrix {
    los_correlation(xs, azimuth, spread, beta / k_factor, wavelength)
}

/// Eigenpairs of `F Fᴴ` above the rank threshold, sorted descending.
#[derive(Debug, Clone)]
pub struct LowRank {
    pub u: CMatrix,
    pub d: DVector<f64>,
}

impl LowRank {
    pub fn rank(&self) -> usize {
        self.d.len()
    }

    /// `U D^½`.
    pub fn factor(&self) -> CMatrix {
        let mut f = self.u.clone();
        for (j, mut col) in f.column_iter_mut().enumerate() {
            col *= Complex64::from(self.d[j].sqrt());
        }
        f
    }
}

/// Eigen-decomposes `F Fᴴ` through whichever of `F Fᴴ` or `Fᴴ F` is smaller.
pub fn compress(f: &CMatrix) -> LowRank {
    let (m, n) = f.shape();
    if n == 0 {
        return LowRank { u: CMatrix::zeros(m, 0), d: DVector::zeros(0) };
    }
    let via_gram = n < m;
    let h = if via_gram { f.adjoint() * f } else { f * f.adjoint() };
    let h = (&h + h.adjoint()) * Complex64::from(0.5);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| top > 0.0 && eig.eigenvalues[i] > RANK_TOLERANCE * top)
        .collect();
    let d = DVector::from_iterator(keep.len(), keep.iter().map(|&i| eig.eigenvalues[i]));
    let mut u = CMatrix::zeros(m, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        if via_gram {
            let col = f * v / Complex64::from(d[j].sqrt());
            u.set_column(j, &col);
        } else {
            u.set_column(j, &v);
        }
    }
    LowRank { u, d }
}

#[derive(Debug, Clone)]
pub struct ChannelStatistics {
    /// Intended-signal correlation, including its transmit power.
    pub r_x: CMatrix,
    /// Interferer correlations, including their transmit powers.
    pub r_w: Vec<CMatrix>,
    pub u: CMatrix,
    pub d: DVector<f64>,
    pub rank: usize,
    /// `L` with `L Lᴴ = R_x + Σ R_w`, rank-truncated.
    pub total_factor: CMatrix,
    /// `L_w` with `L_w L_wᴴ = Σ R_w`.
    pub w_factor: CMatrix,
}

impl ChannelStatistics {
    /// Statistics from factors `R_x = X Xᴴ`, `R_w_i = W_i W_iᴴ`.
    pub fn from_factors(x: &CMatrix, w: &[CMatrix]) -> Self {
        let x_low = compress(x);
        let xf = x_low.factor();
        let w_f: Vec<CMatrix> = w.iter().map(|wi| compress(wi).factor()).collect();
        let m = x.nrows();
        let cols = xf.ncols() + w_f.iter().map(|f| f.ncols()).sum::<usize>();
        let mut all = CMatrix::zeros(m, cols);
        let mut c0 = 0;
        for f in std::iter::once(&xf).chain(&w_f) {
            all.view_mut((0, c0), (m, f.ncols())).copy_from(f);
            c0 += f.ncols();
        }
        let total_factor = compress(&all).factor();
        let w_factor = all.columns(xf.ncols(), cols - xf.ncols()).into_owned();
        Self {
            r_x: x * x.adjoint(),
            r_w: w.iter().map(|f| f * f.adjoint()).collect(),
            rank: x_low.rank(),
            u: x_low.u,
            d: x_low.d,
            total_factor,
            w_factor,
        }
    }

    pub fn n_ris(&self) -> usize {
        self.r_x.nrows()
    }

    /// `U D^½`.
    pub fn u_sqrt_d(&self) -> CMatrix {
        LowRank { u: self.u.clone(), d: self.d.clone() }.factor()
    }

    /// `R_x + Σ R_w`.
    pub fn r_total(&self) -> CMatrix {
        &self.total_factor * self.total_factor.adjoint()
    }
}

/// Positions of the RIS elements relative to its center.
pub fn ris_relative_positions(geometry: &ScenarioGeometry) -> Vec<Point> {
    element_positions(&geometry.ris)
        .into_iter()
        .map(|p| p - geometry.ris.center)
        .collect()
}

/// Prior direction of UE `i` seen from the RIS center.
pub fn ue_prior(geometry: &ScenarioGeometry, i: usize, response: ResponseModel) -> Result<AngularPrior> {
    let ue = &geometry.ues[i];
    let c = geometry.ris.center;
    Ok(AngularPrior {
        azimuth: azimuth_of(&ue.nominal_position, &c)?,
        spread: angular_spread(ue, &c)?,
        elevation: match response {
            ResponseModel::Planar => 0.0,
            ResponseModel::Elevated => elevation_of(&ue.nominal_position, &c),
        },
    })
}

/// Mean squared magnitude of the entries of a LOS channel.
pub fn mean_gain(t: &CVector) -> f64 {
    t.norm_squared() / t.len() as f64
}

fn scaled(f: CMatrix, power: f64) -> CMatrix {
    f * Complex64::from(power.sqrt())
}

/// Per-UE prior factors `σ_i² (R_i + W_i)` on the RIS.
pub fn ue_prior_factors(
    geometry: &ScenarioGeometry,
    rician: &RicianSpec,
    network: &ImpedanceNetwork,
    response: ResponseModel,
) -> Result<Vec<CMatrix>> {
    let pos = ris_relative_positions(geometry);
    let lambda = geometry.wavelength;
    (0..geometry.ues.len())
        .map(|i| {
            let prior = ue_prior(geometry, i, response)?;
            let beta = mean_gain(&network.t[i]);
            let los = correlation_factor(&pos, &prior, beta, lambda);
            let nlos_prior = AngularPrior { spread: rician.nlos_spread, ..prior };
            let nlos = correlation_factor(&pos, &nlos_prior, beta / rician.k_ris_ue, lambda);
            let mut f = CMatrix::zeros(pos.len(), los.ncols() + nlos.ncols());
            f.view_mut((0, 0), los.shape()).copy_from(&los);
            f.view_mut((0, los.ncols()), nlos.shape()).copy_from(&nlos);
            Ok(scaled(f, geometry.ues[i].tx_power))
        })
        .collect()
}

/// `R_x = σ1²(R_1 + W_1)`, `R_w_i = σ_i²(R_i + W_i)` and the factorization.
pub fn build_statistics(
    geometry: &ScenarioGeometry,
    rician: &RicianSpec,
    network: &ImpedanceNetwork,
    response: ResponseModel,
) -> Result<ChannelStatistics> {
    rician.validate()?;
    if network.t.len() != geometry.ues.len() {
        return Err(Error::Dimension("one nominal channel per UE is required".into()));
    }
    let f = ue_prior_factors(geometry, rician, network, response)?;
    Ok(ChannelStatistics::from_factors(&f[0], &f[1..]))
}

/// Rank-one statistics of known channels `t_i` with powers `σ_i²`.
pub fn known_channel_statistics(t: &[CVector], powers: &[f64]) -> ChannelStatistics {
    let f: Vec<CMatrix> = t
        .iter()
        .zip(powers)
        .map(|(ti, &p)| CMatrix::from_columns(&[ti * Complex64::from(p.sqrt())]))
        .collect();
    ChannelStatistics::from_factors(&f[0], &f[1..])
}

/// One channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub s: CMatrix,
    pub t: Vec<CVector>,
    pub positions: Vec<Point>,
}

/// Precomputed scattered-part factors for repeated sampling.
#[derive(Debug, Clone)]
pub struct RealizationModel {
    geometry: ScenarioGeometry,
    s_los: CMatrix,
    t_nominal: Vec<CVector>,
    ue_nlos: Vec<CMatrix>,
    bs_nlos: CMatrix,
}

impl RealizationModel {
    pub fn new(
        geometry: &ScenarioGeometry,
        rician: &RicianSpec,
        network: &ImpedanceNetwork,
        response: ResponseModel,
    ) -> Result<Self> {
        rician.validate()?;
        let pos = ris_relative_positions(geometry);
        let lambda = geometry.wavelength;
        let ue_nlos = (0..geometry.ues.len())
            .map(|i| {
                let prior = AngularPrior { spread: rician.nlos_spread, ..ue_prior(geometry, i, response)? };
                let beta = mean_gain(&network.t[i]) / rician.k_ris_ue;
                Ok(correlation_factor(&pos, &prior, beta, lambda))
            })
            .collect::<Result<Vec<_>>>()?;
        let c = geometry.ris.center;
        let bs_prior = AngularPrior {
            azimuth: azimuth_of(&geometry.bs.center, &c)?,
            spread: rician.nlos_spread_bs,
            elevation: match response {
                ResponseModel::Planar => 0.0,
                ResponseModel::Elevated => elevation_of(&geometry.bs.center, &c),
            },
        };
        let beta_bs = network.s.norm_squared() / (network.s.nrows() * network.s.ncols()) as f64;
        let bs_nlos = correlation_factor(&pos, &bs_prior, beta_bs / rician.k_bs_ris, lambda);
        Ok(Self {
            geometry: geometry.clone(),
            s_los: network.s.clone(),
            t_nominal: network.t.clone(),
            ue_nlos,
            bs_nlos,
        })
    }

    /// Nominal-channel scattered-part covariance of UE `i`.
    pub fn ue_nlos_covariance(&self, i: usize) -> CMatrix {
        &self.ue_nlos[i] * self.ue_nlos[i].adjoint()
    }

    /// Draws positions, then the UE scattered parts, then the BS rows.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Realization> {
        let positions: Vec<Point> = self.geometry.ues.iter().map(|u| u.sample_position(rng)).collect();
        let mut t = Vec::with_capacity(positions.len());
        for (i, p) in positions.iter().enumerate() {
            let los = if *p == self.geometry.ues[i].nominal_position {
                self.t_nominal[i].clone()
            } else {
                ue_channel_with(&self.geometry, *p, Exec::Sequential)?
            };
            t.push(los + complex_gaussian(&self.ue_nlos[i], rng));
        }
        let mut s = self.s_los.clone();
        for n in 0..s.nrows() {
            let w = complex_gaussian(&self.bs_nlos, rng);
            for m in 0..s.ncols() {
                s[(n, m)] += w[m];
            }
        }
        Ok(Realization { s, t, positions })
    }

    /// Draw number `trial` of the stream seeded by `seed`.
    pub fn sample_trial(&self, seed: u64, trial: u64) -> Result<Realization> {
        self.sample(&mut trial_rng(seed, trial))
    }
}

/// Independent generator for trial `trial` under `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// `L z` with `z ~ CN(0, I)`, so the covariance is `L Lᴴ`.
pub fn complex_gaussian<R: Rng + ?Sized>(factor: &CMatrix, rng: &mut R) -> CVector {
    let r = factor.ncols();
    if r == 0 {
        return CVector::zeros(factor.nrows());
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = CVector::from_iterator(
        r,
        (0..r).map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * s, im * s)
        }),
    );
    factor * z
}

pub fn sample_realization(
    geometry: &ScenarioGeometry,
    rician: &RicianSpec,
    network: &ImpedanceNetwork,
    response: ResponseModel,
    seed: u64,
) -> Result<Realization> {
    RealizationModel::new(geometry, rician, network, response)?.sample_trial(seed, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    const LAMBDA: f64 = 0.01;

    fn line(m: usize, d: f64) -> Vec<f64> {
        let h = (m as f64 - 1.0) / 2.0;
        (0..m).map(|i| (i as f64 - h) * d).collect()
    }

    fn riemann(xs: &[f64], c: f64, spread: f64, beta: f64, n: usize) -> CMatrix {
        let m = xs.len();
        let mut r = CMatrix::zeros(m, m);
        let h = spread / n as f64;
        for i in 0..n {
            let phi = c - 0.5 * spread + (i as f64 + 0.5) * h;
            let a = steering_vector(xs, phi, LAMBDA);
            r += &a * a.adjoint() * Complex64::from(beta * h * prior_density(phi, c, spread));
        }
        r
    }

    fn assert_hermitian_psd(r: &CMatrix) {
        assert!((r - r.adjoint()).camax() <= 1e-12 * r.camax());
        let e = SymmetricEigen::new(r.clone()).eigenvalues;
        let max = e.max();
        assert!(e.min() >= -1e-12 * max);
    }

    #[test]
    fn steering_anchors() {
        let a = steering_vector(&line(5, 0.3 * LAMBDA), 0.0, LAMBDA);
        assert!(a.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        let b = steering_vector(&[-LAMBDA / 4.0, LAMBDA / 4.0], FRAC_PI_2, LAMBDA);
        assert!((b[0] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        assert!((b[1] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert!((steering_vector(&line(9, 0.4 * LAMBDA), 0.7, LAMBDA).norm_squared() - 9.0).abs() < 1e-12);
        let pos: Vec<Point> = line(4, LAMBDA / 2.0).iter().map(|&x| Point::new(x, 0.0, 0.0)).collect();
        let c = array_response(&pos, 0.4, 0.0, LAMBDA);
        assert!((c - steering_vector(&line(4, LAMBDA / 2.0), 0.4, LAMBDA)).camax() < 1e-15);
    }

    #[test]
    fn density_integrates_to_one() {
        let gl = GaussLegendre::new(8);
        let (c, d) = (0.3, 0.2);
        let total: f64 = [(c - d / 2.0, c), (c, c + d / 2.0)]
            .iter()
            .flat_map(|&(a, b)| gl.mapped(a, b).map(|(x, w)| w * prior_density(x, c, d)).collect::<Vec<_>>())
            .sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_spread_is_rank_one() {
        let xs = line(8, LAMBDA / 2.0);
        let r = los_correlation(&xs, 0.4, 0.0, 2.5, LAMBDA);
        let a = steering_vector(&xs, 0.4, LAMBDA);
        assert!((&r - &a * a.adjoint() * Complex64::from(2.5)).camax() < 1e-12);
        assert!((r.trace().re - 2.5 * 8.0).abs() < 1e-12);
        assert_eq!(compress(&correlation_factor(
            &xs.iter().map(|&x| Point::new(x, 0.0, 0.0)).collect::<Vec<_>>(),
            &AngularPrior { azimuth: 0.4, spread: 0.0, elevation: 0.0 },
            2.5,
            LAMBDA,
        )).rank(), 1);
    }

    #[test]
    fn two_element_matches_riemann() {
        let xs = line(2, LAMBDA / 2.0);
        let r = los_correlation(&xs, 0.0, 0.2, 1.0, LAMBDA);
        let oracle = riemann(&xs, 0.0, 0.2, 1.0, 100_000);
        assert!(r[(0, 1)].norm() < 1.0);
        assert!((&r - &oracle).camax() < 1e-6);
    }

    #[test]
    fn random_cases_match_riemann() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs = line(12, 0.37 * LAMBDA);
        for _ in 0..10 {
            let c = rng.random_range(-1.2..1.2);
            let d = rng.random_range(0.01..0.6);
            let r = los_correlation(&xs, c, d, 1.0, LAMBDA);
            let oracle = riemann(&xs, c, d, 1.0, 100_000);
            assert!((&r - &oracle).norm() / oracle.norm() < 1e-6);
            assert_hermitian_psd(&r);
            assert!((r.trace().re - 12.0).abs() < 1e-8 * 12.0);
        }
    }

    #[test]
    fn nlos_is_scaled_los() {
        let xs = line(10, LAMBDA / 4.0);
        let w = nlos_correlation(&xs, 0.3, PI / 6.0, 2.0, 10.0, LAMBDA);
        let l = los_correlation(&xs, 0.3, PI / 6.0, 0.2, LAMBDA);
        assert!((&w - &l).camax() < 1e-14);
        assert!((w.trace().re - 2.0).abs() < 1e-8 * 2.0);
        assert_eq!(nlos_correlation(&xs, 0.3, 0.5, 2.0, f64::INFINITY, LAMBDA).camax(), 0.0);
    }

    #[test]
    fn invariant_to_full_turn() {
        let xs = line(6, LAMBDA / 2.0);
        let a = los_correlation(&xs, 0.5, 0.3, 1.0, LAMBDA);
        let b = los_correlation(&xs, 0.5 + TAU, 0.3, 1.0, LAMBDA);
        assert!((a - b).camax() < 1e-10);
    }

    #[test]
    fn rank_grows_with_spread() {
        let xs = line(32, LAMBDA / 2.0);
        let pos: Vec<Point> = xs.iter().map(|&x| Point::new(x, 0.0, 0.0)).collect();
        let mut prev = 0;
        for d in [0.0, 0.05, 0.1, 0.3, 0.8] {
            let prior = AngularPrior { azimuth: 0.4, spread: d, elevation: 0.0 };
            let r = compress(&correlation_factor(&pos, &prior, 1.0, LAMBDA)).rank();
            assert!(r >= prev, "rank {r} after {prev} at spread {d}");
            prev = r;
        }
        assert!(prev > 1);
    }

    #[test]
    fn factorization_reconstructs() {
        let xs = line(24, LAMBDA / 4.0);
        let pos: Vec<Point> = xs.iter().map(|&x| Point::new(x, 0.0, 0.0)).collect();
        let prior = AngularPrior { azimuth: 0.2, spread: 0.4, elevation: 0.0 };
        let f = correlation_factor(&pos, &prior, 3.0, LAMBDA);
        let stats = ChannelStatistics::from_factors(&f, &[]);
        let low = LowRank { u: stats.u.clone(), d: stats.d.clone() }.factor();
        let rebuilt = &low * low.adjoint();
        assert!((&rebuilt - &stats.r_x).norm() / stats.r_x.norm() < 1e-9);
        assert!(stats.d.as_slice().windows(2).all(|w| w[0] >= w[1]));
        let gram = stats.u.adjoint() * &stats.u;
        assert!((gram - CMatrix::identity(stats.rank, stats.rank)).camax() < 1e-6);

        let scaled = ChannelStatistics::from_factors(&(f * Complex64::from(2f64.sqrt())), &[]);
        assert_eq!(scaled.rank, stats.rank);
        assert!((&scaled.d - &stats.d * 2.0).camax() < 1e-9 * stats.d[0]);
        let overlap = (scaled.u.column(0).adjoint() * stats.u.column(0))[(0, 0)].norm();
        assert!((overlap - 1.0).abs() < 1e-9);
    }

    #[test]
    fn complex_gaussian_covariance() {
        let xs = line(8, LAMBDA / 2.0);
        let pos: Vec<Point> = xs.iter().map(|&x| Point::new(x, 0.0, 0.0)).collect();
        let prior = AngularPrior { azimuth: -0.3, spread: PI / 6.0, elevation: 0.0 };
        let f = correlation_factor(&pos, &prior, 0.7, LAMBDA);
        let w = &f * f.adjoint();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 10_000;
        let mut acc = CMatrix::zeros(8, 8);
        for _ in 0..n {
            let z = complex_gaussian(&f, &mut rng);
            acc += &z * z.adjoint();
        }
        acc /= Complex64::from(n as f64);
        assert!((acc - &w).norm() / w.norm() < 0.05);
    }

    #[test]
    fn trial_streams_are_reproducible_and_distinct() {
        let f = CMatrix::identity(3, 3);
        let a = complex_gaussian(&f, &mut trial_rng(5, 2));
        let b = complex_gaussian(&f, &mut trial_rng(5, 2));
        let c = complex_gaussian(&f, &mut trial_rng(5, 3));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rician_validation() {
        assert!(RicianSpec::default().validate().is_ok());
        assert!(RicianSpec::los_only().validate().is_ok());
        assert!(RicianSpec { k_ris_ue: 0.0, ..Default::default() }.validate().is_err());
        assert!(RicianSpec { nlos_spread: PI, ..Default::default() }.validate().is_err());
    }
}
