//! Multiport impedance description of the BS–RIS–UE system.
//!
//! Mutual impedances between z-oriented thin-wire dipoles come from the
//! induced-EMF method with sinusoidal current distributions: the closed-form
//! near field of the transmitting dipole is integrated against the current of
//! the receiving dipole. The self impedance uses the wire radius as the
//! observation offset.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{element_positions, ArraySpec, Dipole, Point, ScenarioGeometry};
use crate::quadrature::{integrate_adaptive, Tolerance};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Free-space wave impedance (Ω).
pub const ETA0: f64 = 376.730_313_668;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone)]
pub struct ImpedanceNetwork {
    /// RIS self and mutual impedances (M×M, complex symmetric).
    pub z_ss: CMatrix,
    /// RIS→BS channel (N×M).
    pub s: CMatrix,
    /// UE→RIS channels at the nominal UE positions, one M-vector per UE.
    pub t: Vec<CVector>,
    pub z0: f64,
    pub r0: f64,
    pub y0: f64,
}

impl ImpedanceNetwork {
    pub fn n_ris(&self) -> usize {
        self.z_ss.nrows()
    }

    pub fn n_bs(&self) -> usize {
        self.s.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkParams {
    pub z0: f64,
    pub r0: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self { z0: 50.0, r0: 0.1 }
    }
}

impl NetworkParams {
    /// Reference admittance, taken as `1 / Z0`.
    pub fn y0(&self) -> f64 {
        1.0 / self.z0
    }
}

fn canonical_pair<'a>(a: &'a Dipole, b: &'a Dipole) -> (&'a Dipole, &'a Dipole) {
    let key = |d: &Dipole| [d.center.x, d.center.y, d.center.z, d.length, d.radius];
    let (ka, kb) = (key(a), key(b));
    let ord = ka
        .iter()
        .zip(&kb)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal);
    if ord.is_le() {
        (a, b)
    } else {
        (b, a)
    }
}

fn quad_tolerance() -> Tolerance {
    Tolerance {
        abs: 1e-12,
        rel: 1e-9,
        max_intervals: 4000,
    }
}

/// Mutual impedance `z_ab` (Ω) between two parallel z-oriented dipoles.
/// Passing the same dipole twice returns its self impedance.
pub fn mutual_impedance(a: &Dipole, b: &Dipole, wavelength: f64) -> Result<Complex64> {
    let (tx, rx) = canonical_pair(a, b);
    let k = std::f64::consts::TAU / wavelength;
    let ha = tx.length / 2.0;
    let hb = rx.length / 2.0;
    let (sa, sb) = ((k * ha).sin(), (k * hb).sin());
    if sa.abs() < 1e-9 {
        return Err(Error::ResonantLength(tx.length));
    }
    if sb.abs() < 1e-9 {
        return Err(Error::ResonantLength(rx.length));
    }

    let same = tx == rx;
    let rho_axes = (rx.center.x - tx.center.x).hypot(rx.center.y - tx.center.y);
    let dz = rx.center.z - tx.center.z;
    let overlaps_vertically = dz.abs() < ha + hb;
    if !same && rho_axes < tx.radius + rx.radius && overlaps_vertically {
        return Err(Error::GeometryOverlap {
            a: [a.center.x, a.center.y, a.center.z],
            b: [b.center.x, b.center.y, b.center.z],
        });
    }
    let rho = if same { rx.radius } else { rho_axes.max(rx.radius) };
    let rho2 = rho * rho;
    let cos_ka = (k * ha).cos();
    let green = |r: f64| Complex64::from_polar(1.0 / r, -k * r);

    // z measured from the transmitting dipole's center
    let integrand = |z: f64| {
        let current = (k * (hb - (z - dz).abs())).sin();
        let r1 = (rho2 + (z - ha) * (z - ha)).sqrt();
        let r2 = (rho2 + (z + ha) * (z + ha)).sqrt();
        let r0 = (rho2 + z * z).sqrt();
        (green(r1) + green(r2) - 2.0 * cos_ka * green(r0)) * current
    };

    let lo = dz - hb;
    let hi = dz + hb;
    let mut breaks = vec![lo, dz, hi];
    for p in [-ha, 0.0, ha] {
        if p > lo && p < hi {
            breaks.push(p);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let integral = integrate_adaptive(integrand, &breaks, quad_tolerance());
    let prefactor = Complex64::new(0.0, ETA0 / (4.0 * std::f64::consts::PI * sa * sb));
    Ok(prefactor * integral)
}

/// Self and mutual impedance matrix of the RIS. Identical elements on a
/// regular grid share one kernel evaluation per relative offset.
pub fn assemble_z_ss(ris: &ArraySpec, wavelength: f64) -> Result<CMatrix> {
    assemble_z_ss_with(ris, wavelength, Exec::default())
}

pub fn assemble_z_ss_with(ris: &ArraySpec, wavelength: f64, exec: Exec) -> Result<CMatrix> {
    ris.validate()?;
    let nh = ris.n_horizontal as i64;
    let nv = ris.n_vertical as i64;
    // canonical offsets (di, dj) with (dj > 0) or (dj == 0 && di >= 0)
    let mut offsets = Vec::new();
    for dj in 0..nv {
        for di in -(nh - 1)..nh {
            if dj > 0 || di >= 0 {
                offsets.push((di, dj));
            }
        }
    }
    let origin = Dipole {
        center: ris.center,
        length: ris.element_length,
        radius: ris.element_radius,
    };
    let values = exec.try_map(offsets.len(), |idx| {
        let (di, dj) = offsets[idx];
        let other = Dipole {
            center: ris.center + Point::new(di as f64 * ris.spacing_x, 0.0, dj as f64 * ris.spacing_z),
            ..origin
        };
        mutual_impedance(&origin, &other, wavelength)
    })?;
    let table: HashMap<(i64, i64), Complex64> = offsets.into_iter().zip(values).collect();
    let m = ris.len();
    let index = |p: usize| ((p % ris.n_horizontal) as i64, (p / ris.n_horizontal) as i64);
    Ok(CMatrix::from_fn(m, m, |p, q| {
        let (ip, jp) = index(p);
        let (iq, jq) = index(q);
        let (mut di, mut dj) = (iq - ip, jq - jp);
        if dj < 0 || (dj == 0 && di < 0) {
            di = -di;
            dj = -dj;
        }
        table[&(di, dj)]
    }))
}

/// Impedance-parameter channel: entry `(q, p)` couples receiver `q` with
/// transmitter `p`.
pub fn assemble_channel(tx: &[Dipole], rx: &[Dipole], wavelength: f64) -> Result<CMatrix> {
    assemble_channel_with(tx, rx, wavelength, Exec::default())
}

pub fn assemble_channel_with(tx: &[Dipole], rx: &[Dipole], wavelength: f64, exec: Exec) -> Result<CMatrix> {
    let cols = tx.len();
    let entries = exec.try_map(rx.len() * cols, |idx| {
        mutual_impedance(&rx[idx / cols], &tx[idx % cols], wavelength)
    })?;
    Ok(CMatrix::from_row_iterator(rx.len(), cols, entries))
}

/// LOS channel from a single UE dipole at `position` to every RIS element.
pub fn ue_channel(geometry: &ScenarioGeometry, position: Point) -> Result<CVector> {
    ue_channel_with(geometry, position, Exec::default())
}

pub fn ue_channel_with(geometry: &ScenarioGeometry, position: Point, exec: Exec) -> Result<CVector> {
    let ue = geometry.ue_dipole(position);
    let ch = assemble_channel_with(&[ue], &geometry.ris.dipoles(), geometry.wavelength, exec)?;
    Ok(ch.column(0).into_owned())
}

/// BS combiner matched to a plane wave arriving from the RIS center:
/// `v_n = exp(j k (r_n - c_bs) · u)`, `u` the unit vector from the BS center
/// towards the RIS center. Every entry has unit modulus.
pub fn bs_combiner(geometry: &ScenarioGeometry) -> CVector {
    let k = std::f64::consts::TAU / geometry.wavelength;
    let dir = (geometry.ris.center - geometry.bs.center).normalize();
    let positions = element_positions(&geometry.bs);
    CVector::from_iterator(
        positions.len(),
        positions
            .iter()
            .map(|p| Complex64::from_polar(1.0, k * (p - geometry.bs.center).dot(&dir))),
    )
}

pub fn build_network(geometry: &ScenarioGeometry, params: NetworkParams) -> Result<ImpedanceNetwork> {
    build_network_with(geometry, params, None, Exec::default())
}

/// Assembles `Z_SS`, `S` and the nominal `t_i`. When `cache` is given, `Z_SS`
/// is read from / written to it.
pub fn build_network_with(
    geometry: &ScenarioGeometry,
    params: NetworkParams,
    cache: Option<&MatrixCache>,
    exec: Exec,
) -> Result<ImpedanceNetwork> {
    geometry.validate()?;
    let z_ss = match cache {
        Some(c) => c.get_or_compute(&ris_hash(&geometry.ris, geometry.wavelength), || {
            assemble_z_ss_with(&geometry.ris, geometry.wavelength, exec)
        })?,
        None => assemble_z_ss_with(&geometry.ris, geometry.wavelength, exec)?,
    };
    let s = assemble_channel_with(
        &geometry.ris.dipoles(),
        &geometry.bs.dipoles(),
        geometry.wavelength,
        exec,
    )?;
    let t = geometry
        .ues
        .iter()
        .map(|ue| ue_channel_with(geometry, ue.nominal_position, exec))
        .collect::<Result<Vec<_>>>()?;
    Ok(ImpedanceNetwork {
        z_ss,
        s,
        t,
        z0: params.z0,
        r0: params.r0,
        y0: params.y0(),
    })
}

/// Stable key of the RIS geometry for the `Z_SS` cache.
pub fn ris_hash(ris: &ArraySpec, wavelength: f64) -> String {
    let mut h = Sha256::new();
    for v in [ris.n_horizontal as f64, ris.n_vertical as f64, ris.spacing_x, ris.spacing_z] {
        h.update(v.to_le_bytes());
    }
    for v in [ris.element_length, ris.element_radius, wavelength] {
        h.update(v.to_le_bytes());
    }
    let digest = h.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Directory-backed binary cache of complex matrices. File layout:
/// `rows: u64 LE`, `cols: u64 LE`, then row-major `(re: f64 LE, im: f64 LE)`.
#[derive(Debug, Clone)]
pub struct MatrixCache {
    dir: PathBuf,
}

impl MatrixCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.zmat"))
    }

    pub fn get_or_compute<F>(&self, key: &str, compute: F) -> Result<CMatrix>
    where
        F: FnOnce() -> Result<CMatrix>,
    {
        let path = self.path_for(key);
        if path.exists() {
            return read_matrix(&path);
        }
        let m = compute()?;
        std::fs::create_dir_all(&self.dir)?;
        write_matrix(&path, &m)?;
        Ok(m)
    }
}

pub fn write_matrix(path: &Path, m: &CMatrix) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + 16 * m.len());
    buf.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            buf.extend_from_slice(&m[(i, j)].re.to_le_bytes());
            buf.extend_from_slice(&m[(i, j)].im.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<CMatrix> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let word = |i: usize| -> [u8; 8] { bytes[8 * i..8 * i + 8].try_into().expect("8 bytes") };
    if bytes.len() < 16 {
        return Err(Error::InvalidConfig(format!("truncated matrix file {}", path.display())));
    }
    let rows = u64::from_le_bytes(word(0)) as usize;
    let cols = u64::from_le_bytes(word(1)) as usize;
    if bytes.len() != 16 + 16 * rows * cols {
        return Err(Error::InvalidConfig(format!("corrupt matrix file {}", path.display())));
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| {
        let base = 2 + 2 * (i * cols + j);
        Complex64::new(f64::from_le_bytes(word(base)), f64::from_le_bytes(word(base + 1)))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;

    const LAMBDA: f64 = 0.01;

    fn dipole(x: f64, y: f64, z: f64, len: f64) -> Dipole {
        Dipole {
            center: Point::new(x, y, z),
            length: len,
            radius: LAMBDA / 500.0,
        }
    }

    /// Reaction (double integral) form of the induced-EMF impedance,
    /// evaluated by brute-force composite Gauss–Legendre on both wires.
    fn reaction_oracle(a: &Dipole, b: &Dipole, panels: usize) -> Complex64 {
        let k = std::f64::consts::TAU / LAMBDA;
        let (ha, hb) = (a.length / 2.0, b.length / 2.0);
        let rho = {
            let r = (a.center.x - b.center.x).hypot(a.center.y - b.center.y);
            if a == b { a.radius } else { r.max(a.radius) }
        };
        let gl = GaussLegendre::new(8);
        let nodes = |c: f64, h: f64| -> Vec<(f64, f64)> {
            let w = 2.0 * h / panels as f64;
            (0..panels)
                .flat_map(|p| {
                    let lo = c - h + p as f64 * w;
                    gl.mapped(lo, lo + w).collect::<Vec<_>>()
                })
                .collect()
        };
        let na = nodes(a.center.z, ha);
        let nb = nodes(b.center.z, hb);
        let cur = |z: f64, c: f64, h: f64| (k * (h - (z - c).abs())).sin();
        let dcur = |z: f64, c: f64, h: f64| -k * (k * (h - (z - c).abs())).cos() * (z - c).signum();
        let mut acc = Complex64::new(0.0, 0.0);
        for &(za, wa) in &na {
            let (ia, da) = (cur(za, a.center.z, ha), dcur(za, a.center.z, ha));
            for &(zb, wb) in &nb {
                let r = (rho * rho + (za - zb).powi(2)).sqrt();
                let g = Complex64::from_polar(1.0 / r, -k * r);
                let kern = ia * cur(zb, b.center.z, hb) - da * dcur(zb, b.center.z, hb) / (k * k);
                acc += g * (kern * wa * wb);
            }
        }
        let pre = Complex64::new(0.0, k * ETA0 / (4.0 * std::f64::consts::PI));
        pre * acc / ((k * ha).sin() * (k * hb).sin())
    }

    #[test]
    fn half_wave_self_impedance() {
        let d = dipole(0.0, 0.0, 0.0, 0.5 * LAMBDA);
        let z = mutual_impedance(&d, &d, LAMBDA).unwrap();
        assert!((z.re - 73.1).abs() < 1.0, "{z}");
        assert!(z.im > 30.0 && z.im < 55.0, "{z}");
        let oracle = reaction_oracle(&d, &d, 600);
        assert!((z - oracle).norm() / z.norm() < 2e-3, "{z} vs {oracle}");
    }

    #[test]
    fn side_by_side_half_wave() {
        let a = dipole(0.0, 0.0, 0.0, 0.5 * LAMBDA);
        let b = dipole(0.5 * LAMBDA, 0.0, 0.0, 0.5 * LAMBDA);
        let z = mutual_impedance(&a, &b, LAMBDA).unwrap();
        assert!(z.re < 0.0, "{z}");
        assert!(z.norm() > 10.0 && z.norm() < 100.0, "{z}");
        let oracle = reaction_oracle(&a, &b, 60);
        assert!((z - oracle).norm() / z.norm() < 1e-6, "{z} vs {oracle}");
    }

    #[test]
    fn staggered_pair_matches_oracle() {
        let a = dipole(0.0, 0.0, 0.0, 0.46 * LAMBDA);
        let b = dipole(0.3 * LAMBDA, 0.2 * LAMBDA, 0.75 * LAMBDA, 0.46 * LAMBDA);
        let z = mutual_impedance(&a, &b, LAMBDA).unwrap();
        let oracle = reaction_oracle(&a, &b, 60);
        assert!((z - oracle).norm() / z.norm() < 1e-6, "{z} vs {oracle}");
        // argument order does not matter
        assert_eq!(z, mutual_impedance(&b, &a, LAMBDA).unwrap());
    }

    #[test]
    fn overlap_is_rejected() {
        let a = dipole(0.0, 0.0, 0.0, 0.46 * LAMBDA);
        let b = dipole(LAMBDA / 1000.0, 0.0, 0.1 * LAMBDA, 0.46 * LAMBDA);
        assert!(matches!(mutual_impedance(&a, &b, LAMBDA), Err(Error::GeometryOverlap { .. })));
    }

    #[test]
    fn far_field_envelope_decays() {
        let a = dipole(0.0, 0.0, 0.0, 0.46 * LAMBDA);
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let d = 2.0 * LAMBDA + i as f64 * 0.25 * LAMBDA;
            let z = mutual_impedance(&a, &dipole(d, 0.0, 0.0, 0.46 * LAMBDA), LAMBDA).unwrap();
            assert!(z.norm() <= prev * (1.0 + 1e-9));
            prev = z.norm();
        }
        // distance doubling halves the magnitude
        let at = |d: f64| mutual_impedance(&a, &dipole(d, 0.0, 0.0, 0.46 * LAMBDA), LAMBDA).unwrap().norm();
        let ratio = at(10.0) / at(20.0);
        assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
    }

    fn ris(nh: usize, nv: usize, dx: f64) -> ArraySpec {
        ArraySpec {
            n_horizontal: nh,
            n_vertical: nv,
            spacing_x: dx,
            spacing_z: 0.75 * LAMBDA,
            center: Point::new(0.0, 0.0, 3.0),
            element_length: 0.46 * LAMBDA,
            element_radius: LAMBDA / 500.0,
        }
    }

    #[test]
    fn z_ss_structure() {
        let a = ris(6, 2, LAMBDA / 4.0);
        let z = assemble_z_ss(&a, LAMBDA).unwrap();
        assert_eq!(z, z.transpose());
        let d0 = z[(0, 0)];
        for i in 0..z.nrows() {
            assert_eq!(z[(i, i)], d0);
            assert!(z[(i, i)].re > 0.0);
        }
        // offset table equals the direct pairwise kernel
        let dip = a.dipoles();
        for (p, q) in [(0, 7), (3, 10), (11, 2)] {
            let direct = mutual_impedance(&dip[p], &dip[q], LAMBDA).unwrap();
            assert!((z[(p, q)] - direct).norm() < 1e-9 * direct.norm());
        }
        let single = assemble_z_ss(&ris(1, 1, LAMBDA), LAMBDA).unwrap();
        assert_eq!(single[(0, 0)], mutual_impedance(&dip[0], &dip[0], LAMBDA).unwrap());
    }

    #[test]
    fn coupling_grows_with_density() {
        let near = |dx: f64| assemble_z_ss(&ris(2, 1, dx), LAMBDA).unwrap()[(0, 1)].norm();
        assert!(near(LAMBDA / 4.0) > near(LAMBDA / 2.0));
        let z = assemble_z_ss(&ris(3, 1, 500.0 * LAMBDA), LAMBDA).unwrap();
        assert!(z[(0, 1)].norm() / z[(0, 0)].norm() < 1e-3);
    }

    #[test]
    fn channel_reciprocity_and_single_entry() {
        let a = ris(3, 2, LAMBDA / 2.0).dipoles();
        let mut b_spec = ris(2, 2, LAMBDA / 2.0);
        b_spec.center = Point::new(-7.0, 7.0, 2.0);
        let b = b_spec.dipoles();
        let ab = assemble_channel(&a, &b, LAMBDA).unwrap();
        let ba = assemble_channel(&b, &a, LAMBDA).unwrap();
        assert_eq!(ab, ba.transpose());
        let one = assemble_channel(&a[..1], &b[..1], LAMBDA).unwrap();
        assert_eq!(one[(0, 0)], mutual_impedance(&a[0], &b[0], LAMBDA).unwrap());
    }

    #[test]
    fn cache_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = MatrixCache::new(dir.path());
        let a = ris(3, 1, LAMBDA / 2.0);
        let first = cache.get_or_compute("k", || assemble_z_ss(&a, LAMBDA)).unwrap();
        let second = cache.get_or_compute("k", || panic!("should hit the cache")).unwrap();
        assert_eq!(first, second);
        let bytes = std::fs::metadata(cache.path_for("k")).unwrap().len();
        assert_eq!(bytes, 16 + 16 * 9);
    }
}
