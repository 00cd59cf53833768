//! Statistics-only alternating optimization of the RIS reactances.
//!
//! For a fixed single-output combiner `v` the LMMSE step has the closed form
//! `Λ = qᴴ / Q` with `q = vᴴ Φ U D^½` and
//! `Q = vᴴ Φ R Φᴴ v + σn² ‖v‖²`, `R = R_x + Σ R_w`. Its MSE is
//! `r − 1 + 1/(γ + 1)` where `γ` is the expected SINR.
//!
//! The reactance step linearizes the network inverse around the current `b`:
//! with `b' = b + F δ`, `F = diag(db/dφ)` and `A = (Z + r0 + jB)⁻¹`,
//! `vᴴ Φ(b') ≈ h0 + 2 Y0 (g ⊙ δ)ᵀ A` with `g = j (vᴴ S A) ⊙ F`. The MSE change
//! for fixed `Λ` is then the quadratic `δᵀ C δ − 2 δᵀ c`, minimized subject to
//! `‖diag(δ) F A‖_F ≤ ε`, the condition under which the dropped Neumann terms
//! stay of order `ε²`.

use std::io::Write;

use nalgebra::{DMatrix, DVector, RowDVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel_stats::ChannelStatistics;
use crate::em_network::{CMatrix, CVector, ImpedanceNetwork};
use crate::error::{Error, Result};
use crate::ris_response::{
    loaded_inverse, reactance_jacobian, reactance_to_phase, RisModel, RisState, MAX_CONDITION, PHASE_GUARD,
};

pub type CRow = RowDVector<Complex64>;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AoConfig {
    pub epsilon: f64,
    pub max_iterations: usize,
    pub mse_tolerance: f64,
    pub mu_bisection_tol: f64,
    pub model: RisModel,
    pub seed: u64,
    pub phase_guard: f64,
    pub max_halvings: usize,
    /// Extra stopping rule on the accepted `R_b` curve; off by default.
    #[serde(default)]
    pub plateau: Option<Plateau>,
}

/// Stop once `R_b` changed by less than `tolerance` (relative) over the last
/// `fraction` of the accepted iterations, after at least `min_iterations`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Plateau {
    pub fraction: f64,
    pub tolerance: f64,
    pub min_iterations: usize,
}

impl Default for Plateau {
    fn default() -> Self {
        Self { fraction: 0.1, tolerance: 1e-3, min_iterations: 50 }
    }
}

impl Plateau {
    /// Relative change of the last entry against the one `fraction` back.
    pub fn change(&self, curve: &[f64]) -> Option<f64> {
        let k = curve.len().checked_sub(1)?;
        let j = (k as f64 * (1.0 - self.fraction)).floor() as usize;
        (k > 0).then(|| (curve[k] - curve[j]).abs() / curve[k].abs())
    }

    pub fn reached(&self, curve: &[f64]) -> bool {
        curve.len() > self.min_iterations && self.change(curve).is_some_and(|c| c < self.tolerance)
    }
}

impl Default for AoConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            max_iterations: 500,
            mse_tolerance: 1e-6,
            mu_bisection_tol: 1e-12,
            model: RisModel::Mp,
            seed: 0,
            phase_guard: PHASE_GUARD,
            max_halvings: 20,
            plateau: None,
        }
    }
}

impl AoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig("trust radius must lie in (0, 1)".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(self.mse_tolerance >= 0.0 && self.mu_bisection_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if let Some(p) = self.plateau {
            if !(p.fraction > 0.0 && p.fraction < 1.0 && p.tolerance > 0.0) {
                return Err(Error::InvalidConfig("plateau needs fraction in (0, 1) and a positive tolerance".into()));
            }
        }
        Ok(())
    }
}

/// Signal, interference and noise after combining.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Powers {
    pub signal: f64,
    pub interference: f64,
    pub noise: f64,
}

impl Powers {
    pub fn sinr(&self) -> f64 {
        self.signal / (self.interference + self.noise)
    }

    /// `1/(γ + 1)`, the part of the LMMSE error above `r − 1`.
    pub fn excess(&self) -> f64 {
        (self.interference + self.noise) / (self.signal + self.interference + self.noise)
    }

    /// `log2(1 + γ)`.
    pub fn rate_bound(&self) -> f64 {
        self.sinr().ln_1p() / std::f64::consts::LN_2
    }
}

#[derive(Debug, Clone)]
pub struct AoState {
    pub b: DVector<f64>,
    pub lambda: CVector,
    pub mse: f64,
    pub expected_sinr: f64,
    pub rate_bound: f64,
    pub trust_radius: f64,
    pub iteration: usize,
    pub rank: usize,
}

impl AoState {
    pub fn ris_state(&self, z0: f64) -> Result<RisState> {
        RisState::from_reactances(self.b.as_slice(), z0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub mse: f64,
    pub rate_bound_bits: f64,
    pub trust_radius: f64,
    pub accepted: bool,
}

/// Iteration 0 is the initial point; rejected rows describe the discarded candidate.
#[derive(Debug, Clone, Default)]
pub struct OptimizerTrace {
    pub rows: Vec<TraceRow>,
}

impl OptimizerTrace {
    pub fn accepted(&self) -> impl Iterator<Item = &TraceRow> {
        self.rows.iter().filter(|r| r.accepted)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Tolerance,
    Plateau,
    MaxIterations,
    /// No decreasing step inside the smallest trust region.
    TrustRegionCollapsed,
    Stationary,
}

#[derive(Debug, Clone)]
pub struct AoOutcome {
    pub state: AoState,
    pub trace: OptimizerTrace,
    pub stop: StopReason,
}

/// `vᴴ Φ` for a dense effective channel.
fn combine(phi: &CMatrix, v: &CVector) -> CRow {
    v.adjoint() * phi
}

fn quad_form(h: &CRow, r: &CMatrix) -> f64 {
    (h * r * h.adjoint())[(0, 0)].re
}

fn noise_power(v: &CVector, noise: f64) -> f64 {
    noise * v.norm_squared()
}

/// `vᴴ Φ R_x Φᴴ v / (vᴴ (Φ Σ R_w Φᴴ + σn² I) v)`.
pub fn expected_sinr(phi: &CMatrix, stats: &ChannelStatistics, v: &CVector, noise: f64) -> f64 {
    powers_dense(phi, stats, v, noise).sinr()
}

pub fn powers_dense(phi: &CMatrix, stats: &ChannelStatistics, v: &CVector, noise: f64) -> Powers {
    let h = combine(phi, v);
    Powers {
        signal: quad_form(&h, &stats.r_x),
        interference: stats.r_w.iter().map(|r| quad_form(&h, r)).sum(),
        noise: noise_power(v, noise),
    }
}

/// `Λ = D^½ Uᴴ Φᴴ v / (vᴴ (Φ R Φᴴ + σn² I) v)`.
pub fn lmmse_filter(phi: &CMatrix, stats: &ChannelStatistics, v: &CVector, noise: f64) -> CVector {
    let h = combine(phi, v);
    let q = &h * stats.u_sqrt_d();
    let mut r = stats.r_x.clone();
    for w in &stats.r_w {
        r += w;
    }
    let big_q = quad_form(&h, &r) + noise_power(v, noise);
    q.adjoint() / Complex64::from(big_q)
}

/// `‖Λ‖² Q − 2 Re(q Λ) + r` for an arbitrary filter `Λ`.
pub fn mse_given_filter(lambda: &CVector, phi: &CMatrix, stats: &ChannelStatistics, v: &CVector, noise: f64) -> f64 {
    let h = combine(phi, v);
    let q = &h * stats.u_sqrt_d();
    let mut r = stats.r_x.clone();
    for w in &stats.r_w {
        r += w;
    }
    let big_q = quad_form(&h, &r) + noise_power(v, noise);
    lambda.norm_squared() * big_q - 2.0 * (q * lambda)[(0, 0)].re + stats.rank as f64
}

/// `r − 1 + 1/(γ + 1)`.
pub fn lmmse_mse(phi: &CMatrix, stats: &ChannelStatistics, v: &CVector, noise: f64) -> f64 {
    let p = powers_dense(phi, stats, v, noise);
    stats.rank as f64 - 1.0 + p.excess()
}

/// Rate bound `log2(1 + γ)` recovered from an LMMSE error.
pub fn rate_bound_from_mse(mse: f64, rank: usize) -> f64 {
    let excess = mse - rank as f64 + 1.0;
    (1.0 / excess).log2()
}

#[derive(Debug, Clone)]
pub struct QuadraticModel {
    /// Symmetric `C` in `ΔMSE ≈ δᵀ C δ − 2 δᵀ c`.
    pub curvature: DMatrix<f64>,
    /// The vector `c`.
    pub gradient: DVector<f64>,
    /// Trust-region weights; the constraint is `Σ δ_m² θ_m² ≤ ε²`.
    pub theta: DVector<f64>,
    /// Optional `W` with `C = W Wᵀ`, used for a thin eigensolve.
    pub curvature_factor: Option<DMatrix<f64>>,
}

impl QuadraticModel {
    pub fn dense(curvature: DMatrix<f64>, gradient: DVector<f64>, theta: DVector<f64>) -> Self {
        let curvature = (&curvature + curvature.transpose()) * 0.5;
        Self { curvature, gradient, theta, curvature_factor: None }
    }

    pub fn predicted_change(&self, delta: &DVector<f64>) -> f64 {
        (delta.transpose() * &self.curvature * delta)[(0, 0)] - 2.0 * delta.dot(&self.gradient)
    }

    /// `Σ δ_m² θ_m²`.
    pub fn constraint(&self, delta: &DVector<f64>) -> f64 {
        delta.component_mul(&self.theta).norm_squared()
    }
}

#[derive(Debug, Clone)]
pub struct DeltaSolution {
    pub delta: DVector<f64>,
    pub mu: f64,
}

/// Eigenpairs of `K = Ψ^{-½} C Ψ^{-½}`; `complete` is false when the basis
/// only spans the range of a low-rank `K`, the rest having eigenvalue 0.
struct Spectrum {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
    complete: bool,
}

fn spectrum(model: &QuadraticModel) -> Spectrum {
    let m = model.theta.len();
    let inv = model.theta.map(|t| 1.0 / t);
    if let Some(w) = &model.curvature_factor {
        if w.ncols() < m {
            let mut ws = w.clone();
            for (i, mut row) in ws.row_iter_mut().enumerate() {
                row *= inv[i];
            }
            let gram = ws.transpose() * &ws;
            let eig = SymmetricEigen::new((&gram + gram.transpose()) * 0.5);
            let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
            let keep: Vec<usize> = (0..eig.eigenvalues.len())
                .filter(|&i| top > 0.0 && eig.eigenvalues[i] > 1e-14 * top)
                .collect();
            let mut vectors = DMatrix::zeros(m, keep.len());
            let mut values = DVector::zeros(keep.len());
            for (j, &i) in keep.iter().enumerate() {
                let l = eig.eigenvalues[i];
                values[j] = l;
                vectors.set_column(j, &(&ws * eig.eigenvectors.column(i) / l.sqrt()));
            }
            return Spectrum { values, vectors, complete: false };
        }
    }
    let mut k = model.curvature.clone();
    for i in 0..m {
        for j in 0..m {
            k[(i, j)] *= inv[i] * inv[j];
        }
    }
    let eig = SymmetricEigen::new((&k + k.transpose()) * 0.5);
    Spectrum { values: eig.eigenvalues, vectors: eig.eigenvectors, complete: true }
}

/// Minimizes `δᵀ C δ − 2 δᵀ c` subject to `Σ δ_m² θ_m² ≤ ε²`.
///
/// Works in `y = Ψ^½ δ`, where the stationarity condition reads
/// `(K + μ I) y = Ψ^{-½} c`, and bisects `μ` on `‖y(μ)‖ = ε`.
pub fn solve_delta(model: &QuadraticModel, epsilon: f64, mu_tol: f64) -> Result<DeltaSolution> {
    let m = model.theta.len();
    if model.gradient.len() != m || model.curvature.shape() != (m, m) {
        return Err(Error::Dimension("quadratic model blocks disagree".into()));
    }
    if model.theta.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::DegenerateModel("trust-region weights must be positive"));
    }
    if model.gradient.iter().all(|g| *g == 0.0) {
        return Ok(DeltaSolution { delta: DVector::zeros(m), mu: 0.0 });
    }
    let gp = model.gradient.component_div(&model.theta);
    let sp = spectrum(model);
    let coef = sp.vectors.transpose() * &gp;
    let perp = if sp.complete { 0.0 } else { (&gp - &sp.vectors * &coef).norm_squared() };
    let lambda_min = {
        let lo = sp.values.iter().cloned().fold(f64::INFINITY, f64::min);
        if sp.complete { lo } else { lo.min(0.0) }
    };
    let norm2 = |mu: f64| -> f64 {
        let mut s: f64 = coef.iter().zip(sp.values.iter()).map(|(c, l)| (c / (l + mu)).powi(2)).sum();
        if perp > 0.0 {
            s += perp / (mu * mu);
        }
        s
    };
    let y_at = |mu: f64| -> DVector<f64> {
        let scaled = DVector::from_iterator(coef.len(), coef.iter().zip(sp.values.iter()).map(|(c, l)| c / (l + mu)));
        let mut y = &sp.vectors * scaled;
        if perp > 0.0 {
            y += (&gp - &sp.vectors * &coef) / mu;
        }
        y
    };
    let eps2 = epsilon * epsilon;
    let to_delta = |y: DVector<f64>| y.component_div(&model.theta);

    if lambda_min > 0.0 && norm2(0.0) <= eps2 {
        return Ok(DeltaSolution { delta: to_delta(y_at(0.0)), mu: 0.0 });
    }
    let mu_lo = (-lambda_min).max(0.0);
    // Hard case: no interior root because the gradient misses the lowest
    // eigenspace; step to the boundary along it.
    let lowest: Vec<usize> = (0..sp.values.len())
        .filter(|&i| sp.values[i] - lambda_min <= 1e-12 * sp.values.amax().max(1.0))
        .collect();
    let misses_lowest = perp == 0.0 && lowest.iter().all(|&i| coef[i].abs() <= 1e-14 * gp.norm());
    if misses_lowest {
        let mut y = DVector::from_iterator(
            coef.len(),
            (0..coef.len()).map(|i| if lowest.contains(&i) { 0.0 } else { coef[i] / (sp.values[i] + mu_lo) }),
        );
        y = &sp.vectors * y;
        let n2 = y.norm_squared();
        if n2 <= eps2 {
            if mu_lo > 0.0 {
                let u = sp.vectors.column(lowest[0]);
                y += u * (eps2 - n2).sqrt();
            }
            return Ok(DeltaSolution { delta: to_delta(y), mu: mu_lo });
        }
    }
    let mut hi = 1.0f64.max(2.0 * mu_lo);
    while norm2(hi) > eps2 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::DegenerateModel("no multiplier satisfies the trust region"));
        }
    }
    let mut lo = mu_lo;
    for _ in 0..400 {
        if hi - lo <= mu_tol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if norm2(mid) > eps2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(DeltaSolution { delta: to_delta(y_at(hi)), mu: hi })
}

/// Precomputed, `b`-independent pieces of one optimization problem.
pub struct Problem<'a> {
    pub model: RisModel,
    network: &'a ImpedanceNetwork,
    /// Network matrix without the loads: `Z_SS + r0 I` or `Z0 I`.
    base: CMatrix,
    /// `vᴴ S`.
    u: CRow,
    ud: CMatrix,
    w_factor: CMatrix,
    r_factor: CMatrix,
    noise: f64,
    rank: usize,
}

impl<'a> Problem<'a> {
    pub fn new(
        network: &'a ImpedanceNetwork,
        stats: &ChannelStatistics,
        v: &CVector,
        noise: f64,
        model: RisModel,
    ) -> Result<Self> {
        let m = network.n_ris();
        if stats.n_ris() != m || v.len() != network.n_bs() {
            return Err(Error::Dimension("network, statistics and combiner sizes disagree".into()));
        }
        if stats.rank == 0 {
            return Err(Error::DegenerateModel("intended-signal correlation is zero"));
        }
        let base = match model {
            RisModel::Mp => {
                let mut z = network.z_ss.clone();
                for i in 0..m {
                    z[(i, i)] += Complex64::from(network.r0);
                }
                z
            }
            RisModel::Ct => CMatrix::identity(m, m) * Complex64::from(network.z0),
        };
        Ok(Self {
            model,
            network,
            base,
            u: v.adjoint() * &network.s,
            ud: stats.u_sqrt_d(),
            w_factor: stats.w_factor.clone(),
            r_factor: stats.total_factor.clone(),
            noise: noise_power(v, noise),
            rank: stats.rank,
        })
    }

    pub fn n_ris(&self) -> usize {
        self.base.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    fn loaded(&self, b: &DVector<f64>) -> CMatrix {
        let mut x = self.base.clone();
        for i in 0..b.len() {
            x[(i, i)] += Complex64::new(0.0, b[i]);
        }
        x
    }

    /// `A = (base + jB)⁻¹` with the condition check.
    pub fn inverse(&self, b: &DVector<f64>) -> Result<CMatrix> {
        match self.model {
            RisModel::Mp => loaded_inverse(&self.base, 0.0, b),
            RisModel::Ct => Ok(CMatrix::from_diagonal(
                &b.map(|x| Complex64::new(1.0, 0.0) / Complex64::new(self.network.z0, x)),
            )),
        }
    }

    fn structural(&self) -> f64 {
        match self.model {
            RisModel::Mp => 0.0,
            RisModel::Ct => self.network.y0 / self.network.z0,
        }
    }

    /// `vᴴ Φ` from a known `A`.
    pub fn row_from_inverse(&self, a: &CMatrix) -> CRow {
        let mut h = &self.u * a * Complex64::from(-2.0 * self.network.y0);
        let s = self.structural();
        if s != 0.0 {
            h += &self.u * Complex64::from(s);
        }
        h
    }

    /// `vᴴ Φ(b)` through one linear solve.
    pub fn row(&self, b: &DVector<f64>) -> Result<CRow> {
        let s = self.structural();
        let y0 = self.network.y0;
        let h = match self.model {
            RisModel::Ct => {
                let z0 = self.network.z0;
                CRow::from_iterator(
                    b.len(),
                    self.u.iter().zip(b.iter()).map(|(u, &x)| u * (Complex64::from(-2.0 * y0) / Complex64::new(z0, x) + s)),
                )
            }
            RisModel::Mp => {
                let rhs = CMatrix::from_row_slice(b.len(), 1, self.u.as_slice());
                let x = crate::linalg::solve(&self.loaded(b).transpose(), &rhs)
                    .ok_or(Error::SingularNetwork { condition: f64::INFINITY })?;
                CRow::from_row_slice(x.as_slice()) * Complex64::from(-2.0 * y0)
            }
        };
        if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::SingularNetwork { condition: MAX_CONDITION });
        }
        Ok(h)
    }

    pub fn powers(&self, h: &CRow) -> Powers {
        Powers {
            signal: (h * &self.ud).norm_squared(),
            interference: (h * &self.w_factor).norm_squared(),
            noise: self.noise,
        }
    }

    /// LMMSE filter and its error `r − 1 + 1/(γ+1)`.
    pub fn lmmse(&self, h: &CRow) -> (CVector, Powers) {
        let p = self.powers(h);
        let q = h * &self.ud;
        let big_q = p.signal + p.interference + p.noise;
        (q.adjoint() / Complex64::from(big_q), p)
    }

    /// Error of a fixed filter, minus the constant `r`.
    pub fn filter_mse_offset(&self, lambda: &CVector, h: &CRow) -> f64 {
        let p = self.powers(h);
        let q = h * &self.ud;
        lambda.norm_squared() * (p.signal + p.interference + p.noise) - 2.0 * (q * lambda)[(0, 0)].re
    }

    pub fn mse(&self, p: &Powers) -> f64 {
        self.rank as f64 - 1.0 + p.excess()
    }

    /// Linearized fixed-`Λ` model around `b` with `A = inverse(b)`.
    pub fn quadratic_model(&self, b: &DVector<f64>, a: &CMatrix, lambda: &CVector) -> QuadraticModel {
        let m = b.len();
        let y0 = self.network.y0;
        let z0 = self.network.z0;
        let f = b.map(|x| reactance_jacobian(x, z0));
        let h0 = self.row_from_inverse(a);
        let ua = &self.u * a;
        let g = CRow::from_iterator(m, ua.iter().zip(f.iter()).map(|(x, &fm)| Complex64::new(0.0, fm) * x));
        let al = a * &self.r_factor;
        let w = &al * (self.r_factor.adjoint() * h0.adjoint());
        let f5 = a * (&self.ud * lambda);
        let lam2 = lambda.norm_squared();

        let gradient = DVector::from_iterator(
            m,
            (0..m).map(|i| {
                let f1 = g[i] * (4.0 * y0 * y0);
                let f2 = w[i] / (-2.0 * y0);
                let f4 = g[i] * (2.0 * y0);
                lam2 * (f1 * f2).re + (f4 * f5[i]).re
            }),
        );

        // C = ‖Λ‖² 4 Y0² Re(diag(g) R_A diag(ḡ)) = W Wᵀ with W = [Re B, Im B],
        // B = 2 Y0 ‖Λ‖ diag(g) A L.
        let k = al.ncols();
        let scale = 2.0 * y0 * lam2.sqrt();
        let mut wmat = DMatrix::zeros(m, 2 * k);
        for i in 0..m {
            for j in 0..k {
                let bij = g[i] * al[(i, j)] * scale;
                wmat[(i, j)] = bij.re;
                wmat[(i, k + j)] = bij.im;
            }
        }
        let curvature = &wmat * wmat.transpose();
        let curvature = (&curvature + curvature.transpose()) * 0.5;

        let theta = DVector::from_iterator(m, (0..m).map(|i| f[i].abs() * a.row(i).norm()));
        QuadraticModel { curvature, gradient, theta, curvature_factor: Some(wmat) }
    }
}

/// Fixed-`Λ` quadratic model at `state`, with `Λ` the LMMSE filter there.
pub fn build_quadratic_model(
    state: &RisState,
    network: &ImpedanceNetwork,
    stats: &ChannelStatistics,
    v: &CVector,
    noise: f64,
    model: RisModel,
) -> Result<QuadraticModel> {
    let p = Problem::new(network, stats, v, noise, model)?;
    let a = p.inverse(&state.b)?;
    let (lambda, _) = p.lmmse(&p.row_from_inverse(&a));
    Ok(p.quadratic_model(&state.b, &a, &lambda))
}

/// Runs the alternating optimization from seeded random phases.
pub fn ao_optimize(
    network: &ImpedanceNetwork,
    stats: &ChannelStatistics,
    v: &CVector,
    noise: f64,
    config: &AoConfig,
) -> Result<AoOutcome> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let start = RisState::random(network.n_ris(), network.z0, config.phase_guard, &mut rng);
    ao_optimize_from(network, stats, v, noise, config, &start.b)
}

/// Runs the alternating optimization from the reactances `b0`.
pub fn ao_optimize_from(
    network: &ImpedanceNetwork,
    stats: &ChannelStatistics,
    v: &CVector,
    noise: f64,
    config: &AoConfig,
    b0: &DVector<f64>,
) -> Result<AoOutcome> {
    config.validate()?;
    let problem = Problem::new(network, stats, v, noise, config.model)?;
    if b0.len() != problem.n_ris() {
        return Err(Error::Dimension("initial reactances do not match the RIS size".into()));
    }
    if let Some(x) = b0.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonFiniteReactance(*x));
    }
    let mut b = b0.clone();
    let mut a = problem.inverse(&b)?;
    let mut h = problem.row_from_inverse(&a);
    let (mut lambda, mut powers) = problem.lmmse(&h);
    let mut radius = config.epsilon;
    let mut trace = OptimizerTrace::default();
    trace.rows.push(TraceRow {
        iteration: 0,
        mse: problem.mse(&powers),
        rate_bound_bits: powers.rate_bound(),
        trust_radius: radius,
        accepted: true,
    });

    let mut curve = vec![powers.rate_bound()];
    let mut stop = StopReason::MaxIterations;
    let mut iteration = 0;
    while iteration < config.max_iterations {
        iteration += 1;
        let model = problem.quadratic_model(&b, &a, &lambda);
        let base = problem.filter_mse_offset(&lambda, &h);
        let f = b.map(|x| reactance_jacobian(x, network.z0));
        let mut accepted = None;
        for _ in 0..=config.max_halvings {
            let sol = solve_delta(&model, radius, config.mu_bisection_tol)?;
            if sol.delta.iter().all(|d| *d == 0.0) {
                break;
            }
            let cand = &b + f.component_mul(&sol.delta);
            let cand_row = cand
                .iter()
                .all(|x| x.is_finite())
                .then(|| problem.row(&cand).ok())
                .flatten();
            if let Some(hc) = cand_row {
                if problem.filter_mse_offset(&lambda, &hc) < base {
                    accepted = Some(cand);
                    break;
                }
                let pc = problem.powers(&hc);
                trace.rows.push(TraceRow {
                    iteration,
                    mse: problem.mse(&pc),
                    rate_bound_bits: pc.rate_bound(),
                    trust_radius: radius,
                    accepted: false,
                });
            }
            radius *= 0.5;
        }
        let Some(next) = accepted else {
            stop = if model.gradient.iter().all(|g| *g == 0.0) {
                StopReason::Stationary
            } else {
                StopReason::TrustRegionCollapsed
            };
            break;
        };
        let next_a = match problem.inverse(&next) {
            Ok(x) => x,
            Err(Error::SingularNetwork { .. }) => {
                stop = StopReason::TrustRegionCollapsed;
                break;
            }
            Err(e) => return Err(e),
        };
        let old_excess = powers.excess();
        let old_mse = problem.mse(&powers);
        b = next;
        a = next_a;
        h = problem.row_from_inverse(&a);
        (lambda, powers) = problem.lmmse(&h);
        trace.rows.push(TraceRow {
            iteration,
            mse: problem.mse(&powers),
            rate_bound_bits: powers.rate_bound(),
            trust_radius: radius,
            accepted: true,
        });
        radius = (2.0 * radius).min(config.epsilon);
        let change = (old_excess - powers.excess()).abs() / old_mse;
        if change < config.mse_tolerance {
            stop = StopReason::Tolerance;
            break;
        }
        curve.push(powers.rate_bound());
        if config.plateau.is_some_and(|p| p.reached(&curve)) {
            stop = StopReason::Plateau;
            break;
        }
    }
    let state = AoState {
        b,
        lambda,
        mse: problem.mse(&powers),
        expected_sinr: powers.sinr(),
        rate_bound: powers.rate_bound(),
        trust_radius: radius,
        iteration,
        rank: problem.rank(),
    };
    Ok(AoOutcome { state, trace, stop })
}

/// Phases of the final reactances, for reporting.
pub fn phases(b: &DVector<f64>, z0: f64) -> Result<DVector<f64>> {
    b.iter()
        .map(|&x| reactance_to_phase(x, z0))
        .collect::<Result<Vec<_>>>()
        .map(DVector::from_vec)
}
