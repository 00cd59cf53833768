mod common;

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use risnet::channel_stats::{ChannelStatistics, RicianSpec};
use risnet::em_network::{CMatrix, CVector};
use risnet::optimizer::*;
use risnet::ris_response::{delta, reactance_jacobian, RisModel, RisState, PHASE_GUARD};

use common::{max_abs_diff, toy, toy_config};

fn random_phi(t: &common::Toy, rng: &mut ChaCha8Rng) -> CMatrix {
    let state = RisState::random(t.network.n_ris(), t.network.z0, PHASE_GUARD, rng);
    &t.network.s * delta(RisModel::Mp, &t.network, &state).unwrap()
}

#[test]
fn wiener_scalar() {
    let stats = ChannelStatistics::from_factors(&CMatrix::from_element(1, 1, Complex64::ONE), &[]);
    let phi = CMatrix::identity(1, 1);
    let v = CVector::from_element(1, Complex64::ONE);
    let lambda = lmmse_filter(&phi, &stats, &v, 1.0);
    assert!((lambda[0].norm() - 0.5).abs() < 1e-15);
    assert!((lmmse_mse(&phi, &stats, &v, 1.0) - 0.5).abs() < 1e-15);
    let zero = CMatrix::zeros(1, 1);
    assert_eq!(lmmse_filter(&zero, &stats, &v, 1.0).norm(), 0.0);
    assert!((mse_given_filter(&CVector::zeros(1), &phi, &stats, &v, 1.0) - 1.0).abs() < 1e-15);
}

#[test]
fn filter_is_optimal_and_bridge_holds() {
    let t = toy(toy_config(4, 2, &[FRAC_PI_8, FRAC_PI_4], 0.5, RicianSpec::default()));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let phi = random_phi(&t, &mut rng);
        let lambda = lmmse_filter(&phi, &t.stats, &t.v, t.noise);
        let best = mse_given_filter(&lambda, &phi, &t.stats, &t.v, t.noise);
        let closed = lmmse_mse(&phi, &t.stats, &t.v, t.noise);
        let gamma = expected_sinr(&phi, &t.stats, &t.v, t.noise);
        let bridge = t.stats.rank as f64 - 1.0 + 1.0 / (gamma + 1.0);
        assert!((best - closed).abs() / closed < 1e-10);
        assert!((best - bridge).abs() / best < 1e-10);
        let scale = lambda.norm();
        for _ in 0..100 {
            let eta = CVector::from_fn(lambda.len(), |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale * 0.1
            });
            assert!(mse_given_filter(&(&lambda + eta), &phi, &t.stats, &t.v, t.noise) >= best - 1e-12);
        }
        // mse(cΛ) is a convex parabola with its minimum at c = 1.
        let cs: Vec<f64> = (0..41).map(|i| i as f64 * 0.05).collect();
        let ys: Vec<f64> = cs.iter().map(|&c| mse_given_filter(&(&lambda * Complex64::from(c)), &phi, &t.stats, &t.v, t.noise)).collect();
        let argmin = (0..ys.len()).min_by(|&a, &b| ys[a].total_cmp(&ys[b])).unwrap();
        assert_eq!(argmin, 20);
        for w in ys.windows(3) {
            let second = w[0] - 2.0 * w[1] + w[2];
            assert!(second > 0.0);
            assert!((second - (ys[0] - 2.0 * ys[1] + ys[2])).abs() < 1e-9 * ys[0].abs().max(1.0));
        }
    }
}

#[test]
fn rank_one_sinr_by_substitution() {
    let t = toy(toy_config(4, 2, &[FRAC_PI_4], 0.0, RicianSpec::los_only()));
    assert_eq!(t.stats.rank, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let phi = random_phi(&t, &mut rng);
    let h = t.v.adjoint() * &phi;
    let signal = (&h * &t.stats.r_x * h.adjoint())[(0, 0)].re;
    let expected = signal / (t.noise * t.v.norm_squared());
    let gamma = expected_sinr(&phi, &t.stats, &t.v, t.noise);
    assert!((gamma - expected).abs() < 1e-10 * expected);
}

/// Isotropic random steps at `Σ δ²θ² = 0.01²`. Steps nearly orthogonal to the
/// gradient make `|ΔMSE|` tiny, so the relative error is checked on the bulk and
/// the remainder is checked to be second order on every draw.
#[test]
fn quadratic_model_tracks_exact_mse() {
    let t = toy(toy_config(4, 2, &[FRAC_PI_8, 3.0 * FRAC_PI_8], 0.5, RicianSpec::default()));
    let p = Problem::new(&t.network, &t.stats, &t.v, t.noise, RisModel::Mp).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws = 400;
    let mut within = 0;
    for _ in 0..draws {
        let state = RisState::random(8, t.network.z0, PHASE_GUARD, &mut rng);
        let a = p.inverse(&state.b).unwrap();
        let h = p.row_from_inverse(&a);
        let (lambda, _) = p.lmmse(&h);
        let model = p.quadratic_model(&state.b, &a, &lambda);
        assert_eq!(model.predicted_change(&DVector::zeros(8)), 0.0);
        let base = p.filter_mse_offset(&lambda, &h);
        let f = state.b.map(|x| reactance_jacobian(x, t.network.z0));
        let dir = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
        let err = |radius: f64| {
            let d = &dir * (radius / model.constraint(&dir).sqrt());
            let moved = &state.b + f.component_mul(&d);
            let truth = p.filter_mse_offset(&lambda, &p.row(&moved).unwrap()) - base;
            ((model.predicted_change(&d) - truth).abs(), truth.abs())
        };
        let (e1, truth) = err(0.01);
        let (e2, _) = err(0.005);
        if e1 < 0.05 * truth {
            within += 1;
        }
        assert!(e2 < 0.45 * e1, "remainder not second order: {e1:e} -> {e2:e}");
    }
    assert!(within as f64 >= 0.9 * draws as f64, "{within}/{draws} within 5%");
}

#[test]
fn ct_and_mp_differ_by_structural_term() {
    let mut t = toy(toy_config(4, 2, &[FRAC_PI_4], 0.0, RicianSpec::default()));
    let z0 = t.network.z0;
    t.network.z_ss = CMatrix::identity(8, 8) * Complex64::from(z0);
    t.network.r0 = 0.0;
    let structural = t.network.y0 / z0;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mp = Problem::new(&t.network, &t.stats, &t.v, t.noise, RisModel::Mp).unwrap();
    let ct = Problem::new(&t.network, &t.stats, &t.v, t.noise, RisModel::Ct).unwrap();
    let u = t.v.adjoint() * &t.network.s;
    for _ in 0..10 {
        let state = RisState::random(8, z0, PHASE_GUARD, &mut rng);
        let phi_mp = &t.network.s * delta(RisModel::Mp, &t.network, &state).unwrap() * CMatrix::from_columns(&t.network.t);
        let phi_ct = &t.network.s * delta(RisModel::Ct, &t.network, &state).unwrap() * CMatrix::from_columns(&t.network.t);
        let expected = &t.network.s * CMatrix::from_columns(&t.network.t) * Complex64::from(structural);
        let scale = phi_ct.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(max_abs_diff(&(phi_ct - phi_mp), &expected) < 1e-12 * scale);
        let row_ct = ct.row(&state.b).unwrap();
        let diff = &row_ct - mp.row(&state.b).unwrap();
        let want = &u * Complex64::from(structural);
        assert!((diff - want).norm() < 1e-12 * row_ct.norm());
    }
}

#[test]
fn ao_trace_is_monotone_and_consistent() {
    let t = toy(toy_config(6, 2, &[FRAC_PI_8, FRAC_PI_4, 3.0 * FRAC_PI_8], 0.5, RicianSpec::default()));
    let out = ao_optimize(&t.network, &t.stats, &t.v, t.noise, &AoConfig { max_iterations: 200, ..Default::default() }).unwrap();
    let acc: Vec<_> = out.trace.accepted().collect();
    assert!(acc.len() > 5);
    for w in acc.windows(2) {
        assert!(w[1].mse <= w[0].mse + 1e-12 * w[0].mse);
        assert!(w[1].rate_bound_bits >= w[0].rate_bound_bits - 1e-9);
    }
    for r in &out.trace.rows {
        let rb = rate_bound_from_mse(r.mse, out.state.rank);
        assert!((rb - r.rate_bound_bits).abs() < 1e-9 * rb.abs().max(1.0));
    }
    assert!(out.state.rate_bound > acc[0].rate_bound_bits);
    let again = ao_optimize(&t.network, &t.stats, &t.v, t.noise, &AoConfig { max_iterations: 200, ..Default::default() }).unwrap();
    assert_eq!(out.state.b, again.state.b);
}

#[test]
fn accepted_steps_respect_trust_region() {
    let t = toy(toy_config(4, 2, &[FRAC_PI_4], 0.0, RicianSpec::default()));
    let p = Problem::new(&t.network, &t.stats, &t.v, t.noise, RisModel::Mp).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let state = RisState::random(8, t.network.z0, PHASE_GUARD, &mut rng);
    let a = p.inverse(&state.b).unwrap();
    let (lambda, _) = p.lmmse(&p.row_from_inverse(&a));
    let model = p.quadratic_model(&state.b, &a, &lambda);
    for eps in [0.1, 0.01, 1e-4] {
        let s = solve_delta(&model, eps, 1e-12).unwrap();
        assert!(model.constraint(&s.delta) <= eps * eps * (1.0 + 1e-6));
        assert!(model.predicted_change(&s.delta) < 0.0);
    }
}

#[test]
fn random_search_oracle_at_eight_elements() {
    let t = toy(toy_config(4, 2, &[FRAC_PI_4], 0.0, RicianSpec::los_only()));
    assert_eq!(t.stats.rank, 1);
    let p = Problem::new(&t.network, &t.stats, &t.v, t.noise, RisModel::Mp).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut best = 0.0f64;
    for _ in 0..1_000_000 {
        let phi: Vec<f64> = (0..8).map(|_| rng.random_range(PHASE_GUARD..2.0 * PI - PHASE_GUARD)).collect();
        let b = RisState::from_phases(&phi, t.network.z0).unwrap().b;
        best = best.max(p.powers(&p.row(&b).unwrap()).sinr());
    }
    let cfg = AoConfig { max_iterations: 5000, ..Default::default() };
    let out = ao_optimize(&t.network, &t.stats, &t.v, t.noise, &cfg).unwrap();
    assert!(out.state.expected_sinr >= 0.95 * best, "ao {} random best {}", out.state.expected_sinr, best);
}
