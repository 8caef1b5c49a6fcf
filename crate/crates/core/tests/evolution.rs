use std::f64::consts::PI;

use proptest::prelude::*;
use rodwave_core::evolution::{f_scale, rhs_with, simulate_model, step_with};
use rodwave_core::norms::lp_norm;
use rodwave_core::quad::integrate;
use rodwave_core::spectral::spectral_derivative;
use rodwave_core::{
    build_u0, conserved_e, conserved_f, make_grid, negate_transform, rhs, simulate, step, Field,
    RodModel, RodParams, RunStatus, SolverControls, Symmetry,
};

fn bump(g: &rodwave_core::Grid) -> Field {
    Field::from_fn(g, |x| 0.4 * (-x * x).exp() + 0.1 * x * (-(x - 0.5).powi(2)).exp())
}

fn odd_bump(g: &rodwave_core::Grid) -> Field {
    Field::from_fn(g, |x| -0.6 * x * (-x * x).exp()).with_symmetry(Symmetry::Odd)
}

fn l2_diff(a: &Field, b: &Field) -> f64 {
    lp_norm(&a.axpy(-1.0, b).unwrap(), 2.0).unwrap()
}

#[test]
fn rhs_of_small_cosine_matches_closed_form() {
    let g = make_grid(PI, 64).unwrap();
    let amp = 1e-6;
    for gamma in [1.0, 0.5, -2.0] {
        for k in [1.0f64, 2.0, 5.0] {
            let u = Field::from_fn(&g, |x| amp * (k * x).cos());
            let r = rhs_with(&u, RodModel::rod(gamma), false).unwrap();
            let (a, b) = ((3.0 - gamma) / 2.0, gamma / 2.0);
            let c = gamma * amp * amp * k / 2.0
                + 2.0 * k * (a * amp * amp / 2.0 - b * amp * amp * k * k / 2.0) / (1.0 + 4.0 * k * k);
            let want = Field::from_fn(&g, |x| c * (2.0 * k * x).sin());
            assert!(r.max_abs_diff(&want).unwrap() < 1e-12 * amp * amp);
            let bound = 10.0 * amp * amp * (3.0 + gamma.abs()) * (1.0 + k * k);
            assert!(lp_norm(&r, 2.0).unwrap() <= bound);
        }
    }
}

#[test]
fn rhs_keeps_odd_fields_odd() {
    let g = make_grid(10.0, 256).unwrap();
    let u = odd_bump(&g);
    for gamma in [1.0, -0.7, 2.5] {
        let r = rhs(&u, gamma).unwrap();
        assert!(r.odd_residual() < 1e-10);
        assert_eq!(r.symmetry(), Symmetry::Odd);
    }
}

#[test]
fn step_richardson_ratio() {
    let g = make_grid(10.0, 256).unwrap();
    let u = bump(&g);
    let gamma = 1.0;
    let advance = |h: f64, n: usize| {
        let mut v = u.clone();
        for _ in 0..n {
            v = step(&v, gamma, h / n as f64).unwrap();
        }
        v
    };
    let h = 0.4;
    let (s1, s2, s4, s8) = (advance(h, 1), advance(h, 2), advance(h, 4), advance(h, 8));
    // on a fixed interval the substep differences shrink like (dt)⁴ ...
    let ratio = l2_diff(&s1, &s2) / l2_diff(&s2, &s4);
    assert!((ratio - 16.0).abs() < 0.2 * 16.0, "ratio {ratio}");
    let ratio2 = l2_diff(&s2, &s4) / l2_diff(&s4, &s8);
    assert!((ratio2 - 16.0).abs() < 0.2 * 16.0, "ratio {ratio2}");
    // ... while the single-step defect itself is O(dt⁵)
    let half = advance(h / 2.0, 1);
    let quarter = advance(h / 2.0, 2);
    let r5 = l2_diff(&s1, &s2) / l2_diff(&half, &quarter);
    assert!(r5 > 0.8 * 32.0 && r5 < 1.2 * 32.0, "ratio {r5}");
}

#[test]
fn step_preserves_parity_and_zero() {
    let g = make_grid(10.0, 256).unwrap();
    let v = step(&odd_bump(&g), 1.0, 0.05).unwrap();
    assert!(v.odd_residual() < 1e-10);
    let z = step(&Field::zeros(&g), 1.0, 0.3).unwrap();
    assert_eq!(z.max_abs(), 0.0);
    assert!(step(&Field::zeros(&g), 1.0, 0.0).is_err());
}

#[test]
fn conserved_quantities_of_simple_fields() {
    let g = make_grid(PI, 64).unwrap();
    assert_eq!(conserved_e(&Field::zeros(&g)).unwrap(), 0.0);
    assert_eq!(conserved_f(&Field::zeros(&g), 1.0).unwrap(), 0.0);
    let c = Field::from_fn(&g, f64::cos);
    assert!((conserved_e(&c).unwrap() - 2.0 * PI).abs() < 1e-12);
    for gamma in [1.0, -0.5, 2.0] {
        let u = Field::from_fn(&g, |x| 1.0 + x.cos());
        let oracle = integrate(
            |x| (1.0 + x.cos()).powi(3) + gamma * (1.0 + x.cos()) * x.sin().powi(2),
            -PI,
            PI,
            1e-14,
        );
        assert!((conserved_f(&u, gamma).unwrap() - oracle).abs() < 1e-12 * oracle.abs());
    }
}

#[test]
fn energy_of_u0_matches_component_norms() {
    let p = RodParams::new(1.0, 4.0, 0.1);
    let g = make_grid(30.0, 1 << 16).unwrap();
    let u0 = build_u0(&p, &g).unwrap();
    let e = conserved_e(&u0).unwrap();
    let parts = lp_norm(&u0, 2.0).unwrap().powi(2) + lp_norm(&spectral_derivative(&u0).unwrap(), 2.0).unwrap().powi(2);
    assert!((e - parts).abs() < 1e-12 * e);
    let f = conserved_f(&u0, 1.0).unwrap();
    assert!(f.abs() < 1e-10 * lp_norm(&u0, 2.0).unwrap().powi(3));
    assert!(f_scale(&u0, 1.0).unwrap() > 0.0);
}

#[test]
fn negation_twin_run() {
    let g = make_grid(10.0, 256).unwrap();
    let u = bump(&g);
    let model = RodModel::rod(1.3);
    let (v, gneg) = negate_transform(&u, model.gamma);
    assert_eq!(gneg, -1.3);
    let twin = model.negated();
    assert_eq!(twin.gamma, gneg);
    let (mut a, mut b) = (u.clone(), v.clone());
    for _ in 0..10 {
        a = step_with(&a, model, true, 0.01).unwrap();
        b = step_with(&b, twin, true, 0.01).unwrap();
    }
    assert!(a.scale(-1.0).max_abs_diff(&b).unwrap() < 1e-9);
    // the rod equation with -γ is a different model
    let mut c = v.clone();
    for _ in 0..10 {
        c = step_with(&c, RodModel::rod(gneg), true, 0.01).unwrap();
    }
    assert!(a.scale(-1.0).max_abs_diff(&c).unwrap() > 1e-6);
}

#[test]
fn negation_is_an_involution() {
    let g = make_grid(10.0, 64).unwrap();
    let u = bump(&g);
    let (v, gv) = negate_transform(&u, 0.8);
    let (w, gw) = negate_transform(&v, gv);
    assert_eq!(w, u);
    assert_eq!(gw, 0.8);
    let (_, g0) = negate_transform(&u, 0.0);
    assert_eq!(g0, 0.0);
}

#[test]
fn zero_datum_completes_with_zero_logs() {
    let g = make_grid(30.0, 1 << 10).unwrap();
    let tr = simulate(&Field::zeros(&g), 1.0, &SolverControls::default()).unwrap();
    assert_eq!(tr.status, RunStatus::Completed);
    assert!(tr.e_log.iter().chain(&tr.f_log).chain(&tr.min_gamma_ux).chain(&tr.max_abs_u).all(|v| *v == 0.0));
}

#[test]
fn energy_drift_and_sup_bound_on_plateau_data() {
    let p = RodParams::new(1.0, 8.0, 0.1);
    let g = make_grid(30.0, 1 << 16).unwrap();
    let u0 = build_u0(&p, &g).unwrap();
    let controls = SolverControls { ux_blowup_threshold: 5.0, t_max: 1.0, cfl_safety: 0.1, ..Default::default() };
    let tr = simulate(&u0, 1.0, &controls).unwrap();
    assert_eq!(tr.status, RunStatus::BlowupDetected);
    assert!(tr.e_drift_until(tr.final_time()) < 1e-6, "{}", tr.e_drift_until(tr.final_time()));
    let e0 = conserved_e(&u0).unwrap();
    let sup = tr.max_abs_u.iter().copied().fold(0.0, f64::max);
    assert!(sup <= (0.5 * e0).sqrt());
    let l2_sum = lp_norm(&u0, 2.0).unwrap() + lp_norm(&spectral_derivative(&u0).unwrap(), 2.0).unwrap();
    assert!(sup <= l2_sum / 2f64.sqrt() + 1e-6);
    // odd data stays odd
    for s in &tr.snapshots {
        assert!(s.u.odd_residual() < 1e-9 * s.u.max_abs());
    }
}

#[test]
fn convergence_under_refinement() {
    let p = RodParams::new(1.0, 4.0, 0.1);
    let run = |n: usize, cfl: f64| {
        let g = make_grid(10.0, n).unwrap();
        let u0 = build_u0(&p, &g).unwrap();
        let c = SolverControls { t_max: 0.25, cfl_safety: cfl, ..Default::default() };
        let tr = simulate(&u0, 1.0, &c).unwrap();
        assert_eq!(tr.status, RunStatus::Completed);
        tr.snapshots.last().unwrap().u.clone()
    };
    let coarse = run(1 << 14, 0.3);
    let fine = run(1 << 15, 0.15);
    let sub = Field::new(coarse.grid(), fine.values().iter().step_by(2).copied().collect()).unwrap();
    let rel = l2_diff(&coarse, &sub) / lp_norm(&sub, 2.0).unwrap();
    assert!(rel < 1e-4, "relative change {rel}");
}

#[test]
fn poisoned_run_reports_status() {
    let g = make_grid(10.0, 64).unwrap();
    let mut u = bump(&g);
    u.values_mut()[3] = f64::NAN;
    assert!(simulate(&u, 1.0, &SolverControls::default()).is_err());
}

#[test]
fn simulate_model_with_rod_matches_simulate() {
    let g = make_grid(10.0, 128).unwrap();
    let u = bump(&g);
    let c = SolverControls { t_max: 0.2, ..Default::default() };
    let a = simulate(&u, 0.9, &c).unwrap();
    let b = simulate_model(&u, RodModel::rod(0.9), &c).unwrap();
    assert_eq!(a.e_log, b.e_log);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rhs_parity_for_random_odd_data(c in prop::collection::vec(-0.5f64..0.5, 6), gamma in -3.0f64..3.0) {
        let g = make_grid(PI, 128).unwrap();
        let u = Field::from_fn(&g, |x| c.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * x).sin()).sum());
        prop_assert!(rhs(&u, gamma).unwrap().odd_residual() < 1e-10);
    }

    #[test]
    fn reduce_parameters_formula(s1 in 0.1f64..5.0, s2 in -5.0f64..-0.1, s3 in -5.0f64..0.0) {
        let r = rodwave_core::reduce_parameters(s1, s2, s3).unwrap();
        prop_assert!((r.gamma - 3.0 * s3 / (s1 * s2)).abs() <= 1e-14 * r.gamma.abs().max(1.0));
        prop_assert!((r.t_scale - 3.0 * (-s2).sqrt() / s1).abs() <= 1e-14 * r.t_scale);
        prop_assert!((r.x_scale - (-s2).sqrt()).abs() <= 1e-15 * r.x_scale);
    }
}
