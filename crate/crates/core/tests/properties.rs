use std::f64::consts::PI;

use proptest::prelude::*;

use surfwave::diagnostics::{IdentityId, ResidualReport, Stencil};
use surfwave::dtn::{dtn_flat, Depth, DtnSolver};
use surfwave::inequality_lab::{sample, verify_sample, SampleSpec};
use surfwave::scenario::{format_float, InitialCondition, SimConfig, SpectralMode};
use surfwave::spectral::{PeriodicGrid, SurfaceField};
use surfwave::standing_waves::StandingWaveExpansion;

fn trig_field(grid: &PeriodicGrid, coeffs: &[(f64, f64)]) -> SurfaceField {
    SurfaceField::from_fn(grid, |x| {
        coeffs.iter().enumerate().map(|(j, (a, b))| {
            let k = (j + 1) as f64;
            a * (k * x).cos() + b * (k * x).sin()
        })
        .sum()
    })
    .unwrap()
}

fn coeffs(n: usize, scale: f64) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-scale..scale, -scale..scale), n)
}

fn depth() -> impl Strategy<Value = Depth> {
    prop_oneof![(0.5f64..4.0).prop_map(Depth::finite), Just(Depth::infinite())]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval(c in coeffs(6, 1.0)) {
        let grid = PeriodicGrid::new(32).unwrap();
        let f = trig_field(&grid, &c);
        let exact: f64 = c.iter().map(|(a, b)| PI * (a * a + b * b)).sum();
        prop_assert!((f.inner(&f) - exact).abs() <= 1e-12 * exact.max(1.0));
    }

    #[test]
    fn derivative_is_mean_free_and_exact(c in coeffs(5, 1.0)) {
        let grid = PeriodicGrid::new(32).unwrap();
        let f = trig_field(&grid, &c);
        let d = f.derivative();
        prop_assert!(d.integrate().abs() < 1e-12);
        let exact = SurfaceField::from_fn(&grid, |x| {
            c.iter().enumerate().map(|(j, (a, b))| {
                let k = (j + 1) as f64;
                k * (-a * (k * x).sin() + b * (k * x).cos())
            }).sum()
        }).unwrap();
        prop_assert!(d.sub(&exact).sup_norm() < 1e-11);
    }

    #[test]
    fn float_format_round_trips(bits in any::<u64>()) {
        let v = f64::from_bits(bits);
        let back: f64 = format_float(v).parse().unwrap();
        prop_assert!(back.to_bits() == v.to_bits() || (v.is_nan() && back.is_nan()));
    }

    #[test]
    fn residual_report_is_consistent(lhs in -1e3f64..1e3, rhs in -1e3f64..1e3) {
        let r = ResidualReport::new(IdentityId::VirialFinite, 0.0, lhs, rhs, "x");
        prop_assert_eq!(r.abs_residual, (lhs - rhs).abs());
        prop_assert!(r.rel_residual >= 0.0);
        prop_assert!(r.rel_residual <= 2.0 + 1e-12 || r.abs_residual < 1e-14);
    }

    #[test]
    fn stencils_are_exact_on_low_degree_polynomials(c in prop::collection::vec(-2.0f64..2.0, 4), dt in 0.01f64..0.5) {
        let p = |t: f64| c[0] + c[1] * t + c[2] * t * t + c[3] * t * t * t;
        let dp = |t: f64| c[1] + 2.0 * c[2] * t + 3.0 * c[3] * t * t;
        let ddp = |t: f64| 2.0 * c[2] + 6.0 * c[3] * t;
        let f: Vec<f64> = (0..7).map(|i| p(i as f64 * dt)).collect();
        let t = 3.0 * dt;
        let s = Stencil::Fourth;
        prop_assert!((s.d1(&f, 3, dt) - dp(t)).abs() < 1e-8);
        prop_assert!((s.d2(&f, 3, dt) - ddp(t)).abs() < 1e-6);
        let quad: Vec<f64> = (0..7).map(|i| { let x = i as f64 * dt; c[0] + c[1] * x + c[2] * x * x }).collect();
        prop_assert!((Stencil::Second.d1(&quad, 3, dt) - (c[1] + 2.0 * c[2] * t)).abs() < 1e-8);
        prop_assert!((Stencil::Second.d2(&quad, 3, dt) - 2.0 * c[2]).abs() < 1e-6);
    }

    #[test]
    fn standing_expansion_is_mean_free(eps in 0.0f64..0.3, t in 0.0f64..6.3) {
        let grid = PeriodicGrid::new(32).unwrap();
        let e = StandingWaveExpansion::new(eps).unwrap();
        let (eta, _) = e.eval_surface(&grid, t).unwrap();
        prop_assert!(eta.integrate().abs() < 1e-12);
    }

    #[test]
    fn config_round_trips(
        n_x in prop::sample::select(vec![16usize, 32, 64]),
        n_z in 4usize..40,
        depth in depth(),
        g in 0.1f64..5.0,
        seed in any::<u64>(),
        eps in -0.1f64..0.1,
        k in 1usize..5,
    ) {
        let mut c = SimConfig::linear_standing_benchmark(depth);
        c.n_x = n_x;
        c.n_z = n_z;
        c.g = g;
        c.seed = seed;
        c.dt = c.max_dt() / 3.0;
        c.output_stride = 2.0 * c.dt;
        c.t_end = 10.0 * c.output_stride;
        c.identity_set = Some(vec![IdentityId::MassConservation, IdentityId::EnergyConservation]);
        c.initial_condition = InitialCondition::Spectrum { modes: vec![SpectralMode { k, eta_cos: eps, eta_sin: 0.0, psi_cos: 0.0, psi_sin: eps }] };
        prop_assert!(c.validate().is_ok());
        let back = SimConfig::from_json(&c.to_json()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn stride_must_be_a_multiple_of_dt(frac in 0.05f64..0.95) {
        let mut c = SimConfig::linear_standing_benchmark(Depth::finite(1.0));
        c.output_stride = c.dt * (3.0 + frac);
        c.t_end = c.output_stride * 10.0;
        prop_assert!(c.validate().is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dtn_structure(depth in depth(), eta_c in coeffs(4, 0.05), psi_c in coeffs(6, 1.0), phi_c in coeffs(6, 1.0)) {
        let grid = PeriodicGrid::new(32).unwrap();
        let solver = DtnSolver::new(&grid, depth, 24).unwrap();
        let eta = trig_field(&grid, &eta_c);
        let psi = trig_field(&grid, &psi_c);
        let phi = trig_field(&grid, &phi_c);
        let g_psi = solver.dtn_apply(&eta, &psi).unwrap();
        let g_phi = solver.dtn_apply(&eta, &phi).unwrap();
        let (a11, a22) = (psi.inner(&g_psi), phi.inner(&g_phi));
        prop_assert!(a11 >= -1e-10);
        prop_assert!((phi.inner(&g_psi) - psi.inner(&g_phi)).abs() <= 1e-9 * (a11 * a22).sqrt().max(1e-12));
        prop_assert!(g_psi.integrate().abs() < 1e-10);
        let g_eta = solver.dtn_apply(&eta, &eta).unwrap();
        prop_assert!(g_eta.max() <= 1.0 + 1e-8);
    }

    #[test]
    fn dtn_is_linear_in_psi(depth in depth(), eta_c in coeffs(3, 0.05), psi_c in coeffs(4, 1.0), phi_c in coeffs(4, 1.0), s in -2.0f64..2.0) {
        let grid = PeriodicGrid::new(32).unwrap();
        let solver = DtnSolver::new(&grid, depth, 24).unwrap();
        let eta = trig_field(&grid, &eta_c);
        let psi = trig_field(&grid, &psi_c);
        let phi = trig_field(&grid, &phi_c);
        let lhs = solver.dtn_apply(&eta, &psi.axpy(s, &phi)).unwrap();
        let rhs = solver.dtn_apply(&eta, &psi).unwrap().axpy(s, &solver.dtn_apply(&eta, &phi).unwrap());
        prop_assert!(lhs.sub(&rhs).sup_norm() < 1e-9 * (1.0 + rhs.sup_norm()));
    }

    #[test]
    fn flat_surface_matches_symbol(depth in depth(), psi_c in coeffs(8, 1.0)) {
        let grid = PeriodicGrid::new(32).unwrap();
        let solver = DtnSolver::new(&grid, depth, 48).unwrap();
        let psi = trig_field(&grid, &psi_c);
        let g = solver.dtn_apply(&SurfaceField::zeros(&grid), &psi).unwrap();
        let exact = dtn_flat(&psi, depth);
        prop_assert!(g.sub(&exact).sup_norm() <= 1e-8 * exact.sup_norm().max(1.0));
    }

    #[test]
    fn sampler_respects_its_caps(seed in any::<u32>(), slope in 0.1f64..1.0, depth in depth()) {
        let grid = PeriodicGrid::new(64).unwrap();
        let spec = SampleSpec { count: 1, seed: seed as u64, slope_cap: slope, ..SampleSpec::default() };
        let s = sample(&grid, &spec, depth, 0).unwrap();
        prop_assert!(verify_sample(&s, &spec, depth).is_ok());
        prop_assert!(s.eta.derivative().sup_norm() <= slope * (1.0 + 1e-12));
        prop_assert!(s.eta.sup_norm() <= spec.amplitude * (1.0 + 1e-12));
        prop_assert!(s.eta.integrate().abs() < 1e-12);
    }
}
