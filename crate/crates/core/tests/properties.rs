use std::f64::consts::PI;

use proptest::prelude::*;

use halfplane_waves::closed_forms::{self, ClosedFormParams, Point};
use halfplane_waves::diagnostics;
use halfplane_waves::grid::{Field, GridSpec};
use halfplane_waves::grid_solver::{dirichlet_data, DirichletSource, SolverOptions, Start, TruncatedProblem};
use halfplane_waves::reaction::{make_bump, make_tent, Nonlinearity, ZeroReaction};
use halfplane_waves::wave_finder::extrapolate;

proptest! {
    #[test]
    fn harmonic_root_trace_is_sqrt(x in -1e3f64..1e3) {
        prop_assert_eq!(closed_forms::harmonic_root(Point::new(x, 0.0)), x.max(0.0).sqrt());
    }

    #[test]
    fn profile_inverse_round_trip(v in 1e-6f64..0.999_999, c in 0.01f64..20.0) {
        let u = closed_forms::wave_profile_inverse(v, c).unwrap();
        prop_assert!((closed_forms::wave_profile_c(u, c) - v).abs() < 1e-12);
    }

    #[test]
    fn reaction_families_are_ignition_terms(
        alpha in 0.02f64..0.9,
        mass in 0.01f64..2.0,
        u in 0.0f64..1.0,
        w in 0.0f64..1.0,
        tent in any::<bool>(),
    ) {
        let f = if tent { make_tent(alpha, mass) } else { make_bump(alpha, mass) }.unwrap();
        prop_assert!((f.mass() - mass).abs() < 1e-12 * mass.max(1.0));
        let (fu, fw) = (f.value(u), f.value(w));
        prop_assert!(fu >= 0.0);
        if u >= alpha {
            prop_assert_eq!(fu, 0.0);
        }
        prop_assert!((fu - fw).abs() <= f.lipschitz() * (u - w).abs() * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn g_is_nonnegative_and_supported_in_unit_interval(
        v in -0.5f64..1.5,
        delta in 0.05f64..5.0,
        c in 0.05f64..10.0,
    ) {
        let p = ClosedFormParams::new(delta, c).unwrap();
        let g = closed_forms::g_nonlinearity(v, &p).unwrap();
        prop_assert!(g >= 0.0);
        if !(0.0..1.0).contains(&v) || v == 0.0 {
            prop_assert_eq!(g, 0.0);
        }
    }

    #[test]
    fn dirichlet_data_is_clamped_and_ordered(c in 0.05f64..3.0, r in 4.0f64..40.0) {
        let g = GridSpec::new(r, r.powf(0.25), 256, 16).unwrap();
        prop_assume!(g.check_peclet(c).is_ok());
        let b = dirichlet_data(c, &g).unwrap();
        prop_assert!(b.left.iter().all(|&v| v == 0.0));
        prop_assert!(b.right.iter().all(|&v| v == 1.0));
        prop_assert!(b.top.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(b.top.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn tail_fit_recovers_any_prefactor(mu in 0.05f64..2.0, c in 0.3f64..1.5) {
        let v = Field::from_fn(GridSpec::new(8.0, 1.0, 1600, 8).unwrap(), |p| {
            if p.x > 0.5 { 1.0 - mu * (-c * p.x).exp() / p.x.sqrt() } else { 0.0 }
        });
        if let Ok(fit) = diagnostics::tail_fit(&v, c) {
            prop_assert!((fit.mu0_fit - mu).abs() < 1e-9 * mu);
        }
    }

    #[test]
    fn aitken_is_exact_on_geometric_sequences(l in -5.0f64..5.0, a in 0.1f64..3.0, q in 0.05f64..0.95) {
        let v: Vec<f64> = (0..3).map(|k| l + a * q.powi(k)).collect();
        let (limit, _) = extrapolate(&v).unwrap();
        prop_assert!((limit - l).abs() < 1e-9 * (1.0 + a));
    }

    #[test]
    fn field_csv_round_trip(r in 1.0f64..20.0, h in 0.5f64..5.0, nx in 8usize..40, ny in 8usize..20) {
        let g = GridSpec::new(r, h, 2 * nx, ny).unwrap();
        let v = Field::from_fn(g, |p| (p.x * 0.3).sin() + p.y);
        let mut buf = b"# comment line\n".to_vec();
        v.write_csv(&mut buf).unwrap();
        let back = Field::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.grid.nx, g.nx);
        prop_assert_eq!(back.grid.ny, g.ny);
        prop_assert!(v.max_abs_diff(&back) == 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solves_respect_bounds_and_order(
        c in 0.2f64..2.0,
        alpha in 0.15f64..0.6,
        from_above in any::<bool>(),
    ) {
        let f = make_bump(alpha, PI / 8.0).unwrap();
        let g = GridSpec::new(4.0, 4f64.powf(0.25), 128, 16).unwrap();
        let p = TruncatedProblem::with_source(c, g, &f, &DirichletSource::Truncated).unwrap();
        let start = if from_above { Start::Super } else { Start::Sub };
        let (v, rep) = p.solve(&start, &SolverOptions::default()).unwrap();
        prop_assert!(rep.converged, "{:?}", rep);
        prop_assert!(rep.monotonicity_defect <= 1e-12);
        prop_assert!(v.values.iter().all(|x| (0.0..=1.0).contains(x)));
        let (mx, _) = diagnostics::monotonicity_violation(&v);
        prop_assert!(mx <= 1e-9, "x-monotonicity defect {mx}");
    }

    #[test]
    fn linear_solve_obeys_maximum_principle(c in 0.05f64..2.0, value in 0.0f64..1.0) {
        let g = GridSpec::new(3.0, 1.5, 48, 12).unwrap();
        let src = DirichletSource::Constant { value };
        let p = TruncatedProblem::with_source(c, g, &ZeroReaction, &src).unwrap();
        let (v, _) = p.solve(&Start::Sub, &SolverOptions::default()).unwrap();
        prop_assert!(v.values.iter().all(|x| (x - value).abs() < 1e-10));
    }
}
