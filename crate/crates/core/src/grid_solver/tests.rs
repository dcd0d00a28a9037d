use super::*;
use crate::closed_forms::Point;
use crate::reaction::{make_bump, RegularizedReaction, ZeroReaction};

fn grid(r: f64, h: f64, nx: usize, ny: usize) -> GridSpec {
    GridSpec::new(r, h, nx, ny).unwrap()
}

#[test]
fn constant_field_has_zero_residual() {
    let g = grid(2.0, 1.0, 32, 16);
    let v = Field::constant(g, 0.37);
    assert_eq!(discrete_residual(&v, 0.8, &ZeroReaction), 0.0);
    assert_eq!(center_value(&v), 0.37);
}

#[test]
fn affine_field_bottom_residual() {
    let g = grid(2.0, 1.0, 32, 16);
    let a = 0.6;
    let v = Field::from_fn(g, |p| a * p.y);
    let r = discrete_residual(&v, 1.0, &ZeroReaction);
    assert!((r - a).abs() < 1e-12, "{r}");
    let f = make_bump(0.5, 0.2).unwrap();
    let v = Field::from_fn(g, |p| 0.25 + a * p.y);
    let r = discrete_residual(&v, 1.0, &f);
    assert!((r - (a - f.evaluate(0.25)).abs()).abs() < 1e-12);
}

#[test]
fn constant_data_reproduced() {
    let g = grid(3.0, 1.5, 48, 24);
    let src = DirichletSource::Constant { value: 0.42 };
    let (v, rep) =
        solve_truncated(0.7, g, &ZeroReaction, &src, &Start::Sub, &SolverOptions::default())
            .unwrap();
    assert!(rep.converged);
    for x in &v.values {
        assert!((x - 0.42).abs() < 1e-12);
    }
}

#[test]
fn linear_solve_satisfies_scheme() {
    let g = grid(4.0, 2.0, 64, 32);
    let c = 1.3;
    let (v, rep) = solve_truncated(
        c,
        g,
        &ZeroReaction,
        &DirichletSource::Truncated,
        &Start::Sub,
        &SolverOptions::default(),
    )
    .unwrap();
    assert!(rep.final_residual < 1e-9, "{}", rep.final_residual);
    // Discrete maximum principle: interior extrema do not exceed the boundary ones.
    let b = dirichlet_data(c, &g).unwrap();
    let all: Vec<f64> = b.left.iter().chain(&b.right).chain(&b.top).copied().collect();
    let (lo, hi) = all.iter().fold((1.0f64, 0.0f64), |(a, z), &x| (a.min(x), z.max(x)));
    for x in &v.values {
        assert!(*x >= lo - 1e-12 && *x <= hi + 1e-12);
    }
}

#[test]
fn dirichlet_data_pinned_at_sides() {
    let g = grid(8.0, 8f64.powf(0.25), 64, 16);
    let b = dirichlet_data(0.9, &g).unwrap();
    assert!(b.left.iter().all(|&v| v == 0.0));
    assert!(b.right.iter().all(|&v| v == 1.0));
    assert!(b.top.windows(2).all(|w| w[0] <= w[1]));
    assert!(dirichlet_data(0.0, &g).is_err());
}

#[test]
fn peclet_violation_rejected() {
    let g = grid(4.0, 2.0, 16, 8);
    let err = solve_truncated(
        3.0,
        g,
        &ZeroReaction,
        &DirichletSource::Truncated,
        &Start::Sub,
        &SolverOptions::default(),
    );
    assert!(matches!(err, Err(Error::Peclet { .. })));
}

fn manufactured_error(nx: usize) -> f64 {
    let params = ClosedFormParams::new(1.0, 1.0).unwrap();
    let f = RegularizedReaction::new(params).unwrap();
    let g = grid(2.0, 1.0, nx, nx / 4);
    let src = DirichletSource::ExplicitWave {
        delta: 1.0,
        speed: 1.0,
    };
    let (v, rep) =
        solve_truncated(1.0, g, &f, &src, &Start::Sub, &SolverOptions::default()).unwrap();
    assert!(rep.converged, "{rep:?}");
    let exact = Field::from_fn(g, |p: Point| closed_forms::explicit_wave(p, &params));
    v.max_abs_diff(&exact)
}

#[test]
fn manufactured_wave_second_order() {
    let e: Vec<f64> = [32, 64, 128].iter().map(|&n| manufactured_error(n)).collect();
    for w in e.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 1.8, "errors {e:?}");
    }
}

#[test]
fn monotone_iteration_is_monotone_and_ordered() {
    let params = ClosedFormParams::new(1.0, 1.0).unwrap();
    let f = RegularizedReaction::new(params).unwrap();
    let g = grid(2.0, 1.0, 32, 8);
    let src = DirichletSource::ExplicitWave {
        delta: 1.0,
        speed: 1.0,
    };
    let opts = SolverOptions {
        newton: false,
        max_outer: 50_000,
        ..SolverOptions::default()
    };
    let p = TruncatedProblem::with_source(1.0, g, &f, &src).unwrap();
    let (v, rep) = p.solve_both(&opts).unwrap();
    assert!(rep.converged, "{rep:?}");
    assert!(rep.monotonicity_defect <= 1e-12, "{rep:?}");
    assert!(rep.sub_super_gap.unwrap() <= 10.0 * opts.tol_outer, "{rep:?}");
    assert!(v.values.iter().all(|x| (0.0..=1.0).contains(x)));

    let (w, fast) = p.solve_both(&SolverOptions::default()).unwrap();
    assert!(fast.converged);
    assert!(fast.monotonicity_defect <= 1e-12);
    assert!(fast.sub_super_gap.unwrap() <= 1e-9);
    assert!(v.max_abs_diff(&w) < 1e-8);
}

// With f'(0) > 0 the truncated problem can have an unignited minimal solution
// next to the ignited maximal one. Both must still be ordered solutions.
#[test]
fn minimal_and_maximal_solutions_are_ordered() {
    let f = make_bump(0.25, std::f64::consts::PI / 8.0).unwrap();
    let g = grid(8.0, 8f64.powf(0.25), 256, 32);
    let p = TruncatedProblem::with_source(0.5, g, &f, &DirichletSource::Truncated).unwrap();
    let opts = SolverOptions {
        newton: false,
        max_outer: 200_000,
        ..SolverOptions::default()
    };
    let (low, a) = p.solve(&Start::Sub, &opts).unwrap();
    let (high, b) = p.solve(&Start::Super, &opts).unwrap();
    assert!(a.converged && b.converged, "{a:?} {b:?}");
    for (x, y) in low.values.iter().zip(&high.values) {
        assert!(*x <= y + 1e-9);
    }
    assert!(a.monotonicity_defect <= 0.0 && b.monotonicity_defect <= 0.0);
}

#[test]
fn warm_start_reaches_same_solution() {
    let f = make_bump(0.25, std::f64::consts::PI / 8.0).unwrap();
    let g = grid(4.0, 4f64.powf(0.25), 64, 16);
    let opts = SolverOptions::default();
    let p = TruncatedProblem::with_source(0.7, g, &f, &DirichletSource::Truncated).unwrap();
    let (v, _) = p.solve(&Start::Sub, &opts).unwrap();
    let q = TruncatedProblem::with_source(0.75, g, &f, &DirichletSource::Truncated).unwrap();
    let (a, _) = q.solve(&Start::Sub, &opts).unwrap();
    let (b, rep) = q.solve(&Start::Warm(warm_trace(&v)), &opts).unwrap();
    assert!(rep.converged);
    assert!(a.max_abs_diff(&b) < 1e-9);
}

#[test]
fn reconstruction_satisfies_interior_stencil_with_stiff_reaction() {
    let f = make_bump(0.43, std::f64::consts::PI / 8.0).unwrap();
    for ny in [16, 32, 64] {
        let g = grid(4.0, 4f64.powf(0.25), 128, ny);
        let p = TruncatedProblem::with_source(0.2, g, &f, &DirichletSource::Truncated).unwrap();
        let t: Vec<f64> = (0..g.nx - 1).map(|i| 0.5 + 0.3 * (i as f64 * 0.1).sin()).collect();
        let v = p.reconstruct(&t);
        let (hx, hy) = (g.hx(), g.hy());
        let mut worst: f64 = 0.0;
        for j in 1..g.ny {
            for i in 1..g.nx {
                let (w, e, here) = (v.at(i - 1, j), v.at(i + 1, j), v.at(i, j));
                let r = (w - 2.0 * here + e) / (hx * hx)
                    + 0.1 / hx * (e - w)
                    + (v.at(i, j - 1) - 2.0 * here + v.at(i, j + 1)) / (hy * hy);
                worst = worst.max(r.abs());
            }
        }
        assert!(worst < 1e-9, "ny = {ny}: {worst:e}");
    }
}
