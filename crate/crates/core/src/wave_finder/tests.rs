use super::*;
use crate::closed_forms::{explicit_wave, ClosedFormParams};
use crate::reaction::{make_bump, RegularizedReaction, ZeroReaction};
use std::f64::consts::PI;

fn manufactured(nx: usize) -> (RegularizedReaction, GridSpec, f64) {
    let params = ClosedFormParams::new(1.0, 1.0).unwrap();
    let f = RegularizedReaction::new(params).unwrap();
    let g = GridSpec::new(2.0, 1.0, nx, nx / 4).unwrap();
    (f, g, params.origin_value())
}

const EXPLICIT: DirichletSource = DirichletSource::ExplicitWave {
    delta: 1.0,
    speed: 1.0,
};

#[test]
fn manufactured_speed_is_recovered() {
    let errs: Vec<f64> = [64, 128]
        .iter()
        .map(|&nx| {
            let (f, g, alpha) = manufactured(nx);
            let setup = WaveSetup::new(g, &f, alpha).unwrap().with_source(EXPLICIT);
            let w = find_speed(&setup, &SpeedOptions::default()).unwrap();
            assert!((w.center_value() - alpha).abs() <= 1e-6);
            assert!(w.bracket.h_lo < 0.0 && w.bracket.h_hi > 0.0);
            assert!(w.speed > w.bracket.c_lo && w.speed <= w.bracket.c_hi);
            let exact = Field::from_fn(g, |p| explicit_wave(p, &ClosedFormParams::new(1.0, 1.0).unwrap()));
            assert!(w.field.max_abs_diff(&exact) < 5e-3);
            (w.speed - 1.0).abs()
        })
        .collect();
    assert!(errs[1] < 2e-3, "{errs:?}");
    assert!(errs[0] / errs[1] > 3.0, "{errs:?}");
}

#[test]
fn bisection_agrees_with_pinned_newton() {
    let (f, g, alpha) = manufactured(64);
    let setup = WaveSetup::new(g, &f, alpha).unwrap().with_source(EXPLICIT);
    let opts = SpeedOptions {
        speed_tol: 1e-9,
        ..SpeedOptions::default()
    };
    let w = find_speed(&setup, &opts).unwrap();
    assert_eq!(w.refinement, Refinement::PinnedNewton);
    let (c, _) = bisect(&setup, &w.bracket, &opts).unwrap();
    assert!((c - w.speed).abs() < 1e-6, "{c} {}", w.speed);
}

#[test]
fn center_value_brackets_alpha() {
    let f = make_bump(0.25, PI / 8.0).unwrap();
    let g = GridSpec::new(8.0, 8f64.powf(0.25), 1024, 32).unwrap();
    let setup = WaveSetup::new(g, &f, 0.25).unwrap();
    let opts = SolverOptions::default();
    assert!(center_value_of_speed(&setup, 50.0, &opts).unwrap() > 0.25);
    let low = sample_speed(&setup, 1e-3, &opts).unwrap();
    assert!(low.h < 0.0, "{low:?}");
    assert!(center_value_of_speed(&setup, 0.0, &opts).is_err());
}

#[test]
fn zero_reaction_gives_harmonic_extension() {
    let g = GridSpec::new(4.0, 2.0, 64, 16).unwrap();
    let setup = WaveSetup::new(g, &ZeroReaction, 0.5).unwrap();
    let opts = SolverOptions::default();
    let c = 0.7;
    let value = center_value_of_speed(&setup, c, &opts).unwrap();
    let (v, _) = crate::grid_solver::solve_truncated(c, g, &ZeroReaction, &DirichletSource::Truncated, &Start::Sub, &opts).unwrap();
    assert!((value - center_value(&v)).abs() < 1e-10);
    assert!(value > 0.0 && value < 1.0);
}

#[test]
fn bracket_needs_a_sign_change() {
    let s = |c: f64, h: f64| SpeedSample {
        c,
        h,
        certificate: Certificate::Converged,
        iterations: 0,
    };
    assert!(SpeedBracket::new(&s(1.0, -0.1), &s(2.0, 0.1)).is_some());
    assert!(SpeedBracket::new(&s(1.0, 0.1), &s(2.0, 0.1)).is_none());
    assert!(SpeedBracket::new(&s(1.0, -0.1), &s(2.0, 0.0)).is_none());
    assert!(SpeedBracket::new(&s(2.0, -0.1), &s(1.0, 0.1)).is_none());
}

#[test]
fn scan_without_sign_change_fails() {
    let g = GridSpec::new(4.0, 2.0, 64, 16).unwrap();
    // With f = 0 the center value never reaches 0.999.
    let setup = WaveSetup::new(g, &ZeroReaction, 0.999).unwrap();
    let opts = SpeedOptions {
        scan_min_exp: -2,
        scan_max_exp: 1,
        ..SpeedOptions::default()
    };
    assert!(matches!(find_speed(&setup, &opts), Err(Error::NoBracket)));
}

#[test]
fn find_speed_is_deterministic() {
    let (f, g, alpha) = manufactured(64);
    let setup = WaveSetup::new(g, &f, alpha).unwrap().with_source(EXPLICIT);
    let a = find_speed(&setup, &SpeedOptions::default()).unwrap();
    let b = find_speed(&setup, &SpeedOptions::default()).unwrap();
    assert_eq!(a.speed.to_bits(), b.speed.to_bits());
    assert_eq!(a.field, b.field);
}

#[test]
fn aitken_limit_of_geometric_sequence() {
    let v: Vec<f64> = (0..4).map(|k| 2.0 + 0.5f64.powi(k)).collect();
    let (limit, err) = extrapolate(&v).unwrap();
    assert!((limit - 2.0).abs() < 1e-14, "{limit}");
    assert!(err > 0.0);
    assert_eq!(extrapolate(&[]), None);
    assert_eq!(extrapolate(&[1.0, 1.5]), Some((1.5, 0.5)));
    // Oscillating differences: no acceleration.
    assert_eq!(extrapolate(&[1.0, 2.0, 1.5]), Some((1.5, 0.5)));
}

#[test]
fn speed_table_leaves_failures_blank() {
    let entries = vec![
        ContinuationEntry {
            half_width: 8.0,
            speed: Some(0.5),
            center_value: Some(0.25),
            outer_iterations: Some(3),
            residual: Some(1e-9),
            diagnostics: None,
            error: None,
        },
        ContinuationEntry {
            half_width: 16.0,
            speed: None,
            center_value: None,
            outer_iterations: None,
            residual: None,
            diagnostics: None,
            error: Some("no bracket".into()),
        },
    ];
    let mut buf = Vec::new();
    write_speed_table(&entries, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "R,c_R,center_value,outer_iterations,residual,identity_gap");
    assert!(lines[1].starts_with("8,5.0000000000000000e-1,"));
    assert_eq!(lines[2], "16,,,,,");
}

#[test]
fn continuation_rejects_bad_schedule() {
    let policy = GridPolicy {
        height: HeightPolicy::QuarterPower,
        hx: 0.1,
        hy: 0.1,
    };
    let f = make_bump(0.25, PI / 8.0).unwrap();
    for schedule in [vec![], vec![8.0, 8.0], vec![16.0, 8.0]] {
        let r = continuation(&schedule, &f, 0.25, &policy, DirichletSource::Truncated, &SpeedOptions::default(), false);
        assert!(r.is_err());
    }
}
