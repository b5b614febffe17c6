mod common;

use approx::assert_abs_diff_eq;
use common::closed_form;
use proptest::prelude::*;
use singavoid_core::admittance::*;
use singavoid_core::{ForceVector, Pose};

const DT: f64 = 0.01;

fn axis_force(axis: usize, v: f64) -> ForceVector {
    let mut a = [0.0; 4];
    a[axis] = v;
    ForceVector::from_array(a)
}

#[test]
fn table_values_are_overdamped() {
    let p = AdmittanceParams::default();
    assert!(894.0f64 * 894.0 > 4.0 * 200.0 * 250.0);
    for axis in 0..4 {
        assert!(p.is_overdamped(axis));
    }
    let (s1, s2) = p.poles(0);
    assert_abs_diff_eq!(s1, (-894.0 + (894.0f64.powi(2) - 4.0 * 200.0 * 250.0).sqrt()) / 400.0, epsilon = 1e-15);
    assert!(s2 < s1 && s1 < 0.0);
}

/// Largest per-sample deviation from the closed form over `n` steps, all axes.
fn step_response_error(n: usize) -> f64 {
    let p = AdmittanceParams::default();
    let mut worst: f64 = 0.0;
    for axis in 0..4 {
        let e = 2.0 * p.k[axis];
        let mut f = Admittance::new(p, DT).unwrap();
        for step in 1..=n {
            let s = f.step(&axis_force(axis, e));
            let (x, _) = closed_form(p.k[axis], p.c[axis], p.m[axis], e, step as f64 * DT);
            worst = worst.max((s.dx[axis] - x).abs());
        }
    }
    worst
}

#[test]
fn step_response_matches_closed_form() {
    assert!(step_response_error(3000) < 1e-6);
    // the discretization is exact, so the agreement is far tighter than required
    assert!(step_response_error(3000) < 1e-12);
}

#[test]
fn rates_match_closed_form() {
    let p = AdmittanceParams::default();
    let mut f = Admittance::new(p, DT).unwrap();
    for step in 1..=500 {
        let s = f.step(&axis_force(0, 250.0));
        let (_, v) = closed_form(250.0, 894.0, 200.0, 250.0, step as f64 * DT);
        assert_abs_diff_eq!(s.dx_rate[0], v, epsilon = 1e-12);
    }
}

#[test]
fn steady_state_is_e_over_k() {
    let p = AdmittanceParams::default();
    let mut f = Admittance::new(p, DT).unwrap();
    let e = ForceVector::new(250.0, -40.0, 1.5, -3.0);
    for _ in 0..100_000 {
        f.step(&e);
    }
    let ea = e.to_array();
    assert_abs_diff_eq!(f.state.dx[0], 1.0, epsilon = 1e-12);
    for axis in 0..4 {
        assert_abs_diff_eq!(f.state.dx[axis], ea[axis] / p.k[axis], epsilon = 1e-12);
        assert_abs_diff_eq!(f.state.dx_rate[axis], 0.0, epsilon = 1e-12);
    }
}

#[test]
fn halving_dt_gives_same_samples() {
    let p = AdmittanceParams::default();
    let mut coarse = Admittance::new(p, DT).unwrap();
    let mut fine = Admittance::new(p, DT / 2.0).unwrap();
    let mut worst: f64 = 0.0;
    for n in 0..1000 {
        // piecewise-constant input, changing on coarse tick boundaries
        let e = ForceVector::new(30.0 * ((n / 37) % 3) as f64, -12.0, 0.4 * (n % 5) as f64, -2.0);
        let a = *coarse.step(&e);
        fine.step(&e);
        let b = *fine.step(&e);
        for i in 0..4 {
            worst = worst.max((a.dx[i] - b.dx[i]).abs());
        }
    }
    assert!(worst < 1e-9, "worst {worst:e}");
}

#[test]
fn gated_decay_within_five_slow_time_constants() {
    let p = AdmittanceParams::default();
    for axis in 0..4 {
        let mut f = Admittance::new(p, DT).unwrap();
        f.state.dx[axis] = 0.1;
        let tau = -1.0 / p.poles(axis).0;
        let n = (5.0 * tau / DT).ceil() as usize;
        let mut last = 0.1f64;
        for _ in 0..n {
            last = f.step(&ForceVector::ZERO).dx[axis];
            assert!(last.abs() <= 0.1 + 1e-15);
        }
        assert!(last.abs() < 0.001, "axis {axis}: {last}");
        for _ in 0..100_000 {
            f.step(&ForceVector::ZERO);
        }
        assert!(f.state.dx[axis].abs() < 1e-12);
    }
}

#[test]
fn gating_is_continuous() {
    let p = AdmittanceParams::default();
    let mut f = Admittance::new(p, DT).unwrap();
    let e = ForceVector::new(100.0, 80.0, 3.0, -4.0).to_array();
    for _ in 0..80 {
        f.step(&ForceVector::from_array(e));
    }
    let before = f.state;
    let after = *f.step(&ForceVector::ZERO);
    for i in 0..4 {
        let accel = (p.c[i] * before.dx_rate[i].abs() + p.k[i] * before.dx[i].abs()) / p.m[i];
        let jump = (after.dx[i] - before.dx[i]).abs();
        assert!(jump <= before.dx_rate[i].abs() * DT + accel * DT * DT, "axis {i}");
    }
}

#[test]
fn invalid_step_rejected() {
    assert!(Admittance::new(AdmittanceParams::default(), 0.0).is_err());
    assert!(Admittance::new(AdmittanceParams::default(), -0.01).is_err());
    assert!(Admittance::new(AdmittanceParams::default(), f64::NAN).is_err());
}

#[test]
fn zero_input_keeps_rest() {
    let mut f = Admittance::new(AdmittanceParams::default(), DT).unwrap();
    for _ in 0..1000 {
        assert_eq!(f.step(&ForceVector::ZERO).dx, [0.0; 4]);
    }
}

#[test]
fn compose_examples() {
    let xr = Pose::new(0.0, 0.7, 0.0, 0.0);
    assert_eq!(compose_reference(&xr, &[0.0; 4]), xr);
    assert_eq!(compose_reference(&xr, &[0.01, 0.0, 0.0, 0.1]), Pose::new(0.01, 0.7, 0.0, 0.1));
}

proptest! {
    #[test]
    fn compose_is_additive(a in prop::array::uniform4(-0.1..0.1f64), b in prop::array::uniform4(-0.1..0.1f64)) {
        let xr = Pose::new(0.01, 0.72, -0.05, 0.2);
        let lhs = compose_reference(&compose_reference(&xr, &a), &b);
        let ab = [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]];
        prop_assert!(lhs.max_abs_diff(&compose_reference(&xr, &ab)) < 1e-15);
    }

    #[test]
    fn filter_is_linear(e in prop::array::uniform4(-50.0..50.0f64), s in -3.0..3.0f64, n in 1usize..300) {
        let p = AdmittanceParams::default();
        let mut a = Admittance::new(p, DT).unwrap();
        let mut b = Admittance::new(p, DT).unwrap();
        let fe = ForceVector::from_array(e);
        for _ in 0..n {
            a.step(&fe);
            b.step(&fe.scale(s));
        }
        for i in 0..4 {
            prop_assert!((b.state.dx[i] - s * a.state.dx[i]).abs() <= 1e-12 * (1.0 + a.state.dx[i].abs()));
        }
    }

    #[test]
    fn response_never_overshoots_from_rest(e in -50.0..50.0f64, axis in 0usize..4, n in 1usize..2000) {
        let p = AdmittanceParams::default();
        let mut f = Admittance::new(p, DT).unwrap();
        for _ in 0..n {
            f.step(&axis_force(axis, e));
        }
        prop_assert!(f.state.dx[axis].abs() <= (e / p.k[axis]).abs() * (1.0 + 1e-12));
    }
}
