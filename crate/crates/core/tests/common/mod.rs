#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use singavoid_core::geometry::RobotGeometry;
use nalgebra::{Matrix3, Vector3, Vector4};
use singavoid_core::kinematics::{forward_kinematics, jacobians, joint_lengths, socket_angles};
use singavoid_core::runner::Event;
use singavoid_core::screw::{axis_angle_deg, omega_indices, output_twists, reciprocal_product, transmission_wrenches};
use singavoid_core::{LogRecord, Pose};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The shipped default robot with its anchors written out, independent of the
/// layout generator.
pub fn reference_geometry() -> RobotGeometry {
    RobotGeometry::from_anchors(
        [
            Vector3::new(0.2988584094275237, -0.02614672282429745, 0.0),
            Vector3::new(0.0, 0.3, 0.0),
            Vector3::new(0.0, -0.3, 0.0),
            Vector3::new(0.0, 0.0, 0.0),
        ],
        [
            Vector3::new(0.06840402866513377, -0.18793852415718168, 0.0),
            Vector3::new(0.17320508075688776, 0.1, 0.0),
            Vector3::new(0.17320508075688776, -0.1, 0.0),
        ],
    )
}

/// Y-mirror-symmetric geometry with explicit anchors.
pub fn g_star() -> RobotGeometry {
    RobotGeometry::from_anchors(
        [
            Vector3::new(0.3, 0.0, 0.0),
            Vector3::new(-0.02614672282429747, 0.2988584094275237, 0.0),
            Vector3::new(-0.02614672282429747, -0.2988584094275237, 0.0),
            Vector3::new(0.0, 0.0, 0.0),
        ],
        [
            Vector3::new(0.2, 0.0, 0.0),
            Vector3::new(0.06840402866513377, 0.18793852415718168, 0.0),
            Vector3::new(0.06840402866513377, -0.18793852415718168, 0.0),
        ],
    )
}

/// Uniform draw from the sampling box around the home pose.
pub fn raw_pose(r: &mut ChaCha8Rng) -> Pose {
    Pose::new(
        r.random_range(-0.15..0.15),
        r.random_range(0.66..0.86),
        r.random_range(-0.4..0.4),
        r.random_range(-0.6..0.6),
    )
}

/// Pose whose actuator lengths lie strictly inside the joint limits.
pub fn pose_in_joint_box(r: &mut ChaCha8Rng, g: &RobotGeometry) -> Pose {
    loop {
        let p = raw_pose(r);
        if let Ok(q) = joint_lengths(&p, g) {
            if g.joints_within_limits(&q) {
                return p;
            }
        }
    }
}

/// Pose in the joint box, inside socket limits, with every Ω above `min_omega`.
pub fn regular_pose(r: &mut ChaCha8Rng, g: &RobotGeometry, min_omega: f64) -> Pose {
    loop {
        let p = pose_in_joint_box(r, g);
        let sockets_ok = socket_angles(&p, g)
            .map(|a| (0..3).all(|l| a[l] < g.socket_limit_deg[l]))
            .unwrap_or(false);
        if !sockets_ok {
            continue;
        }
        if omega_indices(&p, g).map(|o| o.min > min_omega).unwrap_or(false) {
            return p;
        }
    }
}

/// Start pose of the shipped scenarios, a few degrees of Ω from the (3,4) fold.
pub fn near_fold_pose() -> Pose {
    Pose::new(-0.12, 0.78, 0.2, 0.55)
}

pub fn scenario_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

/// Round trip over random poses in the joint-limit box, started from a
/// guess perturbed by up to 0.1 mm / 0.1 mrad, about one tick of motion.
/// Returns the worst pose error.
pub fn round_trip_worst(g: &RobotGeometry, n: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let x = pose_in_joint_box(&mut r, g);
        let q = joint_lengths(&x, g).unwrap();
        let guess = Pose::new(
            x.x + r.random_range(-1e-4..1e-4),
            x.z + r.random_range(-1e-4..1e-4),
            x.theta + r.random_range(-1e-4..1e-4),
            x.psi + r.random_range(-1e-4..1e-4),
        );
        let fk = forward_kinematics(&q, g, &guess).unwrap();
        worst = worst.max(fk.pose.max_abs_diff(&x));
    }
    worst
}

/// Largest `|J_D xdot + J_I qdot| / |qdot|` with `qdot` from central differences of IK.
pub fn jacobian_fd_worst(g: &RobotGeometry, n: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let x = pose_in_joint_box(&mut r, g);
        let xdot = Vector4::new(
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
        );
        let plus = joint_lengths(&Pose::from_vector(&(x.to_vector() + xdot * h)), g).unwrap();
        let minus = joint_lengths(&Pose::from_vector(&(x.to_vector() - xdot * h)), g).unwrap();
        let qdot = (plus.to_vector() - minus.to_vector()) / (2.0 * h);
        let j = jacobians(&x, g).unwrap();
        let res = j.forward * xdot + j.inverse * qdot;
        worst = worst.max(res.norm() / qdot.norm());
    }
    worst
}


/// A record with every field zeroed except the tick and time.
pub fn blank_record(tick: u64) -> singavoid_core::LogRecord {
    let zero = Pose::new(0.0, 0.0, 0.0, 0.0);
    let q = singavoid_core::JointVector([0.0; 4]);
    singavoid_core::LogRecord {
        tick,
        t: tick as f64 * 0.01,
        f_c: singavoid_core::ForceVector::ZERO,
        e_f: singavoid_core::ForceVector::ZERO,
        dx: [0.0; 4],
        x_r: zero,
        x_a: zero,
        x_c: zero,
        x_true: zero,
        q_a: q,
        q_d: q,
        q_c: q,
        min_omega_a: 90.0,
        pair_a: [1, 2],
        min_omega_c: 90.0,
        pair_c: [1, 2],
        min_omega_true: 90.0,
        dt: [0; 4],
        ext_pin: 1,
        u: [0.0; 4],
        breached: false,
        events: Vec::new(),
    }
}

/// Worst `|$_Oi ∘ $_Tj|`, `i != j`, over random regular poses.
pub fn reciprocity_worst(g: &RobotGeometry, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = regular_pose(&mut r, g, 1.0);
        let ots = output_twists(&x, g).unwrap();
        assert!(!ots.near_singular);
        let wr = transmission_wrenches(&x, g).unwrap();
        for i in 0..4 {
            let t = ots.twist(i).unwrap();
            for (j, w) in wr.iter().enumerate() {
                if i != j {
                    worst = worst.max(reciprocal_product(&t, w).abs());
                }
            }
        }
    }
    worst
}

pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5
}

/// Angular velocity direction obtained by moving actuator `i` alone and
/// differencing the rotation matrices of the FK solutions.
pub fn fd_angular_direction(x: &Pose, g: &RobotGeometry, i: usize) -> Vector3<f64> {
    let h = 1e-6;
    let q = joint_lengths(x, g).unwrap();
    let mut qp = q;
    let mut qm = q;
    qp[i] += h;
    qm[i] -= h;
    let rp = forward_kinematics(&qp, g, x).unwrap().pose.rotation();
    let rm = forward_kinematics(&qm, g, x).unwrap().pose.rotation();
    let rdot = (rp - rm) / (2.0 * h);
    vee(&(rdot * x.rotation().transpose())).normalize()
}

pub fn ots_fd_worst_deg(g: &RobotGeometry, seed: u64, n: usize) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let x = regular_pose(&mut r, g, 5.0);
        let ots = output_twists(&x, g).unwrap();
        for i in 0..4 {
            let w = ots.twist(i).unwrap().primary;
            worst = worst.max(axis_angle_deg(&w, &fd_angular_direction(&x, g, i)));
        }
    }
    worst
}

pub fn sweep_pose(psi: f64) -> Pose {
    let mut x = near_fold_pose();
    x.psi = psi;
    x
}

pub fn det_at(psi: f64, g: &RobotGeometry) -> f64 {
    jacobians(&sweep_pose(psi), g).unwrap().forward.determinant()
}

/// Bisects `det J_D` along the psi sweep through the (3,4) fold.
pub fn singular_psi(g: &RobotGeometry) -> f64 {
    let (mut lo, mut hi) = (0.55, 0.7);
    assert!(det_at(lo, g).signum() != det_at(hi, g).signum());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if det_at(mid, g).signum() == det_at(lo, g).signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Two episodes: ticks 1-2 and 5-6. Actuator 1 only deviates.
pub fn toy_log(lengths: [f64; 4], deviations: [f64; 4], u: [f64; 4]) -> Vec<LogRecord> {
    let mut recs: Vec<LogRecord> = (0..8).map(blank_record).collect();
    for r in recs.iter_mut() {
        r.q_a.0 = [0.8; 4];
        r.q_d.0 = [0.8; 4];
        r.q_c.0 = [0.8; 4];
    }
    recs[1].events.push(Event::AvoidanceEnter);
    recs[3].events.push(Event::AvoidanceExit);
    recs[5].events.push(Event::AvoidanceEnter);
    recs[7].events.push(Event::AvoidanceExit);
    for (k, tick) in [1, 2, 5, 6].into_iter().enumerate() {
        let r = &mut recs[tick];
        r.ext_pin = 0;
        r.q_a[0] = lengths[k];
        r.q_d[0] = lengths[k] + deviations[k];
        r.u[0] = u[k];
    }
    recs
}

/// Overdamped step response from rest: `m x'' + c x' + k x = e`.
pub fn closed_form(k: f64, c: f64, m: f64, e: f64, t: f64) -> (f64, f64) {
    let disc = (c * c - 4.0 * k * m).sqrt();
    let s1 = (-c + disc) / (2.0 * m);
    let s2 = (-c - disc) / (2.0 * m);
    let xs = e / k;
    let x = xs * (1.0 + (s2 * (s1 * t).exp() - s1 * (s2 * t).exp()) / (s1 - s2));
    let v = xs * s1 * s2 * ((s1 * t).exp() - (s2 * t).exp()) / (s1 - s2);
    (x, v)
}
