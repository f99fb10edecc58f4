use super::*;
use crate::integrators::{integrate, integrate_hamiltonian, IntegratorConfig, Method};
use crate::model::{Matrix, State, SystemDefinition, Trajectory, Vector};
use std::f64::consts::PI;

fn drag_sys() -> SystemDefinition {
    SystemDefinition::linear(None, Some(Matrix::from_element(1, 1, 1.0)), Matrix::zeros(1, 1)).unwrap()
}

fn coupled_sys() -> SystemDefinition {
    let c = Matrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
    SystemDefinition::linear(None, Some(c), Matrix::zeros(2, 2)).unwrap()
}

fn oscillator_sys() -> SystemDefinition {
    SystemDefinition::linear(None, Some(Matrix::from_element(1, 1, 0.2)), Matrix::identity(1, 1)).unwrap()
}

fn run(sys: &SystemDefinition, q: &[f64], p: &[f64], t_end: f64) -> Trajectory {
    integrate(sys, &State::from_slices(0.0, q, p), &IntegratorConfig::rk45(t_end, 1e-10)).unwrap()
}

fn drag_traj(t_end: f64) -> Trajectory {
    run(&drag_sys(), &[0.0], &[1.0], t_end)
}

fn coupled_traj(t_end: f64) -> Trajectory {
    run(&coupled_sys(), &[0.0, 0.0], &[1.0, -1.0], t_end)
}

#[test]
fn drag_has_one_increasing_segment() {
    let segs = segment_monotone(&drag_traj(5.0), 0, None).unwrap();
    assert_eq!(segs.len(), 1);
    assert_eq!(segs[0].direction, Direction::Increasing);
    assert_eq!(segs[0].t_window, (0.0, 5.0));
}

#[test]
fn oscillator_has_four_segments_at_closed_form_turning_times() {
    let traj = run(&oscillator_sys(), &[1.0], &[0.0], 4.0 * PI);
    let segs = segment_monotone(&traj, 0, None).unwrap();
    assert_eq!(segs.len(), 4);
    let w1 = (1.0f64 - 0.01).sqrt();
    let turns = turning_times(&traj, 0);
    assert_eq!(turns.len(), 3);
    for (k, t) in turns.iter().enumerate() {
        assert!((t - (k + 1) as f64 * PI / w1).abs() < 1e-8, "{t}");
    }
    let dirs: Vec<_> = segs.iter().map(|s| s.direction).collect();
    assert_eq!(dirs, [Direction::Decreasing, Direction::Increasing, Direction::Decreasing, Direction::Increasing]);
    for s in &segs {
        let sign = s.direction.sign();
        assert!(s.samples.windows(2).all(|w| (w[1].q - w[0].q) * sign > 0.0));
        // strictly inside the window the speed exceeds the threshold
        let eps = default_eps_turn(&traj, 0);
        assert!(s.samples[1..s.samples.len() - 1].iter().all(|x| x.qdot.abs() > eps));
    }
}

#[test]
fn constant_coordinate_is_degenerate() {
    let traj = run(&coupled_sys(), &[0.0, 0.0], &[0.0, 0.0], 1.0);
    assert_eq!(segment_monotone(&traj, 0, None).unwrap_err(), ReconstructionError::DegenerateCoordinate(0));
    // its force vanishes, so the whole reconstruction degrades to zero potentials
    let rec = reconstruct(&traj, &coupled_sys(), &ReconstructionOptions::default()).unwrap();
    assert!(rec.substitute.potentials().iter().all(|w| w.is_zero()));
}

#[test]
fn oversized_threshold_is_rejected() {
    let err = segment_monotone(&drag_traj(1.0), 0, Some(10.0)).unwrap_err();
    assert!(matches!(err, ReconstructionError::Threshold { coord: 0, .. }));
}

#[test]
fn inverse_maps_match_closed_forms() {
    let traj = drag_traj(5.0);
    let seg = segment_monotone(&traj, 0, None).unwrap().remove(0);
    let inv = build_inverse_map(seg).unwrap();
    assert!((inv.time_at(0.5) - 2f64.ln()).abs() < 1e-6);
    assert!((inv.refine(&traj, 0.5) - 2f64.ln()).abs() < 1e-9);

    let traj = coupled_traj(5.0);
    let seg = segment_monotone(&traj, 0, None).unwrap().remove(0);
    let inv = build_inverse_map(seg).unwrap();
    assert!((inv.time_at(0.25) - 0.5 * 2f64.ln()).abs() < 1e-6);
}

#[test]
fn identity_motion_inverts_exactly_on_nodes() {
    let seg = MonotoneSegment {
        coord: 0,
        branch_id: 0,
        t_window: (0.0, 1.0),
        direction: Direction::Increasing,
        samples: (0..=10).map(|k| SegmentSample { q: k as f64 / 10.0, t: k as f64 / 10.0, qdot: 1.0 }).collect(),
    };
    let inv = build_inverse_map(seg.clone()).unwrap();
    for s in &seg.samples {
        assert_eq!(inv.time_at(s.q), s.t);
    }
    let short = MonotoneSegment { samples: seg.samples[..3].to_vec(), ..seg };
    assert_eq!(build_inverse_map(short).unwrap_err(), ReconstructionError::TooFewSamples { got: 3, need: 4 });
}

#[test]
fn inverse_round_trip_on_oscillator_branches() {
    let traj = run(&oscillator_sys(), &[1.0], &[0.0], 4.0 * PI);
    for seg in segment_monotone(&traj, 0, None).unwrap() {
        let inv = build_inverse_map(seg).unwrap();
        let (lo, hi) = inv.domain();
        for k in 0..=200 {
            let q = lo + (hi - lo) * k as f64 / 200.0;
            let t = inv.refine(&traj, q);
            assert!((traj.coordinate_at(0, t).0 - q).abs() < 1e-12);
        }
    }
}

#[test]
fn drag_force_and_work_match_closed_form() {
    let traj = drag_traj(5.0);
    let sys = drag_sys();
    let segs = segment_monotone(&traj, 0, None).unwrap();
    let force = reconstruct_force(&traj, &sys, 0, &segs).unwrap();
    assert!((force.eval(0, 0.5).unwrap() + 0.5).abs() < 1e-9);
    let (lo, hi) = force.branch(0).domain();
    assert!(lo == 0.0 && (hi - (1.0 - (-5.0f64).exp())).abs() < 1e-9);
    let mut worst: f64 = 0.0;
    for k in 0..=1000 {
        let x = lo + (hi - lo) * k as f64 / 1000.0;
        worst = worst.max((force.eval(0, x).unwrap() - (x - 1.0)).abs());
    }
    assert!(worst < 1e-6, "{worst}");
    assert!(force.restriction_residual()[0] < 1e-10);

    let w = integrate_work_potential(&force, 0.0).unwrap();
    assert_eq!(w.value(0, 0.0).unwrap(), 0.0);
    for x in [0.1, 0.5, 0.9, 0.99] {
        assert!((w.value(0, x).unwrap() - (0.5 * x * x - x)).abs() < 1e-8, "{x}");
    }
    // reversing the limits flips the sign
    let ab = integrate_between(&force, 0, 0.2, 0.7, 50).unwrap();
    let ba = integrate_between(&force, 0, 0.7, 0.2, 50).unwrap();
    assert!((ab + ba).abs() < 1e-10);
    assert!((ab - ((0.5 * 0.49 - 0.7) - (0.5 * 0.04 - 0.2))).abs() < 1e-8);
}

#[test]
fn drag_work_reaches_limit_within_slack() {
    // long horizon: the trimmed branch ends within the slack of x = 1
    let traj = drag_traj(20.0);
    let rec = reconstruct(&traj, &drag_sys(), &ReconstructionOptions::default()).unwrap();
    let w = &rec.substitute.potentials()[0];
    assert!((w.value(0, 1.0).unwrap() + 0.5).abs() < 1e-8);
    assert!(w.value(0, 1.0 + 1e-3).is_err());
}

#[test]
fn coupled_force_and_work_match_closed_form() {
    let traj = coupled_traj(5.0);
    let rec = reconstruct(&traj, &coupled_sys(), &ReconstructionOptions::default()).unwrap();
    let fx = rec.forces[0].as_ref().unwrap();
    let fy = rec.forces[1].as_ref().unwrap();
    assert!((fx.eval(0, 0.0).unwrap() + 2.0).abs() < 1e-9);
    for k in 0..=100 {
        let x = 0.49 * k as f64 / 100.0;
        assert!((fx.eval(0, x).unwrap() - (4.0 * x - 2.0)).abs() < 1e-6);
        assert!((fy.eval(0, -x).unwrap() - (-4.0 * x + 2.0)).abs() < 1e-6);
    }
    let w = &rec.substitute.potentials()[0];
    assert!((w.value(0, 0.25).unwrap() - (2.0 * 0.0625 - 0.5)).abs() < 1e-8);
    let sel = vec![0, 0];
    let h = |q: [f64; 2], p: [f64; 2]| {
        rec.substitute.hamiltonian(&sel, &Vector::from_row_slice(&q), &Vector::from_row_slice(&p)).unwrap()
    };
    assert!((h([0.0, 0.0], [1.0, -1.0]) - 1.0).abs() < 1e-12);
    let end = traj.last().q[0];
    assert!((h([end, -end], [0.0, 0.0]) + 2.0 * (2.0 * end * end - 2.0 * end)).abs() < 1e-8);
}

#[test]
fn drag_substitute_values_and_gradients() {
    let traj = drag_traj(20.0);
    let rec = reconstruct(&traj, &drag_sys(), &ReconstructionOptions::default()).unwrap();
    let s = &rec.substitute;
    let v = |x: f64| Vector::from_element(1, x);
    assert!((s.hamiltonian(&[0], &v(0.0), &v(1.0)).unwrap() - 0.5).abs() < 1e-12);
    assert!((s.hamiltonian(&[0], &v(1.0), &v(0.0)).unwrap() - 0.5).abs() < 1e-8);
    assert!((s.gradient_q(&[0], &v(0.5)).unwrap()[0] - 0.5).abs() < 1e-9);
    assert_eq!(s.gradient_p(&v(0.3))[0], 0.3);
}

#[test]
fn zero_damping_gives_identity_substitute() {
    let sys = SystemDefinition::linear(None, None, Matrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0])).unwrap();
    let traj = run(&sys, &[1.0, 0.0], &[0.0, 0.5], 10.0);
    let rec = reconstruct(&traj, &sys, &ReconstructionOptions::default()).unwrap();
    for f in rec.forces.iter().flatten() {
        assert!(f.branches.iter().all(|b| b.table.iter().all(|r| r.2 == 0.0)));
    }
    let s = &rec.substitute;
    assert!(s.potentials().iter().all(|w| w.is_zero()));
    let (q, p) = (Vector::from_row_slice(&[3.0, -7.0]), Vector::from_row_slice(&[0.1, 0.2]));
    let sel = s.select_branches(&q, &p).unwrap();
    assert_eq!(s.hamiltonian(&sel, &q, &p).unwrap(), sys.energy(&q, &p));
}

#[test]
fn hamiltonian_is_constant_along_oscillator_curve() {
    let traj = run(&oscillator_sys(), &[1.0], &[0.0], 4.0 * PI);
    let rec = reconstruct(&traj, &oscillator_sys(), &ReconstructionOptions::default()).unwrap();
    assert_eq!(rec.substitute.branch_counts(), vec![4]);
    let h0 =
        rec.substitute.hamiltonian(&rec.substitute.select_branches_at_time(0.0), &traj.ic().q, &traj.ic().p).unwrap();
    assert!((h0 - 0.5).abs() < 1e-12);
    let mut worst: f64 = 0.0;
    for s in traj.samples() {
        let sel = rec.substitute.select_branches_at_time(s.t);
        worst = worst.max((rec.substitute.hamiltonian(&sel, &s.q, &s.p).unwrap() - h0).abs());
    }
    assert!(worst < 1e-6, "{worst}");
    for f in rec.forces.iter().flatten() {
        assert!(f.restriction_residual().iter().all(|r| *r < 1e-6));
    }
}

#[test]
fn substitute_reproduces_drag_curve() {
    let traj = drag_traj(20.0);
    let rec = reconstruct(&traj, &drag_sys(), &ReconstructionOptions::default()).unwrap();
    let cfg = IntegratorConfig::fixed(Method::Gauss4, 5.0, 1e-3);
    let sub = integrate_hamiltonian(&rec.substitute, traj.ic(), &cfg).unwrap();
    for s in sub.samples() {
        let x = 1.0 - (-s.t).exp();
        assert!((s.q[0] - x).abs() < 1e-6 && (s.p[0] - (-s.t).exp()).abs() < 1e-6, "t={}", s.t);
    }
}

#[test]
fn substitute_reproduces_coupled_curve() {
    let traj = coupled_traj(6.0);
    let rec = reconstruct(&traj, &coupled_sys(), &ReconstructionOptions::default()).unwrap();
    let cfg = IntegratorConfig::fixed(Method::Gauss4, 5.0, 1e-3);
    let sub = integrate_hamiltonian(&rec.substitute, traj.ic(), &cfg).unwrap();
    let mut worst: f64 = 0.0;
    for s in sub.samples() {
        let e = (-2.0 * s.t).exp();
        worst = worst.max((s.q[0] - (0.5 - 0.5 * e)).abs()).max((s.p[0] - e).abs());
        worst = worst.max((s.q[1] + (0.5 - 0.5 * e)).abs()).max((s.p[1] + e).abs());
    }
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn equivalent_stiffness_on_drag() {
    let traj = drag_traj(5.0);
    let eq = equivalent_stiffness(&traj, &drag_sys(), &ReconstructionOptions::default()).unwrap();
    let c = &eq.coords[0];
    assert!(c.identity_residual < 1e-12);
    let br = &c.branches[0];
    // ρ(x) = 1 - x; κ(0.5) = 1
    for (k, q) in br.q.iter().enumerate() {
        assert!((br.rho[k][0] - (1.0 - q)).abs() < 1e-8);
        match &br.kappa[k] {
            Some(kap) => assert!((kap[0] - (1.0 - q) / q).abs() < 1e-6 * (1.0 / q).max(1.0)),
            None => assert!(q.abs() <= c.eps_div),
        }
    }
    let k = br.q.iter().position(|q| (q - 0.5).abs() < 1e-12);
    if let Some(k) = k {
        assert!((br.k_equiv[k].unwrap() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn equivalent_stiffness_matches_direct_hamiltonian() {
    let traj = coupled_traj(5.0);
    let sys = coupled_sys();
    let opts = ReconstructionOptions::default();
    let rec = reconstruct(&traj, &sys, &opts).unwrap();
    let eq = equivalent_stiffness(&traj, &sys, &opts).unwrap();
    // off-diagonal damping appears in ρ
    assert!(eq.coords[0].branches[0].rho.iter().any(|r| r[1] != 0.0));
    let stiff = eq.substitute(&sys).unwrap();
    let mut worst: f64 = 0.0;
    for s in traj.samples().iter().step_by(50) {
        let sel = rec.substitute.select_branches_at_time(s.t);
        let a = rec.substitute.hamiltonian(&sel, &s.q, &s.p).unwrap();
        let b = stiff.hamiltonian(&sel, &s.q, &s.p).unwrap();
        worst = worst.max((a - b).abs());
    }
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn diagonal_damping_has_no_cross_terms() {
    let sys = SystemDefinition::linear(
        None,
        Some(Matrix::from_diagonal(&Vector::from_row_slice(&[0.3, 0.2]))),
        Matrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]),
    )
    .unwrap();
    let traj = run(&sys, &[1.0, 0.0], &[0.0, 0.5], 3.0);
    let eq = equivalent_stiffness(&traj, &sys, &ReconstructionOptions::default()).unwrap();
    for c in &eq.coords {
        for b in &c.branches {
            for r in &b.rho {
                assert_eq!(r[1 - c.coord], 0.0);
            }
        }
    }
}

#[test]
fn domain_exit_carries_nearest_branch() {
    let traj = drag_traj(5.0);
    let rec = reconstruct(&traj, &drag_sys(), &ReconstructionOptions::default()).unwrap();
    let e = rec.substitute.hamiltonian(&[0], &Vector::from_element(1, 2.0), &Vector::from_element(1, 0.0)).unwrap_err();
    assert_eq!(e.nearest_branch, Some(0));
    assert_eq!(e.coord, 0);
    assert!(rec.substitute.select_branches(&Vector::from_element(1, -1.0), &Vector::from_element(1, 1.0)).is_err());
}

#[test]
fn anchor_outside_is_rejected() {
    let traj = drag_traj(5.0);
    let segs = segment_monotone(&traj, 0, None).unwrap();
    let force = reconstruct_force(&traj, &drag_sys(), 0, &segs).unwrap();
    assert!(matches!(integrate_work_potential(&force, 3.0), Err(ReconstructionError::AnchorOutside { .. })));
}
