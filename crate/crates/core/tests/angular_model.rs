use std::f64::consts::{FRAC_PI_8, PI, TAU};

use cusplab::angular_model::*;
use cusplab::effective_ode::*;
use proptest::prelude::*;

fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

#[test]
fn integral_system_holds_on_model_trajectories() {
    for b0 in [PI / 16.0, FRAC_PI_8, PI / 6.0] {
        let traj = integrate(&ModelParams::new(b0, 10.0)).unwrap();
        let res = integral_residual(&traj).unwrap();
        assert!(res.max() < 1e-6, "B0 = {b0}: {}", res.max());
    }
}

#[test]
fn transported_patch_endpoints_follow_the_trajectory() {
    let traj = integrate(&ModelParams::new(FRAC_PI_8, 10.0)).unwrap();
    let g0 = AngularDensity::patch(0.0, FRAC_PI_8);
    for tau in [0.5, 2.0, 5.0] {
        let g = transport_evolve(&g0, &traj, tau).unwrap();
        let s = traj.state_at(tau).unwrap();
        let want = AngularDensity::patch(s.bisector, s.half_angle);
        assert!(g.symmetric_difference(&want) < 4e-6, "τ = {tau}");
        assert!((g.measure() - 4.0 * s.half_angle).abs() < 4e-6);
        assert!(g.is_two_fold());
    }
    let rows = transport_table(&g0, &traj, &[5.0]).unwrap();
    let s = traj.state_at(5.0).unwrap();
    let e = &rows[0].endpoints;
    assert!(circle_dist(e[0], s.bisector - s.half_angle) < 1e-6);
    assert!(circle_dist(e[1], s.bisector + s.half_angle) < 1e-6);
}

#[test]
fn trivial_densities_are_invariant() {
    let traj = integrate(&ModelParams::new(FRAC_PI_8, 5.0)).unwrap();
    assert!(transport_evolve(&AngularDensity::empty(), &traj, 5.0)
        .unwrap()
        .is_empty());
    assert!(transport_evolve(&AngularDensity::full(), &traj, 5.0)
        .unwrap()
        .is_full());
}

#[test]
fn j_integrals_match_direct_angular_quadrature() {
    let traj = integrate(&ModelParams::new(FRAC_PI_8, 5.0)).unwrap();
    let s = traj.state_at(1.3).unwrap();
    let g = AngularDensity::patch(s.bisector, s.half_angle);
    let n = 200_000;
    let (mut js, mut jc) = (0.0, 0.0);
    for k in 0..n {
        let th = (k as f64 + 0.5) * TAU / n as f64;
        if g.contains(th) {
            js += (2.0 * th).sin();
            jc += (2.0 * th).cos();
        }
    }
    let (rs, rc) = j_rates(&s);
    assert!((js * TAU / n as f64 - rs).abs() < 1e-4);
    assert!((jc * TAU / n as f64 - rc).abs() < 1e-4);
}

fn arc_strategy() -> impl Strategy<Value = AngularDensity> {
    prop::collection::vec((0.0f64..TAU, 0.0f64..1.0), 0..4).prop_map(|v| {
        AngularDensity::from_arcs(
            &v.iter().map(|&(lo, l)| (lo, lo + l)).collect::<Vec<_>>(),
            false,
        )
    })
}

proptest! {
    #[test]
    fn symmetric_difference_is_a_metric(a in arc_strategy(), b in arc_strategy(), c in arc_strategy()) {
        let (ab, bc, ac) = (a.symmetric_difference(&b), b.symmetric_difference(&c), a.symmetric_difference(&c));
        prop_assert!(a.symmetric_difference(&a) < 1e-12);
        prop_assert!((ab - b.symmetric_difference(&a)).abs() < 1e-12);
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!(a.measure() <= TAU + 1e-12);
        prop_assert!(a.intersection_measure(&b) <= a.measure().min(b.measure()) + 1e-12);
    }

    #[test]
    fn patch_measure_and_symmetry(bis in -4.0f64..4.0, half in 0.0f64..0.78) {
        let g = AngularDensity::patch(bis, half);
        prop_assert!((g.measure() - 4.0 * half).abs() < 1e-12);
        prop_assert!(g.is_two_fold());
        for k in 0..16 {
            let th = k as f64 * 0.41;
            prop_assert_eq!(g.contains(th), g.contains(th + PI));
        }
    }
}
