use std::f64::consts::E;

use cusplab::bounds_lab::*;
use proptest::prelude::*;

#[test]
fn iterates_reproduce_their_taylor_partial_sums() {
    let p = BoundParams::default();
    let g = GridFunction::log_spaced(0.5, 513, 1.0, 20.0, 12).unwrap();
    for m in [1, 2, 5, 12] {
        let it = iterate_f(&p, m, &g).unwrap();
        for (i, &t) in g.t.iter().enumerate() {
            for (k, &l) in g.ell.iter().enumerate() {
                let s = iterate_series(&p, m, t, l);
                assert!(
                    (it.values[i][k] - s).abs() <= 1e-5 * s.max(1e-300),
                    "m={m} t={t} ℓ={l}"
                );
            }
        }
    }
    // m = 1 is F⁽⁰⁾ itself.
    let one = iterate_f(&p, 1, &g).unwrap();
    assert_eq!(one.values[100][3], f0(&p, g.t[100], g.ell[3]));
}

#[test]
fn too_coarse_time_grids_are_rejected() {
    let g = GridFunction::log_spaced(0.5, 64, 1.0, 20.0, 4).unwrap();
    assert!(iterate_f(&BoundParams::default(), 3, &g).is_err());
}

#[test]
fn printed_closed_form_fails_where_stirling_bound_holds() {
    let p = BoundParams::default();
    // m = 3, Ctℓ = 3 at ℓ = 18.4.
    let (m, t, l) = (3, 3.0 / 18.4, 18.4);
    let f = iterate_series(&p, m, t, l);
    assert!(f > closed_form(&p, m, t, l));
    assert!(f <= stirling_bound(&p, m, t, l));
}

#[test]
fn closed_form_at_time_zero() {
    let p = BoundParams::default();
    assert_eq!(closed_form(&p, 4, 0.0, 10.0), 0.2);
}

#[test]
fn descendants_with_linear_kappa() {
    let p = BoundParams {
        kappa: Kappa::Power {
            scale: 1.0,
            exponent: 1.0,
        },
        ..BoundParams::default()
    };
    let ell = 100.0;
    let q = choose_parameters(&p, ell).unwrap();
    let mut prev = 0.0;
    for m in 1..=5 {
        let d = kappa_descendants(&p, m, q.eta, ell, 1.0 / ell).unwrap();
        assert!(d.value.is_finite() && d.value >= prev);
        assert!(d.holds(), "m={m}: {} > {}", d.value, d.bound);
        prev = d.value;
    }
}

#[test]
fn eta_scaling_and_decay_along_doubly_exponential_radii() {
    let p = BoundParams::default();
    let mut prev: Option<(f64, Parameters, f64, f64)> = None;
    for k in 1..=6 {
        let ell = 10f64.powi(k);
        let q = choose_parameters(&p, ell).unwrap();
        let (f, g) = (decay_f(&p, ell), final_g_bound(&p, ell, 0.5).unwrap().total);
        assert!(q.m as f64 >= E * q.xi && q.m as f64 <= 4.0 * q.xi);
        if let Some((pl, pq, pf, pg)) = prev {
            assert!(q.eta * ell > pq.eta * pl);
            assert!(q.eta < pq.eta && f < pf && g < pg);
        }
        prev = Some((ell, q, f, g));
    }
}

#[test]
fn bounds_csv_schema() {
    let p = BoundParams::default();
    let rows = bounds_table(&p, &[10.0, 100.0], 0.5).unwrap();
    let mut out = Vec::new();
    write_bounds_csv(&rows, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,xi,m,eta,bound_F,bound_G"));
    assert_eq!(lines.count(), 2);
}

proptest! {
    #[test]
    fn stirling_tail_is_below_exp_minus_xi(xi in 1.0f64..50.0) {
        let m = (E * xi).ceil();
        prop_assert!(m <= 4.0 * xi);
        prop_assert!((xi / m).powf(m) <= (-xi).exp());
    }

    #[test]
    fn stirling_bound_dominates_partial_sums(c in 0.3f64..3.0, m in 1usize..33, x in 0.0f64..30.0, ell in 1.0f64..1e6) {
        let p = BoundParams { c, ..BoundParams::default() };
        let t = x / (c * ell);
        prop_assert!(iterate_series(&p, m, t, ell) <= stirling_bound(&p, m, t, ell) * (1.0 + 1e-12));
    }

    #[test]
    fn f0_decreases_in_r(t in 0.0f64..1.0, l1 in 0.1f64..100.0, dl in 0.0f64..100.0) {
        let p = BoundParams::default();
        prop_assert!(f0(&p, t, l1) <= f0(&p, t, l1 + dl));
    }
}
