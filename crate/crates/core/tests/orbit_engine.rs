use hornatlas::orbit::{
    classify_attractor, detect_period, iterate_orbit, lyapunov, rotation_number, AttractorClass, ClassifyBudget, Orbit,
};
use hornatlas::periodic::{find_sink_and_saddle, track_orbit, SeedBudget};
use hornatlas::{EulerLorenz, MapModel, ParamPoint, PhasePoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const A: f64 = 0.36;

fn fixed_point(a: f64) -> PhasePoint {
    PhasePoint::new(a.sqrt(), a)
}

fn near_fixed_point() -> PhasePoint {
    fixed_point(A) + PhasePoint::new(0.01, 0.0)
}

fn quick_budget() -> ClassifyBudget {
    ClassifyBudget { n_lyapunov: 100_000, ..ClassifyBudget::default() }
}

#[test]
fn fixed_point_orbit_is_constant() {
    let p = ParamPoint::new(A, 1.0);
    let o = iterate_orbit(&EulerLorenz, p, fixed_point(A), 0, 50).unwrap();
    assert!(o.points.iter().all(|z| z.dist(fixed_point(A)) < 1e-14));
}

#[test]
fn smooth_circle_before_locking() {
    let p = ParamPoint::new(A, 1.55);
    let o = iterate_orbit(&EulerLorenz, p, near_fixed_point(), 10_000, 10_000).unwrap();
    let c = o.points.iter().fold(PhasePoint::ORIGIN, |s, &z| s + z) * (1.0 / o.len() as f64);
    let radii: Vec<f64> = o.points.iter().map(|z| z.dist(c)).collect();
    let r_min = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let r_max = radii.iter().cloned().fold(0.0, f64::max);
    assert!(r_min > 0.3 * r_max, "radial spread {r_min}..{r_max}");
    // sorted by angle about the centroid, neighbours are close
    let mut ang: Vec<(f64, PhasePoint)> = o.points.iter().map(|&z| ((z.y - c.y).atan2(z.x - c.x), z)).collect();
    ang.sort_by(|u, v| u.0.total_cmp(&v.0));
    let gap = ang.windows(2).map(|w| w[0].1.dist(w[1].1)).fold(0.0, f64::max);
    assert!(gap < 0.01 * r_max.max(1.0), "max neighbour gap {gap}");
    assert!(matches!(classify_attractor(&EulerLorenz, p, near_fixed_point(), &quick_budget()), AttractorClass::CircleLike { .. }));
}

#[test]
fn chaotic_attractor_has_positive_exponent() {
    let p = ParamPoint::new(A, 1.91);
    let o = iterate_orbit(&EulerLorenz, p, near_fixed_point(), 10_000, 10_000).unwrap();
    assert!(o.points.iter().all(|z| z.norm() < 10.0));
    let s = lyapunov(&EulerLorenz, p, near_fixed_point(), 10_000, 100_000).unwrap();
    assert!(s.l1 > 0.01, "{s:?}");
    assert!(matches!(classify_attractor(&EulerLorenz, p, near_fixed_point(), &quick_budget()), AttractorClass::ChaoticLike { .. }));
}

#[test]
fn attracting_fixed_point_below_hopf() {
    let p = ParamPoint::new(A, 1.0);
    let s = lyapunov(&EulerLorenz, p, near_fixed_point(), 0, 10_000).unwrap();
    assert!(s.l1 < -0.01, "{s:?}");
    assert!(matches!(classify_attractor(&EulerLorenz, p, near_fixed_point(), &quick_budget()), AttractorClass::FixedPoint { .. }));
}

#[test]
fn rotation_number_near_hopf() {
    let p = ParamPoint::new(A, 1.0 / (2.0 * A) + 1e-3);
    let o = iterate_orbit(&EulerLorenz, p, near_fixed_point(), 200_000, 10_000).unwrap();
    let rho = rotation_number(&o, fixed_point(A)).unwrap();
    let want = (1.0 - 1.0 / (4.0 * A)).acos() / std::f64::consts::TAU;
    assert!((want - 0.20057).abs() < 1e-5);
    assert!((rho - want).abs() < 2e-4, "{rho} vs {want}");
}

#[test]
fn rotation_number_is_rational_on_the_locked_orbit() {
    let p = ParamPoint::new(A, 1.7765);
    let (sink, _) = find_sink_and_saddle(&EulerLorenz, p, 37, &SeedBudget::default()).unwrap();
    let o = iterate_orbit(&EulerLorenz, p, sink.points[0], 0, 37 * 1000 + 1).unwrap();
    let r = rotation_number(&o, fixed_point(A)).unwrap() * 37.0;
    assert!((r - r.round()).abs() < 1e-6, "rho·37 = {r}");
}

#[test]
fn rotation_of_constant_orbit_is_zero() {
    let o = Orbit { params: ParamPoint::new(A, 1.5), points: vec![PhasePoint::new(1.0, 1.0); 10], transient_dropped: 0 };
    assert_eq!(rotation_number(&o, fixed_point(A)).unwrap(), 0.0);
}

#[test]
fn constant_orbit_has_period_one() {
    let o = Orbit { params: ParamPoint::new(A, 1.5), points: vec![PhasePoint::new(1.0, 1.0); 30], transient_dropped: 0 };
    assert_eq!(detect_period(&o, 10, 1e-8), Some(1));
}

#[test]
fn period_259_locking() {
    let p = ParamPoint::new(A, 1.7835);
    let o = iterate_orbit(&EulerLorenz, p, near_fixed_point(), 1_000_000, 3 * 300).unwrap();
    assert_eq!(detect_period(&o, 300, 1e-8), Some(259));
}

/// The period-407 sink lives on the small circles around the period-37
/// repelling foci, so the start is taken next to one of those foci.
#[test]
fn period_407_near_the_repelling_foci() {
    let (sink, _) = find_sink_and_saddle(&EulerLorenz, ParamPoint::new(A, 1.7765), 37, &SeedBudget::default()).unwrap();
    let focus = track_orbit(&EulerLorenz, &sink, 1.785).unwrap();
    assert!(!focus.stability.is_attracting());
    let p = ParamPoint::new(A, 1.785);
    let o = iterate_orbit(&EulerLorenz, p, focus.points[0] + PhasePoint::new(1e-3, 0.0), 400_000, 3 * 500).unwrap();
    assert_eq!(detect_period(&o, 500, 1e-8), Some(407));
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn orbit_points_follow_the_map_exactly(tau in 1.2f64..1.9, dx in -0.05f64..0.05, dy in -0.05f64..0.05) {
            let p = ParamPoint::new(A, tau);
            let o = iterate_orbit(&EulerLorenz, p, fixed_point(A) + PhasePoint::new(dx, dy), 100, 500).unwrap();
            for w in o.points.windows(2) {
                prop_assert_eq!(EulerLorenz.apply(p, w[0]), w[1]);
            }
        }

        #[test]
        fn exponent_sum_is_mean_log_det(tau in 1.2f64..1.95, dx in -0.05f64..0.05, dy in -0.05f64..0.05) {
            let p = ParamPoint::new(A, tau);
            let z0 = fixed_point(A) + PhasePoint::new(dx, dy);
            let n = 10_000;
            let s = lyapunov(&EulerLorenz, p, z0, 1000, n).unwrap();
            let o = iterate_orbit(&EulerLorenz, p, z0, 1000, n).unwrap();
            let mean = o.points.iter().map(|&z| EulerLorenz.det_jacobian(p, z).abs().ln()).sum::<f64>() / n as f64;
            prop_assert!((s.l1 + s.l2 - mean).abs() < 1e-6, "{} vs {}", s.l1 + s.l2, mean);
            prop_assert!(s.l1 >= s.l2);
        }

        #[test]
        fn rotation_number_survives_dropping_the_first_half(tau in 1.45f64..1.7) {
            let p = ParamPoint::new(A, tau);
            let o = iterate_orbit(&EulerLorenz, p, near_fixed_point(), 100_000, 400_000).unwrap();
            let half = Orbit { points: o.points[o.len() / 2..].to_vec(), ..o.clone() };
            let r0 = rotation_number(&o, fixed_point(A)).unwrap();
            let r1 = rotation_number(&half, fixed_point(A)).unwrap();
            prop_assert!((r0 - r1).abs() < 1e-6, "{} vs {}", r0, r1);
        }
    }
}

#[test]
fn below_hopf_every_start_near_the_fixed_point_settles() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let budget = ClassifyBudget { n_transient: 20_000, n_lyapunov: 2_000, ..ClassifyBudget::default() };
    for _ in 0..100 {
        let tau = rng.gen_range(0.5..0.9 / (2.0 * A));
        let r = 0.02 * rng.gen::<f64>().sqrt();
        let th = rng.gen_range(0.0..std::f64::consts::TAU);
        let z0 = fixed_point(A) + PhasePoint::new(r * th.cos(), r * th.sin());
        let c = classify_attractor(&EulerLorenz, ParamPoint::new(A, tau), z0, &budget);
        assert!(matches!(c, AttractorClass::FixedPoint { .. }), "tau {tau}: {c:?}");
    }
}
