use hornatlas::basins::{invariant_circle, CircleSample};
use hornatlas::critical::j0;
use hornatlas::geometry::hausdorff_distance;
use hornatlas::map::{polyline_image, polyline_preimages};
use hornatlas::{Error, EulerLorenz, MapModel, ParamPoint, PhasePoint};

fn close(a: PhasePoint, b: PhasePoint, tol: f64) -> bool {
    a.dist(b) < tol
}

/// Discriminant of the preimage cubic x³ + c₁x + c₀ relative to the size
/// of its terms (floored at 1): zero exactly on J₁.
fn relative_discriminant(p: ParamPoint, w: PhasePoint) -> f64 {
    let t = p.tau;
    let c1 = ((1.0 - t) * (1.0 + p.a * t) - t * w.y) / (t * t);
    let c0 = -(1.0 - t) * w.x / (t * t);
    let d = 4.0 * c1.powi(3) + 27.0 * c0 * c0;
    d / (4.0 * c1.abs().powi(3) + 27.0 * c0 * c0).max(1.0)
}

#[test]
fn apply_examples() {
    let m = EulerLorenz;
    let p = ParamPoint::new(0.36, 1.775);
    assert!(close(m.apply(p, PhasePoint::new(0.6, 0.36)), PhasePoint::new(0.6, 0.36), 1e-15));
    assert_eq!(m.apply(ParamPoint::new(0.7, 0.3), PhasePoint::ORIGIN), PhasePoint::ORIGIN);
    let w = m.apply(ParamPoint::new(0.36, 1.0), PhasePoint::new(1.0, 0.0));
    assert!(close(w, PhasePoint::new(1.36, 1.0), 1e-15));
}

#[test]
fn apply_checked_signals_divergence() {
    let m = EulerLorenz;
    let p = ParamPoint::new(0.36, 1.775);
    assert!(matches!(m.apply_checked(p, PhasePoint::new(1e5, -1e5)), Err(Error::Diverged { .. })));
    assert!(matches!(m.iterate(p, PhasePoint::new(30.0, -30.0), 200), Err(Error::Diverged { .. })));
}

#[test]
fn jacobian_examples() {
    let m = EulerLorenz;
    let (a, t) = (0.36, 1.775);
    let p = ParamPoint::new(a, t);
    let fp = PhasePoint::new(a.sqrt(), a);
    let j = m.jacobian(p, fp);
    let want = [1.0, -t * a.sqrt(), 2.0 * t * a.sqrt(), 1.0 - t];
    for (got, w) in [j.j11, j.j12, j.j21, j.j22].iter().zip(want) {
        assert!((got - w).abs() < 1e-14, "{got} vs {w}");
    }
    let j0 = m.jacobian(p, PhasePoint::ORIGIN);
    assert!((j0.j11 - (1.0 + a * t)).abs() < 1e-15);
    assert_eq!((j0.j12, j0.j21), (0.0, 0.0));
    assert!((j0.j22 - (1.0 - t)).abs() < 1e-15);
}

#[test]
fn det_examples() {
    let m = EulerLorenz;
    let p = ParamPoint::new(0.36, 1.775);
    assert!((m.det_jacobian(p, PhasePoint::ORIGIN) + 1.270225).abs() < 1e-12);
    let hopf = ParamPoint::new(0.36, 1.0 / 0.72);
    assert!((m.det_jacobian(hopf, PhasePoint::new(0.6, 0.36)) - 1.0).abs() < 1e-12);
    let curve = j0(p, (-1.0, 1.0), 21).unwrap();
    for z in &curve.polyline {
        assert!(m.det_jacobian(p, *z).abs() < 1e-12);
    }
}

#[test]
fn fixed_point_has_three_preimages() {
    let m = EulerLorenz;
    let p = ParamPoint::new(0.36, 1.775);
    let w = PhasePoint::new(0.6, 0.36);
    let pre = m.preimages(p, w).unwrap();
    assert_eq!(pre.len(), 3);
    assert!(pre.iter().any(|z| close(*z, w, 1e-12)));
    for z in &pre {
        assert!(close(m.apply(p, *z), w, 1e-10));
    }
}

#[test]
fn preimages_reject_tau_one() {
    let r = EulerLorenz.preimages(ParamPoint::new(0.36, 1.0), PhasePoint::new(0.5, 0.5));
    assert!(matches!(r, Err(Error::DegenerateParameter(_))));
}

#[test]
fn point_on_j1_has_a_double_preimage_on_j0() {
    let m = EulerLorenz;
    let p = ParamPoint::new(0.36, 1.775);
    let on_j0 = PhasePoint::new(0.3, hornatlas::critical::j0_y(p, 0.3));
    let w = m.apply(p, on_j0);
    assert!(relative_discriminant(p, w).abs() < 1e-12);
    let pre = m.preimages(p, w).unwrap();
    assert_eq!(pre.len(), 2, "{pre:?}");
    assert!(pre.iter().any(|z| close(*z, on_j0, 1e-6)));
    assert!(pre.iter().all(|z| close(m.apply(p, *z), w, 1e-10)));
}

#[test]
fn polyline_image_of_constant_curve_is_itself() {
    let p = ParamPoint::new(0.36, 1.775);
    let c = vec![PhasePoint::new(0.6, 0.36); 4];
    let img = polyline_image(&EulerLorenz, p, &c).unwrap();
    assert!(img.iter().zip(&c).all(|(a, b)| close(*a, *b, 1e-15)));
    assert!(polyline_image(&EulerLorenz, p, &[]).is_err());
}

#[test]
fn image_of_j0_lies_on_j1() {
    let p = ParamPoint::new(0.36, 1.775);
    let curve = j0(p, (-0.8, 0.8), 101).unwrap();
    let img = polyline_image(&EulerLorenz, p, &curve.polyline).unwrap();
    for w in img {
        assert!(relative_discriminant(p, w).abs() < 1e-10, "{w:?}");
    }
}

#[test]
fn preimages_of_segment_in_one_preimage_region() {
    let m = EulerLorenz;
    let p = ParamPoint::new(0.36, 1.775);
    let seg: Vec<PhasePoint> = (0..20).map(|k| PhasePoint::new(2.0 + 0.01 * k as f64, -3.0)).collect();
    assert!(seg.iter().all(|w| m.preimages(p, *w).unwrap().len() == 1));
    let branches = polyline_preimages(&m, p, &seg).unwrap();
    assert_eq!(branches.len(), 1);
    let back = polyline_image(&m, p, &branches[0]).unwrap();
    assert!(back.iter().zip(&seg).all(|(a, b)| close(*a, *b, 1e-9)));
}

#[test]
fn invariant_circle_maps_onto_itself_and_has_three_preimage_branches() {
    let m = EulerLorenz;
    let p = ParamPoint::new(0.36, 1.775);
    let mut ic = invariant_circle(&m, p, &CircleSample::default()).unwrap();
    let img = polyline_image(&m, p, &ic).unwrap();
    assert!(hausdorff_distance(&img, &ic) < 5e-3);
    ic.push(ic[0]);
    let branches = polyline_preimages(&m, p, &ic).unwrap();
    assert_eq!(branches.len(), 3, "branch lengths {:?}", branches.iter().map(Vec::len).collect::<Vec<_>>());
    // one of the branches is the circle itself
    assert!(branches.iter().any(|b| hausdorff_distance(b, &ic) < 5e-3));
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    fn params() -> impl Strategy<Value = ParamPoint> {
        (0.05f64..0.9, 0.2f64..2.5)
            .prop_filter("tau away from 1", |(_, t)| (t - 1.0).abs() > 1e-3)
            .prop_map(|(a, t)| ParamPoint::new(a, t))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        #[test]
        fn preimages_round_trip(p in params(), x in -2.0f64..2.0, y in -2.0f64..2.0) {
            let w = PhasePoint::new(x, y);
            let pre = EulerLorenz.preimages(p, w).unwrap();
            prop_assert!(!pre.is_empty());
            for z in pre {
                prop_assert!(EulerLorenz.apply(p, z).dist(w) < 1e-9 * (1.0 + w.norm()));
            }
        }

        #[test]
        fn preimage_count_is_odd_off_j1(p in params(), x in -2.0f64..2.0, y in -2.0f64..2.0) {
            let w = PhasePoint::new(x, y);
            prop_assume!(relative_discriminant(p, w).abs() > 1e-6);
            let n = EulerLorenz.preimages(p, w).unwrap().len();
            prop_assert!(n == 1 || n == 3, "{} preimages", n);
        }

        #[test]
        fn det_is_determinant_of_jacobian(p in params(), x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let z = PhasePoint::new(x, y);
            let j = EulerLorenz.jacobian(p, z);
            let det = j.j11 * j.j22 - j.j12 * j.j21;
            prop_assert!((EulerLorenz.det_jacobian(p, z) - det).abs() < 1e-12 * (1.0 + det.abs()));
        }

        #[test]
        fn jacobian_matches_central_differences(p in params(), x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let m = EulerLorenz;
            let z = PhasePoint::new(x, y);
            let h = 1e-6;
            let dx = (m.apply(p, PhasePoint::new(x + h, y)) - m.apply(p, PhasePoint::new(x - h, y))) * (0.5 / h);
            let dy = (m.apply(p, PhasePoint::new(x, y + h)) - m.apply(p, PhasePoint::new(x, y - h))) * (0.5 / h);
            let j = m.jacobian(p, z);
            for (got, fd) in [(j.j11, dx.x), (j.j21, dx.y), (j.j12, dy.x), (j.j22, dy.y)] {
                prop_assert!((got - fd).abs() < 1e-6 * (1.0 + got.abs()), "{} vs {}", got, fd);
            }
        }
    }
}
