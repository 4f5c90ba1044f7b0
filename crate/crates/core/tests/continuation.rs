use hornatlas::continuation::{
    fixed_point_orbit, horn_root_on_hopf, hopf_rotation, locate_in_tau, trace_both, trace_curve, BifCurve, BifKind,
    CurveStop, LocateControl, ParamBox, StepControl,
};
use hornatlas::periodic::{classify, find_sink_and_saddle, refine_periodic, seed_from_simulation, NewtonControl, SeedBudget, Stability};
use hornatlas::{EulerLorenz, MapModel, ParamPoint, PhasePoint};

const A: f64 = 0.36;

fn horn_box() -> StepControl {
    StepControl { domain: ParamBox { a: (0.2, 0.7), tau: (0.9, 2.0) }, ..StepControl::default() }
}

/// Post-hoc check of every sample against the map itself.
fn verify(curve: &BifCurve) {
    let q = curve.kind.period();
    for s in &curve.samples {
        let (w, m) = EulerLorenz.iterate_with_jacobian(s.params, s.point, q).unwrap();
        assert!(w.dist(s.point) < 1e-10, "periodicity residual {} at {:?}", w.dist(s.point), s.params);
        assert!(curve.kind.test_value(&m).abs() < 1e-8, "g = {} at {:?}", curve.kind.test_value(&m), s.params);
    }
}

fn dist(p: ParamPoint, q: ParamPoint) -> f64 {
    (p.a - q.a).hypot(p.tau - q.tau)
}

/// Index of the first sample within `tol` of `root`, after checking that
/// the distance shrinks monotonically over the ten samples before it.
fn approach_to(curve: &BifCurve, root: ParamPoint, tol: f64) -> usize {
    let d: Vec<f64> = curve.samples.iter().map(|s| dist(s.params, root)).collect();
    let k = d.iter().position(|&x| x < tol).unwrap_or_else(|| panic!("closest approach to the horn root is {}", d.iter().cloned().fold(f64::INFINITY, f64::min)));
    assert!(k >= 10, "too few samples before the approach");
    for i in k - 10..k {
        assert!(d[i + 1] < d[i], "distance to the root grows at sample {i}: {} -> {}", d[i], d[i + 1]);
    }
    k
}

fn sink_37() -> hornatlas::periodic::PeriodicOrbit {
    find_sink_and_saddle(&EulerLorenz, ParamPoint::new(A, 1.7765), 37, &SeedBudget::default()).unwrap().0
}

#[test]
fn hopf_curve_is_tau_one_over_two_a() {
    let ctrl = StepControl { domain: ParamBox { a: (0.29, 0.51), tau: (0.5, 2.5) }, ..StepControl::default() };
    let start = (ParamPoint::new(A, 1.38889), PhasePoint::new(0.6, 0.36));
    let curves = trace_both(&EulerLorenz, BifKind::HopfFixed, start, 1000, &ctrl).unwrap();
    let mut a_range = (f64::INFINITY, f64::NEG_INFINITY);
    for c in &curves {
        assert_eq!(c.stop, CurveStop::DomainBoundary);
        verify(c);
        for s in &c.samples {
            assert!((s.params.tau - 1.0 / (2.0 * s.params.a)).abs() < 1e-8);
            a_range = (a_range.0.min(s.params.a), a_range.1.max(s.params.a));
        }
    }
    assert!(a_range.0 <= 0.3 && a_range.1 >= 0.5, "{a_range:?}");
}

#[test]
fn period_37_bifurcations_on_the_slice() {
    let lc = LocateControl::default();
    let (sink, saddle) = find_sink_and_saddle(&EulerLorenz, ParamPoint::new(A, 1.7765), 37, &SeedBudget::default()).unwrap();
    let sn = locate_in_tau(&EulerLorenz, BifKind::SaddleNode(37), (1.775, 1.7765), &saddle, &lc).unwrap();
    assert!((sn.tau - 1.776243).abs() < 5e-5, "SN {}", sn.tau);
    let ns = locate_in_tau(&EulerLorenz, BifKind::NeimarkSacker(37), (1.778, 1.781), &sink, &lc).unwrap();
    assert!((ns.tau - 1.779444).abs() < 5e-5, "NS {}", ns.tau);
    assert!(ns.bracket.1 - ns.bracket.0 < 1e-9 && ns.g.abs() < 1e-10);

    // the second Neimark–Sacker point, from the sink that reappears past it
    let p = ParamPoint::new(A, 1.7864);
    let seeds = seed_from_simulation(&EulerLorenz, p, 37, &SeedBudget::default()).unwrap();
    let late = refine_periodic(&EulerLorenz, p, 37, seeds.sink[0], &NewtonControl::default()).unwrap();
    assert!(late.stability.is_attracting());
    let ns2 = locate_in_tau(&EulerLorenz, BifKind::NeimarkSacker(37), (1.785, 1.787), &late, &lc).unwrap();
    assert!((ns2.tau - 1.78626168).abs() < 1e-5, "second NS {}", ns2.tau);

    // the pair disappears again in a saddle-node just above
    let sn_up = locate_in_tau(&EulerLorenz, BifKind::SaddleNode(37), (1.7865, 1.787), &saddle, &lc).unwrap();
    assert!((sn_up.tau - 1.786626).abs() < 5e-5, "upper SN {}", sn_up.tau);
}

#[test]
fn saddle_node_37_curve_through_the_slice() {
    let lc = LocateControl::default();
    let (_, saddle) = find_sink_and_saddle(&EulerLorenz, ParamPoint::new(A, 1.7765), 37, &SeedBudget::default()).unwrap();
    let sn = locate_in_tau(&EulerLorenz, BifKind::SaddleNode(37), (1.775, 1.7765), &saddle, &lc).unwrap();
    let ctrl = StepControl { h_max: 2e-3, domain: ParamBox { a: (0.355, 0.365), tau: (1.7, 1.85) }, ..StepControl::default() };
    // move away from the slice along the curve, then come back across it
    let out = trace_curve(&EulerLorenz, BifKind::SaddleNode(37), (sn.orbit.params, sn.orbit.point()), 40, 1, &ctrl).unwrap();
    let end = out.samples.last().unwrap();
    assert!(end.params.a > A + 1e-4, "{:?}", end.params);
    let c = trace_curve(&EulerLorenz, BifKind::SaddleNode(37), (end.params, end.point), 80, -1, &ctrl).unwrap();
    verify(&c);
    let cross = c.samples.windows(2).find(|w| (w[0].params.a - A) * (w[1].params.a - A) <= 0.0).expect("curve crosses a = 0.36");
    let f = (A - cross[0].params.a) / (cross[1].params.a - cross[0].params.a);
    let tau = cross[0].params.tau + f * (cross[1].params.tau - cross[0].params.tau);
    assert!((tau - 1.776243).abs() < 5e-5, "SN curve at a = 0.36: {tau}");
}

#[test]
fn hopf_of_the_fixed_point_on_the_slice() {
    let seed = fixed_point_orbit(&EulerLorenz, ParamPoint::new(A, 1.3)).unwrap();
    let l = locate_in_tau(&EulerLorenz, BifKind::HopfFixed, (1.3, 1.5), &seed, &LocateControl::default()).unwrap();
    assert!((l.tau - 1.388889).abs() < 1e-6, "{}", l.tau);
}

#[test]
fn equal_eigenvalue_points_bracket_the_focus_interval() {
    let lc = LocateControl::default();
    let sink = sink_37();
    let newton = NewtonControl::default();
    let stab = |tau: f64| refine_periodic(&EulerLorenz, ParamPoint::new(A, tau), 37, sink.point(), &newton).unwrap().stability;
    // just past the saddle-node the sink is a node, then a focus
    let e1 = locate_in_tau(&EulerLorenz, BifKind::EqualEigenvalue(37), (1.7763, 1.7765), &sink, &lc).unwrap();
    let node = refine_periodic(&EulerLorenz, ParamPoint::new(A, e1.tau - 1e-7), 37, e1.orbit.point(), &newton).unwrap();
    let focus = refine_periodic(&EulerLorenz, ParamPoint::new(A, e1.tau + 1e-7), 37, e1.orbit.point(), &newton).unwrap();
    assert_eq!(classify(&node.eig), Stability::AttractingNode);
    assert_eq!(classify(&focus.eig), Stability::AttractingFocus);
    assert_eq!(stab(1.7765), Stability::AttractingFocus);
}

#[test]
fn horn_roots_in_closed_form() {
    let r6 = horn_root_on_hopf(1, 6).unwrap();
    assert!((r6.a - 0.5).abs() < 1e-12 && (r6.tau - 1.0).abs() < 1e-12);
    let r5 = horn_root_on_hopf(1, 5).unwrap();
    assert!((r5.tau - 1.381966).abs() < 1e-6 && (r5.a - 0.361803).abs() < 1e-6);
    let rho = hopf_rotation(A).unwrap();
    assert!((rho - 0.20057).abs() < 1e-5 && rho > 0.2 && rho < 8.0 / 37.0);
    assert!(horn_root_on_hopf(1, 2).is_err());
    assert!(horn_root_on_hopf(0, 5).is_err());
}

#[test]
fn period_5_horn_boundaries_meet_at_the_root() {
    let lc = LocateControl::default();
    let (_, saddle) = find_sink_and_saddle(&EulerLorenz, ParamPoint::new(0.38, 1.46), 5, &SeedBudget::default()).unwrap();
    let upper = locate_in_tau(&EulerLorenz, BifKind::SaddleNode(5), (1.46, 1.66), &saddle, &lc).unwrap();
    let c = trace_curve(&EulerLorenz, BifKind::SaddleNode(5), (upper.orbit.params, upper.orbit.point()), 3000, -1, &horn_box())
        .unwrap();
    verify(&c);
    let root = horn_root_on_hopf(1, 5).unwrap();
    approach_to(&c, root, 1e-4);
    // past the root the same curve continues as the other boundary and
    // leaves it again
    let d: Vec<f64> = c.samples.iter().map(|s| dist(s.params, root)).collect();
    let k = d.iter().rposition(|&x| x < 1e-4).unwrap();
    assert!(k + 10 < d.len());
    for i in k..k + 10 {
        assert!(d[i + 1] > d[i]);
    }
}

#[test]
fn period_6_horn_boundaries_meet_at_the_root() {
    let lc = LocateControl::default();
    let (_, saddle) = find_sink_and_saddle(&EulerLorenz, ParamPoint::new(0.465, 1.472), 6, &SeedBudget::default()).unwrap();
    let upper = locate_in_tau(&EulerLorenz, BifKind::SaddleNode(6), (1.472, 1.672), &saddle, &lc).unwrap();
    assert!((upper.tau - 1.497934).abs() < 1e-5);
    let root = horn_root_on_hopf(1, 6).unwrap();
    let c = trace_curve(&EulerLorenz, BifKind::SaddleNode(6), (upper.orbit.params, upper.orbit.point()), 3000, 1, &horn_box())
        .unwrap();
    verify(&c);
    approach_to(&c, root, 1e-4);

    // the other boundary, found at the same a near the root and traced back
    let s = c.samples.iter().rev().find(|s| s.params.a > 0.501 && s.params.tau < 1.05).expect("sample near the root");
    let newton = NewtonControl::default();
    let nearby = refine_periodic(&EulerLorenz, ParamPoint::new(s.params.a, s.params.tau + 1e-6), 6, s.point, &newton).unwrap();
    let other = locate_in_tau(&EulerLorenz, BifKind::SaddleNode(6), (nearby.params.tau, nearby.params.tau + 0.3), &nearby, &lc)
        .unwrap();
    assert!((other.tau - s.params.tau).abs() > 1e-6);
    let reached = [1i8, -1].iter().any(|&d| {
        let c2 = trace_curve(&EulerLorenz, BifKind::SaddleNode(6), (other.orbit.params, other.orbit.point()), 3000, d, &horn_box())
            .unwrap();
        c2.samples.iter().any(|x| dist(x.params, root) < 1e-4)
    });
    assert!(reached, "other boundary does not reach the root");
}
