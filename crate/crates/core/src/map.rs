//! The Euler–Lorenz map family, its derivative, and its multivalued inverse.
//!
//! The map is
//!
//! ```text
//! x' = (1 + a·τ)·x − τ·x·y
//! y' = (1 − τ)·y + τ·x²
//! ```
//!
//! the forward-Euler discretization (step τ) of `dx/dt = ax − xy`,
//! `dy/dt = −y + x²`. It is noninvertible: a point has one or three
//! first-rank preimages, separated by the image of the critical curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::geometry::{Jacobian2, PhasePoint};

/// Iterates with |x| or |y| above this are treated as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e8;

/// Relative cubic discriminant below which two roots are reported as one
/// double root.
pub const DOUBLE_ROOT_TOL: f64 = 1e-12;

/// A point (a, τ) in parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamPoint {
    pub a: f64,
    pub tau: f64,
}

impl ParamPoint {
    pub const fn new(a: f64, tau: f64) -> Self {
        ParamPoint { a, tau }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.a.is_finite() || !self.tau.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite parameters {self:?}")));
        }
        if self.tau <= 0.0 {
            return Err(Error::InvalidInput(format!("tau must be positive, got {}", self.tau)));
        }
        Ok(())
    }

    /// Preimage computations divide by 1 − τ.
    pub fn require_invertible_slice(&self) -> Result<()> {
        if self.tau == 1.0 {
            Err(Error::DegenerateParameter("tau = 1 has no well-defined preimage cubic"))
        } else {
            Ok(())
        }
    }
}

#[inline]
pub(crate) fn diverged(z: PhasePoint) -> bool {
    !(z.x.abs() <= DIVERGENCE_THRESHOLD && z.y.abs() <= DIVERGENCE_THRESHOLD)
}

/// A planar map family with two parameters.
pub trait MapModel: Sync {
    fn apply(&self, p: ParamPoint, z: PhasePoint) -> PhasePoint;

    fn jacobian(&self, p: ParamPoint, z: PhasePoint) -> Jacobian2;

    fn det_jacobian(&self, p: ParamPoint, z: PhasePoint) -> f64 {
        self.jacobian(p, z).det()
    }

    /// Partial derivatives of `apply` with respect to `a` and `τ`.
    fn param_derivatives(&self, p: ParamPoint, z: PhasePoint) -> (PhasePoint, PhasePoint);

    /// All real first-rank preimages of `w`.
    fn preimages(&self, p: ParamPoint, w: PhasePoint) -> Result<Vec<PhasePoint>>;

    /// `apply(base + d) − apply(base)`. Models that can evaluate this
    /// difference without cancellation should override it; branch seeding
    /// relies on it for resolution below the rounding unit of `base`.
    fn apply_displacement(&self, p: ParamPoint, base: PhasePoint, d: PhasePoint) -> PhasePoint {
        self.apply(p, base + d) - self.apply(p, base)
    }

    /// `apply` with an explicit divergence signal instead of non-finite
    /// output.
    fn apply_checked(&self, p: ParamPoint, z: PhasePoint) -> Result<PhasePoint> {
        let w = self.apply(p, z);
        if diverged(w) {
            Err(Error::Diverged { step: 1 })
        } else {
            Ok(w)
        }
    }

    /// `n`-fold composition, failing on divergence with the step index.
    fn iterate(&self, p: ParamPoint, mut z: PhasePoint, n: usize) -> Result<PhasePoint> {
        for step in 1..=n {
            z = self.apply(p, z);
            if diverged(z) {
                return Err(Error::Diverged { step });
            }
        }
        Ok(z)
    }

    /// `n`-fold composition together with the chained Jacobian
    /// `J(z_{n-1})···J(z_0)`.
    fn iterate_with_jacobian(
        &self,
        p: ParamPoint,
        mut z: PhasePoint,
        n: usize,
    ) -> Result<(PhasePoint, Jacobian2)> {
        let mut m = Jacobian2::IDENTITY;
        for step in 1..=n {
            m = self.jacobian(p, z).mul(&m);
            z = self.apply(p, z);
            if diverged(z) {
                return Err(Error::Diverged { step });
            }
        }
        Ok((z, m))
    }
}

/// The Euler–Lorenz family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EulerLorenz;

impl EulerLorenz {
    /// The nontrivial fixed point (√a, a) in the right half-plane.
    pub fn fixed_point(&self, p: ParamPoint) -> PhasePoint {
        PhasePoint::new(p.a.sqrt(), p.a)
    }

    /// Coefficients `(c1, c0)` of the monic depressed cubic
    /// `x³ + c1·x + c0 = 0` whose real roots are the x-coordinates of the
    /// preimages of `w`.
    fn preimage_cubic(p: ParamPoint, w: PhasePoint) -> (f64, f64) {
        let t = p.tau;
        let t2 = t * t;
        let c1 = ((1.0 - t) * (1.0 + p.a * t) - t * w.y) / t2;
        let c0 = -(1.0 - t) * w.x / t2;
        (c1, c0)
    }
}

impl MapModel for EulerLorenz {
    #[inline]
    fn apply(&self, p: ParamPoint, z: PhasePoint) -> PhasePoint {
        let t = p.tau;
        PhasePoint::new((1.0 + p.a * t) * z.x - t * z.x * z.y, (1.0 - t) * z.y + t * z.x * z.x)
    }

    #[inline]
    fn jacobian(&self, p: ParamPoint, z: PhasePoint) -> Jacobian2 {
        let t = p.tau;
        Jacobian2::new(1.0 + p.a * t - t * z.y, -t * z.x, 2.0 * t * z.x, 1.0 - t)
    }

    #[inline]
    fn det_jacobian(&self, p: ParamPoint, z: PhasePoint) -> f64 {
        let t = p.tau;
        (1.0 + p.a * t - t * z.y) * (1.0 - t) + 2.0 * t * t * z.x * z.x
    }

    #[inline]
    fn apply_displacement(&self, p: ParamPoint, base: PhasePoint, d: PhasePoint) -> PhasePoint {
        // exact expansion of the quadratic map about `base`
        let t = p.tau;
        PhasePoint::new(
            (1.0 + p.a * t) * d.x - t * (base.x * d.y + base.y * d.x + d.x * d.y),
            (1.0 - t) * d.y + t * d.x * (2.0 * base.x + d.x),
        )
    }

    #[inline]
    fn param_derivatives(&self, p: ParamPoint, z: PhasePoint) -> (PhasePoint, PhasePoint) {
        let d_a = PhasePoint::new(p.tau * z.x, 0.0);
        let d_tau = PhasePoint::new(p.a * z.x - z.x * z.y, z.x * z.x - z.y);
        (d_a, d_tau)
    }

    fn preimages(&self, p: ParamPoint, w: PhasePoint) -> Result<Vec<PhasePoint>> {
        p.require_invertible_slice()?;
        if !w.is_finite() {
            return Err(Error::InvalidInput("non-finite image point".into()));
        }
        let (c1, c0) = Self::preimage_cubic(p, w);
        let t = p.tau;
        Ok(depressed_cubic_roots(c1, c0)
            .into_iter()
            .map(|x| PhasePoint::new(x, (w.y - t * x * x) / (1.0 - t)))
            .collect())
    }
}

/// Real roots of `x³ + p·x + q = 0`, ascending, each polished by one Newton
/// step. A double root is reported once.
pub fn depressed_cubic_roots(p: f64, q: f64) -> Vec<f64> {
    let polish = |x: f64| {
        let f = x * x * x + p * x + q;
        let df = 3.0 * x * x + p;
        if df != 0.0 && df.abs() > 1e-8 * (x * x).max(p.abs()).max(1e-300) {
            let xn = x - f / df;
            // keep the polish only if it does not make things worse
            let fn_ = xn * xn * xn + p * xn + q;
            if fn_.abs() <= f.abs() {
                return xn;
            }
        }
        x
    };

    if p == 0.0 && q == 0.0 {
        return vec![0.0];
    }
    // Δ = −(4p³ + 27q²); sign decides the real-root count
    let a = 4.0 * p * p * p;
    let b = 27.0 * q * q;
    let disc = -(a + b);
    let scale = a.abs() + b;
    let rel = disc / scale;

    let mut roots = if rel.abs() < DOUBLE_ROOT_TOL {
        // simple root 3q/p, double root −3q/(2p)
        if p == 0.0 {
            vec![-q.cbrt()]
        } else {
            vec![3.0 * q / p, -1.5 * q / p]
        }
    } else if disc > 0.0 {
        // three real roots, trigonometric form (p < 0 here)
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos())
            .collect()
    } else {
        // one real root, Cardano
        let s = (q * q / 4.0 + p * p * p / 27.0).sqrt();
        let u = (-q / 2.0 + s).cbrt();
        let v = (-q / 2.0 - s).cbrt();
        vec![u + v]
    };
    let double = roots.len() == 2;
    for (i, r) in roots.iter_mut().enumerate() {
        // the double root is ill-conditioned for Newton; leave it
        if !(double && i == 1) {
            *r = polish(*r);
        }
    }
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    roots
}

/// Vertex-wise image of a polyline.
pub fn polyline_image<M: MapModel + ?Sized>(
    map: &M,
    p: ParamPoint,
    curve: &[PhasePoint],
) -> Result<Vec<PhasePoint>> {
    if curve.is_empty() {
        return Err(Error::InvalidInput("empty polyline".into()));
    }
    curve.iter().map(|&z| map.apply_checked(p, z)).collect()
}

#[derive(Debug)]
struct PreBranch {
    points: std::collections::VecDeque<PhasePoint>,
    // merged into another branch
    dead: bool,
}

#[derive(Debug, Clone, Copy)]
struct ActiveEnd {
    branch: usize,
    front: bool,
}

/// First-rank preimages of a polyline, grouped into continuous branches.
///
/// Roots at consecutive vertices are matched by minimal total distance to a
/// linear prediction from each branch end. When two new roots appear
/// together (the curve entered the three-preimage region), they seed a
/// single branch that grows at both ends through the fold on the critical
/// curve; two ends vanishing together are joined the same way. A closed
/// input (first vertex equal to the last) yields closed branches where the
/// seam matches.
pub fn polyline_preimages<M: MapModel + ?Sized>(
    map: &M,
    p: ParamPoint,
    curve: &[PhasePoint],
) -> Result<Vec<Vec<PhasePoint>>> {
    p.require_invertible_slice()?;
    if curve.is_empty() {
        return Err(Error::InvalidInput("empty polyline".into()));
    }
    let closed = curve.len() > 2 && curve[0] == curve[curve.len() - 1];

    let mut branches: Vec<PreBranch> = Vec::new();
    let mut active: Vec<ActiveEnd> = Vec::new();
    let mut first_branches: Vec<usize> = Vec::new();

    let end_point = |branches: &[PreBranch], e: ActiveEnd, back: usize| -> Option<PhasePoint> {
        let pts = &branches[e.branch].points;
        if back >= pts.len() {
            return None;
        }
        Some(if e.front { pts[back] } else { pts[pts.len() - 1 - back] })
    };
    let predict = |branches: &[PreBranch], e: ActiveEnd| -> PhasePoint {
        let last = end_point(branches, e, 0).unwrap();
        match end_point(branches, e, 1) {
            Some(prev) => last + (last - prev),
            None => last,
        }
    };

    for (vi, &w) in curve.iter().enumerate() {
        let roots = map.preimages(p, w)?;
        let preds: Vec<PhasePoint> = active.iter().map(|&e| predict(&branches, e)).collect();

        // best injective assignment between active ends and roots
        let n_e = active.len();
        let n_r = roots.len();
        let mut best: Option<(f64, Vec<Option<usize>>)> = None;
        let mut cur = vec![None; n_e];
        let mut taken = vec![false; n_r];
        assign_recursive(&preds, &roots, 0, &mut cur, &mut taken, 0.0, &mut best);
        let assignment = best.map(|b| b.1).unwrap_or_else(|| vec![None; n_e]);

        let mut used = vec![false; n_r];
        let mut next_active = Vec::new();
        let mut dying = Vec::new();
        for (ei, slot) in assignment.iter().enumerate() {
            let e = active[ei];
            match slot {
                Some(ri) => {
                    used[*ri] = true;
                    let b = &mut branches[e.branch].points;
                    if e.front {
                        b.push_front(roots[*ri]);
                    } else {
                        b.push_back(roots[*ri]);
                    }
                    next_active.push(e);
                }
                None => dying.push(e),
            }
        }
        // pairs of vanishing ends meet on the critical curve
        if dying.len() == 2 && n_r + 2 == n_e {
            let (e1, e2) = (dying[0], dying[1]);
            if e1.branch != e2.branch {
                join_branches(&mut branches, &mut next_active, e1, e2);
            }
        }

        let fresh: Vec<usize> = (0..n_r).filter(|&i| !used[i]).collect();
        if fresh.len() == 2 && vi > 0 {
            let id = branches.len();
            branches.push(PreBranch {
                points: [roots[fresh[0]], roots[fresh[1]]].into_iter().collect(),
                dead: false,
            });
            next_active.push(ActiveEnd { branch: id, front: true });
            next_active.push(ActiveEnd { branch: id, front: false });
        } else {
            for ri in fresh {
                let id = branches.len();
                branches.push(PreBranch { points: [roots[ri]].into_iter().collect(), dead: false });
                next_active.push(ActiveEnd { branch: id, front: false });
                if vi == 0 {
                    first_branches.push(id);
                }
            }
        }
        active = next_active;
    }

    if closed {
        // a branch ending where a start branch began continues across the seam
        let ends = active.clone();
        for e in ends {
            if branches[e.branch].dead {
                continue;
            }
            let last = end_point(&branches, e, 0).unwrap();
            let tol = 1e-9 * (1.0 + last.norm());
            let target = first_branches.iter().copied().find(|&b| {
                !branches[b].dead && branches[b].points.front().map_or(false, |&s| s.dist(last) <= tol)
            });
            if let Some(b) = target {
                if b != e.branch {
                    let start = ActiveEnd { branch: b, front: true };
                    let mut scratch = Vec::new();
                    join_branches(&mut branches, &mut scratch, e, start);
                }
            }
        }
    }

    Ok(branches
        .into_iter()
        .filter(|b| !b.dead)
        .map(|b| b.points.into_iter().collect())
        .collect())
}

fn assign_recursive(
    preds: &[PhasePoint],
    roots: &[PhasePoint],
    ei: usize,
    cur: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
    cost: f64,
    best: &mut Option<(f64, Vec<Option<usize>>)>,
) {
    let n_e = preds.len();
    let n_r = roots.len();
    if ei == n_e {
        // only maximal matchings compete, by total distance
        let assigned = cur.iter().filter(|s| s.is_some()).count();
        if assigned == n_e.min(n_r) && best.as_ref().map_or(true, |b| cost < b.0) {
            *best = Some((cost, cur.clone()));
        }
        return;
    }
    let slack = n_e - ei > n_r - used.iter().filter(|u| **u).count();
    for ri in 0..n_r {
        if used[ri] {
            continue;
        }
        used[ri] = true;
        cur[ei] = Some(ri);
        assign_recursive(preds, roots, ei + 1, cur, used, cost + preds[ei].dist(roots[ri]), best);
        used[ri] = false;
        cur[ei] = None;
    }
    if slack {
        assign_recursive(preds, roots, ei + 1, cur, used, cost, best);
    }
}

/// Concatenate the branch owning `e2` onto the end `e1`, so that the two
/// ends become interior neighbours. Active-end references are rewritten.
fn join_branches(branches: &mut [PreBranch], active: &mut [ActiveEnd], e1: ActiveEnd, e2: ActiveEnd) {
    let mut moved: Vec<PhasePoint> = std::mem::take(&mut branches[e2.branch].points).into_iter().collect();
    branches[e2.branch].dead = true;
    // make `moved` start at the joining end
    if !e2.front {
        moved.reverse();
    }
    let dst = &mut branches[e1.branch].points;
    if e1.front {
        for q in moved {
            dst.push_front(q);
        }
    } else {
        dst.extend(moved);
    }
    // the far end of the moved branch now lives on e1's side of dst
    for a in active.iter_mut() {
        if a.branch == e2.branch {
            *a = ActiveEnd { branch: e1.branch, front: e1.front };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: ParamPoint = ParamPoint::new(0.36, 1.775);

    #[test]
    fn fixed_point_is_fixed() {
        let z = EulerLorenz.apply(P, PhasePoint::new(0.6, 0.36));
        assert!((z.x - 0.6).abs() < 1e-15 && (z.y - 0.36).abs() < 1e-15);
        assert_eq!(EulerLorenz.apply(P, PhasePoint::ORIGIN), PhasePoint::ORIGIN);
    }

    #[test]
    fn hand_substitution_at_unit_step() {
        let z = EulerLorenz.apply(ParamPoint::new(0.36, 1.0), PhasePoint::new(1.0, 0.0));
        assert!((z.x - 1.36).abs() < 1e-15);
        assert_eq!(z.y, 1.0);
    }

    #[test]
    fn det_at_origin() {
        let d = EulerLorenz.det_jacobian(P, PhasePoint::ORIGIN);
        assert!((d - (-1.270225)).abs() < 1e-12, "{d}");
    }

    #[test]
    fn det_is_one_on_hopf_curve() {
        let p = ParamPoint::new(0.36, 1.0 / 0.72);
        let d = EulerLorenz.det_jacobian(p, PhasePoint::new(0.6, 0.36));
        assert!((d - 1.0).abs() < 1e-14, "{d}");
    }

    #[test]
    fn jacobian_at_fixed_point_and_origin() {
        let sa = 0.36f64.sqrt();
        let j = EulerLorenz.jacobian(P, PhasePoint::new(sa, 0.36));
        assert!((j.j11 - 1.0).abs() < 1e-15);
        assert!((j.j12 + P.tau * sa).abs() < 1e-15);
        assert!((j.j21 - 2.0 * P.tau * sa).abs() < 1e-15);
        assert!((j.j22 - (1.0 - P.tau)).abs() < 1e-15);
        let j0 = EulerLorenz.jacobian(P, PhasePoint::ORIGIN);
        assert_eq!(j0, Jacobian2::new(1.0 + 0.36 * 1.775, 0.0, 0.0, 1.0 - 1.775));
    }

    #[test]
    fn unit_step_has_no_preimages() {
        let r = EulerLorenz.preimages(ParamPoint::new(0.36, 1.0), PhasePoint::new(0.1, 0.1));
        assert!(matches!(r, Err(Error::DegenerateParameter(_))));
    }

    #[test]
    fn fixed_point_has_three_preimages() {
        let w = PhasePoint::new(0.6, 0.36);
        let pre = EulerLorenz.preimages(P, w).unwrap();
        assert_eq!(pre.len(), 3);
        assert!(pre.iter().any(|z| z.dist(w) < 1e-12));
        for z in &pre {
            assert!(EulerLorenz.apply(P, *z).dist(w) < 1e-12);
        }
    }

    #[test]
    fn cubic_root_counts() {
        // (x-1)(x-2)(x+3) = x³ - 7x + 6
        let r = depressed_cubic_roots(-7.0, 6.0);
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([-3.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        // (x-1)²(x+2) = x³ - 3x + 2
        let r = depressed_cubic_roots(-3.0, 2.0);
        assert_eq!(r.len(), 2);
        assert!((r[0] + 2.0).abs() < 1e-14 && (r[1] - 1.0).abs() < 1e-14);
        assert_eq!(depressed_cubic_roots(1.0, 1.0).len(), 1);
    }

    #[test]
    fn segment_in_one_preimage_region_has_one_branch() {
        // well below J1 the preimage cubic has a single real root
        let seg: Vec<PhasePoint> =
            (0..20).map(|k| PhasePoint::new(0.1 + 0.01 * k as f64, -2.0)).collect();
        for w in &seg {
            assert_eq!(EulerLorenz.preimages(P, *w).unwrap().len(), 1);
        }
        let br = polyline_preimages(&EulerLorenz, P, &seg).unwrap();
        assert_eq!(br.len(), 1);
        assert_eq!(br[0].len(), seg.len());
    }
}
