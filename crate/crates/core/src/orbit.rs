//! Forward iteration, Lyapunov exponents, rotation numbers, and coarse
//! attractor classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{MapModel, ParamPoint, PhasePoint};

/// Default closeness for sustained periodicity.
pub const DEFAULT_PERIOD_EPS: f64 = 1e-8;

/// |λ1| below this counts as neutral (circle-like); above it as chaotic.
pub const CHAOS_THRESHOLD: f64 = 0.005;

/// A forward orbit with its transient already discarded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub params: ParamPoint,
    pub points: Vec<PhasePoint>,
    pub transient_dropped: usize,
}

impl Orbit {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<PhasePoint> {
        self.points.last().copied()
    }
}

pub fn iterate_orbit<M: MapModel + ?Sized>(
    map: &M,
    p: ParamPoint,
    z0: PhasePoint,
    n_transient: usize,
    n_keep: usize,
) -> Result<Orbit> {
    let mut z = map.iterate(p, z0, n_transient)?;
    let mut points = Vec::with_capacity(n_keep);
    for k in 0..n_keep {
        if k > 0 {
            z = map.apply(p, z);
            if crate::map::diverged(z) {
                return Err(Error::Diverged { step: n_transient + k });
            }
        }
        points.push(z);
    }
    Ok(Orbit { params: p, points, transient_dropped: n_transient })
}

/// Both Lyapunov exponents, `l1 >= l2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSpectrum {
    pub l1: f64,
    pub l2: f64,
    pub iterations: usize,
}

/// Lyapunov exponents by tangent-frame propagation with Gram–Schmidt
/// re-orthonormalization every step.
///
/// After `n_transient` discarded iterates, the frame is carried along `n`
/// steps; each step's stretch factors are accumulated as logarithms.
pub fn lyapunov<M: MapModel + ?Sized>(
    map: &M,
    p: ParamPoint,
    z0: PhasePoint,
    n_transient: usize,
    n: usize,
) -> Result<LyapunovSpectrum> {
    if n == 0 {
        return Err(Error::InvalidInput("lyapunov needs at least one step".into()));
    }
    let mut z = map.iterate(p, z0, n_transient)?;
    let mut e1 = PhasePoint::new(1.0, 0.0);
    let mut e2 = PhasePoint::new(0.0, 1.0);
    let (mut s1, mut s2) = (0.0f64, 0.0f64);
    for k in 0..n {
        let j = map.jacobian(p, z);
        let v1 = j.apply(e1);
        let v2 = j.apply(e2);
        let r11 = v1.norm();
        e1 = v1 * (1.0 / r11);
        let w = v2 - e1 * e1.dot(v2);
        let r22 = w.norm();
        // a singular step (on the critical curve) leaves e2 undefined
        e2 = if r22 > 0.0 { w * (1.0 / r22) } else { PhasePoint::new(-e1.y, e1.x) };
        s1 += r11.ln();
        s2 += r22.ln();
        z = map.apply(p, z);
        if crate::map::diverged(z) {
            return Err(Error::Diverged { step: n_transient + k + 1 });
        }
    }
    let (l1, l2) = (s1 / n as f64, s2 / n as f64);
    Ok(LyapunovSpectrum { l1: l1.max(l2), l2: l1.min(l2), iterations: n })
}

/// Mean lifted angle increment about `center`, divided by 2π and reduced to
/// [0, 1).
pub fn rotation_number(orbit: &Orbit, center: PhasePoint) -> Result<f64> {
    const EPS: f64 = 1e-12;
    if orbit.points.len() < 2 {
        return Err(Error::InvalidInput("rotation number needs at least two points".into()));
    }
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    for z in &orbit.points {
        let d = *z - center;
        if d.norm() < EPS {
            return Err(Error::UndefinedAngle { distance: d.norm() });
        }
        let th = d.y.atan2(d.x);
        if let Some(pth) = prev {
            total += wrap_angle(th - pth);
        }
        prev = Some(th);
    }
    let rho = total / (std::f64::consts::TAU * (orbit.points.len() - 1) as f64);
    let r = rho.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0
    Ok(if r >= 1.0 { 0.0 } else { r })
}

/// Map an angle difference to (−π, π].
fn wrap_angle(d: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut d = d.rem_euclid(TAU);
    if d > PI {
        d -= TAU;
    }
    d
}

/// Smallest `q <= q_max` such that every one of the last ⌊len/3⌋
/// comparisons `|z_{k+q} − z_k|` is below `eps`.
pub fn detect_period(orbit: &Orbit, q_max: usize, eps: f64) -> Option<usize> {
    let pts = &orbit.points;
    let n = pts.len();
    if q_max == 0 || n < 3 * q_max {
        return None;
    }
    let window = n / 3;
    (1..=q_max).find(|&q| (n - window..n).all(|j| j < q || pts[j].dist(pts[j - q]) < eps))
}

/// Coarse attractor class. Labels beyond `FixedPoint`/`Periodic`/`Diverged`
/// rest on the Lyapunov threshold heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class")]
pub enum AttractorClass {
    FixedPoint { l1: f64 },
    Periodic { q: usize, l1: f64 },
    CircleLike { l1: f64, rotation: f64 },
    ChaoticLike { l1: f64 },
    /// Neither neutral nor positive enough for the other labels.
    Undetermined { l1: f64 },
    Diverged { step: usize },
}

/// Iteration budgets for [`classify_attractor`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyBudget {
    pub n_transient: usize,
    pub n_keep: usize,
    pub q_max: usize,
    pub eps: f64,
    pub n_lyapunov: usize,
}

impl Default for ClassifyBudget {
    fn default() -> Self {
        ClassifyBudget {
            n_transient: 100_000,
            n_keep: 3_000,
            q_max: 500,
            eps: DEFAULT_PERIOD_EPS,
            n_lyapunov: 1_000_000,
        }
    }
}

pub fn classify_attractor<M: MapModel + ?Sized>(
    map: &M,
    p: ParamPoint,
    z0: PhasePoint,
    budget: &ClassifyBudget,
) -> AttractorClass {
    let orbit = match iterate_orbit(map, p, z0, budget.n_transient, budget.n_keep) {
        Ok(o) => o,
        Err(Error::Diverged { step }) => return AttractorClass::Diverged { step },
        Err(_) => return AttractorClass::Diverged { step: 0 },
    };
    let start = orbit.last().unwrap_or(z0);
    let l1 = match lyapunov(map, p, start, 0, budget.n_lyapunov.max(1)) {
        Ok(s) => s.l1,
        Err(Error::Diverged { step }) => {
            return AttractorClass::Diverged { step: budget.n_transient + budget.n_keep + step }
        }
        Err(_) => f64::NAN,
    };
    if let Some(q) = detect_period(&orbit, budget.q_max, budget.eps) {
        return if q == 1 { AttractorClass::FixedPoint { l1 } } else { AttractorClass::Periodic { q, l1 } };
    }
    if l1 > CHAOS_THRESHOLD {
        return AttractorClass::ChaoticLike { l1 };
    }
    if l1.abs() < CHAOS_THRESHOLD {
        let centroid = orbit.points.iter().fold(PhasePoint::ORIGIN, |acc, &z| acc + z)
            * (1.0 / orbit.len() as f64);
        let rotation = rotation_number(&orbit, centroid).unwrap_or(f64::NAN);
        return AttractorClass::CircleLike { l1, rotation };
    }
    AttractorClass::Undetermined { l1 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::EulerLorenz;

    #[test]
    fn fixed_point_orbit_is_constant() {
        let p = ParamPoint::new(0.36, 1.0);
        let z = PhasePoint::new(0.6, 0.36);
        let o = iterate_orbit(&EulerLorenz, p, z, 10, 50).unwrap();
        assert_eq!(o.len(), 50);
        assert!(o.points.iter().all(|w| w.dist(z) < 1e-12));
        assert_eq!(detect_period(&o, 10, 1e-8), Some(1));
    }

    #[test]
    fn divergence_reports_step() {
        let p = ParamPoint::new(0.36, 1.775);
        let err = iterate_orbit(&EulerLorenz, p, PhasePoint::new(50.0, -50.0), 0, 100).unwrap_err();
        assert!(matches!(err, Error::Diverged { step } if step < 100));
    }

    #[test]
    fn rotation_of_constant_offcenter_orbit_is_zero() {
        let o = Orbit {
            params: ParamPoint::new(0.36, 1.5),
            points: vec![PhasePoint::new(1.0, 1.0); 10],
            transient_dropped: 0,
        };
        assert_eq!(rotation_number(&o, PhasePoint::ORIGIN).unwrap(), 0.0);
    }

    #[test]
    fn rotation_rejects_center_hits() {
        let o = Orbit {
            params: ParamPoint::new(0.36, 1.5),
            points: vec![PhasePoint::new(1.0, 1.0), PhasePoint::ORIGIN],
            transient_dropped: 0,
        };
        assert!(matches!(rotation_number(&o, PhasePoint::ORIGIN), Err(Error::UndefinedAngle { .. })));
    }

    #[test]
    fn short_orbit_has_no_period() {
        let o = Orbit {
            params: ParamPoint::new(0.36, 1.5),
            points: vec![PhasePoint::new(1.0, 1.0); 5],
            transient_dropped: 0,
        };
        assert_eq!(detect_period(&o, 2, 1e-8), None);
    }
}
