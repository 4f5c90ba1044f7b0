//! Period-q orbits by Newton's method on the q-fold composition.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{Jacobian2, MapModel, ParamPoint, PhasePoint};
use crate::orbit::{detect_period, iterate_orbit};

/// Multipliers within this distance of the unit circle are non-hyperbolic.
pub const TOL_HYP: f64 = 1e-8;

/// Closeness used to reject convergence onto a divisor period.
pub const LOWER_PERIOD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stability {
    Saddle,
    AttractingNode,
    AttractingFocus,
    RepellingNode,
    RepellingFocus,
    NonHyperbolic,
}

impl Stability {
    pub fn is_attracting(self) -> bool {
        matches!(self, Stability::AttractingNode | Stability::AttractingFocus)
    }

    pub fn is_focus(self) -> bool {
        matches!(self, Stability::AttractingFocus | Stability::RepellingFocus)
    }
}

/// A resolved period-q orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub q: usize,
    pub params: ParamPoint,
    /// Orbit points in iteration order, starting from the solved point.
    pub points: Vec<PhasePoint>,
    /// Jacobian product around the orbit based at `points[0]`.
    pub monodromy: Jacobian2,
    #[serde(with = "complex_pair")]
    pub eig: [Complex64; 2],
    pub stability: Stability,
    /// |L^q(z) − z| at the solution.
    pub residual: f64,
}

impl PeriodicOrbit {
    /// Build from a converged point, filling in orbit, monodromy and
    /// stability.
    pub fn from_point<M: MapModel + ?Sized>(map: &M, p: ParamPoint, q: usize, z: PhasePoint) -> Result<Self> {
        let mut points = Vec::with_capacity(q);
        let mut m = Jacobian2::IDENTITY;
        let mut w = z;
        for step in 0..q {
            points.push(w);
            m = map.jacobian(p, w).mul(&m);
            w = map.apply(p, w);
            if crate::map::diverged(w) {
                return Err(Error::Diverged { step: step + 1 });
            }
        }
        let eig = eigen2(&m);
        Ok(PeriodicOrbit {
            q,
            params: p,
            points,
            monodromy: m,
            eig,
            stability: classify(&eig),
            residual: w.dist(z),
        })
    }

    pub fn point(&self) -> PhasePoint {
        self.points[0]
    }

    /// Monodromy based at orbit point `k`.
    pub fn monodromy_at<M: MapModel + ?Sized>(&self, map: &M, k: usize) -> Jacobian2 {
        let mut m = Jacobian2::IDENTITY;
        for i in 0..self.q {
            let z = self.points[(k + i) % self.q];
            m = map.jacobian(self.params, z).mul(&m);
        }
        m
    }

    /// Largest one-step closure error `|L(z_k) − z_{k+1 mod q}|`.
    pub fn closure_error<M: MapModel + ?Sized>(&self, map: &M) -> f64 {
        (0..self.q)
            .map(|k| map.apply(self.params, self.points[k]).dist(self.points[(k + 1) % self.q]))
            .fold(0.0, f64::max)
    }

    /// The same orbit re-based at point `k`.
    pub fn rebased<M: MapModel + ?Sized>(&self, map: &M, k: usize) -> PeriodicOrbit {
        let mut o = self.clone();
        o.points.rotate_left(k % self.q);
        o.monodromy = self.monodromy_at(map, k);
        o.eig = eigen2(&o.monodromy);
        o
    }
}

pub(crate) mod complex_pair {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64; 2], s: S) -> Result<S::Ok, S::Error> {
        [[v[0].re, v[0].im], [v[1].re, v[1].im]].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[Complex64; 2], D::Error> {
        let a: [[f64; 2]; 2] = Deserialize::deserialize(d)?;
        Ok([Complex64::new(a[0][0], a[0][1]), Complex64::new(a[1][0], a[1][1])])
    }
}

/// Eigenvalues of a 2x2 matrix ordered by modulus, descending.
pub fn eigen2(m: &Jacobian2) -> [Complex64; 2] {
    m.eigenvalues()
}

pub fn classify(eig: &[Complex64; 2]) -> Stability {
    let (m0, m1) = (eig[0].norm(), eig[1].norm());
    if (m0 - 1.0).abs() < TOL_HYP || (m1 - 1.0).abs() < TOL_HYP {
        return Stability::NonHyperbolic;
    }
    let complex = eig[0].im != 0.0 || eig[1].im != 0.0;
    let (lo, hi) = (m0.min(m1), m0.max(m1));
    if complex {
        if hi < 1.0 {
            Stability::AttractingFocus
        } else {
            Stability::RepellingFocus
        }
    } else if hi < 1.0 {
        Stability::AttractingNode
    } else if lo > 1.0 {
        Stability::RepellingNode
    } else {
        Stability::Saddle
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonControl {
    pub max_iter: usize,
    pub step_tol: f64,
    pub residual_tol: f64,
    /// Accept an orbit whose minimal period is a proper divisor of q.
    pub allow_lower_period: bool,
}

impl Default for NewtonControl {
    fn default() -> Self {
        NewtonControl { max_iter: 50, step_tol: 1e-13, residual_tol: 1e-12, allow_lower_period: false }
    }
}

/// Solve `L^q(z) = z` from `guess` by damped Newton.
pub fn refine_periodic<M: MapModel + ?Sized>(
    map: &M,
    p: ParamPoint,
    q: usize,
    guess: PhasePoint,
    ctrl: &NewtonControl,
) -> Result<PeriodicOrbit> {
    if q == 0 {
        return Err(Error::InvalidInput("period must be at least 1".into()));
    }
    let residual_at = |z: PhasePoint| -> Result<(PhasePoint, Jacobian2, f64)> {
        let (w, m) = map.iterate_with_jacobian(p, z, q)?;
        let r = w - z;
        Ok((r, m, r.norm()))
    };
    let mut z = guess;
    let (mut r, mut m, mut res) = residual_at(z)?;
    let mut converged = res < ctrl.residual_tol;
    let mut iterations = 0;
    while !converged && iterations < ctrl.max_iter {
        iterations += 1;
        let Some(step) = m.sub_identity().solve(-r) else {
            return Err(Error::NoConvergence { iterations, residual: res });
        };
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial = z + step * lambda;
            if let Ok((tr, tm, tres)) = residual_at(trial) {
                if tres < res || tres < ctrl.residual_tol {
                    accepted = Some((trial, tr, tm, tres));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((nz, nr, nm, nres)) = accepted else {
            // no descent along the Newton direction; take the full step and let
            // the iteration count decide
            let trial = z + step;
            let (tr, tm, tres) = residual_at(trial).map_err(|_| Error::NoConvergence { iterations, residual: res })?;
            z = trial;
            r = tr;
            m = tm;
            res = tres;
            continue;
        };
        let step_len = (nz - z).norm();
        z = nz;
        r = nr;
        m = nm;
        res = nres;
        if res < ctrl.residual_tol || (step_len < ctrl.step_tol && res < 1e3 * ctrl.residual_tol) {
            converged = true;
        }
    }
    // one extra polish step is cheap and usually gains the last digits
    if converged {
        if let Some(step) = m.sub_identity().solve(-r) {
            if let Ok((_, _, tres)) = residual_at(z + step) {
                if tres < res {
                    z = z + step;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence { iterations, residual: res });
    }
    if !ctrl.allow_lower_period {
        if let Some(d) = lower_period(map, p, q, z) {
            return Err(Error::ConvergedToLowerPeriod(d));
        }
    }
    PeriodicOrbit::from_point(map, p, q, z)
}

/// Smallest proper divisor `d` of `q` with `|L^d(z) − z| < LOWER_PERIOD_TOL`.
pub fn lower_period<M: MapModel + ?Sized>(map: &M, p: ParamPoint, q: usize, z: PhasePoint) -> Option<usize> {
    (1..q)
        .filter(|d| q % d == 0)
        .find(|&d| map.iterate(p, z, d).map_or(false, |w| w.dist(z) < LOWER_PERIOD_TOL))
}

/// Simulation budget for [`seed_from_simulation`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeedBudget {
    pub n_starts: usize,
    pub n_transient: usize,
    pub eps: f64,
    /// Radius range of the start ring around the fixed point `(√a, a)`.
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for SeedBudget {
    fn default() -> Self {
        SeedBudget { n_starts: 64, n_transient: 200_000, eps: 1e-8, r_min: 0.02, r_max: 0.35 }
    }
}

/// Sink points found by simulation plus saddle guesses between neighbours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    /// q sink points in iteration order.
    pub sink: Vec<PhasePoint>,
    /// Midpoints between angularly adjacent sink points.
    pub saddle_guesses: Vec<PhasePoint>,
}

/// Deterministic start points on a golden-angle spiral around `center`.
pub fn spiral_starts(center: PhasePoint, n: usize, r_min: f64, r_max: f64) -> Vec<PhasePoint> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let f = if n > 1 { k as f64 / (n - 1) as f64 } else { 0.0 };
            let r = r_min + (r_max - r_min) * f;
            let th = golden * k as f64;
            center + PhasePoint::new(r * th.cos(), r * th.sin())
        })
        .collect()
}

/// Find an attracting period-q orbit by forward simulation.
pub fn seed_from_simulation<M: MapModel + ?Sized>(
    map: &M,
    p: ParamPoint,
    q: usize,
    budget: &SeedBudget,
) -> Result<Seeds> {
    let center = PhasePoint::new(p.a.abs().sqrt(), p.a);
    let n_check = 3 * q + 3;
    for z0 in spiral_starts(center, budget.n_starts, budget.r_min, budget.r_max) {
        let Ok(orbit) = iterate_orbit(map, p, z0, budget.n_transient, n_check) else {
            continue;
        };
        if detect_period(&orbit, q, budget.eps) != Some(q) {
            continue;
        }
        let sink: Vec<PhasePoint> = orbit.points[orbit.len() - q..].to_vec();
        let saddle_guesses = angular_midpoints(&sink);
        return Ok(Seeds { sink, saddle_guesses });
    }
    Err(Error::NoLocking { q })
}

/// Midpoints between consecutive points when sorted by angle about their
/// centroid.
pub fn angular_midpoints(points: &[PhasePoint]) -> Vec<PhasePoint> {
    if points.len() < 2 {
        return Vec::new();
    }
    let c = points.iter().fold(PhasePoint::ORIGIN, |acc, &z| acc + z) * (1.0 / points.len() as f64);
    let mut sorted: Vec<PhasePoint> = points.to_vec();
    sorted.sort_by(|u, v| {
        let au = (u.y - c.y).atan2(u.x - c.x);
        let av = (v.y - c.y).atan2(v.x - c.x);
        au.partial_cmp(&av).unwrap_or(std::cmp::Ordering::Equal)
    });
    (0..sorted.len()).map(|k| sorted[k].lerp(sorted[(k + 1) % sorted.len()], 0.5)).collect()
}

/// Resolve both members of a period-q saddle–sink pair by simulation and
/// Newton refinement.
pub fn find_sink_and_saddle<M: MapModel + ?Sized>(
    map: &M,
    p: ParamPoint,
    q: usize,
    budget: &SeedBudget,
) -> Result<(PeriodicOrbit, PeriodicOrbit)> {
    let seeds = seed_from_simulation(map, p, q, budget)?;
    let ctrl = NewtonControl::default();
    let sink = refine_periodic(map, p, q, seeds.sink[0], &ctrl)?;
    let saddle = find_saddle_near(map, p, q, &seeds.saddle_guesses, &ctrl).ok_or(Error::NotSaddle)?;
    Ok((sink, saddle))
}

/// First saddle orbit reached by Newton from any of `guesses`.
pub fn find_saddle_near<M: MapModel + ?Sized>(
    map: &M,
    p: ParamPoint,
    q: usize,
    guesses: &[PhasePoint],
    ctrl: &NewtonControl,
) -> Option<PeriodicOrbit> {
    guesses
        .iter()
        .filter_map(|&g| refine_periodic(map, p, q, g, ctrl).ok())
        .find(|o| o.stability == Stability::Saddle)
}

/// Largest τ step taken when carrying an orbit to a new parameter.
const TRACK_STEP: f64 = 1e-4;

/// Carry a periodic orbit to `tau` at fixed `a` in Newton steps of at most
/// [`TRACK_STEP`], keeping the point nearest the original first point first.
pub fn track_orbit<M: MapModel + ?Sized>(map: &M, orbit: &PeriodicOrbit, tau: f64) -> Result<PeriodicOrbit> {
    if orbit.points.len() != orbit.q {
        return Err(Error::InvalidInput("orbit to track has no points".into()));
    }
    let ctrl = NewtonControl::default();
    let t0 = orbit.params.tau;
    let n = ((tau - t0).abs() / TRACK_STEP).ceil().max(1.0) as usize;
    let mut cur = orbit.clone();
    for k in 1..=n {
        let t = if k == n { tau } else { t0 + (tau - t0) * k as f64 / n as f64 };
        let next = refine_periodic(map, ParamPoint::new(orbit.params.a, t), orbit.q, cur.point(), &ctrl)
            .map_err(|_| Error::FamilyLost { tau: t })?;
        let target = cur.point();
        let j = (0..next.q).min_by(|&i, &j| next.points[i].dist(target).total_cmp(&next.points[j].dist(target))).unwrap_or(0);
        cur = if j == 0 { next } else { next.rebased(map, j) };
    }
    Ok(cur)
}
