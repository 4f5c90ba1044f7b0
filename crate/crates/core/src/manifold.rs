//! One-sided global unstable manifolds of saddle periodic orbits grown by
//! the fundamental-domain method, with J₀-crossing events, cusp tracking and
//! loop census.
//!
//! A seed parameter `s ∈ [0, 1]` labels the point `S + side·δ·μ^s·v` on the
//! local unstable eigenline, where `μ` is the unstable multiplier of the
//! step map (`L^q`, or `L^{2q}` for a flip saddle). Level `d` of the branch
//! is the `d`-th step image of the fundamental domain. Refinement always
//! inserts seed parameters, so every vertex carries its exact provenance.

use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical::{kernel_direction, locate_on_segment};
use crate::error::{Error, Result};
use crate::geometry::{canonical_sign, transversal_self_intersections};
use crate::map::{MapModel, ParamPoint, PhasePoint};
use crate::periodic::{track_orbit, PeriodicOrbit, Stability};

/// Refinement and budget controls for branch growth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineControl {
    /// Seed distance from the saddle.
    pub delta: f64,
    /// Maximal spacing between consecutive vertices.
    pub max_spacing: f64,
    /// Maximal turning angle at a vertex, degrees.
    pub max_turn_deg: f64,
    /// Smallest seed-parameter interval that may still be split.
    pub min_seed_step: f64,
    /// Segments shorter than this are not split for turning angle alone;
    /// at cusp tips the turning angle cannot be resolved.
    pub min_spacing: f64,
    pub arclength_budget: f64,
    /// Maximal number of step-map applications to the fundamental domain.
    pub max_levels: usize,
    /// Hard cap on vertices per level.
    pub max_level_vertices: usize,
}

impl Default for RefineControl {
    fn default() -> Self {
        RefineControl {
            delta: 1e-6,
            max_spacing: 2e-3,
            max_turn_deg: 5.0,
            min_seed_step: 1e-14,
            min_spacing: 1e-9,
            arclength_budget: 50.0,
            max_levels: 4000,
            max_level_vertices: 400_000,
        }
    }
}

impl RefineControl {
    pub fn validate(&self) -> Result<()> {
        let ok = self.delta > 0.0
            && self.max_spacing > 0.0
            && self.max_turn_deg > 0.0
            && self.min_seed_step > 0.0
            && self.min_spacing >= 0.0
            && self.arclength_budget > 0.0
            && self.max_levels > 0
            && self.max_level_vertices >= 2;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput("refinement controls must be positive".into()))
        }
    }
}

/// Why growth stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    ArclengthBudget,
    LevelBudget,
    Diverged,
    /// Refinement needed a seed interval below the minimal step.
    SeedUnderflow,
    VertexBudget,
    /// A whole level shrank below [`COLLAPSE_EXTENT`]: the branch has
    /// converged onto a point attractor.
    Collapsed,
    /// An observer asked to stop.
    Observer,
}

/// Level extent below which growth stops as converged.
pub const COLLAPSE_EXTENT: f64 = 1e-12;

/// A transversal crossing of J₀ by a branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct J0Crossing {
    /// Index of the branch segment containing the crossing.
    pub segment: usize,
    pub point: PhasePoint,
    /// Unit tangent of the branch, in growth direction.
    pub tangent: PhasePoint,
    /// Unit null vector of the derivative at the crossing.
    pub null: PhasePoint,
    /// Signed angle between tangent line and null line, degrees in (−90, 90].
    pub psi_deg: f64,
    /// Seed parameter and level of the segment start, for tracking.
    pub seed: f64,
    pub level: usize,
}

/// |ψ| below which a crossing is reported as a cusp.
pub const CUSP_ANGLE_DEG: f64 = 0.1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BranchEvents {
    pub j0: Vec<J0Crossing>,
    /// Indices into `j0` with |ψ| < [`CUSP_ANGLE_DEG`].
    pub cusps: Vec<usize>,
    pub self_intersections: Vec<PhasePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub saddle: PeriodicOrbit,
    /// +1 or −1 along the canonical unstable eigenvector.
    pub side: i8,
    pub polyline: Vec<PhasePoint>,
    /// Number of map applications from the seed segment to each vertex.
    pub vertex_depth: Vec<usize>,
    /// Seed parameter of each vertex.
    pub vertex_seed: Vec<f64>,
    pub events: BranchEvents,
    pub stop: StopReason,
    pub arclength: f64,
    pub control: RefineControl,
}

impl Branch {
    /// Recompute a vertex from its seed parameter and depth.
    pub fn replay<M: MapModel + ?Sized>(&self, map: &M, vertex: usize) -> Result<PhasePoint> {
        let seed = SeedLine::new(&self.saddle, self.side, self.control.delta)?;
        eval_seed(map, self.saddle.params, &seed, self.vertex_seed[vertex], self.vertex_depth[vertex])
            .ok_or(Error::Diverged { step: self.vertex_depth[vertex] })
    }
}

/// The unstable eigenline of a saddle and its fundamental-domain scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedLine {
    pub base: PhasePoint,
    /// Unit unstable direction times the side sign.
    pub dir: PhasePoint,
    /// Unstable multiplier of the step map (> 1).
    pub mu: f64,
    /// Map applications per step.
    pub step: usize,
    pub delta: f64,
}

impl SeedLine {
    pub fn new(saddle: &PeriodicOrbit, side: i8, delta: f64) -> Result<SeedLine> {
        if saddle.stability != Stability::Saddle {
            return Err(Error::NotSaddle);
        }
        let (lu, vu) = unstable_eigen(saddle)?;
        let sign = if side >= 0 { 1.0 } else { -1.0 };
        let (mu, step) = if lu > 0.0 { (lu, saddle.q) } else { (lu * lu, 2 * saddle.q) };
        Ok(SeedLine { base: saddle.point(), dir: vu * sign, mu, step, delta })
    }

    pub fn point(&self, s: f64) -> PhasePoint {
        self.point_with_delta(s, self.delta)
    }

    fn point_with_delta(&self, s: f64, delta: f64) -> PhasePoint {
        self.base + self.dir * (delta * self.mu.powf(s))
    }

    /// Displacement of the seed point from the saddle.
    pub fn offset(&self, s: f64) -> PhasePoint {
        self.dir * (self.delta * self.mu.powf(s))
    }
}

/// Unstable multiplier and canonical unit eigenvector of a saddle.
pub fn unstable_eigen(saddle: &PeriodicOrbit) -> Result<(f64, PhasePoint)> {
    eigen_pair(saddle, true)
}

/// Stable multiplier and canonical unit eigenvector of a saddle.
pub fn stable_eigen(saddle: &PeriodicOrbit) -> Result<(f64, PhasePoint)> {
    eigen_pair(saddle, false)
}

fn eigen_pair(saddle: &PeriodicOrbit, unstable: bool) -> Result<(f64, PhasePoint)> {
    if saddle.stability != Stability::Saddle {
        return Err(Error::NotSaddle);
    }
    // eigenvalues are sorted by modulus, largest first
    let lam = if unstable { saddle.eig[0].re } else { saddle.eig[1].re };
    Ok((lam, canonical_sign(saddle.monodromy.real_eigenvector(lam))))
}

/// Displacements from the saddle orbit below this size are iterated in
/// displacement form.
pub const DISPLACEMENT_RADIUS: f64 = 1e-3;

/// `L^n` of the seed point with parameter `s`, iterating the displacement
/// from the saddle orbit while it stays within [`DISPLACEMENT_RADIUS`].
pub fn eval_seed<M: MapModel + ?Sized>(map: &M, p: ParamPoint, seed: &SeedLine, s: f64, n: usize) -> Option<PhasePoint> {
    let mut base = seed.base;
    let mut d = seed.offset(s);
    let mut k = 0;
    while k < n && d.norm() < DISPLACEMENT_RADIUS {
        d = map.apply_displacement(p, base, d);
        base = map.apply(p, base);
        k += 1;
    }
    map.iterate(p, base + d, n - k).ok()
}

/// Incremental fundamental-domain growth, one level at a time.
pub struct Grower<'a, M: MapModel + ?Sized> {
    map: &'a M,
    p: ParamPoint,
    seed: SeedLine,
    ctrl: RefineControl,
    level: usize,
    params: Vec<f64>,
    points: Vec<PhasePoint>,
    underflow: bool,
    /// Second-to-last vertex of the previous level, to hold the turning
    /// angle across the junction between levels.
    tail: Option<PhasePoint>,
}

impl<'a, M: MapModel + ?Sized> Grower<'a, M> {
    pub fn new(map: &'a M, saddle: &PeriodicOrbit, side: i8, ctrl: &RefineControl) -> Result<Self> {
        ctrl.validate()?;
        let seed = SeedLine::new(saddle, side, ctrl.delta)?;
        let n = 8;
        let params: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let points = params.iter().map(|&s| seed.point(s)).collect();
        Ok(Grower { map, p: saddle.params, seed, ctrl: *ctrl, level: 0, params, points, underflow: false, tail: None })
    }

    pub fn seed_line(&self) -> &SeedLine {
        &self.seed
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Map applications from the seed segment to the current level.
    pub fn depth(&self) -> usize {
        self.level * self.seed.step
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn points(&self) -> &[PhasePoint] {
        &self.points
    }

    /// Whether some interval of the current level could not be refined.
    pub fn underflowed(&self) -> bool {
        self.underflow
    }

    fn eval(&self, s: f64, level: usize) -> Option<PhasePoint> {
        eval_seed(self.map, self.p, &self.seed, s, level * self.seed.step)
    }

    /// Map the current level forward one step and refine it.
    pub fn advance(&mut self) -> std::result::Result<(), StopReason> {
        let next = self.level + 1;
        let (map, p, step) = (self.map, self.p, self.seed.step);
        // vertices still near the saddle are recomputed from their seeds to
        // keep the displacement resolution
        let near = DISPLACEMENT_RADIUS;
        let base = self.seed.base;
        let seed = self.seed;
        let mapped: Option<Vec<PhasePoint>> = self
            .points
            .par_iter()
            .zip(self.params.par_iter())
            .map(|(&z, &s)| {
                if z.dist(base) < near {
                    eval_seed(map, p, &seed, s, next * step)
                } else {
                    map.iterate(p, z, step).ok()
                }
            })
            .collect();
        let Some(mapped) = mapped else {
            return Err(StopReason::Diverged);
        };
        self.tail = self.points.len().checked_sub(2).map(|k| self.points[k]);
        self.points = mapped;
        self.level = next;
        self.coarsen();
        self.refine()
    }

    /// Drop vertices whose removal keeps both criteria with a factor-2 margin.
    fn coarsen(&mut self) {
        let n = self.points.len();
        if n < 3 {
            return;
        }
        let ds = 0.5 * self.ctrl.max_spacing;
        let cos_th = (0.5 * self.ctrl.max_turn_deg).to_radians().cos();
        let mut keep = vec![true; n];
        let mut last = 0;
        for i in 1..n - 1 {
            let a = self.points[last];
            let b = self.points[i];
            let c = self.points[i + 1];
            let u = b - a;
            let w = c - b;
            let straight = u.norm() == 0.0 || w.norm() == 0.0 || u.dot(w) >= cos_th * u.norm() * w.norm();
            let ac = c - a;
            let straight_ac = if last > 0 {
                let pre = a - self.points[last - 1];
                pre.norm() == 0.0 || ac.norm() == 0.0 || pre.dot(ac) >= cos_th * pre.norm() * ac.norm()
            } else {
                true
            };
            if a.dist(c) <= ds && straight && straight_ac {
                keep[i] = false;
            } else {
                last = i;
            }
        }
        let mut k = 0;
        self.params.retain(|_| {
            k += 1;
            keep[k - 1]
        });
        k = 0;
        self.points.retain(|_| {
            k += 1;
            keep[k - 1]
        });
    }

    fn refine(&mut self) -> std::result::Result<(), StopReason> {
        let max_turn_cos = self.ctrl.max_turn_deg.to_radians().cos();
        self.underflow = false;
        loop {
            let n = self.points.len();
            let mut split = vec![false; n.saturating_sub(1)];
            for i in 0..n - 1 {
                let seg = self.points[i + 1] - self.points[i];
                if seg.norm() > self.ctrl.max_spacing {
                    split[i] = true;
                }
                if i == 0 {
                    if let Some(t) = self.tail {
                        let prev = self.points[0] - t;
                        let b = seg.norm();
                        if b > self.ctrl.min_spacing && prev.norm() > 0.0 && prev.dot(seg) < max_turn_cos * prev.norm() * b {
                            split[0] = true;
                        }
                    }
                } else {
                    let prev = self.points[i] - self.points[i - 1];
                    let (a, b) = (prev.norm(), seg.norm());
                    if a > 0.0 && b > 0.0 && prev.dot(seg) < max_turn_cos * a * b {
                        if a > self.ctrl.min_spacing {
                            split[i - 1] = true;
                        }
                        if b > self.ctrl.min_spacing {
                            split[i] = true;
                        }
                    }
                }
            }
            let mut todo = Vec::new();
            for (i, &sp) in split.iter().enumerate() {
                if !sp {
                    continue;
                }
                if self.params[i + 1] - self.params[i] > self.ctrl.min_seed_step {
                    todo.push(i);
                } else {
                    self.underflow = true;
                }
            }
            if todo.is_empty() {
                return Ok(());
            }
            if n + todo.len() > self.ctrl.max_level_vertices {
                return Err(StopReason::VertexBudget);
            }
            let level = self.level;
            let mids: Vec<(f64, Option<PhasePoint>)> = todo
                .par_iter()
                .map(|&i| {
                    let s = 0.5 * (self.params[i] + self.params[i + 1]);
                    (s, self.eval(s, level))
                })
                .collect();
            let mut params = Vec::with_capacity(n + todo.len());
            let mut points = Vec::with_capacity(n + todo.len());
            let mut t = 0;
            for i in 0..n {
                params.push(self.params[i]);
                points.push(self.points[i]);
                if t < todo.len() && todo[t] == i {
                    let (s, z) = mids[t];
                    params.push(s);
                    points.push(z.ok_or(StopReason::Diverged)?);
                    t += 1;
                }
            }
            self.params = params;
            self.points = points;
        }
    }
}

/// Grow a branch, calling `observer` after each new level is appended with
/// the branch so far and the index of the first vertex of that level.
pub fn grow_unstable_with<M, F>(
    map: &M,
    saddle: &PeriodicOrbit,
    side: i8,
    ctrl: &RefineControl,
    mut observer: F,
) -> Result<Branch>
where
    M: MapModel + ?Sized,
    F: FnMut(&Branch, usize) -> ControlFlow<()>,
{
    let mut grower = Grower::new(map, saddle, side, ctrl)?;
    let mut branch = Branch {
        saddle: saddle.clone(),
        side: if side >= 0 { 1 } else { -1 },
        polyline: grower.points().to_vec(),
        vertex_depth: vec![0; grower.points().len()],
        vertex_seed: grower.params().to_vec(),
        events: BranchEvents::default(),
        stop: StopReason::LevelBudget,
        arclength: crate::geometry::polyline_length(grower.points()),
        control: *ctrl,
    };
    if observer(&branch, 0).is_break() {
        branch.stop = StopReason::Observer;
        return Ok(branch);
    }
    while grower.level() < ctrl.max_levels {
        if let Err(reason) = grower.advance() {
            branch.stop = reason;
            return Ok(branch);
        }
        // the first vertex of a new level duplicates the last of the previous
        // one up to O(δ²); it is replaced by that vertex
        let start = branch.polyline.len();
        let depth = grower.depth();
        let mut budget_hit = false;
        for (&z, &s) in grower.points().iter().zip(grower.params()).skip(1) {
            let prev = *branch.polyline.last().unwrap();
            let len = prev.dist(z);
            if branch.arclength + len > ctrl.arclength_budget {
                budget_hit = true;
                break;
            }
            branch.arclength += len;
            branch.polyline.push(z);
            branch.vertex_depth.push(depth);
            branch.vertex_seed.push(s);
        }
        // the observer also sees a level cut short by the budget
        if observer(&branch, start).is_break() {
            branch.stop = StopReason::Observer;
            return Ok(branch);
        }
        if budget_hit {
            branch.stop = StopReason::ArclengthBudget;
            return Ok(branch);
        }
        if grower.underflowed() {
            branch.stop = StopReason::SeedUnderflow;
            return Ok(branch);
        }
        let pts = grower.points();
        if pts.iter().all(|z| z.dist(pts[0]) < COLLAPSE_EXTENT) {
            branch.stop = StopReason::Collapsed;
            return Ok(branch);
        }
    }
    branch.stop = StopReason::LevelBudget;
    Ok(branch)
}

/// Grow a one-sided unstable branch and fill in its events.
pub fn grow_unstable<M: MapModel + ?Sized>(
    map: &M,
    saddle: &PeriodicOrbit,
    side: i8,
    ctrl: &RefineControl,
) -> Result<Branch> {
    let mut b = grow_unstable_with(map, saddle, side, ctrl, |_, _| ControlFlow::Continue(()))?;
    b.events.j0 = j0_events(map, &b);
    b.events.cusps = (0..b.events.j0.len()).filter(|&i| b.events.j0[i].psi_deg.abs() < CUSP_ANGLE_DEG).collect();
    b.events.self_intersections = self_intersections(map, &b);
    Ok(b)
}

/// Signed angle in degrees between the lines spanned by unit vectors `t`
/// and `v`, in (−90, 90].
pub fn signed_line_angle(t: PhasePoint, v: PhasePoint) -> f64 {
    let c = t.dot(v);
    let s = t.cross(v);
    if c == 0.0 {
        return 90.0;
    }
    let a = (s / c).atan().to_degrees();
    if a <= -90.0 {
        90.0
    } else {
        a
    }
}

/// Transversal crossings of J₀ along a branch.
pub fn j0_events<M: MapModel + ?Sized>(map: &M, branch: &Branch) -> Vec<J0Crossing> {
    j0_events_in(map, branch, 0)
}

/// As [`j0_events`], restricted to segments starting at or after `from`.
pub fn j0_events_in<M: MapModel + ?Sized>(map: &M, branch: &Branch, from: usize) -> Vec<J0Crossing> {
    let p = branch.saddle.params;
    let pts = &branch.polyline;
    let mut out = Vec::new();
    let mut d_prev = if from < pts.len() { map.det_jacobian(p, pts[from]) } else { return out };
    for i in from..pts.len().saturating_sub(1) {
        let d_next = map.det_jacobian(p, pts[i + 1]);
        if d_prev != 0.0 && d_next != 0.0 && d_prev.signum() != d_next.signum() {
            let z = locate_on_segment(map, p, pts[i], pts[i + 1], d_prev);
            let seg = pts[i + 1] - pts[i];
            let tangent = seg.normalized();
            let null = kernel_direction(&map.jacobian(p, z));
            out.push(J0Crossing {
                segment: i,
                point: z,
                tangent,
                null,
                psi_deg: signed_line_angle(tangent, null),
                seed: branch.vertex_seed[i],
                level: branch.vertex_depth[i + 1] / SeedLine::new(&branch.saddle, branch.side, 1.0).map_or(1, |s| s.step).max(1),
            });
        }
        d_prev = d_next;
    }
    out
}

/// Strands must separate like a crossing at least this steep to count as a
/// loop.
pub const MIN_LOOP_ANGLE_DEG: f64 = 1.0;

/// Seed-parameter bisections used to confirm a candidate crossing.
const VERIFY_DEPTH: usize = 8;

/// Transversal self-intersections of a branch.
///
/// Chord crossings found by spatial hashing are screened for strand
/// separation over an arclength window equal to the refinement spacing, then
/// confirmed on the exact curve: both segments are bisected in seed
/// parameter and the crossing must persist with an angle of at least
/// [`MIN_LOOP_ANGLE_DEG`].
pub fn self_intersections<M: MapModel + ?Sized>(map: &M, branch: &Branch) -> Vec<PhasePoint> {
    let Ok(seed) = SeedLine::new(&branch.saddle, branch.side, branch.control.delta) else {
        return Vec::new();
    };
    let cands = transversal_self_intersections(&branch.polyline, branch.control.max_spacing, MIN_LOOP_ANGLE_DEG);
    cands
        .par_iter()
        .filter_map(|&(i, j, _)| {
            let a = SeedSegment::of(branch, i);
            let b = SeedSegment::of(branch, j);
            verify_crossing(map, branch.saddle.params, &seed, a, b, VERIFY_DEPTH)
        })
        .collect()
}

/// A polyline segment as an interval of seed parameters at one depth.
#[derive(Debug, Clone, Copy)]
struct SeedSegment {
    depth: usize,
    s0: f64,
    s1: f64,
    z0: PhasePoint,
    z1: PhasePoint,
}

impl SeedSegment {
    fn of(branch: &Branch, i: usize) -> SeedSegment {
        let (d0, d1) = (branch.vertex_depth[i], branch.vertex_depth[i + 1]);
        // a segment bridging two levels starts at seed 0 of the later level
        let s0 = if d1 > d0 { 0.0 } else { branch.vertex_seed[i] };
        SeedSegment { depth: d1, s0, s1: branch.vertex_seed[i + 1], z0: branch.polyline[i], z1: branch.polyline[i + 1] }
    }

    fn split<M: MapModel + ?Sized>(&self, map: &M, p: ParamPoint, seed: &SeedLine) -> Option<[SeedSegment; 2]> {
        let sm = 0.5 * (self.s0 + self.s1);
        let zm = eval_seed(map, p, seed, sm, self.depth)?;
        Some([SeedSegment { s1: sm, z1: zm, ..*self }, SeedSegment { s0: sm, z0: zm, ..*self }])
    }
}

fn verify_crossing<M: MapModel + ?Sized>(
    map: &M,
    p: ParamPoint,
    seed: &SeedLine,
    a: SeedSegment,
    b: SeedSegment,
    depth: usize,
) -> Option<PhasePoint> {
    let (s, _) = crate::geometry::segment_intersection(a.z0, a.z1, b.z0, b.z1)?;
    if depth == 0 {
        let angle = crate::geometry::line_angle(a.z1 - a.z0, b.z1 - b.z0).to_degrees();
        return (angle >= MIN_LOOP_ANGLE_DEG).then(|| a.z0.lerp(a.z1, s));
    }
    let sa = a.split(map, p, seed)?;
    let sb = b.split(map, p, seed)?;
    for x in &sa {
        for y in &sb {
            if let Some(z) = verify_crossing(map, p, seed, *x, *y, depth - 1) {
                return Some(z);
            }
        }
    }
    None
}

/// Re-solve a saddle orbit at new parameters starting from a known one,
/// rebased so that its first point continues the old first point.
pub fn continue_saddle<M: MapModel + ?Sized>(map: &M, saddle: &PeriodicOrbit, p: ParamPoint) -> Result<PeriodicOrbit> {
    if p.a != saddle.params.a {
        return Err(Error::InvalidInput("saddle continuation runs at fixed a".into()));
    }
    let orbit = track_orbit(map, saddle, p.tau)?;
    if orbit.stability != Stability::Saddle {
        return Err(Error::NotSaddle);
    }
    Ok(orbit)
}

/// How to pick and follow one J₀ crossing across parameters.
///
/// Branches are grown only about as many levels as it takes the seed offset
/// to expand to unit scale: deep enough to reach the first folds of the
/// unstable set, shallow enough that the set of crossings stays small and
/// stable along a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackingControl {
    pub refine: RefineControl,
    /// Level cap for every branch. `None` derives it at each τ as
    /// ⌈level_scale · ln(1/δ) / ln|λ_u|⌉. Overrides `refine.max_levels`.
    pub levels: Option<usize>,
    pub level_scale: f64,
    /// Sweep step used to follow the crossing before bisection.
    pub sweep_step: f64,
    /// Width of the final τ bracket.
    pub tol: f64,
    /// A matched crossing further than this from the previous one is lost.
    pub max_jump: f64,
}

impl Default for TrackingControl {
    fn default() -> Self {
        TrackingControl { refine: RefineControl::default(), levels: None, level_scale: 1.25, sweep_step: 1e-4, tol: 1e-6, max_jump: 0.05 }
    }
}

/// A J₀ crossing on one branch of one point of a saddle orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitCrossing {
    /// Index of the orbit point, counted from the orbit's first point.
    pub orbit_index: usize,
    pub side: i8,
    pub crossing: J0Crossing,
}

/// One tracked crossing sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackedCrossing {
    pub tau: f64,
    pub crossing: OrbitCrossing,
}

/// Result of a cusp search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuspReport {
    pub tau_cusp: f64,
    pub bracket: (f64, f64),
    pub crossing: OrbitCrossing,
    /// Samples of the tracked crossing during the sweep.
    pub sweep: Vec<TrackedCrossing>,
}

/// J₀ crossings of both branches of every point of a saddle orbit continued
/// from `saddle` to `tau`.
///
/// A crossing of the unstable set shows up at the lowest level on whichever
/// orbit point's branch reaches it first, so a fixed level budget sees it
/// only when all points are grown.
pub fn crossings_at<M: MapModel + ?Sized>(
    map: &M,
    saddle: &PeriodicOrbit,
    tau: f64,
    ctrl: &RefineControl,
) -> Result<(PeriodicOrbit, Vec<OrbitCrossing>)> {
    let p = ParamPoint::new(saddle.params.a, tau);
    let s = continue_saddle(map, saddle, p)?;
    let jobs: Vec<(usize, i8)> = (0..s.q).flat_map(|k| [(k, 1i8), (k, -1i8)]).collect();
    let per: Vec<Result<Vec<OrbitCrossing>>> = jobs
        .par_iter()
        .map(|&(k, side)| {
            let base = if k == 0 { s.clone() } else { s.rebased(map, k) };
            let b = grow_unstable_with(map, &base, side, ctrl, |_, _| ControlFlow::Continue(()))?;
            Ok(j0_events(map, &b).into_iter().map(|crossing| OrbitCrossing { orbit_index: k, side, crossing }).collect())
        })
        .collect();
    let mut out = Vec::new();
    for r in per {
        out.extend(r?);
    }
    Ok((s, out))
}

/// Level cap used while tracking at a given saddle.
pub fn tracking_levels(saddle: &PeriodicOrbit, ctrl: &TrackingControl) -> Result<usize> {
    if let Some(n) = ctrl.levels {
        return Ok(n.max(1));
    }
    let (mu, _) = unstable_eigen(saddle)?;
    let n = ctrl.level_scale * (1.0 / ctrl.refine.delta).ln() / mu.abs().ln();
    // λ_u -> 1 near a fold would ask for unbounded depth
    Ok((n.ceil() as usize).clamp(1, ctrl.refine.max_levels))
}

fn tracked_crossings_at<M: MapModel + ?Sized>(
    map: &M,
    saddle: &PeriodicOrbit,
    tau: f64,
    ctrl: &TrackingControl,
) -> Result<(PeriodicOrbit, Vec<OrbitCrossing>)> {
    let s = continue_saddle(map, saddle, ParamPoint::new(saddle.params.a, tau))?;
    let refine = RefineControl { max_levels: tracking_levels(&s, ctrl)?, ..ctrl.refine };
    crossings_at(map, &s, tau, &refine)
}

fn nearest(events: &[OrbitCrossing], z: PhasePoint) -> Option<OrbitCrossing> {
    events.iter().copied().min_by(|a, b| a.crossing.point.dist(z).total_cmp(&b.crossing.point.dist(z)))
}

/// ψ above this is taken as a wrap through ±90°, not a passage through 0.
const PSI_WRAP_GUARD_DEG: f64 = 45.0;

/// Locate the parameter at which a tracked J₀ crossing of the unstable set
/// of a saddle orbit becomes aligned with the null direction.
///
/// Every crossing present at `bracket.0` is followed upward in steps of
/// `ctrl.sweep_step`, matched between samples by mutually nearest crossing
/// points.
/// The first one whose ψ changes sign through zero is then bisected on
/// sign ψ down to `ctrl.tol`. The saddle is continued along the way.
pub fn find_cusp_tau<M: MapModel + ?Sized>(
    map: &M,
    saddle: &PeriodicOrbit,
    bracket: (f64, f64),
    ctrl: &TrackingControl,
) -> Result<CuspReport> {
    let (lo, hi) = bracket;
    if !(lo < hi) || !(ctrl.sweep_step > 0.0) || !(ctrl.tol > 0.0) {
        return Err(Error::InvalidInput("cusp search needs lo < hi and positive steps".into()));
    }
    let (mut s_lo, ev_lo) = tracked_crossings_at(map, saddle, lo, ctrl)?;
    if ev_lo.is_empty() {
        return Err(Error::CrossingLost { tau: lo });
    }
    let mut tracks: Vec<OrbitCrossing> = ev_lo;
    let mut sweep: Vec<TrackedCrossing> = Vec::new();
    let mut t_lo = lo;
    let n_steps = ((hi - lo) / ctrl.sweep_step).ceil() as usize;
    for k in 1..=n_steps {
        let t = (lo + k as f64 * ctrl.sweep_step).min(hi);
        let (s_t, ev) = tracked_crossings_at(map, &s_lo, t, ctrl)?;
        let mut next_tracks = Vec::with_capacity(tracks.len());
        for tr in &tracks {
            let Some(m) = nearest(&ev, tr.crossing.point) else {
                continue;
            };
            if m.crossing.point.dist(tr.crossing.point) > ctrl.max_jump {
                continue;
            }
            // a crossing that vanished must not hand over to a neighbour:
            // the match has to be mutual
            if nearest(&tracks, m.crossing.point).is_some_and(|back| back != *tr) {
                continue;
            }
            let (a, b) = (tr.crossing.psi_deg, m.crossing.psi_deg);
            if a.signum() != b.signum() && a.abs() < PSI_WRAP_GUARD_DEG && b.abs() < PSI_WRAP_GUARD_DEG {
                sweep.push(TrackedCrossing { tau: t, crossing: m });
                let r = bisect_psi(map, &s_lo, (t_lo, t), *tr, ctrl)?;
                return Ok(CuspReport { sweep, ..r });
            }
            next_tracks.push(m);
        }
        if next_tracks.is_empty() {
            return Err(Error::CrossingLost { tau: t });
        }
        sweep.push(TrackedCrossing { tau: t, crossing: next_tracks[0] });
        tracks = next_tracks;
        s_lo = s_t;
        t_lo = t;
    }
    Err(Error::NoSignChange { lo, hi })
}

fn bisect_psi<M: MapModel + ?Sized>(
    map: &M,
    saddle: &PeriodicOrbit,
    bracket: (f64, f64),
    start: OrbitCrossing,
    ctrl: &TrackingControl,
) -> Result<CuspReport> {
    let (mut lo, mut hi) = bracket;
    let sign_lo = start.crossing.psi_deg.signum();
    let mut cur = start;
    let mut s_ref = saddle.clone();
    while hi - lo > ctrl.tol {
        let mid = 0.5 * (lo + hi);
        let (s_mid, ev) = tracked_crossings_at(map, &s_ref, mid, ctrl)?;
        let m = nearest(&ev, cur.crossing.point).ok_or(Error::CrossingLost { tau: mid })?;
        if m.crossing.point.dist(cur.crossing.point) > ctrl.max_jump {
            return Err(Error::CrossingLost { tau: mid });
        }
        if m.crossing.psi_deg.signum() == sign_lo {
            lo = mid;
            s_ref = s_mid;
        } else {
            hi = mid;
        }
        cur = m;
    }
    Ok(CuspReport { tau_cusp: 0.5 * (lo + hi), bracket: (lo, hi), crossing: cur, sweep: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_angle_sign_and_range() {
        let x = PhasePoint::new(1.0, 0.0);
        assert_eq!(signed_line_angle(x, x), 0.0);
        assert!((signed_line_angle(x, PhasePoint::new(1.0, 1.0).normalized()) - 45.0).abs() < 1e-12);
        assert!((signed_line_angle(x, PhasePoint::new(1.0, -1.0).normalized()) + 45.0).abs() < 1e-12);
        // line orientation does not matter
        assert!((signed_line_angle(-x, PhasePoint::new(1.0, 1.0).normalized()) - 45.0).abs() < 1e-12);
        assert_eq!(signed_line_angle(x, PhasePoint::new(0.0, 1.0)), 90.0);
    }
}
