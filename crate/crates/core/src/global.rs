//! Fates of unstable branches, heteroclinic-crossing brackets, the
//! IC-tangent-to-J₀ parameter, and the chaos-bounds report.
//!
//! A branch's fate is read off its first passage by a saddle point. Each
//! saddle point carries two exit gates: segments parallel to its stable
//! eigenvector, offset by `gate_offset` to either side along the unstable
//! eigenvector. A branch that comes in along the stable manifold leaves
//! through one of them, and the sign of the exit along the unstable
//! eigenvector is its side. Inside a heteroclinic tangle the branch folds
//! across the stable manifold and leaves through both gates; that
//! straddling is its own fate class, so the tangle's entry and exit both
//! show up as fate changes. A branch captured by a sink before it reaches
//! any gate converges to that sink.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{segment_intersection, SegmentHash};
use crate::manifold::{find_cusp_tau, grow_unstable_with, stable_eigen, unstable_eigen, Branch, RefineControl, TrackingControl};
use crate::map::{MapModel, ParamPoint, PhasePoint};
use crate::orbit::{detect_period, iterate_orbit};
use crate::periodic::{track_orbit, PeriodicOrbit, Stability};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    /// Exit at negative position along the unstable eigenvector.
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "fate")]
pub enum Fate {
    ConvergesToSink { orbit: usize, point: usize },
    PassesSaddle { point: usize, side: Side },
    /// Leaves the saddle point through both gates within the settle window.
    Straddles { point: usize },
    Exhausted,
}

/// Which one-sided branch to follow: orbit point `point` of the saddle,
/// side `side` along its unstable eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    pub point: usize,
    pub side: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FateControl {
    pub refine: RefineControl,
    /// Half-length of a gate along the stable eigenvector.
    pub gate_half_len: f64,
    /// Distance of a gate from its saddle point along the unstable
    /// eigenvector.
    pub gate_offset: f64,
    pub capture_radius: f64,
    /// Levels watched after the first gate exit for an exit on the other
    /// side.
    pub settle_levels: usize,
    /// Times the arclength budget is doubled after an exhausted growth.
    pub budget_doublings: u32,
}

impl Default for FateControl {
    fn default() -> Self {
        FateControl {
            refine: RefineControl::default(),
            gate_half_len: 1e-2,
            gate_offset: 5e-3,
            capture_radius: 1e-5,
            settle_levels: 100,
            budget_doublings: 2,
        }
    }
}

impl FateControl {
    pub fn validate(&self) -> Result<()> {
        self.refine.validate()?;
        if !(self.gate_half_len > 0.0 && self.gate_offset > 0.0 && self.capture_radius > 0.0) {
            return Err(Error::InvalidInput("gate sizes and capture radius must be positive".into()));
        }
        Ok(())
    }
}

/// The saddle whose branch is followed (its points are also the gate
/// targets) and the sinks that can capture it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FateTargets {
    pub saddle: PeriodicOrbit,
    pub sinks: Vec<PeriodicOrbit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FateReport {
    pub tau: f64,
    pub fate: Fate,
    /// Where the deciding event happened.
    pub point: Option<PhasePoint>,
    /// Iterate depth of that event.
    pub depth: usize,
    pub arclength: f64,
}

struct Gate {
    point: usize,
    side: Side,
    /// Outward direction; only crossings moving along it are exits.
    outward: PhasePoint,
    a: PhasePoint,
    b: PhasePoint,
}

fn build_gates<M: MapModel + ?Sized>(map: &M, saddle: &PeriodicOrbit, ctrl: &FateControl) -> Result<Vec<Gate>> {
    let mut gates = Vec::with_capacity(2 * saddle.q);
    for k in 0..saddle.q {
        let s = if k == 0 { saddle.clone() } else { saddle.rebased(map, k) };
        let (_, vu) = unstable_eigen(&s)?;
        let (_, vs) = stable_eigen(&s)?;
        for (sign, side) in [(1.0, Side::Right), (-1.0, Side::Left)] {
            let center = s.point() + vu * (sign * ctrl.gate_offset);
            gates.push(Gate { point: k, side, outward: vu * sign, a: center - vs * ctrl.gate_half_len, b: center + vs * ctrl.gate_half_len });
        }
    }
    Ok(gates)
}

/// First gate exit of a branch, with the level it happened at.
#[derive(Clone, Copy)]
struct Exit {
    point: usize,
    side: Side,
    at: PhasePoint,
    depth: usize,
    level: usize,
}

/// Scans new branch segments for fate events, one level at a time.
struct FateScanner<'a> {
    gates: Vec<Gate>,
    gate_index: SegmentHash,
    sinks: &'a [PeriodicOrbit],
    capture: f64,
    settle_levels: usize,
    checked: usize,
    level: usize,
    /// Source point whose gate the branch crosses once on its way out.
    departure: Option<usize>,
    first: Option<Exit>,
    other_side: bool,
    captured: Option<(Fate, PhasePoint, usize)>,
    cand: Vec<usize>,
}

impl<'a> FateScanner<'a> {
    fn new(gates: Vec<Gate>, sinks: &'a [PeriodicOrbit], source: usize, ctrl: &FateControl) -> Self {
        let mut gate_index = SegmentHash::new(2.0 * ctrl.gate_half_len);
        for (i, g) in gates.iter().enumerate() {
            gate_index.insert(i, g.a, g.b);
        }
        FateScanner {
            gates,
            gate_index,
            sinks,
            capture: ctrl.capture_radius,
            settle_levels: ctrl.settle_levels,
            checked: 0,
            level: 0,
            departure: Some(source),
            first: None,
            other_side: false,
            captured: None,
            cand: Vec::new(),
        }
    }

    fn capture_of(&self, z: PhasePoint) -> Option<Fate> {
        for (o, sink) in self.sinks.iter().enumerate().filter(|(_, s)| s.stability.is_attracting()) {
            for (k, &w) in sink.points.iter().enumerate() {
                if z.dist(w) < self.capture {
                    return Some(Fate::ConvergesToSink { orbit: o, point: k });
                }
            }
        }
        None
    }

    /// Earliest gate crossing along segment `z0 → z1`.
    fn gate_crossing(&mut self, z0: PhasePoint, z1: PhasePoint) -> Option<(usize, Side, PhasePoint)> {
        self.gate_index.candidates(z0, z1, &mut self.cand);
        let mut best: Option<(f64, usize, Side, PhasePoint)> = None;
        for &g in &self.cand {
            let gate = &self.gates[g];
            if (z1 - z0).dot(gate.outward) <= 0.0 {
                continue;
            }
            if let Some((s, _)) = segment_intersection(z0, z1, gate.a, gate.b) {
                if best.map_or(true, |b| s < b.0) {
                    best = Some((s, gate.point, gate.side, z0.lerp(z1, s)));
                }
            }
        }
        best.map(|(_, p, side, x)| (p, side, x))
    }

    fn scan(&mut self, branch: &Branch) -> ControlFlow<()> {
        let pts = &branch.polyline;
        while self.checked < pts.len() {
            let i = self.checked;
            self.checked += 1;
            if self.captured.is_none() {
                if let Some(f) = self.capture_of(pts[i]) {
                    self.captured = Some((f, pts[i], branch.vertex_depth[i]));
                    if self.first.is_none() {
                        return ControlFlow::Break(());
                    }
                }
            }
            if i == 0 {
                continue;
            }
            let Some((point, side, at)) = self.gate_crossing(pts[i - 1], pts[i]) else {
                continue;
            };
            if self.departure == Some(point) {
                self.departure = None;
                continue;
            }
            match self.first {
                None => {
                    self.first = Some(Exit { point, side, at, depth: branch.vertex_depth[i], level: self.level });
                }
                Some(f) if f.point == point && f.side != side => {
                    self.other_side = true;
                    return ControlFlow::Break(());
                }
                Some(_) => {}
            }
        }
        self.level += 1;
        match self.first {
            Some(f) if self.level > f.level + self.settle_levels => ControlFlow::Break(()),
            _ => ControlFlow::Continue(()),
        }
    }

    fn outcome(&self) -> Option<(Fate, PhasePoint, usize)> {
        match (self.first, self.captured) {
            (Some(f), _) if self.other_side => Some((Fate::Straddles { point: f.point }, f.at, f.depth)),
            (_, Some(c)) => Some(c),
            (Some(f), None) => Some((Fate::PassesSaddle { point: f.point, side: f.side }, f.at, f.depth)),
            (None, None) => None,
        }
    }
}

/// Grow one branch until its first fate event. An exhausted growth is
/// retried with the arclength budget doubled, up to
/// `ctrl.budget_doublings` times.
pub fn branch_fate<M: MapModel + ?Sized>(map: &M, targets: &FateTargets, spec: BranchSpec, ctrl: &FateControl) -> Result<FateReport> {
    ctrl.validate()?;
    let saddle = &targets.saddle;
    if spec.point >= saddle.q || (spec.side != 1 && spec.side != -1) {
        return Err(Error::InvalidInput("branch spec needs a valid orbit point and side ±1".into()));
    }
    let source = if spec.point == 0 { saddle.clone() } else { saddle.rebased(map, spec.point) };
    let mut refine = ctrl.refine;
    let mut last = None;
    for _ in 0..=ctrl.budget_doublings {
        let gates = build_gates(map, saddle, ctrl)?;
        let mut scanner = FateScanner::new(gates, &targets.sinks, spec.point, ctrl);
        let branch = grow_unstable_with(map, &source, spec.side, &refine, |b, _| scanner.scan(b))?;
        if let Some((fate, point, level)) = scanner.outcome() {
            return Ok(FateReport { tau: saddle.params.tau, fate, point: Some(point), depth: level, arclength: branch.arclength });
        }
        let level = branch.vertex_depth.last().copied().unwrap_or(0);
        last = Some(FateReport { tau: saddle.params.tau, fate: Fate::Exhausted, point: None, depth: level, arclength: branch.arclength });
        refine.arclength_budget *= 2.0;
        refine.max_levels = refine.max_levels.saturating_mul(2);
    }
    Ok(last.unwrap_or(FateReport { tau: saddle.params.tau, fate: Fate::Exhausted, point: None, depth: 0, arclength: 0.0 }))
}

impl FateTargets {
    /// The same targets carried to `tau`. Sinks keep being tracked through
    /// changes of stability but only capture while attracting. A sink that
    /// is lost keeps its index as an empty orbit.
    pub fn at<M: MapModel + ?Sized>(&self, map: &M, tau: f64) -> Result<FateTargets> {
        let saddle = track_orbit(map, &self.saddle, tau)?;
        if saddle.stability != Stability::Saddle {
            return Err(Error::NotSaddle);
        }
        let sinks = self
            .sinks
            .iter()
            .map(|s| match track_orbit(map, s, tau) {
                Ok(o) if !s.points.is_empty() => o,
                _ => PeriodicOrbit { points: Vec::new(), params: ParamPoint::new(s.params.a, tau), ..s.clone() },
            })
            .collect();
        Ok(FateTargets { saddle, sinks })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionBracket {
    pub lo: FateReport,
    pub hi: FateReport,
}

impl ConnectionBracket {
    pub fn width(&self) -> f64 {
        self.hi.tau - self.lo.tau
    }
}

/// Bisect in τ on a change of branch fate until the bracket is narrower
/// than `tol`. The returned bracket bounds the edge of the fate found at
/// the lower end.
pub fn bracket_connection<M: MapModel + ?Sized>(
    map: &M,
    targets: &FateTargets,
    spec: BranchSpec,
    bracket: (f64, f64),
    tol: f64,
    ctrl: &FateControl,
) -> Result<ConnectionBracket> {
    let ends = Endpoints::evaluate(map, targets, spec, bracket, tol, ctrl)?;
    ends.bisect(map, spec, tol, ctrl, Keep::Lower)
}

/// Both edges of a crossing region: `entry` bounds the edge of the fate at
/// the lower end, `exit` the edge of the fate at the upper end. Between
/// them the branch has some third fate (typically [`Fate::Straddles`]).
/// When no such fate was sampled the two brackets coincide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingRegion {
    pub entry: ConnectionBracket,
    pub exit: ConnectionBracket,
}

pub fn bracket_crossing_region<M: MapModel + ?Sized>(
    map: &M,
    targets: &FateTargets,
    spec: BranchSpec,
    bracket: (f64, f64),
    tol: f64,
    ctrl: &FateControl,
) -> Result<CrossingRegion> {
    let ends = Endpoints::evaluate(map, targets, spec, bracket, tol, ctrl)?;
    let upper = (ends.t_hi.clone(), ends.r_hi.clone());
    let entry = ends.clone().bisect(map, spec, tol, ctrl, Keep::Lower)?;
    // The exit lies above the entry's lower end, which still carries the
    // lower fate.
    let t_entry = ends.t_lo.at(map, entry.lo.tau)?;
    let rest = Endpoints { t_lo: t_entry, r_lo: entry.lo.clone(), t_hi: upper.0, r_hi: upper.1 };
    let exit = rest.bisect(map, spec, tol, ctrl, Keep::Upper)?;
    Ok(CrossingRegion { entry, exit })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Keep {
    /// Bracket the edge of the lower end's fate.
    Lower,
    /// Bracket the edge of the upper end's fate.
    Upper,
}

#[derive(Clone)]
struct Endpoints {
    t_lo: FateTargets,
    r_lo: FateReport,
    t_hi: FateTargets,
    r_hi: FateReport,
}

fn decided_fate<M: MapModel + ?Sized>(map: &M, t: &FateTargets, spec: BranchSpec, ctrl: &FateControl) -> Result<FateReport> {
    let r = branch_fate(map, t, spec, ctrl)?;
    if r.fate == Fate::Exhausted {
        return Err(Error::FateExhausted { tau: r.tau });
    }
    Ok(r)
}

impl Endpoints {
    fn evaluate<M: MapModel + ?Sized>(
        map: &M,
        targets: &FateTargets,
        spec: BranchSpec,
        bracket: (f64, f64),
        tol: f64,
        ctrl: &FateControl,
    ) -> Result<Self> {
        let (lo, hi) = bracket;
        if !(lo < hi) || !(tol > 0.0) {
            return Err(Error::InvalidInput("connection bracket needs lo < hi and tol > 0".into()));
        }
        let t_lo = targets.at(map, lo)?;
        let t_hi = targets.at(map, hi)?;
        let (r_lo, r_hi) = rayon::join(|| decided_fate(map, &t_lo, spec, ctrl), || decided_fate(map, &t_hi, spec, ctrl));
        let (r_lo, r_hi) = (r_lo?, r_hi?);
        if r_lo.fate == r_hi.fate {
            return Err(Error::SameFate { lo, hi });
        }
        Ok(Endpoints { t_lo, r_lo, t_hi, r_hi })
    }

    fn bisect<M: MapModel + ?Sized>(mut self, map: &M, spec: BranchSpec, tol: f64, ctrl: &FateControl, keep: Keep) -> Result<ConnectionBracket> {
        while self.r_hi.tau - self.r_lo.tau > tol {
            let mid = 0.5 * (self.r_lo.tau + self.r_hi.tau);
            let t_mid = self.t_lo.at(map, mid)?;
            let r = decided_fate(map, &t_mid, spec, ctrl)?;
            let move_lo = match keep {
                Keep::Lower => r.fate == self.r_lo.fate,
                Keep::Upper => r.fate != self.r_hi.fate,
            };
            if move_lo {
                self.r_lo = r;
                self.t_lo = t_mid;
            } else {
                self.r_hi = r;
                self.t_hi = t_mid;
            }
        }
        Ok(ConnectionBracket { lo: self.r_lo, hi: self.r_hi })
    }
}

/// Simulation budget for the invariant circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IcControl {
    pub n_transient: usize,
    pub n_keep: usize,
    /// Offset of the start point from the fixed point.
    pub start_offset: f64,
    /// Periods up to this count as locking.
    pub q_lock: usize,
    pub tol: f64,
}

impl Default for IcControl {
    fn default() -> Self {
        IcControl { n_transient: 10_000, n_keep: 100_000, start_offset: 0.01, q_lock: 200, tol: 1e-6 }
    }
}

/// Minimum of the Jacobian determinant over the simulated invariant circle.
pub fn ic_min_det<M: MapModel + ?Sized>(map: &M, p: ParamPoint, ctrl: &IcControl) -> Result<f64> {
    let z0 = PhasePoint::new(p.a.abs().sqrt() + ctrl.start_offset, p.a);
    let orbit = iterate_orbit(map, p, z0, ctrl.n_transient, ctrl.n_keep).map_err(|_| Error::InvariantCircleLost { tau: p.tau })?;
    if detect_period(&orbit, ctrl.q_lock, crate::orbit::DEFAULT_PERIOD_EPS).is_some() {
        return Err(Error::InvariantCircleLost { tau: p.tau });
    }
    Ok(orbit.points.iter().map(|&z| map.det_jacobian(p, z)).fold(f64::INFINITY, f64::min))
}

/// τ at which the invariant circle first touches J₀, by bisection on the
/// sign of its minimal Jacobian determinant.
pub fn ic_tangent_to_j0<M: MapModel + ?Sized>(map: &M, a: f64, bracket: (f64, f64), ctrl: &IcControl) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(Error::InvalidInput("bracket needs lo < hi".into()));
    }
    let f = |t: f64| ic_min_det(map, ParamPoint::new(a, t), ctrl);
    let (f_lo, f_hi) = rayon::join(|| f(lo), || f(hi));
    let s_lo = f_lo?.signum();
    if s_lo == f_hi?.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    while hi - lo > ctrl.tol {
        let mid = 0.5 * (lo + hi);
        if f(mid)?.signum() == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// Inputs of the chaos-bounds report at one value of `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosBoundsSpec {
    pub targets: FateTargets,
    /// Branch whose first heteroclinic crossing bounds the circle breakdown.
    pub first_branch: BranchSpec,
    pub first_bracket: (f64, f64),
    pub cusp_bracket: (f64, f64),
    /// Branch whose second crossing bounds the onset of chaos.
    pub second_branch: BranchSpec,
    pub second_bracket: (f64, f64),
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosBounds {
    pub tau_cd_bound: f64,
    pub tau_cusp: f64,
    pub tau_chaos_bound: f64,
    pub first: CrossingRegion,
    pub second: CrossingRegion,
}

/// Upper bound on the circle-breakdown parameter, the cusp parameter, and
/// upper bound on the chaos parameter, checked for strict ordering.
pub fn chaos_bounds_report<M: MapModel + ?Sized>(
    map: &M,
    spec: &ChaosBoundsSpec,
    fate: &FateControl,
    tracking: &TrackingControl,
) -> Result<ChaosBounds> {
    let first = bracket_crossing_region(map, &spec.targets, spec.first_branch, spec.first_bracket, spec.tol, fate)?;
    let cusp = find_cusp_tau(map, &spec.targets.saddle, spec.cusp_bracket, tracking)?;
    let second = bracket_crossing_region(map, &spec.targets, spec.second_branch, spec.second_bracket, spec.tol, fate)?;
    let tau_cd_bound = 0.5 * (first.entry.lo.tau + first.entry.hi.tau);
    let tau_chaos_bound = 0.5 * (second.exit.lo.tau + second.exit.hi.tau);
    if !(tau_cd_bound < cusp.tau_cusp && cusp.tau_cusp < tau_chaos_bound) {
        return Err(Error::OrderingViolated(format!(
            "expected {tau_cd_bound} < {} < {tau_chaos_bound}",
            cusp.tau_cusp
        )));
    }
    Ok(ChaosBounds { tau_cd_bound, tau_cusp: cusp.tau_cusp, tau_chaos_bound, first, second })
}
