//! Basins of attraction on a grid, shallow preimage trees of local stable
//! segments, and counts of periodic points relative to an invariant circle
//! and to J₀.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{point_segment_distance, polyline_self_intersections, winding_number, Rect};
use crate::manifold::stable_eigen;
use crate::map::{diverged, polyline_preimages, MapModel, ParamPoint, PhasePoint};
use crate::orbit::{detect_period, iterate_orbit, DEFAULT_PERIOD_EPS};
use crate::periodic::PeriodicOrbit;

/// An attractor a basin cell can be assigned to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum BasinAttractor {
    /// Points of an attracting periodic orbit.
    Cycle { points: Vec<PhasePoint> },
    /// Dense sample of an attracting invariant circle; membership is a tube
    /// around the sample.
    Circle { points: Vec<PhasePoint> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "label", content = "id")]
pub enum CellLabel {
    Attractor(usize),
    Diverged,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasinControl {
    pub max_iter: usize,
    /// Orbits leaving this radius around the origin count as diverged.
    pub escape_r: f64,
    pub capture_radius: f64,
    pub tube_radius: f64,
    /// Consecutive iterates an orbit must stay captured before it is
    /// labeled.
    pub dwell: usize,
}

impl Default for BasinControl {
    fn default() -> Self {
        BasinControl { max_iter: 20_000, escape_r: 1e3, capture_radius: 1e-4, tube_radius: 1e-3, dwell: 16 }
    }
}

impl BasinControl {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iter > 0
            && self.escape_r > 0.0
            && self.capture_radius > 0.0
            && self.tube_radius > 0.0
            && self.dwell > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput("basin control values must be positive".into()))
        }
    }
}

/// Per-cell labels, row-major with `y` increasing by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinGrid {
    pub bbox: Rect,
    pub nx: usize,
    pub ny: usize,
    pub labels: Vec<CellLabel>,
}

impl BasinGrid {
    pub fn cell_center(&self, i: usize, j: usize) -> PhasePoint {
        cell_center(&self.bbox, self.nx, self.ny, i, j)
    }

    pub fn label(&self, i: usize, j: usize) -> CellLabel {
        self.labels[j * self.nx + i]
    }

    pub fn count(&self, label: CellLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Number of 4-connected components of the cells carrying `label`.
    pub fn components(&self, label: CellLabel) -> usize {
        let (nx, ny) = (self.nx, self.ny);
        let mut seen = vec![false; self.labels.len()];
        let mut stack = Vec::new();
        let mut n = 0;
        for start in 0..self.labels.len() {
            if seen[start] || self.labels[start] != label {
                continue;
            }
            n += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(c) = stack.pop() {
                let (i, j) = (c % nx, c / nx);
                let mut visit = |k: usize| {
                    if !seen[k] && self.labels[k] == label {
                        seen[k] = true;
                        stack.push(k);
                    }
                };
                if i > 0 {
                    visit(c - 1);
                }
                if i + 1 < nx {
                    visit(c + 1);
                }
                if j > 0 {
                    visit(c - nx);
                }
                if j + 1 < ny {
                    visit(c + nx);
                }
            }
        }
        n
    }
}

fn cell_center(b: &Rect, nx: usize, ny: usize, i: usize, j: usize) -> PhasePoint {
    PhasePoint::new(
        b.x_min + (i as f64 + 0.5) * b.width() / nx as f64,
        b.y_min + (j as f64 + 0.5) * b.height() / ny as f64,
    )
}

/// Bucketed point sample for radius queries.
struct PointCloud {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<PhasePoint>>,
}

impl PointCloud {
    fn new(points: &[PhasePoint], cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<PhasePoint>> = HashMap::new();
        for &z in points {
            buckets.entry(Self::key(z, cell)).or_default().push(z);
        }
        PointCloud { cell, buckets }
    }

    fn key(z: PhasePoint, cell: f64) -> (i64, i64) {
        ((z.x / cell).floor() as i64, (z.y / cell).floor() as i64)
    }

    /// Whether some sample point lies within `r <= cell` of `z`.
    fn near(&self, z: PhasePoint, r: f64) -> bool {
        let (ci, cj) = Self::key(z, self.cell);
        (ci - 1..=ci + 1).any(|i| {
            (cj - 1..=cj + 1).any(|j| self.buckets.get(&(i, j)).is_some_and(|v| v.iter().any(|&w| z.dist(w) < r)))
        })
    }
}

enum Target {
    Cycle(Vec<PhasePoint>),
    Circle(PointCloud),
}

/// Label every cell by forward iteration of its center.
pub fn basin_grid<M: MapModel + ?Sized>(
    map: &M,
    p: ParamPoint,
    bbox: Rect,
    nx: usize,
    ny: usize,
    attractors: &[BasinAttractor],
    ctrl: &BasinControl,
) -> Result<BasinGrid> {
    ctrl.validate()?;
    if !bbox.is_valid() || nx == 0 || ny == 0 {
        return Err(Error::InvalidInput("basin grid needs a nonempty box and resolution".into()));
    }
    let targets: Vec<Target> = attractors
        .iter()
        .map(|a| match a {
            BasinAttractor::Cycle { points } => Target::Cycle(points.clone()),
            BasinAttractor::Circle { points } => Target::Circle(PointCloud::new(points, ctrl.tube_radius)),
        })
        .collect();
    let captured_by = |z: PhasePoint| {
        targets.iter().position(|t| match t {
            Target::Cycle(pts) => pts.iter().any(|&w| z.dist(w) < ctrl.capture_radius),
            Target::Circle(cloud) => cloud.near(z, ctrl.tube_radius),
        })
    };
    let labels = (0..nx * ny)
        .into_par_iter()
        .map(|c| {
            let mut z = cell_center(&bbox, nx, ny, c % nx, c / nx);
            let mut run: Option<(usize, usize)> = None;
            for _ in 0..ctrl.max_iter {
                z = map.apply(p, z);
                if diverged(z) || z.norm() > ctrl.escape_r {
                    return CellLabel::Diverged;
                }
                run = match (captured_by(z), run) {
                    (Some(k), Some((prev, n))) if k == prev => Some((k, n + 1)),
                    (Some(k), _) => Some((k, 1)),
                    (None, _) => None,
                };
                if let Some((k, n)) = run {
                    if n >= ctrl.dwell {
                        return CellLabel::Attractor(k);
                    }
                }
            }
            CellLabel::Undecided
        })
        .collect();
    Ok(BasinGrid { bbox, nx, ny, labels })
}

/// Rank-by-rank preimages of a local stable segment through a saddle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreimageTree {
    pub root: Vec<PhasePoint>,
    /// `levels[k]` holds the rank-(k+1) preimage branches.
    pub levels: Vec<Vec<Vec<PhasePoint>>>,
    /// Set when the vertex budget cut the tree short.
    pub truncated: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreimageControl {
    /// Vertices on the root segment.
    pub root_vertices: usize,
    /// Total vertex budget over all levels.
    pub max_vertices: usize,
}

impl Default for PreimageControl {
    fn default() -> Self {
        PreimageControl { root_vertices: 401, max_vertices: 2_000_000 }
    }
}

pub fn preimage_tree<M: MapModel + ?Sized>(
    map: &M,
    saddle: &PeriodicOrbit,
    seg_len: f64,
    depth: usize,
    ctrl: &PreimageControl,
) -> Result<PreimageTree> {
    let p = saddle.params;
    p.require_invertible_slice()?;
    if !(seg_len > 0.0) || ctrl.root_vertices < 2 {
        return Err(Error::InvalidInput("preimage tree needs seg_len > 0 and at least two root vertices".into()));
    }
    let (_, vs) = stable_eigen(saddle)?;
    let center = saddle.points[0];
    let n = ctrl.root_vertices;
    let root: Vec<PhasePoint> =
        (0..n).map(|k| center + vs * (seg_len * (k as f64 / (n - 1) as f64 - 0.5))).collect();
    let mut levels: Vec<Vec<Vec<PhasePoint>>> = Vec::new();
    let mut total = root.len();
    let mut truncated = None;
    for k in 0..depth {
        let prev: &[Vec<PhasePoint>] = if k == 0 { std::slice::from_ref(&root) } else { &levels[k - 1] };
        let next: Vec<Vec<PhasePoint>> = prev
            .par_iter()
            .map(|curve| polyline_preimages(map, p, curve))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .filter(|b| b.len() >= 2)
            .collect();
        let added: usize = next.iter().map(Vec::len).sum();
        if total + added > ctrl.max_vertices {
            truncated = Some(format!("vertex budget {} reached at rank {}", ctrl.max_vertices, k + 1));
            break;
        }
        total += added;
        levels.push(next);
    }
    Ok(PreimageTree { root, levels, truncated })
}

/// Counts of points inside and outside a closed simple curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsideOutside {
    pub inside: usize,
    pub outside: usize,
}

/// Winding-number classification of `points` against the closed polygon
/// `curve` (implicitly closed from the last vertex to the first).
pub fn inside_outside(curve: &[PhasePoint], points: &[PhasePoint]) -> Result<InsideOutside> {
    if curve.len() < 3 {
        return Err(Error::InvalidInput("closed curve needs at least three vertices".into()));
    }
    let mut closed = curve.to_vec();
    if closed.first() != closed.last() {
        closed.push(curve[0]);
    }
    if !polyline_self_intersections(&closed).is_empty() {
        return Err(Error::NotSimple);
    }
    let inside = points.iter().filter(|&&z| winding_number(curve, z) != 0).count();
    Ok(InsideOutside { inside, outside: points.len() - inside })
}

/// Budget for sampling an invariant circle as a closed curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CircleSample {
    pub n_transient: usize,
    /// Start offset in `x` from the fixed point.
    pub start_offset: f64,
    /// Periods up to this are taken as locking rather than a circle.
    pub q_lock: usize,
    /// Target spacing between consecutive vertices.
    pub spacing: f64,
    /// Longest close-return time searched for.
    pub max_return: usize,
    pub max_vertices: usize,
}

impl Default for CircleSample {
    fn default() -> Self {
        CircleSample {
            n_transient: 10_000,
            start_offset: 0.01,
            q_lock: 200,
            spacing: 2e-3,
            max_return: 50_000,
            max_vertices: 200_000,
        }
    }
}

/// Simulated attracting invariant circle around the fixed point
/// `(√a, a)`, as a closed polygon in circle order.
///
/// The circle need not be star-shaped, so its points are ordered by the
/// dynamics: after the transient, the first return `m` with
/// `|f^m(z) − z| < spacing` advances every point by a small step along the
/// circle. Iterating `f^m` from `z` walks the circle once; where `f^m`
/// stretches, extra points are mapped forward from the previous step. The
/// walk stops when it passes through its first point again after its
/// lifted angle about the fixed point has made at least half a turn.
pub fn invariant_circle<M: MapModel + ?Sized>(map: &M, p: ParamPoint, ctrl: &CircleSample) -> Result<Vec<PhasePoint>> {
    let lost = || Error::InvariantCircleLost { tau: p.tau };
    let center = PhasePoint::new(p.a.abs().sqrt(), p.a);
    let z0 = PhasePoint::new(center.x + ctrl.start_offset, center.y);
    let probe = iterate_orbit(map, p, z0, ctrl.n_transient, 3 * ctrl.q_lock).map_err(|_| lost())?;
    if detect_period(&probe, ctrl.q_lock, DEFAULT_PERIOD_EPS).is_some() {
        return Err(lost());
    }
    let start = probe.points[0];
    let mut z = start;
    let mut m = None;
    for k in 1..=ctrl.max_return {
        z = map.apply(p, z);
        if diverged(z) {
            return Err(lost());
        }
        if z.dist(start) < ctrl.spacing {
            m = Some(k);
            break;
        }
    }
    let m = m.ok_or_else(|| Error::InvalidInput(format!("no close return within {} iterates", ctrl.max_return)))?;
    let angle = |w: PhasePoint| (w.y - center.y).atan2(w.x - center.x);
    let step = |w: PhasePoint| map.iterate(p, w, m).map_err(|_| lost());
    // The current arc between consecutive walk points; its image under f^m
    // is the next arc. Where f^m stretches, chord midpoints of the current
    // arc are mapped forward to keep the spacing. The first arc is a bare
    // chord, so the walk starts from its refined image.
    let advance = |arc: &[PhasePoint]| -> Result<Vec<PhasePoint>> {
        let mut next = vec![step(arc[0])?];
        for pair in arc.windows(2) {
            let b1 = step(pair[1])?;
            fill(&step, pair[0], pair[1], *next.last().unwrap(), b1, ctrl.spacing, 24, &mut next)?;
            next.push(b1);
        }
        let mut thinned = vec![next[0]];
        for (k, &w) in next.iter().enumerate().skip(1) {
            let last = *thinned.last().unwrap();
            let droppable = k + 1 < next.len() && w.dist(last) < 0.5 * ctrl.spacing && next[k + 1].dist(last) <= ctrl.spacing;
            if !droppable {
                thinned.push(w);
            }
        }
        Ok(thinned)
    };
    let mut arc = advance(&[start, step(start)?])?;
    let origin = arc[0];
    // the walk has come round once it passes through its origin again
    let close_tol = 0.05 * ctrl.spacing;
    let mut pts = vec![origin];
    let mut turned = 0.0f64;
    loop {
        let next = advance(&arc)?;
        for &w in &arc[1..] {
            let prev = *pts.last().unwrap();
            let mut d = angle(w) - angle(prev);
            if d > std::f64::consts::PI {
                d -= std::f64::consts::TAU;
            } else if d < -std::f64::consts::PI {
                d += std::f64::consts::TAU;
            }
            turned += d;
            if turned.abs() >= std::f64::consts::PI && point_segment_distance(origin, prev, w).0 < close_tol {
                return Ok(pts);
            }
            if turned.abs() > 3.0 * std::f64::consts::PI {
                return Err(Error::InvalidInput("invariant circle walk did not close".into()));
            }
            pts.push(w);
        }
        if pts.len() > ctrl.max_vertices {
            return Err(Error::InvalidInput("invariant circle walk exceeded its vertex budget".into()));
        }
        arc = next;
    }
}

/// Insert points between `b0 = g(a0)` and `b1 = g(a1)` by mapping chord
/// midpoints of `a0 a1`, until consecutive points are within `spacing` and
/// the image midpoint sits within a small fraction of `spacing` of the chord.
#[allow(clippy::too_many_arguments)]
fn fill<G: Fn(PhasePoint) -> Result<PhasePoint>>(
    g: &G,
    a0: PhasePoint,
    a1: PhasePoint,
    b0: PhasePoint,
    b1: PhasePoint,
    spacing: f64,
    depth: u32,
    out: &mut Vec<PhasePoint>,
) -> Result<()> {
    if depth == 0 || b0.dist(b1) <= 0.25 * spacing {
        return Ok(());
    }
    let am = a0.lerp(a1, 0.5);
    let bm = g(am)?;
    if b0.dist(b1) <= spacing && point_segment_distance(bm, b0, b1).0 <= 0.02 * spacing {
        return Ok(());
    }
    fill(g, a0, am, b0, bm, spacing, depth - 1, out)?;
    out.push(bm);
    fill(g, am, a1, bm, b1, spacing, depth - 1, out)
}

/// Points left of J₀ and the indices of points too close to J₀ to decide.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeftCount {
    pub count: usize,
    pub boundary: Vec<usize>,
}

/// Distance below which a point counts as lying on J₀.
pub const J0_BOUNDARY_TOL: f64 = 1e-10;

/// Count points left of J₀: the fold region where det J < 0, which for the
/// Euler–Lorenz map lies between the two branches of the J₀ parabola.
/// Iterates of such points switch sides of an invariant circle crossing
/// J₀, so a complete periodic orbit has an even count.
///
/// With det J = A(y) + 2τ²x² and A(y) = (1 + aτ − τy)(1 − τ), the distance
/// to J₀ is estimated as |det J| / |∇det J|; points closer than
/// [`J0_BOUNDARY_TOL`] are reported in `boundary` instead of counted.
pub fn left_of_j0_count(p: ParamPoint, points: &[PhasePoint]) -> Result<LeftCount> {
    p.validate()?;
    let tau = p.tau;
    let mut count = 0;
    let mut boundary = Vec::new();
    for (k, z) in points.iter().enumerate() {
        let det = (1.0 + p.a * tau - tau * z.y) * (1.0 - tau) + 2.0 * tau * tau * z.x * z.x;
        let grad = PhasePoint::new(4.0 * tau * tau * z.x, -tau * (1.0 - tau));
        if det.abs() < J0_BOUNDARY_TOL * grad.norm() {
            boundary.push(k);
        } else if det < 0.0 {
            count += 1;
        }
    }
    Ok(LeftCount { count, boundary })
}
