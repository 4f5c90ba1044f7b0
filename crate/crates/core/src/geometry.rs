//! Planar points, small dense matrices, and polyline primitives.

use std::collections::HashMap;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A point (x, y) in phase space. Also used as a plain 2-vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub y: f64,
}

impl PhasePoint {
    pub const ORIGIN: PhasePoint = PhasePoint { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        PhasePoint { x, y }
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn dot(self, o: PhasePoint) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the planar cross product.
    #[inline]
    pub fn cross(self, o: PhasePoint) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn dist(self, o: PhasePoint) -> f64 {
        (self - o).norm()
    }

    pub fn normalized(self) -> PhasePoint {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            self
        }
    }

    pub fn lerp(self, o: PhasePoint, t: f64) -> PhasePoint {
        self + (o - self) * t
    }
}

impl Add for PhasePoint {
    type Output = PhasePoint;
    #[inline]
    fn add(self, o: PhasePoint) -> PhasePoint {
        PhasePoint::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for PhasePoint {
    #[inline]
    fn add_assign(&mut self, o: PhasePoint) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for PhasePoint {
    type Output = PhasePoint;
    #[inline]
    fn sub(self, o: PhasePoint) -> PhasePoint {
        PhasePoint::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for PhasePoint {
    type Output = PhasePoint;
    #[inline]
    fn mul(self, s: f64) -> PhasePoint {
        PhasePoint::new(self.x * s, self.y * s)
    }
}

impl Neg for PhasePoint {
    type Output = PhasePoint;
    #[inline]
    fn neg(self) -> PhasePoint {
        PhasePoint::new(-self.x, -self.y)
    }
}

impl From<(f64, f64)> for PhasePoint {
    fn from((x, y): (f64, f64)) -> Self {
        PhasePoint::new(x, y)
    }
}

/// A 2x2 real matrix, row-major. Used for map derivatives and monodromy
/// products.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jacobian2 {
    pub j11: f64,
    pub j12: f64,
    pub j21: f64,
    pub j22: f64,
}

impl Jacobian2 {
    pub const IDENTITY: Jacobian2 = Jacobian2 { j11: 1.0, j12: 0.0, j21: 0.0, j22: 1.0 };

    pub const fn new(j11: f64, j12: f64, j21: f64, j22: f64) -> Self {
        Jacobian2 { j11, j12, j21, j22 }
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.j11 + self.j22
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.j11 * self.j22 - self.j12 * self.j21
    }

    /// tr² − 4·det; negative for a complex-conjugate eigenvalue pair.
    #[inline]
    pub fn discriminant(&self) -> f64 {
        let t = self.trace();
        t * t - 4.0 * self.det()
    }

    /// Matrix product `self * rhs`.
    #[inline]
    pub fn mul(&self, r: &Jacobian2) -> Jacobian2 {
        Jacobian2 {
            j11: self.j11 * r.j11 + self.j12 * r.j21,
            j12: self.j11 * r.j12 + self.j12 * r.j22,
            j21: self.j21 * r.j11 + self.j22 * r.j21,
            j22: self.j21 * r.j12 + self.j22 * r.j22,
        }
    }

    #[inline]
    pub fn apply(&self, v: PhasePoint) -> PhasePoint {
        PhasePoint::new(self.j11 * v.x + self.j12 * v.y, self.j21 * v.x + self.j22 * v.y)
    }

    pub fn sub_identity(&self) -> Jacobian2 {
        Jacobian2::new(self.j11 - 1.0, self.j12, self.j21, self.j22 - 1.0)
    }

    /// Max-abs entry norm.
    pub fn max_abs(&self) -> f64 {
        self.j11.abs().max(self.j12.abs()).max(self.j21.abs()).max(self.j22.abs())
    }

    /// Solve `self * v = rhs`; `None` when singular.
    pub fn solve(&self, rhs: PhasePoint) -> Option<PhasePoint> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let v = PhasePoint::new(
            (self.j22 * rhs.x - self.j12 * rhs.y) / d,
            (self.j11 * rhs.y - self.j21 * rhs.x) / d,
        );
        v.is_finite().then_some(v)
    }

    /// Roots of λ² − tr·λ + det, ordered by modulus descending, ties by
    /// real part descending.
    pub fn eigenvalues(&self) -> [Complex64; 2] {
        let t = self.trace();
        let d = self.det();
        let disc = t * t - 4.0 * d;
        let mut ev = if disc >= 0.0 {
            let s = disc.sqrt();
            // avoid cancellation in the smaller root
            let big = if t >= 0.0 { 0.5 * (t + s) } else { 0.5 * (t - s) };
            let small = if big != 0.0 { d / big } else { 0.5 * (t - s) };
            [Complex64::new(big, 0.0), Complex64::new(small, 0.0)]
        } else {
            let im = 0.5 * (-disc).sqrt();
            [Complex64::new(0.5 * t, im), Complex64::new(0.5 * t, -im)]
        };
        ev.sort_by(|p, q| {
            q.norm()
                .partial_cmp(&p.norm())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(q.re.partial_cmp(&p.re).unwrap_or(std::cmp::Ordering::Equal))
                .then(q.im.partial_cmp(&p.im).unwrap_or(std::cmp::Ordering::Equal))
        });
        ev
    }

    /// Unit eigenvector for a real eigenvalue, sign-normalized so the
    /// x-component is nonnegative (ties: nonnegative y).
    pub fn real_eigenvector(&self, lambda: f64) -> PhasePoint {
        // rows of (M - λI); pick the better conditioned one
        let r1 = PhasePoint::new(self.j11 - lambda, self.j12);
        let r2 = PhasePoint::new(self.j21, self.j22 - lambda);
        let row = if r1.norm() >= r2.norm() { r1 } else { r2 };
        let v = if row.norm() == 0.0 {
            PhasePoint::new(1.0, 0.0)
        } else {
            PhasePoint::new(-row.y, row.x).normalized()
        };
        canonical_sign(v)
    }
}

/// Sign convention for direction vectors: x ≥ 0, and y ≥ 0 when x = 0.
pub fn canonical_sign(v: PhasePoint) -> PhasePoint {
    if v.x < 0.0 || (v.x == 0.0 && v.y < 0.0) {
        -v
    } else {
        v
    }
}

/// An axis-aligned rectangle in phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Rect { x_min, x_max, y_min, y_max }
    }

    pub fn is_valid(&self) -> bool {
        [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite())
            && self.x_max > self.x_min
            && self.y_max > self.y_min
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn contains(&self, p: PhasePoint) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn bounding(points: &[PhasePoint]) -> Option<Rect> {
        let first = points.first()?;
        let mut r = Rect::new(first.x, first.x, first.y, first.y);
        for p in points {
            r.x_min = r.x_min.min(p.x);
            r.x_max = r.x_max.max(p.x);
            r.y_min = r.y_min.min(p.y);
            r.y_max = r.y_max.max(p.y);
        }
        Some(r)
    }
}

/// Intersection of the closed segments [p0,p1] and [q0,q1].
///
/// Returns the parameters `(s, t)` along each segment of a proper
/// (non-collinear) intersection.
pub fn segment_intersection(
    p0: PhasePoint,
    p1: PhasePoint,
    q0: PhasePoint,
    q1: PhasePoint,
) -> Option<(f64, f64)> {
    let r = p1 - p0;
    let s = q1 - q0;
    let denom = r.cross(s);
    if denom == 0.0 {
        return None;
    }
    let qp = q0 - p0;
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some((t, u))
    } else {
        None
    }
}

/// Distance from `p` to the segment [a,b], together with the parameter of
/// the closest point.
pub fn point_segment_distance(p: PhasePoint, a: PhasePoint, b: PhasePoint) -> (f64, f64) {
    let ab = b - a;
    let l2 = ab.dot(ab);
    let t = if l2 > 0.0 { ((p - a).dot(ab) / l2).clamp(0.0, 1.0) } else { 0.0 };
    (p.dist(a + ab * t), t)
}

pub fn polyline_length(points: &[PhasePoint]) -> f64 {
    points.windows(2).map(|w| w[0].dist(w[1])).sum()
}

/// Winding number of a closed polygon (implicitly closed from last to
/// first vertex) around `p`.
pub fn winding_number(polygon: &[PhasePoint], p: PhasePoint) -> i32 {
    let n = polygon.len();
    let mut wn = 0;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        let side = (b - a).cross(p - a);
        if a.y <= p.y {
            if b.y > p.y && side > 0.0 {
                wn += 1;
            }
        } else if b.y <= p.y && side < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Uniform-grid bucket index over segment bounding boxes.
pub struct SegmentHash {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl SegmentHash {
    /// An empty index with square cells of side `cell`.
    pub fn new(cell: f64) -> Self {
        SegmentHash { cell, buckets: HashMap::new() }
    }

    /// Index the consecutive segments of `points`.
    pub fn build(points: &[PhasePoint], cell: f64) -> Self {
        let mut h = SegmentHash::new(cell);
        for (i, w) in points.windows(2).enumerate() {
            h.insert(i, w[0], w[1]);
        }
        h
    }

    fn key(&self, v: f64) -> i64 {
        // saturating float-to-int cast keeps absurd inputs bounded
        (v / self.cell).floor() as i64
    }

    /// Cell size for indexing `points`: a few median segment lengths, but
    /// never so small that the total stamp count exceeds ~4 per segment.
    pub fn auto_cell(points: &[PhasePoint]) -> f64 {
        let mut lengths: Vec<f64> = points.windows(2).map(|w| w[0].dist(w[1])).collect();
        if lengths.is_empty() {
            return 1.0;
        }
        let total: f64 = lengths.iter().sum();
        let mid = lengths.len() / 2;
        let median = *lengths.select_nth_unstable_by(mid, |a, b| a.total_cmp(b)).1;
        (4.0 * median).max(total / lengths.len() as f64).max(1e-12)
    }

    pub fn insert(&mut self, id: usize, a: PhasePoint, b: PhasePoint) {
        // long segments are stamped piecewise so each piece covers at most
        // 2×2 cells
        let pieces = ((a.dist(b) / self.cell).ceil() as usize).clamp(1, 1 << 20);
        let mut last = None;
        for k in 0..pieces {
            let p0 = a.lerp(b, k as f64 / pieces as f64);
            let p1 = a.lerp(b, (k + 1) as f64 / pieces as f64);
            let (x0, x1) = (self.key(p0.x.min(p1.x)), self.key(p0.x.max(p1.x)));
            let (y0, y1) = (self.key(p0.y.min(p1.y)), self.key(p0.y.max(p1.y)));
            for gx in x0..=x1 {
                for gy in y0..=y1 {
                    if last == Some((gx, gy)) {
                        continue;
                    }
                    let v = self.buckets.entry((gx, gy)).or_default();
                    if v.last() != Some(&id) {
                        v.push(id);
                    }
                }
            }
            last = Some((x1, y1));
        }
    }

    /// Candidate segment ids whose cells overlap the box of [a,b]; may
    /// contain duplicates.
    pub fn candidates(&self, a: PhasePoint, b: PhasePoint, out: &mut Vec<usize>) {
        out.clear();
        let (x0, x1) = (self.key(a.x.min(b.x)), self.key(a.x.max(b.x)));
        let (y0, y1) = (self.key(a.y.min(b.y)), self.key(a.y.max(b.y)));
        let cells = (x1 - x0 + 1).saturating_mul(y1 - y0 + 1);
        if cells > self.buckets.len() as i64 {
            for v in self.buckets.values() {
                out.extend_from_slice(v);
            }
            return;
        }
        for gx in x0..=x1 {
            for gy in y0..=y1 {
                if let Some(v) = self.buckets.get(&(gx, gy)) {
                    out.extend_from_slice(v);
                }
            }
        }
    }

    /// Buckets with their cell keys, for pairwise sweeps.
    pub fn cells(&self) -> impl Iterator<Item = (&(i64, i64), &Vec<usize>)> {
        self.buckets.iter()
    }

    pub fn cell_of(&self, z: PhasePoint) -> (i64, i64) {
        (self.key(z.x), self.key(z.y))
    }
}

/// Transversal intersections between non-adjacent segments of one polyline.
///
/// Returns `(segment i, segment j, point)` with `i < j`, sorted by `(i, j)`.
pub fn polyline_self_intersections(points: &[PhasePoint]) -> Vec<(usize, usize, PhasePoint)> {
    if points.len() < 4 {
        return Vec::new();
    }
    let lengths: Vec<f64> = points.windows(2).map(|w| w[0].dist(w[1])).collect();
    let hash = SegmentHash::build(points, SegmentHash::auto_cell(points));
    let nseg = points.len() - 1;
    let closed = points[0] == points[nseg];
    let mut out = Vec::new();
    for (key, bucket) in hash.cells() {
        for (bi, &i) in bucket.iter().enumerate() {
            for &j in &bucket[bi + 1..] {
                let (i, j) = if i < j { (i, j) } else { (j, i) };
                if j <= i + 1 || (closed && i == 0 && j == nseg - 1) {
                    continue;
                }
                let Some((s, _)) = segment_intersection(points[i], points[i + 1], points[j], points[j + 1]) else {
                    continue;
                };
                if (s == 0.0 || s == 1.0) && lengths[i] == 0.0 {
                    continue;
                }
                let z = points[i].lerp(points[i + 1], s);
                // a pair shares several cells; report it from the cell holding
                // the crossing only
                if hash.cell_of(z) != *key {
                    continue;
                }
                out.push((i, j, z));
            }
        }
    }
    out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    out
}

/// Point reached from parameter `t` of segment `seg` by walking signed
/// arclength `dist` along the polyline, clamped at its ends.
pub fn point_along(points: &[PhasePoint], seg: usize, t: f64, dist: f64) -> PhasePoint {
    let start = points[seg].lerp(points[seg + 1], t);
    let mut left = dist.abs();
    let mut cur = start;
    if dist >= 0.0 {
        for k in seg + 1..points.len() {
            let l = cur.dist(points[k]);
            if l >= left {
                return cur.lerp(points[k], left / l);
            }
            left -= l;
            cur = points[k];
        }
    } else {
        for k in (0..=seg).rev() {
            let l = cur.dist(points[k]);
            if l >= left {
                return cur.lerp(points[k], left / l);
            }
            left -= l;
            cur = points[k];
        }
    }
    cur
}

/// Vertex index range covering arclength `dist` on both sides of segment `seg`.
fn arclength_window(points: &[PhasePoint], seg: usize, dist: f64) -> (usize, usize) {
    let mut lo = seg;
    let mut acc = 0.0;
    while lo > 0 && acc < dist {
        acc += points[lo].dist(points[lo - 1]);
        lo -= 1;
    }
    let mut hi = seg + 1;
    acc = 0.0;
    while hi + 1 < points.len() && acc < dist {
        acc += points[hi].dist(points[hi + 1]);
        hi += 1;
    }
    (lo, hi)
}

/// Self-intersections whose strands separate like a crossing at angle of at
/// least `min_angle_deg`: points one `window` of arclength away along the
/// second strand, on both sides, must lie at least `window·sin(angle)/2`
/// from the first strand. Nearly coincident strands, such as successive
/// laps converging onto an invariant curve, produce chord crossings that
/// fail this test.
pub fn transversal_self_intersections(
    points: &[PhasePoint],
    window: f64,
    min_angle_deg: f64,
) -> Vec<(usize, usize, PhasePoint)> {
    let need = 0.5 * window * min_angle_deg.to_radians().sin();
    polyline_self_intersections(points)
        .into_iter()
        .filter(|&(i, j, _)| {
            let Some((_, t)) = segment_intersection(points[i], points[i + 1], points[j], points[j + 1]) else {
                return false;
            };
            let (lo, hi) = arclength_window(points, i, 2.0 * window);
            let strand = &points[lo..=hi];
            [window, -window].iter().all(|&d| {
                let q = point_along(points, j, t, d);
                distance_to_polyline(q, strand) >= need
            })
        })
        .collect()
}

/// Minimum distance from `p` to any segment of `curve`.
pub fn distance_to_polyline(p: PhasePoint, curve: &[PhasePoint]) -> f64 {
    match curve.len() {
        0 => f64::INFINITY,
        1 => p.dist(curve[0]),
        _ => curve
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]).0)
            .fold(f64::INFINITY, f64::min),
    }
}

/// Symmetric Hausdorff distance between two polylines, measured from
/// vertices to segments.
pub fn hausdorff_distance(a: &[PhasePoint], b: &[PhasePoint]) -> f64 {
    let ab = a.iter().map(|&p| distance_to_polyline(p, b)).fold(0.0, f64::max);
    let ba = b.iter().map(|&p| distance_to_polyline(p, a)).fold(0.0, f64::max);
    ab.max(ba)
}

/// Angle in radians between two undirected lines, in [0, π/2].
pub fn line_angle(u: PhasePoint, v: PhasePoint) -> f64 {
    let c = (u.dot(v) / (u.norm() * v.norm())).abs().min(1.0);
    c.acos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_identity_and_rotation() {
        let e = Jacobian2::IDENTITY.eigenvalues();
        assert_eq!(e[0], Complex64::new(1.0, 0.0));
        assert_eq!(e[1], Complex64::new(1.0, 0.0));
        let r = Jacobian2::new(0.0, -1.0, 1.0, 0.0).eigenvalues();
        assert!((r[0] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert!((r[1] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn crossing_segments() {
        let hit = segment_intersection(
            PhasePoint::new(0.0, 0.0),
            PhasePoint::new(1.0, 1.0),
            PhasePoint::new(0.0, 1.0),
            PhasePoint::new(1.0, 0.0),
        );
        let (s, t) = hit.unwrap();
        assert!((s - 0.5).abs() < 1e-15 && (t - 0.5).abs() < 1e-15);
        assert!(segment_intersection(
            PhasePoint::new(0.0, 0.0),
            PhasePoint::new(1.0, 0.0),
            PhasePoint::new(0.0, 1.0),
            PhasePoint::new(1.0, 1.0),
        )
        .is_none());
    }

    #[test]
    fn figure_eight_has_one_self_intersection() {
        let pts: Vec<PhasePoint> = (0..=400)
            .map(|k| {
                // open arc whose only crossing falls inside a segment
                let t = -0.5 + k as f64 / 400.0 * (std::f64::consts::TAU - 0.2);
                PhasePoint::new(t.sin(), (2.0 * t).sin() / 2.0)
            })
            .collect();
        let hits = polyline_self_intersections(&pts);
        assert_eq!(hits.len(), 1, "{hits:?}");
        assert!(hits[0].2.norm() < 1e-3);
    }

    #[test]
    fn winding_of_square() {
        let sq = [
            PhasePoint::new(0.0, 0.0),
            PhasePoint::new(1.0, 0.0),
            PhasePoint::new(1.0, 1.0),
            PhasePoint::new(0.0, 1.0),
        ];
        assert_eq!(winding_number(&sq, PhasePoint::new(0.5, 0.5)), 1);
        assert_eq!(winding_number(&sq, PhasePoint::new(1.5, 0.5)), 0);
    }
}
