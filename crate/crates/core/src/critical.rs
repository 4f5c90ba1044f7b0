//! Critical curves: the singular locus J₀ of the map derivative, its images
//! J₁, J₂, …, null directions on J₀, and tangency diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{canonical_sign, line_angle, point_segment_distance, Rect};
use crate::map::{EulerLorenz, MapModel, ParamPoint, PhasePoint};

/// A critical curve of rank `rank` (0 = J₀, k = k-th image).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalCurve {
    pub rank: usize,
    pub params: ParamPoint,
    pub polyline: Vec<PhasePoint>,
}

/// y-coordinate of J₀ over `x` for the Euler–Lorenz family.
pub fn j0_y(p: ParamPoint, x: f64) -> f64 {
    (1.0 + p.a * p.tau) / p.tau + 2.0 * p.tau * x * x / (1.0 - p.tau)
}

/// Closed-form J₀ of the Euler–Lorenz family sampled at `n` evenly spaced
/// abscissae of `x_range`.
pub fn j0(p: ParamPoint, x_range: (f64, f64), n: usize) -> Result<CriticalCurve> {
    p.require_invertible_slice()?;
    if n < 2 || !(x_range.1 > x_range.0) {
        return Err(Error::InvalidInput("j0 needs n >= 2 and a nonempty x range".into()));
    }
    let polyline = (0..n)
        .map(|k| {
            let x = x_range.0 + (x_range.1 - x_range.0) * k as f64 / (n - 1) as f64;
            PhasePoint::new(x, j0_y(p, x))
        })
        .collect();
    Ok(CriticalCurve { rank: 0, params: p, polyline })
}

/// Zero-level contours of a scalar field on a box by marching squares.
///
/// Crossing points are linearly interpolated on cell edges; the saddle-cell
/// ambiguity is resolved by the cell-center average. Segments are stitched
/// into maximal polylines, deterministically in cell order.
pub fn j0_generic<F>(field: F, bounds: Rect, nx: usize, ny: usize) -> Vec<Vec<PhasePoint>>
where
    F: Fn(PhasePoint) -> f64 + Sync,
{
    use rayon::prelude::*;
    if nx == 0 || ny == 0 || !bounds.is_valid() {
        return Vec::new();
    }
    let dx = bounds.width() / nx as f64;
    let dy = bounds.height() / ny as f64;
    let node = |i: usize, j: usize| PhasePoint::new(bounds.x_min + i as f64 * dx, bounds.y_min + j as f64 * dy);
    let values: Vec<f64> = (0..(nx + 1) * (ny + 1))
        .into_par_iter()
        .map(|k| field(node(k % (nx + 1), k / (nx + 1))))
        .collect();
    let val = |i: usize, j: usize| values[j * (nx + 1) + i];

    // Edge keys identify shared crossing points between neighbouring cells:
    // horizontal edge (i,j)-(i+1,j) -> (0,i,j); vertical (i,j)-(i,j+1) -> (1,i,j).
    type EdgeKey = (u8, usize, usize);
    let crossing = |k: EdgeKey| -> PhasePoint {
        let (a, b, pa, pb) = match k.0 {
            0 => (val(k.1, k.2), val(k.1 + 1, k.2), node(k.1, k.2), node(k.1 + 1, k.2)),
            _ => (val(k.1, k.2), val(k.1, k.2 + 1), node(k.1, k.2), node(k.1, k.2 + 1)),
        };
        let t = if a == b { 0.5 } else { a / (a - b) };
        pa.lerp(pb, t.clamp(0.0, 1.0))
    };

    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let v = [val(i, j), val(i + 1, j), val(i + 1, j + 1), val(i, j + 1)];
            let idx = (v[0] > 0.0) as u8 | ((v[1] > 0.0) as u8) << 1 | ((v[2] > 0.0) as u8) << 2 | ((v[3] > 0.0) as u8) << 3;
            let bottom = (0, i, j);
            let right = (1, i + 1, j);
            let top = (0, i, j + 1);
            let left = (1, i, j);
            let center_pos = v.iter().sum::<f64>() > 0.0;
            let segs: &[(EdgeKey, EdgeKey)] = match idx {
                0 | 15 => &[],
                1 | 14 => &[(left, bottom)],
                2 | 13 => &[(bottom, right)],
                3 | 12 => &[(left, right)],
                4 | 11 => &[(right, top)],
                6 | 9 => &[(bottom, top)],
                7 | 8 => &[(left, top)],
                5 => {
                    if center_pos {
                        &[(left, top), (bottom, right)]
                    } else {
                        &[(left, bottom), (right, top)]
                    }
                }
                10 => {
                    if center_pos {
                        &[(left, bottom), (right, top)]
                    } else {
                        &[(left, top), (bottom, right)]
                    }
                }
                _ => unreachable!(),
            };
            segments.extend_from_slice(segs);
        }
    }

    // stitch
    let mut adj: std::collections::HashMap<EdgeKey, Vec<usize>> = std::collections::HashMap::new();
    for (s, (a, b)) in segments.iter().enumerate() {
        adj.entry(*a).or_default().push(s);
        adj.entry(*b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut out = Vec::new();
    // keys reached by following unused segments away from `from`
    let walk = |from: EdgeKey, used: &mut Vec<bool>| -> Vec<EdgeKey> {
        let mut keys = Vec::new();
        let mut cur = from;
        while let Some(&seg) = adj[&cur].iter().find(|&&s| !used[s]) {
            used[seg] = true;
            let (a, b) = segments[seg];
            cur = if a == cur { b } else { a };
            keys.push(cur);
        }
        keys
    };
    for s in 0..segments.len() {
        if used[s] {
            continue;
        }
        used[s] = true;
        let (a, b) = segments[s];
        let forward = walk(b, &mut used);
        let mut keys: Vec<EdgeKey> = walk(a, &mut used);
        keys.reverse();
        keys.push(a);
        keys.push(b);
        keys.extend(forward);
        out.push(keys.into_iter().map(crossing).collect());
    }
    out
}

/// Unit kernel vector of the map derivative at a point of J₀.
pub fn null_direction<M: MapModel + ?Sized>(map: &M, p: ParamPoint, z: PhasePoint) -> Result<PhasePoint> {
    let det = map.det_jacobian(p, z);
    if det.abs() >= 1e-8 {
        return Err(Error::NotOnCriticalCurve { det });
    }
    let j = map.jacobian(p, z);
    Ok(kernel_direction(&j))
}

pub(crate) fn kernel_direction(j: &crate::map::Jacobian2) -> PhasePoint {
    let r1 = PhasePoint::new(j.j11, j.j12);
    let r2 = PhasePoint::new(j.j21, j.j22);
    let row = if r1.norm() >= r2.norm() { r1 } else { r2 };
    if row.norm() == 0.0 {
        return PhasePoint::new(1.0, 0.0);
    }
    canonical_sign(PhasePoint::new(-row.y, row.x).normalized())
}

/// Control for adaptive curve images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImageRefine {
    pub max_spacing: f64,
    pub max_turn_deg: f64,
    pub min_param_step: f64,
    pub max_points: usize,
}

impl Default for ImageRefine {
    fn default() -> Self {
        ImageRefine { max_spacing: 2e-3, max_turn_deg: 5.0, min_param_step: 1e-14, max_points: 2_000_000 }
    }
}

/// Sample `f` over `[s0, s1]` adaptively so consecutive output points are
/// within `max_spacing` and turn by at most `max_turn_deg`.
pub fn adaptive_curve<F>(f: F, s0: f64, s1: f64, initial: usize, ctrl: &ImageRefine) -> Result<(Vec<f64>, Vec<PhasePoint>)>
where
    F: Fn(f64) -> Result<PhasePoint>,
{
    let n = initial.max(2);
    let mut params: Vec<f64> = (0..n).map(|k| s0 + (s1 - s0) * k as f64 / (n - 1) as f64).collect();
    let mut pts: Vec<PhasePoint> = params.iter().map(|&s| f(s)).collect::<Result<_>>()?;
    refine_in_place(&f, &mut params, &mut pts, ctrl)?;
    Ok((params, pts))
}

/// Insert parameter midpoints until spacing and turning criteria hold.
/// Returns `true` when some interval hit the minimal parameter step.
pub(crate) fn refine_in_place<F>(f: &F, params: &mut Vec<f64>, pts: &mut Vec<PhasePoint>, ctrl: &ImageRefine) -> Result<bool>
where
    F: Fn(f64) -> Result<PhasePoint>,
{
    let max_turn = ctrl.max_turn_deg.to_radians();
    let mut underflow = false;
    let mut i = 0;
    while i + 1 < params.len() {
        if params.len() >= ctrl.max_points {
            break;
        }
        let seg = pts[i + 1] - pts[i];
        let mut need = seg.norm() > ctrl.max_spacing;
        if !need && i > 0 {
            let prev = pts[i] - pts[i - 1];
            if prev.norm() > 0.0 && seg.norm() > 0.0 {
                let c = (prev.dot(seg) / (prev.norm() * seg.norm())).clamp(-1.0, 1.0);
                need = c.acos() > max_turn;
            }
        }
        if need && params[i + 1] - params[i] > ctrl.min_param_step {
            let sm = 0.5 * (params[i] + params[i + 1]);
            let zm = f(sm)?;
            params.insert(i + 1, sm);
            pts.insert(i + 1, zm);
            // the new vertex may break the angle criterion at i
            i = i.saturating_sub(1);
            continue;
        }
        if need {
            underflow = true;
        }
        i += 1;
    }
    Ok(underflow)
}

/// Rank-k image of J₀ over `x_range`, adaptively refined in the J₀
/// abscissa.
pub fn critical_image(p: ParamPoint, x_range: (f64, f64), rank: usize, ctrl: &ImageRefine) -> Result<CriticalCurve> {
    p.require_invertible_slice()?;
    let map = EulerLorenz;
    let f = |x: f64| map.iterate(p, PhasePoint::new(x, j0_y(p, x)), rank);
    let (_, polyline) = adaptive_curve(f, x_range.0, x_range.1, 64, ctrl)?;
    Ok(CriticalCurve { rank, params: p, polyline })
}

/// A local approach of a curve to a critical curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Approach {
    pub point: PhasePoint,
    pub distance: f64,
    /// Angle in degrees between local tangents.
    pub angle_deg: f64,
}

/// Distance below which an approach is reported.
pub const TANGENCY_DISTANCE: f64 = 1e-4;
/// Angle below which a reported approach counts as a tangency.
pub const TANGENCY_ANGLE_DEG: f64 = 2.0;

/// Local minima of point-to-curve distance from `curve` to `target` that
/// come within [`TANGENCY_DISTANCE`], each with the angle between local
/// tangents. Transversal crossings also appear (distance ~0, large angle);
/// callers filter on the angle.
pub fn approaches(curve: &[PhasePoint], target: &[PhasePoint]) -> Vec<Approach> {
    use crate::geometry::SegmentHash;
    if curve.len() < 2 || target.len() < 2 {
        return Vec::new();
    }
    let cell = TANGENCY_DISTANCE.max(crate::geometry::polyline_length(target) / target.len() as f64 * 4.0);
    let hash = SegmentHash::build(target, cell);
    let mut cand = Vec::new();
    let n = curve.len();
    // nearest target segment for every vertex of `curve`
    let mut best: Vec<(f64, usize)> = vec![(f64::INFINITY, usize::MAX); n];
    for (k, &z) in curve.iter().enumerate() {
        let r = PhasePoint::new(TANGENCY_DISTANCE, TANGENCY_DISTANCE);
        hash.candidates(z - r, z + r, &mut cand);
        for &s in &cand {
            let (d, _) = point_segment_distance(z, target[s], target[s + 1]);
            if d < best[k].0 {
                best[k] = (d, s);
            }
        }
    }
    let mut out = Vec::new();
    let mut k = 0;
    while k < n {
        if best[k].0 >= TANGENCY_DISTANCE {
            k += 1;
            continue;
        }
        // run of close vertices; report its minimum
        let start = k;
        while k < n && best[k].0 < TANGENCY_DISTANCE {
            k += 1;
        }
        let (m, _) = (start..k).map(|i| (i, best[i].0)).fold((start, f64::INFINITY), |acc, (i, d)| if d < acc.1 { (i, d) } else { acc });
        let (d, s) = best[m];
        let tc = if m + 1 < n { curve[m + 1] - curve[m] } else { curve[m] - curve[m - 1] };
        let tt = target[s + 1] - target[s];
        out.push(Approach { point: curve[m], distance: d, angle_deg: line_angle(tc, tt).to_degrees() });
    }
    out
}

/// Tangencies of `curve` with a critical curve: approaches within
/// [`TANGENCY_DISTANCE`] whose tangent angle is below [`TANGENCY_ANGLE_DEG`].
pub fn tangency_gap(curve: &[PhasePoint], critical: &CriticalCurve) -> Vec<Approach> {
    approaches(curve, &critical.polyline).into_iter().filter(|a| a.angle_deg < TANGENCY_ANGLE_DEG).collect()
}

/// Sign changes of the Jacobian determinant along a polyline, each located
/// on the segment by bisection on the determinant.
pub fn det_sign_crossings<M: MapModel + ?Sized>(map: &M, p: ParamPoint, curve: &[PhasePoint]) -> Vec<(usize, PhasePoint)> {
    let mut out = Vec::new();
    for (i, w) in curve.windows(2).enumerate() {
        let d0 = map.det_jacobian(p, w[0]);
        let d1 = map.det_jacobian(p, w[1]);
        if d0 == 0.0 || d0.signum() == d1.signum() {
            continue;
        }
        out.push((i, locate_on_segment(map, p, w[0], w[1], d0)));
    }
    out
}

pub(crate) fn locate_on_segment<M: MapModel + ?Sized>(map: &M, p: ParamPoint, a: PhasePoint, b: PhasePoint, da: f64) -> PhasePoint {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let sa = da.signum();
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let dm = map.det_jacobian(p, a.lerp(b, mid));
        if dm == 0.0 {
            return a.lerp(b, mid);
        }
        if dm.signum() == sa {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-17 {
            break;
        }
    }
    a.lerp(b, 0.5 * (lo + hi))
}
