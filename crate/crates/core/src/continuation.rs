//! Codimension-1 bifurcation curves of periodic orbits in the (a, τ) plane,
//! traced by pseudo-arclength continuation, and their location along
//! one-parameter slices.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{Jacobian2, MapModel, ParamPoint, PhasePoint};
use crate::periodic::{eigen2, refine_periodic, NewtonControl, PeriodicOrbit};

/// A codimension-1 condition on the monodromy `M` of a period-q orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BifKind {
    /// det(M − I) = 0.
    SaddleNode(usize),
    /// det M = 1 with |tr M| < 2.
    NeimarkSacker(usize),
    /// det M = 0.
    EigenvalueZero(usize),
    /// tr² M − 4 det M = 0.
    EqualEigenvalue(usize),
    /// Neimark–Sacker of the fixed point.
    HopfFixed,
}

/// |tr M| at or above `2 − NS_GUARD_MARGIN` violates the Neimark–Sacker guard.
pub const NS_GUARD_MARGIN: f64 = 1e-8;

impl BifKind {
    pub fn period(self) -> usize {
        match self {
            BifKind::SaddleNode(q)
            | BifKind::NeimarkSacker(q)
            | BifKind::EigenvalueZero(q)
            | BifKind::EqualEigenvalue(q) => q,
            BifKind::HopfFixed => 1,
        }
    }

    /// The defining scalar g(M).
    pub fn test_value(self, m: &Jacobian2) -> f64 {
        match self {
            BifKind::SaddleNode(_) => m.det() - m.trace() + 1.0,
            BifKind::NeimarkSacker(_) | BifKind::HopfFixed => m.det() - 1.0,
            BifKind::EigenvalueZero(_) => m.det(),
            BifKind::EqualEigenvalue(_) => m.discriminant(),
        }
    }

    /// Whether the side condition of the kind holds at `m`.
    pub fn guard_ok(self, m: &Jacobian2) -> bool {
        match self {
            BifKind::NeimarkSacker(_) | BifKind::HopfFixed => m.trace().abs() < 2.0 - NS_GUARD_MARGIN,
            _ => true,
        }
    }

    /// Whether the kind is a fold of the orbit family, where the family ends
    /// instead of passing through with a sign change of g.
    pub fn is_fold(self) -> bool {
        matches!(self, BifKind::SaddleNode(_))
    }

    pub fn validate(self) -> Result<()> {
        if self.period() == 0 {
            return Err(Error::InvalidInput("bifurcation period must be at least 1".into()));
        }
        Ok(())
    }
}

/// One point of a bifurcation curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub params: ParamPoint,
    pub point: PhasePoint,
    #[serde(with = "crate::periodic::complex_pair")]
    pub eig: [Complex64; 2],
    /// |L^q(z) − z|.
    pub residual: f64,
    /// Value of the defining scalar.
    pub g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveStop {
    StepBudget,
    DomainBoundary,
    CorrectorFailure,
    GuardViolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifCurve {
    pub kind: BifKind,
    /// Sign of the initial tangent, oriented so that +1 increases `a`
    /// (or `τ` when the curve starts vertical).
    pub direction: i8,
    pub samples: Vec<CurveSample>,
    pub stop: CurveStop,
}

/// Axis-aligned box in parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamBox {
    pub a: (f64, f64),
    pub tau: (f64, f64),
}

impl ParamBox {
    pub fn contains(&self, p: ParamPoint) -> bool {
        p.a >= self.a.0 && p.a <= self.a.1 && p.tau >= self.tau.0 && p.tau <= self.tau.1
    }
}

impl Default for ParamBox {
    fn default() -> Self {
        ParamBox { a: (0.0, 1.0), tau: (0.0, 2.5) }
    }
}

/// Pseudo-arclength step control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepControl {
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_corrector_iter: usize,
    /// Corrector convergence on the max-norm of the residual.
    pub tol: f64,
    /// Relative central-difference step for derivatives of g.
    pub fd_step: f64,
    pub domain: ParamBox,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            h_init: 1e-3,
            h_min: 1e-10,
            h_max: 2e-2,
            max_corrector_iter: 8,
            tol: 1e-11,
            fd_step: 1e-6,
            domain: ParamBox::default(),
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        let ok = self.h_min > 0.0
            && self.h_init >= self.h_min
            && self.h_max >= self.h_init
            && self.max_corrector_iter > 0
            && self.tol > 0.0
            && self.fd_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput("step control needs 0 < h_min <= h_init <= h_max and positive tolerances".into()))
        }
    }
}

/// Unknowns (x, y, a, τ).
type U4 = [f64; 4];

fn unpack(u: &U4) -> (PhasePoint, ParamPoint) {
    (PhasePoint::new(u[0], u[1]), ParamPoint::new(u[2], u[3]))
}

/// `L^q(z)`, its phase Jacobian, and its derivatives in a and τ.
fn flow_derivatives<M: MapModel + ?Sized>(
    map: &M,
    p: ParamPoint,
    z0: PhasePoint,
    q: usize,
) -> Result<(PhasePoint, Jacobian2, PhasePoint, PhasePoint)> {
    let mut z = z0;
    let mut m = Jacobian2::IDENTITY;
    let (mut da, mut dt) = (PhasePoint::ORIGIN, PhasePoint::ORIGIN);
    for step in 1..=q {
        let j = map.jacobian(p, z);
        let (pa, pt) = map.param_derivatives(p, z);
        da = j.apply(da) + pa;
        dt = j.apply(dt) + pt;
        m = j.mul(&m);
        z = map.apply(p, z);
        if crate::map::diverged(z) {
            return Err(Error::Diverged { step });
        }
    }
    Ok((z, m, da, dt))
}

fn test_at<M: MapModel + ?Sized>(map: &M, kind: BifKind, u: &U4) -> Result<f64> {
    let (z, p) = unpack(u);
    let (_, m) = map.iterate_with_jacobian(p, z, kind.period())?;
    Ok(kind.test_value(&m))
}

/// Residual F(u) = (L^q(z) − z, g) and its 3×4 Jacobian.
fn system<M: MapModel + ?Sized>(map: &M, kind: BifKind, u: &U4, fd_step: f64) -> Result<([f64; 3], [[f64; 4]; 3], Jacobian2)> {
    let (z, p) = unpack(u);
    let (w, m, da, dt) = flow_derivatives(map, p, z, kind.period())?;
    let f = [w.x - z.x, w.y - z.y, kind.test_value(&m)];
    let mut jac = [
        [m.j11 - 1.0, m.j12, da.x, dt.x],
        [m.j21, m.j22 - 1.0, da.y, dt.y],
        [0.0; 4],
    ];
    for i in 0..4 {
        let h = fd_step * u[i].abs().max(1.0);
        let (mut up, mut dn) = (*u, *u);
        up[i] += h;
        dn[i] -= h;
        jac[2][i] = (test_at(map, kind, &up)? - test_at(map, kind, &dn)?) / (2.0 * h);
    }
    Ok((f, jac, m))
}

fn max_abs<const N: usize>(v: &[f64; N]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Solve a square system by Gaussian elimination with partial pivoting.
fn solve<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    for col in 0..N {
        let piv = (col..N).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col] == 0.0 || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..N {
            let f = a[r][col] / a[col][col];
            for c in col..N {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for r in (0..N).rev() {
        let s: f64 = (r + 1..N).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Unit null vector of a full-rank 3×4 matrix by signed 3×3 minors.
fn null_vector(a: &[[f64; 4]; 3]) -> Option<U4> {
    let mut t = [0.0; 4];
    for (i, ti) in t.iter_mut().enumerate() {
        let mut m = [[0.0; 3]; 3];
        for r in 0..3 {
            let mut c2 = 0;
            for c in 0..4 {
                if c != i {
                    m[r][c2] = a[r][c];
                    c2 += 1;
                }
            }
        }
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        *ti = sign * det3(m);
    }
    let n = t.iter().map(|x| x * x).sum::<f64>().sqrt();
    (n > 0.0 && n.is_finite()).then(|| t.map(|x| x / n))
}

fn dot4(u: &U4, v: &U4) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Minimum-norm Gauss–Newton onto the solution curve from a nearby point.
fn correct_onto_curve<M: MapModel + ?Sized>(map: &M, kind: BifKind, mut u: U4, ctrl: &StepControl) -> Result<U4> {
    let mut last = f64::INFINITY;
    for it in 0..4 * ctrl.max_corrector_iter {
        let (f, a, _) = system(map, kind, &u, ctrl.fd_step)?;
        last = max_abs(&f);
        if last < ctrl.tol {
            return Ok(u);
        }
        // Δu = −Aᵀ (A Aᵀ)⁻¹ f
        let mut aat = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                aat[i][j] = dot4(&a[i], &a[j]);
            }
        }
        let y = solve(aat, f).ok_or(Error::NoConvergence { iterations: it + 1, residual: last })?;
        for c in 0..4 {
            u[c] -= (0..3).map(|r| a[r][c] * y[r]).sum::<f64>();
        }
    }
    Err(Error::NoConvergence { iterations: 4 * ctrl.max_corrector_iter, residual: last })
}

fn sample<M: MapModel + ?Sized>(map: &M, kind: BifKind, u: &U4) -> Result<CurveSample> {
    let (z, p) = unpack(u);
    let (w, m) = map.iterate_with_jacobian(p, z, kind.period())?;
    Ok(CurveSample { params: p, point: z, eig: eigen2(&m), residual: w.dist(z), g: kind.test_value(&m) })
}

/// Trace one direction of a bifurcation curve from an approximate start.
///
/// `direction` selects the tangent sign: +1 initially increases `a` (or `τ`
/// if the tangent has no `a` component).
pub fn trace_curve<M: MapModel + ?Sized>(
    map: &M,
    kind: BifKind,
    start: (ParamPoint, PhasePoint),
    steps: usize,
    direction: i8,
    ctrl: &StepControl,
) -> Result<BifCurve> {
    kind.validate()?;
    ctrl.validate()?;
    if direction != 1 && direction != -1 {
        return Err(Error::InvalidInput("direction must be +1 or -1".into()));
    }
    let (p0, z0) = start;
    let mut u = correct_onto_curve(map, kind, [z0.x, z0.y, p0.a, p0.tau], ctrl)?;
    let (_, a0, m0) = system(map, kind, &u, ctrl.fd_step)?;
    if !kind.guard_ok(&m0) {
        return Err(Error::InvalidInput("start point violates the Neimark–Sacker guard".into()));
    }
    let mut t = null_vector(&a0).ok_or(Error::InvalidInput("singular curve system at start".into()))?;
    let lead = if t[2].abs() > 1e-12 { t[2] } else { t[3] };
    if lead * f64::from(direction) < 0.0 {
        t = t.map(|x| -x);
    }
    let mut samples = vec![sample(map, kind, &u)?];
    let mut h = ctrl.h_init;
    let mut prev: Option<U4> = None;
    let mut stop = CurveStop::StepBudget;
    'outer: for _ in 0..steps {
        loop {
            // secant predictor once two points exist
            let dir = match prev {
                Some(pv) => {
                    let d: U4 = std::array::from_fn(|i| u[i] - pv[i]);
                    let n = dot4(&d, &d).sqrt();
                    if n > 0.0 { d.map(|x| x / n) } else { t }
                }
                None => t,
            };
            let pred: U4 = std::array::from_fn(|i| u[i] + h * dir[i]);
            match corrector(map, kind, pred, &dir, ctrl) {
                Some((un, iters, m)) => {
                    let (_, p) = unpack(&un);
                    if !ctrl.domain.contains(p) {
                        stop = CurveStop::DomainBoundary;
                        break 'outer;
                    }
                    if !kind.guard_ok(&m) {
                        stop = CurveStop::GuardViolation;
                        break 'outer;
                    }
                    prev = Some(u);
                    u = un;
                    samples.push(sample(map, kind, &u)?);
                    if iters <= 3 {
                        h = (2.0 * h).min(ctrl.h_max);
                    }
                    break;
                }
                None => {
                    h *= 0.5;
                    if h < ctrl.h_min {
                        stop = CurveStop::CorrectorFailure;
                        break 'outer;
                    }
                }
            }
        }
    }
    Ok(BifCurve { kind, direction, samples, stop })
}

/// Both directions of a curve from one start, traced concurrently.
pub fn trace_both<M: MapModel + ?Sized>(
    map: &M,
    kind: BifKind,
    start: (ParamPoint, PhasePoint),
    steps: usize,
    ctrl: &StepControl,
) -> Result<[BifCurve; 2]> {
    let (fwd, bwd) = rayon::join(
        || trace_curve(map, kind, start, steps, 1, ctrl),
        || trace_curve(map, kind, start, steps, -1, ctrl),
    );
    Ok([fwd?, bwd?])
}

/// Newton on F(u) = 0, dir·(u − pred) = 0. Returns the point, the iteration
/// count and the monodromy there.
fn corrector<M: MapModel + ?Sized>(map: &M, kind: BifKind, pred: U4, dir: &U4, ctrl: &StepControl) -> Option<(U4, usize, Jacobian2)> {
    let mut u = pred;
    for it in 1..=ctrl.max_corrector_iter {
        let (f, a, _) = system(map, kind, &u, ctrl.fd_step).ok()?;
        let arc: f64 = (0..4).map(|i| dir[i] * (u[i] - pred[i])).sum();
        let mat = [a[0], a[1], a[2], *dir];
        let du = solve(mat, [-f[0], -f[1], -f[2], -arc])?;
        for i in 0..4 {
            u[i] += du[i];
        }
        let (fn_, _, m) = system(map, kind, &u, ctrl.fd_step).ok()?;
        if max_abs(&fn_) < ctrl.tol && max_abs(&du) < 1e-6 {
            return Some((u, it, m));
        }
    }
    None
}

/// A located codimension-1 point on a one-parameter slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Located {
    pub kind: BifKind,
    pub tau: f64,
    pub orbit: PeriodicOrbit,
    pub g: f64,
    /// Final τ bracket; degenerate for folds, which are solved directly.
    pub bracket: (f64, f64),
}

/// Control for [`locate_in_tau`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocateControl {
    /// Initial continuation step in τ.
    pub tau_step: f64,
    /// Steps are halved on failure down to this.
    pub min_step: f64,
    pub bracket_tol: f64,
    pub g_tol: f64,
    pub fd_step: f64,
}

impl Default for LocateControl {
    fn default() -> Self {
        LocateControl { tau_step: 1e-4, min_step: 1e-9, bracket_tol: 1e-9, g_tol: 1e-10, fd_step: 1e-6 }
    }
}

/// Continue a periodic orbit in τ at fixed `a` toward `target`, returning
/// every accepted member in order. Stops early when the family is lost.
pub fn follow_family<M: MapModel + ?Sized>(
    map: &M,
    seed: &PeriodicOrbit,
    target: f64,
    ctrl: &LocateControl,
) -> Vec<PeriodicOrbit> {
    let newton = NewtonControl::default();
    let mut out = vec![seed.clone()];
    let sgn = (target - seed.params.tau).signum();
    let mut h = ctrl.tau_step;
    let mut last_move: Option<(f64, f64)> = None;
    loop {
        let cur = out.last().unwrap_or(seed);
        let remaining = (target - cur.params.tau).abs();
        if remaining == 0.0 || sgn == 0.0 {
            break;
        }
        let step = h.min(remaining);
        let tau = if step == remaining { target } else { cur.params.tau + sgn * step };
        let p = ParamPoint::new(cur.params.a, tau);
        let accepted = refine_periodic(map, p, cur.q, cur.point(), &newton).ok().filter(|o| {
            let d = o.point().dist(cur.point());
            // a jump much larger than the trend means Newton switched family
            match last_move {
                Some((dz, dt)) => d <= 4.0 * dz * step / dt + 1e-7,
                None => d <= 1e-2,
            }
        });
        match accepted {
            Some(o) => {
                last_move = Some((o.point().dist(cur.point()).max(1e-12), step));
                out.push(o);
                h = (2.0 * h).min(ctrl.tau_step);
            }
            None => {
                h *= 0.5;
                if h < ctrl.min_step {
                    break;
                }
            }
        }
    }
    out
}

/// Newton in (x, y, τ) at fixed `a` on (L^q(z) − z, g) = 0.
fn solve_at_fixed_a<M: MapModel + ?Sized>(map: &M, kind: BifKind, z: PhasePoint, p: ParamPoint, ctrl: &LocateControl) -> Result<U4> {
    let mut u: U4 = [z.x, z.y, p.a, p.tau];
    let mut res = f64::INFINITY;
    for it in 1..=40 {
        let (f, a, _) = system(map, kind, &u, ctrl.fd_step)?;
        res = max_abs(&f);
        let mat = [[a[0][0], a[0][1], a[0][3]], [a[1][0], a[1][1], a[1][3]], [a[2][0], a[2][1], a[2][3]]];
        let d = solve(mat, [-f[0], -f[1], -f[2]]).ok_or(Error::NoConvergence { iterations: it, residual: res })?;
        u[0] += d[0];
        u[1] += d[1];
        u[3] += d[2];
        if max_abs(&d) < 1e-14 * u[3].abs().max(1.0) {
            break;
        }
    }
    let (f, _, _) = system(map, kind, &u, ctrl.fd_step)?;
    res = res.min(max_abs(&f));
    if max_abs(&f) < ctrl.g_tol.max(1e-10) {
        Ok(u)
    } else {
        Err(Error::NoConvergence { iterations: 40, residual: res })
    }
}

fn orbit_at<M: MapModel + ?Sized>(map: &M, q: usize, u: &U4) -> Result<PeriodicOrbit> {
    let (z, p) = unpack(u);
    PeriodicOrbit::from_point(map, p, q, z)
}

/// Locate a codimension-1 point of kind `kind` on the slice `a = seed.a`
/// inside `bracket`, along the orbit family through `seed`.
///
/// The family is continued across the bracket (or as far as it exists).
/// Folds are solved directly from the member with the smallest |g|; other
/// kinds are bracketed by a sign change of g with the guard satisfied,
/// bisected to `bracket_tol`, then polished by Newton in (z, τ).
pub fn locate_in_tau<M: MapModel + ?Sized>(
    map: &M,
    kind: BifKind,
    bracket: (f64, f64),
    seed: &PeriodicOrbit,
    ctrl: &LocateControl,
) -> Result<Located> {
    kind.validate()?;
    let (lo, hi) = bracket;
    if !(lo < hi) {
        return Err(Error::InvalidInput("bracket needs lo < hi".into()));
    }
    if seed.q != kind.period() {
        return Err(Error::InvalidInput(format!("seed orbit has period {}, kind needs {}", seed.q, kind.period())));
    }
    let a = seed.params.a;
    // reach the bracket, then sweep it upward
    let start = if seed.params.tau < lo || seed.params.tau > hi {
        let edge = if seed.params.tau < lo { lo } else { hi };
        let path = follow_family(map, seed, edge, ctrl);
        let last = path.last().cloned().unwrap_or_else(|| seed.clone());
        if last.params.tau != edge {
            return Err(Error::FamilyLost { tau: last.params.tau });
        }
        last
    } else {
        seed.clone()
    };
    let mut down = follow_family(map, &start, lo, ctrl);
    down.reverse();
    let up = follow_family(map, &start, hi, ctrl);
    let family: Vec<PeriodicOrbit> = down.into_iter().chain(up.into_iter().skip(1)).collect();
    let g_of = |o: &PeriodicOrbit| kind.test_value(&o.monodromy);

    if kind.is_fold() {
        let best = family
            .iter()
            .min_by(|x, y| g_of(x).abs().total_cmp(&g_of(y).abs()))
            .ok_or(Error::FamilyLost { tau: lo })?;
        let u = solve_at_fixed_a(map, kind, best.point(), best.params, ctrl)?;
        if !(u[3] >= lo && u[3] <= hi) {
            return Err(Error::NoSignChange { lo, hi });
        }
        let orbit = orbit_at(map, kind.period(), &u)?;
        return Ok(Located { kind, tau: u[3], g: g_of(&orbit), orbit, bracket: (u[3], u[3]) });
    }

    let pair = family.windows(2).find(|w| {
        let (g0, g1) = (g_of(&w[0]), g_of(&w[1]));
        g0.signum() != g1.signum() && kind.guard_ok(&w[0].monodromy) && kind.guard_ok(&w[1].monodromy)
    });
    let Some(w) = pair else {
        return match family.last() {
            Some(l) if l.params.tau < hi && family.len() > 1 => Err(Error::FamilyLost { tau: l.params.tau }),
            _ => Err(Error::NoSignChange { lo, hi }),
        };
    };
    let (mut left, mut right) = (w[0].clone(), w[1].clone());
    let s_left = g_of(&left).signum();
    let newton = NewtonControl::default();
    while right.params.tau - left.params.tau > ctrl.bracket_tol {
        let mid = 0.5 * (left.params.tau + right.params.tau);
        let o = refine_periodic(map, ParamPoint::new(a, mid), kind.period(), left.point(), &newton)
            .map_err(|_| Error::FamilyLost { tau: mid })?;
        if g_of(&o).signum() == s_left {
            left = o;
        } else {
            right = o;
        }
    }
    let br = (left.params.tau, right.params.tau);
    // polish; fall back to the bisection midpoint if Newton leaves the bracket
    let polished = solve_at_fixed_a(map, kind, left.point(), left.params, ctrl)
        .ok()
        .filter(|u| u[3] >= br.0 - ctrl.bracket_tol && u[3] <= br.1 + ctrl.bracket_tol);
    let orbit = match polished {
        Some(u) => orbit_at(map, kind.period(), &u)?,
        None => left,
    };
    Ok(Located { kind, tau: orbit.params.tau, g: g_of(&orbit), orbit, bracket: br })
}

/// The fixed point of the Euler–Lorenz family as a period-1 orbit.
pub fn fixed_point_orbit<M: MapModel + ?Sized>(map: &M, p: ParamPoint) -> Result<PeriodicOrbit> {
    PeriodicOrbit::from_point(map, p, 1, PhasePoint::new(p.a.abs().sqrt(), p.a))
}

/// τ on the fixed point's Neimark–Sacker curve at which the multiplier
/// argument is `2π·rotation`, and the matching `a = 1/(2τ)`.
///
/// On that curve the multipliers have real part `1 − τ/2`, so the root of
/// the rotation-`p/q` horn is at `cos(2π p/q) = 1 − τ/2`.
pub fn horn_root_on_hopf(num: usize, den: usize) -> Result<ParamPoint> {
    if den == 0 || num == 0 || 2 * num >= den {
        return Err(Error::InvalidInput(format!("rotation {num}/{den} outside (0, 1/2)")));
    }
    let r = num as f64 / den as f64;
    let tau = 2.0 * (1.0 - (std::f64::consts::TAU * r).cos());
    Ok(ParamPoint::new(1.0 / (2.0 * tau), tau))
}

/// Multiplier argument divided by 2π at the fixed point on the
/// Neimark–Sacker curve through `(a, 1/(2a))`.
pub fn hopf_rotation(a: f64) -> Result<f64> {
    let tau = 1.0 / (2.0 * a);
    let c = 1.0 - tau / 2.0;
    if !(c.abs() < 1.0) {
        return Err(Error::InvalidInput(format!("no complex multipliers on the Hopf curve at a = {a}")));
    }
    Ok(c.acos() / std::f64::consts::TAU)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::EulerLorenz;

    #[test]
    fn null_vector_is_orthogonal_to_rows() {
        let a = [[1.0, 2.0, 0.5, -1.0], [0.0, 1.0, 3.0, 2.0], [2.0, -1.0, 1.0, 0.0]];
        let t = null_vector(&a).unwrap();
        for r in &a {
            assert!(dot4(r, &t).abs() < 1e-14);
        }
        assert!((dot4(&t, &t) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_solve() {
        let x = solve([[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]], [3.0, 5.0, 5.0]).unwrap();
        for (v, e) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert!((v - e).abs() < 1e-14);
        }
        assert!(solve([[1.0, 2.0], [2.0, 4.0]], [1.0, 1.0]).is_none());
    }

    #[test]
    fn param_derivatives_match_differences() {
        let map = EulerLorenz;
        let p = ParamPoint::new(0.36, 1.7);
        let z = PhasePoint::new(0.4, 0.2);
        let (_, _, da, dt) = flow_derivatives(&map, p, z, 5).unwrap();
        let h = 1e-6;
        let f = |p: ParamPoint| map.iterate(p, z, 5).unwrap();
        let fa = (f(ParamPoint::new(p.a + h, p.tau)) - f(ParamPoint::new(p.a - h, p.tau))) * (0.5 / h);
        let ft = (f(ParamPoint::new(p.a, p.tau + h)) - f(ParamPoint::new(p.a, p.tau - h))) * (0.5 / h);
        assert!((da - fa).norm() < 1e-7 && (dt - ft).norm() < 1e-7);
    }

    #[test]
    fn horn_roots() {
        let r = horn_root_on_hopf(1, 6).unwrap();
        assert!((r.a - 0.5).abs() < 1e-14 && (r.tau - 1.0).abs() < 1e-14);
        let r = horn_root_on_hopf(1, 5).unwrap();
        assert!((r.tau - 1.381966).abs() < 1e-6 && (r.a - 0.361803).abs() < 1e-6);
        assert!(horn_root_on_hopf(1, 2).is_err());
        assert!(horn_root_on_hopf(3, 5).is_err());
        let rho = hopf_rotation(0.36).unwrap();
        assert!((rho - 0.20057).abs() < 1e-5);
        assert!(rho > 0.2 && rho < 8.0 / 37.0);
    }

    #[test]
    fn hopf_located_on_slice() {
        let map = EulerLorenz;
        let seed = fixed_point_orbit(&map, ParamPoint::new(0.36, 1.3)).unwrap();
        let r = locate_in_tau(&map, BifKind::HopfFixed, (1.3, 1.5), &seed, &LocateControl::default()).unwrap();
        assert!((r.tau - 1.0 / 0.72).abs() < 1e-9, "{}", r.tau);
    }
}
