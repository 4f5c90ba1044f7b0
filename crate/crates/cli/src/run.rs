//! Scenario execution: one function per command, all returning a JSON
//! result plus the artifacts requested in `outputs`.

use std::ops::ControlFlow;
use std::time::Instant;

use hornatlas::basins::{basin_grid, invariant_circle, BasinAttractor, CellLabel};
use hornatlas::continuation::{fixed_point_orbit, locate_in_tau, trace_curve, BifCurve, BifKind};
use hornatlas::critical::{critical_image, j0, ImageRefine};
use hornatlas::global::{
    bracket_connection, bracket_crossing_region, chaos_bounds_report, ic_tangent_to_j0, ChaosBoundsSpec, ConnectionBracket,
    FateTargets,
};
use hornatlas::manifold::{find_cusp_tau, grow_unstable_with, j0_events, self_intersections, CUSP_ANGLE_DEG};
use hornatlas::orbit::{detect_period, iterate_orbit, lyapunov, rotation_number};
use hornatlas::periodic::{find_sink_and_saddle, refine_periodic, track_orbit, PeriodicOrbit, Stability};
use hornatlas::{EulerLorenz, MapModel, ParamPoint, PhasePoint, Rect};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::emit::{
    branch_rows, curve_rows, emit_curve_csv, emit_portrait_svg, polyline_rows, CsvRow, Glyph, PortraitSpec, RunLog, SvgLayer,
};
use crate::error::CliError;
use crate::scenario::*;

const MAP: EulerLorenz = EulerLorenz;

/// Outcome of one run, ready to print.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub json: Value,
    pub exit_code: i32,
}

#[derive(Default)]
struct Products {
    rows: Option<Vec<CsvRow>>,
    portrait: Option<PortraitSpec>,
}

/// What a command can produce, checked against `outputs` before running.
struct Produces {
    csv: bool,
    svg: bool,
}

trait Analysis: Validate + Serialize + DeserializeOwned {
    const PRODUCES: Produces;
    fn outputs(&self) -> &Outputs;
    fn run(&self, log: &mut RunLog) -> Result<(Value, Products), CliError>;
}

/// Validate and, unless `dry_run`, execute a scenario whose `command` key
/// has already been removed.
pub fn execute(command: Command, scenario: Value, dry_run: bool) -> Summary {
    let t0 = Instant::now();
    let mut params = scenario.clone();
    let r = match command {
        Command::Portrait => go::<PortraitScenario>(scenario, dry_run, &mut params),
        Command::Orbit => go::<OrbitScenario>(scenario, dry_run, &mut params),
        Command::Lyap => go::<LyapScenario>(scenario, dry_run, &mut params),
        Command::Rotnum => go::<RotnumScenario>(scenario, dry_run, &mut params),
        Command::Periodic => go::<PeriodicScenario>(scenario, dry_run, &mut params),
        Command::TraceCurve => go::<TraceCurveScenario>(scenario, dry_run, &mut params),
        Command::Locate => go::<LocateScenario>(scenario, dry_run, &mut params),
        Command::Manifold => go::<ManifoldScenario>(scenario, dry_run, &mut params),
        Command::CuspFind => go::<CuspFindScenario>(scenario, dry_run, &mut params),
        Command::Connection => go::<ConnectionScenario>(scenario, dry_run, &mut params),
        Command::IcTangency => go::<IcTangencyScenario>(scenario, dry_run, &mut params),
        Command::Basin => go::<BasinScenario>(scenario, dry_run, &mut params),
        Command::ReportBounds => go::<ReportBoundsScenario>(scenario, dry_run, &mut params),
    };
    let wall = t0.elapsed().as_secs_f64();
    match r {
        Ok(result) => Summary {
            json: json!({
                "command": command.name(),
                "status": if dry_run { "validated" } else { "ok" },
                "parameters": params,
                "wall_time_s": wall,
                "result": result,
            }),
            exit_code: 0,
        },
        Err(e) => failure(Some(command), params, wall, &e),
    }
}

pub fn failure(command: Option<Command>, params: Value, wall: f64, e: &CliError) -> Summary {
    Summary {
        json: json!({
            "command": command.map(Command::name),
            "status": "error",
            "reason": e.reason(),
            "message": e.to_string(),
            "parameters": params,
            "wall_time_s": wall,
        }),
        exit_code: e.exit_code(),
    }
}

fn go<S: Analysis>(scenario: Value, dry_run: bool, params: &mut Value) -> Result<Value, CliError> {
    let s: S = decode(scenario)?;
    // report the scenario with its defaults filled in
    *params = serde_json::to_value(&s).map_err(|e| CliError::Io(e.to_string()))?;
    s.validate()?;
    let out = s.outputs();
    if out.csv.is_some() && !S::PRODUCES.csv {
        return Err(CliError::Validation("this command writes no CSV".into()));
    }
    if out.svg.is_some() && !S::PRODUCES.svg {
        return Err(CliError::Validation("this command writes no SVG".into()));
    }
    if dry_run {
        return Ok(Value::Null);
    }
    let mut log = RunLog::open(out.log.as_deref())?;
    log.event(json!({"event": "start", "parameters": params}));
    let r = s.run(&mut log);
    match &r {
        Ok((result, _)) => log.event(json!({"event": "result", "result": result})),
        Err(e) => log.event(json!({"event": "error", "reason": e.reason(), "message": e.to_string()})),
    }
    log.finish()?;
    let (result, products) = r?;
    if let Some(path) = &out.csv {
        let rows = products.rows.ok_or_else(|| CliError::Validation("no CSV rows produced".into()))?;
        emit_curve_csv(&rows, path)?;
    }
    if let Some(path) = &out.svg {
        let spec = products.portrait.ok_or_else(|| CliError::Validation("no portrait produced".into()))?;
        emit_portrait_svg(&spec, path)?;
    }
    Ok(result)
}

fn pp(a: f64, tau: f64) -> ParamPoint {
    ParamPoint::new(a, tau)
}

fn xy(z: PhasePoint) -> [f64; 2] {
    [z.x, z.y]
}

/// Default orbit start: the fixed point shifted by 0.01 in `x`.
fn near_fixed(p: ParamPoint) -> PhasePoint {
    MAP.fixed_point(p) + PhasePoint::new(0.01, 0.0)
}

fn glyph_for(s: Stability) -> Glyph {
    match s {
        Stability::Saddle => Glyph::Cross,
        Stability::AttractingNode | Stability::AttractingFocus => Glyph::Dot,
        _ => Glyph::Ring,
    }
}

fn orbit_json(o: &PeriodicOrbit) -> Value {
    json!({
        "q": o.q,
        "tau": o.params.tau,
        "point": xy(o.point()),
        "stability": o.stability,
        "multipliers": [[o.eig[0].re, o.eig[0].im], [o.eig[1].re, o.eig[1].im]],
        "residual": o.residual,
    })
}

/// A starting orbit as described by `seed`, at `seed.tau` or `tau`.
fn resolve_seed(seed: &OrbitSeed, a: f64, tau: f64, q: usize) -> Result<PeriodicOrbit, CliError> {
    let p = pp(a, seed.tau.unwrap_or(tau));
    let q = seed.q.unwrap_or(q);
    Ok(match seed.role {
        Role::Fixed => fixed_point_orbit(&MAP, p)?,
        Role::Sink => find_sink_and_saddle(&MAP, p, q, &seed.budget)?.0,
        Role::Saddle => find_sink_and_saddle(&MAP, p, q, &seed.budget)?.1,
        Role::Newton => {
            let g = seed.guess.map(point).ok_or_else(|| CliError::Validation("newton seed needs `guess`".into()))?;
            refine_periodic(&MAP, p, q, g, &Default::default())?
        }
    })
}

fn pair(seed: &PairSeed, a: f64) -> Result<(PeriodicOrbit, PeriodicOrbit), CliError> {
    Ok(find_sink_and_saddle(&MAP, pp(a, seed.tau), seed.q, &seed.budget)?)
}

/// Carry an orbit to `tau` unless it is already there.
fn carried(o: PeriodicOrbit, tau: f64) -> Result<PeriodicOrbit, CliError> {
    if o.params.tau == tau {
        Ok(o)
    } else {
        Ok(track_orbit(&MAP, &o, tau)?)
    }
}

fn pad(r: Rect, frac: f64) -> Rect {
    let dx = (r.width() * frac).max(1e-3);
    let dy = (r.height() * frac).max(1e-3);
    Rect::new(r.x_min - dx, r.x_max + dx, r.y_min - dy, r.y_max + dy)
}

fn color(c: &Option<String>, fallback: &str) -> String {
    c.clone().unwrap_or_else(|| fallback.to_string())
}

fn j0_layer(p: ParamPoint, v: Rect, c: &Option<String>) -> Result<SvgLayer, CliError> {
    let mut l = SvgLayer::new("j0", &color(c, "#d62728"));
    l.polylines.push(j0(p, (v.x_min, v.x_max), 400)?.polyline);
    Ok(l)
}

fn pair_layer(name: &str, c: &str, orbits: &[&PeriodicOrbit]) -> SvgLayer {
    let mut l = SvgLayer::new(name, c);
    for o in orbits {
        l.markers.extend(o.points.iter().map(|&z| (z, glyph_for(o.stability))));
    }
    l
}

fn layer_json(kind: &str, l: &SvgLayer, extra: Value) -> Value {
    let closed = l.polylines.iter().any(|pl| pl.len() > 2 && pl.first() == pl.last());
    let mut v = json!({
        "kind": kind,
        "polylines": l.polylines.len(),
        "vertices": l.polylines.iter().map(Vec::len).sum::<usize>(),
        "markers": l.markers.len(),
        "closed": closed,
    });
    if let (Some(o), Value::Object(e)) = (v.as_object_mut(), extra) {
        o.extend(e);
    }
    v
}

impl Analysis for PortraitScenario {
    const PRODUCES: Produces = Produces { csv: false, svg: true };

    fn outputs(&self) -> &Outputs {
        &self.outputs
    }

    fn run(&self, log: &mut RunLog) -> Result<(Value, Products), CliError> {
        let p = pp(self.a, self.tau);
        let layers = self.layers.clone().unwrap_or_else(|| {
            vec![
                LayerSpec::Orbit { start: None, transient: 10_000, keep: 5_000, color: None },
                LayerSpec::FixedPoint { color: None },
                LayerSpec::J0 { color: None },
            ]
        });
        // data layers first: they define the default viewport
        let mut built: Vec<Option<(SvgLayer, Value)>> = Vec::with_capacity(layers.len());
        for spec in &layers {
            let layer = match spec {
                LayerSpec::Orbit { start, transient, keep, color: c } => {
                    let z0 = start.map(point).unwrap_or_else(|| near_fixed(p));
                    let orbit = iterate_orbit(&MAP, p, z0, *transient, *keep)?;
                    let mut l = SvgLayer::new("orbit", &color(c, "#1f77b4"));
                    l.dot_radius = 0.8;
                    l.markers = orbit.points.iter().map(|&z| (z, Glyph::Dot)).collect();
                    let period = detect_period(&orbit, 500.min(orbit.len() / 3), hornatlas::orbit::DEFAULT_PERIOD_EPS);
                    let rotation = rotation_number(&orbit, MAP.fixed_point(p)).ok();
                    let info = json!({"period": period, "rotation": rotation});
                    Some((l, info))
                }
                LayerSpec::InvariantCircle { sample, color: c } => {
                    let mut ring = invariant_circle(&MAP, p, sample)?;
                    ring.push(ring[0]);
                    let mut l = SvgLayer::new("invariant_circle", &color(c, "#2ca02c"));
                    l.polylines.push(ring);
                    Some((l, json!({})))
                }
                LayerSpec::FixedPoint { color: c } => {
                    let fp = fixed_point_orbit(&MAP, p)?;
                    Some((pair_layer("fixed_point", &color(c, "#000000"), &[&fp]), json!({"stability": fp.stability})))
                }
                LayerSpec::Periodic { q, budget, color: c } => {
                    let (sink, saddle) = find_sink_and_saddle(&MAP, p, *q, budget)?;
                    let l = pair_layer("periodic", &color(c, "#9467bd"), &[&sink, &saddle]);
                    Some((l, json!({"sink": sink.stability, "saddle": saddle.stability})))
                }
                LayerSpec::Points { points, glyph, color: c } => {
                    let mut l = SvgLayer::new("points", &color(c, "#000000"));
                    l.markers = points.iter().map(|&z| (point(z), *glyph)).collect();
                    Some((l, json!({})))
                }
                LayerSpec::Polyline { points, color: c } => {
                    let mut l = SvgLayer::new("polyline", &color(c, "#7f7f7f"));
                    l.polylines.push(points.iter().map(|&z| point(z)).collect());
                    Some((l, json!({})))
                }
                LayerSpec::J0 { .. } | LayerSpec::CriticalImage { .. } => None,
            };
            built.push(layer);
        }
        let viewport = match self.viewport {
            Some(v) => v,
            None => {
                let pts: Vec<PhasePoint> = built
                    .iter()
                    .flatten()
                    .flat_map(|(l, _)| l.polylines.iter().flatten().copied().chain(l.markers.iter().map(|m| m.0)))
                    .filter(|z| z.is_finite())
                    .collect();
                Rect::bounding(&pts).map(|r| pad(r, 0.1)).ok_or_else(|| CliError::Validation("portrait has no data to frame".into()))?
            }
        };
        let mut out = Vec::with_capacity(layers.len());
        let mut info = Vec::with_capacity(layers.len());
        for (spec, layer) in layers.iter().zip(built) {
            let (l, extra) = match (spec, layer) {
                (_, Some(done)) => done,
                (LayerSpec::J0 { color: c }, None) => (j0_layer(p, viewport, c)?, json!({})),
                (LayerSpec::CriticalImage { rank, color: c }, None) => {
                    let curve = critical_image(p, (viewport.x_min, viewport.x_max), *rank, &ImageRefine::default())?;
                    let mut l = SvgLayer::new(&format!("critical_image_{rank}"), &color(c, "#ff7f0e"));
                    l.polylines.push(curve.polyline);
                    (l, json!({"rank": rank}))
                }
                _ => unreachable!("data layers are built above"),
            };
            let v = layer_json(spec.name(), &l, extra);
            log.event(json!({"event": "layer", "layer": v}));
            info.push(v);
            out.push(l);
        }
        let spec = PortraitSpec { viewport, width: self.width, layers: out };
        spec.validate()?;
        let result = json!({"viewport": viewport_json(&viewport), "layers": info});
        Ok((result, Products { rows: None, portrait: Some(spec) }))
    }
}

fn viewport_json(v: &Rect) -> Value {
    json!({"x_min": v.x_min, "x_max": v.x_max, "y_min": v.y_min, "y_max": v.y_max})
}

impl Analysis for OrbitScenario {
    const PRODUCES: Produces = Produces { csv: true, svg: true };

    fn outputs(&self) -> &Outputs {
        &self.outputs
    }

    fn run(&self, _log: &mut RunLog) -> Result<(Value, Products), CliError> {
        let p = pp(self.a, self.tau);
        let z0 = self.start.map(point).unwrap_or_else(|| near_fixed(p));
        let orbit = iterate_orbit(&MAP, p, z0, self.transient, self.keep)?;
        let period = detect_period(&orbit, self.q_max, self.eps);
        let rotation = rotation_number(&orbit, MAP.fixed_point(p)).ok();
        let last = orbit.last().unwrap_or(z0);
        let mut products = Products::default();
        if self.outputs.csv.is_some() {
            let mut rows = polyline_rows("orbit", None, p, &orbit.points);
            for (k, r) in rows.iter_mut().enumerate() {
                r.aux1 = Some((self.transient + k) as f64);
            }
            products.rows = Some(rows);
        }
        if self.outputs.svg.is_some() {
            let mut l = SvgLayer::new("orbit", "#1f77b4");
            l.dot_radius = 0.8;
            l.markers = orbit.points.iter().map(|&z| (z, Glyph::Dot)).collect();
            let fp = fixed_point_orbit(&MAP, p)?;
            let viewport = Rect::bounding(&orbit.points).map(|r| pad(r, 0.1)).unwrap_or(Rect::new(0.0, 1.0, 0.0, 1.0));
            let f = pair_layer("fixed_point", "#000000", &[&fp]);
            products.portrait = Some(PortraitSpec { viewport, width: 800, layers: vec![l, f] });
        }
        let result = json!({"last": xy(last), "points": orbit.len(), "period": period, "rotation": rotation});
        Ok((result, products))
    }
}

impl Analysis for LyapScenario {
    const PRODUCES: Produces = Produces { csv: false, svg: false };

    fn outputs(&self) -> &Outputs {
        &self.outputs
    }

    fn run(&self, _log: &mut RunLog) -> Result<(Value, Products), CliError> {
        let p = pp(self.a, self.tau);
        let z0 = self.start.map(point).unwrap_or_else(|| near_fixed(p));
        let s = lyapunov(&MAP, p, z0, self.transient, self.iterations)?;
        // the exponent sum is the mean log-area stretch along the same orbit
        let mut z = MAP.iterate(p, z0, self.transient)?;
        let mut sum = 0.0;
        for _ in 0..self.iterations {
            sum += MAP.det_jacobian(p, z).abs().ln();
            z = MAP.apply(p, z);
        }
        let mean_log_det = sum / self.iterations as f64;
        let result = json!({
            "l1": s.l1,
            "l2": s.l2,
            "sum": s.l1 + s.l2,
            "mean_log_abs_det": mean_log_det,
            "iterations": s.iterations,
        });
        Ok((result, Products::default()))
    }
}

impl Analysis for RotnumScenario {
    const PRODUCES: Produces = Produces { csv: false, svg: false };

    fn outputs(&self) -> &Outputs {
        &self.outputs
    }

    fn run(&self, _log: &mut RunLog) -> Result<(Value, Products), CliError> {
        let p = pp(self.a, self.tau);
        let z0 = self.start.map(point).unwrap_or_else(|| near_fixed(p));
        let center = self.center.map(point).unwrap_or_else(|| MAP.fixed_point(p));
        let orbit = iterate_orbit(&MAP, p, z0, self.transient, self.keep)?;
        let rho = rotation_number(&orbit, center)?;
        Ok((json!({"rotation": rho, "center": xy(center), "points": orbit.len()}), Products::default()))
    }
}

impl Analysis for PeriodicScenario {
    const PRODUCES: Produces = Produces { csv: true, svg: true };

    fn outputs(&self) -> &Outputs {
        &self.outputs
    }

    fn run(&self, _log: &mut RunLog) -> Result<(Value, Products), CliError> {
        let p = pp(self.a, self.tau);
        let orbits = match self.guess {
            Some(g) => vec![("orbit", refine_periodic(&MAP, p, self.q, point(g), &self.newton)?)],
            None => {
                let (sink, saddle) = find_sink_and_saddle(&MAP, p, self.q, &self.budget)?;
                vec![("sink", sink), ("saddle", saddle)]
            }
        };
        let mut products = Products::default();
        if self.outputs.csv.is_some() {
            let mut rows = Vec::new();
            for (name, o) in &orbits {
                for &z in &o.points {
                    rows.push(CsvRow {
                        kind: name.to_string(),
                        q: Some(o.q),
                        params: p,
                        point: z,
                        aux1: Some(o.eig[0].norm()),
                        aux2: Some(o.eig[1].norm()),
                    });
                }
            }
            products.rows = Some(rows);
        }
        if self.outputs.svg.is_some() {
            let refs: Vec<&PeriodicOrbit> = orbits.iter().map(|(_, o)| o).collect();
            let all: Vec<PhasePoint> = refs.iter().flat_map(|o| o.points.iter().copied()).collect();
            let viewport = pad(Rect::bounding(&all).unwrap_or(Rect::new(0.0, 1.0, 0.0, 1.0)), 0.1);
            let marks = pair_layer("periodic", "#9467bd", &refs);
            let j = j0_layer(p, viewport, &None)?;
            products.portrait = Some(PortraitSpec { viewport, width: 800, layers: vec![marks, j] });
        }
        let result: serde_json::Map<String, Value> = orbits.iter().map(|(n, o)| (n.to_string(), orbit_json(o))).collect();
        Ok((Value::Object(result), products))
    }
}

fn curve_json(c: &BifCurve) -> Value {
    let (mut a_lo, mut a_hi, mut t_lo, mut t_hi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    let mut max_res: f64 = 0.0;
    let mut max_g: f64 = 0.0;
    for s in &c.samples {
        a_lo = a_lo.min(s.params.a);
        a_hi = a_hi.max(s.params.a);
        t_lo = t_lo.min(s.params.tau);
        t_hi = t_hi.max(s.params.tau);
        max_res = max_res.max(s.residual);
        max_g = max_g.max(s.g.abs());
    }
    json!({
        "direction": c.direction,
        "samples": c.samples.len(),
        "stop": c.stop,
        "a_range": [a_lo, a_hi],
        "tau_range": [t_lo, t_hi],
        "max_residual": max_res,
        "max_abs_g": max_g,
    })
}

impl Analysis for TraceCurveScenario {
    const PRODUCES: Produces = Produces { csv: true, svg: false };

    fn outputs(&self) -> &Outputs {
        &self.outputs
    }

    fn run(&self, log: &mut RunLog) -> Result<(Value, Products), CliError> {
        let kind = bif_kind(self.kind, self.q)?;
        let tau = match (self.tau, kind) {
            (Some(t), _) => t,
            (None, BifKind::HopfFixed) => 1.0 / (2.0 * self.a),
            (None, _) => self
                .bracket
                .map(|b| b.0)
                .ok_or_else(|| CliError::Validation("`tau` or `bracket` is required".into()))?,
        };
        let seed = match &self.seed {
            Some(s) => resolve_seed(s, self.a, tau, kind.period())?,
            None => fixed_point_orbit(&MAP, pp(self.a, tau))?,
        };
        let start = match self.bracket {
            Some(b) => {
                let loc = locate_in_tau(&MAP, kind, b, &seed, &self.locate)?;
                log.event(json!({"event": "located", "tau": loc.tau, "g": loc.g}));
                (loc.orbit.params, loc.orbit.point())
            }
            None => (seed.params, seed.point()),
        };
        let dirs: &[i8] = match self.direction {
            Direction::Forward => &[1],
            Direction::Backward => &[-1],
            Direction::Both => &[-1, 1],
        };
        let mut curves = Vec::new();
        for &d in dirs {
            let c = trace_curve(&MAP, kind, start, self.steps, d, &self.control)?;
            for s in &c.samples {
                log.event(json!({"event": "sample", "direction": d, "a": s.params.a, "tau": s.params.tau, "g": s.g, "residual": s.residual}));
            }
            curves.push(c);
        }
        let mut rows = Vec::new();
        for (i, c) in curves.iter().enumerate() {
            let mut r = curve_rows(c);
            if i == 0 && curves.len() == 2 {
                // backward half reversed, so the file runs along the curve
                r.reverse();
            } else if i == 1 {
                r.remove(0);
            }
            rows.extend(r);
        }
        let result = json!({
            "kind": kind,
            "start": {"a": start.0.a, "tau": start.0.tau, "point": xy(start.1)},
            "rows": rows.len(),
            "curves": curves.iter().map(curve_json).collect::<Vec<_>>(),
        });
        Ok((result, Products { rows: Some(rows), portrait: None }))
    }
}

impl Analysis for LocateScenario {
    const PRODUCES: Produces = Produces { csv: true, svg: false };

    fn outputs(&self) -> &Outputs {
        &self.outputs
    }

    fn run(&self, _log: &mut RunLog) -> Result<(Value, Products), CliError> {
        let kind = bif_kind(self.kind, self.q)?;
        let seed = match &self.seed {
            Some(s) => resolve_seed(s, self.a, self.bracket.0, kind.period())?,
            None => fixed_point_orbit(&MAP, pp(self.a, self.bracket.0))?,
        };
        let loc = locate_in_tau(&MAP, kind, self.bracket, &seed, &self.control)?;
        let rows = vec![CsvRow {
            kind: crate::emit::kind_tag(kind).into(),
            q: Some(kind.period()),
            params: loc.orbit.params,
            point: loc.orbit.point(),
            aux1: Some(loc.g),
            aux2: Some(loc.orbit.residual),
        }];
        let result = json!({
            "kind": kind,
            "tau": loc.tau,
            "bracket": [loc.bracket.0, loc.bracket.1],
            "g": loc.g,
            "orbit": orbit_json(&loc.orbit),
        });
        Ok((result, Products { rows: Some(rows), portrait: None }))
    }
}

impl Analysis for ManifoldScenario {
    const PRODUCES: Produces = Produces { csv: true, svg: true };

    fn outputs(&self) -> &Outputs {
        &self.outputs
    }

    fn run(&self, log: &mut RunLog) -> Result<(Value, Products), CliError> {
        let (_, saddle) = pair(&self.seed, self.a)?;
        let saddle = carried(saddle, self.tau)?;
        let base = if self.point == 0 { saddle.clone() } else { saddle.rebased(&MAP, self.point) };
        let mut branch = grow_unstable_with(&MAP, &base, self.side, &self.control, |b, start| {
            log.event(json!({"event": "level", "first_vertex": start, "vertices": b.polyline.len(), "arclength": b.arclength}));
            ControlFlow::Continue(())
        })?;
        branch.events.j0 = j0_events(&MAP, &branch);
        branch.events.cusps =
            (0..branch.events.j0.len()).filter(|&i| branch.events.j0[i].psi_deg.abs() < CUSP_ANGLE_DEG).collect();
        branch.events.self_intersections = self_intersections(&MAP, &branch);
        let min_psi = branch.events.j0.iter().map(|e| e.psi_deg.abs()).fold(f64::INFINITY, f64::min);
        let mut products = Products::default();
        if self.outputs.csv.is_some() {
            products.rows = Some(branch_rows(&branch));
        }
        if self.outputs.svg.is_some() {
            let p = saddle.params;
            let viewport = pad(Rect::bounding(&branch.polyline).unwrap_or(Rect::new(0.0, 1.0, 0.0, 1.0)), 0.1);
            let mut b = SvgLayer::new("branch", "#1f77b4");
            b.polylines.push(branch.polyline.clone());
            let mut loops = SvgLayer::new("self_intersections", "#8c564b");
            loops.markers = branch.events.self_intersections.iter().map(|&z| (z, Glyph::Ring)).collect();
            let layers = vec![b, pair_layer("saddle", "#000000", &[&saddle]), loops, j0_layer(p, viewport, &None)?];
            products.portrait = Some(PortraitSpec { viewport, width: 800, layers });
        }
        let result = json!({
            "tau": saddle.params.tau,
            "point": self.point,
            "side": branch.side,
            "stop": branch.stop,
            "vertices": branch.polyline.len(),
            "arclength": branch.arclength,
            "j0_crossings": branch.events.j0.len(),
            "cusps": branch.events.cusps.len(),
            "min_abs_psi_deg": if min_psi.is_finite() { Some(min_psi) } else { None },
            "self_intersections": branch.events.self_intersections.len(),
            "end": branch.polyline.last().map(|&z| xy(z)),
        });
        Ok((result, products))
    }
}

impl Analysis for CuspFindScenario {
    const PRODUCES: Produces = Produces { csv: true, svg: false };

    fn outputs(&self) -> &Outputs {
        &self.outputs
    }

    fn run(&self, log: &mut RunLog) -> Result<(Value, Products), CliError> {
        let (_, saddle) = pair(&self.seed, self.a)?;
        let saddle = carried(saddle, self.bracket.0)?;
        let r = find_cusp_tau(&MAP, &saddle, self.bracket, &self.control)?;
        for s in &r.sweep {
            log.event(json!({"event": "sweep", "tau": s.tau, "psi_deg": s.crossing.crossing.psi_deg, "point": xy(s.crossing.crossing.point)}));
        }
        let rows = r
            .sweep
            .iter()
            .map(|s| CsvRow {
                kind: "crossing".into(),
                q: Some(saddle.q),
                params: pp(self.a, s.tau),
                point: s.crossing.crossing.point,
                aux1: Some(s.crossing.crossing.psi_deg),
                aux2: Some(s.crossing.orbit_index as f64),
            })
            .collect();
        let c = &r.crossing;
        let result = json!({
            "tau_cusp": r.tau_cusp,
            "bracket": [r.bracket.0, r.bracket.1],
            "psi_deg": c.crossing.psi_deg,
            "orbit_index": c.orbit_index,
            "side": c.side,
            "point": xy(c.crossing.point),
            "sweep_samples": r.sweep.len(),
        });
        Ok((result, Products { rows: Some(rows), portrait: None }))
    }
}

fn bracket_json(b: &ConnectionBracket) -> Value {
    json!({
        "lo": {"tau": b.lo.tau, "fate": b.lo.fate},
        "hi": {"tau": b.hi.tau, "fate": b.hi.fate},
        "mid": 0.5 * (b.lo.tau + b.hi.tau),
        "width": b.width(),
    })
}

impl Analysis for ConnectionScenario {
    const PRODUCES: Produces = Produces { csv: false, svg: false };

    fn outputs(&self) -> &Outputs {
        &self.outputs
    }

    fn run(&self, log: &mut RunLog) -> Result<(Value, Products), CliError> {
        let (sink, saddle) = pair(&self.seed, self.a)?;
        let targets = FateTargets { saddle, sinks: vec![sink] };
        let result = if self.region {
            let r = bracket_crossing_region(&MAP, &targets, self.branch, self.bracket, self.tol, &self.control)?;
            log.event(json!({"event": "entry", "bracket": bracket_json(&r.entry)}));
            log.event(json!({"event": "exit", "bracket": bracket_json(&r.exit)}));
            json!({"entry": bracket_json(&r.entry), "exit": bracket_json(&r.exit)})
        } else {
            let b = bracket_connection(&MAP, &targets, self.branch, self.bracket, self.tol, &self.control)?;
            json!({"flip": bracket_json(&b)})
        };
        Ok((result, Products::default()))
    }
}

impl Analysis for IcTangencyScenario {
    const PRODUCES: Produces = Produces { csv: false, svg: false };

    fn outputs(&self) -> &Outputs {
        &self.outputs
    }

    fn run(&self, _log: &mut RunLog) -> Result<(Value, Products), CliError> {
        let (lo, hi) = ic_tangent_to_j0(&MAP, self.a, self.bracket, &self.control)?;
        Ok((json!({"tau": 0.5 * (lo + hi), "bracket": [lo, hi]}), Products::default()))
    }
}

fn label_code(l: CellLabel) -> f64 {
    match l {
        CellLabel::Attractor(k) => k as f64,
        CellLabel::Diverged => -1.0,
        CellLabel::Undecided => -2.0,
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"];

impl Analysis for BasinScenario {
    const PRODUCES: Produces = Produces { csv: true, svg: true };

    fn outputs(&self) -> &Outputs {
        &self.outputs
    }

    fn run(&self, log: &mut RunLog) -> Result<(Value, Products), CliError> {
        let p = pp(self.a, self.tau);
        let mut attractors = Vec::with_capacity(self.attractors.len());
        for spec in &self.attractors {
            let a = match spec {
                AttractorSpec::FixedPoint => BasinAttractor::Cycle { points: vec![MAP.fixed_point(p)] },
                AttractorSpec::Sink { q, budget } => {
                    let (sink, _) = find_sink_and_saddle(&MAP, p, *q, budget)?;
                    BasinAttractor::Cycle { points: sink.points }
                }
                AttractorSpec::Circle { start, transient, keep } => {
                    let z0 = start.map(point).unwrap_or_else(|| PhasePoint::new(p.a.abs().sqrt() + 0.02, p.a));
                    BasinAttractor::Circle { points: iterate_orbit(&MAP, p, z0, *transient, *keep)?.points }
                }
                AttractorSpec::Cycle { points } => BasinAttractor::Cycle { points: points.iter().map(|&z| point(z)).collect() },
            };
            attractors.push(a);
        }
        let g = basin_grid(&MAP, p, self.bbox, self.nx, self.ny, &attractors, &self.control)?;
        let mut labels: Vec<CellLabel> = (0..attractors.len()).map(CellLabel::Attractor).collect();
        labels.extend([CellLabel::Diverged, CellLabel::Undecided]);
        let counts: Vec<Value> = labels
            .iter()
            .map(|&l| {
                let v = json!({"label": l, "cells": g.count(l), "components": g.components(l)});
                log.event(json!({"event": "label", "summary": v}));
                v
            })
            .collect();
        let mut products = Products::default();
        if self.outputs.csv.is_some() {
            let rows = (0..g.ny)
                .flat_map(|j| (0..g.nx).map(move |i| (i, j)))
                .map(|(i, j)| CsvRow {
                    kind: "cell".into(),
                    q: None,
                    params: p,
                    point: g.cell_center(i, j),
                    aux1: Some(label_code(g.label(i, j))),
                    aux2: None,
                })
                .collect();
            products.rows = Some(rows);
        }
        if self.outputs.svg.is_some() {
            let width = 800u32;
            let radius = 0.5 * width as f64 / self.nx as f64;
            let layers = labels
                .iter()
                .enumerate()
                .map(|(k, &l)| {
                    let c = match l {
                        CellLabel::Attractor(i) => PALETTE[i % PALETTE.len()],
                        CellLabel::Diverged => "#ffffff",
                        CellLabel::Undecided => "#7f7f7f",
                    };
                    let mut layer = SvgLayer::new(&format!("label_{k}"), c);
                    layer.dot_radius = radius;
                    layer.markers = (0..g.labels.len())
                        .filter(|&c| g.labels[c] == l)
                        .map(|c| (g.cell_center(c % g.nx, c / g.nx), Glyph::Dot))
                        .collect();
                    layer
                })
                .collect();
            products.portrait = Some(PortraitSpec { viewport: self.bbox, width, layers });
        }
        Ok((json!({"nx": g.nx, "ny": g.ny, "labels": counts}), products))
    }
}

impl Analysis for ReportBoundsScenario {
    const PRODUCES: Produces = Produces { csv: false, svg: false };

    fn outputs(&self) -> &Outputs {
        &self.outputs
    }

    fn run(&self, log: &mut RunLog) -> Result<(Value, Products), CliError> {
        let (sink, saddle) = pair(&self.seed, self.a)?;
        let spec = ChaosBoundsSpec {
            targets: FateTargets { saddle, sinks: vec![sink] },
            first_branch: self.first_branch,
            first_bracket: self.first_bracket,
            cusp_bracket: self.cusp_bracket,
            second_branch: self.second_branch,
            second_bracket: self.second_bracket,
            tol: self.tol,
        };
        let r = chaos_bounds_report(&MAP, &spec, &self.fate, &self.tracking)?;
        let result = json!({
            "tau_cd_bound": r.tau_cd_bound,
            "tau_cusp": r.tau_cusp,
            "tau_chaos_bound": r.tau_chaos_bound,
            "ordered": r.tau_cd_bound < r.tau_cusp && r.tau_cusp < r.tau_chaos_bound,
            "first": {"entry": bracket_json(&r.first.entry), "exit": bracket_json(&r.first.exit)},
            "second": {"entry": bracket_json(&r.second.entry), "exit": bracket_json(&r.second.exit)},
        });
        log.event(json!({"event": "bounds", "result": result}));
        Ok((result, Products::default()))
    }
}
