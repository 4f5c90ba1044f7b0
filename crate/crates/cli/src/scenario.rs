//! Scenario files: one JSON object per run, with a `command` key naming the
//! analysis and strictly typed, command-specific keys. Unknown keys are
//! rejected.

use std::path::PathBuf;

use hornatlas::basins::{BasinControl, CircleSample};
use hornatlas::continuation::{BifKind, LocateControl, StepControl};
use hornatlas::global::{BranchSpec, FateControl, IcControl};
use hornatlas::manifold::{RefineControl, TrackingControl};
use hornatlas::periodic::{NewtonControl, SeedBudget};
use hornatlas::{PhasePoint, Rect};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::emit::Glyph;
use crate::error::CliError;

/// Every analysis the front end can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Portrait,
    Orbit,
    Lyap,
    Rotnum,
    Periodic,
    TraceCurve,
    Locate,
    Manifold,
    CuspFind,
    Connection,
    IcTangency,
    Basin,
    ReportBounds,
}

impl Command {
    pub const ALL: [Command; 13] = [
        Command::Portrait,
        Command::Orbit,
        Command::Lyap,
        Command::Rotnum,
        Command::Periodic,
        Command::TraceCurve,
        Command::Locate,
        Command::Manifold,
        Command::CuspFind,
        Command::Connection,
        Command::IcTangency,
        Command::Basin,
        Command::ReportBounds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Portrait => "portrait",
            Command::Orbit => "orbit",
            Command::Lyap => "lyap",
            Command::Rotnum => "rotnum",
            Command::Periodic => "periodic",
            Command::TraceCurve => "trace-curve",
            Command::Locate => "locate",
            Command::Manifold => "manifold",
            Command::CuspFind => "cusp-find",
            Command::Connection => "connection",
            Command::IcTangency => "ic-tangency",
            Command::Basin => "basin",
            Command::ReportBounds => "report-bounds",
        }
    }

    pub fn from_name(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Parse scenario text into a JSON object.
pub fn parse_scenario(text: &str) -> Result<Value, CliError> {
    let v: Value = serde_json::from_str(text).map_err(|e| CliError::Validation(format!("scenario is not valid JSON: {e}")))?;
    if !v.is_object() {
        return Err(CliError::Validation("scenario must be a JSON object".into()));
    }
    Ok(v)
}

/// Set `path` (dot-separated keys) to `value`, creating objects on the way.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Validation(format!("bad override key `{path}`")));
    }
    let mut cur = root;
    for k in &keys[..keys.len() - 1] {
        let obj = cur.as_object_mut().ok_or_else(|| CliError::Validation(format!("`{path}`: `{k}` is not inside an object")))?;
        cur = obj.entry(k.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    let obj = cur.as_object_mut().ok_or_else(|| CliError::Validation(format!("`{path}` does not point into an object")))?;
    obj.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Apply a `key.path=value` override. The value is read as JSON, falling
/// back to a plain string.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| CliError::Validation(format!("override `{spec}` is not KEY=VALUE")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    set_path(root, key.trim(), value)
}

/// Remove the `command` key, checking it against `expected` when both exist.
pub fn take_command(root: &mut Value, expected: Option<Command>) -> Result<Command, CliError> {
    let named = match root.as_object_mut().and_then(|o| o.remove("command")) {
        Some(Value::String(s)) => {
            Some(Command::from_name(&s).ok_or_else(|| CliError::Validation(format!("unknown command `{s}`")))?)
        }
        Some(other) => return Err(CliError::Validation(format!("`command` must be a string, got {other}"))),
        None => None,
    };
    match (named, expected) {
        (Some(n), Some(e)) if n != e => {
            Err(CliError::Validation(format!("scenario is for `{}`, not `{}`", n.name(), e.name())))
        }
        (Some(c), _) | (None, Some(c)) => Ok(c),
        (None, None) => Err(CliError::Validation("scenario has no `command` key".into())),
    }
}

pub fn decode<T: serde::de::DeserializeOwned>(v: Value) -> Result<T, CliError> {
    serde_json::from_value(v).map_err(|e| CliError::Validation(format!("scenario: {e}")))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub log: Option<PathBuf>,
}

/// Name of a codimension-1 condition; combined with `q` into a [`BifKind`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindName {
    SaddleNode,
    NeimarkSacker,
    EigenvalueZero,
    EqualEigenvalue,
    Hopf,
}

pub fn bif_kind(kind: KindName, q: Option<usize>) -> Result<BifKind, CliError> {
    let need = || q.filter(|&q| q >= 1).ok_or_else(|| CliError::Validation("`q` >= 1 is required for this kind".into()));
    Ok(match kind {
        KindName::SaddleNode => BifKind::SaddleNode(need()?),
        KindName::NeimarkSacker => BifKind::NeimarkSacker(need()?),
        KindName::EigenvalueZero => BifKind::EigenvalueZero(need()?),
        KindName::EqualEigenvalue => BifKind::EqualEigenvalue(need()?),
        KindName::Hopf => {
            if q.is_some_and(|q| q != 1) {
                return Err(CliError::Validation("the hopf kind is period 1".into()));
            }
            BifKind::HopfFixed
        }
    })
}

/// How a starting periodic orbit is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// The fixed point `(√a, a)`; period 1.
    Fixed,
    /// The attracting member of a locked pair, found by simulation.
    Sink,
    /// The saddle member of a locked pair.
    Saddle,
    /// Newton from `guess`.
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSeed {
    pub role: Role,
    /// Parameter at which the orbit is found; defaults per command.
    #[serde(default)]
    pub tau: Option<f64>,
    /// Period; defaults to the period of the condition being followed.
    #[serde(default)]
    pub q: Option<usize>,
    #[serde(default)]
    pub guess: Option<[f64; 2]>,
    #[serde(default)]
    pub budget: SeedBudget,
}

/// A locked sink/saddle pair found by simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSeed {
    pub q: usize,
    pub tau: f64,
    #[serde(default)]
    pub budget: SeedBudget,
}

pub fn point(p: [f64; 2]) -> PhasePoint {
    PhasePoint::new(p[0], p[1])
}

fn check(ok: bool, msg: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Validation(msg.into()))
    }
}

pub fn check_param(a: f64, tau: f64) -> Result<(), CliError> {
    hornatlas::ParamPoint::new(a, tau).validate().map_err(CliError::from)
}

pub fn check_bracket(name: &str, b: (f64, f64)) -> Result<(), CliError> {
    check(b.0.is_finite() && b.1.is_finite() && b.0 < b.1, &format!("`{name}` needs finite lo < hi"))
}

fn check_side(side: i8) -> Result<(), CliError> {
    check(side == 1 || side == -1, "branch side must be +1 or -1")
}

fn check_branch(b: &BranchSpec, q: usize) -> Result<(), CliError> {
    check_side(b.side)?;
    check(b.point < q, "branch point index must be below the period")
}

impl OrbitSeed {
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(t) = self.tau {
            check(t.is_finite() && t > 0.0, "seed tau must be positive")?;
        }
        check(self.q != Some(0), "seed period must be at least 1")?;
        check(self.role != Role::Newton || self.guess.is_some(), "a newton seed needs `guess`")?;
        check(self.role != Role::Fixed || self.q.unwrap_or(1) == 1, "a fixed seed has period 1")
    }
}

impl PairSeed {
    pub fn validate(&self) -> Result<(), CliError> {
        check(self.q >= 1, "pair period must be at least 1")?;
        check(self.tau.is_finite() && self.tau > 0.0, "pair tau must be positive")
    }
}

fn d_transient() -> usize {
    10_000
}
fn d_keep() -> usize {
    1_000
}
fn d_width() -> u32 {
    800
}
fn d_q_max() -> usize {
    500
}
fn d_eps() -> f64 {
    hornatlas::orbit::DEFAULT_PERIOD_EPS
}
fn d_lyap_iter() -> usize {
    1_000_000
}
fn d_rot_keep() -> usize {
    100_000
}
fn d_steps() -> usize {
    200
}
fn d_side() -> i8 {
    1
}
fn d_tol() -> f64 {
    1e-6
}
fn d_true() -> bool {
    true
}
fn d_orbit_keep() -> usize {
    5_000
}
fn d_circle_transient() -> usize {
    50_000
}
fn d_circle_keep() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    /// Forward orbit drawn as dots.
    Orbit {
        #[serde(default)]
        start: Option<[f64; 2]>,
        #[serde(default = "d_transient")]
        transient: usize,
        #[serde(default = "d_orbit_keep")]
        keep: usize,
        #[serde(default)]
        color: Option<String>,
    },
    /// Simulated invariant circle as a closed curve.
    InvariantCircle {
        #[serde(default)]
        sample: CircleSample,
        #[serde(default)]
        color: Option<String>,
    },
    /// J₀ across the viewport.
    J0 {
        #[serde(default)]
        color: Option<String>,
    },
    /// Image of J₀ of the given rank across the viewport.
    CriticalImage {
        rank: usize,
        #[serde(default)]
        color: Option<String>,
    },
    FixedPoint {
        #[serde(default)]
        color: Option<String>,
    },
    /// Sink and saddle of a locked pair, marked by stability.
    Periodic {
        q: usize,
        #[serde(default)]
        budget: SeedBudget,
        #[serde(default)]
        color: Option<String>,
    },
    Points {
        points: Vec<[f64; 2]>,
        glyph: Glyph,
        #[serde(default)]
        color: Option<String>,
    },
    Polyline {
        points: Vec<[f64; 2]>,
        #[serde(default)]
        color: Option<String>,
    },
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Orbit { .. } => "orbit",
            LayerSpec::InvariantCircle { .. } => "invariant_circle",
            LayerSpec::J0 { .. } => "j0",
            LayerSpec::CriticalImage { .. } => "critical_image",
            LayerSpec::FixedPoint { .. } => "fixed_point",
            LayerSpec::Periodic { .. } => "periodic",
            LayerSpec::Points { .. } => "points",
            LayerSpec::Polyline { .. } => "polyline",
        }
    }

    /// Layers drawn across the viewport rather than defining it.
    pub fn needs_viewport(&self) -> bool {
        matches!(self, LayerSpec::J0 { .. } | LayerSpec::CriticalImage { .. })
    }
}

fn default_layers() -> Option<Vec<LayerSpec>> {
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortraitScenario {
    pub a: f64,
    pub tau: f64,
    /// Defaults to the padded bounding box of the data layers.
    #[serde(default)]
    pub viewport: Option<Rect>,
    #[serde(default = "d_width")]
    pub width: u32,
    /// Defaults to an orbit, the fixed point and J₀.
    #[serde(default = "default_layers")]
    pub layers: Option<Vec<LayerSpec>>,
    #[serde(default)]
    pub outputs: Outputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitScenario {
    pub a: f64,
    pub tau: f64,
    /// Defaults to the fixed point shifted by 0.01 in `x`.
    #[serde(default)]
    pub start: Option<[f64; 2]>,
    #[serde(default = "d_transient")]
    pub transient: usize,
    #[serde(default = "d_keep")]
    pub keep: usize,
    #[serde(default = "d_q_max")]
    pub q_max: usize,
    #[serde(default = "d_eps")]
    pub eps: f64,
    #[serde(default)]
    pub outputs: Outputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapScenario {
    pub a: f64,
    pub tau: f64,
    #[serde(default)]
    pub start: Option<[f64; 2]>,
    #[serde(default = "d_transient")]
    pub transient: usize,
    #[serde(default = "d_lyap_iter")]
    pub iterations: usize,
    #[serde(default)]
    pub outputs: Outputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotnumScenario {
    pub a: f64,
    pub tau: f64,
    #[serde(default)]
    pub start: Option<[f64; 2]>,
    /// Defaults to the fixed point.
    #[serde(default)]
    pub center: Option<[f64; 2]>,
    #[serde(default = "d_transient")]
    pub transient: usize,
    #[serde(default = "d_rot_keep")]
    pub keep: usize,
    #[serde(default)]
    pub outputs: Outputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicScenario {
    pub a: f64,
    pub tau: f64,
    pub q: usize,
    /// Newton from this point; without it the locked pair is found by
    /// simulation.
    #[serde(default)]
    pub guess: Option<[f64; 2]>,
    #[serde(default)]
    pub budget: SeedBudget,
    #[serde(default)]
    pub newton: NewtonControl,
    #[serde(default)]
    pub outputs: Outputs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
    Both,
}

fn d_both() -> Direction {
    Direction::Both
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceCurveScenario {
    pub a: f64,
    /// Start parameter; for `hopf` it defaults to 1/(2a).
    #[serde(default)]
    pub tau: Option<f64>,
    pub kind: KindName,
    #[serde(default)]
    pub q: Option<usize>,
    /// Starting orbit; for `hopf` it defaults to the fixed point.
    #[serde(default)]
    pub seed: Option<OrbitSeed>,
    /// When given, the start is first located in this τ bracket.
    #[serde(default)]
    pub bracket: Option<(f64, f64)>,
    #[serde(default)]
    pub locate: LocateControl,
    #[serde(default = "d_steps")]
    pub steps: usize,
    #[serde(default = "d_both")]
    pub direction: Direction,
    #[serde(default)]
    pub control: StepControl,
    #[serde(default)]
    pub outputs: Outputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocateScenario {
    pub a: f64,
    pub kind: KindName,
    #[serde(default)]
    pub q: Option<usize>,
    pub bracket: (f64, f64),
    /// Defaults to the fixed point for period 1; its τ defaults to the
    /// lower end of the bracket.
    #[serde(default)]
    pub seed: Option<OrbitSeed>,
    #[serde(default)]
    pub control: LocateControl,
    #[serde(default)]
    pub outputs: Outputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldScenario {
    pub a: f64,
    pub tau: f64,
    /// Saddle orbit, carried to `tau` when found elsewhere.
    pub seed: PairSeed,
    #[serde(default)]
    pub point: usize,
    #[serde(default = "d_side")]
    pub side: i8,
    #[serde(default)]
    pub control: RefineControl,
    #[serde(default)]
    pub outputs: Outputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CuspFindScenario {
    pub a: f64,
    pub seed: PairSeed,
    pub bracket: (f64, f64),
    #[serde(default)]
    pub control: TrackingControl,
    #[serde(default)]
    pub outputs: Outputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionScenario {
    pub a: f64,
    /// Sink and saddle used as fate targets, carried along τ.
    pub seed: PairSeed,
    pub branch: BranchSpec,
    pub bracket: (f64, f64),
    #[serde(default = "d_tol")]
    pub tol: f64,
    /// Bracket both edges of the crossing region instead of one fate flip.
    #[serde(default = "d_true")]
    pub region: bool,
    #[serde(default)]
    pub control: FateControl,
    #[serde(default)]
    pub outputs: Outputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcTangencyScenario {
    pub a: f64,
    pub bracket: (f64, f64),
    #[serde(default)]
    pub control: IcControl,
    #[serde(default)]
    pub outputs: Outputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttractorSpec {
    FixedPoint,
    /// Attracting member of a locked pair.
    Sink {
        q: usize,
        #[serde(default)]
        budget: SeedBudget,
    },
    /// Orbit sample of an attracting circle or ring, used as a tube.
    Circle {
        #[serde(default)]
        start: Option<[f64; 2]>,
        #[serde(default = "d_circle_transient")]
        transient: usize,
        #[serde(default = "d_circle_keep")]
        keep: usize,
    },
    Cycle {
        points: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasinScenario {
    pub a: f64,
    pub tau: f64,
    pub bbox: Rect,
    pub nx: usize,
    pub ny: usize,
    pub attractors: Vec<AttractorSpec>,
    #[serde(default)]
    pub control: BasinControl,
    #[serde(default)]
    pub outputs: Outputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportBoundsScenario {
    pub a: f64,
    pub seed: PairSeed,
    pub first_branch: BranchSpec,
    pub first_bracket: (f64, f64),
    pub cusp_bracket: (f64, f64),
    pub second_branch: BranchSpec,
    pub second_bracket: (f64, f64),
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default)]
    pub fate: FateControl,
    #[serde(default)]
    pub tracking: TrackingControl,
    #[serde(default)]
    pub outputs: Outputs,
}

/// Checks run before any computation, so a dry run catches them too.
pub trait Validate {
    fn validate(&self) -> Result<(), CliError>;
}

fn check_start(s: Option<[f64; 2]>) -> Result<(), CliError> {
    check(s.is_none_or(|p| p.iter().all(|v| v.is_finite())), "start point must be finite")
}

fn check_rect(name: &str, r: &Rect) -> Result<(), CliError> {
    check(r.is_valid() && r.width().is_finite() && r.height().is_finite(), &format!("`{name}` must be finite and nonempty"))
}

impl Validate for PortraitScenario {
    fn validate(&self) -> Result<(), CliError> {
        check_param(self.a, self.tau)?;
        check(self.width > 0, "width must be positive")?;
        if let Some(v) = &self.viewport {
            check_rect("viewport", v)?;
        }
        if let Some(layers) = &self.layers {
            check(!layers.is_empty(), "portrait needs at least one layer")?;
            for l in layers {
                match l {
                    LayerSpec::Orbit { start, keep, .. } => {
                        check_start(*start)?;
                        check(*keep > 0, "orbit layer needs keep > 0")?;
                    }
                    LayerSpec::Periodic { q, .. } => check(*q >= 1, "periodic layer needs q >= 1")?,
                    LayerSpec::Points { points, .. } | LayerSpec::Polyline { points, .. } => {
                        check(points.iter().flatten().all(|v| v.is_finite()), "layer points must be finite")?
                    }
                    _ => {}
                }
            }
            let data = layers.iter().any(|l| !l.needs_viewport());
            check(data || self.viewport.is_some(), "a portrait of curve layers only needs an explicit viewport")?;
        }
        Ok(())
    }
}

impl Validate for OrbitScenario {
    fn validate(&self) -> Result<(), CliError> {
        check_param(self.a, self.tau)?;
        check_start(self.start)?;
        check(self.keep > 0, "keep must be positive")?;
        check(self.eps > 0.0, "eps must be positive")
    }
}

impl Validate for LyapScenario {
    fn validate(&self) -> Result<(), CliError> {
        check_param(self.a, self.tau)?;
        check_start(self.start)?;
        check(self.iterations > 0, "iterations must be positive")
    }
}

impl Validate for RotnumScenario {
    fn validate(&self) -> Result<(), CliError> {
        check_param(self.a, self.tau)?;
        check_start(self.start)?;
        check_start(self.center)?;
        check(self.keep >= 2, "rotation number needs keep >= 2")
    }
}

impl Validate for PeriodicScenario {
    fn validate(&self) -> Result<(), CliError> {
        check_param(self.a, self.tau)?;
        check(self.q >= 1, "q must be at least 1")?;
        check_start(self.guess)
    }
}

impl Validate for TraceCurveScenario {
    fn validate(&self) -> Result<(), CliError> {
        let kind = bif_kind(self.kind, self.q)?;
        if let Some(t) = self.tau {
            check_param(self.a, t)?;
        }
        if let Some(s) = &self.seed {
            s.validate()?;
        } else {
            check(kind == BifKind::HopfFixed || kind.period() == 1, "a seed orbit is required for periodic kinds")?;
        }
        if let Some(b) = self.bracket {
            check_bracket("bracket", b)?;
        }
        check(self.steps > 0, "steps must be positive")?;
        self.control.validate().map_err(CliError::from)
    }
}

impl Validate for LocateScenario {
    fn validate(&self) -> Result<(), CliError> {
        let kind = bif_kind(self.kind, self.q)?;
        check_bracket("bracket", self.bracket)?;
        check_param(self.a, self.bracket.0)?;
        match &self.seed {
            Some(s) => s.validate(),
            None => check(kind.period() == 1, "a seed orbit is required for periodic kinds"),
        }
    }
}

impl Validate for ManifoldScenario {
    fn validate(&self) -> Result<(), CliError> {
        check_param(self.a, self.tau)?;
        self.seed.validate()?;
        check_side(self.side)?;
        check(self.point < self.seed.q, "branch point index must be below the period")?;
        self.control.validate().map_err(CliError::from)
    }
}

impl Validate for CuspFindScenario {
    fn validate(&self) -> Result<(), CliError> {
        self.seed.validate()?;
        check_bracket("bracket", self.bracket)?;
        check_param(self.a, self.bracket.0)?;
        check(self.control.sweep_step > 0.0 && self.control.tol > 0.0, "sweep_step and tol must be positive")?;
        self.control.refine.validate().map_err(CliError::from)
    }
}

impl Validate for ConnectionScenario {
    fn validate(&self) -> Result<(), CliError> {
        self.seed.validate()?;
        check_bracket("bracket", self.bracket)?;
        check_param(self.a, self.bracket.0)?;
        check_branch(&self.branch, self.seed.q)?;
        check(self.tol > 0.0, "tol must be positive")?;
        self.control.validate().map_err(CliError::from)
    }
}

impl Validate for IcTangencyScenario {
    fn validate(&self) -> Result<(), CliError> {
        check_bracket("bracket", self.bracket)?;
        check_param(self.a, self.bracket.0)?;
        check(self.control.tol > 0.0 && self.control.n_keep > 0, "tol and n_keep must be positive")
    }
}

impl Validate for BasinScenario {
    fn validate(&self) -> Result<(), CliError> {
        check_param(self.a, self.tau)?;
        check_rect("bbox", &self.bbox)?;
        check(self.nx > 0 && self.ny > 0, "nx and ny must be positive")?;
        for s in &self.attractors {
            match s {
                AttractorSpec::Sink { q, .. } => check(*q >= 1, "sink attractor needs q >= 1")?,
                AttractorSpec::Circle { start, keep, .. } => {
                    check_start(*start)?;
                    check(*keep > 0, "circle attractor needs keep > 0")?;
                }
                AttractorSpec::Cycle { points } => check(!points.is_empty(), "cycle attractor needs points")?,
                AttractorSpec::FixedPoint => {}
            }
        }
        self.control.validate().map_err(CliError::from)
    }
}

impl Validate for ReportBoundsScenario {
    fn validate(&self) -> Result<(), CliError> {
        self.seed.validate()?;
        check_bracket("first_bracket", self.first_bracket)?;
        check_bracket("cusp_bracket", self.cusp_bracket)?;
        check_bracket("second_bracket", self.second_bracket)?;
        check_param(self.a, self.first_bracket.0)?;
        check_branch(&self.first_branch, self.seed.q)?;
        check_branch(&self.second_branch, self.seed.q)?;
        check(self.tol > 0.0, "tol must be positive")?;
        self.fate.validate().map_err(CliError::from)?;
        self.tracking.refine.validate().map_err(CliError::from)
    }
}
