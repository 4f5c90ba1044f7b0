//! Acceptance run: one PASS/FAIL line per criterion. Analyses that have a
//! subcommand go through the `hornatlas` binary, structural checks call the
//! library directly.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use hornatlas::basins::{inside_outside, invariant_circle, left_of_j0_count, CircleSample};
use hornatlas::continuation::{hopf_rotation, horn_root_on_hopf, locate_in_tau, trace_curve, BifKind, LocateControl, ParamBox, StepControl};
use hornatlas::critical::{critical_image, det_sign_crossings, tangency_gap, ImageRefine, TANGENCY_ANGLE_DEG, TANGENCY_DISTANCE};
use hornatlas::map::{polyline_image, polyline_preimages};
use hornatlas::periodic::{find_sink_and_saddle, track_orbit, SeedBudget};
use hornatlas::{EulerLorenz, MapModel, ParamPoint, PhasePoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

struct Runner {
    work: tempfile::TempDir,
}

impl Runner {
    /// Run one subcommand from the work directory and return its summary
    /// with the wall time measured here.
    fn cli(&self, args: &[&str]) -> Result<(Value, f64), String> {
        let t = Instant::now();
        let out = Command::new(env!("CARGO_BIN_EXE_hornatlas"))
            .args(args)
            .current_dir(self.work.path())
            .env_remove("HORNATLAS_THREADS")
            .output()
            .map_err(|e| e.to_string())?;
        let secs = t.elapsed().as_secs_f64();
        let stdout = String::from_utf8_lossy(&out.stdout);
        let summary: Value = serde_json::from_str(stdout.lines().last().unwrap_or("")).map_err(|e| format!("summary: {e}"))?;
        if !out.status.success() {
            return Err(format!("`{}` exited {:?}: {summary}", args.join(" "), out.status.code()));
        }
        Ok((summary["result"].clone(), secs))
    }

    fn scenario(&self, name: &str, extra: &[&str]) -> Result<(Value, f64), String> {
        let path = scenario_path(name);
        let mut args = vec!["run", path.to_str().unwrap()];
        args.extend_from_slice(extra);
        self.cli(&args)
    }
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.json"))
}

fn num(v: &Value, path: &[&str]) -> Result<f64, String> {
    let mut cur = v;
    for k in path {
        cur = &cur[*k];
    }
    cur.as_f64().ok_or_else(|| format!("missing number at {}", path.join(".")))
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(what: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    check((got - want).abs() <= tol, || format!("{what} = {got:.8}, expected {want} ± {tol:e}"))
}

fn under(what: &str, secs: f64, limit: f64) -> Result<(), String> {
    check(secs < limit, || format!("{what} took {secs:.1} s, limit {limit} s"))
}

fn hopf_locus(r: &Runner) -> Outcome {
    let (loc, t1) = r.scenario("locate_hopf", &[])?;
    let tau = num(&loc, &["tau"])?;
    within("NS(1) tau", tau, 1.388889, 1e-6)?;
    let dir = r.work.path().join("hopf.csv");
    let (_, t2) = r.cli(&[
        "trace-curve",
        "--a",
        "0.36",
        "--set",
        "kind=hopf",
        "--set",
        "steps=1000",
        "--set",
        r#"control.domain={"a":[0.3,0.5],"tau":[0.5,2.5]}"#,
        "--set",
        "control.h_max=2e-3",
        "--csv",
        dir.to_str().unwrap(),
    ])?;
    let rows = hornatlas_cli::emit::parse_csv(&std::fs::read_to_string(&dir).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let worst = rows.iter().map(|r| (r.params.tau - 1.0 / (2.0 * r.params.a)).abs()).fold(0.0, f64::max);
    let (a_lo, a_hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.params.a), hi.max(r.params.a)));
    check(worst < 1e-8, || format!("max |tau - 1/(2a)| = {worst:e}"))?;
    check(a_lo < 0.3 + 5e-3 && a_hi > 0.5 - 5e-3, || format!("trace covers a in [{a_lo}, {a_hi}]"))?;
    under("locate + trace", t1 + t2, 5.0)?;
    Ok(format!(
        "tau = {tau:.9}; {} samples over a in [{a_lo:.4}, {a_hi:.4}], max |tau - 1/(2a)| = {worst:.1e}; {:.2} s",
        rows.len(),
        t1 + t2
    ))
}

fn sn37_lower(r: &Runner) -> Outcome {
    let (loc, t) = r.scenario("locate_sn37_lower", &[])?;
    let tau = num(&loc, &["tau"])?;
    within("SN(37) tau", tau, 1.776243, 5e-5)?;
    under("locate", t, 120.0)?;
    Ok(format!("tau = {tau:.7}; {t:.1} s"))
}

fn ns37_pair(r: &Runner) -> Outcome {
    let (first, t1) = r.scenario("locate_ns37_first", &[])?;
    let (second, t2) = r.scenario("locate_ns37_second", &[])?;
    let (a, b) = (num(&first, &["tau"])?, num(&second, &["tau"])?);
    within("first NS(37) tau", a, 1.779444, 5e-5)?;
    within("second NS(37) tau", b, 1.786262, 1e-4)?;
    under("first locate", t1, 120.0)?;
    under("second locate", t2, 120.0)?;
    Ok(format!("tau = {a:.7} ({t1:.1} s) and {b:.7} ({t2:.1} s)"))
}

fn sn37_upper(r: &Runner) -> Outcome {
    let (loc, t) = r.scenario("locate_sn37_upper", &[])?;
    let tau = num(&loc, &["tau"])?;
    within("upper SN(37) tau", tau, 1.786626, 1e-4)?;
    Ok(format!("tau = {tau:.7}; {t:.1} s"))
}

fn first_crossing(r: &Runner) -> Outcome {
    let (res, t) = r.scenario("connection_first", &[])?;
    let entry = num(&res, &["entry", "mid"])?;
    let exit = num(&res, &["exit", "mid"])?;
    within("entry", entry, 1.776878, 5e-5)?;
    within("exit", exit, 1.776881, 5e-5)?;
    check(entry < exit, || format!("entry {entry} is not below exit {exit}"))?;
    under("connection", t, 600.0)?;
    Ok(format!("entry = {entry:.7}, exit = {exit:.7}; {t:.1} s"))
}

fn second_crossing(r: &Runner) -> Outcome {
    let (res, t) = r.scenario("connection_second", &[])?;
    let entry = num(&res, &["entry", "mid"])?;
    let exit = num(&res, &["exit", "mid"])?;
    within("entry", entry, 1.78373, 5e-4)?;
    check(exit > 1.78428 && exit < 1.785, || format!("exit {exit} outside (1.78428, 1.785)"))?;
    Ok(format!("entry = {entry:.6}, exit = {exit:.6}; {t:.1} s"))
}

fn cusp_and_bounds(r: &Runner) -> Outcome {
    let (cusp, t1) = r.scenario("cusp_find", &[])?;
    let tau = num(&cusp, &["tau_cusp"])?;
    within("cusp tau", tau, 1.78428, 5e-4)?;
    let (b, t2) = r.scenario("report_bounds", &[])?;
    let (cd, c, chaos) = (num(&b, &["tau_cd_bound"])?, num(&b, &["tau_cusp"])?, num(&b, &["tau_chaos_bound"])?);
    check(cd < c && c < chaos, || format!("bounds not ordered: {cd} {c} {chaos}"))?;
    Ok(format!("tau_cusp = {tau:.6} ({t1:.1} s); bounds {cd:.6} < {c:.6} < {chaos:.6} ({t2:.1} s)"))
}

fn loops(r: &Runner) -> Outcome {
    let (late, t1) = r.scenario("manifold_loops", &[])?;
    let (early, t2) = r.scenario("manifold_loops", &["--tau", "1.7765", "--set", "outputs={}"])?;
    let n_late = num(&late, &["self_intersections"])?;
    let n_early = num(&early, &["self_intersections"])?;
    check(n_late >= 1.0, || "no loops at 1.785".into())?;
    check(n_early == 0.0, || format!("{n_early} self-intersections at 1.7765"))?;
    Ok(format!("{n_late} self-intersections at 1.785 ({t1:.1} s), {n_early} at 1.7765 ({t2:.1} s)"))
}

fn lyapunov(r: &Runner) -> Outcome {
    let (chaos, t) = r.scenario("lyap_chaos", &[])?;
    let l1 = num(&chaos, &["l1"])?;
    check(l1 > 0.01, || format!("l1 = {l1} at (0.36, 1.91)"))?;
    let gap = (num(&chaos, &["sum"])? - num(&chaos, &["mean_log_abs_det"])?).abs();
    check(gap < 1e-6, || format!("|l1 + l2 - mean log|det|| = {gap:e}"))?;
    let (calm, _) = r.cli(&["lyap", "--a", "0.36", "--tau", "1.0"])?;
    let m1 = num(&calm, &["l1"])?;
    check(m1 < -0.01, || format!("l1 = {m1} at (0.36, 1.0)"))?;
    Ok(format!("l1 = {l1:.4} at 1.91 with 1e6 iterates ({t:.1} s), l1 = {m1:.4} at 1.0, sum gap {gap:.1e}"))
}

fn noninvertibility() -> Outcome {
    let m = EulerLorenz;
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let mut worst = 0.0f64;
    let mut n = 0;
    while n < 10_000 {
        let p = ParamPoint::new(rng.gen_range(0.05..0.9), rng.gen_range(0.2..2.5));
        if (p.tau - 1.0).abs() < 1e-3 {
            continue;
        }
        let w = PhasePoint::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let pre = m.preimages(p, w).map_err(|e| e.to_string())?;
        check(!pre.is_empty() && pre.len() <= 3, || format!("{} preimages of {w:?} at {p:?}", pre.len()))?;
        for z in pre {
            worst = worst.max(m.apply(p, z).dist(w) / (1.0 + w.norm()));
        }
        n += 1;
    }
    check(worst < 1e-9, || format!("worst relative round-trip error {worst:e}"))?;

    let p = ParamPoint::new(0.36, 1.775);
    let mut ic = invariant_circle(&m, p, &CircleSample::default()).map_err(|e| e.to_string())?;
    ic.push(ic[0]);
    let branches = polyline_preimages(&m, p, &ic).map_err(|e| e.to_string())?;
    check(branches.len() == 3, || format!("{} first-rank preimage branches", branches.len()))?;

    let crossings = det_sign_crossings(&m, p, &ic);
    check(crossings.len() == 2, || format!("circle meets J0 {} times", crossings.len()))?;
    let image = polyline_image(&m, p, &ic).map_err(|e| e.to_string())?;
    let mut tangencies = Vec::new();
    for (_, z) in &crossings {
        let j1 = critical_image(p, (z.x - 0.1, z.x + 0.1), 1, &ImageRefine { max_spacing: 2e-4, ..ImageRefine::default() })
            .map_err(|e| e.to_string())?;
        let target = m.apply(p, *z);
        let hit = tangency_gap(&image, &j1)
            .into_iter()
            .filter(|h| h.point.dist(target) < 5e-3)
            .min_by(|a, b| a.distance.total_cmp(&b.distance))
            .ok_or("no tangency near the image of a J0 crossing")?;
        check(hit.distance < TANGENCY_DISTANCE && hit.angle_deg < TANGENCY_ANGLE_DEG, || format!("{hit:?} misses the thresholds"))?;
        tangencies.push(hit);
    }
    Ok(format!(
        "10000 random points, worst relative error {worst:.1e}; 3 preimage branches; tangencies at distance {:.1e}/{:.1e}, angle {:.2}/{:.2} deg",
        tangencies[0].distance, tangencies[1].distance, tangencies[0].angle_deg, tangencies[1].angle_deg
    ))
}

fn period_6_horn(r: &Runner) -> Outcome {
    let p = ParamPoint::new(0.465, 1.472);
    let (sink, saddle) = find_sink_and_saddle(&EulerLorenz, p, 6, &SeedBudget::default()).map_err(|e| e.to_string())?;
    let pts: Vec<PhasePoint> = sink.points.iter().chain(&saddle.points).copied().collect();
    let ic = invariant_circle(&EulerLorenz, p, &CircleSample::default()).map_err(|e| e.to_string())?;
    let io = inside_outside(&ic, &pts).map_err(|e| e.to_string())?;
    check((io.inside, io.outside) == (2, 10), || format!("inside/outside = {}/{}", io.inside, io.outside))?;
    let left = left_of_j0_count(p, &pts).map_err(|e| e.to_string())?;
    check(left.boundary.is_empty() && left.count % 2 == 0, || format!("{} points left of J0", left.count))?;

    let (basin, tb) = r.scenario("basin_period_6", &[])?;
    let labels = basin["labels"].as_array().ok_or("no labels")?;
    let cells = |k: usize| num(&labels[k], &["cells"]);
    let (sink_cells, ring_cells) = (cells(0)?, cells(1)?);
    let parts = num(&labels[0], &["components"])?;
    check(sink_cells > 0.0 && ring_cells > 0.0, || format!("cells {sink_cells}/{ring_cells}"))?;
    check(parts > 1.0, || "period-6 basin is connected".into())?;
    check(basin["nx"] == 512 && basin["ny"] == 512, || "grid is not 512x512".into())?;

    let root = horn_root_on_hopf(1, 6).map_err(|e| e.to_string())?;
    check((root.a - 0.5).abs() < 1e-12 && (root.tau - 1.0).abs() < 1e-12, || format!("root {root:?}"))?;
    let rho = hopf_rotation(0.5).map_err(|e| e.to_string())?;
    within("rotation at the root", rho, 1.0 / 6.0, 1e-12)?;
    // the traced upper boundary runs into the root
    let lc = LocateControl::default();
    let upper = locate_in_tau(&EulerLorenz, BifKind::SaddleNode(6), (1.472, 1.672), &saddle, &lc).map_err(|e| e.to_string())?;
    let ctrl = StepControl { domain: ParamBox { a: (0.2, 0.7), tau: (0.9, 2.0) }, ..StepControl::default() };
    let c = trace_curve(&EulerLorenz, BifKind::SaddleNode(6), (upper.orbit.params, upper.orbit.point()), 3000, 1, &ctrl)
        .map_err(|e| e.to_string())?;
    let closest = c.samples.iter().map(|s| (s.params.a - root.a).hypot(s.params.tau - root.tau)).fold(f64::INFINITY, f64::min);
    check(closest < 1e-4, || format!("SN(6) boundary stays {closest:e} from the root"))?;
    Ok(format!(
        "inside/outside = 2/10, {} left of J0; 512x512 basin: {sink_cells} sink cells in {parts} pieces, {ring_cells} ring cells ({tb:.0} s); SN(6) reaches {closest:.1e} of (0.5, 1.0)",
        left.count
    ))
}

fn secondary_lockings(r: &Runner) -> Outcome {
    let (o259, t1) = r.scenario("orbit_period_259", &[])?;
    check(o259["period"] == 259, || format!("period {} at 1.7835", o259["period"]))?;
    // the period-407 sink circles the repelling period-37 foci
    let (sink, _) = find_sink_and_saddle(&EulerLorenz, ParamPoint::new(0.36, 1.7765), 37, &SeedBudget::default())
        .map_err(|e| e.to_string())?;
    let focus = track_orbit(&EulerLorenz, &sink, 1.785).map_err(|e| e.to_string())?;
    let z = focus.points[0] + PhasePoint::new(1e-3, 0.0);
    let start = format!("start=[{:e},{:e}]", z.x, z.y);
    let (o407, t2) = r.cli(&[
        "orbit", "--a", "0.36", "--tau", "1.785", "--set", &start, "--set", "transient=400000", "--set", "keep=1500", "--set",
        "q_max=500",
    ])?;
    check(o407["period"] == 407, || format!("period {} at 1.785", o407["period"]))?;
    under("period 259", t1, 60.0)?;
    under("period 407", t2, 60.0)?;
    Ok(format!("period 259 at 1.7835 ({t1:.1} s), 407 at 1.785 ({t2:.1} s)"))
}

fn main() {
    let runner = Runner { work: tempfile::tempdir().expect("work directory") };
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("hopf locus", Box::new(|| hopf_locus(&runner))),
        ("period-37 saddle-node", Box::new(|| sn37_lower(&runner))),
        ("secondary hopf pair", Box::new(|| ns37_pair(&runner))),
        ("final saddle-node", Box::new(|| sn37_upper(&runner))),
        ("first heteroclinic crossing", Box::new(|| first_crossing(&runner))),
        ("second crossing", Box::new(|| second_crossing(&runner))),
        ("cusp parameter and bounds", Box::new(|| cusp_and_bounds(&runner))),
        ("loops", Box::new(|| loops(&runner))),
        ("lyapunov exponents", Box::new(|| lyapunov(&runner))),
        ("noninvertibility structure", Box::new(noninvertibility)),
        ("period-6 horn content", Box::new(|| period_6_horn(&runner))),
        ("secondary lockings", Box::new(|| secondary_lockings(&runner))),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", k + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
