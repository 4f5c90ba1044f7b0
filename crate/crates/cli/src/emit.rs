//! Artifact writers: curve CSV, phase-portrait SVG and the JSON-lines run log.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use hornatlas::continuation::{BifCurve, BifKind};
use hornatlas::manifold::Branch;
use hornatlas::{ParamPoint, PhasePoint, Rect};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const CSV_HEADER: &str = "kind,q,a,tau,x,y,aux1,aux2";

/// One CSV row. Missing optional fields are written as empty cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub kind: String,
    pub q: Option<usize>,
    pub params: ParamPoint,
    pub point: PhasePoint,
    pub aux1: Option<f64>,
    pub aux2: Option<f64>,
}

/// 17 significant digits, enough to read every double back bit-exactly.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub fn kind_tag(kind: BifKind) -> &'static str {
    match kind {
        BifKind::SaddleNode(_) => "SN",
        BifKind::NeimarkSacker(_) => "NS",
        BifKind::EigenvalueZero(_) => "EZ",
        BifKind::EqualEigenvalue(_) => "EE",
        BifKind::HopfFixed => "HOPF",
    }
}

/// Rows of a bifurcation curve; `aux1` is the defining scalar, `aux2` the
/// periodicity residual.
pub fn curve_rows(curve: &BifCurve) -> Vec<CsvRow> {
    curve
        .samples
        .iter()
        .map(|s| CsvRow {
            kind: kind_tag(curve.kind).to_string(),
            q: Some(curve.kind.period()),
            params: s.params,
            point: s.point,
            aux1: Some(s.g),
            aux2: Some(s.residual),
        })
        .collect()
}

/// Rows of a grown branch; `aux1` is the iterate depth, `aux2` the seed
/// parameter.
pub fn branch_rows(branch: &Branch) -> Vec<CsvRow> {
    branch
        .polyline
        .iter()
        .enumerate()
        .map(|(k, &z)| CsvRow {
            kind: "branch".into(),
            q: Some(branch.saddle.q),
            params: branch.saddle.params,
            point: z,
            aux1: Some(branch.vertex_depth[k] as f64),
            aux2: Some(branch.vertex_seed[k]),
        })
        .collect()
}

pub fn polyline_rows(kind: &str, q: Option<usize>, params: ParamPoint, points: &[PhasePoint]) -> Vec<CsvRow> {
    points
        .iter()
        .map(|&z| CsvRow { kind: kind.into(), q, params, point: z, aux1: None, aux2: None })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn render_csv(rows: &[CsvRow]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let q = r.q.map(|q| q.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.kind,
            q,
            fmt_f64(r.params.a),
            fmt_f64(r.params.tau),
            fmt_f64(r.point.x),
            fmt_f64(r.point.y),
            opt(r.aux1),
            opt(r.aux2)
        );
    }
    s
}

pub fn emit_curve_csv(rows: &[CsvRow], path: &Path) -> Result<(), CliError> {
    if rows.is_empty() {
        return Err(CliError::Validation("nothing to write: curve has no samples".into()));
    }
    std::fs::write(path, render_csv(rows)).map_err(|e| CliError::io(path, e))
}

/// Parse a CSV written by [`render_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>, CliError> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(CliError::Validation("missing CSV header".into()));
    }
    let bad = |l: &str| CliError::Validation(format!("malformed CSV row: {l}"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 8 {
                return Err(bad(l));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(l));
            let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
            Ok(CsvRow {
                kind: f[0].to_string(),
                q: if f[1].is_empty() { None } else { Some(f[1].parse().map_err(|_| bad(l))?) },
                params: ParamPoint::new(num(f[2])?, num(f[3])?),
                point: PhasePoint::new(num(f[4])?, num(f[5])?),
                aux1: opt(f[6])?,
                aux2: opt(f[7])?,
            })
        })
        .collect()
}

/// Marker shapes, following the usual figure conventions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Glyph {
    /// Saddles.
    Cross,
    /// Attracting points.
    Dot,
    /// Repelling points.
    Ring,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SvgLayer {
    pub name: String,
    pub color: String,
    pub polylines: Vec<Vec<PhasePoint>>,
    pub markers: Vec<(PhasePoint, Glyph)>,
    /// Radius of plain orbit dots, pixels.
    pub dot_radius: f64,
}

impl SvgLayer {
    pub fn new(name: &str, color: &str) -> Self {
        SvgLayer { name: name.into(), color: color.into(), polylines: Vec::new(), markers: Vec::new(), dot_radius: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PortraitSpec {
    pub viewport: Rect,
    /// Image width in pixels; the height follows the viewport aspect.
    pub width: u32,
    pub layers: Vec<SvgLayer>,
}

impl PortraitSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        let v = &self.viewport;
        if !(v.is_valid() && v.width().is_finite() && v.height().is_finite()) {
            return Err(CliError::Validation("viewport must be finite and nonempty".into()));
        }
        if self.layers.is_empty() {
            return Err(CliError::Validation("portrait needs at least one layer".into()));
        }
        if self.width == 0 {
            return Err(CliError::Validation("portrait width must be positive".into()));
        }
        Ok(())
    }
}

/// Standalone SVG 1.1 with one top-level group per layer.
pub fn render_svg(spec: &PortraitSpec) -> Result<String, CliError> {
    spec.validate()?;
    let v = spec.viewport;
    let w = spec.width as f64;
    let h = (w * v.height() / v.width()).round().max(1.0);
    let sx = w / v.width();
    let sy = h / v.height();
    let px = |z: PhasePoint| ((z.x - v.x_min) * sx, (v.y_max - z.y) * sy);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    for (k, layer) in spec.layers.iter().enumerate() {
        let _ = writeln!(s, r#"<g id="layer-{k}" class="{}" stroke="{}" fill="none">"#, escape(&layer.name), escape(&layer.color));
        for line in &layer.polylines {
            if line.len() < 2 {
                continue;
            }
            let mut d = String::new();
            for (i, &z) in line.iter().enumerate() {
                if !z.is_finite() {
                    continue;
                }
                let (x, y) = px(z);
                let _ = write!(d, "{}{:.2},{:.2}", if i == 0 { "M" } else { " L" }, x, y);
            }
            let _ = writeln!(s, r#"<path d="{d}" stroke-width="1"/>"#);
        }
        for &(z, g) in &layer.markers {
            if !z.is_finite() {
                continue;
            }
            let (x, y) = px(z);
            match g {
                Glyph::Cross => {
                    let r = 4.0;
                    let _ = writeln!(
                        s,
                        r#"<path d="M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}" stroke-width="1.5"/>"#,
                        x - r,
                        y - r,
                        x + r,
                        y + r,
                        x - r,
                        y + r,
                        x + r,
                        y - r
                    );
                }
                Glyph::Dot => {
                    let r = if layer.dot_radius > 0.0 { layer.dot_radius } else { 3.0 };
                    let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r:.2}" fill="{}" stroke="none"/>"#, escape(&layer.color));
                }
                Glyph::Ring => {
                    let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.00" stroke-width="1"/>"#);
                }
            }
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_portrait_svg(spec: &PortraitSpec, path: &Path) -> Result<(), CliError> {
    let svg = render_svg(spec)?;
    std::fs::write(path, svg).map_err(|e| CliError::io(path, e))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// JSON-lines run log; a no-op when no path was given.
pub struct RunLog {
    out: Option<BufWriter<File>>,
}

impl RunLog {
    pub fn open(path: Option<&Path>) -> Result<Self, CliError> {
        let out = match path {
            Some(p) => Some(BufWriter::new(File::create(p).map_err(|e| CliError::io(p, e))?)),
            None => None,
        };
        Ok(RunLog { out })
    }

    pub fn disabled() -> Self {
        RunLog { out: None }
    }

    pub fn event(&mut self, value: serde_json::Value) {
        if let Some(w) = self.out.as_mut() {
            // a failing log write must not abort the computation
            let _ = serde_json::to_writer(&mut *w, &value).map(|_| w.write_all(b"\n"));
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.out.is_some()
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        if let Some(w) = self.out.as_mut() {
            w.flush().map_err(|e| CliError::Io(e.to_string()))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(x: f64, y: f64) -> CsvRow {
        CsvRow {
            kind: "branch".into(),
            q: Some(37),
            params: ParamPoint::new(0.36, 1.7765),
            point: PhasePoint::new(x, y),
            aux1: Some(3.0),
            aux2: None,
        }
    }

    #[test]
    fn header_and_one_row() {
        let text = render_csv(&[row(0.5, 0.25)]);
        let lines: Vec<&str> = text.split('\n').collect();
        assert_eq!(lines, [CSV_HEADER, "branch,37,3.5999999999999999e-1,1.7765000000000000e0,5.0000000000000000e-1,2.5000000000000000e-1,3.0000000000000000e0,", ""]);
        assert!(!text.contains('\r'));
    }

    #[test]
    fn empty_csv_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let r = emit_curve_csv(&[], &dir.path().join("x.csv"));
        assert!(matches!(r, Err(CliError::Validation(_))));
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(parse_csv("a,b\n").is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\nbranch,1,2\n")).is_err());
    }

    fn two_layers() -> PortraitSpec {
        let mut a = SvgLayer::new("orbit", "#000");
        a.markers = vec![(PhasePoint::new(0.5, 0.5), Glyph::Dot), (PhasePoint::new(0.2, 0.1), Glyph::Cross)];
        let mut b = SvgLayer::new("curve", "#f00");
        b.polylines = vec![vec![PhasePoint::new(0.0, 0.0), PhasePoint::new(1.0, 1.0)]];
        b.markers = vec![(PhasePoint::new(0.9, 0.1), Glyph::Ring)];
        PortraitSpec { viewport: Rect::new(0.0, 1.0, 0.0, 1.0), width: 200, layers: vec![a, b] }
    }

    #[test]
    fn one_group_per_layer() {
        let svg = render_svg(&two_layers()).unwrap();
        assert_eq!(svg.matches("<g ").count(), 2);
        assert_eq!(svg.matches("</g>").count(), 2);
        assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg, render_svg(&two_layers()).unwrap());
    }

    #[test]
    fn viewport_maps_linearly() {
        let svg = render_svg(&two_layers()).unwrap();
        // (0.5, 0.5) sits in the middle; y grows downward in SVG
        assert!(svg.contains(r#"cx="100.00" cy="100.00""#));
        assert!(svg.contains("M0.00,200.00 L200.00,0.00"));
    }

    #[test]
    fn invalid_portraits() {
        let mut s = two_layers();
        s.layers.clear();
        assert!(render_svg(&s).is_err());
        let mut s = two_layers();
        s.viewport = Rect::new(0.0, 0.0, 0.0, 1.0);
        assert!(render_svg(&s).is_err());
        let mut s = two_layers();
        s.viewport.x_max = f64::INFINITY;
        assert!(render_svg(&s).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(pts in proptest::collection::vec((any::<f64>(), any::<f64>()), 1..40)) {
            let rows: Vec<CsvRow> = pts
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| row(x, y))
                .collect();
            prop_assume!(!rows.is_empty());
            let back = parse_csv(&render_csv(&rows)).unwrap();
            prop_assert_eq!(back.len(), rows.len());
            for (a, b) in rows.iter().zip(&back) {
                prop_assert_eq!(a.point.x.to_bits(), b.point.x.to_bits());
                prop_assert_eq!(a.point.y.to_bits(), b.point.y.to_bits());
                prop_assert_eq!(a, b);
            }
        }
    }
}
