//! Deterministic SVG drawings of critical graphs and Levy measures.
//!
//! Edges with positive density are solid, negative ones dashed; point
//! masses are filled dots when positive and hollow when negative.

use std::fmt::Write;

use num_complex::Complex64;
use qdkit::pipeline::AnalysisReport;
use qdkit::{Location, PointKind};

const SIZE: f64 = 800.0;
const LEGEND: f64 = 110.0;
const GRID_LINES: usize = 9;

struct View {
    center: Complex64,
    half: f64,
}

impl View {
    fn px(&self, z: Complex64) -> (f64, f64) {
        let s = SIZE / (2.0 * self.half);
        ((z.re - self.center.re) * s + SIZE / 2.0, SIZE / 2.0 - (z.im - self.center.im) * s)
    }
}

fn view(report: &AnalysisReport) -> View {
    let pts: Vec<Complex64> = report
        .inventory
        .iter()
        .flat_map(|inv| inv.points.iter())
        .filter_map(|p| p.location.as_complex())
        .chain(
            report
                .critical_graph
                .iter()
                .flat_map(|cg| cg.vertices.iter().map(|v| v.z())),
        )
        .collect();
    if pts.is_empty() {
        return View {
            center: Complex64::new(0.0, 0.0),
            half: 2.0,
        };
    }
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for z in &pts {
        lo = Complex64::new(lo.re.min(z.re), lo.im.min(z.im));
        hi = Complex64::new(hi.re.max(z.re), hi.im.max(z.im));
    }
    let span = (hi.re - lo.re).max(hi.im - lo.im);
    View {
        center: (lo + hi) / 2.0,
        half: span / 2.0 + span.max(1.0) * 0.5,
    }
}

fn polyline(view: &View, pts: impl Iterator<Item = Complex64>) -> String {
    let mut d = String::new();
    let mut last = String::new();
    for z in pts {
        let (x, y) = view.px(z);
        let here = format!("{x:.2},{y:.2}");
        if here != last {
            let _ = write!(d, "{}{here}", if last.is_empty() { "M" } else { " L" });
            last = here;
        }
    }
    d
}

/// Draws the critical graph of a report, coloured by the sign of the Levy
/// density when a measure was computed. `extra` holds further trajectory
/// polylines drawn thin underneath.
pub fn emit_svg(report: &AnalysisReport, extra: &[Vec<Complex64>]) -> String {
    let v = view(report);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{h}" viewBox="0 0 {SIZE} {h}">"#,
        h = SIZE + LEGEND
    );
    out.push_str(concat!(
        "<style>\n",
        ".grid{stroke:#ddd;stroke-width:1}\n",
        ".trajectory{stroke:#9bb;stroke-width:0.6;fill:none}\n",
        ".edge{fill:none;stroke-width:2.5}\n",
        ".edge.positive{stroke:#000}\n",
        ".edge.negative{stroke:#000;stroke-dasharray:8 5}\n",
        ".edge.neutral{stroke:#888;stroke-width:1.5}\n",
        ".mass{stroke:#000;stroke-width:1.5}\n",
        ".mass.positive{fill:#000}\n",
        ".mass.negative{fill:none}\n",
        "text{font-family:sans-serif;font-size:14px}\n",
        "</style>\n",
    ));
    let _ = writeln!(
        out,
        r#"<clipPath id="plot"><rect x="0" y="0" width="{SIZE}" height="{SIZE}"/></clipPath>"#
    );

    out.push_str("<g id=\"grid\">\n");
    for k in 0..GRID_LINES {
        let p = SIZE * (k as f64 + 0.5) / GRID_LINES as f64;
        let _ = writeln!(out, r#"<line class="grid" x1="{p:.2}" y1="0" x2="{p:.2}" y2="{SIZE}"/>"#);
        let _ = writeln!(out, r#"<line class="grid" x1="0" y1="{p:.2}" x2="{SIZE}" y2="{p:.2}"/>"#);
    }
    out.push_str("</g>\n<g id=\"trajectories\" clip-path=\"url(#plot)\">\n");
    for line in extra {
        let _ = writeln!(out, r#"<path class="trajectory" d="{}"/>"#, polyline(&v, line.iter().copied()));
    }

    let coefficient = |e: usize| {
        report
            .measures
            .as_ref()
            .and_then(|m| m.edge_coefficients.iter().find(|(id, _)| *id == e).map(|&(_, c)| c))
    };
    out.push_str("</g>\n<g id=\"critical\" clip-path=\"url(#plot)\">\n");
    if let Some(cg) = &report.critical_graph {
        for e in &cg.edges {
            let class = match coefficient(e.id) {
                Some(c) if c > 0 => "positive",
                Some(c) if c < 0 => "negative",
                _ => "neutral",
            };
            let _ = writeln!(
                out,
                r#"<path class="edge {class}" data-edge="{}" d="{}"/>"#,
                e.id,
                polyline(&v, e.points())
            );
        }
    }

    out.push_str("</g>\n<g id=\"points\">\n");
    let infinity = (SIZE - 30.0, 30.0);
    if let Some(inv) = &report.inventory {
        for p in &inv.points {
            let Some(z) = p.location.as_complex() else { continue };
            let (x, y) = v.px(z);
            if !(0.0..=SIZE).contains(&x) || !(0.0..=SIZE).contains(&y) {
                continue;
            }
            let glyph = match p.kind {
                PointKind::Zero => format!(
                    r##"<path class="zero" d="M{:.2},{:.2} l8,8 m0,-8 l-8,8" stroke="#c00" stroke-width="2"/>"##,
                    x - 4.0,
                    y - 4.0
                ),
                PointKind::SimplePole => format!(
                    r##"<rect class="pole" x="{:.2}" y="{:.2}" width="8" height="8" fill="#04c"/>"##,
                    x - 4.0,
                    y - 4.0
                ),
                _ => format!(
                    r##"<path class="pole" d="M{x:.2},{:.2} l6,6 l-6,6 l-6,-6 z" fill="#04c"/>"##,
                    y - 6.0
                ),
            };
            let _ = writeln!(out, "{glyph}");
        }
        let _ = writeln!(
            out,
            r#"<text class="infinity" x="{:.2}" y="{:.2}" text-anchor="middle">∞</text>"#,
            infinity.0,
            infinity.1 - 12.0
        );
    }
    if let Some(m) = &report.measures {
        for pm in &m.pole_masses {
            let (x, y) = match pm.location {
                Location::Finite(p) => v.px(Complex64::new(p[0], p[1])),
                Location::Infinity => infinity,
            };
            let class = if pm.mass >= 0.0 { "positive" } else { "negative" };
            let _ = writeln!(
                out,
                r#"<circle class="mass {class}" cx="{x:.2}" cy="{y:.2}" r="7" data-mass="{:.6e}"/>"#,
                pm.mass
            );
        }
    }
    out.push_str("</g>\n");

    let y0 = SIZE + 20.0;
    let _ = writeln!(out, r#"<g id="legend" transform="translate(20,{y0})">"#);
    out.push_str(concat!(
        "<line class=\"edge positive\" x1=\"0\" y1=\"0\" x2=\"40\" y2=\"0\"/><text x=\"50\" y=\"5\">positive density</text>\n",
        "<line class=\"edge negative\" x1=\"220\" y1=\"0\" x2=\"260\" y2=\"0\"/><text x=\"270\" y=\"5\">negative density</text>\n",
        "<line class=\"edge neutral\" x1=\"440\" y1=\"0\" x2=\"480\" y2=\"0\"/><text x=\"490\" y=\"5\">no measure</text>\n",
        "<circle class=\"mass positive\" cx=\"6\" cy=\"30\" r=\"6\"/><text x=\"20\" y=\"35\">positive point mass</text>\n",
        "<circle class=\"mass negative\" cx=\"226\" cy=\"30\" r=\"6\"/><text x=\"240\" y=\"35\">negative point mass</text>\n",
        "<path d=\"M2,56 l8,8 m0,-8 l-8,8\" stroke=\"#c00\" stroke-width=\"2\"/><text x=\"20\" y=\"65\">zero</text>\n",
        "<rect x=\"222\" y=\"56\" width=\"8\" height=\"8\" fill=\"#04c\"/><text x=\"240\" y=\"65\">simple pole</text>\n",
        "<path d=\"M446,54 l6,6 l-6,6 l-6,-6 z\" fill=\"#04c\"/><text x=\"460\" y=\"65\">higher pole</text>\n",
    ));
    let _ = writeln!(
        out,
        r#"<text x="0" y="85">view: center {:.4}{:+.4}i, half-width {:.4}</text>"#,
        v.center.re, v.center.im, v.half
    );
    out.push_str("</g>\n</svg>\n");
    out
}
