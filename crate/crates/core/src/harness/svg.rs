use std::fmt::Write as _;

use crate::geom::SpherePoint;
use crate::solver::FixReport;

use super::{RunReport, TaskOutput};

const SIZE: f64 = 800.0;
const FAR: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Projection {
    /// Centered on the north pole (projection from the south pole).
    StereographicNorth,
    /// Centered on the south pole (projection from the north pole).
    StereographicSouth,
    /// Hemisphere facing `axis`.
    Orthographic(SpherePoint),
}

impl Projection {
    pub fn parse(s: &str) -> Option<Projection> {
        match s {
            "stereographic_north" | "north" => Some(Projection::StereographicNorth),
            "stereographic_south" | "south" => Some(Projection::StereographicSouth),
            _ => {
                let rest = s.strip_prefix("orthographic")?;
                if rest.is_empty() {
                    return Some(Projection::Orthographic(SpherePoint::north()));
                }
                let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
                let c: Vec<f64> = inner
                    .split(',')
                    .map(|t| t.trim().parse().ok())
                    .collect::<Option<_>>()?;
                if c.len() != 3 {
                    return None;
                }
                SpherePoint::new(c[0], c[1], c[2])
                    .ok()
                    .map(Projection::Orthographic)
            }
        }
    }

    fn extent(&self) -> f64 {
        match self {
            Projection::Orthographic(_) => 1.05,
            _ => 2.2,
        }
    }

    /// Plane coordinates, or `None` on the hidden hemisphere.
    fn plane(&self, x: &SpherePoint) -> Option<(f64, f64)> {
        match self {
            Projection::StereographicNorth => {
                let d = 1.0 + x.z();
                Some(if d < 1.0 / FAR {
                    (FAR, FAR)
                } else {
                    (x.x() / d, x.y() / d)
                })
            }
            Projection::StereographicSouth => {
                let d = 1.0 - x.z();
                Some(if d < 1.0 / FAR {
                    (FAR, FAR)
                } else {
                    (x.x() / d, -x.y() / d)
                })
            }
            Projection::Orthographic(axis) => {
                if x.dot(axis) < 0.0 {
                    return None;
                }
                let (e1, e2) = axis.tangent_frame();
                Some((x.vec().dot(&e1), x.vec().dot(&e2)))
            }
        }
    }

    fn canvas(&self, (u, v): (f64, f64)) -> (f64, f64) {
        let s = 0.5 * SIZE * 0.95 / self.extent();
        (0.5 * SIZE + s * u, 0.5 * SIZE - s * v)
    }

    fn visible(&self, x: &SpherePoint) -> Option<(f64, f64)> {
        let (u, v) = self.plane(x)?;
        let e = self.extent();
        (u.abs() <= e && v.abs() <= e).then(|| self.canvas((u, v)))
    }
}

struct Canvas {
    proj: Projection,
    body: String,
}

impl Canvas {
    fn path(&mut self, points: &[SpherePoint], closed: bool, class: &str) {
        let mut d = String::new();
        let mut pen_down = false;
        let mut all_visible = true;
        for p in points {
            match self.proj.visible(p) {
                Some((x, y)) => {
                    let _ = write!(d, "{}{x:.3},{y:.3} ", if pen_down { 'L' } else { 'M' });
                    pen_down = true;
                }
                None => {
                    pen_down = false;
                    all_visible = false;
                }
            }
        }
        if d.is_empty() {
            return;
        }
        if closed && all_visible {
            d.push('Z');
        }
        let _ = writeln!(self.body, r#"<path class="{class}" d="{}"/>"#, d.trim_end());
    }

    fn dots(&mut self, points: &[SpherePoint], class: &str) {
        let _ = writeln!(self.body, r#"<g class="{class}">"#);
        for p in points {
            if let Some((x, y)) = self.proj.visible(p) {
                let _ = writeln!(self.body, r#"<circle cx="{x:.3}" cy="{y:.3}" r="1.2"/>"#);
            }
        }
        let _ = writeln!(self.body, "</g>");
    }

    /// Marks a point; points off the view are pinned to the frame.
    fn marker(&mut self, p: &SpherePoint, class: &str, label: &str) {
        let (x, y, off) = match self.proj.visible(p) {
            Some((x, y)) => (x, y, false),
            None => {
                let (u, v) = self.proj.plane(p).unwrap_or((FAR, FAR));
                let e = self.proj.extent();
                let m = u.abs().max(v.abs()).max(e);
                let (x, y) = self.proj.canvas((u / m * e * 0.98, v / m * e * 0.98));
                (x, y, true)
            }
        };
        let extra = if off { " off-view" } else { "" };
        let _ = writeln!(
            self.body,
            r#"<g class="{class}{extra}"><path d="M{:.3},{:.3} L{:.3},{:.3} M{:.3},{:.3} L{:.3},{:.3}"/><text x="{:.3}" y="{:.3}">{label}</text></g>"#,
            x - 6.0,
            y - 6.0,
            x + 6.0,
            y + 6.0,
            x - 6.0,
            y + 6.0,
            x + 6.0,
            y - 6.0,
            x + 8.0,
            y - 8.0,
        );
    }

    fn fix_report(&mut self, r: &FixReport, label: &str) {
        for s in &r.trace {
            self.path(&s.loop_vertices, true, "disk");
            self.marker(&s.base, "base-point", &format!("{}@{}", s.map, s.id));
        }
        self.marker(&r.point, "fixed-point", label);
    }
}

const STYLE: &str = "path{fill:none;stroke-linejoin:round}\
.frame{fill:#fff;stroke:#000}.reference{fill:none;stroke:#bbb;stroke-dasharray:4 3}\
.orbit{stroke:#999;stroke-width:0.6}.orbit-points{fill:#555}\
.polyline{stroke:#888;stroke-width:0.8}.loop{stroke:#1f4e9c;stroke-width:2.2}\
.disk{fill:#1f4e9c;fill-opacity:0.12;stroke:#1f4e9c;stroke-width:1.2}\
.fixed-point path{stroke:#c0392b;stroke-width:2.5}.base-point path{stroke:#27ae60;stroke-width:1.5}\
text{font:11px sans-serif}";

/// Deterministic SVG figure of the curves, orbits and points in a report.
pub fn render_svg(report: &RunReport, projection: Projection) -> String {
    let mut c = Canvas {
        proj: projection,
        body: String::new(),
    };
    match &report.output {
        Some(TaskOutput::Orbit { record, .. }) => {
            c.path(&record.points, false, "orbit");
            c.dots(&record.points, "orbit-points");
            c.marker(&record.base, "base-point", "p");
        }
        Some(TaskOutput::Curve { curve, .. }) => {
            c.path(curve.loop_.vertices(), true, "disk");
            c.path(curve.polyline.vertices(), false, "polyline");
            c.path(curve.loop_.vertices(), true, "loop");
            c.marker(&curve.base, "base-point", "p");
        }
        Some(TaskOutput::Fix {
            report: r,
            cross_check,
            ..
        }) => {
            c.fix_report(r, "x");
            if let Some(o) = cross_check {
                c.marker(&o.point, "fixed-point", "x'");
            }
        }
        Some(TaskOutput::Fix2 { reports, .. }) => {
            if let Some(s) = reports[0].trace.first() {
                c.path(&s.loop_vertices, true, "loop");
            }
            c.fix_report(&reports[0], "x₀");
            c.fix_report(&reports[1], "x₁");
        }
        Some(TaskOutput::VerifyLemmas { pairs, .. }) => {
            for p in pairs {
                c.path(&p.curves[0], true, "loop");
                c.path(&p.curves[1], true, "loop");
            }
        }
        _ => {}
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, "<style>{STYLE}</style>");
    let _ = writeln!(
        out,
        r#"<rect class="frame" x="0.5" y="0.5" width="{}" height="{}"/>"#,
        SIZE - 1.0,
        SIZE - 1.0
    );
    let (cx, cy) = projection.canvas((0.0, 0.0));
    let (rx, _) = projection.canvas((1.0, 0.0));
    let _ = writeln!(
        out,
        r#"<circle class="reference" cx="{cx:.3}" cy="{cy:.3}" r="{:.3}"/>"#,
        rx - cx
    );
    out.push_str(&c.body);
    out.push_str("</svg>\n");
    out
}
