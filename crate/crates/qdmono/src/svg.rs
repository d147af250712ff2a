//! Deterministic SVG of the λ-plane: reference paths, canonical coordinates and Stokes rays.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64 as C64;
use qdmono_core::paths::DistinguishedSystem;

use crate::Error;

pub const CANVAS: f64 = 800.0;
const MARGIN: f64 = 40.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

struct Frame {
    center: C64,
    scale: f64,
}

impl Frame {
    fn fit(points: &[C64]) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in points {
            x0 = x0.min(p.re);
            x1 = x1.max(p.re);
            y0 = y0.min(p.im);
            y1 = y1.max(p.im);
        }
        let span = (x1 - x0).max(y1 - y0).max(1e-9);
        Frame { center: C64::new(0.5 * (x0 + x1), 0.5 * (y0 + y1)), scale: (CANVAS - 2.0 * MARGIN) / span }
    }

    fn map(&self, p: C64) -> (f64, f64) {
        let d = (p - self.center) * self.scale;
        (CANVAS / 2.0 + d.re, CANVAS / 2.0 - d.im)
    }
}

/// Stokes rays are drawn from the origin in the given directions (arguments in radians).
pub fn render_svg(system: &DistinguishedSystem, u: &[C64], stokes_rays: &[f64]) -> String {
    let mut pts: Vec<C64> = u.to_vec();
    for p in &system.paths {
        pts.extend_from_slice(&p.waypoints);
    }
    pts.push(C64::new(0.0, 0.0));
    pts.push(C64::new(system.lambda0, 0.0));
    let fr = Frame::fit(&pts);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="800" viewBox="0 0 800 800">"#);
    let _ = writeln!(s, r##"<rect width="800" height="800" fill="#ffffff"/>"##);
    let (ox, oy) = fr.map(C64::new(0.0, 0.0));
    let _ = writeln!(s, r##"<g id="axes" stroke="#bbbbbb" stroke-width="1"><line x1="0" y1="{oy:.2}" x2="800" y2="{oy:.2}"/><line x1="{ox:.2}" y1="0" x2="{ox:.2}" y2="800"/></g>"##);
    let r = system.lambda0 * fr.scale;
    let _ = writeln!(s, r##"<circle id="base-circle" cx="{ox:.2}" cy="{oy:.2}" r="{r:.2}" fill="none" stroke="#dddddd" stroke-width="1"/>"##);
    let _ = writeln!(s, r##"<g id="stokes-rays" stroke="#888888" stroke-width="1" stroke-dasharray="6 4">"##);
    for &a in stokes_rays {
        let (x, y) = (ox + 2.0 * CANVAS * a.cos(), oy - 2.0 * CANVAS * a.sin());
        let _ = writeln!(s, r#"<line class="ray" x1="{ox:.2}" y1="{oy:.2}" x2="{x:.2}" y2="{y:.2}"/>"#);
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g id="paths" fill="none" stroke-width="2">"#);
    for (k, p) in system.paths.iter().enumerate() {
        let d: Vec<String> = p
            .waypoints
            .iter()
            .enumerate()
            .map(|(j, w)| {
                let (x, y) = fr.map(*w);
                format!("{}{x:.2},{y:.2}", if j == 0 { 'M' } else { 'L' })
            })
            .collect();
        let _ = writeln!(s, r#"<path class="ref-path" stroke="{}" d="{}"/>"#, PALETTE[k % PALETTE.len()], d.join(" "));
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r##"<g id="points" font-family="sans-serif" font-size="14" fill="#000000">"##);
    for (i, p) in u.iter().enumerate() {
        let (x, y) = fr.map(*p);
        let _ = writeln!(s, r#"<circle class="u-point" cx="{x:.2}" cy="{y:.2}" r="4"/><text x="{:.2}" y="{:.2}">u{}</text>"#, x + 6.0, y - 6.0, i + 1);
    }
    let (bx, by) = fr.map(C64::new(system.lambda0, 0.0));
    let _ = writeln!(s, r#"<rect class="base" x="{:.2}" y="{:.2}" width="8" height="8"/><text x="{:.2}" y="{:.2}">λ°</text>"#, bx - 4.0, by - 4.0, bx + 6.0, by + 16.0);
    let _ = writeln!(s, "</g>\n</svg>");
    s
}

pub fn write_svg(path: &Path, svg: &str) -> Result<(), Error> {
    std::fs::write(path, svg).map_err(|e| Error::Io(path.display().to_string(), e))
}
