//! Figure data as CSV (one column per curve) plus a plain SVG line plot.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub struct Curve {
    pub name: String,
    pub y: Vec<f64>,
}

/// Curves sharing one x grid.
pub struct Plot {
    /// File stem for the CSV and SVG outputs.
    pub stem: String,
    pub title: String,
    pub x_label: String,
    pub x: Vec<f64>,
    pub curves: Vec<Curve>,
}

impl Plot {
    pub fn new(stem: &str, title: &str, x_label: &str, x: Vec<f64>) -> Self {
        Self {
            stem: stem.to_string(),
            title: title.to_string(),
            x_label: x_label.to_string(),
            x,
            curves: Vec::new(),
        }
    }

    pub fn curve(mut self, name: impl Into<String>, y: Vec<f64>) -> Self {
        debug_assert_eq!(y.len(), self.x.len());
        self.curves.push(Curve { name: name.into(), y });
        self
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.x_label.clone();
        for c in &self.curves {
            out.push(',');
            out.push_str(&c.name);
        }
        out.push('\n');
        for (i, x) in self.x.iter().enumerate() {
            let _ = write!(out, "{x:.16e}");
            for c in &self.curves {
                let _ = write!(out, ",{:.16e}", c.y[i]);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const PAD_L: f64 = 70.0;
        const PAD_R: f64 = 150.0;
        const PAD_T: f64 = 30.0;
        const PAD_B: f64 = 45.0;
        const COLORS: [&str; 8] = [
            "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
        ];

        let (x0, x1) = finite_range(self.x.iter());
        let (y0, y1) = finite_range(self.curves.iter().flat_map(|c| c.y.iter()));
        let sx = |x: f64| PAD_L + (x - x0) / (x1 - x0) * (W - PAD_L - PAD_R);
        let sy = |y: f64| H - PAD_B - (y - y0) / (y1 - y0) * (H - PAD_T - PAD_B);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#, (PAD_L + W - PAD_R) / 2.0, escape(&self.title));
        let (bx, by, bw, bh) = (PAD_L, PAD_T, W - PAD_L - PAD_R, H - PAD_T - PAD_B);
        let _ = writeln!(s, r#"<rect x="{bx}" y="{by}" width="{bw}" height="{bh}" fill="none" stroke="black"/>"#);
        for (v, anchor) in [(x0, "start"), (x1, "end")] {
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="{anchor}">{}</text>"#, sx(v), H - PAD_B + 14.0, tick(v));
        }
        for v in [y0, y1] {
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, PAD_L - 4.0, sy(v) + 4.0, tick(v));
        }
        if y0 < 0.0 && y1 > 0.0 {
            let _ = writeln!(s, r##"<line x1="{bx}" x2="{}" y1="{:.1}" y2="{:.1}" stroke="#bbb" stroke-dasharray="3,3"/>"##, bx + bw, sy(0.0), sy(0.0));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, bx + bw / 2.0, H - 8.0, escape(&self.x_label));

        for (k, c) in self.curves.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            // Non-finite points break the line into separate segments.
            let mut segments: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
            for (x, y) in self.x.iter().zip(&c.y) {
                if x.is_finite() && y.is_finite() {
                    segments.last_mut().unwrap().push((sx(*x), sy(*y)));
                } else if !segments.last().unwrap().is_empty() {
                    segments.push(Vec::new());
                }
            }
            for seg in segments.iter().filter(|s| !s.is_empty()) {
                let pts: Vec<String> = seg.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#, pts.join(" "));
            }
            let ly = PAD_T + 12.0 + 16.0 * k as f64;
            let lx = W - PAD_R + 10.0;
            let _ = writeln!(s, r#"<line x1="{lx}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 18.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 22.0, ly + 4.0, escape(&c.name));
        }
        s.push_str("</svg>\n");
        s
    }

    /// Writes `<stem>.csv` and `<stem>.svg` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let csv = dir.join(format!("{}.csv", self.stem));
        let svg = dir.join(format!("{}.svg", self.stem));
        fs::write(&csv, self.to_csv()).with_context(|| format!("writing {}", csv.display()))?;
        fs::write(&svg, self.to_svg()).with_context(|| format!("writing {}", svg.display()))?;
        Ok(vec![csv, svg])
    }
}

fn finite_range<'a>(vals: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
