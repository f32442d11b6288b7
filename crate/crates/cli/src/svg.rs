//! Minimal line/marker plots written as SVG text.

use std::fmt::Write;
use std::time::{SystemTime, UNIX_EPOCH};

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    /// Draw markers only, no connecting line.
    pub markers: bool,
}

pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Free text lines drawn in the top-right corner.
    pub notes: Vec<String>,
}

const W: f64 = 720.0;
const H: f64 = 460.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn bounds(series: &[Series]) -> (f64, f64, f64, f64) {
    let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in series.iter().flat_map(|s| s.points.iter()) {
        b = (b.0.min(x), b.1.max(x), b.2.min(y), b.3.max(y));
    }
    if !b.0.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    if b.1 - b.0 <= 0.0 {
        b.1 = b.0 + 1.0;
    }
    let pad = ((b.3 - b.2) * 0.05).max(1e-6);
    (b.0, b.1, b.2 - pad, b.3 + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    /// Renders the plot. The second line is a timestamp comment, the only
    /// part that differs between identical runs.
    pub fn render(&self) -> String {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        self.render_with_stamp(stamp)
    }

    pub fn render_with_stamp(&self, stamp: u64) -> String {
        let (x0, x1, y0, y1) = bounds(&self.series);
        let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
        let py = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);
        let mut s = String::new();
        writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#).unwrap();
        writeln!(s, "<!-- generated at unix time {stamp} -->").unwrap();
        writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
        writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(&self.title)).unwrap();
        writeln!(
            s,
            r#"<polyline fill="none" stroke="black" points="{},{} {},{} {},{}"/>"#,
            LEFT,
            TOP,
            LEFT,
            H - BOTTOM,
            W - RIGHT,
            H - BOTTOM
        )
        .unwrap();
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, px(xv), H - BOTTOM + 18.0, tick(xv)).unwrap();
            writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, LEFT - 6.0, py(yv) + 4.0, tick(yv)).unwrap();
        }
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (LEFT + W - RIGHT) / 2.0, H - 16.0, escape(&self.x_label)).unwrap();
        writeln!(
            s,
            r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
            (TOP + H - BOTTOM) / 2.0,
            (TOP + H - BOTTOM) / 2.0,
            escape(&self.y_label)
        )
        .unwrap();
        for (k, series) in self.series.iter().enumerate() {
            if series.markers {
                for &(x, y) in &series.points {
                    writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#, px(x), py(y), series.color).unwrap();
                }
            } else {
                let pts: Vec<String> = series.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
                writeln!(s, r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#, series.color, pts.join(" ")).unwrap();
            }
            let ly = TOP + 14.0 + 16.0 * k as f64;
            writeln!(s, r#"<text x="{}" y="{ly}" fill="{}">{}</text>"#, LEFT + 10.0, series.color, escape(&series.name)).unwrap();
        }
        for (k, note) in self.notes.iter().enumerate() {
            let ly = TOP + 14.0 + 16.0 * k as f64;
            writeln!(s, r#"<text x="{}" y="{ly}" text-anchor="end">{}</text>"#, W - RIGHT - 6.0, escape(note)).unwrap();
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.4}")
    }
}

/// Drops the timestamp comment so two renders can be compared.
pub fn strip_timestamp(svg: &str) -> String {
    svg.lines().filter(|l| !l.starts_with("<!-- generated at")).collect::<Vec<_>>().join("\n")
}
