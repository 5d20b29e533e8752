//! Minimal SVG output: line charts with optional log axes and contour maps.

use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub fn write_file(path: &Path, svg: &str) -> Result<(), CliError> {
    std::fs::write(path, svg).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Maps data coordinates to the plotting area.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn open(svg: &mut String, title: &str) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        (WIDTH - MARGIN_RIGHT + MARGIN_LEFT) / 2.0,
        escape(title)
    );
}

fn axes(
    svg: &mut String,
    frame: &Frame,
    x_label: &str,
    y_label: &str,
    x_ticks: &[(f64, String)],
    y_ticks: &[(f64, String)],
) {
    let (x0, x1) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (y0, y1) = (HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);
    let _ = writeln!(
        svg,
        r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for (v, label) in x_ticks {
        let x = frame.px(*v);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/>"#,
            y0 + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            y0 + 19.0,
            escape(label)
        );
    }
    for (v, label) in y_ticks {
        let y = frame.py(*v);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#,
            x0 - 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 8.0,
            y + 4.0,
            escape(label)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut ticks = Vec::new();
    let mut v = (lo / step).ceil() * step;
    while v <= hi + 1e-9 * span {
        let v_clean = if v.abs() < 1e-12 * span { 0.0 } else { v };
        ticks.push((v_clean, format!("{}", (v_clean / step).round() * step)));
        v += step;
    }
    ticks
}

/// Ticks at the powers of ten inside `[lo, hi]`, both given as log10 values.
fn log_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let mut ticks: Vec<(f64, String)> = (lo.ceil() as i32..=hi.floor() as i32)
        .map(|e| (e as f64, format!("1e{e}")))
        .collect();
    if ticks.len() < 2 {
        ticks = vec![
            (lo, format!("{:.3}", 10f64.powf(lo))),
            (hi, format!("{:.3}", 10f64.powf(hi))),
        ];
    }
    ticks
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

impl LinePlot {
    pub fn to_svg(&self) -> String {
        let tx = |v: f64| if self.log_x { v.log10() } else { v };
        let ty = |v: f64| if self.log_y { v.log10() } else { v };
        let pts: Vec<Vec<(f64, f64)>> = self
            .series
            .iter()
            .map(|s| {
                s.points
                    .iter()
                    .map(|&(x, y)| (tx(x), ty(y)))
                    .filter(|(x, y)| x.is_finite() && y.is_finite())
                    .collect()
            })
            .collect();
        let all = pts.iter().flatten();
        let (mut xl, mut xh, mut yl, mut yh) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in all {
            xl = xl.min(x);
            xh = xh.max(x);
            yl = yl.min(y);
            yh = yh.max(y);
        }
        if !xl.is_finite() {
            (xl, xh, yl, yh) = (0.0, 1.0, 0.0, 1.0);
        }
        let ypad = 0.05 * (yh - yl).max(1e-12);
        let frame = Frame {
            x: padded(xl, xh),
            y: padded(yl - ypad, yh + ypad),
        };
        let x_ticks = if self.log_x {
            log_ticks(frame.x.0, frame.x.1)
        } else {
            linear_ticks(frame.x.0, frame.x.1)
        };
        let y_ticks = if self.log_y {
            log_ticks(frame.y.0, frame.y.1)
        } else {
            linear_ticks(frame.y.0, frame.y.1)
        };

        let mut svg = String::new();
        open(&mut svg, &self.title);
        axes(&mut svg, &frame, &self.x_label, &self.y_label, &x_ticks, &y_ticks);
        for (i, (series, points)) in self.series.iter().zip(&pts).enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let path: Vec<String> = points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                path.join(" ")
            );
            for &(x, y) in points {
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                    frame.px(x),
                    frame.py(y)
                );
            }
            let ly = MARGIN_TOP + 10.0 + 18.0 * i as f64;
            let lx = WIDTH - MARGIN_RIGHT + 12.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
                lx + 20.0
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}">{}</text>"#,
                lx + 26.0,
                ly + 4.0,
                escape(&series.name)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Marker {
    pub label: String,
    pub x: f64,
    pub y: f64,
}

/// Contour lines of `values[j][i]` sampled at `(xs[i], ys[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourPlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub levels: Vec<f64>,
    pub markers: Vec<Marker>,
}

/// `n` levels evenly spaced strictly inside the range of `values`.
pub fn even_levels(values: &[Vec<f64>], n: usize) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .flatten()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if hi <= lo {
        return Vec::new();
    }
    (1..=n).map(|k| lo + (hi - lo) * k as f64 / (n + 1) as f64).collect()
}

type Segment = ((f64, f64), (f64, f64));

/// Marching squares over one level. Saddle cells are resolved with the cell
/// center average.
pub fn contour_segments(xs: &[f64], ys: &[f64], values: &[Vec<f64>], level: f64) -> Vec<Segment> {
    let mut out = Vec::new();
    if xs.len() < 2 || ys.len() < 2 {
        return out;
    }
    let lerp = |a: (f64, f64, f64), b: (f64, f64, f64)| {
        let t = if b.2 == a.2 { 0.5 } else { (level - a.2) / (b.2 - a.2) };
        (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
    };
    for j in 0..ys.len() - 1 {
        for i in 0..xs.len() - 1 {
            // Corners counter-clockwise from bottom-left.
            let c = [
                (xs[i], ys[j], values[j][i]),
                (xs[i + 1], ys[j], values[j][i + 1]),
                (xs[i + 1], ys[j + 1], values[j + 1][i + 1]),
                (xs[i], ys[j + 1], values[j + 1][i]),
            ];
            if c.iter().any(|p| !p.2.is_finite()) {
                continue;
            }
            let above: Vec<bool> = c.iter().map(|p| p.2 > level).collect();
            let edge = |k: usize| lerp(c[k], c[(k + 1) % 4]);
            let crossing: Vec<usize> = (0..4).filter(|&k| above[k] != above[(k + 1) % 4]).collect();
            match crossing.len() {
                2 => out.push((edge(crossing[0]), edge(crossing[1]))),
                4 => {
                    let center = c.iter().map(|p| p.2).sum::<f64>() / 4.0;
                    if (center > level) == above[0] {
                        out.push((edge(0), edge(1)));
                        out.push((edge(2), edge(3)));
                    } else {
                        out.push((edge(3), edge(0)));
                        out.push((edge(1), edge(2)));
                    }
                }
                _ => {}
            }
        }
    }
    out
}

impl ContourPlot {
    pub fn to_svg(&self) -> String {
        let frame = Frame {
            x: padded(self.xs[0], *self.xs.last().expect("nonempty grid")),
            y: padded(self.ys[0], *self.ys.last().expect("nonempty grid")),
        };
        let mut svg = String::new();
        open(&mut svg, &self.title);
        axes(
            &mut svg,
            &frame,
            &self.x_label,
            &self.y_label,
            &linear_ticks(frame.x.0, frame.x.1),
            &linear_ticks(frame.y.0, frame.y.1),
        );
        let n = self.levels.len().max(1);
        for (k, &level) in self.levels.iter().enumerate() {
            let shade = (40.0 + 180.0 * k as f64 / n as f64) as u8;
            let mut d = String::new();
            for ((x0, y0), (x1, y1)) in contour_segments(&self.xs, &self.ys, &self.values, level) {
                let _ = write!(
                    d,
                    "M{:.2} {:.2}L{:.2} {:.2}",
                    frame.px(x0),
                    frame.py(y0),
                    frame.px(x1),
                    frame.py(y1)
                );
            }
            if !d.is_empty() {
                let _ = writeln!(
                    svg,
                    r#"<path d="{d}" fill="none" stroke="rgb({shade},{},{})" stroke-width="1"/>"#,
                    80,
                    255 - shade
                );
            }
        }
        for (i, m) in self.markers.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let (x, y) = (frame.px(m.x), frame.py(m.y));
            let _ = writeln!(
                svg,
                r#"<path d="M{} {}L{} {}M{} {}L{} {}" stroke="{color}" stroke-width="2.5"/>"#,
                x - 6.0,
                y - 6.0,
                x + 6.0,
                y + 6.0,
                x - 6.0,
                y + 6.0,
                x + 6.0,
                y - 6.0
            );
            let ly = MARGIN_TOP + 10.0 + 18.0 * i as f64;
            let lx = WIDTH - MARGIN_RIGHT + 12.0;
            let _ = writeln!(
                svg,
                r#"<text x="{lx}" y="{}" fill="{color}">x {}</text>"#,
                ly + 4.0,
                escape(&m.label)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}
