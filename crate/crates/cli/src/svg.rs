//! Minimal hand-written SVG charts: lines, points, shaded bands and bars with
//! an optional secondary y axis.

use std::fmt::Write;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 70.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

pub const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#7f7f7f",
];

enum Kind {
    Line,
    Points,
    Band { upper: Vec<f64> },
    Bars,
}

struct Series {
    label: String,
    color: String,
    kind: Kind,
    xs: Vec<f64>,
    ys: Vec<f64>,
    secondary: bool,
}

pub struct Chart {
    title: String,
    x_label: String,
    y_label: String,
    y2_label: Option<String>,
    series: Vec<Series>,
}

#[derive(Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of<'a>(values: impl Iterator<Item = &'a f64>) -> Option<Range> {
        let (lo, hi) = values
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if lo > hi {
            return None;
        }
        if lo == hi {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
            return Some(Range {
                lo: lo - pad,
                hi: hi + pad,
            });
        }
        let pad = (hi - lo) * 0.05;
        Some(Range {
            lo: lo - pad,
            hi: hi + pad,
        })
    }

    fn including_zero(self) -> Range {
        Range {
            lo: self.lo.min(0.0),
            hi: self.hi.max(0.0),
        }
    }

    fn map(&self, v: f64, from: f64, to: f64) -> f64 {
        from + (v - self.lo) / (self.hi - self.lo) * (to - from)
    }

    /// Tick positions at 1, 2 or 5 times a power of ten.
    fn ticks(&self) -> Vec<f64> {
        let raw = (self.hi - self.lo) / 6.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let first = (self.lo / step).ceil();
        let last = (self.hi / step + 1e-9).floor();
        // multiples of the step, not a running sum, so labels do not drift
        (first as i64..=last as i64)
            .map(|i| if i == 0 { 0.0 } else { i as f64 * step })
            .collect()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn label(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

impl Chart {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Chart {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            y2_label: None,
            series: Vec::new(),
        }
    }

    pub fn secondary_axis(mut self, label: &str) -> Self {
        self.y2_label = Some(label.into());
        self
    }

    fn push(
        &mut self,
        label: &str,
        color: &str,
        kind: Kind,
        xs: &[f64],
        ys: &[f64],
        secondary: bool,
    ) {
        self.series.push(Series {
            label: label.into(),
            color: color.into(),
            kind,
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            secondary,
        });
    }

    pub fn line(&mut self, label: &str, color: &str, xs: &[f64], ys: &[f64]) {
        self.push(label, color, Kind::Line, xs, ys, false);
    }

    pub fn line_secondary(&mut self, label: &str, color: &str, xs: &[f64], ys: &[f64]) {
        self.push(label, color, Kind::Line, xs, ys, true);
    }

    pub fn points(&mut self, label: &str, color: &str, xs: &[f64], ys: &[f64]) {
        self.push(label, color, Kind::Points, xs, ys, false);
    }

    pub fn band(&mut self, label: &str, color: &str, xs: &[f64], lower: &[f64], upper: &[f64]) {
        self.push(
            label,
            color,
            Kind::Band {
                upper: upper.to_vec(),
            },
            xs,
            lower,
            false,
        );
    }

    pub fn bars(&mut self, label: &str, color: &str, xs: &[f64], heights: &[f64]) {
        self.push(label, color, Kind::Bars, xs, heights, false);
    }

    fn y_range(&self, secondary: bool) -> Option<Range> {
        let mut values: Vec<f64> = Vec::new();
        let mut has_bars = false;
        for s in self.series.iter().filter(|s| s.secondary == secondary) {
            values.extend(&s.ys);
            match &s.kind {
                Kind::Band { upper } => values.extend(upper),
                Kind::Bars => has_bars = true,
                _ => {}
            }
        }
        let r = Range::of(values.iter())?;
        Some(if has_bars { r.including_zero() } else { r })
    }

    pub fn render(&self) -> String {
        let x_left = LEFT;
        let x_right = WIDTH - RIGHT;
        let y_top = TOP;
        let y_bottom = HEIGHT - BOTTOM;
        let bar_xs: Vec<f64> = self
            .series
            .iter()
            .filter(|s| matches!(s.kind, Kind::Bars))
            .flat_map(|s| s.xs.iter().flat_map(|x| [x - 0.5, x + 0.5]))
            .collect();
        let xr = Range::of(
            self.series
                .iter()
                .flat_map(|s| s.xs.iter())
                .chain(bar_xs.iter()),
        )
        .unwrap_or(Range { lo: 0.0, hi: 1.0 });
        let yr = self.y_range(false).unwrap_or(Range { lo: 0.0, hi: 1.0 });
        let y2r = self.y_range(true);
        let px = |x: f64| xr.map(x, x_left, x_right);
        let py = |y: f64, secondary: bool| {
            let r = if secondary { y2r.unwrap_or(yr) } else { yr };
            r.map(y.clamp(r.lo, r.hi), y_bottom, y_top)
        };

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );

        for s in &self.series {
            match &s.kind {
                Kind::Band { upper } => {
                    let mut pts: Vec<String> =
                        s.xs.iter()
                            .zip(upper)
                            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y, s.secondary)))
                            .collect();
                    pts.extend(
                        s.xs.iter()
                            .zip(&s.ys)
                            .rev()
                            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y, s.secondary))),
                    );
                    let _ = writeln!(
                        svg,
                        r#"<polygon points="{}" fill="{}" fill-opacity="0.25" stroke="none"/>"#,
                        pts.join(" "),
                        s.color
                    );
                }
                Kind::Bars => {
                    let w = (px(1.0) - px(0.0)).abs() * 0.8;
                    for (&x, &h) in s.xs.iter().zip(&s.ys) {
                        let (y0, y1) = (py(0.0, s.secondary), py(h, s.secondary));
                        let _ = writeln!(
                            svg,
                            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                            px(x) - w / 2.0,
                            y0.min(y1),
                            w,
                            (y0 - y1).abs(),
                            s.color
                        );
                    }
                }
                Kind::Line => {
                    let pts: Vec<String> =
                        s.xs.iter()
                            .zip(&s.ys)
                            .filter(|(x, y)| x.is_finite() && y.is_finite())
                            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y, s.secondary)))
                            .collect();
                    let dash = if s.secondary {
                        r#" stroke-dasharray="6 4""#
                    } else {
                        ""
                    };
                    let _ = writeln!(
                        svg,
                        r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"{dash}/>"#,
                        pts.join(" "),
                        s.color
                    );
                }
                Kind::Points => {
                    for (&x, &y) in s.xs.iter().zip(&s.ys) {
                        let _ = writeln!(
                            svg,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}" fill-opacity="0.7"/>"#,
                            px(x),
                            py(y, s.secondary),
                            s.color
                        );
                    }
                }
            }
        }

        // axes
        let _ = writeln!(
            svg,
            r#"<path d="M{x_left},{y_top} V{y_bottom} H{x_right}" fill="none" stroke="black"/>"#
        );
        for t in xr.ticks() {
            let x = px(t);
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.2}" y1="{y_bottom}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
                y_bottom + 5.0,
                y_bottom + 18.0,
                label(t)
            );
        }
        for t in yr.ticks() {
            let y = py(t, false);
            let _ = writeln!(
                svg,
                r#"<line x1="{}" y1="{y:.2}" x2="{x_left}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
                x_left - 5.0,
                x_left - 8.0,
                y + 4.0,
                label(t)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (x_left + x_right) / 2.0,
            HEIGHT - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text transform="translate(18,{}) rotate(-90)" text-anchor="middle">{}</text>"#,
            (y_top + y_bottom) / 2.0,
            escape(&self.y_label)
        );
        if let (Some(r), Some(l)) = (y2r, &self.y2_label) {
            let _ = writeln!(
                svg,
                r#"<path d="M{x_right},{y_top} V{y_bottom}" fill="none" stroke="black"/>"#
            );
            for t in r.ticks() {
                let y = py(t, true);
                let _ = writeln!(
                    svg,
                    r#"<line x1="{x_right}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}">{}</text>"#,
                    x_right + 5.0,
                    x_right + 8.0,
                    y + 4.0,
                    label(t)
                );
            }
            let _ = writeln!(
                svg,
                r#"<text transform="translate({},{}) rotate(90)" text-anchor="middle">{}</text>"#,
                WIDTH - 15.0,
                (y_top + y_bottom) / 2.0,
                escape(l)
            );
        }

        // legend
        for (i, s) in self.series.iter().enumerate() {
            let y = y_top + 8.0 + 16.0 * i as f64;
            let _ = writeln!(
                svg,
                r#"<rect x="{}" y="{}" width="12" height="8" fill="{}"/><text x="{}" y="{}">{}</text>"#,
                x_left + 12.0,
                y - 7.0,
                s.color,
                x_left + 30.0,
                y + 1.0,
                escape(&s.label)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}
