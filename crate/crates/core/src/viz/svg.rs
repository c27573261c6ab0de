//! Hand-written SVG output from rect, line, circle and text primitives.
//! Coordinates are printed with two decimals so output is byte-stable.

use std::fmt::Write as _;

use super::{Payload, PlotSpec, BEESWARM_SPREAD, NEGATIVE_COLOR, POSITIVE_COLOR};

const FONT: &str = "Helvetica, Arial, sans-serif";
const AXIS_COLOR: &str = "#333333";
const GRID_COLOR: &str = "#cccccc";
const NEG_RGB: (f64, f64, f64) = (0.0, 139.0, 251.0);
const POS_RGB: (f64, f64, f64) = (255.0, 0.0, 81.0);

/// Two decimals, with negative zero printed as `0.00`.
fn n(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

/// Compact human-readable number for labels.
pub(super) fn short_number(v: f64) -> String {
    let a = v.abs();
    let s = if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.3e}")
    } else {
        format!("{v:.3}")
    };
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn signed(v: f64) -> String {
    let s = short_number(v);
    if v > 0.0 {
        format!("+{s}")
    } else {
        s
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c if (c as u32) < 0x20 && c != '\t' && c != '\n' => {}
            c => out.push(c),
        }
    }
    out
}

fn hex((r, g, b): (f64, f64, f64)) -> String {
    let c = |v: f64| v.round().clamp(0.0, 255.0) as u8;
    format!("#{:02x}{:02x}{:02x}", c(r), c(g), c(b))
}

fn mix(a: (f64, f64, f64), b: (f64, f64, f64), t: f64) -> (f64, f64, f64) {
    let t = t.clamp(0.0, 1.0);
    (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t, a.2 + (b.2 - a.2) * t)
}

/// Low percentiles blue, high percentiles red.
fn percentile_color(p: f64) -> String {
    hex(mix(NEG_RGB, POS_RGB, p))
}

/// Blue at -1, white at 0, red at +1.
fn diverging_color(v: f64) -> String {
    let white = (255.0, 255.0, 255.0);
    if v < 0.0 {
        hex(mix(white, NEG_RGB, -v))
    } else {
        hex(mix(white, POS_RGB, v))
    }
}

fn sign_color(phi: f64) -> &'static str {
    if phi >= 0.0 {
        POSITIVE_COLOR
    } else {
        NEGATIVE_COLOR
    }
}

#[derive(Clone, Copy)]
enum Anchor {
    Start,
    Middle,
    End,
}

impl Anchor {
    fn name(self) -> &'static str {
        match self {
            Anchor::Start => "start",
            Anchor::Middle => "middle",
            Anchor::End => "end",
        }
    }
}

struct Canvas {
    out: String,
}

impl Canvas {
    fn new(spec: &PlotSpec) -> Canvas {
        let (w, h) = (spec.width, spec.height);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"{FONT}\">"
        );
        let mut c = Canvas { out };
        c.rect(0.0, 0.0, w as f64, h as f64, "#ffffff", None);
        c.text(w as f64 / 2.0, 28.0, 16.0, Anchor::Middle, AXIS_COLOR, &spec.title);
        c
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, tooltip: Option<&str>) {
        let _ = write!(
            self.out,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\"",
            n(x),
            n(y),
            n(w.max(0.0)),
            n(h.max(0.0))
        );
        match tooltip {
            Some(t) => {
                let _ = writeln!(self.out, "><title>{}</title></rect>", escape(t));
            }
            None => self.out.push_str("/>\n"),
        }
    }

    fn outlined_rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, stroke: &str, tooltip: &str) {
        let _ = writeln!(
            self.out,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\" stroke=\"{stroke}\" stroke-width=\"1\"><title>{}</title></rect>",
            n(x),
            n(y),
            n(w.max(0.0)),
            n(h.max(0.0)),
            escape(tooltip)
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, dashed: bool) {
        let dash = if dashed { " stroke-dasharray=\"4 3\"" } else { "" };
        let _ = writeln!(
            self.out,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{stroke}\" stroke-width=\"1\"{dash}/>",
            n(x1),
            n(y1),
            n(x2),
            n(y2)
        );
    }

    fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str) {
        let _ = writeln!(
            self.out,
            "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{fill}\" fill-opacity=\"0.85\"/>",
            n(cx),
            n(cy),
            n(r)
        );
    }

    fn text(&mut self, x: f64, y: f64, size: f64, anchor: Anchor, fill: &str, content: &str) {
        let _ = writeln!(
            self.out,
            "<text x=\"{}\" y=\"{}\" font-size=\"{}\" text-anchor=\"{}\" fill=\"{fill}\">{}</text>",
            n(x),
            n(y),
            n(size),
            anchor.name(),
            escape(content)
        );
    }

    fn rotated_text(&mut self, x: f64, y: f64, size: f64, angle: f64, anchor: Anchor, content: &str) {
        let _ = writeln!(
            self.out,
            "<text x=\"{0}\" y=\"{1}\" font-size=\"{2}\" text-anchor=\"{3}\" fill=\"{AXIS_COLOR}\" transform=\"rotate({4} {0} {1})\">{5}</text>",
            n(x),
            n(y),
            n(size),
            anchor.name(),
            n(angle),
            escape(content)
        );
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

/// Linear map from a data interval onto a pixel interval.
#[derive(Clone, Copy)]
struct Scale {
    d0: f64,
    d1: f64,
    r0: f64,
    r1: f64,
}

impl Scale {
    /// Pads degenerate and tight domains so every value lands inside.
    fn new(lo: f64, hi: f64, r0: f64, r1: f64) -> Scale {
        let (mut lo, mut hi) = if lo.is_finite() && hi.is_finite() { (lo, hi) } else { (0.0, 1.0) };
        let span = hi - lo;
        if span <= 1e-12 * lo.abs().max(hi.abs()).max(1.0) {
            let pad = (lo.abs() * 0.1).max(0.5);
            lo -= pad;
            hi += pad;
        } else {
            lo -= span * 0.05;
            hi += span * 0.05;
        }
        Scale { d0: lo, d1: hi, r0, r1 }
    }

    fn exact(lo: f64, hi: f64, r0: f64, r1: f64) -> Scale {
        Scale { d0: lo, d1: hi, r0, r1 }
    }

    fn map(&self, v: f64) -> f64 {
        self.r0 + (v - self.d0) / (self.d1 - self.d0) * (self.r1 - self.r0)
    }

    fn ticks(&self) -> Vec<f64> {
        let span = self.d1 - self.d0;
        let raw = span / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|&s| s >= raw)
            .unwrap_or(10.0 * mag);
        let first = (self.d0 / step).ceil() as i64;
        let last = (self.d1 / step).floor() as i64;
        (first..=last).map(|k| k as f64 * step).collect()
    }
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn x_axis(c: &mut Canvas, s: &Scale, y: f64, label: &str) {
    let (a, b) = (s.r0.min(s.r1), s.r0.max(s.r1));
    c.line(a, y, b, y, AXIS_COLOR, false);
    let ticks = s.ticks();
    let step = if ticks.len() > 1 { ticks[1] - ticks[0] } else { 1.0 };
    for t in ticks {
        let x = s.map(t);
        c.line(x, y, x, y + 5.0, AXIS_COLOR, false);
        c.text(x, y + 18.0, 11.0, Anchor::Middle, AXIS_COLOR, &tick_label(t, step));
    }
    if !label.is_empty() {
        c.text((a + b) / 2.0, y + 40.0, 12.0, Anchor::Middle, AXIS_COLOR, label);
    }
}

fn y_axis(c: &mut Canvas, s: &Scale, x: f64, label: &str) {
    let (a, b) = (s.r0.min(s.r1), s.r0.max(s.r1));
    c.line(x, a, x, b, AXIS_COLOR, false);
    let ticks = s.ticks();
    let step = if ticks.len() > 1 { ticks[1] - ticks[0] } else { 1.0 };
    for t in ticks {
        let y = s.map(t);
        c.line(x - 5.0, y, x, y, AXIS_COLOR, false);
        c.text(x - 8.0, y + 4.0, 11.0, Anchor::End, AXIS_COLOR, &tick_label(t, step));
    }
    if !label.is_empty() {
        c.rotated_text(x - 52.0, (a + b) / 2.0, 12.0, -90.0, Anchor::Middle, label);
    }
}

/// Vertical blue-to-red bar for percentile coloring.
fn color_bar(c: &mut Canvas, x: f64, top: f64, height: f64, label: &str) {
    const STEPS: usize = 20;
    let h = height / STEPS as f64;
    for i in 0..STEPS {
        let p = 1.0 - (i as f64 + 0.5) / STEPS as f64;
        c.rect(x, top + i as f64 * h, 12.0, h + 0.5, &percentile_color(p), None);
    }
    c.text(x + 16.0, top + 10.0, 11.0, Anchor::Start, AXIS_COLOR, "High");
    c.text(x + 16.0, top + height, 11.0, Anchor::Start, AXIS_COLOR, "Low");
    c.rotated_text(x + 40.0, top + height / 2.0, 11.0, -90.0, Anchor::Middle, label);
}

pub(super) fn render(spec: &PlotSpec) -> String {
    let mut c = Canvas::new(spec);
    let (w, h) = (spec.width as f64, spec.height as f64);
    match &spec.payload {
        Payload::SummaryBar { bars } => {
            let (left, right, top, row) = (230.0, w - 90.0, 50.0, 26.0);
            let max = bars.iter().map(|b| b.1).fold(0.0, f64::max);
            let s = Scale::exact(0.0, if max > 0.0 { max * 1.05 } else { 1.0 }, left, right);
            for (i, (label, v)) in bars.iter().enumerate() {
                let y = top + i as f64 * row;
                c.text(left - 8.0, y + row * 0.62, 12.0, Anchor::End, AXIS_COLOR, label);
                c.rect(left, y + 4.0, s.map(*v) - left, row - 8.0, NEGATIVE_COLOR, Some(&format!("{label}: {v}")));
                c.text(s.map(*v) + 4.0, y + row * 0.62, 11.0, Anchor::Start, AXIS_COLOR, &short_number(*v));
            }
            x_axis(&mut c, &s, top + bars.len().max(1) as f64 * row + 4.0, &spec.x_label);
        }
        Payload::Force { base, fx, stripes } => {
            let pos: f64 = stripes.iter().filter(|s| s.phi > 0.0).map(|s| s.phi).sum();
            let neg: f64 = stripes.iter().filter(|s| s.phi < 0.0).map(|s| -s.phi).sum();
            let lo = (fx - pos).min(*base).min(*fx);
            let hi = (fx + neg).max(*base).max(*fx);
            let s = Scale::new(lo, hi, 40.0, w - 40.0);
            let (band_y, band_h) = (92.0, 34.0);
            let mut left_edge = *fx;
            let mut right_edge = *fx;
            for st in stripes {
                let (a, b) = if st.phi > 0.0 {
                    left_edge -= st.phi;
                    (left_edge, left_edge + st.phi)
                } else {
                    right_edge -= st.phi;
                    (right_edge + st.phi, right_edge)
                };
                let (xa, xb) = (s.map(a), s.map(b));
                let label = format!("{} = {}", st.label, short_number(st.feature_value));
                c.outlined_rect(
                    xa,
                    band_y,
                    xb - xa,
                    band_h,
                    sign_color(st.phi),
                    "#ffffff",
                    &format!("{label}, SHAP {}", signed(st.phi)),
                );
                if xb - xa >= label.chars().count() as f64 * 5.8 + 8.0 {
                    c.text((xa + xb) / 2.0, band_y + band_h + 16.0, 10.0, Anchor::Middle, AXIS_COLOR, &label);
                }
            }
            let bx = s.map(*base);
            c.line(bx, band_y - 22.0, bx, band_y + band_h + 4.0, "#888888", true);
            c.text(bx, band_y - 26.0, 11.0, Anchor::Middle, "#888888", &format!("base value = {}", short_number(*base)));
            let fxx = s.map(*fx);
            c.line(fxx, band_y - 8.0, fxx, band_y + band_h, AXIS_COLOR, false);
            c.text(fxx, band_y - 12.0, 13.0, Anchor::Middle, AXIS_COLOR, &format!("f(x) = {}", short_number(*fx)));
            c.text(40.0, 56.0, 11.0, Anchor::Start, POSITIVE_COLOR, "higher");
            c.text(w - 40.0, 56.0, 11.0, Anchor::End, NEGATIVE_COLOR, "lower");
            x_axis(&mut c, &s, h - 62.0, &spec.x_label);
        }
        Payload::Waterfall {
            base,
            fx,
            steps,
            others,
        } => {
            let track = spec.waterfall_track().unwrap_or_default();
            let (left, right, top, row) = (270.0, w - 50.0, 66.0, 28.0);
            let ends = track.iter().flat_map(|&(a, b)| [a, b]).chain([*base, *fx]);
            let (lo, hi) = ends.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), v| (l.min(v), u.max(v)));
            let s = Scale::new(lo, hi, left, right);
            let labels = steps
                .iter()
                .map(|st| format!("{} = {}", st.label, short_number(st.feature_value)))
                .chain(others.iter().map(|o| format!("{} other features", o.count)));
            let bottom = top + track.len().max(1) as f64 * row;
            let bx = s.map(*base);
            c.line(bx, top - 10.0, bx, bottom, "#888888", true);
            c.text(bx, top - 14.0, 11.0, Anchor::Middle, "#888888", &format!("E[f(X)] = {}", short_number(*base)));
            for (i, ((a, b), label)) in track.iter().zip(labels).enumerate() {
                let y = top + i as f64 * row;
                let phi = b - a;
                let (xa, xb) = (s.map(a.min(*b)), s.map(a.max(*b)));
                c.text(left - 8.0, y + row * 0.62, 11.0, Anchor::End, AXIS_COLOR, &label);
                c.rect(xa, y + 4.0, (xb - xa).max(1.0), row - 8.0, sign_color(phi), Some(&format!("{label}: {}", signed(phi))));
                if phi >= 0.0 {
                    c.text(xb + 4.0, y + row * 0.62, 10.0, Anchor::Start, POSITIVE_COLOR, &signed(phi));
                } else {
                    c.text(xa - 4.0, y + row * 0.62, 10.0, Anchor::End, NEGATIVE_COLOR, &signed(phi));
                }
                if i + 1 < track.len() {
                    let xe = s.map(*b);
                    c.line(xe, y + row - 4.0, xe, y + row + 4.0, GRID_COLOR, false);
                }
            }
            let end = track.last().map_or(*base, |t| t.1);
            let ex = s.map(end);
            c.line(ex, top, ex, bottom + 6.0, AXIS_COLOR, true);
            c.text(ex, bottom + 20.0, 12.0, Anchor::Middle, AXIS_COLOR, &format!("f(x) = {}", short_number(*fx)));
            x_axis(&mut c, &s, bottom + 32.0, &spec.x_label);
        }
        Payload::Beeswarm { features, points } => {
            let (left, right, top, row) = (220.0, w - 100.0, 50.0, 34.0);
            let (lo, hi) = points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), p| (l.min(p.phi), u.max(p.phi)));
            let s = Scale::new(lo.min(0.0), hi.max(0.0), left, right);
            let bottom = top + features.len() as f64 * row;
            for (i, (name, _)) in features.iter().enumerate() {
                let yc = top + (i as f64 + 0.5) * row;
                c.line(left, yc, right, yc, "#eeeeee", false);
                c.text(left - 8.0, yc + 4.0, 11.0, Anchor::End, AXIS_COLOR, name);
            }
            let zx = s.map(0.0);
            c.line(zx, top, zx, bottom, "#999999", false);
            for p in points {
                let yc = top + (p.feature as f64 + 0.5 + p.offset.clamp(-BEESWARM_SPREAD, BEESWARM_SPREAD)) * row;
                c.circle(s.map(p.phi), yc, 2.6, &percentile_color(p.percentile));
            }
            color_bar(&mut c, right + 30.0, top, (bottom - top).max(60.0), "Feature value");
            x_axis(&mut c, &s, bottom + 6.0, &spec.x_label);
        }
        Payload::Dependence { partner, points, .. } => {
            let (left, right, top, bottom) = (90.0, w - 110.0, 50.0, h - 76.0);
            let fold = |f: fn(&super::DependencePoint) -> f64| {
                points
                    .iter()
                    .map(f)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), v| (l.min(v), u.max(v)))
            };
            let (xl, xh) = fold(|p| p.x);
            let (yl, yh) = fold(|p| p.phi);
            let sx = Scale::new(xl, xh, left, right);
            let sy = Scale::new(yl, yh, bottom, top);
            if sy.d0 <= 0.0 && 0.0 <= sy.d1 {
                let y0 = sy.map(0.0);
                c.line(left, y0, right, y0, "#999999", true);
            }
            for p in points {
                c.circle(sx.map(p.x), sy.map(p.phi), 2.8, &percentile_color(p.percentile));
            }
            color_bar(&mut c, right + 30.0, top, bottom - top, partner);
            x_axis(&mut c, &sx, bottom + 4.0, &spec.x_label);
            y_axis(&mut c, &sy, left - 4.0, &spec.y_label);
        }
        Payload::Heatmap { labels, values, constant } => {
            let k = labels.len().max(1) as f64;
            let (left, top) = (240.0, 90.0);
            let cell = (w - left - 90.0) / k;
            let font = (cell * 0.28).clamp(6.0, 13.0);
            for (i, row) in values.iter().enumerate() {
                let y = top + i as f64 * cell;
                let label = if constant[i] { format!("{} (constant)", labels[i]) } else { labels[i].clone() };
                c.text(left - 6.0, y + cell / 2.0 + 4.0, 11.0, Anchor::End, AXIS_COLOR, &label);
                for (j, &v) in row.iter().enumerate() {
                    let x = left + j as f64 * cell;
                    c.rect(x, y, cell, cell, &diverging_color(v), Some(&format!("{} / {}: {v}", labels[i], labels[j])));
                    let ink = if v.abs() > 0.6 { "#ffffff" } else { "#222222" };
                    c.text(x + cell / 2.0, y + cell / 2.0 + font * 0.35, font, Anchor::Middle, ink, &n(v));
                }
            }
            let grid_bottom = top + k * cell;
            for (j, l) in labels.iter().enumerate() {
                let x = left + (j as f64 + 0.5) * cell;
                c.rotated_text(x, grid_bottom + 10.0, 11.0, 45.0, Anchor::Start, l);
            }
            let bar_x = left + k * cell + 24.0;
            let bar_h = (k * cell).max(100.0);
            const STEPS: usize = 40;
            for i in 0..STEPS {
                let v = 1.0 - 2.0 * (i as f64 + 0.5) / STEPS as f64;
                let hh = bar_h / STEPS as f64;
                c.rect(bar_x, top + i as f64 * hh, 14.0, hh + 0.5, &diverging_color(v), None);
            }
            for (v, label) in [(1.0, "1"), (0.0, "0"), (-1.0, "-1")] {
                let y = top + (1.0 - v) / 2.0 * bar_h;
                c.text(bar_x + 20.0, y + 4.0, 11.0, Anchor::Start, AXIS_COLOR, label);
            }
        }
    }
    c.finish()
}
