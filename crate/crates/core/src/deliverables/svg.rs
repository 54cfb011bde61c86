//! Deterministic SVG rendering of plot documents.

use std::fmt::Write as _;

use quick_xml::escape::escape;

use super::doc::{Axis, MatrixPanel, PlotDocument, PlotKind, Scale, Series};

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];
const VIRIDIS: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];
const MISSING_FILL: &str = "#dddddd";

fn f(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

/// Tick label text.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        return String::new();
    }
    if v.fract() == 0.0 && v.abs() < 1e9 {
        return format!("{v:.0}");
    }
    let a = v.abs();
    let s = if (1e-3..1e6).contains(&a) { format!("{v:.3}") } else { format!("{v:.2e}") };
    if s.contains('e') {
        s
    } else {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn transform(scale: Scale, v: f64) -> Option<f64> {
    let t = match scale {
        Scale::Linear => v,
        Scale::Log2 if v > 0.0 => v.log2(),
        Scale::Log10 if v > 0.0 => v.log10(),
        _ => return None,
    };
    t.is_finite().then_some(t)
}

fn inverse(scale: Scale, t: f64) -> f64 {
    match scale {
        Scale::Linear => t,
        Scale::Log2 => t.exp2(),
        Scale::Log10 => 10f64.powf(t),
    }
}

fn nice_step(range: f64) -> f64 {
    let raw = range / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let n = raw / mag;
    mag * if n <= 1.0 { 1.0 } else if n <= 2.0 { 2.0 } else if n <= 5.0 { 5.0 } else { 10.0 }
}

/// Domain in transformed units.
fn domain(values: impl Iterator<Item = f64>, pad: bool) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 0.5, hi + 0.5);
    }
    if pad {
        let p = (hi - lo) * 0.05;
        (lo - p, hi + p)
    } else {
        (lo, hi)
    }
}

/// Tick positions in transformed units with their labels.
fn ticks(axis: &Axis, (lo, hi): (f64, f64)) -> Vec<(f64, String)> {
    if !axis.ticks.is_empty() {
        return axis
            .ticks
            .iter()
            .enumerate()
            .map(|(i, l)| (i as f64, l.clone()))
            .filter(|(t, _)| *t >= lo - 1e-9 && *t <= hi + 1e-9)
            .collect();
    }
    match axis.scale {
        Scale::Linear => {
            let step = nice_step(hi - lo);
            let mut t = (lo / step).ceil() * step;
            let mut out = Vec::new();
            while t <= hi + step * 1e-9 {
                out.push((t, fmt_num(if t.abs() < step * 1e-9 { 0.0 } else { t })));
                t += step;
            }
            out
        }
        scale => {
            let span = (hi.floor() - lo.ceil()).max(0.0);
            let every = ((span / 8.0).ceil() as i64).max(1);
            (lo.ceil() as i64..=hi.floor() as i64)
                .filter(|k| k.rem_euclid(every) == 0)
                .map(|k| (k as f64, fmt_num(inverse(scale, k as f64))))
                .collect()
        }
    }
}

struct Frame {
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, t: f64) -> f64 {
        self.left + (t - self.x.0) / (self.x.1 - self.x.0) * (self.right - self.left)
    }
    fn py(&self, t: f64) -> f64 {
        self.bottom - (t - self.y.0) / (self.y.1 - self.y.0) * (self.bottom - self.top)
    }
}

fn header(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        f(w / 2.0),
        escape(title)
    );
}

fn points(s: &Series, xs: Scale, ys: Scale, y: &[f64]) -> Vec<(f64, f64)> {
    s.x.iter()
        .zip(y)
        .filter_map(|(&x, &y)| Some((transform(xs, x)?, transform(ys, y)?)))
        .collect()
}

/// Runs of consecutive plottable points; a missing value breaks the line.
fn segments(s: &Series, xs: Scale, ys: Scale) -> Vec<Vec<(f64, f64)>> {
    let mut out: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
    for (&x, &y) in s.x.iter().zip(&s.y) {
        match (transform(xs, x), transform(ys, y)) {
            (Some(x), Some(y)) => out.last_mut().unwrap().push((x, y)),
            _ if out.last().is_some_and(|l| !l.is_empty()) => out.push(Vec::new()),
            _ => {}
        }
    }
    out.retain(|l| !l.is_empty());
    out
}

fn render_linegraph(doc: &PlotDocument) -> String {
    let (w, h) = (720.0, 440.0);
    let (xs, ys) = (doc.x_axis.scale, doc.y_axis.scale);
    let xdom = domain(
        doc.series.iter().flat_map(|s| s.x.iter().filter_map(|&v| transform(xs, v))),
        false,
    );
    let xdom = if doc.x_axis.ticks.is_empty() { xdom } else { (xdom.0 - 0.5, xdom.1 + 0.5) };
    let yvals = doc.series.iter().flat_map(|s| {
        [Some(&s.y), s.band_lo.as_ref(), s.band_hi.as_ref(), s.whisker_lo.as_ref(), s.whisker_hi.as_ref()]
            .into_iter()
            .flatten()
            .flat_map(|v| v.iter().filter_map(|&v| transform(ys, v)))
    });
    let fr = Frame {
        left: 70.0,
        right: w - 170.0,
        top: 40.0,
        bottom: h - 60.0,
        x: xdom,
        y: domain(yvals, true),
    };

    let mut out = String::new();
    header(&mut out, w, h, &doc.title);
    // axes and ticks
    let _ = writeln!(
        out,
        r##"<g stroke="#333" fill="none"><line x1="{l}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{l}" y1="{t}" x2="{l}" y2="{b}"/></g>"##,
        l = f(fr.left),
        r = f(fr.right),
        t = f(fr.top),
        b = f(fr.bottom)
    );
    for (t, label) in ticks(&doc.x_axis, fr.x) {
        let x = f(fr.px(t));
        let _ = writeln!(
            out,
            r##"<line x1="{x}" y1="{b}" x2="{x}" y2="{b5}" stroke="#333"/><text x="{x}" y="{ty}" text-anchor="middle">{}</text>"##,
            escape(&label),
            b = f(fr.bottom),
            b5 = f(fr.bottom + 5.0),
            ty = f(fr.bottom + 18.0)
        );
    }
    for (t, label) in ticks(&doc.y_axis, fr.y) {
        let y = f(fr.py(t));
        let _ = writeln!(
            out,
            r##"<line x1="{l5}" y1="{y}" x2="{l}" y2="{y}" stroke="#333"/><text x="{tx}" y="{ty}" text-anchor="end">{}</text>"##,
            escape(&label),
            l = f(fr.left),
            l5 = f(fr.left - 5.0),
            tx = f(fr.left - 8.0),
            ty = f(fr.py(t) + 4.0)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        f((fr.left + fr.right) / 2.0),
        f(h - 20.0),
        escape(&doc.x_axis.label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{y}" text-anchor="middle" transform="rotate(-90 18 {y})">{}</text>"#,
        escape(&doc.y_axis.label),
        y = f((fr.top + fr.bottom) / 2.0)
    );

    for (i, s) in doc.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if let (Some(lo), Some(hi)) = (&s.band_lo, &s.band_hi) {
            let upper = points(s, xs, ys, hi);
            let lower = points(s, xs, ys, lo);
            if !upper.is_empty() && upper.len() == lower.len() {
                let pts: Vec<String> = upper
                    .iter()
                    .chain(lower.iter().rev())
                    .map(|&(x, y)| format!("{},{}", f(fr.px(x)), f(fr.py(y))))
                    .collect();
                let _ = writeln!(
                    out,
                    r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                    pts.join(" ")
                );
            }
        }
        if let (Some(lo), Some(hi)) = (&s.whisker_lo, &s.whisker_hi) {
            for ((&x, &a), &b) in s.x.iter().zip(lo).zip(hi) {
                if let (Some(x), Some(a), Some(b)) = (transform(xs, x), transform(ys, a), transform(ys, b)) {
                    let _ = writeln!(
                        out,
                        r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="{color}"/>"#,
                        f(fr.py(a)),
                        f(fr.py(b)),
                        x = f(fr.px(x))
                    );
                }
            }
        }
        let pts = points(s, xs, ys, &s.y);
        let dashed = s.is_model() || s.style.as_deref() == Some("dashed");
        let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
        for seg in segments(s, xs, ys) {
            let coords: Vec<String> = seg.iter().map(|&(x, y)| format!("{},{}", f(fr.px(x)), f(fr.py(y)))).collect();
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
                coords.join(" ")
            );
        }
        if s.model.is_none() && pts.len() <= 60 {
            for &(x, y) in &pts {
                let _ = writeln!(out, r#"<circle cx="{}" cy="{}" r="3" fill="{color}"/>"#, f(fr.px(x)), f(fr.py(y)));
            }
        }
        let ly = fr.top + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
            f(fr.right + 15.0),
            f(fr.right + 40.0),
            f(fr.right + 46.0),
            f(ly + 4.0),
            escape(&s.label),
            y = f(ly)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn color(t: f64) -> String {
    if t.is_nan() {
        return MISSING_FILL.into();
    }
    let t = t.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f64;
    let i = (t.floor() as usize).min(VIRIDIS.len() - 2);
    let u = t - i as f64;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * u).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn render_panel(out: &mut String, p: &MatrixPanel, ox: f64, oy: f64, size: f64, x_label: &str, y_label: &str) {
    let (lo, hi) = domain(p.cells.iter().flatten().copied().filter(|v| !v.is_nan()), false);
    let cw = size / p.cols.max(1) as f64;
    let ch = size / p.rows.max(1) as f64;
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
        f(ox + size / 2.0),
        f(oy - 8.0),
        escape(&p.title)
    );
    for (r, row) in p.cells.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
                f(ox + c as f64 * cw),
                f(oy + r as f64 * ch),
                f(cw),
                f(ch),
                color((v - lo) / (hi - lo))
            );
        }
    }
    let label_every = |n: usize| (n / 16).max(1);
    for (r, l) in p.row_labels.iter().enumerate().filter(|(r, _)| r % label_every(p.rows) == 0) {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end" font-size="9">{}</text>"#,
            f(ox - 4.0),
            f(oy + (r as f64 + 0.5) * ch + 3.0),
            escape(l)
        );
    }
    for (c, l) in p.col_labels.iter().enumerate().filter(|(c, _)| c % label_every(p.cols) == 0) {
        let x = f(ox + (c as f64 + 0.5) * cw);
        let y = f(oy + size + 10.0);
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{y}" text-anchor="end" font-size="9" transform="rotate(-45 {x} {y})">{}</text>"#,
            escape(l)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        f(ox + size / 2.0),
        f(oy + size + 62.0),
        escape(x_label)
    );
    let yl = f(oy + size / 2.0);
    let xl = f(ox - 80.0);
    let _ = writeln!(
        out,
        r#"<text x="{xl}" y="{yl}" text-anchor="middle" transform="rotate(-90 {xl} {yl})">{}</text>"#,
        escape(y_label)
    );
    // colorbar
    let bx = ox + size + 12.0;
    let steps = 20;
    for i in 0..steps {
        let t = 1.0 - (i as f64 + 0.5) / steps as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="14" height="{}" fill="{}"/>"#,
            f(bx),
            f(oy + i as f64 * size / steps as f64),
            f(size / steps as f64),
            color(t)
        );
    }
    for (v, y) in [(hi, oy + 4.0), (lo, oy + size)] {
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="9">{}</text>"#, f(bx + 18.0), f(y), fmt_num(v));
    }
}

fn render_heatmap(doc: &PlotDocument) -> String {
    let size = 320.0;
    let panel_w = size + 200.0;
    let n = doc.panels.len().max(1) as f64;
    let (w, h) = (panel_w * n + 20.0, size + 150.0);
    let mut out = String::new();
    header(&mut out, w, h, &doc.title);
    for (i, p) in doc.panels.iter().enumerate() {
        render_panel(&mut out, p, 110.0 + i as f64 * panel_w, 55.0, size, &doc.x_axis.label, &doc.y_axis.label);
    }
    out.push_str("</svg>\n");
    out
}

pub fn render_plot(doc: &PlotDocument) -> String {
    match doc.kind {
        PlotKind::Linegraph => render_linegraph(doc),
        PlotKind::Heatmap => render_heatmap(doc),
    }
}
