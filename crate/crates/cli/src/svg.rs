//! Minimal SVG 1.1 line plots for trajectories.

use std::fmt::Write as _;

use delaytrack::track::{EventKind, Trajectory};

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

#[derive(Clone, Debug, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Polylines, each drawn separately.
    pub series: Vec<Vec<(f64, f64)>>,
    pub markers: Vec<(f64, f64)>,
    /// Dashed vertical reference line.
    pub x_ref: Option<f64>,
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let frac = raw / mag;
    let nice = if frac < 1.5 {
        1.0
    } else if frac < 3.5 {
        2.0
    } else if frac < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0);
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64, step: f64) -> String {
    let digits = (-step.log10().floor()).max(0.0) as usize;
    format!("{v:.digits$}")
}

pub fn render(plot: &Plot) -> String {
    let pts = || plot.series.iter().flatten().chain(&plot.markers);
    let (x0, x1) = bounds(pts().map(|p| p.0).chain(plot.x_ref));
    let (y0, y1) = bounds(pts().map(|p| p.1));
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        W / 2.0,
        escape(&plot.title)
    );

    let xs = nice_step(x1 - x0);
    let mut t = (x0 / xs).ceil() * xs;
    while t <= x1 {
        let x = sx(t);
        let _ = writeln!(out, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e4e4e4"/>"##, TOP + ph);
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph + 16.0,
            tick_label(t, xs)
        );
        t += xs;
    }
    let ys = nice_step(y1 - y0);
    let mut t = (y0 / ys).ceil() * ys;
    while t <= y1 {
        let y = sy(t);
        let _ = writeln!(out, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e4e4e4"/>"##, LEFT + pw);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            tick_label(t, ys)
        );
        t += ys;
    }
    let _ = writeln!(out, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    if let Some(xr) = plot.x_ref.filter(|v| (x0..=x1).contains(v)) {
        let x = sx(xr);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="4,3"/>"#,
            TOP + ph
        );
    }
    for line in &plot.series {
        let path: Vec<String> = line
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if !path.is_empty() {
            let _ = writeln!(
                out,
                r##"<polyline points="{}" fill="none" stroke="#1f5fa8" stroke-width="1.5"/>"##,
                path.join(" ")
            );
        }
    }
    for &(x, y) in &plot.markers {
        let _ = writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="none" stroke="#c0392b" stroke-width="1.5"/>"##,
            sx(x),
            sy(y)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 12.0,
        escape(&plot.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&plot.y_label)
    );
    out.push_str("</svg>\n");
    out
}

/// Splits the samples into continuous pieces at reinitializations.
fn pieces<T>(traj: &Trajectory, f: impl Fn(&delaytrack::track::TrackState) -> T) -> Vec<Vec<T>> {
    let mut breaks: Vec<usize> = traj.events_of(EventKind::Reinit).map(|e| e.sample).collect();
    breaks.sort_unstable();
    let mut out = vec![Vec::new()];
    for (i, st) in traj.samples.iter().enumerate() {
        if i > 0 && breaks.binary_search(&i).is_ok() {
            out.push(Vec::new());
        }
        out.last_mut().unwrap().push(f(st));
    }
    out
}

/// Eigenvalue path in the complex plane with axis crossings marked.
pub fn root_locus(traj: &Trajectory) -> String {
    render(&Plot {
        title: "Root locus".into(),
        x_label: "Re(s)".into(),
        y_label: "Im(s)".into(),
        series: pieces(traj, |st| (st.s_r, st.s_i)),
        markers: traj.events_of(EventKind::AxisCrossing).map(|e| (0.0, e.s.im)).collect(),
        x_ref: Some(0.0),
    })
}

/// Damping ratio `ζ = -Re(s)/|s|` against the parameter.
pub fn damping(traj: &Trajectory) -> String {
    render(&Plot {
        title: "Damping ratio".into(),
        x_label: "p".into(),
        y_label: "damping ratio".into(),
        series: pieces(traj, |st| (st.p, -st.s_r / st.s_r.hypot(st.s_i))),
        markers: traj.events_of(EventKind::AxisCrossing).map(|e| (e.p, 0.0)).collect(),
        x_ref: None,
    })
}
