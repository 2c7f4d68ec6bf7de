//! Minimal self-contained SVG line plots.

use std::fmt::Write as _;

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Drawn dashed.
    pub theory: bool,
}

impl Series {
    pub fn data(name: &str, points: Vec<(f64, f64)>) -> Self {
        Self { name: name.into(), points, theory: false }
    }

    pub fn theory(name: &str, points: Vec<(f64, f64)>) -> Self {
        Self { name: name.into(), points, theory: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    /// Density-of-states style curve.
    Curve,
    /// Parameter sweep with markers.
    Trend,
    /// Two curves with the band between them shaded.
    Profile,
}

#[derive(Clone, Debug)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub kind: PlotKind,
    pub log_y: bool,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#555555"];

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-300);
    let raw = span / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= n as f64).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

pub fn emit_plot(series: &[Series], spec: &PlotSpec) -> Result<String> {
    let ty = |y: f64| if spec.log_y { y.log10() } else { y };
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|(x, y)| x.is_finite() && y.is_finite() && (!spec.log_y || *y > 0.0))
        .map(|(x, y)| (x, ty(y)))
        .collect();
    if pts.is_empty() {
        return Err(invalid("nothing to plot"));
    }
    if spec.kind == PlotKind::Profile && series.len() < 2 {
        return Err(invalid("profile plot needs an observed and a predicted curve"));
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in &pts {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if x1 == x0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 == y0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let py = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(&spec.title));
    let (bx, by) = (H - BOTTOM, W - RIGHT);
    let _ = writeln!(s, r#"<path d="M{LEFT},{TOP} L{LEFT},{bx} L{by},{bx}" stroke="black" fill="none"/>"#);
    for t in nice_ticks(x0, x1, 6) {
        let x = px(t);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{bx}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, bx + 5.0, bx + 18.0, fmt_tick(t));
    }
    for t in nice_ticks(y0, y1, 6) {
        let y = py(t);
        let label = if spec.log_y { format!("1e{}", fmt_tick(t)) } else { fmt_tick(t) };
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#, LEFT - 5.0, LEFT - 8.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (LEFT + W - RIGHT) / 2.0, H - 12.0, escape(&spec.x_label));
    let _ = writeln!(s, r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#, H / 2.0, H / 2.0, escape(&spec.y_label));

    let usable = |p: &&(f64, f64)| p.0.is_finite() && p.1.is_finite() && (!spec.log_y || p.1 > 0.0);
    if spec.kind == PlotKind::Profile {
        let a: Vec<_> = series[0].points.iter().filter(usable).collect();
        let b: Vec<_> = series[1].points.iter().filter(usable).collect();
        if !a.is_empty() && !b.is_empty() {
            let mut d = String::new();
            for (i, (x, y)) in a.iter().enumerate() {
                let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, px(*x), py(ty(*y)));
            }
            for (x, y) in b.iter().rev() {
                let _ = write!(d, "L{:.2},{:.2} ", px(*x), py(ty(*y)));
            }
            let _ = writeln!(s, r##"<path d="{}Z" fill="#cccccc" fill-opacity="0.5" stroke="none"/>"##, d);
        }
    }
    for (k, ser) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let p: Vec<_> = ser.points.iter().filter(usable).collect();
        if p.is_empty() {
            continue;
        }
        let mut d = String::new();
        for (i, (x, y)) in p.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, px(*x), py(ty(*y)));
        }
        let dash = if ser.theory { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(s, r#"<path d="{}" stroke="{color}" stroke-width="1.5" fill="none"{dash}/>"#, d.trim_end());
        if spec.kind == PlotKind::Trend {
            for (x, y) in &p {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(*x), py(ty(*y)));
            }
        }
        let ly = TOP + 14.0 * k as f64 + 6.0;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#, W - 170.0, W - 150.0, W - 145.0, ly + 4.0, escape(&ser.name));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn fmt_tick(t: f64) -> String {
    let s = format!("{t:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: PlotKind) -> PlotSpec {
        PlotSpec { title: "t".into(), x_label: "x".into(), y_label: "y".into(), kind, log_y: false }
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(emit_plot(&[], &spec(PlotKind::Curve)).is_err());
        assert!(emit_plot(&[Series::data("a", vec![])], &spec(PlotKind::Curve)).is_err());
        let mut log = spec(PlotKind::Curve);
        log.log_y = true;
        assert!(emit_plot(&[Series::data("a", vec![(1.0, -1.0)])], &log).is_err());
    }

    #[test]
    fn profile_has_band_and_dashed_theory() {
        let obs = Series::data("observed", vec![(0.0, 1.0), (1.0, 2.0)]);
        let th = Series::theory("predicted", vec![(0.0, 1.5), (1.0, 2.5)]);
        let svg = emit_plot(&[obs, th], &spec(PlotKind::Profile)).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("fill-opacity"));
        assert!(svg.contains("stroke-dasharray"));
        assert!(emit_plot(&[Series::data("a", vec![(0.0, 1.0)])], &spec(PlotKind::Profile)).is_err());
    }

    #[test]
    fn ticks_cover_range() {
        let t = nice_ticks(-8.0, 8.0, 6);
        assert!(t.contains(&0.0) && t.first().unwrap() >= &-8.0 && t.last().unwrap() <= &8.0);
    }
}
