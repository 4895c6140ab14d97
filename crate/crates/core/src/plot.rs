//! Static SVG charts. Output depends only on the input data, so identical
//! tables render to identical bytes.

use crate::tables::Heatmap;
use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { name: name.into(), points }
    }

    fn finite(&self) -> Vec<(f64, f64)> {
        self.points.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect()
    }
}

/// A dashed vertical reference line.
#[derive(Debug, Clone, PartialEq)]
pub struct Marker {
    pub x: f64,
    pub label: String,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Round tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{:.3}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn header(svg: &mut String, title: &str) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
}

/// Line chart; series without finite points are skipped and left out of the legend.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], markers: &[Marker]) -> String {
    let drawn: Vec<(&Series, Vec<(f64, f64)>)> =
        series.iter().map(|s| (s, s.finite())).filter(|(_, p)| !p.is_empty()).collect();
    let all: Vec<(f64, f64)> = drawn.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    for m in markers {
        x0 = x0.min(m.x);
        x1 = x1.max(m.x);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_T + ph - (y - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    header(&mut svg, title);
    let _ = writeln!(svg, r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="#333"/>"##);
    for t in ticks(x0, x1) {
        let _ = writeln!(
            svg,
            r##"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="#333"/><text x="{0:.2}" y="{3:.2}" text-anchor="middle">{4}</text>"##,
            sx(t),
            MARGIN_T + ph,
            MARGIN_T + ph + 5.0,
            MARGIN_T + ph + 19.0,
            fmt_tick(t)
        );
    }
    for t in ticks(y0, y1) {
        let _ = writeln!(
            svg,
            r##"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" stroke="#333"/><text x="{3:.2}" y="{4:.2}" text-anchor="end">{5}</text>"##,
            MARGIN_L - 5.0,
            sy(t),
            MARGIN_L,
            MARGIN_L - 8.0,
            sy(t) + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{0:.1}" text-anchor="middle" transform="rotate(-90 18 {0:.1})">{1}</text>"#,
        MARGIN_T + ph / 2.0,
        escape(y_label)
    );
    for m in markers {
        let _ = writeln!(
            svg,
            r##"<line class="marker" x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="#555" stroke-dasharray="5,4"/><text x="{3:.2}" y="{4:.2}" fill="#555">{5}</text>"##,
            sx(m.x),
            MARGIN_T,
            MARGIN_T + ph,
            sx(m.x) + 4.0,
            MARGIN_T + 14.0,
            escape(&m.label)
        );
    }
    for (i, (s, pts)) in drawn.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(svg, r#"<polyline class="series" fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#, path.join(" "));
        for &(x, y) in pts {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{colour}"/>"#, sx(x), sy(y));
        }
        let ly = MARGIN_T + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - MARGIN_R + 12.0;
        let _ = writeln!(
            svg,
            r#"<g class="legend"><line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{colour}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text></g>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Piecewise-linear approximation of the viridis colour map, `t ∈ [0, 1]`.
fn viridis(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] =
        [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let t = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Median NRMSE heatmap: one cell per (k, H), k down the rows.
pub fn heatmap_chart(title: &str, hm: &Heatmap) -> String {
    let finite: Vec<f64> = hm.values.iter().flatten().copied().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let cw = pw / hm.hs.len().max(1) as f64;
    let ch = ph / hm.ks.len().max(1) as f64;

    let mut svg = String::new();
    header(&mut svg, title);
    for (r, (k, row)) in hm.ks.iter().zip(&hm.values).enumerate() {
        let y = MARGIN_T + r as f64 * ch;
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{k}</text>"#, MARGIN_L - 6.0, y + ch / 2.0 + 4.0);
        for (c, v) in row.iter().enumerate() {
            let x = MARGIN_L + c as f64 * cw;
            let fill = if v.is_finite() { viridis((v - lo) / span) } else { "#cccccc".into() };
            let _ = writeln!(
                svg,
                r#"<rect class="cell" x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" fill="{fill}"><title>k={k} H={} NRMSE={v}</title></rect>"#,
                hm.hs[c]
            );
        }
    }
    for (c, h) in hm.hs.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{h}</text>"#,
            MARGIN_L + (c as f64 + 0.5) * cw,
            MARGIN_T + ph + 18.0
        );
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">horizon H</text>"#, MARGIN_L + pw / 2.0, HEIGHT - 12.0);
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{0:.1}" text-anchor="middle" transform="rotate(-90 18 {0:.1})">delay depth k</text>"#,
        MARGIN_T + ph / 2.0
    );
    // colour bar
    let bx = WIDTH - MARGIN_R + 30.0;
    for i in 0..50 {
        let t = 1.0 - i as f64 / 49.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{bx:.1}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            MARGIN_T + i as f64 * ph / 50.0,
            ph / 50.0 + 0.5,
            viridis(t)
        );
    }
    if !finite.is_empty() {
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, bx + 22.0, MARGIN_T + 10.0, fmt_tick(hi));
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, bx + 22.0, MARGIN_T + ph, fmt_tick(lo));
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}">NRMSE</text>"#, bx - 4.0, MARGIN_T - 8.0);
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_has_one_cell_per_pair() {
        let hm = Heatmap { hs: vec![1, 5, 10], ks: vec![0, 3], values: vec![vec![0.3, 0.5, f64::NAN], vec![0.2, 0.4, 0.6]] };
        let svg = heatmap_chart("t", &hm);
        assert_eq!(svg.matches(r#"class="cell""#).count(), 6);
        assert_eq!(svg, heatmap_chart("t", &hm));
    }

    #[test]
    fn empty_series_leave_the_legend() {
        let s = vec![
            Series::new("k=0", vec![(1.0, 0.5), (2.0, 0.6)]),
            Series::new("k=3", vec![]),
            Series::new("k=5", vec![(1.0, f64::NAN)]),
        ];
        let svg = line_chart("t", "x", "y", &s, &[]);
        assert_eq!(svg.matches(r#"class="legend""#).count(), 1);
        assert!(svg.contains("k=0") && !svg.contains("k=3") && !svg.contains("k=5"));
    }

    #[test]
    fn markers_and_escaping() {
        let s = vec![Series::new("R² <d>", vec![(1.0, 1.0), (2.0, 0.0)])];
        let svg = line_chart("a & b", "d", "R²", &s, &[Marker { x: 1.4, label: "H*".into() }]);
        assert!(svg.contains("a &amp; b") && svg.contains("R² &lt;d&gt;"));
        assert_eq!(svg.matches(r#"class="marker""#).count(), 1);
    }

    #[test]
    fn tick_steps_are_round() {
        assert_eq!(ticks(0.0, 1.0), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        assert_eq!(ticks(1.0, 25.0), vec![5.0, 10.0, 15.0, 20.0, 25.0]);
        assert_eq!(fmt_tick(0.6000000000000001), "0.6");
    }

    #[test]
    fn colour_map_endpoints() {
        assert_eq!(viridis(0.0), "#440154");
        assert_eq!(viridis(1.0), "#fde725");
    }
}
