//! Minimal static SVG plots: line series and grouped bars. Deterministic
//! output, no external renderer.

use std::fmt::Write as _;

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 56.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn axis_bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.04 * (hi - lo);
    (lo - pad, hi + pad)
}

fn ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1000.0 {
        format!("{v:.0}")
    } else if v.abs() >= 10.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

/// A multi-series line plot.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (x_lo, x_hi) = axis_bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y_lo, y_hi) = axis_bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let sx = |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * (WIDTH - MARGIN_L - MARGIN_R);
    let sy = |y: f64| HEIGHT - MARGIN_B - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut out = String::new();
    header(&mut out, title, x_label, y_label);
    grid_and_axes(&mut out, &sx, &sy, x_lo, x_hi, y_lo, y_hi);
    for (i, s) in series.iter().enumerate() {
        if s.points.is_empty() {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        let mut path = String::new();
        for (j, (x, y)) in s.points.iter().enumerate() {
            let _ = write!(path, "{}{:.2},{:.2} ", if j == 0 { "M" } else { "L" }, sx(*x), sy(*y));
        }
        let _ = writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.4"/>"#,
            path.trim_end()
        );
    }
    legend(&mut out, series.iter().map(|s| s.label.as_str()));
    out.push_str("</svg>\n");
    out
}

/// Grouped bars: one group per category, one bar per series label.
pub fn bar_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    categories: &[String],
    series: &[(String, Vec<f64>)],
) -> String {
    let (y_lo, y_hi) = axis_bounds(series.iter().flat_map(|(_, v)| v.iter().copied()).chain([0.0]));
    let sy = |y: f64| HEIGHT - MARGIN_B - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - MARGIN_T - MARGIN_B);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let group_w = plot_w / categories.len().max(1) as f64;
    let bar_w = 0.8 * group_w / series.len().max(1) as f64;

    let mut out = String::new();
    header(&mut out, title, x_label, y_label);
    // y grid only; categories label the x axis.
    for t in ticks(y_lo, y_hi, 8) {
        let y = sy(t);
        let _ = writeln!(
            out,
            r##"<line x1="{MARGIN_L}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd" stroke-width="0.6"/>"##,
            WIDTH - MARGIN_R
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
            MARGIN_L - 6.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    for (ci, cat) in categories.iter().enumerate() {
        let x0 = MARGIN_L + ci as f64 * group_w + 0.1 * group_w;
        for (si, (_, values)) in series.iter().enumerate() {
            let Some(&v) = values.get(ci) else { continue };
            let color = PALETTE[si % PALETTE.len()];
            let x = x0 + si as f64 * bar_w;
            let (top, base) = (sy(v.max(0.0)), sy(0.0f64.max(y_lo)));
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{top:.2}" width="{bar_w:.2}" height="{:.2}" fill="{color}"/>"#,
                (base - top).abs()
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{cat}</text>"#,
            MARGIN_L + (ci as f64 + 0.5) * group_w,
            HEIGHT - MARGIN_B + 18.0
        );
    }
    legend(&mut out, series.iter().map(|(l, _)| l.as_str()));
    out.push_str("</svg>\n");
    out
}

fn header(out: &mut String, title: &str, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="22" font-size="15" text-anchor="middle">{title}</text>"#,
        WIDTH / 2.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{x_label}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.1})">{y_label}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
}

fn grid_and_axes(
    out: &mut String,
    sx: &dyn Fn(f64) -> f64,
    sy: &dyn Fn(f64) -> f64,
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
) {
    for t in ticks(x_lo, x_hi, 8) {
        let x = sx(t);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{MARGIN_T}" x2="{x:.2}" y2="{:.2}" stroke="#dddddd" stroke-width="0.6"/>"##,
            HEIGHT - MARGIN_B
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
            HEIGHT - MARGIN_B + 16.0,
            fmt_tick(t)
        );
    }
    for t in ticks(y_lo, y_hi, 8) {
        let y = sy(t);
        let _ = writeln!(
            out,
            r##"<line x1="{MARGIN_L}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd" stroke-width="0.6"/>"##,
            WIDTH - MARGIN_R
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
            MARGIN_L - 6.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{:.2}" height="{:.2}" fill="none" stroke="#333333" stroke-width="1"/>"##,
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    );
}

fn legend<'a>(out: &mut String, labels: impl Iterator<Item = &'a str>) {
    for (i, label) in labels.enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let x = MARGIN_L + 10.0 + (i as f64 % 4.0) * 190.0;
        let y = MARGIN_T + 14.0 + (i as f64 / 4.0).floor() * 16.0;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{color}"/><text x="{:.1}" y="{:.1}" font-size="11">{label}</text>"#,
            y - 9.0,
            x + 14.0,
            y
        );
    }
}
