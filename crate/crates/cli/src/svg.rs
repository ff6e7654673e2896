//! Minimal bar and line charts written as plain SVG text.
//!
//! All coordinates are printed with fixed precision so identical data always
//! yields identical bytes.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 4] = ["#4477aa", "#ee6677", "#228833", "#ccbb44"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, x_label: &str, y_label: &str) {
    let (x0, y0, x1, y1) = (LEFT, HEIGHT - BOTTOM, WIDTH - RIGHT, TOP);
    let _ = writeln!(out, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}" stroke="black"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn y_tick(out: &mut String, y: f64, label: &str) {
    let _ = writeln!(
        out,
        r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
        LEFT - 4.0,
        LEFT - 6.0,
        y + 4.0,
        label
    );
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1e-2 && v.abs() < 1e4 {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

/// Vertical bars, one per label. Missing values (`None`) leave a gap.
pub fn bar_chart(title: &str, x_label: &str, y_label: &str, labels: &[String], values: &[Option<f64>]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, x_label, y_label);
    let finite = values.iter().flatten().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(0.0f64, f64::min);
    let hi = finite.fold(0.0f64, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let plot_h = HEIGHT - BOTTOM - TOP;
    let to_y = |v: f64| HEIGHT - BOTTOM - (v - lo) / span * plot_h;
    for k in 0..=4 {
        let v = lo + span * k as f64 / 4.0;
        y_tick(&mut out, to_y(v), &format_tick(v));
    }
    let n = labels.len().max(1);
    let slot = (WIDTH - LEFT - RIGHT) / n as f64;
    for (k, label) in labels.iter().enumerate() {
        let x = LEFT + slot * k as f64;
        if let Some(v) = values.get(k).copied().flatten().filter(|v| v.is_finite()) {
            let (ya, yb) = (to_y(v), to_y(0.0));
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                x + slot * 0.15,
                ya.min(yb),
                slot * 0.7,
                (ya - yb).abs(),
                PALETTE[0]
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x + slot / 2.0,
            HEIGHT - BOTTOM + 16.0,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
    /// Draw as a step function (piecewise constant) instead of straight segments.
    pub step: bool,
}

/// Polyline chart. With `log_y`, non-positive values are dropped and the
/// axis is labelled in powers of ten.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>], log_y: bool) -> String {
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, x_label, y_label);
    let transform = |y: f64| if log_y { y.log10() } else { y };
    let usable: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_y || *y > 0.0))
                .map(|&(x, y)| (x, transform(y)))
                .collect()
        })
        .collect();
    let all = usable.iter().flatten();
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    if !x_lo.is_finite() {
        (x_lo, x_hi, y_lo, y_hi) = (0.0, 1.0, 0.0, 1.0);
    }
    if log_y {
        y_lo = y_lo.floor();
        y_hi = y_hi.ceil();
    } else {
        y_lo = y_lo.min(0.0);
    }
    let x_span = if x_hi > x_lo { x_hi - x_lo } else { 1.0 };
    let y_span = if y_hi > y_lo { y_hi - y_lo } else { 1.0 };
    let to_x = |x: f64| LEFT + (x - x_lo) / x_span * (WIDTH - LEFT - RIGHT);
    let to_y = |y: f64| HEIGHT - BOTTOM - (y - y_lo) / y_span * (HEIGHT - BOTTOM - TOP);

    if log_y {
        let mut e = y_lo;
        while e <= y_hi + 1e-9 {
            y_tick(&mut out, to_y(e), &format!("1e{}", e as i64));
            e += 1.0;
        }
    } else {
        for k in 0..=4 {
            let v = y_lo + y_span * k as f64 / 4.0;
            y_tick(&mut out, to_y(v), &format_tick(v));
        }
    }
    for k in 0..=4 {
        let v = x_lo + x_span * k as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            to_x(v),
            HEIGHT - BOTTOM + 16.0,
            format_tick(v)
        );
    }

    for (k, (s, pts)) in series.iter().zip(&usable).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut path = String::new();
        for (n, &(x, y)) in pts.iter().enumerate() {
            if n > 0 && s.step {
                let _ = write!(path, "{:.2},{:.2} ", to_x(x), to_y(pts[n - 1].1));
            }
            let _ = write!(path, "{:.2},{:.2} ", to_x(x), to_y(y));
        }
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.trim_end()
        );
        if !s.step {
            for &(x, y) in pts {
                let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, to_x(x), to_y(y));
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#,
            WIDTH - RIGHT - 150.0,
            TOP + 14.0 * (k as f64 + 1.0),
            escape(s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}
