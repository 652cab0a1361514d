//! Minimal SVG rendering of sampled error surfaces: a line plot for one
//! variable, a shaded grid for two.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use loopwatch_core::report::fmt_sig;
use loopwatch_core::SurfaceTable;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;

pub fn render(table: &SurfaceTable, labels: &[String]) -> Result<String> {
    match table.axes.len() {
        1 => Ok(line_plot(table, &labels[0])),
        2 => Ok(grid_plot(table, &labels[0], &labels[1])),
        n => bail!("cannot plot a surface over {n} variables"),
    }
}

fn header(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
}

fn frame(out: &mut String, x_label: &str, y_label: &str, x: (f64, f64), y: (f64, f64)) {
    let (right, bottom) = (WIDTH - MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        right - MARGIN,
        bottom - MARGIN
    );
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="{}">{}</text>"#, bottom + 16.0, fmt_sig(x.0));
    let _ = writeln!(out, r#"<text x="{right}" y="{}" text-anchor="end">{}</text>"#, bottom + 16.0, fmt_sig(x.1));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, bottom + 32.0, escape(x_label));
    let _ = writeln!(out, r#"<text x="{}" y="{bottom}" text-anchor="end">{}</text>"#, MARGIN - 4.0, fmt_sig(y.0));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, MARGIN - 4.0, MARGIN + 8.0, fmt_sig(y.1));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
}

fn scale(v: f64, (lo, hi): (f64, f64), a: f64, b: f64) -> f64 {
    if hi == lo {
        return (a + b) / 2.0;
    }
    a + (v - lo) / (hi - lo) * (b - a)
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn line_plot(table: &SurfaceTable, label: &str) -> String {
    let xr = (table.axes[0].lo, table.axes[0].hi);
    let er = range(table.rows.iter().map(|r| r.1));
    let mut out = String::new();
    header(&mut out);
    frame(&mut out, label, "e", xr, er);
    let points: Vec<String> = table
        .rows
        .iter()
        .map(|(x, e)| {
            format!(
                "{:.2},{:.2}",
                scale(x[0], xr, MARGIN, WIDTH - MARGIN),
                scale(*e, er, HEIGHT - MARGIN, MARGIN)
            )
        })
        .collect();
    let _ = writeln!(out, r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#, points.join(" "));
    if let Some((x, e)) = table.argmin() {
        marker(&mut out, scale(x[0], xr, MARGIN, WIDTH - MARGIN), scale(*e, er, HEIGHT - MARGIN, MARGIN));
    }
    out.push_str("</svg>\n");
    out
}

fn grid_plot(table: &SurfaceTable, x_label: &str, y_label: &str) -> String {
    let (ax, ay) = (table.axes[0], table.axes[1]);
    let xr = (ax.lo, ax.hi);
    let yr = (ay.lo, ay.hi);
    let er = range(table.rows.iter().map(|r| r.1));
    let cw = (WIDTH - 2.0 * MARGIN) / ax.steps as f64;
    let ch = (HEIGHT - 2.0 * MARGIN) / ay.steps as f64;
    let mut out = String::new();
    header(&mut out);
    for (i, (_, e)) in table.rows.iter().enumerate() {
        let (col, row) = (i / ay.steps, i % ay.steps);
        // log shading keeps the valley visible next to steep walls
        let t = if er.1 > er.0 { ((e - er.0) / (er.1 - er.0) * 99.0 + 1.0).log10() / 2.0 } else { 0.0 };
        let shade = (255.0 * (1.0 - t)).round() as u8;
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({shade},{shade},255)"/>"#,
            MARGIN + col as f64 * cw,
            HEIGHT - MARGIN - (row + 1) as f64 * ch,
            cw + 0.05,
            ch + 0.05
        );
    }
    frame(&mut out, x_label, y_label, xr, yr);
    if let Some((x, _)) = table.argmin() {
        marker(
            &mut out,
            scale(x[0], xr, MARGIN + cw / 2.0, WIDTH - MARGIN - cw / 2.0),
            scale(x[1], yr, HEIGHT - MARGIN - ch / 2.0, MARGIN + ch / 2.0),
        );
    }
    out.push_str("</svg>\n");
    out
}

fn marker(out: &mut String, x: f64, y: f64) {
    let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="crimson"/>"#);
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
