//! Selection-frequency histogram as a standalone SVG: one panel per
//! margin, bars for the selected covariates' relative frequencies.

use bivsurv::brbvs::{BrbvsResult, MarginSelection};
use std::fmt::Write;

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 300.0;
const MARGIN: f64 = 48.0;

pub fn render_svg(result: &BrbvsResult) -> String {
    let width = 2.0 * PANEL_W + 3.0 * MARGIN;
    let height = PANEL_H + 2.0 * MARGIN + 24.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">Relative selection frequencies (metric: {})</text>"#,
        width / 2.0,
        result.config.metric.code()
    );
    panel(&mut s, &result.margin1, MARGIN, "Survival 1");
    panel(&mut s, &result.margin2, 2.0 * MARGIN + PANEL_W, "Survival 2");
    s.push_str("</svg>\n");
    s
}

fn panel(s: &mut String, sel: &MarginSelection, x0: f64, title: &str) {
    let y0 = MARGIN + 16.0;
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle">{title}</text>"#,
        x0 + PANEL_W / 2.0,
        y0 - 8.0
    );
    // Axes.
    let _ = writeln!(
        s,
        r#"<line x1="{x0:.1}" y1="{:.1}" x2="{x0:.1}" y2="{:.1}" stroke="black" stroke-width="1"/>"#,
        y0,
        y0 + PANEL_H
    );
    let _ = writeln!(
        s,
        r#"<line x1="{x0:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black" stroke-width="1"/>"#,
        y0 + PANEL_H,
        x0 + PANEL_W,
        y0 + PANEL_H
    );
    for tick in [0.0f64, 0.25, 0.5, 0.75, 1.0] {
        let y = y0 + PANEL_H * (1.0 - tick);
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{x0:.1}" y2="{y:.1}" stroke="black" stroke-width="1"/>"#,
            x0 - 4.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="end">{tick:.2}</text>"#,
            x0 - 7.0,
            y + 3.0
        );
    }
    if sel.frequencies.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle" fill="gray">no variables selected</text>"#,
            x0 + PANEL_W / 2.0,
            y0 + PANEL_H / 2.0
        );
        return;
    }
    let k = sel.frequencies.len() as f64;
    let slot = PANEL_W / k;
    let bar_w = (slot * 0.6).min(60.0);
    for (i, (name, freq)) in sel.frequencies.iter().enumerate() {
        let cx = x0 + slot * (i as f64 + 0.5);
        let h = PANEL_H * freq.clamp(0.0, 1.0);
        let _ = writeln!(
            s,
            r##"<rect x="{:.1}" y="{:.1}" width="{bar_w:.1}" height="{h:.1}" fill="#4878a8"/>"##,
            cx - bar_w / 2.0,
            y0 + PANEL_H - h
        );
        let _ = writeln!(
            s,
            r#"<text x="{cx:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="middle">{:.2}</text>"#,
            y0 + PANEL_H - h - 4.0,
            freq
        );
        let _ = writeln!(
            s,
            r#"<text x="{cx:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{name}</text>"#,
            y0 + PANEL_H + 14.0
        );
    }
}
