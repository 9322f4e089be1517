//! Minimal static SVG line charts for sweep reports.

use std::fmt::Write;

/// One chart panel: a titled polyline of (x, y) points with axes and ticks.
struct Panel<'a> {
    title: &'a str,
    y_label: &'a str,
    points: &'a [(f64, f64)],
}

const WIDTH: f64 = 640.0;
const PANEL_HEIGHT: f64 = 240.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 40.0;

/// Renders the two-panel sweep figure: the divergence metric and the MSE,
/// each against the sweep's gamma values.
pub fn sweep_chart(div_points: &[(f64, f64)], mse_points: &[(f64, f64)]) -> String {
    let height = 2.0 * PANEL_HEIGHT;
    let mut out = String::new();
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
         width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\">\n\
         <rect width=\"{WIDTH}\" height=\"{height}\" fill=\"white\"/>\n"
    );
    let panels = [
        Panel {
            title: "Mean absolute divergence vs gamma",
            y_label: "div (mean abs)",
            points: div_points,
        },
        Panel {
            title: "Vector MSE vs gamma",
            y_label: "MSE",
            points: mse_points,
        },
    ];
    for (i, panel) in panels.iter().enumerate() {
        render_panel(&mut out, panel, i as f64 * PANEL_HEIGHT);
    }
    out.push_str("</svg>\n");
    out
}

fn data_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * hi.abs().max(1.0) {
        // degenerate span (single point or flat series): pad symmetrically
        let pad = hi.abs().max(1.0) * 0.05;
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

fn render_panel(out: &mut String, panel: &Panel, y_offset: f64) {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = y_offset + PANEL_HEIGHT - MARGIN_BOTTOM; // axis baseline
    let y1 = y_offset + MARGIN_TOP;
    let (xlo, xhi) = data_range(panel.points.iter().map(|p| p.0));
    let (ylo, yhi) = data_range(panel.points.iter().map(|p| p.1));
    let sx = |v: f64| x0 + (v - xlo) / (xhi - xlo) * (x1 - x0);
    let sy = |v: f64| y0 - (v - ylo) / (yhi - ylo) * (y0 - y1);

    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\" \
         text-anchor=\"middle\">{}</text>",
        (x0 + x1) / 2.0,
        y1 - 10.0,
        panel.title
    );
    // axes
    let _ = write!(
        out,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    );
    // x ticks
    for i in 0..=4 {
        let v = xlo + (xhi - xlo) * i as f64 / 4.0;
        let x = sx(v);
        let _ = write!(
            out,
            "<line x1=\"{x}\" y1=\"{y0}\" x2=\"{x}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{x}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{}</text>\n",
            y0 + 5.0,
            y0 + 18.0,
            format_tick(v)
        );
    }
    // y ticks
    for i in 0..=3 {
        let v = ylo + (yhi - ylo) * i as f64 / 3.0;
        let y = sy(v);
        let _ = write!(
            out,
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{x0}\" y2=\"{y}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\">{}</text>\n",
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0,
            format_tick(v)
        );
    }
    // axis labels
    let _ = write!(
        out,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\">gamma</text>\n\
         <text x=\"14\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{}</text>\n",
        (x0 + x1) / 2.0,
        y0 + 34.0,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        panel.y_label
    );
    // series
    if !panel.points.is_empty() {
        let path: Vec<String> = panel
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\"/>",
            path.join(" ")
        );
        for &(x, y) in panel.points {
            let _ = writeln!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"#1f6fb2\"/>",
                sx(x),
                sy(y)
            );
        }
    }
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (0.01..10000.0).contains(&a) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}
