//! Minimal SVG rendering of performance profiles on a `log₂ α` axis.

use std::fmt::Write;

use super::ProfilePoint;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

pub fn render(points: &[ProfilePoint]) -> String {
    let mut solvers: Vec<&str> = Vec::new();
    for p in points {
        if !solvers.contains(&p.solver.as_str()) {
            solvers.push(&p.solver);
        }
    }
    let max_log = points.iter().map(|p| p.alpha.log2()).fold(1.0, f64::max);
    let sx = |a: f64| MARGIN + a.log2() / max_log * (W - 2.0 * MARGIN);
    let sy = |pi: f64| H - MARGIN - pi * (H - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<path d="M{m} {t} L{m} {b} L{r} {b}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    );
    let ticks = max_log.ceil() as i64;
    for k in 0..=ticks {
        let x = sx(2f64.powi(k as i32));
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{y:.1}" font-size="11" text-anchor="middle">{k}</text>"#,
            y = H - MARGIN + 16.0
        );
    }
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{y:.1}" font-size="11" text-anchor="end">{v:.2}</text>"#,
            x = MARGIN - 6.0,
            y = sy(v) + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{x:.1}" y="{y:.1}" font-size="12" text-anchor="middle">log2(alpha)</text>"#,
        x = W / 2.0,
        y = H - 12.0
    );
    for (i, s) in solvers.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut d = String::new();
        let mut prev: Option<f64> = None;
        for p in points.iter().filter(|p| p.solver == *s) {
            let (x, y) = (sx(p.alpha), sy(p.pi));
            match prev {
                None => {
                    let _ = write!(d, "M{x:.2} {y:.2}");
                }
                Some(py) => {
                    let _ = write!(d, " L{x:.2} {py:.2} L{x:.2} {y:.2}");
                }
            }
            prev = Some(y);
        }
        let _ = writeln!(
            out,
            r#"<path d="{d}" stroke="{color}" stroke-width="2" fill="none"/>"#
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{y:.1}" font-size="12" fill="{color}">{s}</text>"#,
            x = W - MARGIN - 120.0,
            y = MARGIN + 16.0 * (i as f64 + 1.0)
        );
    }
    out.push_str("</svg>\n");
    out
}
