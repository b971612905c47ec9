//! Minimal SVG line plots for the `cpi,series,value` curves.

use std::collections::BTreeMap;
use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 48.0;
const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

/// Renders `series -> [(cpi, value)]` with a fixed `[0, 1]` y-axis.
pub fn line_plot(title: &str, series: &BTreeMap<String, Vec<(usize, f64)>>) -> String {
    let (mut x0, mut x1) = (usize::MAX, 0usize);
    for pts in series.values() {
        for &(p, _) in pts {
            x0 = x0.min(p);
            x1 = x1.max(p);
        }
    }
    if x0 > x1 {
        (x0, x1) = (0, 1);
    }
    let span = (x1 - x0).max(1) as f64;
    let sx = |p: usize| PAD + (p - x0) as f64 / span * (W - 2.0 * PAD);
    let sy = |v: f64| H - PAD - v.clamp(0.0, 1.0) * (H - 2.0 * PAD);

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let y = sy(tick);
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{tick}</text>"#, PAD - 6.0, y + 4.0);
        let _ = writeln!(out, r##"<line x1="{PAD}" x2="{}" y1="{y}" y2="{y}" stroke="#ddd"/>"##, W - PAD);
    }
    let _ = writeln!(out, r#"<text x="{PAD}" y="{}" text-anchor="middle">{x0}</text>"#, H - PAD + 16.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{x1}</text>"#, W - PAD, H - PAD + 16.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">CPI</text>"#, W / 2.0, H - 10.0);

    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut d = String::new();
        for (j, &(p, v)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.2} {:.2}", if j == 0 { "M" } else { " L" }, sx(p), sy(v));
        }
        let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#);
        let ly = PAD + 16.0 * i as f64;
        let _ = writeln!(out, r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#, W - PAD - 90.0, escape(name));
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Parses a `cpi,series,value` CSV back into per-series points.
pub fn parse_csv(text: &str) -> BTreeMap<String, Vec<(usize, f64)>> {
    let mut out: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
    for line in text.lines().skip(1) {
        let mut it = line.splitn(3, ',');
        if let (Some(p), Some(s), Some(v)) = (it.next(), it.next(), it.next()) {
            if let (Ok(p), Ok(v)) = (p.parse(), v.parse()) {
                out.entry(s.to_string()).or_default().push((p, v));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_render() {
        let csv = "cpi,series,value\n0,sarsa,0.5\n1,sarsa,1\n0,optimal,1\n";
        let s = parse_csv(csv);
        assert_eq!(s["sarsa"], vec![(0, 0.5), (1, 1.0)]);
        let svg = line_plot("P_D <bin 5>", &s);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("&lt;bin 5&gt;"));
        assert_eq!(svg.matches("stroke-width=\"1.5\"").count(), 2);
    }

    #[test]
    fn empty_input_still_renders() {
        assert!(line_plot("x", &BTreeMap::new()).ends_with("</svg>\n"));
    }
}
