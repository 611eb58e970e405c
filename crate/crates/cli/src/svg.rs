use std::fmt::Write;

#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub eps: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<Point>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

fn log_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| *v > 0.0 && v.is_finite())
        .map(f64::log10)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return None;
    }
    let pad = ((hi - lo) * 0.05).max(0.05);
    Some((lo - pad, hi + pad))
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Log-log line chart: log10 eps on x, log10 median on y, quartile whiskers.
/// Non-positive values are dropped. `timestamp` is embedded as metadata.
pub fn loglog_chart(
    title: &str,
    y_label: &str,
    series: &[Series],
    timestamp: Option<u64>,
) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let x_range = log_range(all().map(|p| p.eps));
    let y_range = log_range(all().flat_map(|p| [p.median, p.q1, p.q3]));
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    if let Some(ts) = timestamp {
        let _ = writeln!(svg, "<metadata>generated_unix={ts}</metadata>");
    }
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
        escape(title)
    );
    let (Some((x0, x1)), Some((y0, y1))) = (x_range, y_range) else {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">no positive data</text>"#,
            WIDTH / 2.0,
            HEIGHT / 2.0
        );
        svg.push_str("</svg>\n");
        return svg;
    };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |v: f64| LEFT + (v.log10() - x0) / (x1 - x0) * plot_w;
    let sy = |v: f64| TOP + (y1 - v.log10()) / (y1 - y0) * plot_h;

    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for k in 0..TICKS {
        let t = k as f64 / (TICKS - 1) as f64;
        let xv = x0 + t * (x1 - x0);
        let px = LEFT + t * plot_w;
        let _ = writeln!(
            svg,
            r##"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="#ccc"/><text x="{px:.2}" y="{}" text-anchor="middle">{:.2e}</text>"##,
            TOP,
            TOP + plot_h,
            TOP + plot_h + 16.0,
            10f64.powf(xv)
        );
        let yv = y1 - t * (y1 - y0);
        let py = TOP + t * plot_h;
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="#ccc"/><text x="{}" y="{:.2}" text-anchor="end">{:.2e}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            py + 4.0,
            10f64.powf(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">eps (log scale)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<&Point> = s
            .points
            .iter()
            .filter(|p| p.eps > 0.0 && p.median > 0.0 && p.median.is_finite())
            .collect();
        let path: Vec<String> = points
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.eps), sy(p.median)))
            .collect();
        if path.len() > 1 {
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                path.join(" ")
            );
        }
        for p in &points {
            let (px, py) = (sx(p.eps), sy(p.median));
            if p.q1 > 0.0 && p.q3 > 0.0 {
                let _ = writeln!(
                    svg,
                    r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="{color}"/>"#,
                    sy(p.q1),
                    sy(p.q3)
                );
            }
            let _ = writeln!(
                svg,
                r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{color}"/>"#
            );
        }
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series() -> Vec<Series> {
        vec![Series {
            label: "a<b".into(),
            points: vec![
                Point {
                    eps: 0.2,
                    median: 1e-2,
                    q1: 8e-3,
                    q3: 1.2e-2,
                },
                Point {
                    eps: 0.1,
                    median: 3e-3,
                    q1: 2e-3,
                    q3: 4e-3,
                },
            ],
        }]
    }

    #[test]
    fn chart_structure() {
        let svg = loglog_chart("t", "err", &series(), None);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("a&lt;b"));
        assert!(!svg.contains("metadata"));
        assert!(loglog_chart("t", "err", &series(), Some(5)).contains("generated_unix=5"));
    }

    #[test]
    fn empty_chart_is_valid() {
        let svg = loglog_chart("t", "err", &[], None);
        assert!(svg.contains("no positive data") && svg.ends_with("</svg>\n"));
    }
}
