//! Minimal SVG charts for the benchmark report.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;
const PALETTE: [&str; 7] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d"];

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c if c.is_control() => {}
            c => out.push(c),
        }
    }
    out
}

fn open(title: &str, y_label: &str, y_max: f64) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = write!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = write!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, y0, y1) = (LEFT, HEIGHT - BOTTOM, TOP);
    let _ = write!(s, r#"<line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/>"#, WIDTH - RIGHT);
    let _ = write!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for k in 0..=4 {
        let v = y_max * k as f64 / 4.0;
        let y = y_of(v, y_max);
        let _ = write!(s, r##"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="#888"/>"##, x0 - 4.0);
        let _ = write!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 6.0, y + 4.0, format_tick(v));
    }
    let _ = write!(
        s,
        r#"<text x="16" y="{:.2}" transform="rotate(-90 16 {:.2})" text-anchor="middle">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
    s
}

fn format_tick(v: f64) -> String {
    if v >= 100.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn y_of(v: f64, y_max: f64) -> f64 {
    let h = HEIGHT - TOP - BOTTOM;
    HEIGHT - BOTTOM - h * (v / y_max).clamp(0.0, 1.0)
}

fn nice_max(m: f64) -> f64 {
    if !(m > 0.0) || !m.is_finite() {
        return 1.0;
    }
    let p = 10f64.powf(m.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0].iter().map(|k| k * p).find(|&c| c >= m).unwrap_or(10.0 * p)
}

fn legend(s: &mut String, names: &[&str]) {
    for (i, n) in names.iter().enumerate() {
        let x = LEFT + 10.0 + 110.0 * (i % 5) as f64;
        let y = HEIGHT - 30.0 + 16.0 * (i / 5) as f64;
        let _ = write!(s, r#"<rect x="{x}" y="{}" width="10" height="10" fill="{}"/>"#, y - 9.0, PALETTE[i % PALETTE.len()]);
        let _ = write!(s, r#"<text x="{}" y="{y}">{}</text>"#, x + 14.0, escape(n));
    }
}

/// Grouped bars: one group per category, one bar per series.
pub fn bar_chart(title: &str, y_label: &str, categories: &[String], series: &[(String, Vec<f64>)]) -> String {
    let y_max = nice_max(series.iter().flat_map(|(_, v)| v.iter().copied()).fold(0.0, f64::max));
    let mut s = open(title, y_label, y_max);
    let plot_w = WIDTH - LEFT - RIGHT;
    let group_w = plot_w / categories.len().max(1) as f64;
    let bar_w = 0.8 * group_w / series.len().max(1) as f64;
    for (ci, c) in categories.iter().enumerate() {
        let gx = LEFT + group_w * ci as f64 + 0.1 * group_w;
        for (si, (_, values)) in series.iter().enumerate() {
            let v = values.get(ci).copied().unwrap_or(0.0);
            let y = y_of(v, y_max);
            let _ = write!(
                s,
                r#"<rect x="{:.2}" y="{y:.2}" width="{bar_w:.2}" height="{:.2}" fill="{}"/>"#,
                gx + bar_w * si as f64,
                HEIGHT - BOTTOM - y,
                PALETTE[si % PALETTE.len()]
            );
        }
        let _ = write!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + group_w * (ci as f64 + 0.5),
            HEIGHT - BOTTOM + 16.0,
            escape(c)
        );
    }
    legend(&mut s, &series.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Box-and-whisker plot (min, quartiles, max) per group; empty groups are
/// labelled as having no data.
pub fn box_plot(title: &str, y_label: &str, groups: &[(String, Vec<f64>)]) -> String {
    let y_max = nice_max(groups.iter().flat_map(|(_, v)| v.iter().copied()).fold(0.0, f64::max));
    let mut s = open(title, y_label, y_max);
    let plot_w = WIDTH - LEFT - RIGHT;
    let slot = plot_w / groups.len().max(1) as f64;
    for (i, (name, values)) in groups.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        let color = PALETTE[i % PALETTE.len()];
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        v.sort_by(f64::total_cmp);
        if v.is_empty() {
            let _ = write!(s, r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">no data</text>"#, HEIGHT - BOTTOM - 10.0);
        } else {
            let [lo, q1, med, q3, hi] = [0.0, 0.25, 0.5, 0.75, 1.0].map(|q| y_of(quantile(&v, q), y_max));
            let w = (0.5 * slot).min(60.0);
            let _ = write!(s, r#"<line x1="{cx:.2}" y1="{lo:.2}" x2="{cx:.2}" y2="{hi:.2}" stroke="{color}"/>"#);
            let _ = write!(
                s,
                r#"<rect x="{:.2}" y="{q3:.2}" width="{w:.2}" height="{:.2}" fill="{color}" fill-opacity="0.4" stroke="{color}"/>"#,
                cx - w / 2.0,
                (q1 - q3).max(0.5)
            );
            let _ = write!(
                s,
                r#"<line x1="{:.2}" y1="{med:.2}" x2="{:.2}" y2="{med:.2}" stroke="black" stroke-width="2"/>"#,
                cx - w / 2.0,
                cx + w / 2.0
            );
        }
        let _ = write!(
            s,
            r#"<text x="{cx:.2}" y="{}" text-anchor="middle">{}</text>"#,
            HEIGHT - BOTTOM + 16.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}
