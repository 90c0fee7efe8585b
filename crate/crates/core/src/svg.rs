//! Minimal SVG chart writers for the reports.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, x_label: &str, y_label: &str) {
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN / 2.0, MARGIN / 2.0 + 10.0);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 20.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 18 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let y = 44.0 + 16.0 * i as f64;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(out, r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{color}"/>"#, WIDTH - 170.0, y);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11">{}</text>"#,
            WIDTH - 155.0,
            y + 9.0,
            escape(name)
        );
    }
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

pub struct Scatter {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Draw the `y = x` reference line.
    pub diagonal: bool,
}

impl Scatter {
    pub fn render(&self) -> String {
        let all = || self.series.iter().flat_map(|s| s.points.iter());
        let (mut xmin, mut xmax) = extent(all().map(|p| p.0));
        let (mut ymin, mut ymax) = extent(all().map(|p| p.1));
        if self.diagonal {
            xmin = xmin.min(ymin);
            ymin = xmin;
            xmax = xmax.max(ymax);
            ymax = xmax;
        }
        let sx = |x: f64| MARGIN + (x - xmin) / (xmax - xmin) * (WIDTH - 1.5 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - ymin) / (ymax - ymin) * (HEIGHT - 1.5 * MARGIN - 10.0);

        let mut out = String::new();
        header(&mut out, &self.title);
        axes(&mut out, &self.x_label, &self.y_label);
        let _ = writeln!(
            out,
            r#"<text x="{MARGIN}" y="{:.1}" font-family="sans-serif" font-size="10">{xmin:.3}</text><text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="10">{xmax:.3}</text>"#,
            HEIGHT - MARGIN + 14.0,
            WIDTH - MARGIN / 2.0,
            HEIGHT - MARGIN + 14.0
        );
        if self.diagonal {
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="4 3"/>"#,
                sx(xmin),
                sy(ymin),
                sx(xmax),
                sy(ymax)
            );
        }
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            for &(x, y) in s.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
                let _ = writeln!(
                    out,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}" fill-opacity="0.6"/>"#,
                    sx(x),
                    sy(y)
                );
            }
        }
        let names: Vec<&str> = self.series.iter().map(|s| s.name.as_str()).collect();
        legend(&mut out, &names);
        out.push_str("</svg>\n");
        out
    }
}

/// Grouped bars: one group per entry of `groups`, one bar per entry of
/// `bar_names` inside each group.
pub struct BarChart {
    pub title: String,
    pub y_label: String,
    pub groups: Vec<(String, Vec<f64>)>,
    pub bar_names: Vec<String>,
}

impl BarChart {
    pub fn render(&self) -> String {
        let ymax = self
            .groups
            .iter()
            .flat_map(|g| g.1.iter().copied())
            .filter(|v| v.is_finite())
            .fold(0.0f64, f64::max);
        let ymax = if ymax > 0.0 { ymax * 1.1 } else { 1.0 };
        let plot_w = WIDTH - 1.5 * MARGIN;
        let plot_h = HEIGHT - 1.5 * MARGIN - 10.0;
        let group_w = plot_w / self.groups.len().max(1) as f64;
        let bar_w = 0.8 * group_w / self.bar_names.len().max(1) as f64;

        let mut out = String::new();
        header(&mut out, &self.title);
        axes(&mut out, "", &self.y_label);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="10">{:.3}</text>"#,
            MARGIN - 4.0,
            HEIGHT - MARGIN - plot_h,
            ymax
        );
        for (gi, (name, values)) in self.groups.iter().enumerate() {
            let gx = MARGIN + gi as f64 * group_w + 0.1 * group_w;
            for (bi, &v) in values.iter().enumerate() {
                let h = if v.is_finite() { v.max(0.0) / ymax * plot_h } else { 0.0 };
                let color = PALETTE[bi % PALETTE.len()];
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}"><title>{}: {v}</title></rect>"#,
                    gx + bi as f64 * bar_w,
                    HEIGHT - MARGIN - h,
                    bar_w,
                    h,
                    escape(self.bar_names.get(bi).map(String::as_str).unwrap_or(""))
                );
            }
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#,
                gx + 0.4 * group_w,
                HEIGHT - MARGIN + 16.0,
                escape(name)
            );
        }
        let names: Vec<&str> = self.bar_names.iter().map(String::as_str).collect();
        legend(&mut out, &names);
        out.push_str("</svg>\n");
        out
    }
}
