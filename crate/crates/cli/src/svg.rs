//! Minimal SVG charts: line plots, heatmaps and horizontal bars. Each chart
//! is one `<g class="plot">` element, stacked vertically.

use std::fmt::Write;

const W: f64 = 560.0;
const H: f64 = 320.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 44.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub name: String,
    pub ys: Vec<f64>,
}

pub enum Chart {
    /// Curves over a shared x axis; `x_labels` marks a categorical axis.
    Lines {
        xs: Vec<f64>,
        x_labels: Option<Vec<String>>,
        x_title: String,
        y_title: String,
        series: Vec<Series>,
    },
    /// `values[row][col]`, rows drawn bottom to top.
    Heatmap {
        x_labels: Vec<String>,
        y_labels: Vec<String>,
        x_title: String,
        y_title: String,
        values: Vec<Vec<f64>>,
    },
    /// Horizontal bars from `start` to `end`, one per label, top to bottom.
    Bars {
        labels: Vec<String>,
        start: Vec<f64>,
        end: Vec<f64>,
        x_title: String,
    },
}

pub struct Plot {
    pub id: String,
    pub title: String,
    pub chart: Chart,
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub fn render(plots: &[Plot], meta: &str) -> String {
    let total = H * plots.len().max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{total}" viewBox="0 0 {W} {total}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, "<metadata>{}</metadata>", escape(meta));
    for (i, p) in plots.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<g class="plot" data-id="{}" transform="translate(0,{})">"#,
            escape(&p.id),
            i as f64 * H
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            escape(&p.title)
        );
        match &p.chart {
            Chart::Lines { xs, x_labels, x_title, y_title, series } => lines(&mut s, xs, x_labels.as_deref(), x_title, y_title, series),
            Chart::Heatmap { x_labels, y_labels, x_title, y_title, values } => heatmap(&mut s, x_labels, y_labels, x_title, y_title, values),
            Chart::Bars { labels, start, end, x_title } => bars(&mut s, labels, start, end, x_title),
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

struct Scale {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, a: f64, b: f64) -> Self {
        let (lo, hi) = if !(hi > lo) { (lo - 0.5, lo + 0.5) } else { (lo, hi) };
        Scale { lo, hi, a, b }
    }

    fn of(&self, v: f64) -> f64 {
        self.a + (v - self.lo) / (self.hi - self.lo) * (self.b - self.a)
    }
}

fn extent<'a>(vals: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    vals.filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn tick(v: f64) -> String {
    let r = format!("{v:.3}");
    let r = r.trim_end_matches('0').trim_end_matches('.');
    if r == "-0" { "0".into() } else { r.to_string() }
}

fn frame(s: &mut String, x_title: &str, y_title: &str) {
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + (W - LEFT - RIGHT) / 2.0,
        H - 8.0,
        escape(x_title)
    );
    let cy = TOP + (H - TOP - BOTTOM) / 2.0;
    let _ = writeln!(
        s,
        r#"<text x="14" y="{cy}" text-anchor="middle" transform="rotate(-90 14 {cy})">{}</text>"#,
        escape(y_title)
    );
}

fn y_ticks(s: &mut String, ys: &Scale) {
    for k in 0..=4 {
        let v = ys.lo + (ys.hi - ys.lo) * k as f64 / 4.0;
        let y = ys.of(v);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 4.0, y + 4.0, tick(v));
    }
}

fn lines(s: &mut String, xs: &[f64], x_labels: Option<&[String]>, x_title: &str, y_title: &str, series: &[Series]) {
    frame(s, x_title, y_title);
    let (xlo, xhi) = extent(xs.iter());
    let (ylo, yhi) = extent(series.iter().flat_map(|c| c.ys.iter()));
    let xsc = Scale::new(xlo, xhi, LEFT + 6.0, W - RIGHT - 6.0);
    let ysc = Scale::new(ylo, yhi, H - BOTTOM - 6.0, TOP + 6.0);
    y_ticks(s, &ysc);
    match x_labels {
        Some(labels) => {
            for (x, l) in xs.iter().zip(labels) {
                let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, xsc.of(*x), H - BOTTOM + 14.0, escape(l));
            }
        }
        None => {
            for k in 0..=4 {
                let v = xsc.lo + (xsc.hi - xsc.lo) * k as f64 / 4.0;
                let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, xsc.of(v), H - BOTTOM + 14.0, tick(v));
            }
        }
    }
    let width = if series.len() > 20 { 0.6 } else { 1.6 };
    for (i, c) in series.iter().enumerate() {
        let pts: Vec<String> = xs
            .iter()
            .zip(&c.ys)
            .filter(|(_, y)| y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", xsc.of(*x), ysc.of(*y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-name="{}" fill="none" stroke="{}" stroke-width="{width}" points="{}"/>"#,
            escape(&c.name),
            PALETTE[i % PALETTE.len()],
            pts.join(" ")
        );
    }
}

/// Blue for negative, red for positive, white at zero.
fn diverging(v: f64, m: f64) -> String {
    let t = if m > 0.0 { (v / m).clamp(-1.0, 1.0) } else { 0.0 };
    let fade = |c: f64| (255.0 - (255.0 - c) * t.abs()).round() as u8;
    if t >= 0.0 {
        format!("rgb({},{},{})", fade(202.0), fade(0.0), fade(32.0))
    } else {
        format!("rgb({},{},{})", fade(5.0), fade(113.0), fade(176.0))
    }
}

fn heatmap(s: &mut String, x_labels: &[String], y_labels: &[String], x_title: &str, y_title: &str, values: &[Vec<f64>]) {
    frame(s, x_title, y_title);
    let (nx, ny) = (x_labels.len().max(1), y_labels.len().max(1));
    let cw = (W - LEFT - RIGHT) / nx as f64;
    let ch = (H - TOP - BOTTOM) / ny as f64;
    let m = values.iter().flatten().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
    for (r, row) in values.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"><title>{}</title></rect>"#,
                LEFT + c as f64 * cw,
                H - BOTTOM - (r + 1) as f64 * ch,
                cw,
                ch,
                diverging(*v, m),
                tick(*v)
            );
        }
    }
    let every = |n: usize| n.div_ceil(8).max(1);
    for (c, l) in x_labels.iter().enumerate().step_by(every(nx)) {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, LEFT + (c as f64 + 0.5) * cw, H - BOTTOM + 14.0, escape(l));
    }
    for (r, l) in y_labels.iter().enumerate().step_by(every(ny)) {
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 4.0, H - BOTTOM - (r as f64 + 0.5) * ch + 4.0, escape(l));
    }
}

fn bars(s: &mut String, labels: &[String], start: &[f64], end: &[f64], x_title: &str) {
    frame(s, x_title, "");
    let (lo, hi) = extent(start.iter().chain(end));
    let xsc = Scale::new(lo.min(0.0), hi.max(0.0), LEFT + 6.0, W - RIGHT - 6.0);
    let n = labels.len().max(1);
    let bh = (H - TOP - BOTTOM) / n as f64;
    for (i, l) in labels.iter().enumerate() {
        let (a, b) = (xsc.of(start[i]), xsc.of(end[i]));
        let fill = if end[i] >= start[i] { "#d62728" } else { "#1f77b4" };
        let y = TOP + i as f64 * bh;
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"><title>{}: {}</title></rect>"#,
            a.min(b),
            y + bh * 0.15,
            (a - b).abs().max(0.5),
            bh * 0.7,
            escape(l),
            tick(end[i] - start[i])
        );
        if n <= 40 {
            let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 4.0, y + bh / 2.0 + 4.0, escape(l));
        }
    }
    for k in 0..=4 {
        let v = xsc.lo + (xsc.hi - xsc.lo) * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, xsc.of(v), H - BOTTOM + 14.0, tick(v));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escapes_markup() {
        assert_eq!(escape(r#"a<b & "c">"#), "a&lt;b &amp; &quot;c&quot;&gt;");
    }

    #[test]
    fn one_group_per_plot() {
        let plots: Vec<Plot> = (0..3)
            .map(|i| Plot {
                id: format!("p{i}"),
                title: "t".into(),
                chart: Chart::Lines {
                    xs: vec![0.0, 1.0],
                    x_labels: None,
                    x_title: "x".into(),
                    y_title: "y".into(),
                    series: vec![Series { name: "s".into(), ys: vec![1.0, 1.0] }],
                },
            })
            .collect();
        let svg = render(&plots, "{}");
        assert_eq!(svg.matches(r#"<g class="plot""#).count(), 3);
        assert!(!svg.contains("NaN"));
    }
}
