//! Static SVG charts: grouped boxplots with 10-90 whiskers and overlaid
//! histograms. Coordinates are printed with two decimals.

use std::fmt::Write;

use drlatent::stats::Aggregates;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;

pub const BLUE: &str = "#4a78b5";
pub const GREEN: &str = "#3d9a50";
pub const RED: &str = "#c8453c";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str, metadata: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <metadata>{}</metadata>\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{:.2}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        escape(metadata),
        WIDTH / 2.0,
        escape(title)
    );
}

struct Scale {
    lo: f64,
    hi: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64) -> Self {
        let (lo, hi) = if lo.is_finite() && hi.is_finite() && hi > lo {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        } else if lo.is_finite() {
            (lo - 0.5, lo + 0.5)
        } else {
            (0.0, 1.0)
        };
        Self { lo, hi }
    }

    fn y(&self, v: f64) -> f64 {
        TOP + (HEIGHT - TOP - BOTTOM) * (self.hi - v) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<f64> {
        (0..=5)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / 5.0)
            .collect()
    }
}

fn y_axis(out: &mut String, scale: &Scale, label: &str) {
    for t in scale.ticks() {
        let y = scale.y(t);
        let _ = writeln!(
            out,
            "<line x1=\"{LEFT}\" x2=\"{:.2}\" y1=\"{y:.2}\" y2=\"{y:.2}\" stroke=\"#e4e4e4\"/>\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{t:.3}</text>",
            WIDTH - RIGHT,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        "<text transform=\"translate(18,{:.2}) rotate(-90)\" text-anchor=\"middle\">{}</text>",
        (TOP + HEIGHT - BOTTOM) / 2.0,
        escape(label)
    );
}

fn legend(out: &mut String, entries: &[(&str, &str)]) {
    if entries.len() < 2 {
        return;
    }
    for (i, (name, color)) in entries.iter().enumerate() {
        let x = LEFT + 10.0 + 150.0 * i as f64;
        let y = HEIGHT - 18.0;
        let _ = writeln!(
            out,
            "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\
             <text x=\"{:.2}\" y=\"{y:.2}\">{}</text>",
            y - 10.0,
            x + 16.0,
            escape(name)
        );
    }
}

/// One colour of boxes, aligned with the categories.
pub struct BoxSeries<'a> {
    pub name: &'a str,
    pub color: &'a str,
    pub boxes: Vec<Option<Aggregates>>,
}

pub fn boxplot(title: &str, y_label: &str, categories: &[String], series: &[BoxSeries], metadata: &str) -> String {
    let (lo, hi) = series
        .iter()
        .flat_map(|s| s.boxes.iter().flatten())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| {
            (lo.min(a.p10), hi.max(a.p90))
        });
    let scale = Scale::new(lo, hi);
    let mut out = String::new();
    header(&mut out, title, metadata);
    y_axis(&mut out, &scale, y_label);
    let slot = (WIDTH - LEFT - RIGHT) / categories.len().max(1) as f64;
    let width = (slot * 0.8 / series.len().max(1) as f64).min(40.0);
    for (c, name) in categories.iter().enumerate() {
        let centre = LEFT + slot * (c as f64 + 0.5);
        let _ = writeln!(
            out,
            "<text x=\"{centre:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            HEIGHT - BOTTOM + 16.0,
            escape(name)
        );
        for (k, s) in series.iter().enumerate() {
            let Some(a) = s.boxes.get(c).copied().flatten() else {
                continue;
            };
            let x = centre + width * (k as f64 - series.len() as f64 / 2.0);
            let mid = x + width / 2.0;
            let _ = writeln!(
                out,
                "<line x1=\"{mid:.2}\" x2=\"{mid:.2}\" y1=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\
                 <rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\" stroke=\"black\"/>\
                 <line x1=\"{:.2}\" x2=\"{:.2}\" y1=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"2\"/>",
                scale.y(a.p90),
                scale.y(a.p10),
                x + 1.0,
                scale.y(a.p75),
                width - 2.0,
                (scale.y(a.p25) - scale.y(a.p75)).max(0.5),
                s.color,
                x + 1.0,
                x + width - 1.0,
                scale.y(a.median),
                scale.y(a.median),
            );
        }
    }
    let entries: Vec<(&str, &str)> = series.iter().map(|s| (s.name, s.color)).collect();
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}

/// Overlaid histograms on shared bins.
pub fn histogram(title: &str, x_label: &str, series: &[(&str, &str, &[f64])], bins: usize, metadata: &str) -> String {
    let (lo, hi) = series
        .iter()
        .flat_map(|s| s.2.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else if lo.is_finite() {
        (lo - 0.5, lo + 0.5)
    } else {
        (0.0, 1.0)
    };
    let bins = bins.max(1);
    let width = (hi - lo) / bins as f64;
    let counts: Vec<Vec<usize>> = series
        .iter()
        .map(|s| {
            let mut c = vec![0; bins];
            for &v in s.2 {
                c[(((v - lo) / width) as usize).min(bins - 1)] += 1;
            }
            c
        })
        .collect();
    let max = counts.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    let scale = Scale {
        lo: 0.0,
        hi: max * 1.05,
    };
    let mut out = String::new();
    header(&mut out, title, metadata);
    y_axis(&mut out, &scale, "count");
    let px = (WIDTH - LEFT - RIGHT) / bins as f64;
    for (s, c) in series.iter().zip(&counts) {
        for (b, &n) in c.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\" fill-opacity=\"0.55\"/>",
                LEFT + px * b as f64,
                scale.y(n as f64),
                px,
                scale.y(0.0) - scale.y(n as f64),
                s.1
            );
        }
    }
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{v:.3}</text>",
            LEFT + (WIDTH - LEFT - RIGHT) * i as f64 / 4.0,
            HEIGHT - BOTTOM + 16.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
        WIDTH / 2.0,
        HEIGHT - BOTTOM + 36.0,
        escape(x_label)
    );
    let entries: Vec<(&str, &str)> = series.iter().map(|s| (s.0, s.1)).collect();
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boxplot_draws_one_box_per_group() {
        let a = Aggregates::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let svg = boxplot(
            "t",
            "y",
            &["a".into(), "b".into()],
            &[BoxSeries {
                name: "s",
                color: BLUE,
                boxes: vec![Some(a), None],
            }],
            "{\"seed\":1}",
        );
        assert_eq!(svg.matches(&format!("fill=\"{BLUE}\"")).count(), 1);
        assert!(svg.contains("<metadata>{\"seed\":1}</metadata>"));
    }

    #[test]
    fn histogram_counts_every_value() {
        let v = [0.0, 0.1, 0.1, 1.0];
        let svg = histogram("t", "x", &[("s", GREEN, &v)], 2, "");
        assert_eq!(svg.matches("<rect x=").count(), 2);
    }
}
