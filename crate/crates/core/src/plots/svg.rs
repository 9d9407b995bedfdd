use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{CurveGeometry, CurveKind, ForestGeometry, ForestRow, Style};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "geometry", rename_all = "snake_case")]
pub enum Plot {
    Roc(Vec<CurveGeometry>),
    Forest(ForestGeometry),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvgStyle {
    pub width: f64,
    pub height: f64,
    pub font_size: f64,
    pub title: Option<String>,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle {
            width: 480.0,
            height: 480.0,
            font_size: 12.0,
            title: None,
        }
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn stroke_attrs(s: &Style) -> String {
    let mut a = format!(
        "stroke=\"{}\" stroke-width=\"{:.2}\" fill=\"{}\"",
        escape(&s.color),
        s.width,
        escape(s.fill.as_deref().unwrap_or("none"))
    );
    if let Some(d) = &s.dash {
        let _ = write!(a, " stroke-dasharray=\"{}\"", escape(d));
    }
    a
}

fn header(out: &mut String, w: f64, h: f64, font: f64) {
    let _ = write!(
        out,
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
         width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\" font-family=\"sans-serif\" font-size=\"{font:.0}\">\n\
         <rect x=\"0\" y=\"0\" width=\"{w:.0}\" height=\"{h:.0}\" fill=\"white\"/>\n"
    );
}

fn title(out: &mut String, style: &SvgStyle) {
    if let Some(t) = &style.title {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-weight=\"bold\">{}</text>",
            style.width / 2.0,
            style.font_size + 6.0,
            escape(t)
        );
    }
}

/// Render a plot as an SVG 1.1 document. Output is a pure function of the
/// input.
pub fn render_svg(plot: &Plot, style: &SvgStyle) -> Result<String> {
    match plot {
        Plot::Roc(g) => render_roc(g, style),
        Plot::Forest(f) => render_forest(f, style),
    }
}

fn render_roc(geometry: &[CurveGeometry], style: &SvgStyle) -> Result<String> {
    if geometry.is_empty() || geometry.iter().all(|g| g.points.is_empty()) {
        return Err(Error::invalid("nothing to draw"));
    }
    let (left, right, top, bottom) = (60.0, 20.0, 30.0, 50.0);
    let pw = style.width - left - right;
    let ph = style.height - top - bottom;
    let sx = |x: f64| left + x * pw;
    let sy = |y: f64| top + (1.0 - y) * ph;
    let mut out = String::new();
    header(&mut out, style.width, style.height, style.font_size);
    title(&mut out, style);
    let _ = writeln!(
        out,
        "<g class=\"axes\"><rect x=\"{left:.2}\" y=\"{top:.2}\" width=\"{pw:.2}\" height=\"{ph:.2}\" fill=\"none\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        out,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"lightgray\" stroke-dasharray=\"3 3\"/>",
        sx(0.0),
        sy(0.0),
        sx(1.0),
        sy(1.0)
    );
    for k in 0..=5 {
        let v = k as f64 / 5.0;
        let _ = writeln!(
            out,
            "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{0:.2}\" y2=\"{2:.2}\" stroke=\"black\"/>\
             <text x=\"{0:.2}\" y=\"{3:.2}\" text-anchor=\"middle\">{4:.1}</text>",
            sx(v),
            sy(0.0),
            sy(0.0) + 5.0,
            sy(0.0) + 18.0,
            v
        );
        let _ = writeln!(
            out,
            "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{2:.2}\" y2=\"{1:.2}\" stroke=\"black\"/>\
             <text x=\"{3:.2}\" y=\"{4:.2}\" text-anchor=\"end\">{5:.1}</text>",
            sx(0.0),
            sy(v),
            sx(0.0) - 5.0,
            sx(0.0) - 8.0,
            sy(v) + 4.0,
            v
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">1\u{2212}Specificity</text>",
        left + pw / 2.0,
        style.height - 12.0
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{0:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0:.2})\">Sensitivity</text></g>",
        top + ph / 2.0
    );
    for g in geometry {
        let class = match g.kind {
            CurveKind::SrocLine => "sroc_line",
            CurveKind::CredibleRegion => "credible_region",
            CurveKind::PredictionRegion => "prediction_region",
            CurveKind::SummaryPoint => "summary_point",
            CurveKind::DataBubble => "data_bubble",
            CurveKind::Crosshair => "crosshair",
        };
        let _ = write!(out, "<g class=\"{class}\">");
        if let Some(l) = &g.style.label {
            let _ = write!(out, "<title>{}</title>", escape(l));
        }
        let attrs = stroke_attrs(&g.style);
        let coords = |pts: &[super::RocPoint]| {
            let mut s = String::new();
            for (k, p) in pts.iter().enumerate() {
                if k > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{:.2},{:.2}", sx(p.x), sy(p.y));
            }
            s
        };
        match g.kind {
            CurveKind::SrocLine => {
                let _ = write!(out, "<polyline points=\"{}\" {attrs}/>", coords(&g.points));
            }
            CurveKind::CredibleRegion | CurveKind::PredictionRegion => {
                let _ = write!(out, "<polygon points=\"{}\" {attrs}/>", coords(&g.points));
            }
            CurveKind::SummaryPoint | CurveKind::DataBubble => {
                let r = g.style.size.unwrap_or(3.0);
                for p in &g.points {
                    let _ = write!(out, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{r:.2}\" {attrs}/>", sx(p.x), sy(p.y));
                }
            }
            CurveKind::Crosshair => {
                for seg in g.points.chunks(2) {
                    if let [a, b] = seg {
                        let _ = write!(
                            out,
                            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" {attrs}/>",
                            sx(a.x),
                            sy(a.y),
                            sx(b.x),
                            sy(b.y)
                        );
                    }
                }
            }
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn render_forest(forest: &ForestGeometry, style: &SvgStyle) -> Result<String> {
    let rows: Vec<&ForestRow> = forest
        .groups
        .iter()
        .flat_map(|g| g.rows.iter().chain(g.summary.iter()))
        .collect();
    if rows.is_empty() {
        return Err(Error::invalid("nothing to draw"));
    }
    const ROW: f64 = 18.0;
    const UNIT: f64 = 4.0;
    let headings = forest.groups.iter().filter(|g| g.level.is_some()).count();
    let top = 40.0 + if style.title.is_some() { 16.0 } else { 0.0 };
    let height = top + ROW * (rows.len() + headings) as f64 + 50.0;
    let (x0, x1) = (240.0, style.width.max(640.0) - 110.0);
    let width = style.width.max(640.0);
    let (mut lo, mut hi) = if forest.measure.is_probability() {
        (0.0, 1.0)
    } else {
        rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.low), b.max(r.high)))
    };
    if !(hi > lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    let sx = |v: f64| x0 + (v - lo) / (hi - lo) * (x1 - x0);
    let mut out = String::new();
    header(&mut out, width, height, style.font_size);
    title(&mut out, style);
    let _ = writeln!(
        out,
        "<g class=\"header\"><text x=\"10\" y=\"{0:.2}\" font-weight=\"bold\">Study</text>\
         <text x=\"150\" y=\"{0:.2}\" font-weight=\"bold\">Data</text>\
         <text x=\"{1:.2}\" y=\"{0:.2}\" text-anchor=\"middle\" font-weight=\"bold\">{2}</text></g>",
        top - 12.0,
        (x0 + x1) / 2.0,
        escape(forest.measure.as_str())
    );
    let mut y = top;
    for g in &forest.groups {
        if let Some(level) = &g.level {
            y += ROW;
            let _ = writeln!(
                out,
                "<text class=\"group\" x=\"10\" y=\"{:.2}\" font-style=\"italic\">{}</text>",
                y - 5.0,
                escape(level)
            );
        }
        for (r, summary) in g.rows.iter().map(|r| (r, false)).chain(g.summary.iter().map(|r| (r, true))) {
            y += ROW;
            let cy = y - 5.0;
            let _ = write!(
                out,
                "<g class=\"{}\"><text x=\"10\" y=\"{:.2}\">{}</text><text x=\"150\" y=\"{:.2}\">{}</text>",
                if summary { "summary" } else { "study" },
                cy + 4.0,
                escape(&r.label),
                cy + 4.0,
                escape(&r.counts)
            );
            let _ = write!(
                out,
                "<line x1=\"{:.2}\" y1=\"{cy:.2}\" x2=\"{:.2}\" y2=\"{cy:.2}\" stroke=\"black\"/>",
                sx(r.low),
                sx(r.high)
            );
            let half = UNIT * r.marker_size;
            let cx = sx(r.estimate);
            if summary {
                let _ = write!(
                    out,
                    "<polygon points=\"{:.2},{cy:.2} {cx:.2},{:.2} {:.2},{cy:.2} {cx:.2},{:.2}\" fill=\"black\"/>",
                    cx - 2.0 * half,
                    cy - half,
                    cx + 2.0 * half,
                    cy + half
                );
            } else {
                let _ = write!(
                    out,
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"black\"/>",
                    cx - half,
                    cy - half,
                    2.0 * half,
                    2.0 * half
                );
            }
            let _ = writeln!(
                out,
                "<text x=\"{:.2}\" y=\"{:.2}\">{:.2} [{:.2}, {:.2}]</text></g>",
                x1 + 8.0,
                cy + 4.0,
                r.estimate,
                r.low,
                r.high
            );
        }
    }
    let axis_y = y + 10.0;
    let _ = write!(
        out,
        "<g class=\"axes\"><line x1=\"{x0:.2}\" y1=\"{axis_y:.2}\" x2=\"{x1:.2}\" y2=\"{axis_y:.2}\" stroke=\"black\"/>"
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let _ = write!(
            out,
            "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{0:.2}\" y2=\"{2:.2}\" stroke=\"black\"/>\
             <text x=\"{0:.2}\" y=\"{3:.2}\" text-anchor=\"middle\">{4:.2}</text>",
            sx(v),
            axis_y,
            axis_y + 5.0,
            axis_y + 18.0,
            v
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{RocPoint, Style};
    use super::*;

    fn line() -> CurveGeometry {
        CurveGeometry {
            kind: CurveKind::SrocLine,
            points: alloc::vec![RocPoint { x: 0.1, y: 0.5 }, RocPoint { x: 0.4, y: 0.8 }],
            style: Style::stroke("black", 2.0).with_label("a<b"),
        }
    }

    #[test]
    fn deterministic_and_labelled() {
        let p = Plot::Roc(alloc::vec![line()]);
        let a = render_svg(&p, &SvgStyle::default()).unwrap();
        let b = render_svg(&p, &SvgStyle::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("1\u{2212}Specificity") && a.contains("Sensitivity"));
        assert!(a.contains("a&lt;b"));
        assert!(a.starts_with("<?xml") && a.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn empty_is_an_error() {
        assert!(render_svg(&Plot::Roc(Vec::new()), &SvgStyle::default()).is_err());
    }
}
