//! CSV tables and an SVG plot of the leniency curve. Numbers are written
//! with a fixed precision so equal inputs give byte-identical files.

use std::fmt::Write;

use super::{summarize, ClassMetrics, ConfusionMatrix, LeniencyCurve};

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn confusion_csv(cm: &ConfusionMatrix, classes: &[String]) -> String {
    let mut out = String::from("true\\predicted");
    for c in classes {
        write!(out, ",{}", csv_field(c)).unwrap();
    }
    out.push('\n');
    for (row, name) in cm.counts.iter().zip(classes) {
        out.push_str(&csv_field(name));
        for v in row {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn per_class_csv(m: &ClassMetrics, classes: &[String]) -> String {
    let mut out = String::from("class,precision,recall,f1,support,flagged,excluded\n");
    for (p, name) in m.per_class.iter().zip(classes) {
        writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{},{},{}",
            csv_field(name),
            p.precision,
            p.recall,
            p.f1,
            p.support,
            !p.excluded && (p.precision_undefined || p.recall_undefined),
            p.excluded
        )
        .unwrap();
    }
    writeln!(out, "macro,{:.6},{:.6},{:.6},,,", m.macro_precision, m.macro_recall, m.macro_f1).unwrap();
    writeln!(out, "accuracy,,,{:.6},,,", m.accuracy).unwrap();
    out
}

/// One row per fold, then mean and sample standard deviation rows when
/// there are at least two folds.
pub fn folds_csv(folds: &[ClassMetrics]) -> String {
    let mut out = String::from("fold,macro_precision,macro_recall,macro_f1,accuracy\n");
    let cols: [fn(&ClassMetrics) -> f64; 4] =
        [|m| m.macro_precision, |m| m.macro_recall, |m| m.macro_f1, |m| m.accuracy];
    for (i, m) in folds.iter().enumerate() {
        write!(out, "{i}").unwrap();
        for f in cols {
            write!(out, ",{:.6}", f(m)).unwrap();
        }
        out.push('\n');
    }
    let stats: Vec<_> = cols.iter().filter_map(|f| summarize(&folds.iter().map(f).collect::<Vec<_>>()).ok()).collect();
    if stats.len() == cols.len() {
        out.push_str("mean");
        stats.iter().for_each(|s| write!(out, ",{:.6}", s.mean).unwrap());
        out.push_str("\nstd");
        stats.iter().for_each(|s| write!(out, ",{:.6}", s.std).unwrap());
        out.push('\n');
    }
    out
}

pub fn leniency_csv(curve: &LeniencyCurve) -> String {
    let mut out = String::from("radius_m,accuracy\n");
    for (r, a) in curve.radii.iter().zip(&curve.accuracy) {
        writeln!(out, "{r:.4},{a:.6}").unwrap();
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct SvgOptions {
    pub title: String,
    /// Radius where the curve crosses 50%, drawn as a marker.
    pub half_radius: Option<f64>,
    /// Another 50% radius drawn for comparison, with its label.
    pub reference: Option<(f64, String)>,
}

/// Accuracy against leniency radius, with a dashed 50% line.
pub fn leniency_svg(curve: &LeniencyCurve, opts: &SvgOptions) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (60.0, 20.0, 40.0, 50.0);
    let xmax = curve
        .radii
        .iter()
        .copied()
        .chain(opts.reference.as_ref().map(|r| r.0))
        .fold(0.0, f64::max)
        .max(1e-9);
    let px = |r: f64| left + r / xmax * (w - left - right);
    let py = |a: f64| top + (1.0 - a) * (h - top - bottom);

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#).unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#, w / 2.0, xml(&opts.title)).unwrap();
    // Axes and ticks.
    writeln!(s, r#"<g stroke="black" stroke-width="1"><line x1="{left}" y1="{}" x2="{}" y2="{}"/><line x1="{left}" y1="{top}" x2="{left}" y2="{}"/></g>"#, py(0.0), w - right, py(0.0), py(0.0)).unwrap();
    for i in 0..=5 {
        let a = i as f64 / 5.0;
        writeln!(s, r#"<text x="{}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{a:.1}</text>"#, left - 6.0, py(a) + 4.0).unwrap();
    }
    let step = nice_step(xmax);
    let mut r = 0.0;
    while r <= xmax + 1e-9 {
        writeln!(s, r#"<text x="{:.1}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{r:.1}</text>"#, px(r), py(0.0) + 16.0).unwrap();
        r += step;
    }
    writeln!(s, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">Leniency radius (m)</text>"#, (left + w - right) / 2.0, h - 12.0).unwrap();
    writeln!(s, r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">Accuracy</text>"#, (top + h - bottom) / 2.0, (top + h - bottom) / 2.0).unwrap();
    writeln!(s, r##"<line x1="{left}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#888" stroke-dasharray="4 4"/>"##, w - right, y = py(0.5)).unwrap();

    let points: Vec<String> = curve.radii.iter().zip(&curve.accuracy).map(|(&r, &a)| format!("{:.1},{:.1}", px(r), py(a))).collect();
    writeln!(s, r##"<polyline fill="none" stroke="#1f77b4" stroke-width="2" points="{}"/>"##, points.join(" ")).unwrap();
    if let Some(r) = opts.half_radius {
        writeln!(s, r##"<line x1="{x:.1}" y1="{top}" x2="{x:.1}" y2="{}" stroke="#1f77b4" stroke-dasharray="2 3"/>"##, py(0.0), x = px(r)).unwrap();
        writeln!(s, r##"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="#1f77b4">50% at {r:.2} m</text>"##, px(r) + 4.0, py(0.5) - 6.0).unwrap();
    }
    if let Some((r, label)) = &opts.reference {
        writeln!(s, r##"<line x1="{x:.1}" y1="{top}" x2="{x:.1}" y2="{}" stroke="#d62728" stroke-dasharray="6 3"/>"##, py(0.0), x = px(*r)).unwrap();
        writeln!(s, r##"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="#d62728">{} {r:.2} m</text>"##, px(*r) + 4.0, py(0.5) + 14.0, xml(label)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn nice_step(max: f64) -> f64 {
    let raw = max / 8.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|&s| s >= raw).unwrap_or(raw)
}

fn xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::super::{confusion, leniency_curve, metrics};
    use super::*;

    #[test]
    fn tables() {
        let cm = confusion(&[0, 1, 1], &[0, 1, 0], 2).unwrap();
        let names = vec!["a".to_string(), "b,c".to_string()];
        assert_eq!(confusion_csv(&cm, &names), "true\\predicted,a,\"b,c\"\na,1,1\n\"b,c\",0,1\n");
        let m = metrics(&cm).unwrap();
        let csv = per_class_csv(&m, &names);
        assert!(csv.starts_with("class,precision"));
        assert!(csv.contains("a,1.000000,0.500000,0.666667,2,false,false"));
        let f = folds_csv(&[m.clone(), m]);
        assert!(f.ends_with("std,0.000000,0.000000,0.000000,0.000000\n"));
    }

    #[test]
    fn svg_has_curve() {
        let c = leniency_curve(&[1.0, 3.0], &[0.0, 1.0, 2.0, 3.0]).unwrap();
        let s = leniency_svg(&c, &SvgOptions { title: "t".into(), half_radius: Some(1.0), reference: Some((3.4, "ref".into())) });
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("polyline") && s.contains("50% at 1.00 m") && s.contains("ref 3.40 m"));
        assert_eq!(leniency_csv(&c), "radius_m,accuracy\n0.0000,0.000000\n1.0000,0.500000\n2.0000,0.500000\n3.0000,1.000000\n");
    }
}
