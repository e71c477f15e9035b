//! Self-contained SVG figures rendered from the suite's CSV files.
//!
//! Each panel is a `<g class="panel">` and each data mark (scatter point or
//! curve) carries `class="mark"`.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::run::{RECORD_HEADER, SWEEP_HEADER};

const FEASIBILITY_HEADER: &str = "b,d,seeds,feasible";
const PANEL_W: f64 = 220.0;
const PANEL_H: f64 = 200.0;
const MARGIN: f64 = 60.0;
const TOP: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Feasibility,
    AucMap,
    ThresholdCurves,
    MethodMap,
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "feasibility" => Ok(Figure::Feasibility),
            "auc_map" => Ok(Figure::AucMap),
            "threshold_curves" => Ok(Figure::ThresholdCurves),
            "method_map" => Ok(Figure::MethodMap),
            other => Err(Error::Config(format!("unknown figure `{other}`"))),
        }
    }
}

impl Figure {
    fn schema(self) -> &'static str {
        match self {
            Figure::Feasibility => FEASIBILITY_HEADER,
            Figure::AucMap | Figure::MethodMap => RECORD_HEADER,
            Figure::ThresholdCurves => SWEEP_HEADER,
        }
    }

    fn required(self) -> &'static [&'static str] {
        match self {
            Figure::Feasibility => &["b", "d", "seeds", "feasible"],
            Figure::AucMap => &["matrix_id", "b", "d", "T", "estimator", "method", "auc"],
            Figure::MethodMap => &["matrix_id", "b", "d", "method", "accuracy", "tpr", "fpr"],
            Figure::ThresholdCurves => &["matrix_id", "b", "d", "T", "tau", "accuracy"],
        }
    }
}

struct Table<'a> {
    columns: Vec<&'a str>,
    rows: Vec<Vec<&'a str>>,
}

impl<'a> Table<'a> {
    fn parse(text: &'a str, figure: Figure) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let Some(header) = lines.next() else {
            return Ok(Table { columns: figure.required().to_vec(), rows: Vec::new() });
        };
        let columns: Vec<&str> = header.split(',').map(str::trim).collect();
        let known: Vec<&str> = figure.schema().split(',').collect();
        if let Some(c) = columns.iter().find(|c| !known.contains(c)) {
            return Err(Error::SchemaMismatch(format!("unknown column `{c}` for this figure")));
        }
        if let Some(c) = figure.required().iter().find(|c| !columns.contains(c)) {
            return Err(Error::SchemaMismatch(format!("missing column `{c}`")));
        }
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let row: Vec<&str> = line.split(',').collect();
            if row.len() != columns.len() {
                return Err(Error::Parse(format!("row {}: {} fields, expected {}", n + 2, row.len(), columns.len())));
            }
            rows.push(row);
        }
        Ok(Table { columns, rows })
    }

    fn col(&self, name: &str) -> usize {
        self.columns.iter().position(|c| *c == name).expect("column checked")
    }

    fn text(&self, row: &[&'a str], name: &str) -> &'a str {
        row[self.col(name)]
    }

    /// `None` for empty cells.
    fn num(&self, row: &[&str], name: &str) -> Result<Option<f64>> {
        let s = row[self.col(name)];
        if s.is_empty() {
            return Ok(None);
        }
        s.parse().map(Some).map_err(|_| Error::Parse(format!("column {name}: bad number `{s}`")))
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Viridis-like ramp on `[0, 1]`.
fn color(v: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] =
        [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let pos = v * (STOPS.len() - 1) as f64;
    let k = (pos.floor() as usize).min(STOPS.len() - 2);
    let f = pos - k as f64;
    let (a, b) = (STOPS[k], STOPS[k + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

enum Mark {
    Point { x: f64, y: f64, value: f64 },
    Curve { points: Vec<(f64, f64)>, value: f64 },
}

struct Panel {
    title: String,
    x_label: &'static str,
    y_label: &'static str,
    marks: Vec<Mark>,
}

impl Panel {
    fn new(title: impl Into<String>, x_label: &'static str, y_label: &'static str) -> Self {
        Self { title: title.into(), x_label, y_label, marks: Vec::new() }
    }

    fn render(&self, out: &mut String, ox: f64, oy: f64) {
        let sx = |x: f64| x.clamp(0.0, 1.0) * PANEL_W;
        let sy = |y: f64| (1.0 - y.clamp(0.0, 1.0)) * PANEL_H;
        let _ = writeln!(out, r#"<g class="panel" transform="translate({ox},{oy})">"#);
        let _ = writeln!(out, r##"<rect x="0" y="0" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#444"/>"##);
        let _ = writeln!(out, r#"<text x="{}" y="-8" text-anchor="middle" font-size="12">{}</text>"#, PANEL_W / 2.0, escape(&self.title));
        for t in [0.0, 0.5, 1.0] {
            let (x, y) = (sx(t), sy(t));
            let _ = writeln!(out, r##"<line x1="{x}" y1="{PANEL_H}" x2="{x}" y2="{}" stroke="#444"/>"##, PANEL_H + 4.0);
            let _ = writeln!(out, r#"<text x="{x}" y="{}" text-anchor="middle" font-size="10">{t}</text>"#, PANEL_H + 16.0);
            let _ = writeln!(out, r##"<line x1="-4" y1="{y}" x2="0" y2="{y}" stroke="#444"/>"##);
            let _ = writeln!(out, r#"<text x="-7" y="{}" text-anchor="end" font-size="10">{t}</text>"#, y + 3.0);
        }
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">{}</text>"#, PANEL_W / 2.0, PANEL_H + 32.0, self.x_label);
        let _ = writeln!(
            out,
            r#"<text x="-34" y="{}" text-anchor="middle" font-size="11" transform="rotate(-90 -34 {})">{}</text>"#,
            PANEL_H / 2.0,
            PANEL_H / 2.0,
            self.y_label
        );
        for m in &self.marks {
            match m {
                Mark::Point { x, y, value } => {
                    let _ = writeln!(out, r#"<circle class="mark" cx="{:.2}" cy="{:.2}" r="3.5" fill="{}"/>"#, sx(*x), sy(*y), color(*value));
                }
                Mark::Curve { points, value } => {
                    let pts: Vec<String> = points.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
                    let _ = writeln!(
                        out,
                        r#"<polyline class="mark" points="{}" fill="none" stroke="{}" stroke-width="1.2"/>"#,
                        pts.join(" "),
                        color(*value)
                    );
                }
            }
        }
        out.push_str("</g>\n");
    }
}

/// Panels laid out row-major in a `rows × cols` grid.
fn render(title: &str, color_label: &str, panels: &[Panel], cols: usize) -> String {
    let cols = cols.max(1);
    let rows = panels.len().div_ceil(cols).max(1);
    let width = cols as f64 * (PANEL_W + MARGIN) + MARGIN;
    let height = rows as f64 * (PANEL_H + MARGIN) + TOP + MARGIN / 2.0;
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, width / 2.0, escape(title));
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="end" font-size="10">color: {}</text>"#, width - 10.0, escape(color_label));
    for (k, panel) in panels.iter().enumerate() {
        let (r, c) = (k / cols, k % cols);
        panel.render(&mut out, MARGIN + c as f64 * (PANEL_W + MARGIN), TOP + 10.0 + r as f64 * (PANEL_H + MARGIN));
    }
    out.push_str("</svg>\n");
    out
}

/// Distinct values in order of first appearance.
fn distinct<'a>(values: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen: Vec<&str> = Vec::new();
    for v in values {
        if !seen.contains(&v) {
            seen.push(v);
        }
    }
    seen
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn feasibility(t: &Table) -> Result<String> {
    let mut panel = Panel::new("feasible draws", "d", "b");
    for row in &t.rows {
        let (b, d) = (t.num(row, "b")?.unwrap_or(f64::NAN), t.num(row, "d")?.unwrap_or(f64::NAN));
        let seeds = t.num(row, "seeds")?.unwrap_or(0.0);
        let ok = t.num(row, "feasible")?.unwrap_or(0.0);
        panel.marks.push(Mark::Point { x: d, y: b, value: if seeds > 0.0 { ok / seeds } else { 0.0 } });
    }
    Ok(render("Feasibility map", "feasible fraction", &[panel], 1))
}

/// Mean `metric` per `(key, matrix)` over successful rows, with `(d, b)`.
fn per_matrix(t: &Table, key: impl Fn(&[&str]) -> Option<String>, metric: &str) -> Result<BTreeMap<String, BTreeMap<usize, (f64, f64, Vec<f64>)>>> {
    let mut out: BTreeMap<String, BTreeMap<usize, (f64, f64, Vec<f64>)>> = BTreeMap::new();
    let has_status = t.columns.contains(&"status");
    for row in &t.rows {
        if has_status && t.text(row, "status") != "ok" {
            continue;
        }
        let (Some(k), Some(v)) = (key(row), t.num(row, metric)?) else { continue };
        let id: usize = t.text(row, "matrix_id").parse().map_err(|_| Error::Parse("bad matrix_id".into()))?;
        let (b, d) = (t.num(row, "b")?.unwrap_or(f64::NAN), t.num(row, "d")?.unwrap_or(f64::NAN));
        out.entry(k).or_default().entry(id).or_insert((d, b, Vec::new())).2.push(v);
    }
    Ok(out)
}

fn auc_map(t: &Table) -> Result<String> {
    let estimators = distinct(t.rows.iter().filter(|r| t.text(r, "method") != "glasso_cv").map(|r| t.text(r, "estimator")));
    let mut ts: Vec<usize> = distinct(t.rows.iter().map(|r| t.text(r, "T"))).iter().filter_map(|s| s.parse().ok()).collect();
    ts.sort_unstable();
    let groups = per_matrix(
        t,
        |r| (t.text(r, "method") != "glasso_cv").then(|| format!("{}|{}", t.text(r, "estimator"), t.text(r, "T"))),
        "auc",
    )?;
    let mut panels = Vec::new();
    for &tv in &ts {
        for e in &estimators {
            let mut panel = Panel::new(format!("{e}, T = {tv}"), "d", "b");
            if let Some(g) = groups.get(&format!("{e}|{tv}")) {
                for (d, b, v) in g.values() {
                    panel.marks.push(Mark::Point { x: *d, y: *b, value: mean(v) });
                }
            }
            panels.push(panel);
        }
    }
    if panels.is_empty() {
        panels.push(Panel::new("no data", "d", "b"));
    }
    Ok(render("AUC by signal level and density", "AUC", &panels, estimators.len()))
}

fn method_map(t: &Table) -> Result<String> {
    let methods = distinct(t.rows.iter().map(|r| t.text(r, "method")));
    let mut panels = Vec::new();
    for metric in ["accuracy", "fpr", "tpr"] {
        let groups = per_matrix(t, |r| Some(t.text(r, "method").to_string()), metric)?;
        for m in &methods {
            let mut panel = Panel::new(format!("{m}: {metric}"), "d", "b");
            if let Some(g) = groups.get(*m) {
                for (d, b, v) in g.values() {
                    panel.marks.push(Mark::Point { x: *d, y: *b, value: mean(v) });
                }
            }
            panels.push(panel);
        }
    }
    if methods.is_empty() {
        panels.push(Panel::new("no data", "d", "b"));
    }
    Ok(render("Detection methods", "metric value", &panels, methods.len()))
}

const D_BINS: [(f64, f64, &str); 3] = [(0.0, 1.0 / 3.0, "d < 1/3"), (1.0 / 3.0, 2.0 / 3.0, "1/3 ≤ d < 2/3"), (2.0 / 3.0, f64::INFINITY, "d ≥ 2/3")];

fn threshold_curves(t: &Table) -> Result<String> {
    // (bin, T) -> matrix -> (b, points)
    let mut curves: BTreeMap<(usize, usize), BTreeMap<usize, (f64, Vec<(f64, f64)>)>> = BTreeMap::new();
    for row in &t.rows {
        let id: usize = t.text(row, "matrix_id").parse().map_err(|_| Error::Parse("bad matrix_id".into()))?;
        let tv: usize = t.text(row, "T").parse().map_err(|_| Error::Parse("bad T".into()))?;
        let (b, d) = (t.num(row, "b")?.unwrap_or(f64::NAN), t.num(row, "d")?.unwrap_or(f64::NAN));
        let (Some(tau), Some(acc)) = (t.num(row, "tau")?, t.num(row, "accuracy")?) else { continue };
        let bin = D_BINS.iter().position(|&(lo, hi, _)| d >= lo && d < hi).unwrap_or(0);
        curves.entry((bin, tv)).or_default().entry(id).or_insert((b, Vec::new())).1.push((tau, acc));
    }
    let mut ts: Vec<usize> = curves.keys().map(|k| k.1).collect();
    ts.sort_unstable();
    ts.dedup();
    let mut bins: Vec<usize> = curves.keys().map(|k| k.0).collect();
    bins.dedup();
    let mut panels = Vec::new();
    for &bin in &bins {
        for &tv in &ts {
            let mut panel = Panel::new(format!("{}, T = {tv}", D_BINS[bin].2), "tau", "accuracy");
            if let Some(group) = curves.get(&(bin, tv)) {
                for (b, pts) in group.values() {
                    let mut pts = pts.clone();
                    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                    panel.marks.push(Mark::Curve { points: pts, value: *b });
                }
            }
            panels.push(panel);
        }
    }
    if panels.is_empty() {
        panels.push(Panel::new("no data", "tau", "accuracy"));
    }
    Ok(render("Accuracy of a fixed threshold", "b", &panels, ts.len()))
}

/// Renders `figure` from CSV text.
pub fn plot(figure: Figure, csv: &str) -> Result<String> {
    let table = Table::parse(csv, figure)?;
    match figure {
        Figure::Feasibility => feasibility(&table),
        Figure::AucMap => auc_map(&table),
        Figure::MethodMap => method_map(&table),
        Figure::ThresholdCurves => threshold_curves(&table),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(svg: &str, pat: &str) -> usize {
        svg.matches(pat).count()
    }

    #[test]
    fn empty_results_give_axes_only() {
        for fig in [Figure::Feasibility, Figure::AucMap, Figure::MethodMap, Figure::ThresholdCurves] {
            let svg = plot(fig, &format!("{}\n", fig.schema())).unwrap();
            assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
            assert_eq!(count(&svg, r#"class="mark""#), 0);
            assert!(count(&svg, r#"class="panel""#) >= 1);
        }
    }

    #[test]
    fn one_record_one_mark() {
        let svg = plot(Figure::Feasibility, "b,d,seeds,feasible\n0.3,0.2,4,3\n").unwrap();
        assert_eq!(count(&svg, r#"class="mark""#), 1);
        // x = d·W, y = (1 − b)·H
        assert!(svg.contains(r#"cx="44.00" cy="140.00""#));

        let row = "0,0.3,0.2,100,0,covariance,empirical_corr,percolation,,1,1,0,1,0.6666666666666666,0.5,0,0.5,0.4,1.000,ok";
        let svg = plot(Figure::AucMap, &format!("{RECORD_HEADER}\n{row}\n")).unwrap();
        assert_eq!(count(&svg, r#"class="mark""#), 1);
        assert!(svg.contains(r#"cx="44.00" cy="140.00""#));
    }

    #[test]
    fn threshold_panels_follow_bins_and_t() {
        let mut csv = format!("{SWEEP_HEADER}\n");
        for (id, d) in [(0, 0.1), (1, 0.8)] {
            for t in [100, 500, 1000] {
                for tau in [0.0, 0.5, 1.0] {
                    csv.push_str(&format!("{id},0.3,{d},{t},{tau},0.5\n"));
                }
            }
        }
        let svg = plot(Figure::ThresholdCurves, &csv).unwrap();
        assert_eq!(count(&svg, r#"class="panel""#), 6);
        assert_eq!(count(&svg, r#"class="mark""#), 6);
    }

    #[test]
    fn unknown_columns_are_rejected() {
        assert!(matches!(plot(Figure::Feasibility, "b,d,seeds,feasible,colour\n"), Err(Error::SchemaMismatch(_))));
        assert!(matches!(plot(Figure::ThresholdCurves, "matrix_id,b,d,T,tau\n"), Err(Error::SchemaMismatch(_))));
        assert!(matches!(plot(Figure::AucMap, "b,d,seeds,feasible\n"), Err(Error::SchemaMismatch(_))));
    }
}
