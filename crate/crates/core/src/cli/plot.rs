//! Static SVG charts of relative efficiency against `p`.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::estimators::EstimatorId;
use crate::harness::ResultRow;

const PANEL_W: f64 = 640.0;
const PANEL_H: f64 = 360.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 140.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

fn color(id: EstimatorId) -> &'static str {
    match id {
        EstimatorId::SrsEmp => "#000000",
        EstimatorId::SrsLf => "#1f77b4",
        EstimatorId::SrsHd => "#ff7f0e",
        EstimatorId::RssEmp => "#2ca02c",
        EstimatorId::RssLf => "#d62728",
        EstimatorId::RssHd => "#9467bd",
        EstimatorId::OrssLf => "#8c564b",
        EstimatorId::OrssHd => "#e377c2",
    }
}

#[derive(Clone, Debug, Default)]
pub struct Facet {
    pub distribution: Option<String>,
    pub rho: Option<f64>,
    pub m: Option<usize>,
    pub k: Option<usize>,
}

impl Facet {
    fn keeps(&self, r: &ResultRow) -> bool {
        self.distribution.as_ref().is_none_or(|d| *d == r.distribution)
            && self.rho.is_none_or(|rho| r.rho == Some(rho))
            && self.m.is_none_or(|m| m == r.m)
            && self.k.is_none_or(|k| k == r.k)
    }
}

type PanelKey = (String, Option<f64>, usize, usize);

fn panel_title(key: &PanelKey) -> String {
    let rho = key.1.map_or_else(|| "population".to_string(), |r| format!("rho = {r}"));
    format!("{}, {rho}, (m, k) = ({}, {})", key.0, key.2, key.3)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders one panel per `(distribution, rho, m, k)` group left after
/// filtering, stacked vertically in order of first appearance.
pub fn render_svg(rows: &[ResultRow], facet: &Facet) -> Result<String> {
    let rows: Vec<&ResultRow> = rows.iter().filter(|r| facet.keeps(r)).collect();
    if rows.is_empty() {
        return Err(Error::Malformed("no result rows to plot".into()));
    }
    let mut panels: Vec<(PanelKey, Vec<&ResultRow>)> = Vec::new();
    for r in rows {
        let key = (r.distribution.clone(), r.rho, r.m, r.k);
        match panels.iter_mut().find(|(k, _)| *k == key) {
            Some((_, group)) => group.push(r),
            None => panels.push((key, vec![r])),
        }
    }

    let total_h = PANEL_H * panels.len() as f64;
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" height="{total_h}" viewBox="0 0 {PANEL_W} {total_h}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{PANEL_W}" height="{total_h}" fill="white"/>"#).unwrap();
    for (idx, (key, group)) in panels.iter().enumerate() {
        draw_panel(&mut svg, idx as f64 * PANEL_H, key, group);
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn draw_panel(svg: &mut String, top: f64, key: &PanelKey, rows: &[&ResultRow]) {
    let finite: Vec<&&ResultRow> = rows.iter().filter(|r| r.re.is_finite()).collect();
    let (mut p_lo, mut p_hi) = finite.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.p), b.max(r.p)));
    if !p_lo.is_finite() {
        (p_lo, p_hi) = (0.0, 1.0);
    }
    if p_hi - p_lo < 1e-9 {
        p_lo -= 0.05;
        p_hi += 0.05;
    }
    let re_max = finite.iter().map(|r| r.re).fold(1.2f64, f64::max) * 1.1;
    let (x0, x1) = (MARGIN_L, PANEL_W - MARGIN_R);
    let (y0, y1) = (top + PANEL_H - MARGIN_B, top + MARGIN_T);
    let sx = |p: f64| x0 + (p - p_lo) / (p_hi - p_lo) * (x1 - x0);
    let sy = |re: f64| y0 - re / re_max * (y0 - y1);

    writeln!(svg, r#"<g class="panel">"#).unwrap();
    writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, top + 20.0, escape(&panel_title(key))).unwrap();
    writeln!(svg, r##"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##, x1 - x0, y0 - y1).unwrap();
    for i in 0..=4 {
        let re = re_max * i as f64 / 4.0;
        writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{re:.2}</text>"#, x0 - 6.0, sy(re) + 4.0).unwrap();
        let p = p_lo + (p_hi - p_lo) * i as f64 / 4.0;
        writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{p:.2}</text>"#, sx(p), y0 + 18.0).unwrap();
    }
    writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">p</text>"#, (x0 + x1) / 2.0, y0 + 38.0).unwrap();
    writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">RE</text>"#, x0 - 44.0, (y0 + y1) / 2.0, x0 - 44.0, (y0 + y1) / 2.0).unwrap();
    writeln!(svg, r##"<line class="reference" x1="{x0:.2}" y1="{:.2}" x2="{x1:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="6 4"/>"##, sy(1.0), sy(1.0)).unwrap();

    let mut ids: Vec<EstimatorId> = rows.iter().map(|r| r.estimator).collect();
    ids.sort();
    ids.dedup();
    for (li, &id) in ids.iter().enumerate() {
        let mut pts: Vec<(f64, f64)> = finite.iter().filter(|r| r.estimator == id).map(|r| (r.p, r.re)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let coords: Vec<String> = pts.iter().map(|&(p, re)| format!("{:.2},{:.2}", sx(p), sy(re))).collect();
        writeln!(svg, r#"<polyline data-estimator="{id}" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#, color(id), coords.join(" ")).unwrap();
        let ly = y1 + 14.0 + 18.0 * li as f64;
        writeln!(svg, r#"<rect x="{:.2}" y="{:.2}" width="14" height="4" fill="{}"/>"#, x1 + 12.0, ly - 4.0, color(id)).unwrap();
        writeln!(svg, r#"<text x="{:.2}" y="{ly:.2}">{id}</text>"#, x1 + 32.0).unwrap();
    }
    writeln!(svg, "</g>").unwrap();
}
