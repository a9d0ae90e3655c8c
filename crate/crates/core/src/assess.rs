//! Graphical assessment of independence between groups: every group is
//! collapsed to a scalar series, the series are turned into
//! pseudo-observations, and every pair of groups yields one panel of paired
//! points on the unit square together with numeric summaries.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collapse::{collapse_group, CollapseSpec};
use crate::data::GroupedData;
use crate::error::{Error, Result};
use crate::measures::{default_tail_k, pearson, tail_dependence, tau, TailSide};
use crate::rank::pseudo_observations;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub group_a: String,
    pub group_b: String,
    pub u_a: Vec<f64>,
    pub u_b: Vec<f64>,
    pub spearman: f64,
    pub tau: f64,
    pub tail_upper: f64,
    pub tail_lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentResult {
    pub collapse: String,
    pub groups: Vec<String>,
    pub n: usize,
    /// Points per panel: `n` for one-sample collapses, `n(n-1)/2` for pairwise.
    pub k: usize,
    pub tail_k: usize,
    /// Set when some collapsed series contained ties.
    pub ties: bool,
    /// Panels for all groups `g < h`, in lexicographic order.
    pub panels: Vec<Panel>,
}

/// Collapse all groups with `cspec` and build the `G(G-1)/2` panels.
pub fn assess_independence(data: &GroupedData, cspec: &CollapseSpec) -> Result<AssessmentResult> {
    let groups = data.groups();
    if groups.len() < 2 {
        return Err(Error::invalid("assessment needs at least 2 groups"));
    }
    let pseudo = groups
        .par_iter()
        .map(|g| {
            let s = collapse_group(data, &g.name, cspec)?;
            pseudo_observations(&s.values)
        })
        .collect::<Result<Vec<_>>>()?;
    let k = pseudo[0].len();
    if k < 2 {
        return Err(Error::invalid("collapsed series too short for a panel"));
    }
    let tail_k = default_tail_k(k).min(k - 1);
    let pairs: Vec<(usize, usize)> = (0..groups.len())
        .flat_map(|g| (g + 1..groups.len()).map(move |h| (g, h)))
        .collect();
    let panels = pairs
        .par_iter()
        .map(|&(g, h)| {
            let (ua, ub) = (&pseudo[g].u, &pseudo[h].u);
            Ok(Panel {
                group_a: groups[g].name.clone(),
                group_b: groups[h].name.clone(),
                spearman: pearson(ua, ub)?,
                tau: tau(ua, ub)?,
                tail_upper: tail_dependence(ua, ub, TailSide::Upper, tail_k)?,
                tail_lower: tail_dependence(ua, ub, TailSide::Lower, tail_k)?,
                u_a: ua.clone(),
                u_b: ub.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AssessmentResult {
        collapse: cspec.label().to_string(),
        groups: groups.iter().map(|g| g.name.clone()).collect(),
        n: data.n(),
        k,
        tail_k,
        ties: pseudo.iter().any(|p| p.ties),
        panels,
    })
}

/// Minimal SVG scatter-plot grid: the cell in row `h`, column `g` (`g < h`)
/// shows panel `(g, h)` with group `g` on the horizontal axis; group names sit
/// on the diagonal.
pub fn render_svg(result: &AssessmentResult, cell: f64) -> String {
    let g = result.groups.len();
    let pad = 4.0;
    let size = cell * g as f64;
    let radius = (cell / 100.0).clamp(0.6, 2.0);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{size}" height="{size}" fill="white"/>"#
    );
    for (i, name) in result.groups.iter().enumerate() {
        let c = (i as f64 + 0.5) * cell;
        let _ = writeln!(
            out,
            r#"<text x="{c}" y="{c}" text-anchor="middle" dominant-baseline="middle" font-family="sans-serif" font-size="{:.1}">{}</text>"#,
            (cell / 8.0).max(8.0),
            xml_escape(name)
        );
    }
    let index = |name: &str| result.groups.iter().position(|n| n == name).unwrap_or(0);
    for panel in &result.panels {
        let (col, row) = (index(&panel.group_a), index(&panel.group_b));
        let (x0, y0) = (col as f64 * cell, row as f64 * cell);
        let inner = cell - 2.0 * pad;
        let _ = writeln!(
            out,
            r#"<g><rect x="{:.2}" y="{:.2}" width="{inner:.2}" height="{inner:.2}" fill="none" stroke="black" stroke-width="0.5"/>"#,
            x0 + pad,
            y0 + pad
        );
        for (a, b) in panel.u_a.iter().zip(&panel.u_b) {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="{radius:.2}" fill-opacity="0.5"/>"#,
                x0 + pad + a * inner,
                y0 + pad + (1.0 - b) * inner
            );
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
