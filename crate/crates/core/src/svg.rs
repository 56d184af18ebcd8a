//! Static SVG rendering of attention weights over the farm layout, plus a
//! JSON companion carrying the raw weights.
//!
//! One panel is drawn per (site, head) for the edge-level sites (E2V, Edge,
//! Node); the global aggregation sites have no per-turbine geometry and are
//! exported in the JSON only.

use crate::error::{Error, Result};
use crate::gnn::{AttentionWeights, AttnSite, SiteWeights};
use crate::train::Overlay;
use serde::Serialize;
use std::fmt::Write as _;

const PANEL: f64 = 260.0;
const MARGIN: f64 = 34.0;
const LABEL_THRESHOLD: f64 = 0.01;

/// Sites rendered as panels; global sites are JSON-only.
const PANEL_SITES: [AttnSite; 3] = [AttnSite::E2V, AttnSite::Edge, AttnSite::Node];

fn site_label(site: AttnSite) -> &'static str {
    match site {
        AttnSite::Edge => "Edge",
        AttnSite::E2V => "E2V",
        AttnSite::Node => "Node",
        AttnSite::E2U => "E2U",
        AttnSite::V2U => "V2U",
    }
}

struct PanelTransform {
    min_x: f64,
    min_y: f64,
    scale: f64,
    origin_x: f64,
    origin_y: f64,
}

impl PanelTransform {
    fn new(positions: &[(f64, f64)], origin_x: f64, origin_y: f64) -> Self {
        let min_x = positions.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let max_x = positions
            .iter()
            .map(|p| p.0)
            .fold(f64::NEG_INFINITY, f64::max);
        let min_y = positions.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let max_y = positions
            .iter()
            .map(|p| p.1)
            .fold(f64::NEG_INFINITY, f64::max);
        let span = (max_x - min_x).max(max_y - min_y).max(1.0);
        let scale = (PANEL - 2.0 * MARGIN) / span;
        PanelTransform {
            min_x,
            min_y,
            scale,
            origin_x,
            origin_y,
        }
    }

    fn map(&self, p: (f64, f64)) -> (f64, f64) {
        // SVG y grows downward; farm y grows northward
        (
            self.origin_x + MARGIN + (p.0 - self.min_x) * self.scale,
            self.origin_y + PANEL - MARGIN - (p.1 - self.min_y) * self.scale,
        )
    }
}

/// Weight per sender turbine toward `target`, for one head of one site.
fn weights_toward_target(
    site: &SiteWeights,
    head: usize,
    target: usize,
    edges: &[(usize, usize)],
) -> Vec<(usize, f64)> {
    match site.site {
        // node-indexed sites: entries are (sender node, receiver node)
        AttnSite::E2V | AttnSite::Node => site.heads[head]
            .iter()
            .filter(|e| e.receiver == target)
            .map(|e| (e.sender, e.weight))
            .collect(),
        // the edge site indexes parent edges; keep links whose receiving
        // edge points at the target and attribute the weight to the sending
        // edge's source turbine
        AttnSite::Edge => site.heads[head]
            .iter()
            .filter(|e| edges[e.receiver].1 == target)
            .map(|e| (edges[e.sender].0, e.weight))
            .collect(),
        AttnSite::E2U | AttnSite::V2U => Vec::new(),
    }
}

fn render_panel(
    out: &mut String,
    site: &SiteWeights,
    head: usize,
    overlay: &Overlay,
    target: usize,
    origin: (f64, f64),
) {
    let tf = PanelTransform::new(&overlay.positions, origin.0, origin.1);
    let _ = write!(
        out,
        r##"<rect x="{:.1}" y="{:.1}" width="{PANEL}" height="{PANEL}" fill="none" stroke="#cccccc"/>"##,
        origin.0, origin.1
    );
    let _ = write!(
        out,
        r##"<text x="{:.1}" y="{:.1}" font-size="12" fill="#333333">{} head {}</text>"##,
        origin.0 + 8.0,
        origin.1 + 16.0,
        site_label(site.site),
        head
    );
    let weights = weights_toward_target(site, head, target, &overlay.edges);
    let senders: std::collections::HashSet<usize> = weights.iter().map(|&(s, _)| s).collect();
    let (tx, ty) = tf.map(overlay.positions[target]);
    // arrows for the aggregation-style sites; circles for the node site
    for &(sender, w) in &weights {
        let (sx, sy) = tf.map(overlay.positions[sender]);
        match site.site {
            AttnSite::E2V | AttnSite::Edge => {
                let width = 0.6 + 5.0 * w;
                let _ = write!(
                    out,
                    r##"<line x1="{sx:.1}" y1="{sy:.1}" x2="{tx:.1}" y2="{ty:.1}" stroke="#2a6fbb" stroke-width="{width:.2}" opacity="0.8"/>"##
                );
            }
            AttnSite::Node => {
                let r = 3.0 + 9.0 * w;
                let _ = write!(
                    out,
                    r##"<circle cx="{sx:.1}" cy="{sy:.1}" r="{r:.2}" fill="none" stroke="#2a6fbb" stroke-width="1.4"/>"##
                );
            }
            _ => {}
        }
        if w >= LABEL_THRESHOLD {
            let (lx, ly) = ((sx + tx) / 2.0, (sy + ty) / 2.0);
            let (lx, ly) = if matches!(site.site, AttnSite::Node) {
                (sx + 5.0, sy - 5.0)
            } else {
                (lx, ly)
            };
            let _ = write!(
                out,
                r##"<text x="{lx:.1}" y="{ly:.1}" font-size="9" fill="#1a1a1a">{w:.2}</text>"##
            );
        }
    }
    for (i, &p) in overlay.positions.iter().enumerate() {
        let (x, y) = tf.map(p);
        let fill = if i == target {
            "#cc2222"
        } else if senders.contains(&i) {
            "#2a6fbb"
        } else {
            "#999999"
        };
        let _ = write!(out, r##"<circle cx="{x:.1}" cy="{y:.1}" r="3.5" fill="{fill}"/>"##);
    }
}

#[derive(Serialize)]
struct Companion<'a> {
    overlay: &'a Overlay,
    target: usize,
    weights: &'a AttentionWeights,
}

/// Rendered export: the SVG document and the raw-weight JSON companion.
pub struct SvgExport {
    pub svg: String,
    pub json: String,
    pub n_panels: usize,
}

/// Render one panel per (edge-level site, head) for the given target
/// turbine; the JSON companion carries every recorded site including the
/// global ones.
pub fn render_attention(
    weights: &AttentionWeights,
    overlay: &Overlay,
    target: usize,
) -> Result<SvgExport> {
    if weights.sites.is_empty() {
        return Err(Error::NoAttention);
    }
    if target >= overlay.positions.len() {
        return Err(Error::Data(format!(
            "target turbine {target} out of range ({} turbines)",
            overlay.positions.len()
        )));
    }
    let panel_sites: Vec<&SiteWeights> = PANEL_SITES
        .iter()
        .filter_map(|&s| weights.sites.iter().find(|w| w.site == s && w.block == 0))
        .collect();
    let n_heads = panel_sites.iter().map(|s| s.heads.len()).max().unwrap_or(0);
    let n_panels: usize = panel_sites.iter().map(|s| s.heads.len()).sum();
    let rows = panel_sites.len().max(1);
    let cols = n_heads.max(1);
    let width = cols as f64 * PANEL;
    let height = rows as f64 * PANEL;
    let mut svg = String::new();
    let _ = write!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" width="{width}" height="{height}">"##
    );
    for (row, site) in panel_sites.iter().enumerate() {
        for head in 0..site.heads.len() {
            let origin = (head as f64 * PANEL, row as f64 * PANEL);
            render_panel(&mut svg, site, head, overlay, target, origin);
        }
    }
    svg.push_str("</svg>");
    let json = serde_json::to_string_pretty(&Companion {
        overlay,
        target,
        weights,
    })?;
    Ok(SvgExport {
        svg,
        json,
        n_panels,
    })
}

/// Default rendering target: the receiver with the most incoming edges.
pub fn busiest_receiver(overlay: &Overlay) -> usize {
    let mut counts = vec![0usize; overlay.positions.len()];
    for &(_, r) in &overlay.edges {
        counts[r] += 1;
    }
    counts
        .iter()
        .enumerate()
        .max_by_key(|&(_, c)| *c)
        .map(|(i, _)| i)
        .unwrap_or(0)
}
