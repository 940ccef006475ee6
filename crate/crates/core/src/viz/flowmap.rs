use std::f64::consts::PI;
use std::fmt::Write;

use super::svg::{num, Doc};
use super::RenderSpec;
use crate::ingest::{LocationId, LocationTree};
use crate::predict::FlowMap;

const NODE_RADIUS: f64 = 8.0;
const MAX_STROKE: f64 = 8.0;
const MIN_STROKE: f64 = 0.5;
const EDGE_COLOR: &str = "#1f77b4";

/// Screen positions for locations `1..=n` (index `id - 1`) inside the plot
/// area: tree coordinates scaled to fit when every location has them,
/// otherwise a circle in id order.
pub fn layout_positions(tree: &LocationTree, n: usize, spec: &RenderSpec) -> Vec<(f64, f64)> {
    let (px, py, pw, ph) = spec.plot_area();
    let pad = NODE_RADIUS * 2.0;
    let (px, py, pw, ph) = (px + pad, py + pad, (pw - 2.0 * pad).max(1.0), (ph - 2.0 * pad).max(1.0));
    let coords: Option<Vec<(f64, f64)>> = (1..=n as LocationId)
        .map(|id| tree.get(id).and_then(|node| node.coords))
        .collect();
    match coords {
        Some(pts) if !pts.is_empty() => {
            let (x0, x1) = bounds(pts.iter().map(|p| p.0));
            let (y0, y1) = bounds(pts.iter().map(|p| p.1));
            let span = (x1 - x0).max(y1 - y0);
            let scale = if span > 0.0 { (pw / (x1 - x0).max(1e-12)).min(ph / (y1 - y0).max(1e-12)) } else { 0.0 };
            let scale = if scale.is_finite() { scale } else { 0.0 };
            // centre the drawing; y grows downwards on screen
            let ox = px + (pw - (x1 - x0) * scale) / 2.0;
            let oy = py + (ph - (y1 - y0) * scale) / 2.0;
            pts.iter()
                .map(|&(x, y)| (ox + (x - x0) * scale, oy + (y1 - y) * scale))
                .collect()
        }
        _ => {
            let (cx, cy) = (px + pw / 2.0, py + ph / 2.0);
            let r = 0.5 * pw.min(ph);
            (0..n)
                .map(|i| {
                    let a = 2.0 * PI * i as f64 / n.max(1) as f64 - PI / 2.0;
                    (cx + r * a.cos(), cy + r * a.sin())
                })
                .collect()
        }
    }
}

fn bounds(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Stroke width for an edge: proportional to weight, never under 0.5 px.
pub(crate) fn stroke_width(weight: u32, max_weight: u32) -> f64 {
    if max_weight == 0 {
        return MIN_STROKE;
    }
    (MAX_STROKE * weight as f64 / max_weight as f64).max(MIN_STROKE)
}

/// Locations as circles, transitions as arrows (self-transitions as loops).
pub fn render_flowmap(f: &FlowMap, tree: &LocationTree, spec: &RenderSpec) -> String {
    let title = if f.label.is_empty() { "flow map" } else { f.label.as_str() };
    let mut doc = Doc::new(spec, title);
    doc.raw(&format!(
        "<defs><marker id=\"arrow\" viewBox=\"0 0 10 10\" refX=\"8\" refY=\"5\" markerUnits=\"userSpaceOnUse\" markerWidth=\"10\" markerHeight=\"10\" \
         orient=\"auto\"><path d=\"M0,0 L10,5 L0,10 z\" fill=\"{EDGE_COLOR}\"/></marker></defs>"
    ));
    let pos = layout_positions(tree, f.n_locations, spec);
    let max_w = f.max_weight();

    // light edges first so heavy ones stay on top
    let mut edges = f.edges();
    edges.reverse();
    let mut body = String::new();
    for e in &edges {
        let (x1, y1) = pos[e.from as usize - 1];
        let (x2, y2) = pos[e.to as usize - 1];
        let d = if e.from == e.to {
            let r = NODE_RADIUS;
            format!(
                "M {} {} C {} {} {} {} {} {}",
                num(x1 - r * 0.6),
                num(y1 - r * 0.8),
                num(x1 - r * 2.5),
                num(y1 - r * 4.5),
                num(x1 + r * 2.5),
                num(y1 - r * 4.5),
                num(x1 + r * 0.6),
                num(y1 - r * 0.8)
            )
        } else {
            let (dx, dy) = (x2 - x1, y2 - y1);
            let len = (dx * dx + dy * dy).sqrt().max(1e-9);
            let (ux, uy) = (dx / len, dy / len);
            // bend to the right of travel so a->b and b->a stay apart
            let bend = 0.12 * len;
            let (cx, cy) = ((x1 + x2) / 2.0 - uy * bend, (y1 + y2) / 2.0 + ux * bend);
            let trim = NODE_RADIUS + 2.0;
            let (sx, sy) = toward((x1, y1), (cx, cy), trim);
            let (tx, ty) = toward((x2, y2), (cx, cy), trim);
            format!("M {} {} Q {} {} {} {}", num(sx), num(sy), num(cx), num(cy), num(tx), num(ty))
        };
        let _ = writeln!(
            body,
            "<path class=\"edge\" data-from=\"{}\" data-to=\"{}\" data-weight=\"{}\" d=\"{d}\" fill=\"none\" \
             stroke=\"{EDGE_COLOR}\" stroke-opacity=\"0.8\" stroke-width=\"{}\" marker-end=\"url(#arrow)\"/>",
            e.from,
            e.to,
            e.weight,
            num(stroke_width(e.weight, max_w))
        );
    }
    if !body.is_empty() {
        doc.raw(body.trim_end());
    }

    for (i, &(x, y)) in pos.iter().enumerate() {
        let id = (i + 1) as LocationId;
        let name = tree.get(id).map_or_else(|| id.to_string(), |n| n.name.clone());
        doc.raw(&format!(
            "<circle class=\"node\" data-id=\"{id}\" cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"#d62728\" stroke=\"#ffffff\"/>",
            num(x),
            num(y),
            num(NODE_RADIUS)
        ));
        doc.text(x, y + NODE_RADIUS + 11.0, 10.0, "middle", "node-label", &name);
    }
    if spec.legend() && max_w > 0 {
        let (px, py, pw, _) = spec.plot_area();
        let x = px + pw + 10.0;
        doc.text(x, py + 8.0, 9.0, "start", "legend-label", &format!("max {max_w}"));
        doc.raw(&format!(
            "<line class=\"legend\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{EDGE_COLOR}\" stroke-width=\"{}\"/>",
            num(x),
            num(py + 20.0),
            num(x + 30.0),
            num(py + 20.0),
            num(MAX_STROKE)
        ));
    }
    doc.finish()
}

fn toward(from: (f64, f64), to: (f64, f64), dist: f64) -> (f64, f64) {
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    let len = (dx * dx + dy * dy).sqrt();
    if len <= dist || len == 0.0 {
        return from;
    }
    (from.0 + dx / len * dist, from.1 + dy / len * dist)
}
