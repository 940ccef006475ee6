use std::fmt::Write;

use super::svg::{num, Doc};
use super::{normalize, RenderSpec};
use crate::grid::Grid;
use crate::matrices::{TimeSpentMatrix, VisitFrequencyMatrix};
use crate::som::UMatrix;

/// Anything drawable as an objects × locations heat map.
pub trait HeatSource {
    fn heat_values(&self) -> Grid<f64>;
    fn heat_title(&self) -> &'static str;
}

impl HeatSource for VisitFrequencyMatrix {
    fn heat_values(&self) -> Grid<f64> {
        let (r, c) = self.counts.shape();
        Grid::from_vec(r, c, self.counts.as_slice().iter().map(|&v| v as f64).collect())
    }

    fn heat_title(&self) -> &'static str {
        "check-ins"
    }
}

impl HeatSource for TimeSpentMatrix {
    /// Stored in seconds, shown in hours.
    fn heat_values(&self) -> Grid<f64> {
        let (r, c) = self.seconds.shape();
        Grid::from_vec(r, c, self.seconds.as_slice().iter().map(|&v| v / 3600.0).collect())
    }

    fn heat_title(&self) -> &'static str {
        "hours spent"
    }
}

impl HeatSource for Grid<f64> {
    fn heat_values(&self) -> Grid<f64> {
        self.clone()
    }

    fn heat_title(&self) -> &'static str {
        "values"
    }
}

struct Cells<'a> {
    values: &'a Grid<f64>,
    /// Per-cell text, row-major; empty strings are skipped.
    cell_text: Option<Vec<String>>,
    outlined: Vec<(usize, usize)>,
    row_labels: &'a [String],
    col_labels: &'a [String],
}

fn draw_cells(doc: &mut Doc, spec: &RenderSpec, cells: &Cells<'_>) {
    let (rows, cols) = cells.values.shape();
    let (mut px, mut py, mut pw, mut ph) = spec.plot_area();
    let gutter_left = if cells.row_labels.is_empty() { 0.0 } else { (pw * 0.18).min(60.0) };
    let gutter_top = if cells.col_labels.is_empty() { 0.0 } else { (ph * 0.12).min(30.0) };
    px += gutter_left;
    pw -= gutter_left;
    py += gutter_top;
    ph -= gutter_top;
    let cw = pw / cols.max(1) as f64;
    let ch = ph / rows.max(1) as f64;
    let t = normalize(cells.values.as_slice());
    let ramp = spec.ramp();

    let mut body = String::new();
    for r in 0..rows {
        for c in 0..cols {
            let _ = writeln!(
                body,
                "<rect class=\"cell\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>",
                num(px + c as f64 * cw),
                num(py + r as f64 * ch),
                num(cw),
                num(ch),
                ramp.color(t[r * cols + c])
            );
        }
    }
    doc.raw(body.trim_end());

    if let Some(text) = &cells.cell_text {
        let size = (ch.min(cw) * 0.45).min(14.0);
        if size >= 5.0 {
            for (k, s) in text.iter().enumerate().filter(|(_, s)| !s.is_empty()) {
                let (r, c) = (k / cols, k % cols);
                let x = px + (c as f64 + 0.5) * cw;
                let y = py + (r as f64 + 0.5) * ch + size * 0.35;
                // light text on the dark half of the ramp
                let fill = if t[k] < 0.5 { "#ffffff" } else { "#000000" };
                doc.raw(&format!(
                    "<text class=\"hits\" x=\"{}\" y=\"{}\" font-size=\"{}\" text-anchor=\"middle\" fill=\"{fill}\">{}</text>",
                    num(x),
                    num(y),
                    num(size),
                    super::svg::escape(s)
                ));
            }
        }
    }

    for &(r, c) in &cells.outlined {
        if r < rows && c < cols {
            doc.raw(&format!(
                "<rect class=\"flag\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"3\"/>",
                num(px + c as f64 * cw + 1.5),
                num(py + r as f64 * ch + 1.5),
                num((cw - 3.0).max(0.5)),
                num((ch - 3.0).max(0.5))
            ));
        }
    }

    let label_size = ch.min(10.0);
    if label_size >= 4.0 {
        for (r, label) in cells.row_labels.iter().enumerate().take(rows) {
            doc.text(px - 3.0, py + (r as f64 + 0.5) * ch + label_size * 0.35, label_size, "end", "row-label", label);
        }
    }
    let label_size = cw.min(10.0);
    if label_size >= 4.0 {
        for (c, label) in cells.col_labels.iter().enumerate().take(cols) {
            doc.text(px + (c as f64 + 0.5) * cw, py - 4.0, label_size, "middle", "col-label", label);
        }
    }

    if spec.legend() {
        draw_legend(doc, spec, cells.values.as_slice());
    }
}

fn draw_legend(doc: &mut Doc, spec: &RenderSpec, values: &[f64]) {
    const STEPS: usize = 10;
    let (px, py, pw, ph) = spec.plot_area();
    let x = px + pw + 10.0;
    let w = 14.0;
    let h = ph / STEPS as f64;
    for k in 0..STEPS {
        // top of the bar is the maximum
        let t = 1.0 - k as f64 / (STEPS - 1) as f64;
        doc.raw(&format!(
            "<rect class=\"legend\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>",
            num(x),
            num(py + k as f64 * h),
            num(w),
            num(h),
            spec.ramp().color(t)
        ));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi.is_finite() {
        doc.text(x + w + 3.0, py + 8.0, 9.0, "start", "legend-label", &num(hi));
        doc.text(x + w + 3.0, py + ph, 9.0, "start", "legend-label", &num(lo));
    }
}

/// U-matrix cells coloured by U-value, labelled with hit counts, flagged
/// nodes outlined.
pub fn render_umatrix(u: &UMatrix, hits: Option<&Grid<usize>>, flagged: &[(usize, usize)], spec: &RenderSpec) -> String {
    let mut doc = Doc::new(spec, "U-matrix");
    let mut outlined = flagged.to_vec();
    outlined.sort_unstable();
    outlined.dedup();
    let cell_text = hits.map(|h| {
        h.as_slice()
            .iter()
            .map(|&n| if n > 0 { n.to_string() } else { String::new() })
            .collect()
    });
    draw_cells(
        &mut doc,
        spec,
        &Cells {
            values: &u.values,
            cell_text,
            outlined,
            row_labels: &[],
            col_labels: &[],
        },
    );
    doc.finish()
}

/// Objects × locations heat map; labels may be empty.
pub fn render_heatmap<M: HeatSource + ?Sized>(
    m: &M,
    row_labels: &[String],
    col_labels: &[String],
    spec: &RenderSpec,
) -> String {
    let values = m.heat_values();
    let mut doc = Doc::new(spec, m.heat_title());
    draw_cells(
        &mut doc,
        spec,
        &Cells {
            values: &values,
            cell_text: None,
            outlined: Vec::new(),
            row_labels,
            col_labels,
        },
    );
    doc.finish()
}
