//! CSV and standalone SVG rendering of labelled matrices.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::cluster::Dendrogram;
use crate::error::Result;
use crate::ingest::write_atomic;

/// Matrix with row/column labels, optional cells and display orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub title: String,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
    pub row_order: Vec<usize>,
    pub col_order: Vec<usize>,
    /// Row clustering drawn beside the rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_dendrogram: Option<Dendrogram>,
}

fn fmt_value(v: f64) -> String {
    format!("{v}")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Heatmap {
    /// Header row of column labels, then one line per row; absent cells are
    /// empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("project");
        for &j in &self.col_order {
            out.push(',');
            out.push_str(&csv_field(&self.col_labels[j]));
        }
        out.push('\n');
        for &i in &self.row_order {
            out.push_str(&csv_field(&self.row_labels[i]));
            for &j in &self.col_order {
                out.push(',');
                if let Some(v) = self.values[i][j] {
                    out.push_str(&fmt_value(v));
                }
            }
            out.push('\n');
        }
        out
    }

    fn range(&self) -> (f64, f64) {
        let vals = self.values.iter().flatten().flatten().copied();
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if lo.is_finite() {
            (lo, hi)
        } else {
            (0.0, 1.0)
        }
    }

    pub fn to_svg(&self) -> String {
        const CELL: f64 = 28.0;
        const LABEL: f64 = 140.0;
        const TREE: f64 = 80.0;
        const TOP: f64 = 40.0;
        let nr = self.row_order.len() as f64;
        let nc = self.col_order.len() as f64;
        let x0 = TREE + LABEL;
        let y0 = TOP + LABEL;
        let width = x0 + nc * CELL + 20.0;
        let height = y0 + nr * CELL + 40.0;
        let (lo, hi) = self.range();
        let mut s = String::new();
        let _ = writeln!(
            s,
            r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"##
        );
        s.push_str(concat!(
            r##"<defs><pattern id="absent" width="6" height="6" patternUnits="userSpaceOnUse" patternTransform="rotate(45)">"##,
            r##"<rect width="6" height="6" fill="#ffffff"/><line x1="0" y1="0" x2="0" y2="6" stroke="#888888" stroke-width="2"/></pattern></defs>"##,
            "\n"
        ));
        let _ = writeln!(s, r##"<text x="{}" y="20" font-size="14">{}</text>"##, x0, escape(&self.title));
        for (c, &j) in self.col_order.iter().enumerate() {
            let x = x0 + (c as f64 + 0.5) * CELL;
            let _ = writeln!(
                s,
                r##"<text x="{x}" y="{}" transform="rotate(-60 {x} {})">{}</text>"##,
                y0 - 6.0,
                y0 - 6.0,
                escape(&self.col_labels[j])
            );
        }
        for (r, &i) in self.row_order.iter().enumerate() {
            let y = y0 + r as f64 * CELL;
            let _ = writeln!(
                s,
                r##"<text x="{}" y="{}" text-anchor="end">{}</text>"##,
                x0 - 6.0,
                y + CELL * 0.65,
                escape(&self.row_labels[i])
            );
            for (c, &j) in self.col_order.iter().enumerate() {
                let x = x0 + c as f64 * CELL;
                let (fill, title) = match self.values[i][j] {
                    Some(v) => (color(v, lo, hi), fmt_value(v)),
                    None => ("url(#absent)".to_string(), "absent".to_string()),
                };
                let _ = writeln!(
                    s,
                    r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="#ffffff"><title>{}</title></rect>"##,
                    escape(&title)
                );
            }
        }
        if let Some(d) = &self.row_dendrogram {
            draw_dendrogram(&mut s, d, &self.row_order, TREE, y0, CELL);
        }
        // legend
        let ly = y0 + nr * CELL + 14.0;
        for k in 0..10 {
            let v = lo + (hi - lo) * k as f64 / 9.0;
            let _ = writeln!(
                s,
                r##"<rect x="{}" y="{ly}" width="12" height="10" fill="{}"/>"##,
                x0 + k as f64 * 12.0,
                color(v, lo, hi)
            );
        }
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{}">{} .. {}</text>"##,
            x0 + 126.0,
            ly + 9.0,
            short(lo),
            short(hi)
        );
        s.push_str("</svg>\n");
        s
    }

    /// Writes `<stem>.csv` and `<stem>.svg`.
    pub fn export(&self, stem: &Path) -> Result<(PathBuf, PathBuf)> {
        let csv = stem.with_extension("csv");
        let svg = stem.with_extension("svg");
        write_atomic(&csv, self.to_csv().as_bytes())?;
        write_atomic(&svg, self.to_svg().as_bytes())?;
        Ok((csv, svg))
    }
}

fn short(v: f64) -> String {
    format!("{v:.3}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Linear blend from pale yellow through orange to dark red.
fn color(v: f64, lo: f64, hi: f64) -> String {
    let t = if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 };
    let stops = [(255.0, 247.0, 188.0), (254.0, 153.0, 41.0), (153.0, 52.0, 4.0)];
    let (a, b, u) = if t < 0.5 { (stops[0], stops[1], t * 2.0) } else { (stops[1], stops[2], (t - 0.5) * 2.0) };
    let mix = |x: f64, y: f64| (x + (y - x) * u).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Draws the row tree to the left of the labels, leaves at `x = width`.
fn draw_dendrogram(s: &mut String, d: &Dendrogram, order: &[usize], width: f64, y0: f64, cell: f64) {
    let n = d.n_leaves;
    if n < 2 || d.merges.is_empty() {
        return;
    }
    let max_h = d.merges.iter().map(|m| m.height).fold(0.0f64, f64::max).max(1e-12);
    let x_of = |h: f64| width - 4.0 - (width - 8.0) * h / max_h;
    let mut pos: Vec<(f64, f64)> = vec![(0.0, 0.0); n + d.merges.len()];
    for (r, &leaf) in order.iter().enumerate() {
        pos[leaf] = (width - 4.0, y0 + (r as f64 + 0.5) * cell);
    }
    for (k, m) in d.merges.iter().enumerate() {
        let (xl, yl) = pos[m.left];
        let (xr, yr) = pos[m.right];
        let x = x_of(m.height);
        let _ = writeln!(
            s,
            "<path d=\"M{xl:.2} {yl:.2}H{x:.2}V{yr:.2}H{xr:.2}\" fill=\"none\" stroke=\"#333333\"/>"
        );
        pos[n + k] = (x, (yl + yr) / 2.0);
    }
}
