//! SVG drawings of covering windows.

use std::fmt::Write;

use crate::error::Result;
use crate::framework::Realization;
use crate::gain_graph::{GainGraph, Marking};
use crate::linalg::Tolerances;

/// Drawing options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvgStyle {
    /// Width of the image in pixels; the height follows the aspect ratio.
    pub width: f64,
    pub vertex_radius: f64,
    pub margin: f64,
}

impl Default for SvgStyle {
    fn default() -> Self {
        Self {
            width: 640.0,
            vertex_radius: 3.0,
            margin: 16.0,
        }
    }
}

/// Draws the covering vertices `p(v) + Lα`, `α ∈ [−w, w]ᵈ`, and the window edges.
/// Bars are solid, cables dashed and struts thick. Only the first two
/// coordinates are drawn.
pub fn render_covering(
    g: &GainGraph,
    r: &Realization,
    w: u32,
    style: &SvgStyle,
    tol: &Tolerances,
) -> Result<String> {
    r.require_non_flat(tol)?;
    let cover = g.covering_window(w);
    let xy: Vec<(f64, f64)> = cover
        .vertices
        .iter()
        .map(|v| {
            let p = r.lift(v.vertex, &v.cell);
            (p[0], if p.len() > 1 { p[1] } else { 0.0 })
        })
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &xy {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-9);
    let inner = style.width - 2.0 * style.margin;
    let k = inner / span;
    let height = ((y1 - y0) * k + 2.0 * style.margin).max(2.0 * style.margin);
    let map = |(x, y): (f64, f64)| (style.margin + (x - x0) * k, height - style.margin - (y - y0) * k);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.2} {:.2}">"#,
        style.width, height, style.width, height
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<g stroke="black" stroke-linecap="round">"#);
    for e in &cover.edges {
        let (ax, ay) = map(xy[e.a]);
        let (bx, by) = map(xy[e.b]);
        let attrs = match g.edges()[e.edge].marking {
            Marking::Bar => r#"stroke-width="1.5""#,
            Marking::Cable => r#"stroke-width="1.2" stroke-dasharray="5 4""#,
            Marking::Strut => r#"stroke-width="4""#,
        };
        let _ = writeln!(
            s,
            r#"<line x1="{ax:.2}" y1="{ay:.2}" x2="{bx:.2}" y2="{by:.2}" {attrs}/>"#
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g stroke="none">"#);
    for (i, v) in cover.vertices.iter().enumerate() {
        let (x, y) = map(xy[i]);
        let fill = if v.cell.iter().all(|&c| c == 0) { "#c0392b" } else { "#34495e" };
        let _ = writeln!(
            s,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{:.1}" fill="{fill}"/>"#,
            style.vertex_radius
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::{flex2, hex};

    #[test]
    fn hex_window_counts() {
        let h = hex();
        let svg = render_covering(&h.graph, &h.realization, 1, &SvgStyle::default(), &Tolerances::default()).unwrap();
        assert_eq!(svg.matches("<circle").count(), 54);
        assert_eq!(
            svg.matches("<line").count(),
            h.graph.covering_window(1).edges.len()
        );
        let again = render_covering(&h.graph, &h.realization, 1, &SvgStyle::default(), &Tolerances::default()).unwrap();
        assert_eq!(svg, again);
    }

    #[test]
    fn window_zero_is_one_cell() {
        let f = flex2();
        let svg = render_covering(&f.graph, &f.realization, 0, &SvgStyle::default(), &Tolerances::default()).unwrap();
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg.matches("<line").count(), 1);
    }

    #[test]
    fn markings_styles() {
        let f = crate::construct::flex2_tensegrity();
        let svg = render_covering(&f.graph, &f.realization, 2, &SvgStyle::default(), &Tolerances::default()).unwrap();
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains(r#"stroke-width="4""#));
    }
}
