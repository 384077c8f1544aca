//! Plain-text and SVG renderings of persistence diagrams and network graphs.
//!
//! Everything here is a pure string function so the outputs stay
//! byte-deterministic and easy to test.

use std::collections::BTreeMap;

use hrnflow_core::hrn::GraphExport;
use hrnflow_core::persistence::{Death, ErrorDiagram};

/// Multiplicity marker for the ASCII grid: the digit, or `+` past 9.
fn mult_marker(m: u64) -> char {
    match m {
        0..=9 => char::from_digit(m as u32, 10).unwrap(),
        _ => '+',
    }
}

/// ASCII scatter plot of a diagram: birth along x, death along y (top row is
/// infinity when present), the diagonal drawn with `/`, multiplicities as
/// digits.
pub fn diagram_ascii(d: &ErrorDiagram) -> String {
    let mut hi = 0i64;
    let mut lo = 0i64;
    let mut has_inf = false;
    for p in d.points() {
        hi = hi.max(p.birth);
        lo = lo.min(p.birth);
        match p.death {
            Death::Finite(death) => {
                hi = hi.max(death);
                lo = lo.min(death);
            }
            Death::Infinite => has_inf = true,
        }
    }
    hi += 1; // headroom so no point sits on the frame

    let mut proper: BTreeMap<(i64, i64), u64> = BTreeMap::new();
    let mut infinite: BTreeMap<i64, u64> = BTreeMap::new();
    for p in d.points() {
        match p.death {
            Death::Finite(death) => *proper.entry((p.birth, death)).or_insert(0) += p.multiplicity,
            Death::Infinite => *infinite.entry(p.birth).or_insert(0) += p.multiplicity,
        }
    }

    // Cell width: widest coordinate label.
    let w = (lo..=hi).map(|c| c.to_string().len()).max().unwrap_or(1);
    let label_w = hi.to_string().len().max(lo.to_string().len()).max(3);

    let mut out = String::new();
    out.push_str("death\n");
    let mut row = |label: &str, cells: Vec<char>| {
        let mut line = format!("{label:>label_w$} |");
        for c in cells {
            line.push(' ');
            for _ in 1..w {
                line.push(' ');
            }
            line.push(c);
        }
        line.push('\n');
        out.push_str(&line);
    };

    if has_inf {
        let cells = (lo..=hi)
            .map(|b| infinite.get(&b).map_or('.', |&m| mult_marker(m)))
            .collect();
        row("inf", cells);
    }
    for death in (lo..=hi).rev() {
        let cells = (lo..=hi)
            .map(|b| {
                if let Some(&m) = proper.get(&(b, death)) {
                    mult_marker(m)
                } else if b == death {
                    '/'
                } else {
                    '.'
                }
            })
            .collect();
        row(&death.to_string(), cells);
    }

    // Frame and x-axis labels.
    let cols = (hi - lo + 1) as usize;
    out.push_str(&format!("{:>label_w$} +{}\n", "", "-".repeat(cols * (w + 1))));
    let mut axis = format!("{:>label_w$}   ", "");
    for b in lo..=hi {
        axis.push_str(&format!("{b:>w$} "));
    }
    out.push_str(axis.trim_end());
    out.push_str("  birth\n");
    out
}

/// Self-contained SVG rendering: axes, dashed diagonal, one circle per point
/// class (area grows with multiplicity), and a dashed infinity band along
/// the top when any class never dies.
pub fn diagram_svg(d: &ErrorDiagram) -> String {
    let mut hi = 1i64;
    let mut has_inf = false;
    for p in d.points() {
        hi = hi.max(p.birth);
        if let Death::Finite(death) = p.death {
            hi = hi.max(death);
        } else {
            has_inf = true;
        }
    }
    hi += 1;

    const CELL: i64 = 40;
    const MARGIN: i64 = 50;
    let inf_band: i64 = if has_inf { CELL } else { 0 };
    let side = hi * CELL;
    let width = side + 2 * MARGIN;
    let height = side + 2 * MARGIN + inf_band;
    // Map diagram coordinates to svg: x right, y up (flip).
    let x = |b: i64| MARGIN + b * CELL;
    let y = |dd: i64| MARGIN + inf_band + (hi - dd) * CELL;
    let y_inf = MARGIN;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width} {height}\" \
         font-family=\"monospace\" font-size=\"13\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    ));
    svg.push_str("  <!-- axes -->\n");
    svg.push_str(&format!(
        "  <line x1=\"{ax}\" y1=\"{top}\" x2=\"{ax}\" y2=\"{bot}\" stroke=\"black\"/>\n",
        ax = x(0),
        top = y(hi),
        bot = y(0)
    ));
    svg.push_str(&format!(
        "  <line x1=\"{ax}\" y1=\"{bot}\" x2=\"{right}\" y2=\"{bot}\" stroke=\"black\"/>\n",
        ax = x(0),
        bot = y(0),
        right = x(hi)
    ));
    let step = (hi / 10).max(1);
    let mut t = 0;
    while t <= hi {
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{t}</text>\n",
            x(t),
            y(0) + 20
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{t}</text>\n",
            x(0) - 8,
            y(t) + 4
        ));
        t += step;
    }
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">birth</text>\n",
        x(0) + side / 2,
        y(0) + 40
    ));
    svg.push_str("  <!-- diagonal -->\n");
    svg.push_str(&format!(
        "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n",
        x(0),
        y(0),
        x(hi),
        y(hi)
    ));
    if has_inf {
        svg.push_str(&format!(
            "  <line x1=\"{}\" y1=\"{y_inf}\" x2=\"{}\" y2=\"{y_inf}\" stroke=\"crimson\" \
             stroke-dasharray=\"6 4\"/>\n",
            x(0),
            x(hi)
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\" fill=\"crimson\">inf</text>\n",
            x(0) - 8,
            y_inf + 4
        ));
    }
    for p in d.points() {
        let r = (4 + 3 * (p.multiplicity.saturating_sub(1))).min(14);
        let (cx, cy, fill) = match p.death {
            Death::Finite(death) => (x(p.birth), y(death), "steelblue"),
            Death::Infinite => (x(p.birth), y_inf, "crimson"),
        };
        let death = match p.death {
            Death::Finite(dd) => dd.to_string(),
            Death::Infinite => "inf".to_string(),
        };
        svg.push_str(&format!(
            "  <circle cx=\"{cx}\" cy=\"{cy}\" r=\"{r}\" fill=\"{fill}\" fill-opacity=\"0.8\">\
             <title>({}, {death}) x{}</title></circle>\n",
            p.birth, p.multiplicity
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Plain-text drawing of a network: the spine with its edge directions, then
/// one line per subprogram walking its cycle, with `=>` marking the
/// identified (closing) edge.
pub fn graph_ascii(g: &GraphExport) -> String {
    let labels: BTreeMap<_, _> = g.vertices.iter().map(|v| (v.id, v.label.clone())).collect();
    let name = |id| labels.get(&id).cloned().unwrap_or_else(|| format!("?{}", id.0));

    let mut out = String::new();
    out.push_str(&format!(
        "hierarchical recurrent network: {} cycle(s) {:?}, {} vertices, {} edges\n",
        g.m,
        g.cycle_lengths,
        g.vertices.len(),
        g.edges.len()
    ));

    // Spine: v(2i) points at both neighbours, so arrows alternate.
    out.push_str("spine: ");
    for n in 1..=(2 * g.m + 1) {
        if n > 1 {
            out.push_str(if n % 2 == 0 { " <- " } else { " -> " });
        }
        out.push_str(&format!("v{n}"));
    }
    out.push('\n');

    for sub in &g.subprograms {
        out.push_str(&format!("subprogram {} (cycle length {}): ", sub.index, sub.vertex_count));
        let mut names = sub.vertices.iter().map(|&v| name(v));
        if let Some(first) = names.next() {
            out.push_str(&first);
        }
        for n in names {
            out.push_str(" -> ");
            out.push_str(&n);
        }
        // The closing edge is the identified spine edge (tail => head).
        out.push_str(&format!(" => {}\n", name(sub.identified_edge.1)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use hrnflow_core::hrn::{build, export_graph};
    use hrnflow_core::persistence::DiagramPoint;

    fn sample() -> ErrorDiagram {
        ErrorDiagram::from_points([
            DiagramPoint { birth: 2, death: Death::Finite(3), multiplicity: 2 },
            DiagramPoint { birth: 1, death: Death::Infinite, multiplicity: 1 },
        ])
        .unwrap()
    }

    #[test]
    fn ascii_diagram_places_points_and_diagonal() {
        let text = diagram_ascii(&sample());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "death");
        assert_eq!(lines[1], "inf | . 1 . . .");
        assert_eq!(lines[2], "  4 | . . . . /");
        assert_eq!(lines[3], "  3 | . . 2 / .");
        assert_eq!(lines[4], "  2 | . . / . .");
        assert_eq!(lines[5], "  1 | . / . . .");
        assert_eq!(lines[6], "  0 | / . . . .");
        assert_eq!(lines[7], "    +----------");
        assert_eq!(lines[8], "      0 1 2 3 4  birth");
    }

    #[test]
    fn ascii_diagram_of_nothing_still_draws_axes() {
        let text = diagram_ascii(&ErrorDiagram::empty());
        assert!(text.contains('/'), "diagonal missing:\n{text}");
        assert!(text.contains("birth"));
        assert!(!text.contains("inf"));
    }

    #[test]
    fn svg_diagram_is_wellformed_and_complete() {
        let svg = diagram_svg(&sample());
        assert!(svg.starts_with("<svg "));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("crimson"), "infinity band missing");
        assert!(svg.contains("<title>(2, 3) x2</title>"));
        // Balanced tags keep it parseable.
        assert_eq!(svg.matches("<line").count(), svg.matches("/>").count() - 1); // circles self-close via </circle>
    }

    #[test]
    fn svg_of_empty_diagram_has_axes_and_diagonal_only() {
        let svg = diagram_svg(&ErrorDiagram::empty());
        assert_eq!(svg.matches("<circle").count(), 0);
        assert!(svg.contains("stroke-dasharray")); // the diagonal
        assert!(!svg.contains("crimson"));
    }

    #[test]
    fn graph_ascii_walks_spine_and_cycles() {
        let g = export_graph(&build(&[3, 4, 3]).unwrap());
        let text = graph_ascii(&g);
        assert!(text.contains("spine: v1 <- v2 -> v3 <- v4 -> v5 <- v6 -> v7"));
        assert!(text.contains("subprogram 2 (cycle length 4): v3 -> w2 -> w3 -> v4 => v3"));
        assert!(text.lines().count() >= 5);
    }
}
