//! Plain-text network documents.
//!
//! ```text
//! kanload-network 1
//! widths 1 2 1
//! edge <layer> <out> <in>
//! grid <degree> <intervals> <lo> <hi>
//! coeffs <c_0> ... <c_n>
//! weights <w_b> <w_s>
//! fixed none | fixed <candidate> <a> <b> <c> <d>
//! end
//! ```
//!
//! Reals are written in shortest round-trip form, so parse then render is
//! byte-identical.

use std::fmt::Write as _;

use super::{ActivationEdge, FixedForm, KanLayer, KanNetwork};
use crate::error::{Error, Result};
use crate::spline::make_grid;

pub const NETWORK_HEADER: &str = "kanload-network 1";

pub(crate) fn fmt_real(x: f64) -> String {
    format!("{x:?}")
}

pub fn render_network(net: &KanNetwork) -> String {
    let mut out = String::new();
    out.push_str(NETWORK_HEADER);
    out.push('\n');
    let widths: Vec<String> = net.widths().iter().map(|w| w.to_string()).collect();
    let _ = writeln!(out, "widths {}", widths.join(" "));
    for (l, layer) in net.layers().iter().enumerate() {
        for (j, row) in layer.edges.iter().enumerate() {
            for (i, edge) in row.iter().enumerate() {
                let (lo, hi) = edge.grid.domain();
                let _ = writeln!(out, "edge {l} {j} {i}");
                let _ = writeln!(
                    out,
                    "grid {} {} {} {}",
                    edge.grid.degree(),
                    edge.grid.intervals(),
                    fmt_real(lo),
                    fmt_real(hi)
                );
                let coeffs: Vec<String> = edge.coeffs.iter().map(|c| fmt_real(*c)).collect();
                let _ = writeln!(out, "coeffs {}", coeffs.join(" "));
                let _ = writeln!(out, "weights {} {}", fmt_real(edge.w_b), fmt_real(edge.w_s));
                match &edge.fixed {
                    None => out.push_str("fixed none\n"),
                    Some(f) => {
                        let _ = writeln!(
                            out,
                            "fixed {} {} {} {} {}",
                            f.candidate,
                            fmt_real(f.a),
                            fmt_real(f.b),
                            fmt_real(f.c),
                            fmt_real(f.d)
                        );
                    }
                }
                out.push_str("end\n");
            }
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line_offset: u64,
    last: u64,
}

impl<'a> Lines<'a> {
    fn next_fields(&mut self, keyword: &str) -> Result<Vec<&'a str>> {
        loop {
            let (idx, line) = self
                .inner
                .next()
                .ok_or_else(|| self.err(format!("unexpected end of document, expected `{keyword}`")))?;
            self.last = self.line_offset + idx as u64 + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let head = fields.next().unwrap();
            if head != keyword {
                return Err(self.err(format!("expected `{keyword}`, found `{head}`")));
            }
            return Ok(fields.collect());
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::parse("<network>", self.last, message)
    }
}

fn parse_real(lines: &Lines<'_>, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| lines.err(format!("invalid number `{s}`")))
}

fn parse_usize(lines: &Lines<'_>, s: &str) -> Result<usize> {
    s.parse::<usize>()
        .map_err(|_| lines.err(format!("invalid integer `{s}`")))
}

/// Parses a network section. `line_offset` shifts reported line numbers when
/// the section is embedded in a larger file.
pub fn parse_network(text: &str) -> Result<KanNetwork> {
    parse_network_at(text, 0)
}

pub(crate) fn parse_network_at(text: &str, line_offset: u64) -> Result<KanNetwork> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line_offset,
        last: line_offset,
    };
    let header = lines.next_fields("kanload-network")?;
    if header != ["1"] {
        return Err(lines.err(format!("unsupported network version {header:?}")));
    }
    let widths = lines
        .next_fields("widths")?
        .iter()
        .map(|w| parse_usize(&lines, w))
        .collect::<Result<Vec<_>>>()?;
    if widths.len() < 2 || widths.contains(&0) {
        return Err(lines.err(format!("invalid widths {widths:?}")));
    }
    let mut layers = Vec::new();
    for (l, w) in widths.windows(2).enumerate() {
        let (n_in, n_out) = (w[0], w[1]);
        let mut edges = Vec::with_capacity(n_out);
        for j in 0..n_out {
            let mut row = Vec::with_capacity(n_in);
            for i in 0..n_in {
                let idx = lines.next_fields("edge")?;
                let expect = [l, j, i];
                let got = idx
                    .iter()
                    .map(|s| parse_usize(&lines, s))
                    .collect::<Result<Vec<_>>>()?;
                if got != expect {
                    return Err(lines.err(format!("expected edge {expect:?}, found {got:?}")));
                }
                let g = lines.next_fields("grid")?;
                if g.len() != 4 {
                    return Err(lines.err("grid needs degree, intervals, lo, hi"));
                }
                let grid = make_grid(
                    parse_real(&lines, g[2])?,
                    parse_real(&lines, g[3])?,
                    parse_usize(&lines, g[1])?,
                    parse_usize(&lines, g[0])?,
                )
                .map_err(|e| lines.err(e.to_string()))?;
                let coeffs = lines
                    .next_fields("coeffs")?
                    .iter()
                    .map(|s| parse_real(&lines, s))
                    .collect::<Result<Vec<_>>>()?;
                let wts = lines.next_fields("weights")?;
                if wts.len() != 2 {
                    return Err(lines.err("weights needs w_b and w_s"));
                }
                let mut edge = ActivationEdge::new(
                    grid,
                    coeffs,
                    parse_real(&lines, wts[0])?,
                    parse_real(&lines, wts[1])?,
                )
                .map_err(|e| lines.err(e.to_string()))?;
                let fixed = lines.next_fields("fixed")?;
                match fixed.as_slice() {
                    ["none"] => {}
                    [cand, a, b, c, d] => {
                        let candidate = cand.parse().map_err(|e: String| lines.err(e))?;
                        edge.fixed = Some(FixedForm {
                            candidate,
                            a: parse_real(&lines, a)?,
                            b: parse_real(&lines, b)?,
                            c: parse_real(&lines, c)?,
                            d: parse_real(&lines, d)?,
                        });
                    }
                    _ => return Err(lines.err("malformed `fixed` line")),
                }
                lines.next_fields("end")?;
                row.push(edge);
            }
            edges.push(row);
        }
        layers.push(KanLayer { n_in, n_out, edges });
    }
    KanNetwork::from_layers(layers)
}
