//! The `.rm` ring-matrix format.
//!
//! ```text
//! context z | free <n> | fbc <gm-file>
//! size <rows> <cols>                  (optional; default from the largest indices)
//! entry <i> <j> <coeff> <word> [t^<m>]
//! ```
//!
//! Indices are 1-based and repeated entries accumulate. The `fbc` path is
//! resolved by the caller, relative to the `.rm` file.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::GraphMap;
use crate::ring::{parse_rational, rational_string, GroupContext, GroupElem, Rational, RingElement, RingMatrix};
use crate::word::NameTable;

#[derive(Clone, Debug)]
pub struct RingMatrixFile {
    pub matrix: RingMatrix<Rational>,
    pub names: NameTable,
    /// The monodromy of an `fbc` context.
    pub graph_map: Option<GraphMap>,
}

pub fn parse_ring_matrix(text: &str, load_gm: impl FnOnce(&str) -> Result<GraphMap>) -> Result<RingMatrixFile> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| Error::parse(1, "missing `context` header"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    let (ctx, names, gm) = match toks.as_slice() {
        ["context", "z"] => (GroupContext::Integers, NameTable::standard(0), None),
        ["context", "free", n] => {
            let n: usize = n.parse().map_err(|_| Error::parse(hline, format!("bad rank `{n}`")))?;
            (GroupContext::Free { rank: n }, NameTable::standard(n), None)
        }
        ["context", "fbc", path] => {
            let gm = load_gm(path)?;
            let phi = gm.induced_automorphism()?;
            if !phi.has_inverse() {
                return Err(Error::MissingInverseImages);
            }
            (GroupContext::free_by_cyclic(phi), gm.names().clone(), Some(gm))
        }
        _ => return Err(Error::parse(hline, "expected `context z`, `context free <n>` or `context fbc <file>`")),
    };
    let ctx = Arc::new(ctx);
    let mut size: Option<(usize, usize)> = None;
    let mut terms: Vec<(usize, usize, GroupElem, Rational)> = Vec::new();
    for (ln, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let index = |s: &str| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(i) if i >= 1 => Ok(i),
                _ => Err(Error::parse(ln, format!("bad index `{s}`"))),
            }
        };
        match toks.first().copied() {
            Some("size") if toks.len() == 3 => size = Some((index(toks[1])?, index(toks[2])?)),
            Some("entry") if toks.len() >= 5 => {
                let (i, j) = (index(toks[1])?, index(toks[2])?);
                let c = parse_rational(toks[3]).ok_or_else(|| Error::parse(ln, format!("bad coefficient `{}`", toks[3])))?;
                let mut word = &toks[4..];
                let mut shift = 0i64;
                if let Some(last) = word.last() {
                    if let Some(m) = last.strip_prefix("t^") {
                        shift = m.parse().map_err(|_| Error::parse(ln, format!("bad t-exponent `{last}`")))?;
                        word = &word[..word.len() - 1];
                    }
                }
                if word.is_empty() {
                    return Err(Error::parse(ln, "missing word (use `e` for the identity)"));
                }
                let w = names
                    .parse_tokens(word.iter().copied())
                    .map_err(|e| Error::parse(ln, e.to_string()))?;
                let g = GroupElem::new(w, shift);
                ctx.validate(&g).map_err(|e| Error::parse(ln, e.to_string()))?;
                terms.push((i, j, g, c));
            }
            _ => return Err(Error::parse(ln, format!("unrecognized line `{line}`"))),
        }
    }
    let (rows, cols) = match size {
        Some(s) => s,
        None => terms
            .iter()
            .fold((0, 0), |(r, c), (i, j, _, _)| (r.max(*i), c.max(*j))),
    };
    if rows == 0 || cols == 0 {
        return Err(Error::parse(hline, "empty matrix: add `entry` or `size` lines"));
    }
    let mut grid = vec![vec![RingElement::<Rational>::zero(); cols]; rows];
    for (i, j, g, c) in terms {
        if i > rows || j > cols {
            return Err(Error::Shape(format!("entry ({i}, {j}) outside a {rows}x{cols} matrix")));
        }
        grid[i - 1][j - 1].add_term(g, c);
    }
    Ok(RingMatrixFile {
        matrix: RingMatrix::from_rows(ctx, grid)?,
        names,
        graph_map: gm,
    })
}

/// Serializes a matrix; `context` is the header line without the keyword.
pub fn write_ring_matrix(m: &RingMatrix<Rational>, names: &NameTable, context: &str) -> String {
    let mut out = format!("context {context}\nsize {} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            for (g, c) in m.get(i, j).sorted_terms() {
                let w = if g.word.is_identity() {
                    "e".to_string()
                } else {
                    names.format(&g.word).to_string()
                };
                out.push_str(&format!("entry {} {} {} {w}", i + 1, j + 1, rational_string(c)));
                if g.shift != 0 {
                    out.push_str(&format!(" t^{}", g.shift));
                }
                out.push('\n');
            }
        }
    }
    out
}
