//! Rational cellular chains on the universal cover.
//!
//! A lifted edge is written `(g, e)`: the translate by `g` of the
//! fundamental-domain lift of `e`. Chains store the input orientation of
//! each edge; traversing an edge backwards contributes `-1`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};

use crate::endo::FreeEndomorphism;
use crate::error::{Error, Result};
use crate::graph::{EdgeStep, GraphMap, LiftedStep};
use crate::ring::{parse_rational, rational_string, GroupContext, GroupElem, Rational, RingElement, RingMatrix};
use crate::word::Word;

/// The vertex `(g, v)` of the universal cover, i.e. `g·ṽ`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UniversalVertex {
    pub g: Word,
    pub v: usize,
}

impl UniversalVertex {
    pub fn new(g: Word, v: usize) -> Self {
        UniversalVertex { g, v }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct OneChain {
    terms: BTreeMap<(Word, usize), Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ZeroChain {
    terms: BTreeMap<(Word, usize), Rational>,
}

fn add_into(map: &mut BTreeMap<(Word, usize), Rational>, key: (Word, usize), c: Rational) {
    if c.is_zero() {
        return;
    }
    use std::collections::btree_map::Entry;
    match map.entry(key) {
        Entry::Occupied(mut o) => {
            *o.get_mut() += c;
            if o.get().is_zero() {
                o.remove();
            }
        }
        Entry::Vacant(v) => {
            v.insert(c);
        }
    }
}

impl OneChain {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn edge(g: Word, e: usize) -> Self {
        Self::term(g, e, Rational::one())
    }

    pub fn term(g: Word, e: usize, c: Rational) -> Self {
        let mut x = Self::zero();
        x.add_term(g, e, c);
        x
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Word, usize, Rational)>) -> Self {
        let mut x = Self::zero();
        for (g, e, c) in terms {
            x.add_term(g, e, c);
        }
        x
    }

    pub fn add_term(&mut self, g: Word, e: usize, c: Rational) {
        add_into(&mut self.terms, (g, e), c);
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of terms; `is_zero` tests emptiness.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, g: &Word, e: usize) -> Rational {
        self.terms
            .get(&(g.clone(), e))
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    /// Terms in canonical `(word, edge)` order.
    pub fn iter(&self) -> impl Iterator<Item = (&Word, usize, &Rational)> {
        self.terms.iter().map(|((g, e), c)| (g, *e, c))
    }

    pub fn support(&self) -> impl Iterator<Item = (&Word, usize)> {
        self.terms.keys().map(|(g, e)| (g, *e))
    }

    pub fn add(&self, o: &OneChain) -> OneChain {
        let mut r = self.clone();
        for ((g, e), c) in &o.terms {
            r.add_term(g.clone(), *e, c.clone());
        }
        r
    }

    pub fn add_scaled(&mut self, o: &OneChain, s: &Rational) {
        if s.is_zero() {
            return;
        }
        for ((g, e), c) in &o.terms {
            self.add_term(g.clone(), *e, c * s);
        }
    }

    pub fn sub(&self, o: &OneChain) -> OneChain {
        let mut r = self.clone();
        r.add_scaled(o, &-Rational::one());
        r
    }

    pub fn scale(&self, s: &Rational) -> OneChain {
        let mut r = OneChain::zero();
        r.add_scaled(self, s);
        r
    }

    /// Left translation `g·x`.
    pub fn translate(&self, g: &Word) -> OneChain {
        if g.is_identity() {
            return self.clone();
        }
        OneChain {
            terms: self
                .terms
                .iter()
                .map(|((h, e), c)| ((g.mul(h), *e), c.clone()))
                .collect(),
        }
    }

    pub fn l2_norm_sq(&self) -> Rational {
        self.terms.values().map(|c| c * c).sum()
    }

    pub fn inner(&self, o: &OneChain) -> Rational {
        let (a, b) = if self.len() <= o.len() { (self, o) } else { (o, self) };
        a.terms
            .iter()
            .filter_map(|(k, c)| b.terms.get(k).map(|d| c * d))
            .sum()
    }

    /// `π_H^⊥`: drops every term on an edge of `H`.
    pub fn project_rel(&self, h: &[bool]) -> OneChain {
        OneChain {
            terms: self
                .terms
                .iter()
                .filter(|((_, e), _)| !h.get(*e).copied().unwrap_or(false))
                .map(|(k, c)| (k.clone(), c.clone()))
                .collect(),
        }
    }

    /// Edge orbits (edges of `Γ`) with the labels at which they occur.
    pub fn orbits(&self) -> BTreeMap<usize, Vec<Word>> {
        let mut m: BTreeMap<usize, Vec<Word>> = BTreeMap::new();
        for (g, e) in self.terms.keys() {
            m.entry(*e).or_default().push(g.clone());
        }
        m
    }

    /// Serializes in the `.chain` format.
    pub fn to_chain_text(&self, gm: &GraphMap) -> String {
        let mut s = String::new();
        for ((g, e), c) in &self.terms {
            let _ = writeln!(
                s,
                "{} {} {}",
                rational_string(c),
                gm.names().format(g),
                gm.graph.edges[*e].id
            );
        }
        s
    }

    /// Compact form like `a - b + x1 c`.
    pub fn pretty(&self, gm: &GraphMap) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut s = String::new();
        for (i, ((g, e), c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            s.push_str(match (i, neg) {
                (0, true) => "-",
                (0, false) => "",
                (_, true) => " - ",
                (_, false) => " + ",
            });
            let a = c.abs();
            if !a.is_one() {
                s.push_str(&rational_string(&a));
                s.push(' ');
            }
            if !g.is_identity() {
                let _ = write!(s, "{} ", gm.names().format(g));
            }
            s.push_str(&gm.graph.edges[*e].id);
        }
        s
    }

    fn from_lift(steps: &[LiftedStep]) -> OneChain {
        let mut x = OneChain::zero();
        for s in steps {
            x.add_term(s.label.clone(), s.edge, Rational::from_integer(s.sign.into()));
        }
        x
    }
}

impl ZeroChain {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn vertex(u: &UniversalVertex) -> Self {
        let mut z = Self::zero();
        z.add_term(u.clone(), Rational::one());
        z
    }

    pub fn add_term(&mut self, u: UniversalVertex, c: Rational) {
        add_into(&mut self.terms, (u.g, u.v), c);
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn sub(&self, o: &ZeroChain) -> ZeroChain {
        let mut r = self.clone();
        for ((g, v), c) in &o.terms {
            r.add_term(UniversalVertex::new(g.clone(), *v), -c.clone());
        }
        r
    }

    pub fn iter(&self) -> impl Iterator<Item = (UniversalVertex, &Rational)> {
        self.terms
            .iter()
            .map(|((g, v), c)| (UniversalVertex::new(g.clone(), *v), c))
    }
}

/// Endpoints `(origin, terminal)` of the lifted edge `(g, e)`.
pub fn lift_endpoints(gm: &GraphMap, g: &Word, e: usize) -> Result<(UniversalVertex, UniversalVertex)> {
    let (alpha, beta) = gm
        .marking()
        .edge_labels(e)
        .ok_or_else(|| Error::DifferentComponents(gm.graph.edges[e].id.clone()))?;
    let edge = &gm.graph.edges[e];
    Ok((
        UniversalVertex::new(g.mul(alpha), edge.origin),
        UniversalVertex::new(g.mul(beta), edge.terminal),
    ))
}

/// Group label of the terminal vertex of the lift `(g, e)`.
pub fn lift_translate(gm: &GraphMap, g: &Word, e: usize) -> Result<Word> {
    Ok(lift_endpoints(gm, g, e)?.1.g)
}

pub fn boundary(gm: &GraphMap, x: &OneChain) -> Result<ZeroChain> {
    let mut z = ZeroChain::zero();
    for (g, e, c) in x.iter() {
        let (o, t) = lift_endpoints(gm, g, e)?;
        z.add_term(t, c.clone());
        z.add_term(o, -c.clone());
    }
    Ok(z)
}

/// An edge-path in `Γ` from the basepoint whose lift from `*̃` ends at `u`.
pub fn path_to(gm: &GraphMap, u: &UniversalVertex) -> Result<Vec<EdgeStep>> {
    let m = gm.marking();
    if u.v >= gm.graph.vertices.len() || !m.in_component[u.v] {
        return Err(Error::DifferentComponents(
            gm.graph.vertices.get(u.v).cloned().unwrap_or_else(|| u.v.to_string()),
        ));
    }
    if u.g.max_generator() > gm.rank() {
        return Err(Error::RankMismatch {
            expected: gm.rank(),
            found: u.g.max_generator(),
        });
    }
    let mut path = Vec::new();
    for l in u.g.letters() {
        let lp = m.generator_loop(&gm.graph, l.generator());
        if l.is_inverse() {
            path.extend(crate::graph::reverse_path(&lp));
        } else {
            path.extend(lp);
        }
    }
    path.extend_from_slice(&m.tree_paths[u.v]);
    Ok(path)
}

fn chain_from_base(gm: &GraphMap, u: &UniversalVertex) -> Result<OneChain> {
    let path = path_to(gm, u)?;
    let (steps, end) = gm.lift_path(&Word::identity(), &path)?;
    debug_assert_eq!(end, u.g);
    Ok(OneChain::from_lift(&steps))
}

/// The geodesic chain `[u, v]`, obtained as a difference of two
/// basepoint-anchored chains (cancellation is exact).
pub fn chain_between(gm: &GraphMap, u: &UniversalVertex, v: &UniversalVertex) -> Result<OneChain> {
    if u == v {
        path_to(gm, u)?;
        return Ok(OneChain::zero());
    }
    Ok(chain_from_base(gm, v)?.sub(&chain_from_base(gm, u)?))
}

/// Chain of the lift of an arbitrary edge-path from `(g, v)`.
pub fn lift_path_chain(gm: &GraphMap, start: &Word, path: &[EdgeStep]) -> Result<OneChain> {
    Ok(OneChain::from_lift(&gm.lift_path(start, path)?.0))
}

/// The equivariant chain map `A_f` with its precomputed edge images.
#[derive(Clone, Debug)]
pub struct ChainMap {
    phi: FreeEndomorphism,
    images: Vec<Option<OneChain>>,
    offsets: Vec<Option<Word>>,
    vmap: Vec<usize>,
}

impl ChainMap {
    pub fn new(gm: &GraphMap) -> Result<Self> {
        if !gm.fixes_basepoint() {
            return Err(Error::RequiresStabilization);
        }
        let phi = gm.induced_automorphism()?;
        let m = gm.marking();
        let offsets: Vec<Option<Word>> = (0..gm.graph.vertices.len())
            .map(|v| {
                if m.in_component[v] {
                    gm.vertex_offset(v).map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<_>>()?;
        let mut images = Vec::with_capacity(gm.graph.edge_count());
        for e in 0..gm.graph.edge_count() {
            if !m.edge_in_component[e] {
                images.push(None);
                continue;
            }
            let (alpha, _) = m.edge_labels(e).expect("edge in component");
            let o = gm.graph.edges[e].origin;
            let start = phi.apply(alpha).mul(offsets[o].as_ref().expect("vertex in component"));
            images.push(Some(lift_path_chain(gm, &start, &gm.emap[e])?));
        }
        Ok(ChainMap {
            phi,
            images,
            offsets,
            vmap: gm.vmap.clone(),
        })
    }

    pub fn phi(&self) -> &FreeEndomorphism {
        &self.phi
    }

    /// `A_f(ε, e)`.
    pub fn edge_image(&self, e: usize) -> Option<&OneChain> {
        self.images[e].as_ref()
    }

    /// `f̃(g, v) = (Φ_f(g)·h_v, f(v))`.
    pub fn f_tilde(&self, u: &UniversalVertex) -> Result<UniversalVertex> {
        let h = self.offsets[u.v]
            .as_ref()
            .ok_or_else(|| Error::DifferentComponents(u.v.to_string()))?;
        Ok(UniversalVertex::new(self.phi.apply(&u.g).mul(h), self.vmap[u.v]))
    }

    pub fn apply(&self, x: &OneChain) -> OneChain {
        let mut out = OneChain::zero();
        for (g, e, c) in x.iter() {
            let img = self.images[e].as_ref().expect("chain outside the basepoint component");
            out.add_scaled(&img.translate(&self.phi.apply(g)), c);
        }
        out
    }

    /// `A_{f,H} = π_H^⊥ ∘ A_f`.
    pub fn apply_rel(&self, x: &OneChain, h: &[bool]) -> OneChain {
        self.apply(x).project_rel(h)
    }

    pub fn apply_power(&self, x: &OneChain, k: usize, h: &[bool]) -> OneChain {
        let mut y = x.clone();
        for _ in 0..k {
            y = self.apply_rel(&y, h);
        }
        y
    }
}

pub fn apply_a(gm: &GraphMap, x: &OneChain) -> Result<OneChain> {
    Ok(ChainMap::new(gm)?.apply(x))
}

/// `π_H^⊥(x)` for a list of edge ids.
pub fn project_rel(x: &OneChain, h: &[usize], edge_count: usize) -> OneChain {
    x.project_rel(&edge_mask(h, edge_count))
}

pub fn edge_mask(edges: &[usize], edge_count: usize) -> Vec<bool> {
    let mut m = vec![false; edge_count];
    for &e in edges {
        m[e] = true;
    }
    m
}

/// The Jacobian block on the given edges: entry `(i, j)` collects `±g` over
/// the terms `(g, e_j)` of `A_f(ε, e_i)`.
pub fn jacobian(gm: &GraphMap, edges: &[usize]) -> Result<RingMatrix<Rational>> {
    let a = ChainMap::new(gm)?;
    jacobian_from(&a, gm.rank(), edges)
}

pub fn jacobian_from(a: &ChainMap, rank: usize, edges: &[usize]) -> Result<RingMatrix<Rational>> {
    let col: BTreeMap<usize, usize> = edges.iter().enumerate().map(|(j, &e)| (e, j)).collect();
    let mut rows = vec![vec![RingElement::<Rational>::zero(); edges.len()]; edges.len()];
    for (i, &e) in edges.iter().enumerate() {
        let img = a
            .edge_image(e)
            .ok_or_else(|| Error::DifferentComponents(e.to_string()))?;
        for (g, f, c) in img.iter() {
            if let Some(&j) = col.get(&f) {
                rows[i][j].add_term(GroupElem::word(g.clone()), c.clone());
            }
        }
    }
    RingMatrix::from_rows(Arc::new(GroupContext::Free { rank }), rows)
}

/// Parses the `.chain` format: `coeff <word> <eid>` per line, `~eid` negates.
pub fn parse_chain(text: &str, gm: &GraphMap) -> Result<OneChain> {
    let mut x = OneChain::zero();
    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(Error::parse(ln, "expected `coeff <word> <eid>`"));
        }
        let c = parse_rational(toks[0]).ok_or_else(|| Error::parse(ln, format!("bad coefficient `{}`", toks[0])))?;
        let last = toks[toks.len() - 1];
        let (eid, sign) = match last.strip_prefix('~') {
            Some(id) => (id, -1),
            None => (last, 1),
        };
        let e = gm
            .graph
            .edge_index(eid)
            .ok_or_else(|| Error::parse(ln, format!("unknown edge `{eid}`")))?;
        let g = gm
            .names()
            .parse_tokens(toks[1..toks.len() - 1].iter().copied())
            .map_err(|err| Error::parse(ln, err.to_string()))?;
        x.add_term(g, e, c * Rational::from_integer(sign.into()));
    }
    Ok(x)
}

/// Edge ids to indices.
pub fn parse_edge_set(gm: &GraphMap, ids: &[&str]) -> Result<Vec<usize>> {
    let mut out = BTreeSet::new();
    for id in ids {
        out.insert(
            gm.graph
                .edge_index(id)
                .ok_or_else(|| Error::DanglingId(id.to_string()))?,
        );
    }
    Ok(out.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_graph_map;

    const PLASTIC: &str = "vertex *\nedge a * *\nedge b * *\nedge c * *\nbasepoint *\ntree\n\
                           vmap * -> *\nemap a -> b\nemap b -> c\nemap c -> a b\n";

    fn rose() -> GraphMap {
        parse_graph_map(PLASTIC).unwrap()
    }

    fn w(gm: &GraphMap, s: &str) -> Word {
        gm.names().parse_word(s).unwrap()
    }

    #[test]
    fn apply_on_third_petal() {
        let gm = rose();
        let a = ChainMap::new(&gm).unwrap();
        let expect = parse_chain("1 e a\n1 x1 b\n", &gm).unwrap();
        assert_eq!(a.edge_image(2).unwrap(), &expect);
    }

    #[test]
    fn jacobian_rows() {
        let gm = rose();
        let j = jacobian(&gm, &[0, 1, 2]).unwrap();
        let rows = j.pretty_rows(Some(gm.names()));
        assert_eq!(rows, vec![vec!["0", "1", "0"], vec!["0", "0", "1"], vec!["1", "x1", "0"]]);
    }

    #[test]
    fn boundary_of_geodesic() {
        let gm = rose();
        let u = UniversalVertex::new(w(&gm, "x1 x2^-1"), 0);
        let v = UniversalVertex::new(w(&gm, "x3 x3 x1"), 0);
        let c = chain_between(&gm, &u, &v).unwrap();
        let z = boundary(&gm, &c).unwrap();
        assert_eq!(z, ZeroChain::vertex(&v).sub(&ZeroChain::vertex(&u)));
        assert!(c.iter().all(|(_, _, c)| c.abs().is_one()));
        assert_eq!(c.len(), 5);
        assert!(chain_between(&gm, &u, &u).unwrap().is_zero());
    }

    #[test]
    fn loop_edge_boundary() {
        let gm = rose();
        let g = w(&gm, "x2");
        let z = boundary(&gm, &OneChain::edge(g.clone(), 0)).unwrap();
        let expect = ZeroChain::vertex(&UniversalVertex::new(g.mul(&w(&gm, "x1")), 0))
            .sub(&ZeroChain::vertex(&UniversalVertex::new(g, 0)));
        assert_eq!(z, expect);
    }

    #[test]
    fn projection() {
        let gm = rose();
        let x = parse_chain("1 e a\n-2 x1 b\n1/2 x2 c\n", &gm).unwrap();
        let p = project_rel(&x, &[1], 3);
        assert_eq!(p, parse_chain("1 e a\n1/2 x2 c\n", &gm).unwrap());
        assert!(project_rel(&x, &[0, 1, 2], 3).is_zero());
        assert_eq!(project_rel(&x, &[], 3), x);
    }

    #[test]
    fn chain_text_round_trip() {
        let gm = rose();
        let x = parse_chain("1 e a\n-2 x1 x2^-1 b\n1/2 x2 ~c\n", &gm).unwrap();
        assert_eq!(parse_chain(&x.to_chain_text(&gm), &gm).unwrap(), x);
        assert_eq!(x.coeff(&w(&gm, "x2"), 2), Rational::new((-1).into(), 2.into()));
    }
}
