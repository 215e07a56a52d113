//! Nielsen 1-chains, the overlap graph `T_ρ`, signs, and the realization
//! of quasi-fixed chains as 0-cochains on `T_ρ`.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::chain::{chain_between, edge_mask, ChainMap, OneChain, UniversalVertex};
use crate::error::{Error, Result};
use crate::graph::GraphMap;
use crate::ring::{rational_string, Rational};
use crate::word::{NameTable, Word};

/// A nontrivial `g` with `supp(ρ) ∩ supp(gρ) ≠ ∅`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Overlap {
    pub g: Word,
    /// Shared lifted edges `(h, e)`, each with whether the two translates
    /// carry the same sign there.
    pub shared: Vec<SharedEdge>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SharedEdge {
    pub label: Word,
    pub edge: usize,
    pub same_sign: bool,
}

impl Overlap {
    pub fn non_orientable(&self) -> bool {
        self.shared.first().is_some_and(|s| s.same_sign)
    }
}

/// All overlap elements, solved from same-orbit support pairs; complete.
pub fn overlap_candidates(rho: &OneChain) -> Vec<Overlap> {
    let mut table: BTreeMap<Word, Vec<SharedEdge>> = BTreeMap::new();
    for (e, labels) in rho.orbits() {
        for h1 in &labels {
            for h2 in &labels {
                if h1 == h2 {
                    continue;
                }
                // g·(h₁, e) = (h₂, e)
                let g = h2.mul(&h1.inverse());
                let same = rho.coeff(h1, e).is_positive() == rho.coeff(h2, e).is_positive();
                table.entry(g).or_default().push(SharedEdge {
                    label: h2.clone(),
                    edge: e,
                    same_sign: same,
                });
            }
        }
    }
    table
        .into_iter()
        .map(|(g, mut shared)| {
            shared.sort_by(|a, b| (&a.label, a.edge).cmp(&(&b.label, b.edge)));
            Overlap { g, shared }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    NonGeometric { witness_label: Word, witness_edge: usize },
    Geometric { d: usize, overlaps: Vec<Overlap> },
    NotNielsen { condition: String, witness: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NielsenCertificate {
    pub verdict: Verdict,
    /// `None` when classified without a map.
    pub endpoints_fixed: Option<bool>,
    #[serde(skip)]
    pub rho: OneChain,
}

impl NielsenCertificate {
    pub fn is_nielsen(&self) -> bool {
        !matches!(self.verdict, Verdict::NotNielsen { .. })
    }

    pub fn is_geometric(&self) -> bool {
        matches!(self.verdict, Verdict::Geometric { .. })
    }
}

/// Combinatorial part of the classification. `universe` lists the edges of
/// `Γ` outside `H` that GNC2 quantifies over.
pub fn classify_chain(
    rho: &OneChain,
    universe: &[usize],
    endpoints_fixed: Option<bool>,
    names: &NameTable,
) -> Result<NielsenCertificate> {
    if rho.is_zero() {
        return Err(Error::DegenerateInput("ρ = 0".into()));
    }
    let cert = |verdict| {
        Ok(NielsenCertificate {
            verdict,
            endpoints_fixed,
            rho: rho.clone(),
        })
    };
    if endpoints_fixed == Some(false) {
        return cert(Verdict::NotNielsen {
            condition: "endpoints".into(),
            witness: "f̃ moves an endpoint".into(),
        });
    }
    let orbits = rho.orbits();
    for (e, labels) in &orbits {
        if labels.len() == 1 && rho.coeff(&labels[0], *e).abs() == Rational::from_integer(1.into()) {
            return cert(Verdict::NonGeometric {
                witness_label: labels[0].clone(),
                witness_edge: *e,
            });
        }
    }
    let overlaps = overlap_candidates(rho);
    if let Some(o) = overlaps.iter().find(|o| o.shared.len() != 1) {
        return cert(Verdict::NotNielsen {
            condition: "GNC1".into(),
            witness: format!("{} shares {} edges", names.format(&o.g), o.shared.len()),
        });
    }
    for &e in universe {
        let n = orbits.get(&e).map_or(0, |v| v.len());
        if n != 2 {
            return cert(Verdict::NotNielsen {
                condition: "GNC2".into(),
                witness: format!("edge orbit {e} occurs {n} times"),
            });
        }
    }
    if let Some(e) = orbits.keys().find(|e| !universe.contains(e)) {
        return cert(Verdict::NotNielsen {
            condition: "GNC2".into(),
            witness: format!("edge orbit {e} lies in H"),
        });
    }
    if rho.iter().any(|(_, _, c)| c.abs() != Rational::from_integer(1.into())) {
        return cert(Verdict::NotNielsen {
            condition: "GNC2".into(),
            witness: "coefficient other than ±1".into(),
        });
    }
    let noncommuting = overlaps.iter().enumerate().find_map(|(i, a)| {
        overlaps[i + 1..]
            .iter()
            .find(|b| !a.g.commutes_with(&b.g))
            .map(|b| (a.g.clone(), b.g.clone()))
    });
    if noncommuting.is_none() {
        return cert(Verdict::NotNielsen {
            condition: "GNC3".into(),
            witness: "all overlap elements commute".into(),
        });
    }
    cert(Verdict::Geometric {
        d: rho.len(),
        overlaps,
    })
}

/// Classifies `ρ = π_H^⊥([u, v])` for the map `gm`.
pub fn classify_nielsen(
    gm: &GraphMap,
    h: &[usize],
    u: &UniversalVertex,
    v: &UniversalVertex,
) -> Result<NielsenCertificate> {
    let mask = edge_mask(h, gm.graph.edge_count());
    let rho = chain_between(gm, u, v)?.project_rel(&mask);
    let a = ChainMap::new(gm)?;
    let fixed = a.f_tilde(u)? == *u && a.f_tilde(v)? == *v;
    let universe: Vec<usize> = (0..gm.graph.edge_count())
        .filter(|&e| gm.marking().edge_in_component[e] && !mask[e])
        .collect();
    classify_chain(&rho, &universe, Some(fixed), gm.names())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TRhoEdge {
    pub a: usize,
    pub b: usize,
    pub label: Word,
    pub edge: usize,
    pub non_orientable: bool,
}

/// A ball of radius `radius` about `ε` in the overlap graph.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TRhoGraph {
    pub vertices: Vec<Word>,
    pub depth: Vec<usize>,
    pub edges: Vec<TRhoEdge>,
    pub base: Word,
    pub signs: Vec<i8>,
    pub radius: usize,
    pub d: usize,
    /// False if some cycle carried parity −1 (never expected).
    pub sign_consistent: bool,
    #[serde(skip)]
    index: HashMap<Word, usize>,
    #[serde(skip)]
    adjacency: Vec<Vec<(usize, usize)>>,
}

/// Builds the overlap graph ball; `ρ` must pass the geometric tests that do
/// not need the map.
pub fn build_trho(rho: &OneChain, radius: usize) -> Result<TRhoGraph> {
    let orbit_universe: Vec<usize> = rho.orbits().keys().copied().collect();
    let names = NameTable::standard(rho.support().map(|(g, _)| g.max_generator()).max().unwrap_or(0));
    let cert = classify_chain(rho, &orbit_universe, None, &names)?;
    let overlaps = match cert.verdict {
        Verdict::Geometric { overlaps, .. } => overlaps,
        Verdict::NotNielsen { condition, witness } => {
            return Err(Error::NotGeometric(format!("{condition}: {witness}")))
        }
        Verdict::NonGeometric { .. } => return Err(Error::NotGeometric("NNC1 holds".into())),
    };

    let mut found: HashMap<Word, usize> = HashMap::from([(Word::identity(), 0)]);
    let mut queue = VecDeque::from([Word::identity()]);
    while let Some(g) = queue.pop_front() {
        let dg = found[&g];
        if dg == radius {
            continue;
        }
        for o in &overlaps {
            let h = g.mul(&o.g);
            if !found.contains_key(&h) {
                found.insert(h.clone(), dg + 1);
                queue.push_back(h);
            }
        }
    }
    let mut vertices: Vec<Word> = found.keys().cloned().collect();
    vertices.sort();
    let index: HashMap<Word, usize> = vertices.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
    let depth: Vec<usize> = vertices.iter().map(|w| found[w]).collect();

    let mut edges = Vec::new();
    for (a, g) in vertices.iter().enumerate() {
        for o in &overlaps {
            let h = g.mul(&o.g);
            if let Some(&b) = index.get(&h) {
                if a < b {
                    let s = &o.shared[0];
                    edges.push(TRhoEdge {
                        a,
                        b,
                        label: g.mul(&s.label),
                        edge: s.edge,
                        non_orientable: s.same_sign,
                    });
                }
            }
        }
    }
    edges.sort_by_key(|e| (e.a, e.b));
    let mut adjacency = vec![Vec::new(); vertices.len()];
    for (k, e) in edges.iter().enumerate() {
        adjacency[e.a].push((e.b, k));
        adjacency[e.b].push((e.a, k));
    }

    let mut signs = vec![0i8; vertices.len()];
    let mut consistent = true;
    let base = index[&Word::identity()];
    signs[base] = 1;
    let mut queue = VecDeque::from([base]);
    while let Some(a) = queue.pop_front() {
        for &(b, k) in &adjacency[a] {
            let s = if edges[k].non_orientable { -signs[a] } else { signs[a] };
            if signs[b] == 0 {
                signs[b] = s;
                queue.push_back(b);
            } else if signs[b] != s {
                consistent = false;
            }
        }
    }

    Ok(TRhoGraph {
        vertices,
        depth,
        edges,
        base: Word::identity(),
        signs,
        radius,
        d: rho.len(),
        sign_consistent: consistent,
        index,
        adjacency,
    })
}

impl TRhoGraph {
    pub fn vertex(&self, g: &Word) -> Option<usize> {
        self.index.get(g).copied()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[v].iter().map(|&(b, _)| b)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<&TRhoEdge> {
        self.adjacency[a]
            .iter()
            .find(|&&(x, _)| x == b)
            .map(|&(_, k)| &self.edges[k])
    }

    pub fn is_interior(&self, v: usize) -> bool {
        self.depth[v] < self.radius
    }

    /// `(-1)^{σ(path)}`: the product over consecutive pairs.
    pub fn sigma_parity(&self, path: &[Word]) -> Result<i8> {
        let mut p = 1i8;
        for w in path.windows(2) {
            let a = self.vertex(&w[0]).ok_or_else(|| Error::EnlargeBall(w[0].to_string()))?;
            let b = self.vertex(&w[1]).ok_or_else(|| Error::EnlargeBall(w[1].to_string()))?;
            let e = self
                .edge_between(a, b)
                .ok_or_else(|| Error::NonAdjacent(w[0].to_string(), w[1].to_string()))?;
            if e.non_orientable {
                p = -p;
            }
        }
        Ok(p)
    }

    pub fn sign_of(&self, g: &Word) -> Result<i8> {
        self.vertex(g)
            .map(|v| self.signs[v])
            .ok_or_else(|| Error::EnlargeBall(g.to_string()))
    }

    /// Shortest path from the base, by breadth-first search.
    pub fn path_from_base(&self, g: &Word) -> Result<Vec<Word>> {
        let target = self.vertex(g).ok_or_else(|| Error::EnlargeBall(g.to_string()))?;
        let base = self.vertex(&self.base).expect("base present");
        let mut prev = vec![usize::MAX; self.vertices.len()];
        prev[base] = base;
        let mut queue = VecDeque::from([base]);
        while let Some(a) = queue.pop_front() {
            for b in self.neighbors(a) {
                if prev[b] == usize::MAX {
                    prev[b] = a;
                    queue.push_back(b);
                }
            }
        }
        let mut path = vec![target];
        let mut cur = target;
        while cur != base {
            cur = prev[cur];
            path.push(cur);
        }
        path.reverse();
        Ok(path.into_iter().map(|i| self.vertices[i].clone()).collect())
    }

    /// Simple cycles of length `3..=max_len`, each listed once.
    pub fn simple_cycles(&self, max_len: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let n = self.vertices.len();
        for start in 0..n {
            let mut stack = vec![start];
            let mut on = vec![false; n];
            on[start] = true;
            self.cycle_dfs(start, &mut stack, &mut on, max_len, &mut out);
        }
        out
    }

    fn cycle_dfs(&self, start: usize, stack: &mut Vec<usize>, on: &mut [bool], max_len: usize, out: &mut Vec<Vec<usize>>) {
        let last = *stack.last().unwrap();
        for b in self.neighbors(last) {
            if b == start && stack.len() >= 3 && stack[1] < last {
                out.push(stack.clone());
            } else if b > start && !on[b] && stack.len() < max_len {
                on[b] = true;
                stack.push(b);
                self.cycle_dfs(start, stack, on, max_len, out);
                stack.pop();
                on[b] = false;
            }
        }
    }

    /// DOT rendering: sign-coloured vertices, dashed non-orientable edges.
    pub fn to_dot(&self, names: &NameTable) -> String {
        let mut s = String::from("graph trho {\n  node [shape=box, style=filled];\n");
        for (i, w) in self.vertices.iter().enumerate() {
            let color = if self.signs[i] > 0 { "lightblue" } else { "salmon" };
            let _ = writeln!(
                s,
                "  v{i} [label=\"{}\", fillcolor={color}];",
                names.format(w)
            );
        }
        for e in &self.edges {
            let style = if e.non_orientable { ", style=dashed" } else { "" };
            let _ = writeln!(
                s,
                "  v{} -- v{} [label=\"{} e{}\"{style}];",
                e.a,
                e.b,
                names.format(&e.label),
                e.edge
            );
        }
        s.push_str("}\n");
        s
    }
}

/// `x = Σ q_j g_j ρ`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuasiFixedElement {
    pub rho: OneChain,
    pub terms: Vec<(Rational, Word)>,
}

impl QuasiFixedElement {
    pub fn new(rho: OneChain, terms: Vec<(Rational, Word)>) -> Self {
        let mut acc: BTreeMap<Word, Rational> = BTreeMap::new();
        for (q, g) in terms {
            *acc.entry(g).or_insert_with(Rational::zero) += q;
        }
        QuasiFixedElement {
            rho,
            terms: acc.into_iter().filter(|(_, q)| !q.is_zero()).map(|(g, q)| (q, g)).collect(),
        }
    }

    pub fn to_chain(&self) -> OneChain {
        let mut x = OneChain::zero();
        for (q, g) in &self.terms {
            x.add_scaled(&self.rho.translate(g), q);
        }
        x
    }

    pub fn coeff_norm_sq(&self) -> Rational {
        self.terms.iter().map(|(q, _)| q * q).sum()
    }
}

pub type Cochain0 = BTreeMap<Word, Rational>;

/// `R(x) = Σ sign(g_j) q_j χ_{g_j}`.
pub fn realize(x: &QuasiFixedElement, t: &TRhoGraph) -> Result<Cochain0> {
    let mut out = Cochain0::new();
    for (q, g) in &x.terms {
        let s = t.sign_of(g)?;
        out.insert(g.clone(), q * Rational::from_integer(s.into()));
    }
    Ok(out)
}

/// `δ₀ψ` on the edges of the ball, keyed by edge index; zero values omitted.
pub fn coboundary(t: &TRhoGraph, psi: &Cochain0) -> Result<BTreeMap<usize, Rational>> {
    for (g, q) in psi {
        if q.is_zero() {
            continue;
        }
        let v = t.vertex(g).ok_or_else(|| Error::EnlargeBall(g.to_string()))?;
        if !t.is_interior(v) {
            return Err(Error::EnlargeBall(g.to_string()));
        }
    }
    let val = |v: usize| psi.get(&t.vertices[v]).cloned().unwrap_or_else(Rational::zero);
    let mut out = BTreeMap::new();
    for (k, e) in t.edges.iter().enumerate() {
        let d = val(e.b) - val(e.a);
        if !d.is_zero() {
            out.insert(k, d);
        }
    }
    Ok(out)
}

pub fn cochain_norm_sq<K>(c: &BTreeMap<K, Rational>) -> Rational {
    c.values().map(|q| q * q).sum()
}

pub fn cochain_to_strings(c: &Cochain0, names: &NameTable) -> Vec<(String, String)> {
    c.iter()
        .map(|(g, q)| (names.format(g).to_string(), rational_string(q)))
        .collect()
}
