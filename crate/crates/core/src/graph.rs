//! Graphs, graph maps and the `.gm` text format.
//!
//! The marking identifies `π₁(Γ, *)` with a free group: every non-tree edge
//! of the basepoint component gives one generator, the loop
//! `tree-path · e · tree-path⁻¹` (or its reverse when the generator is
//! declared on `~e`).

use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use crate::endo::FreeEndomorphism;
use crate::error::{Error, Result};
use crate::word::{NameTable, Word};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub id: String,
    pub origin: usize,
    pub terminal: usize,
}

/// One step of an edge-path: an edge traversed forward or reversed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EdgeStep {
    pub edge: usize,
    pub reversed: bool,
}

impl EdgeStep {
    pub fn forward(edge: usize) -> Self {
        EdgeStep {
            edge,
            reversed: false,
        }
    }

    pub fn reverse(self) -> Self {
        EdgeStep {
            edge: self.edge,
            reversed: !self.reversed,
        }
    }

    pub fn start(self, g: &Graph) -> usize {
        let e = &g.edges[self.edge];
        if self.reversed {
            e.terminal
        } else {
            e.origin
        }
    }

    pub fn end(self, g: &Graph) -> usize {
        let e = &g.edges[self.edge];
        if self.reversed {
            e.origin
        } else {
            e.terminal
        }
    }
}

pub fn reverse_path(path: &[EdgeStep]) -> Vec<EdgeStep> {
    path.iter().rev().map(|s| s.reverse()).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    pub name: String,
    pub vertices: Vec<String>,
    pub edges: Vec<Edge>,
    pub basepoint: usize,
    pub tree: Vec<bool>,
}

impl Graph {
    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == id)
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Connected component label of every vertex.
    pub fn components(&self) -> Vec<usize> {
        self.components_of(|_| true)
    }

    /// Components of the subgraph spanned by the selected edges (isolated
    /// vertices get their own label).
    pub fn components_of(&self, keep: impl Fn(usize) -> bool) -> Vec<usize> {
        let n = self.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (i, e) in self.edges.iter().enumerate() {
            if keep(i) {
                let a = find(&mut parent, e.origin);
                let b = find(&mut parent, e.terminal);
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        (0..n).map(|v| find(&mut parent, v)).collect()
    }

    pub fn is_path(&self, path: &[EdgeStep]) -> bool {
        path.windows(2).all(|w| w[0].end(self) == w[1].start(self))
    }
}

/// A generator of the marking: the non-tree edge it runs along and whether
/// the generator loop crosses that edge backwards.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GeneratorEdge {
    pub edge: usize,
    pub reversed: bool,
}

/// Identification of `π₁(Γ, *)` with the free group, and the resulting
/// fundamental domain in the universal cover.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Marking {
    pub in_component: Vec<bool>,
    pub edge_in_component: Vec<bool>,
    pub tree_paths: Vec<Vec<EdgeStep>>,
    pub generators: Vec<GeneratorEdge>,
    pub names: NameTable,
    /// For each edge of the basepoint component, the labels `(α, β)` with the
    /// lift `(g, e)` running from `(g·α, o(e))` to `(g·β, t(e))`.
    labels: Vec<Option<(Word, Word)>>,
}

impl Marking {
    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn edge_labels(&self, e: usize) -> Option<&(Word, Word)> {
        self.labels[e].as_ref()
    }

    /// The closed edge-path at the basepoint representing generator `i`.
    pub fn generator_loop(&self, graph: &Graph, i: usize) -> Vec<EdgeStep> {
        let ge = self.generators[i - 1];
        let e = &graph.edges[ge.edge];
        let (a, b) = if ge.reversed {
            (e.terminal, e.origin)
        } else {
            (e.origin, e.terminal)
        };
        let mut p = self.tree_paths[a].clone();
        p.push(EdgeStep {
            edge: ge.edge,
            reversed: ge.reversed,
        });
        p.extend(reverse_path(&self.tree_paths[b]));
        p
    }
}

/// A lifted edge `(g, e)` with the sign it carries in a lifted path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftedStep {
    pub label: Word,
    pub edge: usize,
    pub sign: i32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphMap {
    pub graph: Graph,
    pub vmap: Vec<usize>,
    pub emap: Vec<Vec<EdgeStep>>,
    marking: Marking,
    inverse_images: Option<Vec<Word>>,
    /// User-supplied filtration, bottom stratum first.
    pub declared_strata: Option<Vec<Vec<usize>>>,
}

impl GraphMap {
    pub fn new(
        graph: Graph,
        vmap: Vec<usize>,
        emap: Vec<Vec<EdgeStep>>,
        generators: Option<(Vec<String>, Vec<GeneratorEdge>)>,
    ) -> Result<Self> {
        validate_morphism(&graph, &vmap, &emap)?;
        let marking = build_marking(&graph, generators)?;
        Ok(GraphMap {
            graph,
            vmap,
            emap,
            marking,
            inverse_images: None,
            declared_strata: None,
        })
    }

    pub fn with_inverse_images(mut self, inv: Vec<Word>) -> Result<Self> {
        if inv.len() != self.marking.rank() {
            return Err(Error::RankMismatch {
                expected: self.marking.rank(),
                found: inv.len(),
            });
        }
        self.inverse_images = Some(inv);
        Ok(self)
    }

    pub fn marking(&self) -> &Marking {
        &self.marking
    }

    pub fn names(&self) -> &NameTable {
        &self.marking.names
    }

    pub fn rank(&self) -> usize {
        self.marking.rank()
    }

    pub fn raw_inverse_images(&self) -> Option<&[Word]> {
        self.inverse_images.as_deref()
    }

    pub fn fixes_basepoint(&self) -> bool {
        self.vmap[self.graph.basepoint] == self.graph.basepoint
    }

    pub fn is_identity(&self) -> bool {
        self.vmap.iter().enumerate().all(|(v, &w)| v == w)
            && self
                .emap
                .iter()
                .enumerate()
                .all(|(e, p)| p.len() == 1 && p[0] == EdgeStep::forward(e))
    }

    /// Image of an edge-path under the map.
    pub fn image_path(&self, path: &[EdgeStep]) -> Vec<EdgeStep> {
        let mut out = Vec::new();
        for s in path {
            let img = &self.emap[s.edge];
            if s.reversed {
                out.extend(reverse_path(img));
            } else {
                out.extend_from_slice(img);
            }
        }
        out
    }

    /// `self ∘ other` by formal concatenation of edge-paths.
    pub fn compose(&self, other: &GraphMap) -> GraphMap {
        let vmap = other.vmap.iter().map(|&v| self.vmap[v]).collect();
        let emap = other.emap.iter().map(|p| self.image_path(p)).collect();
        GraphMap {
            graph: self.graph.clone(),
            vmap,
            emap,
            marking: self.marking.clone(),
            inverse_images: None,
            declared_strata: self.declared_strata.clone(),
        }
    }

    /// The composite `f^k`; inverse images follow when `f` fixes the basepoint.
    pub fn power(&self, k: u32) -> Result<GraphMap> {
        assert!(k >= 1);
        let mut out = self.clone();
        for _ in 1..k {
            out = self.compose(&out);
        }
        out.inverse_images = if k == 1 {
            self.inverse_images.clone()
        } else if self.fixes_basepoint() && self.inverse_images.is_some() {
            let phi = self.induced_automorphism()?;
            phi.power(k).inverse_images().map(|s| s.to_vec())
        } else {
            // Inverse images supplied for a map moving the basepoint refer to
            // the stabilized iterate.
            self.inverse_images.clone()
        };
        Ok(out)
    }

    /// Lifts an edge-path starting at the universal-cover vertex `(g, v)`.
    /// Returns the lifted edges with signs and the label of the endpoint.
    pub fn lift_path(&self, start: &Word, path: &[EdgeStep]) -> Result<(Vec<LiftedStep>, Word)> {
        let mut g = start.clone();
        let mut steps = Vec::with_capacity(path.len());
        for s in path {
            let (alpha, beta) = self.marking.labels[s.edge]
                .as_ref()
                .ok_or_else(|| Error::DifferentComponents(self.graph.edges[s.edge].id.clone()))?;
            if s.reversed {
                let h = g.mul(&beta.inverse());
                g = h.mul(alpha);
                steps.push(LiftedStep {
                    label: h,
                    edge: s.edge,
                    sign: -1,
                });
            } else {
                let h = g.mul(&alpha.inverse());
                g = h.mul(beta);
                steps.push(LiftedStep {
                    label: h,
                    edge: s.edge,
                    sign: 1,
                });
            }
        }
        Ok((steps, g))
    }

    /// Label `h_v` of the endpoint of the lift of `f(tree-path(* → v))` from `*̃`.
    pub fn vertex_offset(&self, v: usize) -> Result<Word> {
        if !self.marking.in_component[v] {
            return Err(Error::DifferentComponents(self.graph.vertices[v].clone()));
        }
        if !self.fixes_basepoint() {
            return Err(Error::RequiresStabilization);
        }
        let img = self.image_path(&self.marking.tree_paths[v]);
        Ok(self.lift_path(&Word::identity(), &img)?.1)
    }

    /// Images of the generators under the induced automorphism `Φ_f`.
    pub fn induced_automorphism(&self) -> Result<FreeEndomorphism> {
        if !self.fixes_basepoint() {
            return Err(Error::RequiresStabilization);
        }
        let mut images = Vec::with_capacity(self.rank());
        for i in 1..=self.rank() {
            let lp = self.marking.generator_loop(&self.graph, i);
            let img = self.image_path(&lp);
            images.push(self.lift_path(&Word::identity(), &img)?.1);
        }
        let phi = FreeEndomorphism::new(self.rank(), images)?;
        match &self.inverse_images {
            Some(inv) => phi.with_inverse(inv.clone()),
            None => Ok(phi),
        }
    }

    /// `M(f)[i][j]`: occurrences of `e_j` or its reverse in `f(e_i)`.
    pub fn transition_matrix(&self) -> Vec<Vec<u64>> {
        let n = self.graph.edge_count();
        let mut m = vec![vec![0u64; n]; n];
        for (i, p) in self.emap.iter().enumerate() {
            for s in p {
                m[i][s.edge] += 1;
            }
        }
        m
    }

    /// Smallest `k ≥ 1` such that `f^k` fixes every vertex in its image,
    /// together with `f^k`.
    pub fn stabilize_vertices(&self) -> Result<(GraphMap, u32)> {
        let n = self.graph.vertices.len();
        let mut vk = self.vmap.clone();
        let mut k = 1u32;
        // Eventual period divides lcm of cycle lengths, preperiod ≤ n.
        loop {
            if (0..n).all(|v| vk[vk[v]] == vk[v]) {
                break;
            }
            vk = vk.iter().map(|&v| self.vmap[v]).collect();
            k += 1;
            assert!(k as usize <= 4 * n * n + 4, "vertex dynamics failed to stabilize");
        }
        Ok((self.power(k)?, k))
    }

    /// Serializes back to the `.gm` format.
    pub fn to_gm(&self) -> String {
        let g = &self.graph;
        let step = |s: &EdgeStep| {
            if s.reversed {
                format!("~{}", g.edges[s.edge].id)
            } else {
                g.edges[s.edge].id.clone()
            }
        };
        let mut out = format!("graph {}\nvertex {}\n", g.name, g.vertices.join(" "));
        for e in &g.edges {
            out += &format!(
                "edge {} {} {}\n",
                e.id, g.vertices[e.origin], g.vertices[e.terminal]
            );
        }
        out += &format!("basepoint {}\n", g.vertices[g.basepoint]);
        let tree: Vec<&str> = g
            .edges
            .iter()
            .zip(&g.tree)
            .filter(|(_, t)| **t)
            .map(|(e, _)| e.id.as_str())
            .collect();
        out += format!("tree {}\n", tree.join(" ")).trim_end();
        out += "\n";
        for (i, ge) in self.marking.generators.iter().enumerate() {
            out += &format!(
                "gen {} -> {}\n",
                self.names().name(i + 1),
                step(&EdgeStep {
                    edge: ge.edge,
                    reversed: ge.reversed
                })
            );
        }
        for (v, &w) in self.vmap.iter().enumerate() {
            out += &format!("vmap {} -> {}\n", g.vertices[v], g.vertices[w]);
        }
        for (e, p) in self.emap.iter().enumerate() {
            let toks: Vec<String> = p.iter().map(step).collect();
            out += &format!("emap {} -> {}\n", g.edges[e].id, toks.join(" "));
        }
        if let Some(inv) = &self.inverse_images {
            for (i, w) in inv.iter().enumerate() {
                out += &format!(
                    "invimages {} -> {}\n",
                    self.names().name(i + 1),
                    self.names().format(w)
                );
            }
        }
        out
    }
}

fn validate_morphism(graph: &Graph, vmap: &[usize], emap: &[Vec<EdgeStep>]) -> Result<()> {
    for (i, p) in emap.iter().enumerate() {
        let e = &graph.edges[i];
        let id = &e.id;
        if p.is_empty() {
            return Err(Error::EndpointMismatch {
                edge: id.clone(),
                detail: "is empty".into(),
            });
        }
        if !graph.is_path(p) {
            return Err(Error::EndpointMismatch {
                edge: id.clone(),
                detail: "is not a connected edge-path".into(),
            });
        }
        let start = p[0].start(graph);
        let end = p[p.len() - 1].end(graph);
        if start != vmap[e.origin] || end != vmap[e.terminal] {
            return Err(Error::EndpointMismatch {
                edge: id.clone(),
                detail: format!(
                    "runs {} → {} but the vertex map sends the endpoints to {} → {}",
                    graph.vertices[start],
                    graph.vertices[end],
                    graph.vertices[vmap[e.origin]],
                    graph.vertices[vmap[e.terminal]]
                ),
            });
        }
    }
    Ok(())
}

fn build_marking(
    graph: &Graph,
    declared: Option<(Vec<String>, Vec<GeneratorEdge>)>,
) -> Result<Marking> {
    let nv = graph.vertices.len();
    let comps = graph.components();
    let tree_comps = graph.components_of(|e| graph.tree[e]);
    let distinct = |c: &[usize]| {
        let mut v = c.to_vec();
        v.sort_unstable();
        v.dedup();
        v.len()
    };
    let tree_edges = graph.tree.iter().filter(|t| **t).count();
    if distinct(&tree_comps) != distinct(&comps) || tree_edges + distinct(&comps) != nv {
        return Err(Error::parse(
            0,
            "tree edges do not form a spanning tree of each component",
        ));
    }
    let base = graph.basepoint;
    let in_component: Vec<bool> = (0..nv).map(|v| comps[v] == comps[base]).collect();
    let edge_in_component: Vec<bool> = graph
        .edges
        .iter()
        .map(|e| in_component[e.origin])
        .collect();

    // Tree paths from the basepoint, by breadth-first search over tree edges.
    let mut tree_paths: Vec<Option<Vec<EdgeStep>>> = vec![None; nv];
    tree_paths[base] = Some(Vec::new());
    let mut queue = VecDeque::from([base]);
    while let Some(v) = queue.pop_front() {
        let pv = tree_paths[v].clone().unwrap();
        for (i, e) in graph.edges.iter().enumerate() {
            if !graph.tree[i] {
                continue;
            }
            for (step, next) in [
                (EdgeStep::forward(i), e.terminal),
                (EdgeStep::forward(i).reverse(), e.origin),
            ] {
                if step.start(graph) == v && tree_paths[next].is_none() {
                    let mut p = pv.clone();
                    p.push(step);
                    tree_paths[next] = Some(p);
                    queue.push_back(next);
                }
            }
        }
    }
    let tree_paths: Vec<Vec<EdgeStep>> = tree_paths.into_iter().map(|p| p.unwrap_or_default()).collect();

    let non_tree: Vec<usize> = (0..graph.edge_count())
        .filter(|&e| edge_in_component[e] && !graph.tree[e])
        .collect();
    let (names, generators) = match declared {
        None => (
            NameTable::standard(non_tree.len()),
            non_tree
                .iter()
                .map(|&edge| GeneratorEdge {
                    edge,
                    reversed: false,
                })
                .collect::<Vec<_>>(),
        ),
        Some((names, gens)) => {
            let mut covered: Vec<usize> = gens.iter().map(|g| g.edge).collect();
            covered.sort_unstable();
            if covered != non_tree {
                return Err(Error::parse(
                    0,
                    "gen lines must name every non-tree edge of the basepoint component exactly once",
                ));
            }
            (
                NameTable::from_names(names).map_err(|e| Error::parse(0, e.to_string()))?,
                gens,
            )
        }
    };

    let mut labels: Vec<Option<(Word, Word)>> = vec![None; graph.edge_count()];
    for e in 0..graph.edge_count() {
        if edge_in_component[e] {
            labels[e] = Some((Word::identity(), Word::identity()));
        }
    }
    for (i, ge) in generators.iter().enumerate() {
        let x = Word::generator(i + 1);
        labels[ge.edge] = Some(if ge.reversed {
            (x, Word::identity())
        } else {
            (Word::identity(), x)
        });
    }
    Ok(Marking {
        in_component,
        edge_in_component,
        tree_paths,
        generators,
        names,
        labels,
    })
}

/// Parses the `.gm` format.
pub fn parse_graph_map(text: &str) -> Result<GraphMap> {
    let mut name = String::from("unnamed");
    let mut vertices: Vec<String> = Vec::new();
    let mut vindex: HashMap<String, usize> = HashMap::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut eindex: HashMap<String, usize> = HashMap::new();
    let mut basepoint: Option<(usize, String)> = None;
    let mut tree_lines: Vec<(usize, Vec<String>)> = Vec::new();
    let mut vmap_lines: Vec<(usize, String, String)> = Vec::new();
    let mut emap_lines: Vec<(usize, String, Vec<String>)> = Vec::new();
    let mut inv_lines: Vec<(usize, String, String)> = Vec::new();
    let mut gen_lines: Vec<(usize, String, String)> = Vec::new();
    let mut strata_lines: Vec<(usize, Vec<String>)> = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let arrow = |toks: &[&str]| -> Result<(String, Vec<String>)> {
            if toks.len() < 3 || toks[2] != "->" {
                return Err(Error::parse(ln, format!("expected `{} <id> -> ...`", toks[0])));
            }
            Ok((
                toks[1].to_string(),
                toks[3..].iter().map(|s| s.to_string()).collect(),
            ))
        };
        match toks[0] {
            "graph" => {
                if toks.len() != 2 {
                    return Err(Error::parse(ln, "expected `graph <name>`"));
                }
                name = toks[1].to_string();
            }
            "vertex" => {
                if toks.len() < 2 {
                    return Err(Error::parse(ln, "expected `vertex <vid> ...`"));
                }
                for v in &toks[1..] {
                    if vindex.insert(v.to_string(), vertices.len()).is_some() {
                        return Err(Error::parse(ln, format!("duplicate vertex `{v}`")));
                    }
                    vertices.push(v.to_string());
                }
            }
            "edge" => {
                if toks.len() != 4 {
                    return Err(Error::parse(ln, "expected `edge <eid> <origin> <terminal>`"));
                }
                let id = toks[1];
                if id.starts_with('~') {
                    return Err(Error::parse(ln, "edge ids may not start with `~`"));
                }
                let o = *vindex
                    .get(toks[2])
                    .ok_or_else(|| Error::parse(ln, format!("unknown vertex `{}`", toks[2])))?;
                let t = *vindex
                    .get(toks[3])
                    .ok_or_else(|| Error::parse(ln, format!("unknown vertex `{}`", toks[3])))?;
                if eindex.insert(id.to_string(), edges.len()).is_some() {
                    return Err(Error::parse(ln, format!("duplicate edge `{id}`")));
                }
                edges.push(Edge {
                    id: id.to_string(),
                    origin: o,
                    terminal: t,
                });
            }
            "basepoint" => {
                if toks.len() != 2 {
                    return Err(Error::parse(ln, "expected `basepoint <vid>`"));
                }
                let v = *vindex
                    .get(toks[1])
                    .ok_or_else(|| Error::parse(ln, format!("unknown vertex `{}`", toks[1])))?;
                basepoint = Some((v, toks[1].to_string()));
            }
            "tree" => tree_lines.push((ln, toks[1..].iter().map(|s| s.to_string()).collect())),
            "vmap" => {
                let (v, rest) = arrow(&toks)?;
                if rest.len() != 1 {
                    return Err(Error::parse(ln, "expected `vmap <vid> -> <vid>`"));
                }
                vmap_lines.push((ln, v, rest[0].clone()));
            }
            "emap" => {
                let (e, rest) = arrow(&toks)?;
                emap_lines.push((ln, e, rest));
            }
            "invimages" => {
                let (g, rest) = arrow(&toks)?;
                inv_lines.push((ln, g, rest.join(" ")));
            }
            "gen" => {
                let (g, rest) = arrow(&toks)?;
                if rest.len() != 1 {
                    return Err(Error::parse(ln, "expected `gen <name> -> <eid>|~<eid>`"));
                }
                gen_lines.push((ln, g, rest[0].clone()));
            }
            "stratum" => strata_lines.push((ln, toks[1..].iter().map(|s| s.to_string()).collect())),
            other => return Err(Error::parse(ln, format!("unknown directive `{other}`"))),
        }
    }

    if vertices.is_empty() {
        return Err(Error::parse(0, "no vertices"));
    }
    let basepoint = basepoint.ok_or_else(|| Error::parse(0, "missing `basepoint` line"))?.0;
    let edge_of = |ln: usize, id: &str| -> Result<usize> {
        eindex
            .get(id)
            .copied()
            .ok_or_else(|| Error::parse(ln, format!("unknown edge `{id}`")))
    };
    let step_of = |ln: usize, tok: &str| -> Result<EdgeStep> {
        match tok.strip_prefix('~') {
            Some(id) => Ok(EdgeStep::forward(edge_of(ln, id)?).reverse()),
            None => Ok(EdgeStep::forward(edge_of(ln, tok)?)),
        }
    };

    let mut tree = vec![false; edges.len()];
    for (ln, ids) in &tree_lines {
        for id in ids {
            let e = edge_of(*ln, id)?;
            if tree[e] {
                return Err(Error::parse(*ln, format!("tree edge `{id}` listed twice")));
            }
            tree[e] = true;
        }
    }

    let mut vmap: Vec<Option<usize>> = vec![None; vertices.len()];
    for (ln, a, b) in &vmap_lines {
        let va = *vindex
            .get(a)
            .ok_or_else(|| Error::parse(*ln, format!("unknown vertex `{a}`")))?;
        let vb = *vindex
            .get(b)
            .ok_or_else(|| Error::parse(*ln, format!("unknown vertex `{b}`")))?;
        if vmap[va].replace(vb).is_some() {
            return Err(Error::parse(*ln, format!("vertex `{a}` mapped twice")));
        }
    }
    let vmap: Vec<usize> = vmap
        .into_iter()
        .enumerate()
        .map(|(v, m)| m.ok_or_else(|| Error::DanglingId(format!("vmap for vertex {}", vertices[v]))))
        .collect::<Result<_>>()?;

    let mut emap: Vec<Option<Vec<EdgeStep>>> = vec![None; edges.len()];
    for (ln, e, toks) in &emap_lines {
        let ei = edge_of(*ln, e)?;
        let path = toks
            .iter()
            .map(|t| step_of(*ln, t))
            .collect::<Result<Vec<_>>>()?;
        if emap[ei].replace(path).is_some() {
            return Err(Error::parse(*ln, format!("edge `{e}` mapped twice")));
        }
    }
    let emap: Vec<Vec<EdgeStep>> = emap
        .into_iter()
        .enumerate()
        .map(|(e, m)| m.ok_or_else(|| Error::DanglingId(format!("emap for edge {}", edges[e].id))))
        .collect::<Result<_>>()?;

    let generators = if gen_lines.is_empty() {
        None
    } else {
        let mut names = Vec::new();
        let mut gens = Vec::new();
        for (ln, g, tok) in &gen_lines {
            let s = step_of(*ln, tok)?;
            names.push(g.clone());
            gens.push(GeneratorEdge {
                edge: s.edge,
                reversed: s.reversed,
            });
        }
        Some((names, gens))
    };

    let graph = Graph {
        name,
        vertices,
        edges,
        basepoint,
        tree,
    };
    let mut gm = GraphMap::new(graph, vmap, emap, generators)?;

    if !inv_lines.is_empty() {
        let rank = gm.rank();
        let mut inv: Vec<Option<Word>> = vec![None; rank];
        for (ln, g, w) in &inv_lines {
            let i = gm
                .names()
                .lookup(g)
                .ok_or_else(|| Error::parse(*ln, format!("unknown generator `{g}`")))?;
            let word = gm
                .names()
                .parse_word(w)
                .map_err(|e| Error::parse(*ln, e.to_string()))?;
            if inv[i - 1].replace(word).is_some() {
                return Err(Error::parse(*ln, format!("generator `{g}` has two inverse images")));
            }
        }
        let inv: Vec<Word> = inv
            .into_iter()
            .enumerate()
            .map(|(i, w)| {
                w.ok_or_else(|| {
                    Error::parse(0, format!("missing inverse image for `{}`", gm.names().name(i + 1)))
                })
            })
            .collect::<Result<_>>()?;
        gm = gm.with_inverse_images(inv)?;
    }

    if !strata_lines.is_empty() {
        let mut seen = vec![false; gm.graph.edge_count()];
        let mut strata = Vec::new();
        for (ln, ids) in &strata_lines {
            let mut s = Vec::new();
            for id in ids {
                let e = edge_of(*ln, id)?;
                if std::mem::replace(&mut seen[e], true) {
                    return Err(Error::parse(*ln, format!("edge `{id}` in two strata")));
                }
                s.push(e);
            }
            strata.push(s);
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::parse(0, "declared strata must cover every edge"));
        }
        gm.declared_strata = Some(strata);
    }
    Ok(gm)
}
