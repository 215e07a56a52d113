//! Maximal filtrations from the transition matrix.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::graph::GraphMap;

pub const PF_TOLERANCE: f64 = 1e-12;
pub const PF_MAX_ITERATIONS: usize = 100_000;
pub const EG_THRESHOLD: f64 = 1e-9;
const NEAR_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StratumInfo {
    /// 1-based position in the filtration.
    pub index: usize,
    pub edges: Vec<usize>,
    pub matrix: Vec<Vec<u64>>,
    pub zero: bool,
    pub lambda: Option<f64>,
    pub eigenvector: Option<Vec<f64>>,
    pub is_eg: bool,
    pub near_threshold: bool,
}

impl StratumInfo {
    pub fn n(&self) -> usize {
        self.edges.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiltrationInfo {
    pub strata: Vec<StratumInfo>,
    pub edge_order: Vec<usize>,
    pub reduced: bool,
    /// Strata indices `s` where more than one new component appears.
    pub unreduced_at: Vec<usize>,
    /// Set when a declared filtration had to be split into finer strata.
    pub refined_declared: Option<bool>,
}

impl FiltrationInfo {
    pub fn eg_set(&self) -> Vec<usize> {
        self.strata
            .iter()
            .filter(|s| s.is_eg)
            .map(|s| s.index)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerronFrobenius {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Perron–Frobenius data of an irreducible nonnegative matrix.
///
/// Iterates with `A + I`, which is primitive and has the same eigenvector;
/// stops when the Collatz–Wielandt bounds agree to the tolerance.
pub fn perron_frobenius(a: &[Vec<u64>]) -> PerronFrobenius {
    let n = a.len();
    let mut x = vec![1.0 / n as f64; n];
    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    for it in 1..=PF_MAX_ITERATIONS {
        let y: Vec<f64> = (0..n)
            .map(|i| x[i] + (0..n).map(|j| a[i][j] as f64 * x[j]).sum::<f64>())
            .collect();
        lo = f64::INFINITY;
        hi = 0.0;
        for i in 0..n {
            let r = y[i] / x[i];
            lo = f64::min(lo, r);
            hi = f64::max(hi, r);
        }
        let s: f64 = y.iter().sum();
        x = y.into_iter().map(|v| v / s).collect();
        if hi - lo <= PF_TOLERANCE * hi.max(1.0) {
            return PerronFrobenius {
                value: 0.5 * (lo + hi) - 1.0,
                vector: x,
                iterations: it,
                converged: true,
            };
        }
    }
    PerronFrobenius {
        value: 0.5 * (lo + hi) - 1.0,
        vector: x,
        iterations: PF_MAX_ITERATIONS,
        converged: false,
    }
}

/// SCC refinement, topological ordering with lower strata first, PF data
/// and the reduced test.
pub fn strata_decomposition(gm: &GraphMap) -> FiltrationInfo {
    let m = gm.transition_matrix();
    let n = m.len();
    let mut dg = DiGraph::<usize, ()>::new();
    let nodes: Vec<_> = (0..n).map(|i| dg.add_node(i)).collect();
    for i in 0..n {
        for j in 0..n {
            if m[i][j] > 0 {
                dg.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut sccs: Vec<Vec<usize>> = tarjan_scc(&dg)
        .into_iter()
        .map(|c| {
            let mut v: Vec<usize> = c.into_iter().map(|ni| dg[ni]).collect();
            v.sort_unstable();
            v
        })
        .collect();
    sccs.sort();
    let mut comp_of = vec![0usize; n];
    for (c, s) in sccs.iter().enumerate() {
        for &e in s {
            comp_of[e] = c;
        }
    }

    // Declared strata give a priority; ties broken by smallest edge index.
    let declared_rank: Option<Vec<usize>> = gm.declared_strata.as_ref().map(|ds| {
        let mut r = vec![0; n];
        for (k, s) in ds.iter().enumerate() {
            for &e in s {
                r[e] = k;
            }
        }
        r
    });
    let priority = |c: usize| -> (usize, usize) {
        let first = sccs[c][0];
        let d = declared_rank
            .as_ref()
            .map(|r| sccs[c].iter().map(|&e| r[e]).max().unwrap())
            .unwrap_or(0);
        (d, first)
    };

    // Component c depends on d when some edge of c crosses an edge of d; d
    // must come first.
    let nc = sccs.len();
    let mut deps: Vec<Vec<usize>> = vec![Vec::new(); nc];
    let mut pending = vec![0usize; nc];
    for i in 0..n {
        for j in 0..n {
            let (ci, cj) = (comp_of[i], comp_of[j]);
            if m[i][j] > 0 && ci != cj && !deps[cj].contains(&ci) {
                deps[cj].push(ci);
                pending[ci] += 1;
            }
        }
    }
    let mut heap: BinaryHeap<Reverse<((usize, usize), usize)>> = (0..nc)
        .filter(|&c| pending[c] == 0)
        .map(|c| Reverse((priority(c), c)))
        .collect();
    let mut order = Vec::with_capacity(nc);
    while let Some(Reverse((_, c))) = heap.pop() {
        order.push(c);
        for &d in &deps[c] {
            pending[d] -= 1;
            if pending[d] == 0 {
                heap.push(Reverse((priority(d), d)));
            }
        }
    }

    let strata: Vec<StratumInfo> = order
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let edges = sccs[c].clone();
            let block: Vec<Vec<u64>> = edges
                .iter()
                .map(|&i| edges.iter().map(|&j| m[i][j]).collect())
                .collect();
            let zero = edges.len() == 1 && block[0][0] == 0;
            let (lambda, eigenvector, is_eg, near) = if zero {
                (None, None, false, false)
            } else {
                let pf = perron_frobenius(&block);
                let is_eg = pf.value > 1.0 + EG_THRESHOLD;
                let near = (pf.value - 1.0).abs() < NEAR_THRESHOLD;
                (Some(pf.value), Some(pf.vector), is_eg, near)
            };
            StratumInfo {
                index: k + 1,
                edges,
                matrix: block,
                zero,
                lambda,
                eigenvector,
                is_eg,
                near_threshold: near,
            }
        })
        .collect();

    // Reduced: exactly one component of Γ_s is not a component of Γ_{s-1}.
    let graph = &gm.graph;
    let mut level = vec![usize::MAX; n];
    for s in &strata {
        for &e in &s.edges {
            level[e] = s.index;
        }
    }
    let mut unreduced_at = Vec::new();
    for s in &strata {
        let comps = graph.components_of(|e| level[e] <= s.index);
        let mut new_comps: Vec<usize> = s
            .edges
            .iter()
            .map(|&e| comps[graph.edges[e].origin])
            .collect();
        new_comps.sort_unstable();
        new_comps.dedup();
        if new_comps.len() != 1 {
            unreduced_at.push(s.index);
        }
    }

    let refined_declared = gm.declared_strata.as_ref().map(|ds| ds.len() != strata.len());
    FiltrationInfo {
        edge_order: strata.iter().flat_map(|s| s.edges.clone()).collect(),
        reduced: unreduced_at.is_empty(),
        unreduced_at,
        strata,
        refined_declared,
    }
}
