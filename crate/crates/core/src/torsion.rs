//! L²-torsion of the mapping torus as a sum of per-stratum log-determinants.

use std::sync::Arc;

use serde::Serialize;

use crate::chain::{jacobian_from, ChainMap};
use crate::det::{log_det_fk, DetEstimate, DetOptions};
use crate::error::{Error, Result};
use crate::graph::GraphMap;
use crate::ring::{GroupContext, GroupElem, Rational, RingMatrix};
use crate::strata::strata_decomposition;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TorsionBudget {
    pub det: DetOptions,
    /// Replace `f` by the smallest iterate fixing its vertex images.
    pub stabilize: bool,
}

impl TorsionBudget {
    pub fn new(terms: usize) -> Self {
        TorsionBudget {
            det: DetOptions::exact(terms),
            stabilize: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StratumTorsion {
    pub stratum: usize,
    pub edges: Vec<String>,
    pub lambda: f64,
    pub estimate: DetEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TorsionReport {
    /// Power `k` of the iterate actually analysed; estimates are divided by it.
    pub k: u32,
    pub eg_set: Vec<usize>,
    pub strata: Vec<StratumTorsion>,
    /// True when the EG set is empty and the total is exactly zero.
    pub exact_zero: bool,
    pub total: f64,
    pub total_extrapolated: Option<f64>,
    pub budget: TorsionBudget,
    pub warnings: Vec<String>,
}

/// `L = tJ` on the given edges, over `𝔽 ⋊_Φ ⟨t⟩` with `Φ = Φ_f`.
pub fn operator_l(gm: &GraphMap, edges: &[usize]) -> Result<RingMatrix<Rational>> {
    let phi = gm.induced_automorphism()?;
    if !phi.has_inverse() {
        return Err(Error::MissingInverseImages);
    }
    let a = ChainMap::new(gm)?;
    l_from(&a, gm.rank(), edges, Arc::new(GroupContext::free_by_cyclic(phi)))
}

fn l_from(a: &ChainMap, rank: usize, edges: &[usize], ctx: Arc<GroupContext>) -> Result<RingMatrix<Rational>> {
    let j = jacobian_from(a, rank, edges)?.with_context(ctx.clone())?;
    let t = GroupElem::t(1);
    let rows = (0..j.rows())
        .map(|r| (0..j.cols()).map(|c| j.get(r, c).left_translate(&ctx, &t)).collect())
        .collect::<Result<Vec<Vec<_>>>>()?;
    RingMatrix::from_rows(ctx, rows)
}

pub fn torsion_estimate(gm: &GraphMap, budget: &TorsionBudget) -> Result<TorsionReport> {
    let mut warnings = Vec::new();
    let (g, k) = if budget.stabilize {
        gm.stabilize_vertices()?
    } else {
        (gm.clone(), 1)
    };
    if k > 1 {
        warnings.push(format!("analysed f^{k}; estimates divided by {k}"));
    }
    let filt = strata_decomposition(&g);
    let eg_set = filt.eg_set();
    if eg_set.is_empty() {
        return Ok(TorsionReport {
            k,
            eg_set,
            strata: Vec::new(),
            exact_zero: true,
            total: 0.0,
            total_extrapolated: Some(0.0),
            budget: budget.clone(),
            warnings,
        });
    }
    let phi = g.induced_automorphism()?;
    if !phi.has_inverse() {
        return Err(Error::MissingInverseImages);
    }
    let ctx = Arc::new(GroupContext::free_by_cyclic(phi));
    let a = ChainMap::new(&g)?;
    let mut strata = Vec::new();
    let mut total = 0.0;
    let mut extrapolated = Some(0.0);
    for &s in &eg_set {
        let info = &filt.strata[s - 1];
        let l = l_from(&a, g.rank(), &info.edges, ctx.clone())?;
        let n = l.rows();
        let m = RingMatrix::identity(ctx.clone(), n).sub(&l)?;
        let est = log_det_fk(&m, &budget.det)?;
        total += est.estimate;
        extrapolated = match (extrapolated, &est.extrapolation) {
            (Some(x), Some(f)) => Some(x + f.estimate),
            _ => None,
        };
        for w in &est.warnings {
            warnings.push(format!("stratum {s}: {w}"));
        }
        strata.push(StratumTorsion {
            stratum: s,
            edges: info.edges.iter().map(|&e| g.graph.edges[e].id.clone()).collect(),
            lambda: info.lambda.unwrap_or(0.0),
            estimate: est,
        });
    }
    let kf = k as f64;
    Ok(TorsionReport {
        k,
        eg_set,
        strata,
        exact_zero: false,
        total: total / kf,
        total_extrapolated: extrapolated.map(|x| x / kf).filter(|_| budget.det.extrapolate.is_some()),
        budget: budget.clone(),
        warnings,
    })
}
