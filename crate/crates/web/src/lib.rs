//! Browser bindings: three operations on a pasted `.gm` map.

use chaintorque::chain::UniversalVertex;
use chaintorque::det::{log_det_fk, DetOptions, TailModel};
use chaintorque::graph::{parse_graph_map, GraphMap};
use chaintorque::nielsen::{build_trho, classify_nielsen};
use chaintorque::ring::{moments, rational_string, RingMatrix};
use chaintorque::strata::strata_decomposition;
use chaintorque::torsion::operator_l;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn load(text: &str) -> Result<GraphMap, String> {
    parse_graph_map(text).map_err(|e| e.to_string())
}

/// Strata, Perron-Frobenius values and the induced automorphism.
pub fn analyze_json(gm_text: &str) -> Result<Value, String> {
    let gm = load(gm_text)?;
    let filt = strata_decomposition(&gm);
    let phi = gm.induced_automorphism().map_err(|e| e.to_string())?;
    let names = gm.names();
    Ok(json!({
        "eg_set": filt.eg_set(),
        "reduced": filt.reduced,
        "strata": filt.strata.iter().map(|s| json!({
            "index": s.index,
            "edges": s.edges.iter().map(|&e| gm.graph.edges[e].id.clone()).collect::<Vec<_>>(),
            "lambda": s.lambda,
            "is_eg": s.is_eg,
        })).collect::<Vec<_>>(),
        "phi": phi.images().iter().map(|w| names.format(w).to_string()).collect::<Vec<_>>(),
    }))
}

/// Classifies the chain from the basepoint lift to `v_word`, and when it is
/// geometric returns the overlap ball of the given radius as DOT.
pub fn nielsen_json(gm_text: &str, v_word: &str, radius: usize) -> Result<Value, String> {
    let gm = load(gm_text)?;
    let w = gm.names().parse_word(v_word).map_err(|e| e.to_string())?;
    let base = gm.graph.basepoint;
    let u = UniversalVertex::new(Default::default(), base);
    let v = UniversalVertex::new(w, base);
    let cert = classify_nielsen(&gm, &[], &u, &v).map_err(|e| e.to_string())?;
    let ball = if cert.is_geometric() {
        let t = build_trho(&cert.rho, radius.min(3)).map_err(|e| e.to_string())?;
        Some(json!({
            "vertices": t.vertices.len(),
            "edges": t.edges.len(),
            "signs": t.signs,
            "dot": t.to_dot(gm.names()),
        }))
    } else {
        None
    };
    Ok(json!({
        "rho": cert.rho.pretty(&gm),
        "norm_sq": rational_string(&cert.rho.l2_norm_sq()),
        "verdict": serde_json::to_value(&cert.verdict).map_err(|e| e.to_string())?,
        "endpoints_fixed": cert.endpoints_fixed,
        "trho": ball,
    }))
}

/// Exact moments of `L = tJ` and partial sums of `log det(I - L)`.
pub fn det_json(gm_text: &str, terms: usize) -> Result<Value, String> {
    let gm = load(gm_text)?;
    let edges: Vec<usize> = (0..gm.graph.edge_count()).collect();
    let l = operator_l(&gm, &edges).map_err(|e| e.to_string())?;
    let ms = moments(&l, 6).map_err(|e| e.to_string())?;
    let m = RingMatrix::identity(l.context().clone(), l.rows())
        .sub(&l)
        .map_err(|e| e.to_string())?;
    let opts = DetOptions {
        terms: terms.clamp(1, 40),
        float: true,
        extrapolate: Some(TailModel::HalfPower),
        support_cap: Some(200_000),
    };
    let d = log_det_fk(&m, &opts).map_err(|e| e.to_string())?;
    Ok(json!({
        "moments": ms.moments.iter().map(rational_string).collect::<Vec<_>>(),
        "partial_sums": d.partial_sums,
        "estimate": d.estimate,
        "extrapolated": d.extrapolation.as_ref().map(|f| f.estimate),
        "warnings": d.warnings,
    }))
}

fn respond(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn analyze(gm_text: &str) -> Result<String, JsValue> {
    respond(analyze_json(gm_text))
}

#[wasm_bindgen]
pub fn nielsen(gm_text: &str, v_word: &str, radius: usize) -> Result<String, JsValue> {
    respond(nielsen_json(gm_text, v_word, radius))
}

#[wasm_bindgen]
pub fn log_det(gm_text: &str, terms: usize) -> Result<String, JsValue> {
    respond(det_json(gm_text, terms))
}
