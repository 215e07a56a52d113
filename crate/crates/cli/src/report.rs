//! JSON output: every number is tagged `exact` or `approx`.

use serde::Serialize;
use serde_json::{json, Map, Value};

pub const SCHEMA: u32 = 1;

/// String fields that hold exact rationals.
const EXACT_STRINGS: &[&str] = &["k_squared", "lambda_min_sq", "moments", "norms_sq", "coeff", "norm_sq"];

pub fn exact(s: impl Into<String>) -> Value {
    json!({ "exact": s.into() })
}

pub fn approx(x: f64) -> Value {
    if x.is_finite() {
        json!({ "approx": x })
    } else {
        json!({ "approx": x.to_string() })
    }
}

fn tag_value(v: Value, exact_strings: bool) -> Value {
    match v {
        Value::Number(n) => match n.as_i64().map(|i| i.to_string()).or_else(|| n.as_u64().map(|u| u.to_string())) {
            Some(s) => exact(s),
            None => approx(n.as_f64().unwrap_or(f64::NAN)),
        },
        Value::String(s) if exact_strings => exact(s),
        Value::Array(a) => Value::Array(a.into_iter().map(|x| tag_value(x, exact_strings)).collect()),
        Value::Object(o) => Value::Object(tag_object(o)),
        other => other,
    }
}

fn tag_object(o: Map<String, Value>) -> Map<String, Value> {
    o.into_iter()
        .map(|(k, v)| {
            if is_tag(&v) {
                return (k, v);
            }
            let strings = EXACT_STRINGS.contains(&k.as_str());
            (k, tag_value(v, strings))
        })
        .collect()
}

/// Already-tagged values pass through untouched.
fn is_tag(v: &Value) -> bool {
    matches!(v, Value::Object(o) if o.len() == 1 && (o.contains_key("exact") || o.contains_key("approx")))
}

pub fn tag<T: Serialize>(x: &T) -> Value {
    tag_value(serde_json::to_value(x).expect("report serializes"), false)
}

/// Top-level report with the schema version first.
pub fn document(command: &str, body: Value) -> String {
    let mut out = Map::new();
    out.insert("schema".into(), json!(SCHEMA));
    out.insert("command".into(), json!(command));
    match tag_value(body, false) {
        Value::Object(o) => out.extend(o),
        other => {
            out.insert("result".into(), other);
        }
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(out)).expect("json");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_are_tagged() {
        let v = tag_value(json!({"a": 3, "b": 0.5, "moments": ["1/2"], "c": {"exact": "7"}, "d": "x"}), false);
        assert_eq!(
            v,
            json!({"a": {"exact": "3"}, "b": {"approx": 0.5}, "moments": [{"exact": "1/2"}], "c": {"exact": "7"}, "d": "x"})
        );
    }

    #[test]
    fn schema_leads() {
        let s = document("x", json!({"k": 1}));
        assert!(s.starts_with("{\n  \"schema\": 1,"));
    }
}
