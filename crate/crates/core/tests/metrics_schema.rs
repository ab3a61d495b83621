//! Emitted metrics documents must validate against the shipped schema file.

use fuseg3d::eval::{AbsentClasses, DistanceBins, Evaluator, Scope};
use proptest::prelude::*;
use serde_json::{json, Value};

fn schema() -> Value {
    let text = include_str!("../schemas/metrics.schema.json");
    serde_json::from_str(text).expect("schema parses")
}

fn type_ok(kind: &str, v: &Value) -> bool {
    match kind {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.is_u64() || v.is_i64(),
        "null" => v.is_null(),
        "boolean" => v.is_boolean(),
        other => panic!("schema uses unsupported type {other}"),
    }
}

/// Checks the keywords the schema uses; any other keyword is a test bug.
fn validate(schema: &Value, v: &Value, path: &str, errors: &mut Vec<String>) {
    let s = schema.as_object().expect("schema node is an object");
    for key in s.keys() {
        let known = ["$schema", "title", "description", "type", "enum", "properties", "required", "additionalProperties", "items", "minimum", "maximum"];
        assert!(known.contains(&key.as_str()), "unsupported keyword {key}");
    }
    if let Some(t) = s.get("type") {
        let ok = match t {
            Value::String(k) => type_ok(k, v),
            Value::Array(ks) => ks.iter().any(|k| type_ok(k.as_str().unwrap(), v)),
            _ => panic!("bad type keyword"),
        };
        if !ok {
            errors.push(format!("{path}: expected {t}, got {v}"));
            return;
        }
    }
    if let Some(Value::Array(options)) = s.get("enum") {
        if !options.contains(v) {
            errors.push(format!("{path}: {v} not in {options:?}"));
        }
    }
    if let Some(x) = v.as_f64() {
        if s.get("minimum").and_then(Value::as_f64).is_some_and(|m| x < m) {
            errors.push(format!("{path}: {x} below minimum"));
        }
        if s.get("maximum").and_then(Value::as_f64).is_some_and(|m| x > m) {
            errors.push(format!("{path}: {x} above maximum"));
        }
    }
    if let Some(obj) = v.as_object() {
        let props = s.get("properties").and_then(Value::as_object);
        for r in s.get("required").and_then(Value::as_array).into_iter().flatten() {
            if !obj.contains_key(r.as_str().unwrap()) {
                errors.push(format!("{path}: missing {r}"));
            }
        }
        for (k, child) in obj {
            match props.and_then(|p| p.get(k)) {
                Some(sub) => validate(sub, child, &format!("{path}/{k}"), errors),
                None if s.get("additionalProperties") == Some(&Value::Bool(false)) => {
                    errors.push(format!("{path}: unexpected property {k}"))
                }
                None => {}
            }
        }
    }
    if let (Some(items), Some(arr)) = (s.get("items"), v.as_array()) {
        for (i, child) in arr.iter().enumerate() {
            validate(items, child, &format!("{path}/{i}"), errors);
        }
    }
}

fn errors_of(doc: &Value) -> Vec<String> {
    let mut errors = Vec::new();
    validate(&schema(), doc, "", &mut errors);
    errors
}

fn metrics_doc(pred: &[usize], labels: &[usize], fov: &[bool], scope: Scope) -> Value {
    let positions: Vec<[f64; 3]> = (0..labels.len()).map(|i| [i as f64 * 1.7, 0.0, 0.0]).collect();
    let mut ev = Evaluator::new(8, DistanceBins::default(), AbsentClasses::Exclude).unwrap();
    ev.add(pred, labels, fov, &positions).unwrap();
    serde_json::to_value(ev.finish(scope).unwrap()).unwrap()
}

proptest! {
    #[test]
    fn emitted_metrics_validate(
        rows in prop::collection::vec((1usize..8, 1usize..8, any::<bool>()), 1..60),
        inside in any::<bool>(),
    ) {
        let pred: Vec<usize> = rows.iter().map(|r| r.0).collect();
        let labels: Vec<usize> = rows.iter().map(|r| r.1).collect();
        let fov: Vec<bool> = rows.iter().map(|r| r.2).collect();
        let scope = if inside && fov.iter().any(|&b| b) { Scope::InsideFov } else { Scope::All };
        let doc = metrics_doc(&pred, &labels, &fov, scope);
        prop_assert!(errors_of(&doc).is_empty(), "{:?}", errors_of(&doc));
    }
}

#[test]
fn no_camera_points_give_null_fov_fields() {
    let doc = metrics_doc(&[1, 2], &[1, 2], &[false, false], Scope::All);
    assert!(doc["miou_fov"].is_null() && doc["gap"].is_null());
    assert!(errors_of(&doc).is_empty());
}

#[test]
fn schema_rejects_malformed_documents() {
    let good = metrics_doc(&[1, 2, 3], &[1, 2, 2], &[true, false, true], Scope::All);
    let mut missing = good.clone();
    missing.as_object_mut().unwrap().remove("fwiou");
    let mut extra = good.clone();
    extra["counts"]["bonus"] = json!(1);
    let mut out_of_range = good.clone();
    out_of_range["miou"] = json!(1.5);
    let mut bad_scope = good.clone();
    bad_scope["scope"] = json!("everything");
    let mut fractional = good.clone();
    fractional["counts"]["total"] = json!(2.5);
    for doc in [missing, extra, out_of_range, bad_scope, fractional] {
        assert!(!errors_of(&doc).is_empty(), "accepted {doc}");
    }
}
