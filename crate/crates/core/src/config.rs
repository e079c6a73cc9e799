//! Configuration files: a JSON object, or flat `name = value` lines.
//!
//! Key-value files map onto the same JSON shape: dotted names build nested
//! objects (`model.sigma = 0.3`), comma-separated values become arrays, and
//! scalars become numbers, booleans or strings. `#` starts a comment.

use serde::de::DeserializeOwned;
use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};

/// Largest accepted configuration text.
pub const MAX_CONFIG_BYTES: usize = 1 << 20;
const MAX_DEPTH: usize = 8;

fn scalar(raw: &str) -> Value {
    let s = raw.trim();
    if let Some(q) = s.strip_prefix('"').and_then(|t| t.strip_suffix('"')) {
        return Value::String(q.to_string());
    }
    match s {
        "true" => return Value::Bool(true),
        "false" => return Value::Bool(false),
        "null" | "none" | "" => return Value::Null,
        _ => {}
    }
    if let Ok(i) = s.parse::<i64>() {
        return Value::Number(i.into());
    }
    if let Ok(x) = s.parse::<f64>() {
        if let Some(n) = Number::from_f64(x) {
            return Value::Number(n);
        }
    }
    Value::String(s.to_string())
}

fn value(raw: &str) -> Value {
    let s = raw.trim();
    let inner = s.strip_prefix('[').and_then(|t| t.strip_suffix(']'));
    match inner {
        Some(list) if list.trim().is_empty() => Value::Array(Vec::new()),
        Some(list) => Value::Array(list.split(',').map(scalar).collect()),
        None if s.contains(',') && !s.starts_with('"') => Value::Array(s.split(',').map(scalar).collect()),
        None => scalar(s),
    }
}

/// Parses flat key-value text into a JSON object.
pub fn parse_kv(text: &str) -> Result<Value> {
    let mut root = Map::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let body = match line.find('#') {
            Some(p) => &line[..p],
            None => line,
        };
        let body = body.trim();
        if body.is_empty() {
            continue;
        }
        let (key, val) = body.split_once('=').ok_or_else(|| err("expected 'name = value'".into()))?;
        let key = key.trim();
        let path: Vec<&str> = key.split('.').map(str::trim).collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(err(format!("malformed name '{key}'")));
        }
        if path.len() > MAX_DEPTH {
            return Err(err(format!("name '{key}' is nested too deeply")));
        }
        let mut node = &mut root;
        for part in &path[..path.len() - 1] {
            let slot = node.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
            node = slot
                .as_object_mut()
                .ok_or_else(|| err(format!("'{part}' is both a value and a section")))?;
        }
        let last = path[path.len() - 1];
        if node.contains_key(last) {
            return Err(err(format!("duplicate name '{key}'")));
        }
        node.insert(last.to_string(), value(val));
    }
    Ok(Value::Object(root))
}

/// Parses a configuration text, JSON when it starts with `{`, key-value
/// otherwise.
pub fn parse_value(text: &str) -> Result<Value> {
    if text.len() > MAX_CONFIG_BYTES {
        return Err(Error::Parse {
            line: 0,
            msg: format!("configuration exceeds {MAX_CONFIG_BYTES} bytes"),
        });
    }
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        if !v.is_object() {
            return Err(Error::Parse {
                line: 1,
                msg: "expected a JSON object".into(),
            });
        }
        Ok(v)
    } else {
        parse_kv(text)
    }
}

/// Parses and deserializes a configuration into `T`.
pub fn parse_config<T: DeserializeOwned>(text: &str) -> Result<T> {
    from_value(parse_value(text)?)
}

pub fn from_value<T: DeserializeOwned>(v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::Parse {
        line: 0,
        msg: e.to_string(),
    })
}

/// Reads and parses a configuration file.
pub fn load_config<T: DeserializeOwned>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// Overlays `top` onto `base`, recursing into objects.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, t) => *b = t,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelParams, VgParams};
    use proptest::prelude::*;
    use serde_json::json;

    #[test]
    fn kv_model_file() {
        let text = "# Black-Scholes\nmodel = bs\nsigma = 0.3\nr_f = 0.1 # rate\ndividend = 0.05\n";
        let m: ModelParams = parse_config(text).unwrap();
        assert_eq!(m.family(), "bs");
        assert_eq!(m.rate(), 0.1);
    }

    #[test]
    fn json_and_kv_agree() {
        let kv = "model = vg\nsigma = 0.1213\nnu = 0.1686\ntheta = -0.1436\nr_f = 0.05\n";
        let js = r#"{"model": "vg", "sigma": 0.1213, "nu": 0.1686, "theta": -0.1436, "r_f": 0.05}"#;
        let a: ModelParams = parse_config(kv).unwrap();
        let b: ModelParams = parse_config(js).unwrap();
        assert_eq!(a, b);
        assert!(matches!(a, ModelParams::Vg(VgParams { nu, .. }) if nu == 0.1686));
    }

    #[test]
    fn nesting_and_lists() {
        let v = parse_kv("a.b = 1\na.c = x\ngrids = 129, 161\nempty = []\nq = \"1,2\"\n").unwrap();
        assert_eq!(v, json!({"a": {"b": 1, "c": "x"}, "grids": [129, 161], "empty": [], "q": "1,2"}));
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(parse_kv("a = 1\nnonsense\n").unwrap_err(), Error::Parse { line: 2, msg: "expected 'name = value'".into() });
        assert!(matches!(parse_kv("a = 1\na = 2"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_kv("a = 1\na.b = 2"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_kv(" = 2"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_value("{\"a\": }"), Err(Error::Parse { .. })));
        assert!(matches!(parse_config::<ModelParams>("model = heston"), Err(Error::Parse { .. })));
    }

    #[test]
    fn merge_overlays() {
        let mut a = json!({"x": 1, "m": {"a": 1, "b": 2}});
        merge(&mut a, json!({"m": {"b": 3}, "y": true}));
        assert_eq!(a, json!({"x": 1, "m": {"a": 1, "b": 3}, "y": true}));
    }

    proptest! {
        #[test]
        fn kv_never_panics(text in "\\PC{0,200}") {
            let _ = parse_value(&text);
        }

        #[test]
        fn numbers_round_trip(x in -1e6f64..1e6) {
            let v = parse_kv(&format!("x = {x:?}")).unwrap();
            prop_assert_eq!(v["x"].as_f64().unwrap(), x);
        }
    }
}
