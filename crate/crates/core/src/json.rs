//! JSON output with doubles printed to 17 significant digits.
//!
//! `serde_json` prints the shortest round-trip representation of an `f64`.
//! Reports here are expected to be diffable byte-for-byte across runs and
//! tools, so every float is rendered as `{:.16e}` instead. Non-finite
//! values become `null`.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

/// Formats a double with 17 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

/// Serializes `value` to pretty-printed JSON with 17-digit floats.
pub fn to_string_pretty<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let value = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&mut out, &value, 0);
    out.push('\n');
    Ok(out)
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_value(out: &mut String, value: &Value, level: usize) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&fmt_f64(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            // Short arrays of scalars stay on one line.
            if items.iter().all(|v| !v.is_array() && !v.is_object()) && items.len() <= 8 {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, item, level);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                indent(out, level + 1);
                write_value(out, item, level + 1);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, level);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            let len = map.len();
            for (i, (key, item)) in map.iter().enumerate() {
                indent(out, level + 1);
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_value(out, item, level + 1);
                if i + 1 < len {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, level);
            out.push('}');
        }
    }
}

/// Reads a float written by [`to_string_pretty`], mapping `null` back to NaN.
pub fn f64_or_nan<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// [`f64_or_nan`] for maps of `(value, index)` pairs.
pub fn map_f64_or_nan<'de, D: Deserializer<'de>>(
    d: D,
) -> Result<BTreeMap<String, (f64, usize)>, D::Error> {
    let raw = BTreeMap::<String, (Option<f64>, usize)>::deserialize(d)?;
    Ok(raw
        .into_iter()
        .map(|(k, (v, i))| (k, (v.unwrap_or(f64::NAN), i)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.712_867_546_832_945, 0.0] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
            let parsed: f64 = serde_json::from_str(&s).unwrap();
            assert_eq!(parsed.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn pretty_output_parses_back() {
        let v = serde_json::json!({"a": [1.5, 2, -0.25], "b": {"c": null, "d": "x\"y"}, "e": []});
        let s = to_string_pretty(&v).unwrap();
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"][0].as_f64(), Some(1.5));
        assert_eq!(back["a"][1].as_u64(), Some(2));
        assert_eq!(back["b"]["d"].as_str(), Some("x\"y"));
        assert!(fmt_f64(f64::NAN) == "null");
    }
}
