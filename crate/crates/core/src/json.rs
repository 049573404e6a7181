//! Deterministic JSON: keys in declaration order, every float written with
//! 17 significant digits, non-finite floats as `null`.

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Serializes `value` as indented JSON with fixed float formatting.
pub fn to_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Numeric(format!("serialization failed: {e}")))?;
    Ok(render(&v))
}

/// Renders an already built value.
pub fn render(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

/// `{:.16e}` for finite floats, `null` otherwise.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".into()
    }
}

/// Builds an object from `(key, value)` pairs, keeping their order.
pub fn object<I, K>(pairs: I) -> Value
where
    I: IntoIterator<Item = (K, Value)>,
    K: Into<String>,
{
    Value::Object(pairs.into_iter().map(|(k, v)| (k.into(), v)).collect::<Map<String, Value>>())
}

fn write_value(out: &mut String, value: &Value, depth: usize) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(out, depth + 1);
                write_value(out, item, depth + 1);
            }
            newline(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            for (i, (k, v)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(out, depth + 1);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(out, v, depth + 1);
            }
            newline(out, depth);
            out.push('}');
        }
    }
}

fn newline(out: &mut String, depth: usize) {
    out.push('\n');
    for _ in 0..depth {
        out.push_str("  ");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        zeta: f64,
        alpha: u32,
        nan: f64,
        name: &'static str,
    }

    #[test]
    fn order_and_format() {
        let s = to_string(&Sample { zeta: 0.1, alpha: 3, nan: f64::NAN, name: "a\"b" }).unwrap();
        assert_eq!(
            s,
            "{\n  \"zeta\": 1.0000000000000001e-1,\n  \"alpha\": 3,\n  \"nan\": null,\n  \"name\": \"a\\\"b\"\n}\n"
        );
    }

    #[test]
    fn floats_round_trip() {
        for x in [std::f64::consts::PI, 1e-300, -2.5e17, 5.783185962946784] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
    }
}
