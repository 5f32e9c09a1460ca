use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{MonolabError, Result};

pub const TOOL: &str = "monolab";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputEnvelope {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// fully resolved configuration of the run
    pub config: Value,
    pub timestamp: String,
    pub payload: Value,
    /// SHA-256 of the canonical payload bytes
    pub payload_sha256: String,
}

impl OutputEnvelope {
    pub fn new<C: Serialize, P: Serialize>(command: &str, config: &C, payload: &P) -> Result<Self> {
        let payload = serde_json::to_value(payload)?;
        let checksum = payload_checksum(&payload)?;
        Ok(Self {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: serde_json::to_value(config)?,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            payload,
            payload_sha256: checksum,
        })
    }

    /// True when the checksum matches the payload.
    pub fn verify(&self) -> Result<bool> {
        Ok(payload_checksum(&self.payload)? == self.payload_sha256)
    }
}

pub fn payload_checksum(payload: &Value) -> Result<String> {
    Ok(hex::encode(Sha256::digest(canonical_json(payload)?.as_bytes())))
}

/// Sorted keys, two-space indentation, floats with 17 significant digits,
/// integers verbatim. Non-finite numbers are rejected.
pub fn canonical_json(v: &Value) -> Result<String> {
    let mut out = String::new();
    write_value(v, 0, &mut out)?;
    out.push('\n');
    Ok(out)
}

pub fn format_float(x: f64) -> Result<String> {
    if !x.is_finite() {
        return Err(MonolabError::Domain(format!("non-finite number {x} in report")));
    }
    Ok(format!("{x:.16e}"))
}

fn indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_value(v: &Value, level: usize, out: &mut String) -> Result<()> {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                write!(out, "{i}").expect("string write");
            } else if let Some(u) = n.as_u64() {
                write!(out, "{u}").expect("string write");
            } else {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN))?);
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s)?),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return Ok(());
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                indent(level + 1, out);
                write_value(item, level + 1, out)?;
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            indent(level, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return Ok(());
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                indent(level + 1, out);
                out.push_str(&serde_json::to_string(k)?);
                out.push_str(": ");
                write_value(&map[*k], level + 1, out)?;
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            indent(level, out);
            out.push('}');
        }
    }
    Ok(())
}

/// Left-aligned name column, right-aligned value column.
pub fn table(rows: &[(String, String)]) -> String {
    let w0 = rows.iter().map(|r| r.0.chars().count()).max().unwrap_or(0);
    let w1 = rows.iter().map(|r| r.1.chars().count()).max().unwrap_or(0);
    let mut out = String::new();
    for (a, b) in rows {
        let pad0 = w0 - a.chars().count();
        let pad1 = w1 - b.chars().count();
        writeln!(out, "{a}{}  {}{b}", " ".repeat(pad0), " ".repeat(pad1)).expect("string write");
    }
    out
}

/// Compact human-readable float for tables.
pub fn short(x: f64) -> String {
    if x == 0.0 || (1e-3..1e6).contains(&x.abs()) {
        format!("{x:.12}")
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    } else {
        format!("{x:.6e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn canonical_is_a_fixed_point() {
        let v = json!({"b": [1.5, 2, -3], "a": {"z": 0.1, "y": null, "x": "s\"q"}, "c": 1e-300});
        let s1 = canonical_json(&v).unwrap();
        let back: Value = serde_json::from_str(&s1).unwrap();
        assert_eq!(canonical_json(&back).unwrap(), s1);
        assert!(s1.find("\"a\"").unwrap() < s1.find("\"b\"").unwrap());
        assert!(s1.contains("1.0000000000000001e-1"));
    }

    #[test]
    fn floats_round_trip_exactly() {
        for x in [0.1, 1.0 / 3.0, -2.5e-17, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = format_float(x).unwrap();
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert!(format_float(f64::NAN).is_err());
    }

    #[test]
    fn envelope_checksum() {
        let e = OutputEnvelope::new("test", &json!({"k": 1}), &json!({"v": 0.25})).unwrap();
        assert!(e.verify().unwrap());
        let mut bad = e.clone();
        bad.payload = json!({"v": 0.5});
        assert!(!bad.verify().unwrap());
    }

    #[test]
    fn table_alignment() {
        let t = table(&[("a".into(), "1".into()), ("long".into(), "22".into())]);
        assert_eq!(t, "a      1\nlong  22\n");
    }
}
