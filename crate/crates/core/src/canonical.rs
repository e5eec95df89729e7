//! Canonical JSON serialization and content fingerprints.
//!
//! Every persisted artifact (frozen transforms, trained pipelines, reports,
//! run manifests) is written in one canonical form — object keys sorted,
//! floats in base-10 scientific notation with 17 significant digits — so that
//! load → re-serialize is byte-identical and rerun outputs hash equal.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// 17 significant digits: enough to round-trip any finite f64 exactly.
pub fn format_f64(x: f64) -> String {
    debug_assert!(x.is_finite());
    format!("{:.16e}", x)
}

/// Serialize any value to the canonical JSON byte form (trailing newline).
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&v, &mut out);
    out.push('\n');
    Ok(out)
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                // serde_json numbers are finite by construction
                out.push_str(&format_f64(n.as_f64().expect("finite f64")));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string escapes"));
        }
        Value::Array(items) => {
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (k, key) in keys.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("string escapes"));
                out.push(':');
                write_value(&map[*key], out);
            }
            out.push('}');
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        s.push_str(&format!("{:02x}", b));
    }
    s
}

/// Incremental SHA-256 hasher for content fingerprints.
pub struct Fingerprint {
    hasher: Sha256,
}

impl Fingerprint {
    pub fn new(domain: &str) -> Fingerprint {
        let mut hasher = Sha256::new();
        hasher.update(domain.as_bytes());
        hasher.update([0u8]);
        Fingerprint { hasher }
    }

    pub fn push_str(&mut self, s: &str) {
        self.hasher.update((s.len() as u64).to_le_bytes());
        self.hasher.update(s.as_bytes());
    }

    pub fn push_u64(&mut self, v: u64) {
        self.hasher.update(v.to_le_bytes());
    }

    pub fn push_f64(&mut self, v: f64) {
        self.hasher.update(v.to_bits().to_le_bytes());
    }

    pub fn push_f64s(&mut self, vs: &[f64]) {
        self.push_u64(vs.len() as u64);
        for &v in vs {
            self.push_f64(v);
        }
    }

    pub fn finish(self) -> String {
        let digest = self.hasher.finalize();
        let mut s = String::with_capacity(64);
        for b in digest {
            s.push_str(&format!("{:02x}", b));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn floats_round_trip_exactly() {
        for &x in
            &[0.0, -0.0, 1.0, -1.5, 0.1, -3.5e-7, 1e-300, 123456789.123456789, f64::MIN_POSITIVE]
        {
            let s = format_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{} -> {}", x, s);
        }
    }

    #[test]
    fn keys_sorted_and_stable() {
        let mut m = BTreeMap::new();
        m.insert("zeta".to_string(), 1u64);
        m.insert("alpha".to_string(), 2u64);
        let s = to_canonical_json(&m).unwrap();
        assert_eq!(s, "{\"alpha\":2,\"zeta\":1}\n");
    }

    #[test]
    fn reparse_reserialize_is_identity() {
        #[derive(serde::Serialize)]
        struct Doc {
            name: String,
            values: Vec<f64>,
            count: usize,
        }
        let doc = Doc { name: "x".into(), values: vec![0.1, 2.0, -3.5e-7], count: 3 };
        let s1 = to_canonical_json(&doc).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s1).unwrap();
        let s2 = to_canonical_json(&v).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn fingerprint_changes_with_content() {
        let mut a = Fingerprint::new("t");
        a.push_f64s(&[1.0, 2.0]);
        let mut b = Fingerprint::new("t");
        b.push_f64s(&[1.0, 2.5]);
        assert_ne!(a.finish(), b.finish());
    }
}
