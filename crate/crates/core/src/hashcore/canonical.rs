//! Canonical JSON: object keys sorted bytewise, no insignificant whitespace,
//! and no floating-point literals anywhere. Non-integer numbers must already
//! be decimal strings (see [`Decimal6`](super::Decimal6)).

use std::fmt;

use serde::Serialize;
use serde_json::Value;

use super::digest::{hash_bytes, Digest};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CanonicalError {
    #[error("floating-point value at {path}")]
    Float { path: String },
    #[error("invalid JSON: {0}")]
    Parse(String),
    #[error("bytes are valid JSON but not in canonical form")]
    NotCanonical,
}

/// Bytes of a canonically serialized JSON value.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CanonicalJson(String);

impl CanonicalJson {
    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0.into_bytes()
    }

    pub fn digest(&self) -> Digest {
        hash_bytes(self.as_bytes())
    }

    pub fn to_value(&self) -> Value {
        serde_json::from_str(&self.0).expect("canonical JSON always re-parses")
    }

    /// Accepts `bytes` only if they are already canonical.
    pub fn from_canonical_bytes(bytes: &[u8]) -> Result<Self, CanonicalError> {
        let value: Value =
            serde_json::from_slice(bytes).map_err(|e| CanonicalError::Parse(e.to_string()))?;
        let canon = canonicalize(&value)?;
        if canon.as_bytes() != bytes {
            return Err(CanonicalError::NotCanonical);
        }
        Ok(canon)
    }

    /// Parses arbitrary JSON and canonicalizes it.
    pub fn parse(bytes: &[u8]) -> Result<Self, CanonicalError> {
        let value: Value =
            serde_json::from_slice(bytes).map_err(|e| CanonicalError::Parse(e.to_string()))?;
        canonicalize(&value)
    }
}

impl fmt::Display for CanonicalJson {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for CanonicalJson {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CanonicalJson({})", self.0)
    }
}

pub fn canonicalize(value: &Value) -> Result<CanonicalJson, CanonicalError> {
    let mut out = String::new();
    let mut path = String::new();
    write_value(value, &mut path, &mut out)?;
    Ok(CanonicalJson(out))
}

/// Serializes any `Serialize` type through [`canonicalize`].
pub fn canonical_bytes<T: Serialize + ?Sized>(v: &T) -> Result<CanonicalJson, CanonicalError> {
    let value = serde_json::to_value(v).map_err(|e| CanonicalError::Parse(e.to_string()))?;
    canonicalize(&value)
}

fn escape_pointer(key: &str) -> String {
    key.replace('~', "~0").replace('/', "~1")
}

fn write_value(value: &Value, path: &mut String, out: &mut String) -> Result<(), CanonicalError> {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                return Err(CanonicalError::Float {
                    path: if path.is_empty() { "/".into() } else { path.clone() },
                });
            }
            out.push_str(&n.to_string());
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let len = path.len();
                path.push('/');
                path.push_str(&i.to_string());
                write_value(item, path, out)?;
                path.truncate(len);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort_by(|a, b| a.as_bytes().cmp(b.as_bytes()));
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("string serializes"));
                out.push(':');
                let len = path.len();
                path.push('/');
                path.push_str(&escape_pointer(key));
                write_value(&map[key], path, out)?;
                path.truncate(len);
            }
            out.push('}');
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    #[test]
    fn sorts_keys_and_strips_whitespace() {
        let v: Value = serde_json::from_str(r#"{ "b" : 1, "a" : "x" }"#).unwrap();
        assert_eq!(canonicalize(&v).unwrap().as_str(), r#"{"a":"x","b":1}"#);
    }

    #[test]
    fn rejects_float_with_path() {
        let err = canonicalize(&json!({"v": 0.5})).unwrap_err();
        assert_eq!(err, CanonicalError::Float { path: "/v".into() });
        let err = canonicalize(&json!({"a": [1, {"b/c": 1.0}]})).unwrap_err();
        assert_eq!(err, CanonicalError::Float { path: "/a/1/b~1c".into() });
        // exponent notation parses as a float too
        let v: Value = serde_json::from_str("[1e3]").unwrap();
        assert!(canonicalize(&v).is_err());
    }

    #[test]
    fn strict_parse_rejects_non_canonical() {
        assert!(CanonicalJson::from_canonical_bytes(br#"{"a":1}"#).is_ok());
        assert_eq!(
            CanonicalJson::from_canonical_bytes(br#"{"a": 1}"#).unwrap_err(),
            CanonicalError::NotCanonical
        );
        assert_eq!(
            CanonicalJson::from_canonical_bytes(br#"{"b":1,"a":2}"#).unwrap_err(),
            CanonicalError::NotCanonical
        );
    }

    #[test]
    fn negative_integers_and_unicode() {
        let v = json!({"n": -5, "s": "é\"\\\n", "big": u64::MAX});
        let c = canonicalize(&v).unwrap();
        assert_eq!(canonicalize(&c.to_value()).unwrap(), c);
    }

    fn arb_json() -> impl Strategy<Value = Value> {
        let leaf = prop_oneof![
            Just(Value::Null),
            any::<bool>().prop_map(Value::Bool),
            any::<i64>().prop_map(|i| json!(i)),
            "[a-zA-Z0-9 _\\-/~\"\\\\é]{0,8}".prop_map(Value::String),
        ];
        leaf.prop_recursive(4, 32, 6, |inner| {
            prop_oneof![
                proptest::collection::vec(inner.clone(), 0..5).prop_map(Value::Array),
                proptest::collection::vec(("[a-z]{0,4}", inner), 0..5)
                    .prop_map(|kv| Value::Object(kv.into_iter().collect())),
            ]
        })
    }

    proptest! {
        #[test]
        fn fixed_point(v in arb_json()) {
            let c = canonicalize(&v).unwrap();
            let again = canonicalize(&serde_json::from_slice(c.as_bytes()).unwrap()).unwrap();
            prop_assert_eq!(&c, &again);
            prop_assert!(CanonicalJson::from_canonical_bytes(c.as_bytes()).is_ok());
        }

        #[test]
        fn insertion_order_irrelevant(kv in proptest::collection::btree_map("[a-z]{1,6}", any::<i32>(), 0..8)) {
            let fwd: serde_json::Map<String, Value> = kv.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
            let rev: serde_json::Map<String, Value> = kv.iter().rev().map(|(k, v)| (k.clone(), json!(v))).collect();
            prop_assert_eq!(canonicalize(&Value::Object(fwd)).unwrap(), canonicalize(&Value::Object(rev)).unwrap());
        }
    }
}
