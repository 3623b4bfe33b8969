use serde_json::Value;

/// The certification itself is unusable (float, array or other disallowed value).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid-certification at {path:?}: {reason}")]
pub struct InvalidTemplate {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("template-mismatch at {path:?}: {reason}")]
pub struct Mismatch {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MatchError {
    #[error(transparent)]
    Invalid(#[from] InvalidTemplate),
    #[error(transparent)]
    Mismatch(#[from] Mismatch),
}

fn push(path: &str, key: &str) -> String {
    format!("{path}/{}", key.replace('~', "~0").replace('/', "~1"))
}

/// Templates may only contain null, objects, strings, booleans and integers.
pub fn validate_template(t: &Value) -> Result<(), InvalidTemplate> {
    fn walk(v: &Value, path: &str) -> Result<(), InvalidTemplate> {
        let bad = |reason: &str| Err(InvalidTemplate { path: path.to_string(), reason: reason.into() });
        match v {
            Value::Null | Value::Bool(_) | Value::String(_) => Ok(()),
            Value::Number(n) if n.is_i64() || n.is_u64() => Ok(()),
            Value::Number(_) => bad("floating-point value"),
            Value::Array(_) => bad("array value"),
            Value::Object(o) => o.iter().try_for_each(|(k, v)| walk(v, &push(path, k))),
        }
    }
    walk(t, "")
}

/// Matches `payload` against a certification template:
///
/// * `null` matches anything;
/// * an object matches an object with the same key set whose values match,
///   or a non-empty array of such objects;
/// * a string, boolean or integer matches an identical value, or a
///   non-empty array of identical values.
///
/// The whole template is validated before any matching.
pub fn match_template(template: &Value, payload: &Value) -> Result<(), MatchError> {
    validate_template(template)?;
    match_at(template, payload, "")?;
    Ok(())
}

fn match_at(t: &Value, p: &Value, path: &str) -> Result<(), Mismatch> {
    let miss = |reason: String| Err(Mismatch { path: path.to_string(), reason });
    match (t, p) {
        (Value::Null, _) => Ok(()),
        (_, Value::Array(items)) => {
            if items.is_empty() {
                return miss("empty array".into());
            }
            items.iter().enumerate().try_for_each(|(i, item)| match item {
                Value::Array(_) => Err(Mismatch { path: push(path, &i.to_string()), reason: "nested array".into() }),
                _ => match_at(t, item, &push(path, &i.to_string())),
            })
        }
        (Value::Object(to), Value::Object(po)) => {
            if let Some(k) = to.keys().find(|k| !po.contains_key(*k)) {
                return miss(format!("missing key {k:?}"));
            }
            if let Some(k) = po.keys().find(|k| !to.contains_key(*k)) {
                return miss(format!("unexpected key {k:?}"));
            }
            to.iter().try_for_each(|(k, tv)| match_at(tv, &po[k], &push(path, k)))
        }
        (Value::Object(_), other) => miss(format!("expected an object, found {}", kind(other))),
        (scalar, other) => {
            if scalar == other {
                Ok(())
            } else {
                miss(format!("expected {scalar}, found {other}"))
            }
        }
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    fn arb_json() -> impl Strategy<Value = Value> {
        let leaf = prop_oneof![
            Just(Value::Null),
            any::<bool>().prop_map(Value::Bool),
            (-3i64..3).prop_map(|i| json!(i)),
            "[ab]{0,2}".prop_map(Value::String),
        ];
        leaf.prop_recursive(3, 24, 4, |inner| {
            prop_oneof![
                proptest::collection::vec(inner.clone(), 0..3).prop_map(Value::Array),
                proptest::collection::btree_map("[kq]", inner, 0..3)
                    .prop_map(|m| Value::Object(m.into_iter().collect())),
            ]
        })
    }

    /// Every template that matches some payload: derived from the payload.
    fn template_of(p: &Value) -> Value {
        match p {
            Value::Array(items) if !items.is_empty() => template_of(&items[0]),
            Value::Array(_) => Value::Null,
            Value::Object(o) => Value::Object(o.iter().map(|(k, v)| (k.clone(), template_of(v))).collect()),
            other => other.clone(),
        }
    }

    /// All templates obtained by replacing one subtree with null.
    fn nullings(t: &Value) -> Vec<Value> {
        let mut out = vec![Value::Null];
        if let Value::Object(o) = t {
            for (k, v) in o {
                for sub in nullings(v) {
                    let mut c = o.clone();
                    c.insert(k.clone(), sub);
                    out.push(Value::Object(c));
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn nulling_a_subtree_only_widens(p in arb_json(), other in arb_json()) {
            let t = template_of(&p);
            for candidate in [&p, &other] {
                if match_template(&t, candidate).is_ok() {
                    for t2 in nullings(&t) {
                        prop_assert!(match_template(&t2, candidate).is_ok());
                    }
                }
            }
        }

        #[test]
        fn float_anywhere_is_invalid(p in arb_json(), depth in 0usize..3) {
            let mut t = json!(0.5);
            for i in 0..depth {
                t = json!({ format!("k{i}"): t });
            }
            prop_assert!(matches!(match_template(&t, &p), Err(MatchError::Invalid(_))));
        }
    }
}
