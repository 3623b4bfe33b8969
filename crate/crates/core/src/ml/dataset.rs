use crate::hashcore::{hash_bytes, Decimal6, Digest};

use super::MlError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub features: Vec<Decimal6>,
    pub label: u32,
    pub sensitive: u32,
}

/// Tabular dataset whose identity is the digest of its canonical CSV:
/// header `f1,...,fk,label,sensitive`, one line per row in the given order,
/// every line terminated by `\n`, features as six-digit decimals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    schema: Vec<String>,
    rows: Vec<Row>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name != "label"
        && name != "sensitive"
        && !name.bytes().any(|b| matches!(b, b',' | b'"' | b'\n' | b'\r'))
}

impl Dataset {
    pub fn new(schema: Vec<String>, rows: Vec<Row>) -> Result<Self, MlError> {
        if let Some(bad) = schema.iter().find(|n| !valid_name(n)) {
            return Err(MlError::Csv { line: 1, message: format!("invalid feature name {bad:?}") });
        }
        for (i, r) in rows.iter().enumerate() {
            if r.features.len() != schema.len() {
                return Err(MlError::Arity { row: i, expected: schema.len(), found: r.features.len() });
            }
        }
        Ok(Self { schema, rows })
    }

    /// Feature names `f1..fk`.
    pub fn default_schema(k: usize) -> Vec<String> {
        (1..=k).map(|i| format!("f{i}")).collect()
    }

    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.schema.len()
    }

    pub fn with_rows(&self, rows: Vec<Row>) -> Result<Self, MlError> {
        Self::new(self.schema.clone(), rows)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for name in &self.schema {
            out.push_str(name);
            out.push(',');
        }
        out.push_str("label,sensitive\n");
        for r in &self.rows {
            for f in &r.features {
                out.push_str(&f.to_string());
                out.push(',');
            }
            out.push_str(&r.label.to_string());
            out.push(',');
            out.push_str(&r.sensitive.to_string());
            out.push('\n');
        }
        out
    }

    pub fn digest(&self) -> Digest {
        hash_bytes(self.to_csv().as_bytes())
    }

    /// Parses a dataset CSV. Decimal fields may use fewer than six
    /// fractional digits; the digest is always over the canonical form.
    pub fn from_csv(bytes: &[u8]) -> Result<Self, MlError> {
        let text = std::str::from_utf8(bytes)
            .map_err(|_| MlError::Csv { line: 1, message: "not UTF-8".into() })?;
        let mut lines = text.split('\n').enumerate();
        let header = match lines.next() {
            Some((_, h)) if !h.is_empty() => h.strip_suffix('\r').unwrap_or(h),
            _ => return Err(MlError::Csv { line: 1, message: "missing header".into() }),
        };
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 2 || cols[cols.len() - 2] != "label" || cols[cols.len() - 1] != "sensitive" {
            return Err(MlError::Csv { line: 1, message: "header must end with label,sensitive".into() });
        }
        let schema: Vec<String> = cols[..cols.len() - 2].iter().map(|s| s.to_string()).collect();
        let k = schema.len();
        let mut rows = Vec::new();
        for (i, line) in lines {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.is_empty() {
                continue;
            }
            let lineno = i + 1;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != k + 2 {
                return Err(MlError::Csv {
                    line: lineno,
                    message: format!("expected {} fields, found {}", k + 2, fields.len()),
                });
            }
            let features = fields[..k]
                .iter()
                .map(|f| Decimal6::parse_any(f.trim()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| MlError::Csv { line: lineno, message: e.to_string() })?;
            let parse_int = |s: &str, what: &str| {
                s.trim().parse::<u32>().map_err(|_| MlError::Csv {
                    line: lineno,
                    message: format!("{what} must be a non-negative integer, got {s:?}"),
                })
            };
            rows.push(Row {
                features,
                label: parse_int(fields[k], "label")?,
                sensitive: parse_int(fields[k + 1], "sensitive")?,
            });
        }
        Self::new(schema, rows)
    }
}
