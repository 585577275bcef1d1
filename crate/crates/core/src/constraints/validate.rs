use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::STR_MAX_CHARS;
use crate::schema::{DataType, PropertySchema, PropertySpec, TypeKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("output is not a single JSON object: {0}")]
    MalformedObject(String),
    #[error("missing field {0:?}")]
    MissingField(String),
    #[error("unexpected field {0:?}")]
    ExtraField(String),
    #[error("field {field:?} must be {expected}, got {got}")]
    TypeMismatch { field: String, expected: TypeKind, got: String },
    #[error("field {field:?} has value {got:?}, which is not one of: {}", allowed.join(", "))]
    UnknownChoice { field: String, got: String, allowed: Vec<String> },
}

impl ValidationError {
    /// The property the error is about, if any.
    pub fn field(&self) -> Option<&str> {
        match self {
            ValidationError::MalformedObject(_) => None,
            ValidationError::MissingField(f)
            | ValidationError::ExtraField(f)
            | ValidationError::TypeMismatch { field: f, .. }
            | ValidationError::UnknownChoice { field: f, .. } => Some(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum PropertyValue {
    Int(i64),
    Float(f64),
    Text(String),
    Choice(String),
    /// Present in lenient output but not parseable as the property's type.
    Unparsed(String),
    /// Missing from lenient output.
    Absent,
}

impl PropertyValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            PropertyValue::Int(i) => Some(*i as f64),
            PropertyValue::Float(f) => Some(*f),
            _ => None,
        }
    }

    /// Label text for choice/text/unparsed values.
    pub fn as_label(&self) -> Option<&str> {
        match self {
            PropertyValue::Text(s) | PropertyValue::Choice(s) | PropertyValue::Unparsed(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_absent(&self) -> bool {
        matches!(self, PropertyValue::Absent)
    }
}

impl fmt::Display for PropertyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyValue::Int(i) => write!(f, "{i}"),
            PropertyValue::Float(x) => write!(f, "{x}"),
            PropertyValue::Text(s) | PropertyValue::Choice(s) | PropertyValue::Unparsed(s) => f.write_str(s),
            PropertyValue::Absent => f.write_str("<absent>"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Constrained,
    BaselineTriples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignedValue {
    pub name: String,
    pub value: PropertyValue,
    pub provenance: Provenance,
}

/// One product's property values in schema order, root first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyAssignment {
    pub values: Vec<AssignedValue>,
}

impl PropertyAssignment {
    pub fn get(&self, name: &str) -> Option<&PropertyValue> {
        self.values.iter().find(|v| v.name == name).map(|v| &v.value)
    }

    pub fn product_name(&self, schema: &PropertySchema) -> Option<&str> {
        self.get(&schema.root().name).and_then(PropertyValue::as_label)
    }

    /// True when every value came from constrained generation and is well typed.
    pub fn is_strict(&self) -> bool {
        self.values.iter().all(|v| {
            v.provenance == Provenance::Constrained
                && !matches!(v.value, PropertyValue::Unparsed(_) | PropertyValue::Absent)
        })
    }
}

struct Entries(Vec<(String, Value)>);

impl<'de> Deserialize<'de> for Entries {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct EntriesVisitor;
        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = Entries;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a JSON object")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Entries, A::Error> {
                let mut out: Vec<(String, Value)> = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Value>()? {
                    if out.iter().any(|(seen, _)| *seen == k) {
                        return Err(serde::de::Error::custom(format!("duplicate key {k:?}")));
                    }
                    out.push((k, v));
                }
                Ok(Entries(out))
            }
        }
        deserializer.deserialize_map(EntriesVisitor)
    }
}

fn describe(v: &Value) -> String {
    match v {
        Value::Null => "null".into(),
        Value::Bool(b) => format!("boolean {b}"),
        Value::Number(n) => format!("number {n}"),
        Value::String(s) => format!("string {s:?}"),
        Value::Array(_) => "array".into(),
        Value::Object(_) => "object".into(),
    }
}

fn typed_value(spec: &PropertySpec, raw: &Value) -> Result<PropertyValue, ValidationError> {
    let mismatch = || ValidationError::TypeMismatch {
        field: spec.name.clone(),
        expected: spec.kind(),
        got: describe(raw),
    };
    match (&spec.data_type, raw) {
        (DataType::Int, Value::Number(n)) => n.as_i64().map(PropertyValue::Int).ok_or_else(mismatch),
        (DataType::Float, Value::Number(n)) => n.as_f64().map(PropertyValue::Float).ok_or_else(mismatch),
        (DataType::Str, Value::String(s)) => {
            let len = s.chars().count();
            if (1..=STR_MAX_CHARS).contains(&len) {
                Ok(PropertyValue::Text(s.clone()))
            } else {
                Err(mismatch())
            }
        }
        (dt @ DataType::Choices(labels), Value::String(s)) => match dt.canonical_choice(s) {
            Some(canonical) => Ok(PropertyValue::Choice(canonical.to_string())),
            None => Err(ValidationError::UnknownChoice {
                field: spec.name.clone(),
                got: s.clone(),
                allowed: labels.clone(),
            }),
        },
        _ => Err(mismatch()),
    }
}

/// Strictly parses a model reply into an assignment for `schema`.
pub fn validate_output(raw: &str, schema: &PropertySchema) -> Result<PropertyAssignment, ValidationError> {
    let Entries(entries) =
        serde_json::from_str(raw.trim()).map_err(|e| ValidationError::MalformedObject(e.to_string()))?;
    if let Some((extra, _)) = entries.iter().find(|(k, _)| schema.property(k).is_none()) {
        return Err(ValidationError::ExtraField(extra.clone()));
    }
    let mut values = Vec::with_capacity(schema.len());
    for spec in schema.all_properties() {
        let (_, raw_value) = entries
            .iter()
            .find(|(k, _)| *k == spec.name)
            .ok_or_else(|| ValidationError::MissingField(spec.name.clone()))?;
        values.push(AssignedValue {
            name: spec.name.clone(),
            value: typed_value(spec, raw_value)?,
            provenance: Provenance::Constrained,
        });
    }
    Ok(PropertyAssignment { values })
}

/// Best-effort conversion of free text into a value of `spec`'s type.
/// Numerics take the first number in the text; non-member choices are kept
/// as [`PropertyValue::Unparsed`].
pub fn lenient_value(spec: &PropertySpec, text: &str) -> PropertyValue {
    let text = text.trim().trim_matches(|c| c == '"' || c == '\'').trim();
    if text.is_empty() {
        return PropertyValue::Absent;
    }
    match &spec.data_type {
        DataType::Int | DataType::Float => {
            let number = first_number(text);
            match (spec.kind(), number) {
                (TypeKind::Int, Some(n)) if n.fract() == 0.0 && n.abs() < 9.0e15 => PropertyValue::Int(n as i64),
                (TypeKind::Float, Some(n)) => PropertyValue::Float(n),
                _ => PropertyValue::Unparsed(text.to_string()),
            }
        }
        DataType::Str => PropertyValue::Text(text.to_string()),
        dt @ DataType::Choices(_) => match dt.canonical_choice(text) {
            Some(c) => PropertyValue::Choice(c.to_string()),
            None => PropertyValue::Unparsed(text.to_string()),
        },
    }
}

fn first_number(text: &str) -> Option<f64> {
    let bytes = text.as_bytes();
    let start = bytes.iter().position(u8::is_ascii_digit)?;
    let mut end = start;
    let mut seen_dot = false;
    while end < bytes.len() {
        match bytes[end] {
            b'0'..=b'9' => end += 1,
            b'.' if !seen_dot && bytes.get(end + 1).is_some_and(u8::is_ascii_digit) => {
                seen_dot = true;
                end += 1;
            }
            _ => break,
        }
    }
    let negative = start > 0 && bytes[start - 1] == b'-';
    let value: f64 = text[start..end].parse().ok()?;
    Some(if negative { -value } else { value })
}
