use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EvalError, Truth};
use crate::schema::PropertySchema;

/// Annotated properties: (record field, schema property name).
pub const ANNOTATED_PROPERTIES: [(&str, &str); 5] = [
    ("category", "Category"),
    ("primary_package_color", "Primary Package Color"),
    ("package_material", "Package Material"),
    ("package_shape", "Package Shape"),
    ("weight_kg", "Weight"),
];

/// One annotated product image. Every property may be missing for a given
/// image; such images are left out of that property's denominator only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRecord {
    pub image: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primary_package_color: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub package_material: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub package_shape: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_kg: Option<f64>,
}

impl AnnotationRecord {
    /// Ground truth for a schema property name, if annotated.
    pub fn truth(&self, property: &str) -> Option<Truth> {
        let label = |v: &Option<String>| v.clone().map(Truth::Label);
        match property {
            "Category" => label(&self.category),
            "Primary Package Color" => label(&self.primary_package_color),
            "Package Material" => label(&self.package_material),
            "Package Shape" => label(&self.package_shape),
            "Weight" => self.weight_kg.map(Truth::Number),
            _ => None,
        }
    }

    fn labels_mut(&mut self) -> [(&'static str, &mut Option<String>); 4] {
        [
            ("Category", &mut self.category),
            ("Primary Package Color", &mut self.primary_package_color),
            ("Package Material", &mut self.package_material),
            ("Package Shape", &mut self.package_shape),
        ]
    }
}

/// Parses JSON-lines annotations. Weights must be positive; when a schema is
/// given, labels must be members of its choice lists and are stored in
/// canonical casing. Relative image paths resolve against `base`.
pub fn parse_annotations(text: &str, base: &Path, schema: Option<&PropertySchema>, source: &str) -> Result<Vec<AnnotationRecord>, EvalError> {
    let mut records = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| EvalError::Annotation {
            location: format!("{source}:{}", n + 1),
            message,
        };
        let mut record: AnnotationRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if let Some(w) = record.weight_kg {
            if !(w.is_finite() && w > 0.0) {
                return Err(err(format!("weight_kg must be positive, got {w}")));
            }
        }
        if let Some(schema) = schema {
            for (property, slot) in record.labels_mut() {
                let (Some(value), Some(spec)) = (slot.as_mut(), schema.property(property)) else {
                    continue;
                };
                match spec.data_type.canonical_choice(value) {
                    Some(canonical) => *value = canonical.to_string(),
                    None => return Err(err(format!("{value:?} is not a choice of {property:?}"))),
                }
            }
        }
        if record.image.is_relative() {
            record.image = base.join(&record.image);
        }
        records.push(record);
    }
    Ok(records)
}

pub fn load_annotations(path: &Path, schema: Option<&PropertySchema>) -> Result<Vec<AnnotationRecord>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Annotation {
        location: path.display().to_string(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new(""));
    parse_annotations(&text, base, schema, &path.display().to_string())
}
