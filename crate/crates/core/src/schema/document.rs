//! TOML schema documents.
//!
//! ```toml
//! [root_property]
//! name = "Product Name"
//! type = "str"
//!
//! [[properties]]
//! name = "Category"
//! type = "choices"
//! choices = ["Electronics", "Others"]
//! hierarchy_anchor = true
//!
//! [[properties]]
//! name = "Weight"
//! type = "float"
//! unit = "kg"
//! ```

use serde::{Deserialize, Serialize};

use super::{DataType, PropertySchema, PropertySpec, SchemaError, TypeKind};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaDoc {
    root_property: PropertyDoc,
    #[serde(default)]
    properties: Vec<PropertyDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PropertyDoc {
    name: String,
    #[serde(rename = "type")]
    kind: TypeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    choices: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    hierarchy_anchor: bool,
}

impl PropertyDoc {
    fn from_spec(spec: &PropertySpec, anchor: bool) -> Self {
        Self {
            name: spec.name.clone(),
            kind: spec.kind(),
            unit: spec.unit.clone(),
            choices: spec.data_type.choices().map(<[String]>::to_vec),
            hierarchy_anchor: anchor,
        }
    }

    fn into_spec(self) -> Result<PropertySpec, SchemaError> {
        let data_type = match (self.kind, self.choices) {
            (TypeKind::Choices, Some(labels)) => DataType::Choices(labels),
            (TypeKind::Choices, None) => {
                return Err(SchemaError::InvariantViolation(format!(
                    "choices property {:?} has no `choices` array",
                    self.name
                )))
            }
            (_, Some(_)) => {
                return Err(SchemaError::InvariantViolation(format!(
                    "property {:?} of type {} must not carry `choices`",
                    self.name, self.kind
                )))
            }
            (TypeKind::Int, None) => DataType::Int,
            (TypeKind::Float, None) => DataType::Float,
            (TypeKind::Str, None) => DataType::Str,
        };
        Ok(PropertySpec {
            name: self.name,
            data_type,
            unit: self.unit,
        })
    }
}

pub fn serialize_schema(schema: &PropertySchema) -> String {
    let anchor = schema.anchor().map(|a| a.name.as_str());
    let doc = SchemaDoc {
        root_property: PropertyDoc::from_spec(schema.root(), false),
        properties: schema
            .properties()
            .iter()
            .map(|p| PropertyDoc::from_spec(p, Some(p.name.as_str()) == anchor))
            .collect(),
    };
    toml::to_string(&doc).expect("schema documents always serialize")
}

pub fn parse_schema(text: &str) -> Result<PropertySchema, SchemaError> {
    let doc: SchemaDoc = toml::from_str(text).map_err(|e| {
        let location = match e.span() {
            Some(span) => {
                let before = &text[..span.start.min(text.len())];
                let line = before.matches('\n').count() + 1;
                let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
                format!("line {line}, column {col}")
            }
            None => "document".to_string(),
        };
        SchemaError::Parse {
            location,
            message: e.message().to_string(),
        }
    })?;
    if doc.root_property.hierarchy_anchor {
        return Err(SchemaError::InvariantViolation(
            "the root property cannot be the hierarchy anchor".into(),
        ));
    }
    let anchors: Vec<String> = doc
        .properties
        .iter()
        .filter(|p| p.hierarchy_anchor)
        .map(|p| p.name.clone())
        .collect();
    if anchors.len() > 1 {
        return Err(SchemaError::InvariantViolation(format!(
            "more than one hierarchy anchor: {anchors:?}"
        )));
    }
    let root = doc.root_property.into_spec()?;
    let properties = doc
        .properties
        .into_iter()
        .map(PropertyDoc::into_spec)
        .collect::<Result<Vec<_>, _>>()?;
    PropertySchema::new(root, properties, anchors.first().map(String::as_str))
}
