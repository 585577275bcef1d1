//! Property schemas: the typed blueprint every product subgraph follows.
//!
//! A [`PropertySchema`] is an ordered list of [`PropertySpec`]s headed by a
//! string-typed root property (the product name). At most one `Choices`
//! property is the hierarchy anchor, the category-like property whose value
//! terminates every hierarchy chain.

mod document;
pub mod induction;

pub use document::{parse_schema, serialize_schema};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Canonical spelling of the catch-all choice label.
pub const CATCH_ALL: &str = "Others";

#[derive(Debug, Error, PartialEq)]
pub enum SchemaError {
    #[error("schema parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("schema invariant violated: {0}")]
    InvariantViolation(String),
}

/// The four data-type labels a property can take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TypeKind {
    Int,
    Float,
    Str,
    Choices,
}

impl TypeKind {
    /// Fixed tie-break order used when two labels score equally.
    pub const ALL: [TypeKind; 4] = [TypeKind::Int, TypeKind::Float, TypeKind::Str, TypeKind::Choices];

    pub fn as_str(self) -> &'static str {
        match self {
            TypeKind::Int => "int",
            TypeKind::Float => "float",
            TypeKind::Str => "str",
            TypeKind::Choices => "choices",
        }
    }

    pub fn parse(label: &str) -> Option<TypeKind> {
        TypeKind::ALL.into_iter().find(|k| k.as_str().eq_ignore_ascii_case(label.trim()))
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, TypeKind::Int | TypeKind::Float)
    }
}

impl fmt::Display for TypeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataType {
    Int,
    Float,
    Str,
    /// Ordered labels; the last one is always [`CATCH_ALL`] in a valid schema.
    /// Induction returns an empty placeholder that `generate_choices` fills.
    Choices(Vec<String>),
}

impl DataType {
    pub fn kind(&self) -> TypeKind {
        match self {
            DataType::Int => TypeKind::Int,
            DataType::Float => TypeKind::Float,
            DataType::Str => TypeKind::Str,
            DataType::Choices(_) => TypeKind::Choices,
        }
    }

    pub fn choices(&self) -> Option<&[String]> {
        match self {
            DataType::Choices(labels) => Some(labels),
            _ => None,
        }
    }

    /// Case-insensitive lookup returning the canonical label.
    pub fn canonical_choice(&self, label: &str) -> Option<&str> {
        let label = label.trim();
        self.choices()?
            .iter()
            .find(|c| c.to_lowercase() == label.to_lowercase())
            .map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertySpec {
    pub name: String,
    pub data_type: DataType,
    pub unit: Option<String>,
}

impl PropertySpec {
    pub fn new(name: impl Into<String>, data_type: DataType, unit: Option<&str>) -> Self {
        Self {
            name: name.into(),
            data_type,
            unit: unit.map(str::to_string),
        }
    }

    pub fn str(name: impl Into<String>) -> Self {
        Self::new(name, DataType::Str, None)
    }

    pub fn float(name: impl Into<String>, unit: &str) -> Self {
        Self::new(name, DataType::Float, Some(unit))
    }

    pub fn int(name: impl Into<String>, unit: &str) -> Self {
        Self::new(name, DataType::Int, Some(unit))
    }

    pub fn choices<S: AsRef<str>>(name: impl Into<String>, labels: &[S]) -> Self {
        let labels = labels.iter().map(|s| s.as_ref().to_string()).collect();
        Self::new(name, DataType::Choices(labels), None)
    }

    pub fn kind(&self) -> TypeKind {
        self.data_type.kind()
    }

    fn check(&self) -> Result<(), SchemaError> {
        let violation = |msg: String| Err(SchemaError::InvariantViolation(msg));
        if self.name.trim().is_empty() {
            return violation("property name is empty".into());
        }
        if self.name.chars().any(char::is_control) {
            return violation(format!("property name {:?} contains control characters", self.name));
        }
        match (self.kind().is_numeric(), &self.unit) {
            (true, None) => return violation(format!("numeric property {:?} has no unit", self.name)),
            (false, Some(u)) => {
                return violation(format!("non-numeric property {:?} carries unit {u:?}", self.name))
            }
            (true, Some(u)) if u.trim().is_empty() => {
                return violation(format!("property {:?} has an empty unit", self.name))
            }
            _ => {}
        }
        if let DataType::Choices(labels) = &self.data_type {
            if labels.is_empty() {
                return violation(format!("choices property {:?} has no labels", self.name));
            }
            let mut seen = std::collections::HashSet::new();
            for label in labels {
                if label.trim().is_empty() || label.chars().any(char::is_control) {
                    return violation(format!("choices property {:?} has an invalid label {label:?}", self.name));
                }
                if !seen.insert(label.to_lowercase()) {
                    return violation(format!("choices property {:?} repeats label {label:?}", self.name));
                }
            }
            if labels.last().map(String::as_str) != Some(CATCH_ALL) {
                return violation(format!("choices property {:?} must end with {CATCH_ALL:?}", self.name));
            }
        }
        Ok(())
    }
}

/// A validated schema. Construct with [`PropertySchema::new`]; fields are
/// read-only afterwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertySchema {
    root: PropertySpec,
    properties: Vec<PropertySpec>,
    anchor: Option<usize>,
}

impl PropertySchema {
    /// `anchor` names the hierarchy-anchor property, if any.
    pub fn new(root: PropertySpec, properties: Vec<PropertySpec>, anchor: Option<&str>) -> Result<Self, SchemaError> {
        if root.kind() != TypeKind::Str {
            return Err(SchemaError::InvariantViolation(format!(
                "root property {:?} must be str, found {}",
                root.name,
                root.kind()
            )));
        }
        root.check()?;
        let mut seen = std::collections::HashSet::new();
        seen.insert(root.name.to_lowercase());
        for p in &properties {
            p.check()?;
            if !seen.insert(p.name.to_lowercase()) {
                return Err(SchemaError::InvariantViolation(format!("duplicate property name {:?}", p.name)));
            }
        }
        let anchor = match anchor {
            None => None,
            Some(name) => {
                let idx = properties
                    .iter()
                    .position(|p| p.name == name)
                    .ok_or_else(|| SchemaError::InvariantViolation(format!("hierarchy anchor {name:?} is not a property")))?;
                if properties[idx].kind() != TypeKind::Choices {
                    return Err(SchemaError::InvariantViolation(format!(
                        "hierarchy anchor {name:?} must be a choices property"
                    )));
                }
                Some(idx)
            }
        };
        Ok(Self { root, properties, anchor })
    }

    pub fn root(&self) -> &PropertySpec {
        &self.root
    }

    /// Non-root properties in schema order.
    pub fn properties(&self) -> &[PropertySpec] {
        &self.properties
    }

    /// Root first, then the remaining properties in order.
    pub fn all_properties(&self) -> impl Iterator<Item = &PropertySpec> {
        std::iter::once(&self.root).chain(self.properties.iter())
    }

    pub fn anchor(&self) -> Option<&PropertySpec> {
        self.anchor.map(|i| &self.properties[i])
    }

    pub fn property(&self, name: &str) -> Option<&PropertySpec> {
        self.all_properties().find(|p| p.name == name)
    }

    pub fn len(&self) -> usize {
        self.properties.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// The eight-property schema used for the e-commerce benchmark.
pub fn default_schema() -> PropertySchema {
    let category = PropertySpec::choices(
        "Category",
        &[
            "Electronics",
            "Fashion",
            "Home and Kitchen",
            "Beauty and Personal Care",
            "Food and Beverages",
            "Sports and Outdoors",
            "Baby and Kids Products",
            "Health and Wellness",
            "Automotive",
            "Arts and Crafts",
            "Pet Products",
            "Office and School Supplies",
            "Industrial and Scientific",
            "Musical Instruments",
            "Toys and Games",
            "Others",
        ],
    );
    let color = PropertySpec::choices(
        "Primary Package Color",
        &[
            "White",
            "Black",
            "Gray",
            "Beige",
            "Brown",
            "Tan",
            "Green",
            "Red",
            "Blue",
            "Yellow",
            "Light Blue",
            "Pink",
            "Baby Blue",
            "Mint Green",
            "Silver",
            "Gold",
            "Copper",
            "Purple",
            "Orange",
            "Turquoise",
            "Others",
        ],
    );
    let material = PropertySpec::choices(
        "Package Material",
        &[
            "Plastic",
            "Paper",
            "Cardboard",
            "Glass",
            "Metal",
            "Wood",
            "Fabric",
            "Foam",
            "Bamboo",
            "Bioplastic",
            "Molded Pulp",
            "Corrugated",
            "Others",
        ],
    );
    let shape = PropertySpec::choices(
        "Package Shape",
        &[
            "Rectangular",
            "Cylindrical",
            "Spherical",
            "Oval",
            "Triangular",
            "Irregular",
            "Flat",
            "Tubular",
            "Conical",
            "Geometric",
            "Others",
        ],
    );
    PropertySchema::new(
        PropertySpec::str("Product Name"),
        vec![
            category,
            PropertySpec::str("Brand"),
            PropertySpec::float("Price", "USD"),
            color,
            material,
            shape,
            PropertySpec::float("Weight", "kg"),
        ],
        Some("Category"),
    )
    .expect("default schema is valid")
}
