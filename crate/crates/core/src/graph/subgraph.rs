use std::collections::HashSet;

use super::{normalize_label, GraphError, NodeKey, NodeKind, NumericAttr};
use crate::constraints::{PropertyAssignment, PropertyValue};
use crate::schema::PropertySchema;

/// A product-rooted edge to one property value node.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyEdge {
    pub property: String,
    pub target: NodeKey,
    pub numeric: Option<NumericAttr>,
}

/// One product's contribution to the inventory.
///
/// Hierarchy chains run from the root product node through zero or more
/// category nodes to the anchor property's value node.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSubgraph {
    pub root: NodeKey,
    pub property_edges: Vec<PropertyEdge>,
    pub hierarchy_chains: Vec<Vec<NodeKey>>,
}

impl ProductSubgraph {
    pub fn node_count(&self) -> usize {
        let mut seen: HashSet<&NodeKey> = HashSet::new();
        seen.insert(&self.root);
        for e in &self.property_edges {
            seen.insert(&e.target);
        }
        for n in self.hierarchy_chains.iter().flatten() {
            seen.insert(n);
        }
        seen.len()
    }

    /// Structural checks that do not need the schema.
    pub(crate) fn check(&self) -> Result<(), GraphError> {
        let bad = |msg: String| Err(GraphError::InvalidSubgraph(msg));
        if self.root.kind() != NodeKind::Product {
            return bad(format!("root {:?} is not a product node", self.root.display));
        }
        let mut properties = HashSet::new();
        for e in &self.property_edges {
            if e.target.kind() != NodeKind::PropertyValue {
                return bad(format!("property {:?} targets a non-value node", e.property));
            }
            if !properties.insert(e.property.to_lowercase()) {
                return bad(format!("property {:?} has more than one edge", e.property));
            }
        }
        for chain in &self.hierarchy_chains {
            if chain.len() < 2 || chain[0] != self.root {
                return bad("hierarchy chain does not start at the root".into());
            }
            let last = &chain[chain.len() - 1];
            if last.kind() != NodeKind::PropertyValue || !self.property_edges.iter().any(|e| &e.target == last) {
                return bad("hierarchy chain does not end at a property value of this product".into());
            }
            if chain[1..chain.len() - 1].iter().any(|n| n.kind() != NodeKind::CategoryNode) {
                return bad("hierarchy chain interior must be category nodes".into());
            }
            let mut seen = HashSet::new();
            if !chain.iter().all(|n| seen.insert(n.normalized())) {
                return bad("hierarchy chain repeats a label".into());
            }
        }
        Ok(())
    }
}

/// Display label for a value node: labels verbatim, numbers as `"value unit"`.
fn value_label(value: &PropertyValue, unit: Option<&str>) -> Option<(String, Option<NumericAttr>)> {
    match value {
        PropertyValue::Text(s) | PropertyValue::Choice(s) => Some((s.clone(), None)),
        PropertyValue::Int(_) | PropertyValue::Float(_) => {
            let number = value.as_f64()?;
            let unit = unit.unwrap_or_default();
            let display = if unit.is_empty() { value.to_string() } else { format!("{value} {unit}") };
            Some((
                display,
                Some(NumericAttr {
                    value: number,
                    unit: unit.to_string(),
                }),
            ))
        }
        PropertyValue::Unparsed(_) | PropertyValue::Absent => None,
    }
}

/// Builds the product subgraph for a validated assignment.
///
/// Each chain must start with the product name and end with the anchor
/// value (compared after normalization). Adjacent labels that normalize
/// equal are collapsed.
pub fn subgraph_from_assignment(
    assignment: &PropertyAssignment,
    chains: &[Vec<String>],
    schema: &PropertySchema,
) -> Result<ProductSubgraph, GraphError> {
    if !assignment.is_strict() {
        return Err(GraphError::InvalidAssignment("assignment contains untyped or missing values".into()));
    }
    let name = assignment
        .product_name(schema)
        .ok_or_else(|| GraphError::InvalidAssignment(format!("missing {:?}", schema.root().name)))?;
    let root = NodeKey::new(name, NodeKind::Product)?;

    let mut property_edges = Vec::with_capacity(schema.properties().len());
    for spec in schema.properties() {
        let value = assignment
            .get(&spec.name)
            .ok_or_else(|| GraphError::InvalidAssignment(format!("missing {:?}", spec.name)))?;
        let (display, numeric) = value_label(value, spec.unit.as_deref())
            .ok_or_else(|| GraphError::InvalidAssignment(format!("no usable value for {:?}", spec.name)))?;
        property_edges.push(PropertyEdge {
            property: spec.name.clone(),
            target: NodeKey::new(&display, NodeKind::PropertyValue)?,
            numeric,
        });
    }

    let anchor = match schema.anchor() {
        Some(spec) => property_edges.iter().find(|e| e.property == spec.name).map(|e| e.target.clone()),
        None => None,
    };
    let mut hierarchy_chains = Vec::with_capacity(chains.len());
    for labels in chains {
        let mismatch = || GraphError::ChainEndpointMismatch {
            chain: labels.clone(),
            anchor: anchor.as_ref().map(|a| a.display.clone()).unwrap_or_default(),
        };
        let anchor = anchor.as_ref().ok_or_else(mismatch)?;
        let (first, last) = match (labels.first(), labels.last()) {
            (Some(f), Some(l)) if labels.len() >= 2 => (f, l),
            _ => return Err(mismatch()),
        };
        if normalize_label(first)? != root.normalized() || normalize_label(last)? != anchor.normalized() {
            return Err(mismatch());
        }
        let mut chain = vec![root.clone()];
        for label in &labels[1..labels.len() - 1] {
            let key = NodeKey::new(label, NodeKind::CategoryNode)?;
            if chain.last().is_some_and(|prev| prev.normalized() == key.normalized()) {
                continue;
            }
            chain.push(key);
        }
        if chain.len() > 1 && chain[chain.len() - 1].normalized() == anchor.normalized() {
            chain.pop();
        }
        chain.push(anchor.clone());
        let mut seen = HashSet::new();
        if !chain.iter().all(|n| seen.insert(n.normalized().to_string())) {
            return Err(GraphError::InvalidSubgraph(format!("hierarchy chain {labels:?} repeats a label")));
        }
        hierarchy_chains.push(chain);
    }

    Ok(ProductSubgraph {
        root,
        property_edges,
        hierarchy_chains,
    })
}
