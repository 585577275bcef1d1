//! Inventory knowledge graph.
//!
//! Nodes are identified by `(kind, normalized label)`; the display label is
//! whatever spelling was seen first. Merging a product subgraph unifies nodes
//! whose labels contain the same words regardless of order or letter case,
//! within the same kind. Every operation on the index is a hash lookup, so
//! merging costs O(|subgraph|) whatever the inventory size.

mod subgraph;

pub use subgraph::{subgraph_from_assignment, PropertyEdge, ProductSubgraph};

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Edge label linking hierarchy levels.
pub const IS_A: &str = "is_a";

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("label {0:?} is empty after normalization")]
    EmptyLabel(String),
    #[error("hierarchy chain {chain:?} does not run from the product to the anchor value {anchor:?}")]
    ChainEndpointMismatch { chain: Vec<String>, anchor: String },
    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),
    #[error("invalid subgraph: {0}")]
    InvalidSubgraph(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Product,
    PropertyValue,
    CategoryNode,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Product => "product",
            NodeKind::PropertyValue => "property_value",
            NodeKind::CategoryNode => "category_node",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [NodeKind::Product, NodeKind::PropertyValue, NodeKind::CategoryNode]
            .into_iter()
            .find(|k| k.as_str() == s)
    }
}

/// Lowercases, turns punctuation into spaces, sorts the word tokens and joins
/// them with single spaces. A `.` or `,` between two digits is kept so that
/// `1.5 kg` and `5.1 kg` stay distinct. Duplicate tokens are preserved.
pub fn normalize_label(display: &str) -> Result<String, GraphError> {
    let chars: Vec<char> = display.chars().collect();
    let mut cleaned = String::with_capacity(display.len());
    for (i, &c) in chars.iter().enumerate() {
        let decimal_sep = (c == '.' || c == ',')
            && i > 0
            && chars[i - 1].is_ascii_digit()
            && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
        if c.is_alphanumeric() || decimal_sep {
            cleaned.extend(c.to_lowercase());
        } else {
            cleaned.push(' ');
        }
    }
    let mut tokens: Vec<&str> = cleaned.split_whitespace().collect();
    if tokens.is_empty() {
        return Err(GraphError::EmptyLabel(display.to_string()));
    }
    tokens.sort_unstable();
    Ok(tokens.join(" "))
}

/// Identity of a node in the inventory.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub kind: NodeKind,
    pub normalized: String,
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.as_str(), self.normalized)
    }
}

/// A node identity plus the label it was spelled with. Equality ignores the display label.
#[derive(Debug, Clone)]
pub struct NodeKey {
    pub id: NodeId,
    pub display: String,
}

impl NodeKey {
    pub fn new(display: &str, kind: NodeKind) -> Result<Self, GraphError> {
        let display = display.trim();
        Ok(Self {
            id: NodeId {
                kind,
                normalized: normalize_label(display)?,
            },
            display: display.to_string(),
        })
    }

    pub fn kind(&self) -> NodeKind {
        self.id.kind
    }

    pub fn normalized(&self) -> &str {
        &self.id.normalized
    }
}

impl PartialEq for NodeKey {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for NodeKey {}

impl std::hash::Hash for NodeKey {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.id.hash(state)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub display: String,
    pub in_degree: usize,
    pub out_degree: usize,
}

/// Edge identity; ordering is (from, label, to).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId {
    pub from: NodeId,
    pub label: String,
    pub to: NodeId,
}

/// Machine-readable value carried on numeric property edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericAttr {
    pub value: f64,
    pub unit: String,
}

/// Two nodes sharing a normalized label across the product/non-product
/// boundary. They are kept apart and reported.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KindConflict {
    pub normalized: String,
    pub incoming: NodeKind,
    pub existing: NodeKind,
}

/// Bookkeeping for one merge. `node_upserts` and `edge_upserts` count index
/// operations and depend only on the subgraph.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeReport {
    pub nodes_added: usize,
    pub edges_added: usize,
    pub node_upserts: usize,
    pub edge_upserts: usize,
    pub conflicts: Vec<KindConflict>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InventoryGraph {
    nodes: HashMap<NodeId, NodeRecord>,
    edges: HashMap<EdgeId, Option<NumericAttr>>,
    products: HashSet<NodeId>,
}

impl InventoryGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn product_count(&self) -> usize {
        self.products.len()
    }

    pub fn node(&self, id: &NodeId) -> Option<&NodeRecord> {
        self.nodes.get(id)
    }

    /// Looks a label up the same way merging does.
    pub fn find(&self, label: &str, kind: NodeKind) -> Option<(&NodeId, &NodeRecord)> {
        let id = NodeId {
            kind,
            normalized: normalize_label(label).ok()?,
        };
        self.nodes.get_key_value(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&NodeId, &NodeRecord)> {
        self.nodes.iter()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&EdgeId, Option<&NumericAttr>)> {
        self.edges.iter().map(|(k, v)| (k, v.as_ref()))
    }

    pub fn edge_attr(&self, id: &EdgeId) -> Option<Option<&NumericAttr>> {
        self.edges.get(id).map(Option::as_ref)
    }

    pub fn products(&self) -> impl Iterator<Item = &NodeId> {
        self.products.iter()
    }

    pub fn node_ids(&self) -> BTreeSet<NodeId> {
        self.nodes.keys().cloned().collect()
    }

    pub fn edge_ids(&self) -> BTreeSet<EdgeId> {
        self.edges.keys().cloned().collect()
    }

    /// Edges pointing at `id`, by full scan.
    pub fn incoming(&self, id: &NodeId) -> Vec<&EdgeId> {
        self.edges.keys().filter(|e| &e.to == id).collect()
    }

    /// Edges leaving `id`, by full scan.
    pub fn outgoing(&self, id: &NodeId) -> Vec<&EdgeId> {
        self.edges.keys().filter(|e| &e.from == id).collect()
    }

    fn upsert_node(&mut self, key: &NodeKey, report: &mut MergeReport) {
        report.node_upserts += 1;
        if self.nodes.contains_key(&key.id) {
            return;
        }
        let others: &[NodeKind] = match key.kind() {
            NodeKind::Product => &[NodeKind::PropertyValue, NodeKind::CategoryNode],
            _ => &[NodeKind::Product],
        };
        for &other in others {
            let probe = NodeId {
                kind: other,
                normalized: key.id.normalized.clone(),
            };
            if self.nodes.contains_key(&probe) {
                report.conflicts.push(KindConflict {
                    normalized: key.id.normalized.clone(),
                    incoming: key.kind(),
                    existing: other,
                });
            }
        }
        self.nodes.insert(
            key.id.clone(),
            NodeRecord {
                display: key.display.clone(),
                in_degree: 0,
                out_degree: 0,
            },
        );
        report.nodes_added += 1;
    }

    fn upsert_edge(&mut self, id: EdgeId, attr: Option<NumericAttr>, report: &mut MergeReport) {
        report.edge_upserts += 1;
        if self.edges.contains_key(&id) {
            return;
        }
        if let Some(n) = self.nodes.get_mut(&id.from) {
            n.out_degree += 1;
        }
        if let Some(n) = self.nodes.get_mut(&id.to) {
            n.in_degree += 1;
        }
        self.edges.insert(id, attr);
        report.edges_added += 1;
    }

    /// Inserts a node with an explicit display label; used when loading documents.
    pub(crate) fn insert_raw_node(&mut self, id: NodeId, display: String) -> bool {
        if self.nodes.contains_key(&id) {
            return false;
        }
        self.nodes.insert(
            id,
            NodeRecord {
                display,
                in_degree: 0,
                out_degree: 0,
            },
        );
        true
    }

    pub(crate) fn insert_raw_edge(&mut self, id: EdgeId, attr: Option<NumericAttr>) -> bool {
        if self.edges.contains_key(&id) || !self.nodes.contains_key(&id.from) || !self.nodes.contains_key(&id.to) {
            return false;
        }
        let mut scratch = MergeReport::default();
        self.upsert_edge(id, attr, &mut scratch);
        true
    }

    pub(crate) fn insert_raw_product(&mut self, id: NodeId) -> bool {
        id.kind == NodeKind::Product && self.nodes.contains_key(&id) && self.products.insert(id)
    }
}

/// Adds `sub` to the inventory, unifying nodes by key. The subgraph is
/// validated first; on error the inventory is untouched.
pub fn merge_subgraph(inventory: &mut InventoryGraph, sub: &ProductSubgraph) -> Result<MergeReport, GraphError> {
    sub.check()?;
    let mut report = MergeReport::default();
    inventory.upsert_node(&sub.root, &mut report);
    for edge in &sub.property_edges {
        inventory.upsert_node(&edge.target, &mut report);
        inventory.upsert_edge(
            EdgeId {
                from: sub.root.id.clone(),
                label: edge.property.clone(),
                to: edge.target.id.clone(),
            },
            edge.numeric.clone(),
            &mut report,
        );
    }
    for chain in &sub.hierarchy_chains {
        for node in chain {
            inventory.upsert_node(node, &mut report);
        }
        for pair in chain.windows(2) {
            inventory.upsert_edge(
                EdgeId {
                    from: pair[0].id.clone(),
                    label: IS_A.to_string(),
                    to: pair[1].id.clone(),
                },
                None,
                &mut report,
            );
        }
    }
    inventory.products.insert(sub.root.id.clone());
    Ok(report)
}
