//! Saving, loading and exporting inventories.
//!
//! The saved document is JSON with `format_version` [`FORMAT_VERSION`]. Nodes
//! are sorted by `(kind, key)` and edges by `(from, label, to)`, so equal
//! graphs always produce byte-identical files.

mod export;

pub use export::{escape_statement_string, escape_xml, Exporter, ExporterRegistry, GraphMlExporter, StatementsExporter};

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{normalize_label, EdgeId, InventoryGraph, NodeId, NodeKind, NumericAttr};

pub const FORMAT_VERSION: &str = "imgkg-graph/1";

/// Conventional file extension for saved inventories.
pub const INVENTORY_EXTENSION: &str = "graph.json";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("cannot parse inventory document: {0}")]
    Parse(String),
    #[error("unsupported format_version {found:?} (expected {expected:?})")]
    VersionMismatch { found: String, expected: &'static str },
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRef {
    pub kind: NodeKind,
    pub key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub kind: NodeKind,
    pub key: String,
    pub display: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub from: NodeRef,
    pub label: String,
    pub to: NodeRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub format_version: String,
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<EdgeDoc>,
    pub products: Vec<String>,
}

fn node_ref(id: &NodeId) -> NodeRef {
    NodeRef {
        kind: id.kind,
        key: id.normalized.clone(),
    }
}

impl GraphDocument {
    pub fn from_graph(graph: &InventoryGraph) -> Self {
        let mut nodes: Vec<(&NodeId, &str)> = graph.nodes().map(|(id, rec)| (id, rec.display.as_str())).collect();
        nodes.sort_unstable_by(|a, b| a.0.cmp(b.0));
        let mut edges: Vec<(&EdgeId, Option<&NumericAttr>)> = graph.edges().collect();
        edges.sort_unstable_by(|a, b| a.0.cmp(b.0));
        let mut products: Vec<&str> = graph.products().map(|p| p.normalized.as_str()).collect();
        products.sort_unstable();
        Self {
            format_version: FORMAT_VERSION.to_string(),
            nodes: nodes
                .into_iter()
                .map(|(id, display)| NodeDoc {
                    kind: id.kind,
                    key: id.normalized.clone(),
                    display: display.to_string(),
                })
                .collect(),
            edges: edges
                .into_iter()
                .map(|(id, attr)| EdgeDoc {
                    from: node_ref(&id.from),
                    label: id.label.clone(),
                    to: node_ref(&id.to),
                    value: attr.map(|a| a.value),
                    unit: attr.map(|a| a.unit.clone()),
                })
                .collect(),
            products: products.into_iter().map(str::to_string).collect(),
        }
    }

    pub fn into_graph(self) -> Result<InventoryGraph, PersistError> {
        let bad = |msg: String| Err(PersistError::InvariantViolation(msg));
        if self.format_version != FORMAT_VERSION {
            return Err(PersistError::VersionMismatch {
                found: self.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let mut graph = InventoryGraph::new();
        for node in self.nodes {
            match normalize_label(&node.display) {
                Ok(n) if n == node.key => {}
                _ => return bad(format!("node key {:?} is not the normalization of {:?}", node.key, node.display)),
            }
            let id = NodeId {
                kind: node.kind,
                normalized: node.key,
            };
            if !graph.insert_raw_node(id.clone(), node.display) {
                return bad(format!("duplicate node {id}"));
            }
        }
        let mut seen_edges = HashSet::new();
        for edge in self.edges {
            let id = EdgeId {
                from: NodeId {
                    kind: edge.from.kind,
                    normalized: edge.from.key,
                },
                label: edge.label,
                to: NodeId {
                    kind: edge.to.kind,
                    normalized: edge.to.key,
                },
            };
            for end in [&id.from, &id.to] {
                if graph.node(end).is_none() {
                    return bad(format!("edge {:?} names missing node {end}", id.label));
                }
            }
            if !seen_edges.insert(id.clone()) {
                return bad(format!("duplicate edge {} -[{}]-> {}", id.from, id.label, id.to));
            }
            let attr = match (edge.value, edge.unit) {
                (Some(value), Some(unit)) if value.is_finite() => Some(NumericAttr { value, unit }),
                (None, None) => None,
                _ => return bad(format!("edge {:?} has an incomplete numeric attribute", id.label)),
            };
            graph.insert_raw_edge(id, attr);
        }
        for key in self.products {
            let id = NodeId {
                kind: NodeKind::Product,
                normalized: key,
            };
            if !graph.insert_raw_product(id.clone()) {
                return bad(format!("product {id} is missing or listed twice"));
            }
        }
        Ok(graph)
    }
}

/// Canonical document text for `graph`.
pub fn save(graph: &InventoryGraph) -> String {
    let mut text = serde_json::to_string_pretty(&GraphDocument::from_graph(graph)).expect("documents serialize");
    text.push('\n');
    text
}

pub fn load(text: &str) -> Result<InventoryGraph, PersistError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| PersistError::Parse(e.to_string()))?;
    if let Some(found) = value.get("format_version").and_then(|v| v.as_str()) {
        if found != FORMAT_VERSION {
            return Err(PersistError::VersionMismatch {
                found: found.to_string(),
                expected: FORMAT_VERSION,
            });
        }
    }
    let doc: GraphDocument = serde_json::from_value(value).map_err(|e| PersistError::Parse(e.to_string()))?;
    doc.into_graph()
}

/// Writes `contents` through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), PersistError> {
    let io_err = |source| PersistError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

pub fn save_file(graph: &InventoryGraph, path: &Path) -> Result<(), PersistError> {
    write_atomic(path, &save(graph))
}

/// Loads an inventory; a missing file is an empty inventory.
pub fn load_file(path: &Path) -> Result<InventoryGraph, PersistError> {
    match fs::read_to_string(path) {
        Ok(text) => load(&text),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(InventoryGraph::new()),
        Err(source) => Err(PersistError::Io {
            path: path.display().to_string(),
            source,
        }),
    }
}
