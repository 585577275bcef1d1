//! Interchange exporters, selected by name through [`ExporterRegistry`].
//!
//! Escaping is applied to every label, key and property name:
//!
//! * `graphml`: `&` `<` `>` `"` `'` become `&amp;` `&lt;` `&gt;` `&quot;` `&apos;`;
//!   newline, carriage return and tab become `&#10;` `&#13;` `&#9;`; other
//!   control characters (not representable in XML 1.0) become U+FFFD.
//! * `statements`: strings are single-quoted with `\\` `\'` `\n` `\r` `\t`
//!   escapes and `\uXXXX` for other control characters; relationship types are
//!   backtick-quoted with embedded backticks doubled.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::sync::Arc;

use crate::graph::{EdgeId, InventoryGraph, NodeId, NodeKind, NumericAttr};

pub trait Exporter: Send + Sync {
    fn name(&self) -> &'static str;
    fn extension(&self) -> &'static str;
    fn export(&self, graph: &InventoryGraph) -> String;
}

#[derive(Clone)]
pub struct ExporterRegistry {
    exporters: BTreeMap<&'static str, Arc<dyn Exporter>>,
}

impl ExporterRegistry {
    pub fn empty() -> Self {
        Self {
            exporters: BTreeMap::new(),
        }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(GraphMlExporter));
        r.register(Arc::new(StatementsExporter));
        r
    }

    pub fn register(&mut self, exporter: Arc<dyn Exporter>) {
        self.exporters.insert(exporter.name(), exporter);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn Exporter>> {
        self.exporters.get(name).cloned()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.exporters.keys().copied().collect()
    }
}

impl Default for ExporterRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

fn sorted_nodes(graph: &InventoryGraph) -> Vec<(&NodeId, &str)> {
    let mut nodes: Vec<_> = graph.nodes().map(|(id, rec)| (id, rec.display.as_str())).collect();
    nodes.sort_unstable_by(|a, b| a.0.cmp(b.0));
    nodes
}

fn sorted_edges(graph: &InventoryGraph) -> Vec<(&EdgeId, Option<&NumericAttr>)> {
    let mut edges: Vec<_> = graph.edges().collect();
    edges.sort_unstable_by(|a, b| a.0.cmp(b.0));
    edges
}

pub fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c if c.is_control() && (c as u32) < 0x20 || c == '\u{FFFE}' || c == '\u{FFFF}' => out.push('\u{FFFD}'),
            c => out.push(c),
        }
    }
    out
}

pub fn escape_statement_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{:04X}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}

fn node_label(kind: NodeKind) -> &'static str {
    match kind {
        NodeKind::Product => "Product",
        NodeKind::PropertyValue => "PropertyValue",
        NodeKind::CategoryNode => "CategoryNode",
    }
}

/// GraphML document; node ids are `n<index>` in canonical order.
pub struct GraphMlExporter;

impl Exporter for GraphMlExporter {
    fn name(&self) -> &'static str {
        "graphml"
    }

    fn extension(&self) -> &'static str {
        "graphml"
    }

    fn export(&self, graph: &InventoryGraph) -> String {
        let nodes = sorted_nodes(graph);
        let index: std::collections::HashMap<&NodeId, usize> = nodes.iter().enumerate().map(|(i, (id, _))| (*id, i)).collect();
        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
        out.push_str("  <key id=\"kind\" for=\"node\" attr.name=\"kind\" attr.type=\"string\"/>\n");
        out.push_str("  <key id=\"key\" for=\"node\" attr.name=\"key\" attr.type=\"string\"/>\n");
        out.push_str("  <key id=\"display\" for=\"node\" attr.name=\"display\" attr.type=\"string\"/>\n");
        out.push_str("  <key id=\"label\" for=\"edge\" attr.name=\"label\" attr.type=\"string\"/>\n");
        out.push_str("  <key id=\"value\" for=\"edge\" attr.name=\"value\" attr.type=\"double\"/>\n");
        out.push_str("  <key id=\"unit\" for=\"edge\" attr.name=\"unit\" attr.type=\"string\"/>\n");
        out.push_str("  <graph id=\"inventory\" edgedefault=\"directed\">\n");
        for (i, (id, display)) in nodes.iter().enumerate() {
            let _ = writeln!(
                out,
                "    <node id=\"n{i}\"><data key=\"kind\">{}</data><data key=\"key\">{}</data><data key=\"display\">{}</data></node>",
                id.kind.as_str(),
                escape_xml(&id.normalized),
                escape_xml(display)
            );
        }
        for (i, (edge, attr)) in sorted_edges(graph).into_iter().enumerate() {
            let _ = write!(
                out,
                "    <edge id=\"e{i}\" source=\"n{}\" target=\"n{}\"><data key=\"label\">{}</data>",
                index[&edge.from],
                index[&edge.to],
                escape_xml(&edge.label)
            );
            if let Some(a) = attr {
                let _ = write!(out, "<data key=\"value\">{}</data><data key=\"unit\">{}</data>", a.value, escape_xml(&a.unit));
            }
            out.push_str("</edge>\n");
        }
        out.push_str("  </graph>\n</graphml>\n");
        out
    }
}

/// Property-graph query statements, one idempotent `MERGE` per node and edge.
pub struct StatementsExporter;

impl Exporter for StatementsExporter {
    fn name(&self) -> &'static str {
        "statements"
    }

    fn extension(&self) -> &'static str {
        "cypher"
    }

    fn export(&self, graph: &InventoryGraph) -> String {
        let mut out = String::new();
        for (id, display) in sorted_nodes(graph) {
            let _ = writeln!(
                out,
                "MERGE (n:{} {{key:{}}}) ON CREATE SET n.display={};",
                node_label(id.kind),
                escape_statement_string(&id.normalized),
                escape_statement_string(display)
            );
        }
        for (edge, attr) in sorted_edges(graph) {
            let _ = write!(
                out,
                "MATCH (a:{} {{key:{}}}) MATCH (b:{} {{key:{}}}) MERGE (a)-[r:`{}`]->(b)",
                node_label(edge.from.kind),
                escape_statement_string(&edge.from.normalized),
                node_label(edge.to.kind),
                escape_statement_string(&edge.to.normalized),
                edge.label.replace('`', "``")
            );
            if let Some(a) = attr {
                let _ = write!(out, " ON CREATE SET r.value={}, r.unit={}", a.value, escape_statement_string(&a.unit));
            }
            out.push_str(";\n");
        }
        out
    }
}
