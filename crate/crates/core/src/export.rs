//! Tree documents: the JSON export consumed by the CLI and the web walker,
//! and Graphviz dot text.
//!
//! ```json
//! {
//!   "format": "dtree",
//!   "version": 1,
//!   "diagram_fingerprint": "<sha-256 of the canonical model>",
//!   "decision": { "name": "D", "alternatives": ["d1", "d2"] },
//!   "evidence_items": [ { "name": "A", "values": ["a1", "a2"] } ],
//!   "nodes": [
//!     { "id": 1, "kind": "enode", "item": "A", "open": null, "decisions": ["d1"],
//!       "eu": 0.6, "prob_of_path": 1.0, "eu_expand": 0.13,
//!       "children": { "a1": 2, "a2": 3 } },
//!     { "id": 2, "kind": "dnode", "item": null, "open": false, "decisions": ["d1"],
//!       "eu": 0.8709677419354839, "prob_of_path": 0.62, "eu_expand": null,
//!       "children": null }
//!   ]
//! }
//! ```
//!
//! Nodes are listed breadth-first; `eu` is the conditional expected utility
//! of the node's decisions given its path.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::dtree::{Annotation, DTree, Dnode, Enode, ItemLabels, Labels, Node};
use crate::error::ExportError;
use crate::inference::DecisionSet;

pub const FORMAT: &str = "dtree";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionLabels {
    pub name: String,
    pub alternatives: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Enode,
    Dnode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: u32,
    pub kind: NodeKind,
    pub item: Option<String>,
    pub open: Option<bool>,
    pub decisions: Vec<String>,
    pub eu: f64,
    pub prob_of_path: f64,
    pub eu_expand: Option<f64>,
    pub children: Option<IndexMap<String, u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDocument {
    pub format: String,
    pub version: u32,
    pub diagram_fingerprint: String,
    pub decision: DecisionLabels,
    pub evidence_items: Vec<ItemLabels>,
    pub nodes: Vec<NodeRecord>,
}

impl TreeDocument {
    pub fn from_tree(tree: &DTree) -> TreeDocument {
        let labels = tree.labels();
        let views = tree.nodes();
        let nodes = views
            .iter()
            .map(|v| {
                let ann = v.node.annotation();
                let decisions = v.node.decisions();
                match v.node {
                    Node::Dnode(d) => NodeRecord {
                        id: v.id.0,
                        kind: NodeKind::Dnode,
                        item: None,
                        open: Some(d.open),
                        decisions: labels.decision_names(decisions),
                        eu: decisions.eu,
                        prob_of_path: ann.prob_of_path,
                        eu_expand: None,
                        children: None,
                    },
                    Node::Enode(e) => {
                        let item = &labels.items[e.item];
                        let children = views
                            .iter()
                            .filter(|c| c.parent == Some(v.id))
                            .map(|c| {
                                let value = *c.address.last().unwrap();
                                (item.values[value].clone(), c.id.0)
                            })
                            .collect();
                        NodeRecord {
                            id: v.id.0,
                            kind: NodeKind::Enode,
                            item: Some(item.name.clone()),
                            open: None,
                            decisions: labels.decision_names(decisions),
                            eu: decisions.eu,
                            prob_of_path: ann.prob_of_path,
                            eu_expand: ann.eu_expand,
                            children: Some(children),
                        }
                    }
                }
            })
            .collect();
        TreeDocument {
            format: FORMAT.into(),
            version: VERSION,
            diagram_fingerprint: tree.fingerprint().to_string(),
            decision: DecisionLabels {
                name: labels.decision.clone(),
                alternatives: labels.alternatives.clone(),
            },
            evidence_items: labels.items.clone(),
            nodes,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tree document serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<TreeDocument, ExportError> {
        serde_json::from_str(text).map_err(|e| ExportError::Parse(e.to_string()))
    }

    pub fn to_tree(&self) -> Result<DTree, ExportError> {
        let schema = |msg: String| ExportError::Schema(msg);
        if self.format != FORMAT || self.version != VERSION {
            return Err(schema(format!("unsupported format {} v{}", self.format, self.version)));
        }
        let labels = Labels {
            decision: self.decision.name.clone(),
            alternatives: self.decision.alternatives.clone(),
            items: self.evidence_items.clone(),
        };
        let mut by_id: HashMap<u32, &NodeRecord> = HashMap::new();
        for n in &self.nodes {
            if by_id.insert(n.id, n).is_some() {
                return Err(schema(format!("duplicate node id {}", n.id)));
            }
        }
        let mut referenced = HashSet::new();
        for n in &self.nodes {
            for &c in n.children.iter().flat_map(|c| c.values()) {
                if !by_id.contains_key(&c) {
                    return Err(schema(format!("node {} references missing child {c}", n.id)));
                }
                if !referenced.insert(c) {
                    return Err(schema(format!("node {c} has more than one parent")));
                }
            }
        }
        let roots: Vec<u32> = self.nodes.iter().map(|n| n.id).filter(|id| !referenced.contains(id)).collect();
        let [root] = roots[..] else {
            return Err(schema(format!("expected exactly one root, found {}", roots.len())));
        };
        let root = build(root, &by_id, &labels, 0)?;
        Ok(DTree::from_parts(root, labels, self.diagram_fingerprint.clone()))
    }
}

fn build(id: u32, by_id: &HashMap<u32, &NodeRecord>, labels: &Labels, depth: usize) -> Result<Node, ExportError> {
    let schema = |msg: String| ExportError::Schema(msg);
    if depth > labels.items.len() {
        return Err(schema(format!("node {id}: tree deeper than the item count")));
    }
    let rec = by_id[&id];
    if rec.decisions.is_empty() {
        return Err(schema(format!("node {id}: empty decisions")));
    }
    let decisions = rec
        .decisions
        .iter()
        .map(|d| {
            labels
                .alternatives
                .iter()
                .position(|a| a == d)
                .ok_or_else(|| schema(format!("node {id}: unknown decision {d:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let decisions = DecisionSet { decisions, eu: rec.eu };
    match rec.kind {
        NodeKind::Dnode => Ok(Node::Dnode(Dnode {
            decisions,
            open: rec.open.ok_or_else(|| schema(format!("node {id}: dnode without open flag")))?,
            annotation: Annotation {
                prob_of_path: rec.prob_of_path,
                eu_expand: None,
            },
        })),
        NodeKind::Enode => {
            let name = rec.item.as_ref().ok_or_else(|| schema(format!("node {id}: enode without item")))?;
            let item = labels
                .items
                .iter()
                .position(|i| &i.name == name)
                .ok_or_else(|| schema(format!("node {id}: unknown item {name:?}")))?;
            let values = &labels.items[item].values;
            let mut children: Vec<Option<Arc<Node>>> = vec![None; values.len()];
            for (value, &child) in rec.children.iter().flatten() {
                let v = values
                    .iter()
                    .position(|x| x == value)
                    .ok_or_else(|| schema(format!("node {id}: {value:?} is not a value of {name}")))?;
                children[v] = Some(Arc::new(build(child, by_id, labels, depth + 1)?));
            }
            Ok(Node::Enode(Enode {
                item,
                decisions,
                children,
                annotation: Annotation {
                    prob_of_path: rec.prob_of_path,
                    eu_expand: rec.eu_expand,
                },
            }))
        }
    }
}

/// Graphviz dot text for documentation.
pub fn to_dot(tree: &DTree) -> String {
    let labels = tree.labels();
    let mut out = String::from("digraph dtree {\n  node [fontname=\"Helvetica\"];\n");
    let views = tree.nodes();
    for v in &views {
        let decisions = labels.decision_names(v.node.decisions()).join(",");
        match v.node {
            Node::Enode(e) => {
                let _ = writeln!(
                    out,
                    "  n{} [shape=box, label=\"{}: {}?\\ndefault {}\"];",
                    v.id.0, v.id, labels.items[e.item].name, decisions
                );
            }
            Node::Dnode(d) => {
                let style = if d.open { ", style=dashed" } else { "" };
                let _ = writeln!(
                    out,
                    "  n{} [shape=ellipse{style}, label=\"{}: {}\"];",
                    v.id.0, v.id, decisions
                );
            }
        }
        if let Some(parent) = v.parent {
            let Node::Enode(pe) = tree.node(parent).expect("parent exists") else { unreachable!() };
            let value = &labels.items[pe.item].values[*v.address.last().unwrap()];
            let _ = writeln!(out, "  n{} -> n{} [label=\"{}\"];", parent.0, v.id.0, value);
        }
    }
    out.push_str("}\n");
    out
}
