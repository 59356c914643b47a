//! Default trees: Enodes examine an evidence item (and carry a default
//! decision), Dnodes decide. Trees are persistent: `expand` returns a new
//! tree that shares every untouched subtree with the old one.
//!
//! Node ids are assigned breadth-first, left to right in value order, with
//! the root as node 1. Ids are positional, so they are renumbered when a
//! tree grows; internally nodes are addressed by their branch-index path.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::TreeError;
use crate::inference::{strictly_greater, DecisionSet, Inference, TIE_TOLERANCE};
use crate::model::{for_each_assignment, EvidencePath, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemLabels {
    pub name: String,
    pub values: Vec<String>,
}

/// Everything needed to print or walk a tree without its model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub decision: String,
    pub alternatives: Vec<String>,
    pub items: Vec<ItemLabels>,
}

impl Labels {
    pub fn from_model(model: &Model) -> Self {
        Labels {
            decision: model.diagram().decision.name.clone(),
            alternatives: model.diagram().decision.alternatives.clone(),
            items: (0..model.item_count())
                .map(|i| ItemLabels {
                    name: model.item_name(i).to_string(),
                    values: model.item_values(i).to_vec(),
                })
                .collect(),
        }
    }

    pub fn decision_names(&self, set: &DecisionSet) -> Vec<String> {
        set.decisions.iter().map(|&d| self.alternatives[d].clone()).collect()
    }

    pub fn describe_path(&self, path: &EvidencePath) -> String {
        let parts: Vec<String> = path
            .assignments()
            .map(|(i, v)| format!("{}={}", self.items[i].name, self.items[i].values[v]))
            .collect();
        format!("{{{}}}", parts.join(", "))
    }
}

/// Creation-time annotations. Display only; nothing reads them back for
/// computation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Annotation {
    pub prob_of_path: f64,
    /// Enodes only: eu_expand of the examined item at creation.
    pub eu_expand: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dnode {
    pub decisions: DecisionSet,
    pub open: bool,
    pub annotation: Annotation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enode {
    pub item: usize,
    /// Default decisions: those of the Dnode this Enode replaced.
    pub decisions: DecisionSet,
    /// One child per value of `item`, in value order. `None` only in
    /// hand-edited trees that fail to DT-compile.
    pub children: Vec<Option<Arc<Node>>>,
    pub annotation: Annotation,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Dnode(Dnode),
    Enode(Enode),
}

impl Node {
    pub fn dnode(decisions: DecisionSet, open: bool) -> Node {
        Node::Dnode(Dnode {
            decisions,
            open,
            annotation: Annotation::default(),
        })
    }

    pub fn enode(item: usize, decisions: DecisionSet, children: Vec<Node>) -> Node {
        Node::Enode(Enode {
            item,
            decisions,
            children: children.into_iter().map(|c| Some(Arc::new(c))).collect(),
            annotation: Annotation::default(),
        })
    }

    pub fn decisions(&self) -> &DecisionSet {
        match self {
            Node::Dnode(d) => &d.decisions,
            Node::Enode(e) => &e.decisions,
        }
    }

    pub fn annotation(&self) -> &Annotation {
        match self {
            Node::Dnode(d) => &d.annotation,
            Node::Enode(e) => &e.annotation,
        }
    }

    pub fn is_enode(&self) -> bool {
        matches!(self, Node::Enode(_))
    }

    pub fn is_open_dnode(&self) -> bool {
        matches!(self, Node::Dnode(d) if d.open)
    }
}

/// A node together with its position in a tree.
#[derive(Debug, Clone)]
pub struct NodeView<'t> {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub address: Vec<usize>,
    pub path: EvidencePath,
    pub node: &'t Node,
}

/// A candidate subtree: examine `item`, then per value either stop or
/// continue with a nested shape.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    pub item: usize,
    pub branches: Vec<Option<Shape>>,
}

impl Shape {
    pub fn single(item: usize, card: usize) -> Shape {
        Shape {
            item,
            branches: vec![None; card],
        }
    }

    /// Nesting depth; a single Enode has depth 1.
    pub fn depth(&self) -> usize {
        1 + self
            .branches
            .iter()
            .flatten()
            .map(Shape::depth)
            .max()
            .unwrap_or(0)
    }

    pub fn enode_count(&self) -> usize {
        1 + self.branches.iter().flatten().map(Shape::enode_count).sum::<usize>()
    }

    /// Preorder key used for lexicographic tie-breaking: the item, then per
    /// branch 0 for stop or 1 followed by the nested key.
    pub fn key(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.write_key(&mut out);
        out
    }

    fn write_key(&self, out: &mut Vec<usize>) {
        out.push(self.item);
        for b in &self.branches {
            match b {
                None => out.push(0),
                Some(s) => {
                    out.push(1);
                    s.write_key(out);
                }
            }
        }
    }

    /// Enodes in preorder with the path each one would sit on, starting
    /// from `root`.
    pub fn enodes_with_paths(&self, root: &EvidencePath) -> Vec<(EvidencePath, usize)> {
        let mut out = Vec::new();
        self.collect(root, &mut out);
        out
    }

    fn collect(&self, path: &EvidencePath, out: &mut Vec<(EvidencePath, usize)>) {
        out.push((path.clone(), self.item));
        for (v, b) in self.branches.iter().enumerate() {
            if let Some(s) = b {
                s.collect(&path.with(self.item, v), out);
            }
        }
    }

    pub fn describe(&self, labels: &Labels) -> String {
        let item = &labels.items[self.item];
        if self.branches.iter().all(Option::is_none) {
            return item.name.clone();
        }
        let inner: Vec<String> = self
            .branches
            .iter()
            .enumerate()
            .filter_map(|(v, b)| b.as_ref().map(|s| format!("{}: {}", item.values[v], s.describe(labels))))
            .collect();
        format!("{}[{}]", item.name, inner.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpansionSubtree {
    pub target: NodeId,
    pub shape: Shape,
}

impl ExpansionSubtree {
    pub fn depth(&self) -> usize {
        self.shape.depth()
    }
}

/// One way the E-descending condition fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EDescendingViolation {
    pub dnode: NodeId,
    pub item: usize,
    /// The inserted evidence values only.
    pub inserted: Vec<(usize, usize)>,
    /// `P(path(D))·evoi(E|path(D))`
    pub before: f64,
    /// `P(path(D) ∪ {e_i})·evoi(E|path(D) ∪ {e_i})`
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EDescendingReport {
    pub holds: bool,
    pub violations: Vec<EDescendingViolation>,
}

#[derive(Debug, Clone)]
pub struct DTree {
    root: Arc<Node>,
    labels: Arc<Labels>,
    fingerprint: String,
}

impl PartialEq for DTree {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root && self.labels == other.labels && self.fingerprint == other.fingerprint
    }
}

impl DTree {
    /// The single-Dnode tree `dec()`.
    pub fn single(inference: &Inference) -> Result<DTree, TreeError> {
        let model = inference.model();
        let empty = model.empty_path();
        let best = inference.evaluate(&empty)?.best.clone();
        let root = Node::Dnode(Dnode {
            decisions: best,
            open: model.item_count() > 0,
            annotation: Annotation {
                prob_of_path: 1.0,
                eu_expand: None,
            },
        });
        Ok(DTree {
            root: Arc::new(root),
            labels: Arc::new(Labels::from_model(model)),
            fingerprint: model.fingerprint().to_string(),
        })
    }

    /// Builds a tree from a hand-made root. Dnode `open` flags are recomputed
    /// from their paths.
    pub fn from_root(root: Node, labels: Labels, fingerprint: String) -> DTree {
        fn normalize(node: Node, path: &EvidencePath) -> Node {
            match node {
                Node::Dnode(mut d) => {
                    d.open = !path.is_complete();
                    Node::Dnode(d)
                }
                Node::Enode(mut e) => {
                    e.children = e
                        .children
                        .into_iter()
                        .enumerate()
                        .map(|(v, c)| {
                            c.map(|c| Arc::new(normalize(Arc::unwrap_or_clone(c), &path.with(e.item, v))))
                        })
                        .collect();
                    Node::Enode(e)
                }
            }
        }
        let root = normalize(root, &EvidencePath::empty(labels.items.len()));
        DTree::from_parts(root, labels, fingerprint)
    }

    /// Builds a tree exactly as given.
    pub fn from_parts(root: Node, labels: Labels, fingerprint: String) -> DTree {
        DTree {
            root: Arc::new(root),
            labels: Arc::new(labels),
            fingerprint,
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    fn item_count(&self) -> usize {
        self.labels.items.len()
    }

    /// All nodes in breadth-first, value order.
    pub fn nodes(&self) -> Vec<NodeView<'_>> {
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        queue.push_back((self.root.as_ref(), None, Vec::new(), EvidencePath::empty(self.item_count())));
        while let Some((node, parent, address, path)) = queue.pop_front() {
            let id = NodeId(out.len() as u32 + 1);
            if let Node::Enode(e) = node {
                for (v, child) in e.children.iter().enumerate() {
                    if let Some(child) = child {
                        let mut addr = address.clone();
                        addr.push(v);
                        queue.push_back((child.as_ref(), Some(id), addr, path.with(e.item, v)));
                    }
                }
            }
            out.push(NodeView {
                id,
                parent,
                address,
                path,
                node,
            });
        }
        out
    }

    pub fn view(&self, id: NodeId) -> Result<NodeView<'_>, TreeError> {
        self.nodes()
            .into_iter()
            .find(|v| v.id == id)
            .ok_or(TreeError::UnknownNode(id.0))
    }

    pub fn node(&self, id: NodeId) -> Result<&Node, TreeError> {
        Ok(self.view(id)?.node)
    }

    /// Evidence values on the arcs from the root to `id`.
    pub fn path(&self, id: NodeId) -> Result<EvidencePath, TreeError> {
        Ok(self.view(id)?.path)
    }

    /// Evidence items on the arcs from the root to `id`.
    pub fn evid_path(&self, id: NodeId) -> Result<Vec<usize>, TreeError> {
        Ok(self.path(id)?.items().collect())
    }

    pub fn open_dnodes(&self) -> Vec<NodeView<'_>> {
        self.nodes().into_iter().filter(|v| v.node.is_open_dnode()).collect()
    }

    pub fn enode_count(&self) -> usize {
        self.nodes().iter().filter(|v| v.node.is_enode()).count()
    }

    pub fn node_count(&self) -> usize {
        self.nodes().len()
    }

    fn replace_at(
        node: &Arc<Node>,
        address: &[usize],
        f: &mut dyn FnMut(&Node) -> Result<Node, TreeError>,
    ) -> Result<Arc<Node>, TreeError> {
        let Some((&first, rest)) = address.split_first() else {
            return Ok(Arc::new(f(node)?));
        };
        let Node::Enode(e) = node.as_ref() else {
            unreachable!("address runs through a Dnode")
        };
        let mut e = e.clone();
        let child = e.children[first].as_ref().expect("address runs through a missing branch");
        e.children[first] = Some(DTree::replace_at(child, rest, f)?);
        Ok(Arc::new(Node::Enode(e)))
    }

    /// Replaces the open Dnode `id` with an Enode examining `item`, adding
    /// one Dnode per value holding `dec` of the extended path.
    pub fn expand(&self, inference: &Inference, id: NodeId, item: usize) -> Result<DTree, TreeError> {
        let view = self.view(id)?;
        self.expand_at(inference, id, &view.address, &view.path, item)
    }

    pub(crate) fn expand_at(
        &self,
        inference: &Inference,
        id: NodeId,
        address: &[usize],
        path: &EvidencePath,
        item: usize,
    ) -> Result<DTree, TreeError> {
        if path.is_observed(item) {
            return Err(TreeError::ItemAlreadyObserved(item));
        }
        let mut build = |node: &Node| -> Result<Node, TreeError> {
            let Node::Dnode(d) = node else {
                return Err(TreeError::ClosedNode(id.0));
            };
            if !d.open {
                return Err(TreeError::ClosedNode(id.0));
            }
            let eval = inference.evaluate(path)?;
            let ext = eval.item(item)?;
            let children = ext
                .value_probs
                .iter()
                .zip(&ext.value_best)
                .enumerate()
                .map(|(v, (&p, best))| {
                    let child = match best {
                        Some(best) => Dnode {
                            decisions: best.clone(),
                            open: !path.with(item, v).is_complete(),
                            annotation: Annotation {
                                prob_of_path: p,
                                eu_expand: None,
                            },
                        },
                        // zero-probability branch: closed, inherits the parent's decisions
                        None => Dnode {
                            decisions: d.decisions.clone(),
                            open: false,
                            annotation: Annotation {
                                prob_of_path: 0.0,
                                eu_expand: None,
                            },
                        },
                    };
                    Some(Arc::new(Node::Dnode(child)))
                })
                .collect();
            Ok(Node::Enode(Enode {
                item,
                decisions: d.decisions.clone(),
                children,
                annotation: Annotation {
                    prob_of_path: eval.prob,
                    eu_expand: Some(ext.gain),
                },
            }))
        };
        let root = DTree::replace_at(&self.root, address, &mut build)?;
        Ok(DTree {
            root,
            labels: Arc::clone(&self.labels),
            fingerprint: self.fingerprint.clone(),
        })
    }

    /// Splices `subtree` in by the induced sequence of `expand` calls,
    /// depth-first.
    pub fn expand_subtree(&self, inference: &Inference, subtree: &ExpansionSubtree) -> Result<DTree, TreeError> {
        let view = self.view(subtree.target)?;
        let mut address = view.address.clone();
        self.splice(inference, subtree.target, &mut address, &view.path, &subtree.shape)
    }

    fn splice(
        &self,
        inference: &Inference,
        id: NodeId,
        address: &mut Vec<usize>,
        path: &EvidencePath,
        shape: &Shape,
    ) -> Result<DTree, TreeError> {
        let card = self.labels.items.get(shape.item).map(|i| i.values.len()).unwrap_or(0);
        if shape.branches.len() != card {
            return Err(TreeError::ShapeArity {
                item: shape.item,
                expected: card,
            });
        }
        let mut tree = self.expand_at(inference, id, address, path, shape.item)?;
        for (v, branch) in shape.branches.iter().enumerate() {
            if let Some(sub) = branch {
                address.push(v);
                tree = tree.splice(inference, id, address, &path.with(shape.item, v), sub)?;
                address.pop();
            }
        }
        Ok(tree)
    }

    /// Expands every open Dnode with its unobserved items in declaration
    /// order until all Dnodes are closed.
    pub fn expand_fully(&self, inference: &Inference) -> Result<DTree, TreeError> {
        let mut tree = self.clone();
        loop {
            let next = tree
                .open_dnodes()
                .first()
                .map(|v| (v.id, v.address.clone(), v.path.clone()));
            let Some((id, address, path)) = next else {
                return Ok(tree);
            };
            let item = path.unobserved().next().expect("open Dnode has an unobserved item");
            tree = tree.expand_at(inference, id, &address, &path, item)?;
        }
    }

    /// Expected utility of running the tree to a Dnode and acting on its
    /// first decision: `Σ_leaves P(path)·EU(d|path)`.
    pub fn eu_direct(&self, inference: &Inference) -> f64 {
        self.nodes()
            .iter()
            .filter_map(|v| match v.node {
                Node::Dnode(d) => Some(inference.weighted_utility(d.decisions.first(), &v.path)),
                Node::Enode(_) => None,
            })
            .sum()
    }

    /// `EU(dec()) + Σ_{Enodes N} eu_expand(path(N), item(N))`.
    pub fn eu_theorem1(&self, inference: &Inference) -> Result<f64, TreeError> {
        let mut eu = inference.best_decisions(&inference.model().empty_path())?.eu;
        for v in self.nodes() {
            if let Node::Enode(e) = v.node {
                eu += inference.eu_expand(&v.path, e.item)?;
            }
        }
        Ok(eu)
    }

    /// True iff every evidence state of `model` walks to a Dnode.
    pub fn dt_compiles(&self, model: &Model) -> bool {
        if *self.labels != Labels::from_model(model) {
            return false;
        }
        model
            .enumerate_evidence_states()
            .iter()
            .all(|s| self.leaf_for_state(&s.0).is_some())
    }

    /// The Dnode reached by a total evidence state, if any.
    pub fn leaf_for_state(&self, state: &[usize]) -> Option<&Dnode> {
        let mut node = self.root.as_ref();
        loop {
            match node {
                Node::Dnode(d) => return Some(d),
                Node::Enode(e) => node = e.children.get(*state.get(e.item)?)?.as_deref()?,
            }
        }
    }

    /// Checks, for every open Dnode `D`, item `E` and set of inserted values
    /// `{e_i}` (over items not on `path(D)` and not `E`) with at least
    /// `min_inserted` members, that
    /// `P(path(D))·evoi(E|path(D)) ≥ P(path(D) ∪ {e_i})·evoi(E|path(D) ∪ {e_i})`.
    ///
    /// Exponential in the number of items.
    pub fn is_e_descending(&self, inference: &Inference, min_inserted: usize) -> Result<EDescendingReport, TreeError> {
        let mut violations = Vec::new();
        let min_inserted = min_inserted.max(1);
        for view in self.open_dnodes() {
            let base = &view.path;
            let Ok(base_eval) = inference.evaluate(base) else {
                continue;
            };
            let free: Vec<usize> = base.unobserved().collect();
            // radix card+1 per free item, digit 0 = not inserted
            let radix: Vec<usize> = free.iter().map(|&i| self.labels.items[i].values.len() + 1).collect();
            let mut inserts = Vec::new();
            for_each_assignment(&radix, |digits| {
                let chosen: Vec<(usize, usize)> = free
                    .iter()
                    .zip(digits)
                    .filter(|(_, &d)| d > 0)
                    .map(|(&i, &d)| (i, d - 1))
                    .collect();
                if chosen.len() >= min_inserted {
                    inserts.push(chosen);
                }
            });
            for inserted in inserts {
                let path = inserted.iter().fold(base.clone(), |p, &(i, v)| p.with(i, v));
                let eval = match inference.evaluate(&path) {
                    Ok(e) => e,
                    Err(crate::error::InferenceError::ZeroProbabilityPath) => continue,
                    Err(e) => return Err(e.into()),
                };
                for item in path.unobserved() {
                    let before = base_eval.eu_expand(item)?;
                    let after = eval.eu_expand(item)?;
                    if after > before + TIE_TOLERANCE * before.abs().max(1.0) {
                        violations.push(EDescendingViolation {
                            dnode: view.id,
                            item,
                            inserted: inserted.clone(),
                            before,
                            after,
                        });
                    }
                }
            }
        }
        Ok(EDescendingReport {
            holds: violations.is_empty(),
            violations,
        })
    }

    /// The open Dnodes whose best single-item eu_expand is maximal, with that
    /// value.
    pub fn max_eu_expand_dnodes(&self, inference: &Inference) -> Result<(Vec<NodeId>, f64), TreeError> {
        let mut scored = Vec::new();
        for v in self.open_dnodes() {
            let eval = inference.evaluate(&v.path)?;
            let best = v
                .path
                .unobserved()
                .map(|i| eval.items[i].as_ref().unwrap().gain)
                .fold(f64::NEG_INFINITY, f64::max);
            scored.push((v.id, best));
        }
        let max = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        let ids = scored
            .into_iter()
            .filter(|&(_, g)| !strictly_greater(max, g))
            .map(|(id, _)| id)
            .collect();
        Ok((ids, max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn figure2_paths() {
        let t = fixtures::figure2_tree();
        let m = Model::new(fixtures::net3()).unwrap();
        assert_eq!(t.enode_count(), 4);
        assert_eq!(t.node_count(), 10);
        let n5 = t.path(NodeId(5)).unwrap();
        assert_eq!(m.describe_path(&n5), "{A=a1, B=b1}");
        assert_eq!(t.evid_path(NodeId(5)).unwrap(), vec![0, 1]);
        assert!(t.path(NodeId(1)).unwrap().is_empty());
        assert!(t.evid_path(NodeId(1)).unwrap().is_empty());
        assert_eq!(t.path(NodeId(11)), Err(TreeError::UnknownNode(11)));
    }

    #[test]
    fn figure2_dt_compiles_figure1_shape() {
        let m = Model::new(fixtures::net3()).unwrap();
        assert!(fixtures::figure2_tree().dt_compiles(&m));
    }

    #[test]
    fn missing_branch_does_not_dt_compile() {
        let m = Model::new(fixtures::net3()).unwrap();
        let t = fixtures::figure2_tree();
        let Node::Enode(mut root) = t.root().clone() else { panic!() };
        root.children[1] = None;
        let broken = DTree::from_parts(Node::Enode(root), t.labels().clone(), t.fingerprint().into());
        assert!(!broken.dt_compiles(&m));
    }

    #[test]
    fn single_dnode_tree() {
        let m = Model::new(fixtures::net1()).unwrap();
        let inf = Inference::new(&m);
        let t = DTree::single(&inf).unwrap();
        assert!(t.dt_compiles(&m));
        assert!(close(t.eu_direct(&inf), 0.6));
        assert!(close(t.eu_theorem1(&inf).unwrap(), 0.6));
    }

    #[test]
    fn expand_net1_with_a() {
        let m = Model::new(fixtures::net1()).unwrap();
        let inf = Inference::new(&m);
        let t = DTree::single(&inf).unwrap().expand(&inf, NodeId(1), 0).unwrap();
        assert_eq!(t.enode_count(), 1);
        assert_eq!(t.node_count(), 3);
        assert_eq!(t.node(NodeId(2)).unwrap().decisions().decisions, vec![0]);
        assert_eq!(t.node(NodeId(3)).unwrap().decisions().decisions, vec![1]);
        assert!(t.open_dnodes().is_empty());
        assert!(close(t.eu_direct(&inf), 0.73));
        assert!(close(t.eu_theorem1(&inf).unwrap(), 0.73));
        // Enode keeps the old default
        assert_eq!(t.root().decisions().decisions, vec![0]);
    }

    #[test]
    fn expand_errors() {
        let m = Model::new(fixtures::net2()).unwrap();
        let inf = Inference::new(&m);
        let t = DTree::single(&inf).unwrap().expand(&inf, NodeId(1), 0).unwrap();
        assert_eq!(t.expand(&inf, NodeId(1), 1), Err(TreeError::ClosedNode(1)));
        assert_eq!(t.expand(&inf, NodeId(2), 0), Err(TreeError::ItemAlreadyObserved(0)));
        let full = t.expand(&inf, NodeId(2), 1).unwrap();
        // N4, N5 are the B-children of a1 and have complete paths
        assert_eq!(full.expand(&inf, NodeId(4), 1), Err(TreeError::ItemAlreadyObserved(1)));
        assert!(matches!(full.expand(&inf, NodeId(4), 0), Err(TreeError::ItemAlreadyObserved(0))));
    }

    #[test]
    fn expand_shares_untouched_subtrees() {
        let m = Model::new(fixtures::net2()).unwrap();
        let inf = Inference::new(&m);
        let t = DTree::single(&inf).unwrap().expand(&inf, NodeId(1), 0).unwrap();
        let t2 = t.expand(&inf, NodeId(2), 1).unwrap();
        let (Node::Enode(a), Node::Enode(b)) = (t.root(), t2.root()) else { panic!() };
        assert!(Arc::ptr_eq(a.children[1].as_ref().unwrap(), b.children[1].as_ref().unwrap()));
        // the old tree is untouched
        assert_eq!(t.enode_count(), 1);
    }

    #[test]
    fn zero_probability_branch_is_closed_and_inherits() {
        let mut d = fixtures::net2();
        d.chance_nodes[2].cpt = vec![1.0, 0.0];
        let m = Model::new(d).unwrap();
        let inf = Inference::new(&m);
        let t = DTree::single(&inf).unwrap().expand(&inf, NodeId(1), 1).unwrap();
        let Node::Dnode(b2) = t.node(NodeId(3)).unwrap() else { panic!() };
        assert!(!b2.open);
        assert_eq!(b2.annotation.prob_of_path, 0.0);
        assert_eq!(&b2.decisions, t.root().decisions());
        assert!(close(t.eu_direct(&inf), t.eu_theorem1(&inf).unwrap()));
    }

    #[test]
    fn expand_subtree_matches_chained_expands() {
        let m = Model::new(fixtures::net2()).unwrap();
        let inf = Inference::new(&m);
        let t = DTree::single(&inf).unwrap();
        let shape = Shape {
            item: 0,
            branches: vec![Some(Shape::single(1, 2)), None],
        };
        let spliced = t
            .expand_subtree(&inf, &ExpansionSubtree { target: NodeId(1), shape })
            .unwrap();
        let chained = t.expand(&inf, NodeId(1), 0).unwrap().expand(&inf, NodeId(2), 1).unwrap();
        assert_eq!(spliced, chained);

        let single = t
            .expand_subtree(
                &inf,
                &ExpansionSubtree {
                    target: NodeId(1),
                    shape: Shape::single(0, 2),
                },
            )
            .unwrap();
        assert_eq!(single, t.expand(&inf, NodeId(1), 0).unwrap());

        let bad = ExpansionSubtree {
            target: NodeId(1),
            shape: Shape {
                item: 0,
                branches: vec![],
            },
        };
        assert!(matches!(t.expand_subtree(&inf, &bad), Err(TreeError::ShapeArity { .. })));
    }

    #[test]
    fn shape_metrics() {
        let s = Shape {
            item: 0,
            branches: vec![Some(Shape::single(1, 2)), None, Some(Shape::single(2, 3))],
        };
        assert_eq!(s.depth(), 2);
        assert_eq!(s.enode_count(), 3);
        assert_eq!(s.key(), vec![0, 1, 1, 0, 0, 0, 1, 2, 0, 0, 0]);
        assert_eq!(Shape::single(4, 2).depth(), 1);
    }

    #[test]
    fn e_descending_examples() {
        let m1 = Model::new(fixtures::net1()).unwrap();
        let inf1 = Inference::new(&m1);
        assert!(DTree::single(&inf1).unwrap().is_e_descending(&inf1, 1).unwrap().holds);

        let mg = Model::new(fixtures::gating()).unwrap();
        let infg = Inference::new(&mg);
        let report = DTree::single(&infg).unwrap().is_e_descending(&infg, 1).unwrap();
        assert!(!report.holds);
        let x = mg.item_index("X").unwrap();
        assert!(report.violations.iter().any(|v| v.item == x && v.inserted.len() == 1));
    }

    #[test]
    fn expand_fully_reaches_all_states() {
        let m = Model::new(fixtures::net3()).unwrap();
        let inf = Inference::new(&m);
        let t = DTree::single(&inf).unwrap().expand_fully(&inf).unwrap();
        assert!(t.open_dnodes().is_empty());
        assert!(t.dt_compiles(&m));
        let leaves = t.nodes().iter().filter(|v| !v.node.is_enode()).count();
        assert_eq!(leaves, 12);
    }
}
