//! Small hand-built networks used by tests, benches and the CLI demos.
//!
//! * `net0` - one hidden node `H`, one chance node `A`, no information arcs.
//! * `net1` - `net0` with `A` observed. EU(dec()) = 0.6, evoi(A) = 0.13.
//! * `net2` - `net1` plus a noise item `B` independent of everything.
//! * `net3` - hidden `Typ` with three children `A`, `B`, `C` (3, 2 and 2
//!   values) all observed, three alternatives. Matches the item layout of
//!   [`figure2_tree`].
//! * `gating` - XOR-style gate: `X` only carries signal once `G` is known.
//!   Not E-descending at the root.
//! * `twin` - two items with identical likelihoods.

use crate::dtree::{DTree, Labels, Node};
use crate::inference::DecisionSet;
use crate::model::{ChanceNode, DecisionNode, InfluenceDiagram, ValueNode};

fn chance(name: &str, values: &[&str], parents: &[&str], cpt: &[f64]) -> ChanceNode {
    ChanceNode {
        name: name.into(),
        values: values.iter().map(|s| s.to_string()).collect(),
        parents: parents.iter().map(|s| s.to_string()).collect(),
        cpt: cpt.to_vec(),
    }
}

fn decision(alternatives: &[&str], observed: &[&str]) -> DecisionNode {
    DecisionNode {
        name: "D".into(),
        alternatives: alternatives.iter().map(|s| s.to_string()).collect(),
        observed: observed.iter().map(|s| s.to_string()).collect(),
    }
}

fn value(parents: &[&str], utility: &[f64]) -> ValueNode {
    ValueNode {
        parents: parents.iter().map(|s| s.to_string()).collect(),
        utility: utility.to_vec(),
    }
}

pub fn net0() -> InfluenceDiagram {
    let mut d = net1();
    d.decision.observed.clear();
    d
}

pub fn net1() -> InfluenceDiagram {
    InfluenceDiagram {
        chance_nodes: vec![
            chance("H", &["h1", "h2"], &[], &[0.6, 0.4]),
            chance("A", &["a1", "a2"], &["H"], &[0.9, 0.1, 0.2, 0.8]),
        ],
        decision: decision(&["d1", "d2"], &["A"]),
        value: value(&["D", "H"], &[1.0, 0.0, 0.5, 0.5]),
    }
}

/// `net1` with U(d2, ·) = 0.6, so d1 and d2 tie with no evidence.
pub fn net1_tie() -> InfluenceDiagram {
    let mut d = net1();
    d.value.utility = vec![1.0, 0.0, 0.6, 0.6];
    d
}

pub fn net2() -> InfluenceDiagram {
    let mut d = net1();
    d.chance_nodes.push(chance("B", &["b1", "b2"], &[], &[0.3, 0.7]));
    d.decision.observed.push("B".into());
    d
}

pub fn net3() -> InfluenceDiagram {
    InfluenceDiagram {
        chance_nodes: vec![
            chance("Typ", &["t1", "t2", "t3"], &[], &[0.5, 0.3, 0.2]),
            chance(
                "A",
                &["a1", "a2", "a3"],
                &["Typ"],
                &[0.7, 0.2, 0.1, 0.2, 0.5, 0.3, 0.1, 0.2, 0.7],
            ),
            chance("B", &["b1", "b2"], &["Typ"], &[0.8, 0.2, 0.3, 0.7, 0.5, 0.5]),
            chance("C", &["c1", "c2"], &["Typ"], &[0.7, 0.3, 0.2, 0.8, 0.4, 0.6]),
        ],
        decision: decision(&["d1", "d2", "d3"], &["A", "B", "C"]),
        value: value(&["D", "Typ"], &[1.0, 0.0, 0.2, 0.0, 1.0, 0.3, 0.1, 0.2, 1.0]),
    }
}

/// `net3` with a ternary `C` (3 x 2 x 3 = 18 evidence states).
pub fn net3_wide() -> InfluenceDiagram {
    let mut d = net3();
    d.chance_nodes[3] = chance(
        "C",
        &["c1", "c2", "c3"],
        &["Typ"],
        &[0.6, 0.3, 0.1, 0.1, 0.6, 0.3, 0.2, 0.2, 0.6],
    );
    d
}

pub fn gating() -> InfluenceDiagram {
    InfluenceDiagram {
        chance_nodes: vec![
            chance("H", &["h1", "h2"], &[], &[0.5, 0.5]),
            chance("G", &["g1", "g2"], &[], &[0.5, 0.5]),
            chance(
                "X",
                &["x1", "x2"],
                &["H", "G"],
                &[0.95, 0.05, 0.05, 0.95, 0.05, 0.95, 0.95, 0.05],
            ),
            chance("W", &["w1", "w2"], &["H"], &[0.6, 0.4, 0.4, 0.6]),
        ],
        decision: decision(&["d1", "d2"], &["G", "X", "W"]),
        value: value(&["D", "H"], &[1.0, 0.0, 0.0, 1.0]),
    }
}

pub fn twin() -> InfluenceDiagram {
    let mut d = net1();
    d.chance_nodes
        .push(chance("A2", &["a1", "a2"], &["H"], &[0.9, 0.1, 0.2, 0.8]));
    d.decision.observed.push("A2".into());
    d
}

/// The example default tree over the `net3` item layout: 4 Enodes and
/// 6 Dnodes, hand-labelled rather than compiled.
pub fn figure2_tree() -> DTree {
    let labels = Labels::from_model(&crate::model::Model::new(net3()).expect("net3 is valid"));
    let ds = |d: &[usize]| DecisionSet {
        decisions: d.to_vec(),
        eu: 0.0,
    };
    let (a, b, c) = (0, 1, 2);
    let (d1, d2, d3) = (0, 1, 2);
    let b_under_a1 = Node::enode(
        b,
        ds(&[d2]),
        vec![Node::dnode(ds(&[d1]), false), Node::dnode(ds(&[d2]), true)],
    );
    let b_under_c2 = Node::enode(
        b,
        ds(&[d3]),
        vec![Node::dnode(ds(&[d2]), false), Node::dnode(ds(&[d3]), false)],
    );
    let c_under_a3 = Node::enode(
        c,
        ds(&[d3]),
        vec![Node::dnode(ds(&[d1]), true), b_under_c2],
    );
    // Open flags are recomputed from paths on construction.
    let root = Node::enode(a, ds(&[d1]), vec![b_under_a1, Node::dnode(ds(&[d1]), true), c_under_a3]);
    DTree::from_root(root, labels, net3().fingerprint())
}
