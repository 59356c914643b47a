//! Brute-force ground truth for tests and the CLI.
//!
//! Everything here is computed from `Model::joint_prob` and
//! `Model::utility` by enumeration. Nothing is shared with the inference
//! engine or the compiler, so agreement between the two is evidence that
//! both are right.

mod generate;

pub use generate::{generate_network, NetworkGenSpec};

use serde::Serialize;

use crate::dtree::{Annotation, DTree, Dnode, EDescendingViolation, Enode, Labels, Node, NodeId};
use crate::error::OracleError;
use crate::inference::{DecisionSet, Inference};
use crate::model::{for_each_assignment, EvidencePath, Model};

/// Tolerance for "optimal" and "tied" comparisons in oracle reports.
pub const ORACLE_TOLERANCE: f64 = 1e-9;

const MAX_POLICY_ITEMS: usize = 6;
const MAX_SEARCH_ITEMS: usize = 3;
const MAX_SEARCH_VALUES: usize = 3;

/// Per evidence state: `P(s)` and `W(s, d) = Σ_h P(s, h)·U(s, h, d)`.
struct Table {
    cards: Vec<usize>,
    alts: usize,
    states: Vec<(Vec<usize>, f64, Vec<f64>)>,
}

impl Table {
    fn new(model: &Model) -> Table {
        let cards = model.item_cards();
        let alts = model.alternative_count();
        let mut states = Vec::new();
        for_each_assignment(&cards, |s| states.push((s.to_vec(), 0.0, vec![0.0; alts])));
        model.for_each_chance_assignment(|a| {
            let p = model.joint_prob(a);
            let e = model.evidence_of(a);
            let idx = e.iter().zip(&cards).fold(0, |acc, (&v, &c)| acc * c + v);
            let row = &mut states[idx];
            row.1 += p;
            for (d, w) in row.2.iter_mut().enumerate() {
                *w += p * model.utility(a, d);
            }
        });
        Table { cards, alts, states }
    }

    fn mass(&self, path: &EvidencePath) -> (f64, Vec<f64>) {
        let mut p = 0.0;
        let mut w = vec![0.0; self.alts];
        for (s, sp, sw) in &self.states {
            if path.values().iter().zip(s).all(|(o, v)| o.is_none_or(|o| o == *v)) {
                p += sp;
                for (a, b) in w.iter_mut().zip(sw) {
                    *a += b;
                }
            }
        }
        (p, w)
    }

    fn best(&self, path: &EvidencePath) -> f64 {
        self.mass(path).1.into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    fn eu_expand(&self, path: &EvidencePath, item: usize) -> f64 {
        (0..self.cards[item]).map(|v| self.best(&path.with(item, v))).sum::<f64>() - self.best(path)
    }

    fn decisions(&self, path: &EvidencePath) -> Option<DecisionSet> {
        let (p, w) = self.mass(path);
        if p == 0.0 {
            return None;
        }
        let eus: Vec<f64> = w.iter().map(|x| x / p).collect();
        let best = eus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let decisions = (0..self.alts)
            .filter(|&d| eus[d] >= best - 1e-12 * best.abs().max(1.0))
            .collect();
        Some(DecisionSet { decisions, eu: best })
    }
}

/// A DTree shape as the oracle sees it: examine an item or decide.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OTree {
    Leaf,
    Ask { item: usize, branches: Vec<OTree> },
}

impl OTree {
    pub fn enodes(&self) -> usize {
        match self {
            OTree::Leaf => 0,
            OTree::Ask { branches, .. } => 1 + branches.iter().map(OTree::enodes).sum::<usize>(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            OTree::Leaf => 0,
            OTree::Ask { branches, .. } => 1 + branches.iter().map(OTree::depth).max().unwrap_or(0),
        }
    }

    /// Unconditional EU mass with the best decision at every leaf.
    fn eu(&self, table: &Table, path: &EvidencePath) -> f64 {
        match self {
            OTree::Leaf => table.best(path),
            OTree::Ask { item, branches } => branches
                .iter()
                .enumerate()
                .map(|(v, b)| b.eu(table, &path.with(*item, v)))
                .sum(),
        }
    }

    /// `(Σ eu_expand, count)` over the Enodes.
    fn gains(&self, table: &Table, path: &EvidencePath) -> (f64, usize) {
        match self {
            OTree::Leaf => (0.0, 0),
            OTree::Ask { item, branches } => branches.iter().enumerate().fold(
                (table.eu_expand(path, *item), 1),
                |(s, n), (v, b)| {
                    let (s2, n2) = b.gains(table, &path.with(*item, v));
                    (s + s2, n + n2)
                },
            ),
        }
    }

    pub fn describe(&self, labels: &Labels) -> String {
        match self {
            OTree::Leaf => "dec".into(),
            OTree::Ask { item, branches } => {
                let l = &labels.items[*item];
                if branches.iter().all(|b| *b == OTree::Leaf) {
                    return l.name.clone();
                }
                let inner: Vec<String> = branches
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| **b != OTree::Leaf)
                    .map(|(v, b)| format!("{}: {}", l.values[v], b.describe(labels)))
                    .collect();
                format!("{}[{}]", l.name, inner.join(", "))
            }
        }
    }
}

/// All trees rooted at `path` with at most `budget` Enodes and depth at most
/// `depth`, in canonical order: the leaf first, then by item in declaration
/// order, then branch choices with the last value varying fastest. Branches
/// with probability zero are never expanded.
fn trees(table: &Table, path: &EvidencePath, budget: usize, depth: usize) -> Vec<(OTree, usize)> {
    let mut out = vec![(OTree::Leaf, 0)];
    if budget == 0 || depth == 0 || table.mass(path).0 == 0.0 {
        return out;
    }
    for item in path.unobserved() {
        let mut partial: Vec<(Vec<OTree>, usize)> = vec![(Vec::new(), 1)];
        for v in 0..table.cards[item] {
            let child = path.with(item, v);
            let mut next = Vec::new();
            for (branches, used) in partial {
                for (t, k) in trees(table, &child, budget - used, depth - 1) {
                    let mut b = branches.clone();
                    b.push(t);
                    next.push((b, used + k));
                }
            }
            partial = next;
        }
        out.extend(partial.into_iter().map(|(branches, k)| (OTree::Ask { item, branches }, k)));
    }
    out
}

fn check_search_caps(model: &Model) -> Result<(), OracleError> {
    if model.item_count() > MAX_SEARCH_ITEMS || model.max_item_card() > MAX_SEARCH_VALUES {
        return Err(OracleError::BudgetTooLarge(format!(
            "{} items with up to {} values (cap: {MAX_SEARCH_ITEMS} items of {MAX_SEARCH_VALUES} values)",
            model.item_count(),
            model.max_item_card()
        )));
    }
    Ok(())
}

/// `Σ_s P(s)·max_d EU(d|s)`: the EU of deciding after seeing every item.
pub fn optimal_policy_eu(model: &Model) -> Result<f64, OracleError> {
    if model.item_count() > MAX_POLICY_ITEMS {
        return Err(OracleError::BudgetTooLarge(format!(
            "{} evidence items (cap: {MAX_POLICY_ITEMS})",
            model.item_count()
        )));
    }
    let table = Table::new(model);
    Ok(table
        .states
        .iter()
        .map(|(_, _, w)| w.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .sum())
}

/// EU of acting on each reached Dnode's first decision, summed over the
/// joint chance space.
pub fn tree_eu(model: &Model, tree: &DTree) -> Result<f64, OracleError> {
    let mut total = 0.0;
    let mut missing = None;
    model.for_each_chance_assignment(|a| {
        let e = model.evidence_of(a);
        let mut node = tree.root();
        loop {
            match node {
                Node::Dnode(d) => {
                    total += model.joint_prob(a) * model.utility(a, d.decisions.first());
                    break;
                }
                Node::Enode(en) => match en.children.get(e[en.item]).and_then(|c| c.as_deref()) {
                    Some(c) => node = c,
                    None => {
                        missing.get_or_insert(e.clone());
                        break;
                    }
                },
            }
        }
    });
    match missing {
        Some(e) => Err(OracleError::Incomplete(e)),
        None => Ok(total),
    }
}

fn to_node(table: &Table, path: &EvidencePath, t: &OTree, inherited: &DecisionSet) -> Node {
    let (p, _) = table.mass(path);
    let decisions = table.decisions(path).unwrap_or_else(|| inherited.clone());
    match t {
        OTree::Leaf => Node::Dnode(Dnode {
            open: p > 0.0 && !path.is_complete(),
            decisions,
            annotation: Annotation {
                prob_of_path: p,
                eu_expand: None,
            },
        }),
        OTree::Ask { item, branches } => Node::Enode(Enode {
            item: *item,
            children: branches
                .iter()
                .enumerate()
                .map(|(v, b)| Some(std::sync::Arc::new(to_node(table, &path.with(*item, v), b, &decisions))))
                .collect(),
            annotation: Annotation {
                prob_of_path: p,
                eu_expand: Some(table.eu_expand(path, *item)),
            },
            decisions,
        }),
    }
}

/// A maximum-EU DTree with at most `max_enodes` Enodes (unlimited if
/// `None`); ties go to the first tree in canonical order.
pub fn optimal_dtree(model: &Model, max_enodes: Option<usize>) -> Result<(DTree, f64), OracleError> {
    check_search_caps(model)?;
    let table = Table::new(model);
    let root = model.empty_path();
    let mut best: Option<(OTree, f64)> = None;
    for (t, _) in trees(&table, &root, max_enodes.unwrap_or(usize::MAX), usize::MAX) {
        let eu = t.eu(&table, &root);
        if best.as_ref().is_none_or(|(_, b)| eu > b + 1e-12 * b.abs().max(1.0)) {
            best = Some((t, eu));
        }
    }
    let (t, eu) = best.expect("the single-Dnode tree always exists");
    let top = table.decisions(&root).expect("root has probability one");
    let node = to_node(&table, &root, &t, &top);
    Ok((
        DTree::from_parts(node, Labels::from_model(model), model.fingerprint().to_string()),
        eu,
    ))
}

/// `opt[k]`: the best EU over DTrees with at most `k` Enodes, for `k` in
/// `0..=max_enodes`.
pub fn optimal_eu_by_enodes(model: &Model, max_enodes: usize) -> Result<Vec<f64>, OracleError> {
    check_search_caps(model)?;
    let table = Table::new(model);
    let root = model.empty_path();
    let mut exact = vec![f64::NEG_INFINITY; max_enodes + 1];
    for (t, k) in trees(&table, &root, max_enodes, usize::MAX) {
        exact[k] = exact[k].max(t.eu(&table, &root));
    }
    let mut out = Vec::with_capacity(exact.len());
    let mut run = f64::NEG_INFINITY;
    for e in exact {
        run = run.max(e);
        out.push(run);
    }
    Ok(out)
}

/// Number of expansion subtrees of depth ≤ `depth` at `path`, counted by
/// brute force.
pub fn count_shapes(model: &Model, path: &EvidencePath, depth: usize) -> usize {
    trees(&Table::new(model), path, usize::MAX, depth).len() - 1
}

/// The best unweighted mean `eu_expand` of any expansion subtree, of any
/// depth, at any open Dnode of `tree`.
pub fn max_mean_subtree(model: &Model, tree: &DTree) -> Result<Option<(NodeId, OTree, f64)>, OracleError> {
    check_search_caps(model)?;
    let table = Table::new(model);
    let mut best: Option<(NodeId, OTree, f64)> = None;
    for v in tree.open_dnodes() {
        for (t, k) in trees(&table, &v.path, usize::MAX, usize::MAX) {
            if k == 0 {
                continue;
            }
            let (sum, n) = t.gains(&table, &v.path);
            let mean = sum / n as f64;
            if best.as_ref().is_none_or(|(_, _, b)| mean > *b) {
                best = Some((v.id, t, mean));
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Property3Report {
    pub verdict: Verdict,
    pub budget: usize,
    /// E-descending violations, when skipped (at most five).
    pub witnesses: Vec<EDescendingViolation>,
    /// Open Dnodes whose best single expansion gain is maximal.
    pub max_gain_dnodes: Vec<u32>,
    pub optimal_expansions: usize,
    /// Every optimal expansion expands one of `max_gain_dnodes`.
    pub universal: bool,
    /// For every size that admits an optimal expansion, some optimal
    /// expansion of that size expands one of `max_gain_dnodes`.
    pub existential: bool,
    pub counterexamples: Vec<String>,
}

/// Checks that every optimal expansion of `tree` adding 1..=`budget` Enodes
/// expands some Dnode with maximal single-expansion gain. Skipped unless the
/// tree is E-descending.
pub fn verify_property3(model: &Model, tree: &DTree, budget: usize) -> Result<Property3Report, OracleError> {
    check_search_caps(model)?;
    let inference = Inference::new(model);
    let report = tree.is_e_descending(&inference, 1)?;
    let mut out = Property3Report {
        verdict: Verdict::Skipped,
        budget,
        witnesses: report.violations.into_iter().take(5).collect(),
        max_gain_dnodes: Vec::new(),
        optimal_expansions: 0,
        universal: true,
        existential: true,
        counterexamples: Vec::new(),
    };
    if !report.holds {
        return Ok(out);
    }
    let table = Table::new(model);
    let base = tree_eu(model, tree)?;
    let open: Vec<(NodeId, EvidencePath, f64)> = tree
        .open_dnodes()
        .into_iter()
        .map(|v| {
            let Node::Dnode(d) = v.node else { unreachable!() };
            let current = table.mass(&v.path).1[d.decisions.first()];
            (v.id, v.path, current)
        })
        .collect();
    let gains: Vec<f64> = open
        .iter()
        .map(|(_, p, _)| {
            p.unobserved()
                .map(|i| table.eu_expand(p, i))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let top = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let in_d: Vec<bool> = gains.iter().map(|&g| g >= top - ORACLE_TOLERANCE).collect();
    out.max_gain_dnodes = open.iter().zip(&in_d).filter(|(_, &d)| d).map(|(o, _)| o.0 .0).collect();

    let r = tree.enode_count();
    let opt = optimal_eu_by_enodes(model, r + budget)?;
    let options: Vec<Vec<(OTree, usize, f64)>> = open
        .iter()
        .map(|(_, p, current)| {
            trees(&table, p, budget, usize::MAX)
                .into_iter()
                .map(|(t, k)| {
                    let delta = t.eu(&table, p) - current;
                    (t, k, delta)
                })
                .collect()
        })
        .collect();

    // per size j: (optimal count, optimal count touching {d})
    let mut per_size = vec![(0usize, 0usize); budget + 1];
    let mut choice = vec![0usize; open.len()];
    enumerate_expansions(&options, 0, budget, 0.0, &mut choice, &mut |choice, added, delta| {
        if added == 0 {
            return;
        }
        let eu = base + delta;
        if eu < opt[r + added] - ORACLE_TOLERANCE {
            return;
        }
        let touches = choice.iter().zip(&in_d).any(|(&c, &d)| c != 0 && d);
        per_size[added].0 += 1;
        if touches {
            per_size[added].1 += 1;
        } else if out.counterexamples.len() < 5 {
            let parts: Vec<String> = choice
                .iter()
                .enumerate()
                .filter(|(_, &c)| c != 0)
                .map(|(i, &c)| format!("{}: {}", open[i].0, options[i][c].0.describe(tree.labels())))
                .collect();
            out.counterexamples.push(format!("{{{}}} reaches EU {eu}", parts.join("; ")));
        }
    });
    out.optimal_expansions = per_size.iter().map(|s| s.0).sum();
    out.universal = per_size.iter().all(|&(n, t)| n == t);
    out.existential = per_size.iter().all(|&(n, t)| n == 0 || t > 0);
    out.verdict = if out.universal { Verdict::Pass } else { Verdict::Fail };
    Ok(out)
}

fn enumerate_expansions(
    options: &[Vec<(OTree, usize, f64)>],
    at: usize,
    budget: usize,
    delta: f64,
    choice: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize], usize, f64),
) {
    if at == options.len() {
        let used = choice.iter().enumerate().map(|(i, &c)| options[i][c].1).sum();
        visit(choice, used, delta);
        return;
    }
    for (c, (_, k, d)) in options[at].iter().enumerate() {
        if *k > budget {
            continue;
        }
        choice[at] = c;
        enumerate_expansions(options, at + 1, budget - k, delta + d, choice, visit);
    }
    choice[at] = 0;
}
