//! Decision networks: chance nodes with conditional probability tables, one
//! decision node with information arcs, and one value node with a utility
//! table.
//!
//! [`InfluenceDiagram`] is the plain document form (what lives in a model
//! file). [`validate`] reports every broken invariant as data. [`Model`] is the
//! validated, indexed form that inference and compilation run against.
//!
//! Tables are flat and row-major: the first declared parent is the most
//! significant digit and, for CPTs, the node's own value is the fastest
//! varying index.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ModelError;

/// Tolerance for CPT row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChanceNode {
    pub name: String,
    pub values: Vec<String>,
    #[serde(default)]
    pub parents: Vec<String>,
    /// One row per parent configuration, each row a distribution over `values`.
    pub cpt: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionNode {
    pub name: String,
    pub alternatives: Vec<String>,
    /// Sources of information arcs. These are the evidence items, and their
    /// order here is the global tie-break order.
    #[serde(default)]
    pub observed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueNode {
    /// Chance node names and/or the decision node name.
    pub parents: Vec<String>,
    pub utility: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfluenceDiagram {
    pub chance_nodes: Vec<ChanceNode>,
    pub decision: DecisionNode,
    pub value: ValueNode,
}

impl InfluenceDiagram {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))
    }

    /// Canonical serialization: compact JSON in declaration order.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("diagram serializes")
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diagram serializes")
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_canonical_json().as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    DuplicateName,
    TooFewValues,
    DuplicateValue,
    UnknownParent,
    DuplicateParent,
    CptShape,
    ProbabilityRange,
    RowSum,
    Cycle,
    UnknownObserved,
    DuplicateObserved,
    TooFewAlternatives,
    DuplicateAlternative,
    UtilityShape,
    NonFiniteUtility,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::DuplicateName => "duplicate name",
            Rule::TooFewValues => "fewer than 2 values",
            Rule::DuplicateValue => "duplicate value label",
            Rule::UnknownParent => "unknown parent",
            Rule::DuplicateParent => "duplicate parent",
            Rule::CptShape => "cpt shape",
            Rule::ProbabilityRange => "probability outside [0,1]",
            Rule::RowSum => "row sum ≠ 1",
            Rule::Cycle => "cycle",
            Rule::UnknownObserved => "observed node is not a chance node",
            Rule::DuplicateObserved => "duplicate observed node",
            Rule::TooFewAlternatives => "fewer than 2 alternatives",
            Rule::DuplicateAlternative => "duplicate alternative",
            Rule::UtilityShape => "utility shape",
            Rule::NonFiniteUtility => "non-finite utility",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub node: String,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} ({})", self.node, self.rule, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    fn push(&mut self, node: &str, rule: Rule, detail: impl Into<String>) {
        self.violations.push(Violation {
            node: node.to_string(),
            rule,
            detail: detail.into(),
        });
    }
}

fn duplicates<'a>(labels: impl IntoIterator<Item = &'a String>) -> Vec<&'a String> {
    let mut seen = HashSet::new();
    let mut dups = Vec::new();
    for l in labels {
        if !seen.insert(l) && !dups.contains(&l) {
            dups.push(l);
        }
    }
    dups
}

/// Checks every structural and numeric invariant of a diagram.
pub fn validate(diagram: &InfluenceDiagram) -> ValidationReport {
    let mut report = ValidationReport::default();

    let all_names = diagram
        .chance_nodes
        .iter()
        .map(|c| &c.name)
        .chain(std::iter::once(&diagram.decision.name));
    for name in duplicates(all_names) {
        report.push(name, Rule::DuplicateName, "name declared more than once");
    }

    let cards: HashMap<&str, usize> = diagram
        .chance_nodes
        .iter()
        .map(|c| (c.name.as_str(), c.values.len()))
        .collect();

    for node in &diagram.chance_nodes {
        if node.values.len() < 2 {
            report.push(&node.name, Rule::TooFewValues, format!("{} value(s)", node.values.len()));
        }
        for v in duplicates(&node.values) {
            report.push(&node.name, Rule::DuplicateValue, format!("value {v:?}"));
        }
        for p in duplicates(&node.parents) {
            report.push(&node.name, Rule::DuplicateParent, format!("parent {p:?}"));
        }
        let mut rows = 1usize;
        let mut parents_ok = true;
        for p in &node.parents {
            match cards.get(p.as_str()) {
                Some(&c) => rows *= c,
                None => {
                    parents_ok = false;
                    report.push(&node.name, Rule::UnknownParent, format!("parent {p:?} is not a chance node"));
                }
            }
        }
        for (i, &p) in node.cpt.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                report.push(&node.name, Rule::ProbabilityRange, format!("cpt[{i}] = {p}"));
            }
        }
        if !parents_ok || node.values.is_empty() {
            continue;
        }
        let width = node.values.len();
        if node.cpt.len() != rows * width {
            report.push(
                &node.name,
                Rule::CptShape,
                format!("expected {} entries ({rows} rows of {width}), found {}", rows * width, node.cpt.len()),
            );
            continue;
        }
        for (r, row) in node.cpt.chunks(width).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                report.push(&node.name, Rule::RowSum, format!("row {r} sums to {sum}"));
            }
        }
    }

    if let Some(cycle) = find_cycle(diagram) {
        report.push(&cycle[0], Rule::Cycle, cycle.join(" → "));
    }

    let d = &diagram.decision;
    if d.alternatives.len() < 2 {
        report.push(&d.name, Rule::TooFewAlternatives, format!("{} alternative(s)", d.alternatives.len()));
    }
    for a in duplicates(&d.alternatives) {
        report.push(&d.name, Rule::DuplicateAlternative, format!("alternative {a:?}"));
    }
    for o in &d.observed {
        if !cards.contains_key(o.as_str()) {
            report.push(&d.name, Rule::UnknownObserved, format!("{o:?}"));
        }
    }
    for o in duplicates(&d.observed) {
        report.push(&d.name, Rule::DuplicateObserved, format!("{o:?}"));
    }

    let v = &diagram.value;
    let mut rows = 1usize;
    let mut parents_ok = true;
    for p in &v.parents {
        if p == &d.name {
            rows *= d.alternatives.len();
        } else if let Some(&c) = cards.get(p.as_str()) {
            rows *= c;
        } else {
            parents_ok = false;
            report.push("value", Rule::UnknownParent, format!("parent {p:?}"));
        }
    }
    for p in duplicates(&v.parents) {
        report.push("value", Rule::DuplicateParent, format!("parent {p:?}"));
    }
    if parents_ok && v.utility.len() != rows {
        report.push(
            "value",
            Rule::UtilityShape,
            format!("expected {rows} entries, found {}", v.utility.len()),
        );
    }
    for (i, u) in v.utility.iter().enumerate() {
        if !u.is_finite() {
            report.push("value", Rule::NonFiniteUtility, format!("utility[{i}] = {u}"));
        }
    }
    report
}

fn find_cycle(diagram: &InfluenceDiagram) -> Option<Vec<String>> {
    let index: HashMap<&str, usize> = diagram
        .chance_nodes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.name.as_str(), i))
        .collect();
    let n = diagram.chance_nodes.len();
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; n];
    let mut stack = Vec::new();

    fn visit(
        i: usize,
        diagram: &InfluenceDiagram,
        index: &HashMap<&str, usize>,
        state: &mut [u8],
        stack: &mut Vec<usize>,
    ) -> Option<Vec<String>> {
        state[i] = 1;
        stack.push(i);
        for p in &diagram.chance_nodes[i].parents {
            let Some(&j) = index.get(p.as_str()) else { continue };
            if state[j] == 1 {
                let start = stack.iter().position(|&k| k == j).unwrap();
                let mut names: Vec<String> =
                    stack[start..].iter().map(|&k| diagram.chance_nodes[k].name.clone()).collect();
                names.push(diagram.chance_nodes[j].name.clone());
                return Some(names);
            }
            if state[j] == 0 {
                if let Some(c) = visit(j, diagram, index, state, stack) {
                    return Some(c);
                }
            }
        }
        stack.pop();
        state[i] = 2;
        None
    }

    (0..n).find_map(|i| {
        if state[i] == 0 {
            visit(i, diagram, &index, &mut state, &mut stack)
        } else {
            None
        }
    })
}

/// A partial assignment of values to evidence items, indexed by item
/// position (declaration order of `decision.observed`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EvidencePath {
    values: Vec<Option<usize>>,
}

impl EvidencePath {
    pub fn empty(items: usize) -> Self {
        EvidencePath { values: vec![None; items] }
    }

    pub fn from_values(values: Vec<Option<usize>>) -> Self {
        EvidencePath { values }
    }

    pub fn get(&self, item: usize) -> Option<usize> {
        self.values[item]
    }

    pub fn is_observed(&self, item: usize) -> bool {
        self.values[item].is_some()
    }

    /// Returns a copy extended with `item = value`.
    pub fn with(&self, item: usize, value: usize) -> Self {
        let mut next = self.clone();
        next.values[item] = Some(value);
        next
    }

    /// Number of evidence items in the diagram (observed or not).
    pub fn width(&self) -> usize {
        self.values.len()
    }

    /// Number of observed items.
    pub fn len(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    /// Observed items in declaration order.
    pub fn items(&self) -> impl Iterator<Item = usize> + '_ {
        self.values.iter().enumerate().filter_map(|(i, v)| v.map(|_| i))
    }

    pub fn unobserved(&self) -> impl Iterator<Item = usize> + '_ {
        self.values.iter().enumerate().filter_map(|(i, v)| v.is_none().then_some(i))
    }

    pub fn assignments(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.values.iter().enumerate().filter_map(|(i, v)| v.map(|x| (i, x)))
    }

    pub fn values(&self) -> &[Option<usize>] {
        &self.values
    }

    /// True when every observed item agrees with the full state.
    pub fn consistent_with(&self, state: &[usize]) -> bool {
        self.values.iter().zip(state).all(|(p, &s)| p.is_none_or(|v| v == s))
    }

    pub fn union(&self, other: &EvidencePath) -> Self {
        EvidencePath {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a.or(*b)).collect(),
        }
    }
}

/// A total assignment of values to evidence items.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EvidenceState(pub Vec<usize>);

impl EvidenceState {
    pub fn as_path(&self) -> EvidencePath {
        EvidencePath::from_values(self.0.iter().map(|&v| Some(v)).collect())
    }
}

/// Odometer over a mixed-radix space, last digit fastest.
pub(crate) fn for_each_assignment(cards: &[usize], mut f: impl FnMut(&[usize])) {
    if cards.contains(&0) {
        return;
    }
    let mut digits = vec![0usize; cards.len()];
    loop {
        f(&digits);
        let mut i = cards.len();
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < cards[i] {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// Calls `f` with every evidence path (partial assignment) over items with
/// the given cardinalities, the empty path first.
pub fn for_each_path(cards: &[usize], mut f: impl FnMut(&EvidencePath)) {
    let radix: Vec<usize> = cards.iter().map(|c| c + 1).collect();
    for_each_assignment(&radix, |digits| {
        let values = digits.iter().map(|&d| d.checked_sub(1)).collect();
        f(&EvidencePath::from_values(values));
    });
}

#[derive(Debug, Clone)]
struct IndexedChance {
    card: usize,
    parents: Vec<usize>,
    cpt: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
enum ValueParent {
    Chance(usize),
    Decision,
}

/// A validated, indexed influence diagram. Immutable; safe to share across
/// threads.
#[derive(Debug, Clone)]
pub struct Model {
    diagram: InfluenceDiagram,
    chance: Vec<IndexedChance>,
    items: Vec<usize>,
    value_parents: Vec<ValueParent>,
    fingerprint: String,
}

impl Model {
    pub fn new(diagram: InfluenceDiagram) -> Result<Self, ModelError> {
        let report = validate(&diagram);
        if !report.is_valid() {
            return Err(ModelError::Invalid(report));
        }
        let index: HashMap<&str, usize> = diagram
            .chance_nodes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.name.as_str(), i))
            .collect();
        let chance = diagram
            .chance_nodes
            .iter()
            .map(|c| IndexedChance {
                card: c.values.len(),
                parents: c.parents.iter().map(|p| index[p.as_str()]).collect(),
                cpt: c.cpt.clone(),
            })
            .collect();
        let items = diagram.decision.observed.iter().map(|o| index[o.as_str()]).collect();
        let value_parents = diagram
            .value
            .parents
            .iter()
            .map(|p| {
                if *p == diagram.decision.name {
                    ValueParent::Decision
                } else {
                    ValueParent::Chance(index[p.as_str()])
                }
            })
            .collect();
        let fingerprint = diagram.fingerprint();
        Ok(Model {
            diagram,
            chance,
            items,
            value_parents,
            fingerprint,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Model::new(InfluenceDiagram::from_json(text)?)
    }

    pub fn diagram(&self) -> &InfluenceDiagram {
        &self.diagram
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn chance_count(&self) -> usize {
        self.chance.len()
    }

    pub fn chance_cards(&self) -> Vec<usize> {
        self.chance.iter().map(|c| c.card).collect()
    }

    pub fn alternative_count(&self) -> usize {
        self.diagram.decision.alternatives.len()
    }

    pub fn alternative_name(&self, d: usize) -> &str {
        &self.diagram.decision.alternatives[d]
    }

    /// Evidence item names in declaration order (the tie-break order).
    pub fn evidence_items(&self) -> Vec<&str> {
        self.diagram.decision.observed.iter().map(String::as_str).collect()
    }

    pub fn item_count(&self) -> usize {
        self.items.len()
    }

    /// Chance-node index of an evidence item.
    pub fn item_node(&self, item: usize) -> usize {
        self.items[item]
    }

    pub fn item_name(&self, item: usize) -> &str {
        &self.diagram.decision.observed[item]
    }

    pub fn item_card(&self, item: usize) -> usize {
        self.chance[self.items[item]].card
    }

    pub fn item_cards(&self) -> Vec<usize> {
        (0..self.items.len()).map(|i| self.item_card(i)).collect()
    }

    pub fn item_values(&self, item: usize) -> &[String] {
        &self.diagram.chance_nodes[self.items[item]].values
    }

    pub fn item_index(&self, name: &str) -> Option<usize> {
        self.diagram.decision.observed.iter().position(|o| o == name)
    }

    pub fn value_index(&self, item: usize, label: &str) -> Option<usize> {
        self.item_values(item).iter().position(|v| v == label)
    }

    /// Largest value count over evidence items.
    pub fn max_item_card(&self) -> usize {
        (0..self.items.len()).map(|i| self.item_card(i)).max().unwrap_or(0)
    }

    /// Builds a path from `(item, value)` label pairs.
    pub fn path(&self, assignments: &[(&str, &str)]) -> Result<EvidencePath, ModelError> {
        let mut path = EvidencePath::empty(self.item_count());
        for &(item, value) in assignments {
            let i = self
                .item_index(item)
                .ok_or_else(|| ModelError::UnknownItem(item.to_string()))?;
            if path.is_observed(i) {
                return Err(ModelError::RepeatedItem(item.to_string()));
            }
            let v = self.value_index(i, value).ok_or_else(|| ModelError::UnknownValue {
                item: item.to_string(),
                value: value.to_string(),
            })?;
            path = path.with(i, v);
        }
        Ok(path)
    }

    pub fn empty_path(&self) -> EvidencePath {
        EvidencePath::empty(self.item_count())
    }

    /// Renders a path as `{A=a1, B=b1}`.
    pub fn describe_path(&self, path: &EvidencePath) -> String {
        let parts: Vec<String> = path
            .assignments()
            .map(|(i, v)| format!("{}={}", self.item_name(i), self.item_values(i)[v]))
            .collect();
        format!("{{{}}}", parts.join(", "))
    }

    /// All evidence states, lexicographic in declaration order.
    pub fn enumerate_evidence_states(&self) -> Vec<EvidenceState> {
        let mut out = Vec::new();
        for_each_assignment(&self.item_cards(), |s| out.push(EvidenceState(s.to_vec())));
        out
    }

    /// Chain-rule probability of a total assignment of every chance node
    /// (indexed by chance-node declaration order).
    pub fn joint_prob(&self, assignment: &[usize]) -> f64 {
        debug_assert_eq!(assignment.len(), self.chance.len());
        let mut p = 1.0;
        for (node, &value) in self.chance.iter().zip(assignment) {
            let mut row = 0usize;
            for &parent in &node.parents {
                row = row * self.chance[parent].card + assignment[parent];
            }
            p *= node.cpt[row * node.card + value];
            if p == 0.0 {
                return 0.0;
            }
        }
        p
    }

    /// Utility of a total chance assignment under decision `decision`.
    pub fn utility(&self, assignment: &[usize], decision: usize) -> f64 {
        let mut row = 0usize;
        for parent in &self.value_parents {
            row = match *parent {
                ValueParent::Chance(c) => row * self.chance[c].card + assignment[c],
                ValueParent::Decision => row * self.alternative_count() + decision,
            };
        }
        self.diagram.value.utility[row]
    }

    /// Visits every total chance assignment, last node fastest.
    pub fn for_each_chance_assignment(&self, f: impl FnMut(&[usize])) {
        for_each_assignment(&self.chance_cards(), f)
    }

    /// Projects a total chance assignment onto the evidence items.
    pub fn evidence_of(&self, assignment: &[usize]) -> Vec<usize> {
        self.items.iter().map(|&c| assignment[c]).collect()
    }
}
