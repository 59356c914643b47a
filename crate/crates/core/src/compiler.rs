//! Greedy DTree compilers.
//!
//! DD repeatedly expands the (open Dnode, item) pair with the largest
//! `eu_expand`. DD_n scores candidate expansion subtrees of depth ≤ n by the
//! unweighted mean of their Enodes' `eu_expand` and splices the best one.
//!
//! Ties are broken by Dnode id, then the subtree's root item, then shallower
//! depth, then the lexicographic [`Shape::key`].

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dtree::{DTree, ExpansionSubtree, NodeId, Shape};
use crate::error::{CompileError, InferenceError, TreeError};
use crate::inference::{strictly_greater, Inference, PathEvaluation};
use crate::model::{EvidencePath, Model};
use crate::{oracle, par};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dd,
    Ddn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Enumeration {
    Greedy,
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompilerConfig {
    pub algorithm: Algorithm,
    /// DD_n lookahead; ignored by DD.
    pub depth: usize,
    pub enumeration: Enumeration,
    /// `None` means unlimited.
    pub max_enodes: Option<usize>,
    pub min_gain: f64,
    /// Stop once EU reaches this fraction of the optimal full-observation EU.
    pub eu_fraction_target: Option<f64>,
    /// Memoize network evaluations across iterations.
    pub cache: bool,
    /// Score candidates on the rayon pool (needs the `parallel` feature).
    pub parallel: bool,
}

impl Default for CompilerConfig {
    fn default() -> Self {
        CompilerConfig {
            algorithm: Algorithm::Dd,
            depth: 1,
            enumeration: Enumeration::Greedy,
            max_enodes: None,
            min_gain: 1e-9,
            eu_fraction_target: None,
            cache: true,
            parallel: true,
        }
    }
}

impl CompilerConfig {
    pub fn dd() -> Self {
        CompilerConfig::default()
    }

    pub fn ddn(depth: usize) -> Self {
        CompilerConfig {
            algorithm: Algorithm::Ddn,
            depth,
            ..CompilerConfig::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CompileError> {
        let config: CompilerConfig = serde_json::from_str(text).map_err(|e| CompileError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CompileError> {
        let bad = |msg: &str| Err(CompileError::Config(msg.into()));
        if self.depth < 1 {
            return bad("depth must be at least 1");
        }
        if !(self.min_gain >= 0.0 && self.min_gain.is_finite()) {
            return bad("min_gain must be a finite non-negative number");
        }
        if let Some(f) = self.eu_fraction_target {
            if !(f > 0.0 && f <= 1.0) {
                return bad("eu_fraction_target must lie in (0, 1]");
            }
        }
        Ok(())
    }

    /// Lookahead actually used.
    pub fn effective_depth(&self) -> usize {
        match self.algorithm {
            Algorithm::Dd => 1,
            Algorithm::Ddn => self.depth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    NoOpenDnodes,
    MaxEnodes,
    MinGain,
    EuFraction,
    NoEvidenceItems,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub dnode: u32,
    pub subtree: String,
    pub key: Vec<usize>,
    pub enodes: usize,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompilationStats {
    pub algorithm: Algorithm,
    pub depth: usize,
    pub iterations: usize,
    /// Network evaluations over the whole run, including the initial tree.
    pub inference_calls: u64,
    /// Evaluations per scoring round; the last round is the one that stopped.
    pub per_iteration_calls: Vec<u64>,
    pub ne: usize,
    pub enodes: usize,
    pub nodes: usize,
    /// EU of the initial tree, then after each iteration.
    pub eu_trace: Vec<f64>,
    pub selections: Vec<Selection>,
    pub stop_reason: Option<StopReason>,
    pub warnings: Vec<String>,
}

impl CompilationStats {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("stats serialize");
        s.push('\n');
        s
    }
}

/// A scored candidate expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub dnode: NodeId,
    pub shape: Shape,
    /// `eu_expand` for a single item, `mean_eu_expand` otherwise.
    pub score: f64,
}

#[derive(Debug, Clone)]
pub enum Step {
    Expanded(Selection),
    Stopped(StopReason),
}

#[derive(Debug, Clone)]
pub struct Compiled {
    pub tree: DTree,
    pub stats: CompilationStats,
}

/// Step-wise compiler. `step` performs one iteration of DD or DD_n.
pub struct Compiler<'m> {
    inference: Inference<'m>,
    config: CompilerConfig,
    tree: DTree,
    stats: CompilationStats,
    upper_bound: Option<f64>,
}

impl<'m> Compiler<'m> {
    pub fn new(model: &'m Model, config: CompilerConfig) -> Result<Self, CompileError> {
        config.validate()?;
        let upper_bound = match config.eu_fraction_target {
            Some(_) => Some(oracle::optimal_policy_eu(model)?),
            None => None,
        };
        let inference = Inference::with_cache(model, config.cache);
        let tree = DTree::single(&inference)?;
        let mut warnings = Vec::new();
        let mut stop_reason = None;
        if model.item_count() == 0 {
            warnings.push("model has no evidence items; returning the single-Dnode tree".to_string());
            stop_reason = Some(StopReason::NoEvidenceItems);
        }
        let stats = CompilationStats {
            algorithm: config.algorithm,
            depth: config.effective_depth(),
            iterations: 0,
            inference_calls: inference.counter().calls(),
            per_iteration_calls: Vec::new(),
            ne: model.max_item_card(),
            enodes: 0,
            nodes: 1,
            eu_trace: vec![tree.eu_direct(&inference)],
            selections: Vec::new(),
            stop_reason,
            warnings,
        };
        Ok(Compiler {
            inference,
            config,
            tree,
            stats,
            upper_bound,
        })
    }

    pub fn inference(&self) -> &Inference<'m> {
        &self.inference
    }

    pub fn tree(&self) -> &DTree {
        &self.tree
    }

    pub fn stats(&self) -> &CompilationStats {
        &self.stats
    }

    pub fn is_done(&self) -> bool {
        self.stats.stop_reason.is_some()
    }

    /// Every candidate the current iteration would consider, in tie-break
    /// order.
    pub fn candidates(&self) -> Result<Vec<Candidate>, TreeError> {
        let depth = self.config.effective_depth();
        let mode = match self.config.algorithm {
            Algorithm::Dd => None,
            Algorithm::Ddn => Some(self.config.enumeration),
        };
        let remaining = self.config.max_enodes.map(|m| m.saturating_sub(self.tree.enode_count()));
        let open: Vec<(NodeId, EvidencePath)> = self
            .tree
            .open_dnodes()
            .into_iter()
            .map(|v| (v.id, v.path))
            .collect();
        let inf = &self.inference;
        let scored = par::map(&open, self.config.parallel, |(id, path)| {
            let mut evals = Evals::new(inf);
            let mut out = match mode {
                None => single_candidates(&mut evals, *id, path),
                Some(mode) => subtree_candidates(&mut evals, *id, path, depth, mode),
            }?;
            if let Some(r) = remaining {
                out.retain(|c| c.shape.enode_count() <= r);
            }
            Ok::<_, InferenceError>(out)
        });
        let mut all = Vec::new();
        for s in scored {
            all.extend(s?);
        }
        Ok(all)
    }

    pub fn step(&mut self) -> Result<Step, CompileError> {
        if let Some(reason) = self.stats.stop_reason {
            return Ok(Step::Stopped(reason));
        }
        let before = self.inference.counter().calls();
        let outcome = self.iterate();
        let calls = self.inference.counter().calls() - before;
        self.stats.per_iteration_calls.push(calls);
        self.stats.inference_calls = self.inference.counter().calls();
        let outcome = outcome?;
        match &outcome {
            Step::Stopped(reason) => self.stats.stop_reason = Some(*reason),
            Step::Expanded(sel) => {
                self.stats.iterations += 1;
                self.stats.selections.push(sel.clone());
                self.stats.eu_trace.push(self.tree.eu_direct(&self.inference));
            }
        }
        self.stats.enodes = self.tree.enode_count();
        self.stats.nodes = self.tree.node_count();
        Ok(outcome)
    }

    fn iterate(&mut self) -> Result<Step, CompileError> {
        if self.tree.open_dnodes().is_empty() {
            return Ok(Step::Stopped(StopReason::NoOpenDnodes));
        }
        if self.config.max_enodes.is_some_and(|m| self.tree.enode_count() >= m) {
            return Ok(Step::Stopped(StopReason::MaxEnodes));
        }
        if let (Some(target), Some(bound)) = (self.config.eu_fraction_target, self.upper_bound) {
            if *self.stats.eu_trace.last().unwrap() >= target * bound {
                return Ok(Step::Stopped(StopReason::EuFraction));
            }
        }
        let Some(best) = select(self.candidates()?) else {
            return Ok(Step::Stopped(StopReason::MaxEnodes));
        };
        if best.score <= self.config.min_gain {
            return Ok(Step::Stopped(StopReason::MinGain));
        }
        self.tree = match self.config.algorithm {
            Algorithm::Dd => self.tree.expand(&self.inference, best.dnode, best.shape.item)?,
            Algorithm::Ddn => self.tree.expand_subtree(
                &self.inference,
                &ExpansionSubtree {
                    target: best.dnode,
                    shape: best.shape.clone(),
                },
            )?,
        };
        Ok(Step::Expanded(Selection {
            dnode: best.dnode.0,
            subtree: best.shape.describe(self.tree.labels()),
            key: best.shape.key(),
            enodes: best.shape.enode_count(),
            gain: best.score,
        }))
    }

    pub fn run(mut self) -> Result<Compiled, CompileError> {
        while let Step::Expanded(_) = self.step()? {}
        Ok(self.finish())
    }

    pub fn finish(self) -> Compiled {
        Compiled {
            tree: self.tree,
            stats: self.stats,
        }
    }
}

/// Compiles `model` with the algorithm named in `config`.
pub fn compile(model: &Model, config: &CompilerConfig) -> Result<Compiled, CompileError> {
    Compiler::new(model, config.clone())?.run()
}

pub fn compile_dd(model: &Model, config: &CompilerConfig) -> Result<Compiled, CompileError> {
    compile(
        model,
        &CompilerConfig {
            algorithm: Algorithm::Dd,
            ..config.clone()
        },
    )
}

pub fn compile_ddn(model: &Model, config: &CompilerConfig) -> Result<Compiled, CompileError> {
    compile(
        model,
        &CompilerConfig {
            algorithm: Algorithm::Ddn,
            ..config.clone()
        },
    )
}

/// First candidate in tie-break order whose score no later candidate
/// strictly beats.
fn select(candidates: Vec<Candidate>) -> Option<Candidate> {
    let mut best: Option<Candidate> = None;
    for c in candidates {
        if best.as_ref().is_none_or(|b| strictly_greater(c.score, b.score)) {
            best = Some(c);
        }
    }
    best
}

/// Evaluations memoized for the duration of one scoring pass, so that with
/// the engine cache off each path is still evaluated once per pass.
struct Evals<'a, 'm> {
    inference: &'a Inference<'m>,
    local: HashMap<EvidencePath, Arc<PathEvaluation>>,
}

impl<'a, 'm> Evals<'a, 'm> {
    fn new(inference: &'a Inference<'m>) -> Self {
        Evals {
            inference,
            local: HashMap::new(),
        }
    }

    fn get(&mut self, path: &EvidencePath) -> Result<Arc<PathEvaluation>, InferenceError> {
        if let Some(e) = self.local.get(path) {
            return Ok(Arc::clone(e));
        }
        let e = self.inference.evaluate(path)?;
        self.local.insert(path.clone(), Arc::clone(&e));
        Ok(e)
    }

    /// `(Σ eu_expand, Enode count)` over the Enodes `shape` would create at `path`.
    fn score(&mut self, path: &EvidencePath, shape: &Shape) -> Result<(f64, usize), InferenceError> {
        let mut sum = 0.0;
        let mut n = 0;
        for (p, item) in shape.enodes_with_paths(path) {
            sum += self.get(&p)?.eu_expand(item)?;
            n += 1;
        }
        Ok((sum, n))
    }
}

fn single_candidates(evals: &mut Evals, dnode: NodeId, path: &EvidencePath) -> Result<Vec<Candidate>, InferenceError> {
    let eval = evals.get(path)?;
    let cards = evals.inference.model().item_cards();
    path.unobserved()
        .map(|item| {
            Ok(Candidate {
                dnode,
                shape: Shape::single(item, cards[item]),
                score: eval.eu_expand(item)?,
            })
        })
        .collect()
}

fn subtree_candidates(
    evals: &mut Evals,
    dnode: NodeId,
    path: &EvidencePath,
    depth: usize,
    mode: Enumeration,
) -> Result<Vec<Candidate>, InferenceError> {
    let shapes = match mode {
        Enumeration::Exhaustive => exhaustive_shapes(evals, path, depth)?,
        Enumeration::Greedy => {
            let cards = evals.inference.model().item_cards();
            let mut shapes: Vec<Shape> = path.unobserved().map(|i| Shape::single(i, cards[i])).collect();
            if let Some(g) = greedy_shape(evals, path, depth)? {
                if !shapes.contains(&g) {
                    shapes.push(g);
                }
            }
            shapes
        }
    };
    let mut out = Vec::with_capacity(shapes.len());
    for shape in shapes {
        let (sum, n) = evals.score(path, &shape)?;
        out.push(Candidate {
            dnode,
            shape,
            score: sum / n as f64,
        });
    }
    out.sort_by(|a, b| {
        (a.shape.item, a.shape.depth(), a.shape.key()).cmp(&(b.shape.item, b.shape.depth(), b.shape.key()))
    });
    Ok(out)
}

/// Every legal shape of depth ≤ `depth` rooted at `path`. Branches with
/// probability zero or a complete path are never expanded further.
fn exhaustive_shapes(evals: &mut Evals, path: &EvidencePath, depth: usize) -> Result<Vec<Shape>, InferenceError> {
    let mut out = Vec::new();
    for item in path.unobserved().collect::<Vec<_>>() {
        out.extend(shapes_for_item(evals, path, item, depth)?);
    }
    Ok(out)
}

fn shapes_for_item(
    evals: &mut Evals,
    path: &EvidencePath,
    item: usize,
    depth: usize,
) -> Result<Vec<Shape>, InferenceError> {
    let eval = evals.get(path)?;
    let probs = eval.item(item)?.value_probs.clone();
    let mut per_value: Vec<Vec<Option<Shape>>> = Vec::with_capacity(probs.len());
    for (v, p) in probs.iter().enumerate() {
        let mut options = vec![None];
        let child = path.with(item, v);
        if depth > 1 && *p > 0.0 && !child.is_complete() {
            options.extend(exhaustive_shapes(evals, &child, depth - 1)?.into_iter().map(Some));
        }
        per_value.push(options);
    }
    let mut shapes = vec![Vec::new()];
    for options in per_value {
        shapes = shapes
            .into_iter()
            .flat_map(|prefix: Vec<Option<Shape>>| {
                options.iter().map(move |o| {
                    let mut p = prefix.clone();
                    p.push(o.clone());
                    p
                })
            })
            .collect();
    }
    Ok(shapes.into_iter().map(|branches| Shape { item, branches }).collect())
}

/// Prospective Enode of the greedy construction.
struct Grow {
    item: usize,
    gain: f64,
    children: Vec<Option<Grow>>,
}

impl Grow {
    fn totals(&self) -> (f64, usize) {
        self.children
            .iter()
            .flatten()
            .map(Grow::totals)
            .fold((self.gain, 1), |(s, n), (s2, n2)| (s + s2, n + n2))
    }

    fn depth(&self) -> usize {
        1 + self.children.iter().flatten().map(Grow::depth).max().unwrap_or(0)
    }

    /// Leaf Enodes at `level` (root is level 1) in preorder with their address.
    fn leaves_at(&self, level: usize, address: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, f64)>) {
        if level == 1 {
            if self.children.iter().all(Option::is_none) {
                out.push((address.clone(), self.gain));
            }
            return;
        }
        for (v, c) in self.children.iter().enumerate() {
            if let Some(c) = c {
                address.push(v);
                c.leaves_at(level - 1, address, out);
                address.pop();
            }
        }
    }

    fn remove(&mut self, address: &[usize]) {
        match address {
            [] => unreachable!("the root is never pruned"),
            [v] => self.children[*v] = None,
            [v, rest @ ..] => self.children[*v].as_mut().expect("address is live").remove(rest),
        }
    }

    fn into_shape(self) -> Shape {
        Shape {
            item: self.item,
            branches: self.children.into_iter().map(|c| c.map(Grow::into_shape)).collect(),
        }
    }
}

/// The greedy n-step expansion at `path`: max-evoi item at every level down
/// to `depth`, then pruned from the deepest level up by repeatedly removing
/// the smallest leaf whose `eu_expand` is below the current mean.
fn greedy_shape(evals: &mut Evals, path: &EvidencePath, depth: usize) -> Result<Option<Shape>, InferenceError> {
    let Some(mut root) = grow(evals, path, depth)? else {
        return Ok(None);
    };
    for level in (2..=root.depth()).rev() {
        loop {
            let (sum, n) = root.totals();
            let mean = sum / n as f64;
            let mut leaves = Vec::new();
            root.leaves_at(level, &mut Vec::new(), &mut leaves);
            let mut victim: Option<(Vec<usize>, f64)> = None;
            for (address, gain) in leaves {
                if strictly_greater(mean, gain) && victim.as_ref().is_none_or(|(_, g)| gain < *g) {
                    victim = Some((address, gain));
                }
            }
            match victim {
                Some((address, _)) => root.remove(&address),
                None => break,
            }
        }
    }
    Ok(Some(root.into_shape()))
}

fn grow(evals: &mut Evals, path: &EvidencePath, depth: usize) -> Result<Option<Grow>, InferenceError> {
    let candidates: Vec<usize> = path.unobserved().collect();
    if depth == 0 || candidates.is_empty() {
        return Ok(None);
    }
    let eval = evals.get(path)?;
    let (item, _) = eval.max_evoi(&candidates)?;
    let ext = eval.item(item)?;
    let mut children = Vec::with_capacity(ext.value_probs.len());
    for (v, &p) in ext.value_probs.iter().enumerate() {
        children.push(if p > 0.0 {
            grow(evals, &path.with(item, v), depth - 1)?
        } else {
            None
        });
    }
    Ok(Some(Grow {
        item,
        gain: ext.gain,
        children,
    }))
}

/// Unweighted mean of `eu_expand` over the Enodes `subtree` would create,
/// each against its own path.
pub fn mean_eu_expand(inference: &Inference, tree: &DTree, subtree: &ExpansionSubtree) -> Result<f64, TreeError> {
    let view = tree.view(subtree.target)?;
    if !view.node.is_open_dnode() {
        return Err(TreeError::ClosedNode(subtree.target.0));
    }
    check_shape(inference.model(), &view.path, &subtree.shape)?;
    let (sum, n) = Evals::new(inference).score(&view.path, &subtree.shape)?;
    Ok(sum / n as f64)
}

fn check_shape(model: &Model, path: &EvidencePath, shape: &Shape) -> Result<(), TreeError> {
    if shape.item >= model.item_count() || path.is_observed(shape.item) {
        return Err(TreeError::ItemAlreadyObserved(shape.item));
    }
    if shape.branches.len() != model.item_card(shape.item) {
        return Err(TreeError::ShapeArity {
            item: shape.item,
            expected: model.item_card(shape.item),
        });
    }
    for (v, b) in shape.branches.iter().enumerate() {
        if let Some(s) = b {
            check_shape(model, &path.with(shape.item, v), s)?;
        }
    }
    Ok(())
}

/// Candidate subtrees at an open Dnode. Greedy mode yields every single item
/// plus the greedy n-step expansion; exhaustive mode yields every legal
/// shape of depth ≤ `depth`. Sorted in tie-break order.
pub fn enumerate_candidates(
    inference: &Inference,
    tree: &DTree,
    dnode: NodeId,
    depth: usize,
    mode: Enumeration,
) -> Result<Vec<ExpansionSubtree>, TreeError> {
    let view = tree.view(dnode)?;
    if !view.node.is_open_dnode() {
        return Err(TreeError::ClosedNode(dnode.0));
    }
    let mut evals = Evals::new(inference);
    Ok(subtree_candidates(&mut evals, dnode, &view.path, depth.max(1), mode)?
        .into_iter()
        .map(|c| ExpansionSubtree {
            target: dnode,
            shape: c.shape,
        })
        .collect())
}
