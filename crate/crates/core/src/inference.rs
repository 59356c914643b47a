//! Exact inference by enumeration over the joint chance space.
//!
//! On construction the joint is folded once into a table keyed by evidence
//! state: for each state `s` we keep `P(s)` and `W(s, d) = Σ_h P(s, h)·U(h, s, d)`
//! over the hidden configurations `h`. Every query afterwards is a sum over
//! the evidence states consistent with a path.
//!
//! A *network evaluation* ([`Inference::evaluate`]) is one pass over that
//! table for a path `p`. It yields `dec(p)` and, for every unobserved item
//! `E` and value `e`, `P(p ∪ {E=e})` and `dec(p ∪ {E=e})`, which is all that
//! `evoi` and `eu_expand` need. Each evaluation bumps the [`InferenceCounter`]
//! exactly once; cache hits do not.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::InferenceError;
use crate::model::{EvidencePath, Model};

/// Relative tolerance used when deciding that two expected utilities tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// `a` beats `b` by more than float noise.
pub fn strictly_greater(a: f64, b: f64) -> bool {
    a > b + TIE_TOLERANCE * b.abs().max(1.0)
}

/// The maximum expected utility decisions for a path, in declaration order,
/// with their common (conditional) expected utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSet {
    pub decisions: Vec<usize>,
    pub eu: f64,
}

impl DecisionSet {
    /// The single decision a consumer acts on.
    pub fn first(&self) -> usize {
        self.decisions[0]
    }

    /// Builds the argmax set from unconditional weights `W(p, d)` and `P(p)`.
    fn from_weights(weights: &[f64], prob: f64) -> DecisionSet {
        let eus: Vec<f64> = weights.iter().map(|w| w / prob).collect();
        let best = eus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let decisions = eus
            .iter()
            .enumerate()
            .filter(|(_, &eu)| !strictly_greater(best, eu))
            .map(|(d, _)| d)
            .collect();
        DecisionSet { decisions, eu: best }
    }
}

#[derive(Debug, Default)]
pub struct InferenceCounter {
    calls: AtomicU64,
}

impl InferenceCounter {
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    fn increment(&self) {
        self.calls.fetch_add(1, Ordering::SeqCst);
    }
}

/// What one network evaluation knows about a single unobserved item.
#[derive(Debug, Clone)]
pub struct ItemEvaluation {
    /// `P(path ∪ {E=e})` per value.
    pub value_probs: Vec<f64>,
    /// `dec(path ∪ {E=e})` per value; `None` where that branch has probability 0.
    pub value_best: Vec<Option<DecisionSet>>,
    /// `eu_expand = P(path)·evoi(E|path) = Σ_e max_d W(path∪{E=e}, d) − max_d W(path, d)`.
    pub gain: f64,
}

#[derive(Debug, Clone)]
pub struct PathEvaluation {
    pub path: EvidencePath,
    pub prob: f64,
    pub best: DecisionSet,
    /// Indexed by item; `None` for items already on the path.
    pub items: Vec<Option<ItemEvaluation>>,
}

impl PathEvaluation {
    pub fn item(&self, item: usize) -> Result<&ItemEvaluation, InferenceError> {
        self.items[item]
            .as_ref()
            .ok_or(InferenceError::ItemAlreadyObserved(item))
    }

    pub fn evoi(&self, item: usize) -> Result<f64, InferenceError> {
        Ok(self.item(item)?.gain / self.prob)
    }

    pub fn eu_expand(&self, item: usize) -> Result<f64, InferenceError> {
        Ok(self.item(item)?.gain)
    }

    /// Max-evoi item among `candidates`; ties go to the earliest candidate.
    pub fn max_evoi(&self, candidates: &[usize]) -> Result<(usize, f64), InferenceError> {
        let mut best: Option<(usize, f64)> = None;
        for &c in candidates {
            let g = self.item(c)?.gain;
            if best.is_none_or(|(_, b)| strictly_greater(g, b)) {
                best = Some((c, g));
            }
        }
        let (item, gain) = best.ok_or(InferenceError::NoCandidates)?;
        Ok((item, gain / self.prob))
    }
}

struct StateRow {
    values: Vec<usize>,
    prob: f64,
    weights: Vec<f64>,
}

/// Inference engine over one model. `Sync`: evaluations may run concurrently
/// and the counter stays exact.
pub struct Inference<'m> {
    model: &'m Model,
    rows: Vec<StateRow>,
    counter: InferenceCounter,
    cache: Option<Mutex<HashMap<EvidencePath, Arc<PathEvaluation>>>>,
}

impl<'m> Inference<'m> {
    /// Engine with evaluation memoization enabled.
    pub fn new(model: &'m Model) -> Self {
        Inference::with_cache(model, true)
    }

    pub fn with_cache(model: &'m Model, cache: bool) -> Self {
        let cards = model.item_cards();
        let n_states: usize = cards.iter().product();
        let alts = model.alternative_count();
        let mut prob = vec![0.0; n_states];
        let mut weights = vec![vec![0.0; alts]; n_states];
        model.for_each_chance_assignment(|assignment| {
            let p = model.joint_prob(assignment);
            if p == 0.0 {
                return;
            }
            let mut s = 0usize;
            for (i, &c) in cards.iter().enumerate() {
                s = s * c + assignment[model.item_node(i)];
            }
            prob[s] += p;
            for (d, w) in weights[s].iter_mut().enumerate() {
                *w += p * model.utility(assignment, d);
            }
        });
        let mut rows = Vec::with_capacity(n_states);
        let mut idx = 0usize;
        crate::model::for_each_assignment(&cards, |values| {
            rows.push(StateRow {
                values: values.to_vec(),
                prob: prob[idx],
                weights: std::mem::take(&mut weights[idx]),
            });
            idx += 1;
        });
        Inference {
            model,
            rows,
            counter: InferenceCounter::default(),
            cache: cache.then(|| Mutex::new(HashMap::new())),
        }
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }

    pub fn counter(&self) -> &InferenceCounter {
        &self.counter
    }

    pub fn caching(&self) -> bool {
        self.cache.is_some()
    }

    pub fn is_cached(&self, path: &EvidencePath) -> bool {
        self.cache
            .as_ref()
            .is_some_and(|c| c.lock().unwrap().contains_key(path))
    }

    pub fn joint_prob(&self, assignment: &[usize]) -> f64 {
        self.model.joint_prob(assignment)
    }

    pub fn prob_of_path(&self, path: &EvidencePath) -> f64 {
        self.rows
            .iter()
            .filter(|r| path.consistent_with(&r.values))
            .map(|r| r.prob)
            .sum()
    }

    /// `Σ_{s ⊨ path} W(s, decision)`: unconditional expected utility mass.
    pub fn weighted_utility(&self, decision: usize, path: &EvidencePath) -> f64 {
        self.rows
            .iter()
            .filter(|r| path.consistent_with(&r.values))
            .map(|r| r.weights[decision])
            .sum()
    }

    pub fn expected_utility(&self, decision: usize, path: &EvidencePath) -> Result<f64, InferenceError> {
        let p = self.prob_of_path(path);
        if p == 0.0 {
            return Err(InferenceError::ZeroProbabilityPath);
        }
        Ok(self.weighted_utility(decision, path) / p)
    }

    /// One network evaluation at `path` (memoized when caching is on).
    pub fn evaluate(&self, path: &EvidencePath) -> Result<Arc<PathEvaluation>, InferenceError> {
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.lock().unwrap().get(path) {
                return Ok(Arc::clone(hit));
            }
        }
        let eval = Arc::new(self.compute(path)?);
        if let Some(cache) = &self.cache {
            cache
                .lock()
                .unwrap()
                .entry(path.clone())
                .or_insert_with(|| Arc::clone(&eval));
        }
        Ok(eval)
    }

    fn compute(&self, path: &EvidencePath) -> Result<PathEvaluation, InferenceError> {
        self.counter.increment();
        let model = self.model;
        let alts = model.alternative_count();
        let n_items = model.item_count();
        let mut prob = 0.0;
        let mut weights = vec![0.0; alts];
        // per item, per value: probability and weights
        let mut ext: Vec<Option<(Vec<f64>, Vec<Vec<f64>>)>> = (0..n_items)
            .map(|i| {
                (!path.is_observed(i)).then(|| {
                    let card = model.item_card(i);
                    (vec![0.0; card], vec![vec![0.0; alts]; card])
                })
            })
            .collect();
        for row in self.rows.iter().filter(|r| path.consistent_with(&r.values)) {
            prob += row.prob;
            for (acc, w) in weights.iter_mut().zip(&row.weights) {
                *acc += w;
            }
            for (i, slot) in ext.iter_mut().enumerate() {
                if let Some((probs, ws)) = slot {
                    let v = row.values[i];
                    probs[v] += row.prob;
                    for (acc, w) in ws[v].iter_mut().zip(&row.weights) {
                        *acc += w;
                    }
                }
            }
        }
        if prob == 0.0 {
            return Err(InferenceError::ZeroProbabilityPath);
        }
        let current = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let items = ext
            .into_iter()
            .map(|slot| {
                slot.map(|(value_probs, ws)| {
                    let mut informed = 0.0;
                    let value_best = value_probs
                        .iter()
                        .zip(&ws)
                        .map(|(&p, w)| {
                            if p == 0.0 {
                                return None;
                            }
                            informed += w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                            Some(DecisionSet::from_weights(w, p))
                        })
                        .collect();
                    ItemEvaluation {
                        value_probs,
                        value_best,
                        gain: informed - current,
                    }
                })
            })
            .collect();
        Ok(PathEvaluation {
            path: path.clone(),
            prob,
            best: DecisionSet::from_weights(&weights, prob),
            items,
        })
    }

    pub fn best_decisions(&self, path: &EvidencePath) -> Result<DecisionSet, InferenceError> {
        Ok(self.evaluate(path)?.best.clone())
    }

    /// `Σ_e P(E=e|path)·EU[dec(path ∪ {E=e})] − EU[dec(path)]`.
    pub fn evoi(&self, item: usize, path: &EvidencePath) -> Result<f64, InferenceError> {
        if path.is_observed(item) {
            return Err(InferenceError::ItemAlreadyObserved(item));
        }
        self.evaluate(path)?.evoi(item)
    }

    pub fn max_evoi(&self, path: &EvidencePath, candidates: &[usize]) -> Result<(usize, f64), InferenceError> {
        if candidates.is_empty() {
            return Err(InferenceError::NoCandidates);
        }
        if let Some(&c) = candidates.iter().find(|&&c| path.is_observed(c)) {
            return Err(InferenceError::ItemAlreadyObserved(c));
        }
        self.evaluate(path)?.max_evoi(candidates)
    }

    /// `P(path)·evoi(item|path)`; zero on a zero-probability path.
    pub fn eu_expand(&self, path: &EvidencePath, item: usize) -> Result<f64, InferenceError> {
        if path.is_observed(item) {
            return Err(InferenceError::ItemAlreadyObserved(item));
        }
        match self.evaluate(path) {
            Ok(eval) => eval.eu_expand(item),
            Err(InferenceError::ZeroProbabilityPath) => Ok(0.0),
            Err(e) => Err(e),
        }
    }
}
