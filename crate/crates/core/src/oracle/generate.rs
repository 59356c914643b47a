use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::model::{ChanceNode, DecisionNode, InfluenceDiagram, ValueNode};

/// Parameters for [`generate_network`]. Ranges are inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkGenSpec {
    pub seed: u64,
    pub hidden: (usize, usize),
    pub hidden_card: (usize, usize),
    pub items: (usize, usize),
    pub item_card: (usize, usize),
    pub alternatives: (usize, usize),
    pub utility_range: (f64, f64),
    /// Symmetric Dirichlet concentration for CPT rows; small values give
    /// sharp rows.
    pub concentration: f64,
}

impl Default for NetworkGenSpec {
    fn default() -> Self {
        NetworkGenSpec {
            seed: 0,
            hidden: (1, 3),
            hidden_card: (2, 3),
            items: (1, 5),
            item_card: (2, 3),
            alternatives: (2, 3),
            utility_range: (0.0, 1.0),
            concentration: 1.0,
        }
    }
}

impl NetworkGenSpec {
    pub fn with_seed(seed: u64) -> Self {
        NetworkGenSpec {
            seed,
            ..Default::default()
        }
    }

    /// Oracle-searchable size: at most three items of at most three values.
    pub fn tiny(seed: u64) -> Self {
        NetworkGenSpec {
            seed,
            items: (1, 3),
            ..Default::default()
        }
    }
}

fn pick(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)) -> usize {
    rng.random_range(lo..=hi.max(lo))
}

fn row(rng: &mut ChaCha8Rng, gamma: &Gamma<f64>, card: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..card).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return vec![1.0 / card as f64; card];
    }
    draws.iter().map(|x| x / total).collect()
}

/// Random valid influence diagram, deterministic in `spec.seed`.
///
/// Hidden nodes `H0..` may depend on earlier hidden nodes; evidence items
/// `E0..` depend on one or two hidden nodes and sometimes on an earlier
/// item; utility depends on the decision and a nonempty set of hidden nodes.
pub fn generate_network(spec: &NetworkGenSpec) -> InfluenceDiagram {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gamma = Gamma::new(spec.concentration.max(1e-6), 1.0).expect("positive shape");
    let n_hidden = pick(&mut rng, spec.hidden).max(1);
    let n_items = pick(&mut rng, spec.items);
    let n_alts = pick(&mut rng, spec.alternatives).max(1);

    let mut nodes: Vec<ChanceNode> = Vec::new();
    let mut cards: Vec<usize> = Vec::new();
    let mut add = |rng: &mut ChaCha8Rng, nodes: &mut Vec<ChanceNode>, name: String, card: usize, parents: Vec<usize>| {
        let rows: usize = parents.iter().map(|&p| cards[p]).product();
        let cpt = (0..rows).flat_map(|_| row(rng, &gamma, card)).collect();
        let prefix = &name[..1].to_lowercase();
        nodes.push(ChanceNode {
            values: (1..=card).map(|v| format!("{prefix}{}_{v}", &name[1..])).collect(),
            parents: parents.iter().map(|&p| nodes[p].name.clone()).collect(),
            name,
            cpt,
        });
        cards.push(card);
    };

    for h in 0..n_hidden {
        let card = pick(&mut rng, spec.hidden_card);
        let parents = if h > 0 && rng.random_bool(0.5) {
            vec![rng.random_range(0..h)]
        } else {
            Vec::new()
        };
        add(&mut rng, &mut nodes, format!("H{h}"), card, parents);
    }
    for e in 0..n_items {
        let card = pick(&mut rng, spec.item_card);
        let k = if n_hidden > 1 && rng.random_bool(0.4) { 2 } else { 1 };
        let mut parents: Vec<usize> = sample(&mut rng, n_hidden, k).into_iter().collect();
        parents.sort_unstable();
        if e > 0 && rng.random_bool(0.3) {
            parents.push(n_hidden + rng.random_range(0..e));
        }
        add(&mut rng, &mut nodes, format!("E{e}"), card, parents);
    }

    let k = rng.random_range(1..=n_hidden.min(2));
    let mut vparents: Vec<usize> = sample(&mut rng, n_hidden, k).into_iter().collect();
    vparents.sort_unstable();
    let rows: usize = n_alts * vparents.iter().map(|&p| nodes[p].values.len()).product::<usize>();
    let (lo, hi) = spec.utility_range;
    let utility = (0..rows)
        .map(|_| if hi > lo { rng.random_range(lo..hi) } else { lo })
        .collect();

    InfluenceDiagram {
        decision: DecisionNode {
            name: "D".into(),
            alternatives: (1..=n_alts).map(|a| format!("d{a}")).collect(),
            observed: (0..n_items).map(|e| format!("E{e}")).collect(),
        },
        value: ValueNode {
            parents: std::iter::once("D".to_string())
                .chain(vparents.iter().map(|&p| nodes[p].name.clone()))
                .collect(),
            utility,
        },
        chance_nodes: nodes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate, Model};

    #[test]
    fn deterministic_in_seed() {
        let a = generate_network(&NetworkGenSpec::with_seed(7));
        let b = generate_network(&NetworkGenSpec::with_seed(7));
        assert_eq!(a.to_canonical_json(), b.to_canonical_json());
        let c = generate_network(&NetworkGenSpec::with_seed(8));
        assert_ne!(a.to_canonical_json(), c.to_canonical_json());
    }

    #[test]
    fn item_count_follows_spec() {
        let spec = NetworkGenSpec {
            items: (2, 2),
            ..NetworkGenSpec::with_seed(3)
        };
        let m = Model::new(generate_network(&spec)).unwrap();
        assert_eq!(m.item_count(), 2);
    }

    #[test]
    fn hundred_seeds_validate() {
        for seed in 0..100 {
            for concentration in [0.1, 1.0] {
                let spec = NetworkGenSpec {
                    concentration,
                    ..NetworkGenSpec::with_seed(seed)
                };
                let d = generate_network(&spec);
                let report = validate(&d);
                assert!(report.is_valid(), "seed {seed}: {:?}", report.violations);
            }
        }
    }
}
