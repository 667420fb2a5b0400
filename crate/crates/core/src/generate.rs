//! Random networks, DAGs and evidence for randomized tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::network::{Evidence, Network, NodeSpec};

#[derive(Debug, Clone, Copy)]
pub struct NetworkShape {
    pub nodes: usize,
    pub max_states: usize,
    pub max_parents: usize,
    pub edge_prob: f64,
}

impl Default for NetworkShape {
    fn default() -> Self {
        NetworkShape {
            nodes: 8,
            max_states: 3,
            max_parents: 3,
            edge_prob: 0.4,
        }
    }
}

/// Parent lists of a random DAG; node `i` only takes parents `< i`.
pub fn random_dag<R: Rng + ?Sized>(rng: &mut R, nodes: usize, edge_prob: f64, max_parents: usize) -> Vec<Vec<usize>> {
    (0..nodes)
        .map(|i| {
            let mut cand: Vec<usize> = (0..i).filter(|_| rng.random_bool(edge_prob)).collect();
            cand.shuffle(rng);
            cand.truncate(max_parents);
            cand.sort_unstable();
            cand
        })
        .collect()
}

/// Probability row drawn uniformly from the simplex.
pub fn random_row<R: Rng + ?Sized>(rng: &mut R, width: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..width).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / sum).collect()
}

/// Random network named `N0..`, declared in a shuffled order so the
/// topological sort is exercised.
pub fn random_network<R: Rng + ?Sized>(rng: &mut R, shape: NetworkShape) -> Network {
    let dag = random_dag(rng, shape.nodes, shape.edge_prob, shape.max_parents);
    let cards: Vec<usize> = (0..shape.nodes)
        .map(|_| rng.random_range(2..=shape.max_states.max(2)))
        .collect();
    let mut specs: Vec<NodeSpec> = dag
        .iter()
        .enumerate()
        .map(|(i, parents)| {
            let rows: usize = parents.iter().map(|&p| cards[p]).product();
            NodeSpec {
                name: format!("N{i}"),
                states: (0..cards[i]).map(|s| format!("s{s}")).collect(),
                parents: parents.iter().map(|p| format!("N{p}")).collect(),
                cpt: (0..rows).map(|_| random_row(rng, cards[i])).collect(),
            }
        })
        .collect();
    specs.shuffle(rng);
    Network::build(specs).expect("generated network is valid")
}

/// Observes up to `max_observed` random nodes, avoiding `exclude`.
pub fn random_evidence<R: Rng + ?Sized>(rng: &mut R, net: &Network, max_observed: usize, exclude: &[&str]) -> Evidence {
    let mut names: Vec<&str> = net
        .nodes()
        .iter()
        .map(|n| n.name.as_str())
        .filter(|n| !exclude.contains(n))
        .collect();
    names.shuffle(rng);
    let k = rng.random_range(0..=max_observed.min(names.len()));
    names[..k]
        .iter()
        .map(|n| {
            let spec = net.node(n).expect("node exists");
            let s = rng.random_range(0..spec.states.len());
            (n.to_string(), spec.states[s].clone())
        })
        .collect()
}
