//! Exact inference by variable elimination, plus brute-force enumeration of
//! the joint used as a ground-truth oracle.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factor::{Factor, Potential};
use crate::network::{Evidence, Network, NetworkError};

/// Largest joint table `enumerate_joint` will materialize.
pub const ENUMERATION_LIMIT: u128 = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("evidence has zero probability under the model")]
    ZeroProbabilityEvidence,
    #[error("joint state space has {0} entries, above the enumeration limit")]
    StateSpaceTooLarge(u128),
    #[error("evidence is inconsistent: every joint state has zero mass")]
    InconsistentEvidence,
    #[error("no query targets given")]
    EmptyTargets,
    #[error("target `{0}` is also observed")]
    TargetObserved(String),
    #[error("invalid elimination order: {0}")]
    InvalidOrder(String),
}

/// Normalized marginal of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDistribution {
    pub node: String,
    pub states: Vec<String>,
    pub probabilities: Vec<f64>,
}

impl PosteriorDistribution {
    pub fn probability(&self, state: &str) -> Option<f64> {
        self.states
            .iter()
            .position(|s| s == state)
            .map(|i| self.probabilities[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.states
            .iter()
            .map(String::as_str)
            .zip(self.probabilities.iter().copied())
    }
}

/// Full joint over the unobserved nodes (topological order), consistent
/// with `evidence` and unnormalized.
pub fn enumerate_joint(net: &Network, evidence: &Evidence) -> Result<Factor, InferError> {
    let ev = net.resolve(evidence)?;
    let mut fixed: Vec<Option<usize>> = vec![None; net.len()];
    for &(v, s) in &ev {
        fixed[v] = Some(s);
    }
    let free: Vec<usize> = net
        .topological_ids()
        .iter()
        .copied()
        .filter(|&v| fixed[v].is_none())
        .collect();
    let size = free
        .iter()
        .fold(1u128, |acc, &v| acc.saturating_mul(net.cardinality(v) as u128));
    if size > ENUMERATION_LIMIT {
        return Err(InferError::StateSpaceTooLarge(size));
    }
    let cards: Vec<usize> = free.iter().map(|&v| net.cardinality(v)).collect();
    let mut state: Vec<usize> = fixed.iter().map(|s| s.unwrap_or(0)).collect();
    let mut table = Vec::with_capacity(size as usize);
    let mut assign = vec![0usize; free.len()];
    for _ in 0..size {
        for (k, &v) in free.iter().enumerate() {
            state[v] = assign[k];
        }
        let mut p = 1.0;
        for v in 0..net.len() {
            let mut row = 0;
            for &q in net.parent_ids(v) {
                row = row * net.cardinality(q) + state[q];
            }
            p *= net.spec(v).cpt[row][state[v]];
            if p == 0.0 {
                break;
            }
        }
        table.push(p);
        for k in (0..free.len()).rev() {
            assign[k] += 1;
            if assign[k] < cards[k] {
                break;
            }
            assign[k] = 0;
        }
    }
    if table.iter().all(|&x| x == 0.0) {
        return Err(InferError::InconsistentEvidence);
    }
    Ok(Factor {
        scope: free.iter().map(|&v| net.name(v).to_string()).collect(),
        cards,
        table,
    })
}

/// Exact marginal posterior of each target given `evidence`.
pub fn posterior(
    net: &Network,
    targets: &[&str],
    evidence: &Evidence,
) -> Result<Vec<PosteriorDistribution>, InferError> {
    if targets.is_empty() {
        return Err(InferError::EmptyTargets);
    }
    let ev = net.resolve(evidence)?;
    targets
        .iter()
        .map(|t| {
            let id = check_target(net, t, evidence)?;
            let pot = eliminate(net, &[id], &ev, None)?;
            Ok(to_posterior(net, id, pot.table))
        })
        .collect()
}

/// Posterior of `target` eliminating variables in the given order, which
/// must be a permutation of `elimination_order(net, [target], evidence)`.
pub fn posterior_with_order(
    net: &Network,
    target: &str,
    evidence: &Evidence,
    order: &[&str],
) -> Result<PosteriorDistribution, InferError> {
    let ev = net.resolve(evidence)?;
    let id = check_target(net, target, evidence)?;
    let ids: Vec<usize> = order.iter().map(|n| net.id(n)).collect::<Result<_, _>>()?;
    let pot = eliminate(net, &[id], &ev, Some(&ids))?;
    Ok(to_posterior(net, id, pot.table))
}

/// Normalized joint posterior over `nodes` (in the given order).
pub fn joint_posterior(net: &Network, nodes: &[&str], evidence: &Evidence) -> Result<Factor, InferError> {
    if nodes.is_empty() {
        return Err(InferError::EmptyTargets);
    }
    let ev = net.resolve(evidence)?;
    let mut ids = Vec::with_capacity(nodes.len());
    for n in nodes {
        let id = check_target(net, n, evidence)?;
        if ids.contains(&id) {
            return Err(NetworkError::OverlappingSets(n.to_string()).into());
        }
        ids.push(id);
    }
    let pot = eliminate(net, &ids, &ev, None)?;
    Ok(Factor {
        scope: ids.iter().map(|&v| net.name(v).to_string()).collect(),
        cards: pot.cards,
        table: pot.table,
    })
}

/// Min-fill elimination order (ties broken by node name) over the nodes
/// that must be summed out to answer a query on `targets`.
pub fn elimination_order(net: &Network, targets: &[&str], evidence: &Evidence) -> Result<Vec<String>, InferError> {
    let ev = net.resolve(evidence)?;
    let keep: Vec<usize> = targets.iter().map(|t| net.id(t)).collect::<Result<_, _>>()?;
    let factors = initial_factors(net, &keep, &ev);
    let elim = eliminable(net, &keep, &ev);
    Ok(min_fill(net, &factors, &elim)
        .into_iter()
        .map(|v| net.name(v).to_string())
        .collect())
}

fn check_target(net: &Network, name: &str, evidence: &Evidence) -> Result<usize, InferError> {
    let id = net.id(name)?;
    if evidence.contains(name) {
        return Err(InferError::TargetObserved(name.to_string()));
    }
    Ok(id)
}

fn to_posterior(net: &Network, id: usize, probabilities: Vec<f64>) -> PosteriorDistribution {
    PosteriorDistribution {
        node: net.name(id).to_string(),
        states: net.spec(id).states.clone(),
        probabilities,
    }
}

/// Nodes that influence a query on `keep` given `ev`: the ancestral closure.
fn relevant(net: &Network, keep: &[usize], ev: &[(usize, usize)]) -> Vec<bool> {
    net.ancestral_set(keep.iter().copied().chain(ev.iter().map(|&(v, _)| v)))
}

fn eliminable(net: &Network, keep: &[usize], ev: &[(usize, usize)]) -> Vec<usize> {
    let rel = relevant(net, keep, ev);
    (0..net.len())
        .filter(|&v| rel[v] && !keep.contains(&v) && !ev.iter().any(|&(e, _)| e == v))
        .collect()
}

fn initial_factors(net: &Network, keep: &[usize], ev: &[(usize, usize)]) -> Vec<Potential> {
    let rel = relevant(net, keep, ev);
    (0..net.len())
        .filter(|&v| rel[v])
        .map(|v| {
            let mut scope: Vec<usize> = net.parent_ids(v).to_vec();
            scope.push(v);
            let cards = scope.iter().map(|&u| net.cardinality(u)).collect();
            let mut pot = Potential::new(scope, cards, net.flat_cpt(v));
            for &(e, s) in ev {
                if pot.contains(e) {
                    pot = pot.reduce(e, s);
                }
            }
            pot
        })
        .collect()
}

pub(crate) fn min_fill(net: &Network, factors: &[Potential], elim: &[usize]) -> Vec<usize> {
    let n = net.len();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for f in factors {
        for &a in &f.scope {
            for &b in &f.scope {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
    }
    let mut remaining: BTreeSet<usize> = elim.iter().copied().collect();
    let mut order = Vec::with_capacity(elim.len());
    while !remaining.is_empty() {
        let mut best: Option<(usize, &str, usize)> = None;
        for &v in &remaining {
            let nb: Vec<usize> = adj[v].iter().copied().collect();
            let mut fill = 0;
            for i in 0..nb.len() {
                for j in i + 1..nb.len() {
                    if !adj[nb[i]].contains(&nb[j]) {
                        fill += 1;
                    }
                }
            }
            let name = net.name(v);
            let better = match best {
                None => true,
                Some((bf, bn, _)) => fill < bf || (fill == bf && name < bn),
            };
            if better {
                best = Some((fill, name, v));
            }
        }
        let (_, _, v) = best.expect("nonempty");
        let nb: Vec<usize> = adj[v].iter().copied().collect();
        for &a in &nb {
            for &b in &nb {
                if a != b {
                    adj[a].insert(b);
                }
            }
            adj[a].remove(&v);
        }
        adj[v].clear();
        remaining.remove(&v);
        order.push(v);
    }
    order
}

/// Variable elimination returning the normalized joint over `keep`.
pub(crate) fn eliminate(
    net: &Network,
    keep: &[usize],
    ev: &[(usize, usize)],
    order: Option<&[usize]>,
) -> Result<Potential, InferError> {
    let mut factors = initial_factors(net, keep, ev);
    let elim = eliminable(net, keep, ev);
    let order = match order {
        Some(o) => {
            let given: BTreeSet<usize> = o.iter().copied().collect();
            let expected: BTreeSet<usize> = elim.iter().copied().collect();
            if given.len() != o.len() || given != expected {
                return Err(InferError::InvalidOrder(format!(
                    "expected a permutation of [{}]",
                    elim.iter().map(|&v| net.name(v)).collect::<Vec<_>>().join(", ")
                )));
            }
            o.to_vec()
        }
        None => min_fill(net, &factors, &elim),
    };
    for v in order {
        let (with, without): (Vec<Potential>, Vec<Potential>) = factors.into_iter().partition(|f| f.contains(v));
        factors = without;
        let Some(first) = with.first() else { continue };
        let product = with[1..].iter().fold(first.clone(), |acc, f| acc.product(f));
        let mut summed = product.sum_out(v);
        summed.normalize();
        factors.push(summed);
    }
    let mut joint = factors.iter().fold(Potential::scalar(1.0), |acc, f| acc.product(f));
    joint = joint.permute(keep);
    let total = joint.normalize();
    if !(total > 0.0) || !total.is_finite() {
        return Err(InferError::ZeroProbabilityEvidence);
    }
    Ok(joint)
}
