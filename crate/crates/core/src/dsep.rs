//! d-separation by the active-trail reachability walk.

use std::collections::BTreeSet;

use crate::network::{Network, NetworkError};

fn resolve_set(net: &Network, names: &[&str]) -> Result<BTreeSet<usize>, NetworkError> {
    names.iter().map(|n| net.id(n)).collect()
}

/// True iff every trail between `x` and `y` is blocked given `z`.
pub fn d_separated(net: &Network, x: &[&str], y: &[&str], z: &[&str]) -> Result<bool, NetworkError> {
    let xs = resolve_set(net, x)?;
    let ys = resolve_set(net, y)?;
    let zs = resolve_set(net, z)?;
    for (a, b) in [(&xs, &ys), (&xs, &zs), (&ys, &zs)] {
        if let Some(&v) = a.intersection(b).next() {
            return Err(NetworkError::OverlappingSets(net.name(v).to_string()));
        }
    }
    let reach = reachable(net, &xs, &zs);
    Ok(ys.iter().all(|&v| !reach[v]))
}

/// Nodes reachable from `sources` along active trails given `observed`.
pub(crate) fn reachable(net: &Network, sources: &BTreeSet<usize>, observed: &BTreeSet<usize>) -> Vec<bool> {
    let n = net.len();
    let mut is_obs = vec![false; n];
    for &o in observed {
        is_obs[o] = true;
    }
    // Observed nodes and their ancestors: colliders there are open.
    let anc = net.ancestral_set(observed.iter().copied());

    const UP: usize = 0; // arrived from a child
    const DOWN: usize = 1; // arrived from a parent
    let mut visited = vec![[false; 2]; n];
    let mut reach = vec![false; n];
    let mut stack: Vec<(usize, usize)> = sources.iter().map(|&s| (s, UP)).collect();
    while let Some((v, dir)) = stack.pop() {
        if visited[v][dir] {
            continue;
        }
        visited[v][dir] = true;
        if !is_obs[v] {
            reach[v] = true;
        }
        if dir == UP && !is_obs[v] {
            stack.extend(net.parent_ids(v).iter().map(|&p| (p, UP)));
            stack.extend(net.child_ids(v).iter().map(|&c| (c, DOWN)));
        } else if dir == DOWN {
            if !is_obs[v] {
                stack.extend(net.child_ids(v).iter().map(|&c| (c, DOWN)));
            }
            if anc[v] {
                stack.extend(net.parent_ids(v).iter().map(|&p| (p, UP)));
            }
        }
    }
    reach
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NodeSpec;

    fn node(name: &str, parents: &[&str]) -> NodeSpec {
        let rows = 1usize << parents.len();
        NodeSpec::new(name, &["0", "1"], parents, vec![vec![0.5, 0.5]; rows])
    }

    #[test]
    fn chain_blocked_by_middle() {
        let net = Network::build(vec![node("A", &[]), node("B", &["A"]), node("C", &["B"])]).unwrap();
        assert!(d_separated(&net, &["A"], &["C"], &["B"]).unwrap());
        assert!(!d_separated(&net, &["A"], &["C"], &[]).unwrap());
    }

    #[test]
    fn collider_opens_on_observation() {
        let net = Network::build(vec![
            node("A", &[]),
            node("B", &[]),
            node("C", &["A", "B"]),
            node("D", &["C"]),
        ])
        .unwrap();
        assert!(d_separated(&net, &["A"], &["B"], &[]).unwrap());
        assert!(!d_separated(&net, &["A"], &["B"], &["C"]).unwrap());
        // a descendant of the collider opens it too
        assert!(!d_separated(&net, &["A"], &["B"], &["D"]).unwrap());
    }

    #[test]
    fn fork_blocked_by_root() {
        let net = Network::build(vec![node("R", &[]), node("X", &["R"]), node("Y", &["R"])]).unwrap();
        assert!(!d_separated(&net, &["X"], &["Y"], &[]).unwrap());
        assert!(d_separated(&net, &["X"], &["Y"], &["R"]).unwrap());
    }

    #[test]
    fn errors() {
        let net = Network::build(vec![node("A", &[]), node("B", &["A"])]).unwrap();
        assert!(matches!(
            d_separated(&net, &["A"], &["Q"], &[]),
            Err(NetworkError::UnknownNode(_))
        ));
        assert!(matches!(
            d_separated(&net, &["A"], &["B"], &["A"]),
            Err(NetworkError::OverlappingSets(_))
        ));
    }
}
