//! Brute-force oracle checks shared by the core test suite and the
//! acceptance target. Each check panics on the first mismatch.

use std::collections::BTreeSet;

use ibn_core::analysis::sensitivity_ranking;
use ibn_core::compose::{Binding, BindingSource, InputSpec, Instance, OobnClass, OobnModel};
use ibn_core::dbn::{DbnTemplate, InterEdge};
use ibn_core::generate::{random_dag, random_evidence, random_network, random_row, NetworkShape};
use ibn_core::infer::posterior_with_order;
use ibn_core::{d_separated, elimination_order, enumerate_joint, posterior, Evidence, Execution, Network, NodeSpec};
use ibn_oracles::{dsep_by_moralization, induced_width, optimal_induced_width, pair_table};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn shape(nodes: usize) -> NetworkShape {
    NetworkShape {
        nodes,
        max_states: 3,
        max_parents: 3,
        edge_prob: 0.4,
    }
}

fn index_of(name: &str) -> usize {
    name[1..].parse().unwrap()
}

/// Normalized marginals of every free node from the full joint.
fn enumerated_marginal(net: &Network, ev: &Evidence, node: &str) -> Vec<f64> {
    let joint = enumerate_joint(net, ev).unwrap().normalized();
    joint.marginal(node).unwrap()
}

fn assert_close(a: &[f64], b: &[f64], tol: f64, what: &str) {
    assert_eq!(a.len(), b.len(), "{what}");
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol, "{what}: {a:?} vs {b:?}");
    }
}

pub fn posterior_matches_enumeration(cases: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..cases {
        let n = rng.random_range(1..=10);
        let net = random_network(&mut rng, shape(n));
        let ev = random_evidence(&mut rng, &net, 3, &[]);
        let joint = enumerate_joint(&net, &ev).unwrap().normalized();
        for n in net.nodes().iter().filter(|n| !ev.contains(&n.name)) {
            let got = &posterior(&net, &[n.name.as_str()], &ev).unwrap()[0].probabilities;
            assert_close(
                got,
                &joint.marginal(&n.name).unwrap(),
                1e-9,
                &format!("case {case} node {}", n.name),
            );
        }
    }
}

pub fn posterior_is_order_invariant(cases: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..cases {
        let n = rng.random_range(3..=9);
        let net = random_network(&mut rng, shape(n));
        let target = net.nodes()[rng.random_range(0..net.len())].name.clone();
        let ev = random_evidence(&mut rng, &net, 2, &[&target]);
        let base = posterior(&net, &[target.as_str()], &ev).unwrap().remove(0);
        let mut order = elimination_order(&net, &[&target], &ev).unwrap();
        order.shuffle(&mut rng);
        let names: Vec<&str> = order.iter().map(String::as_str).collect();
        let other = posterior_with_order(&net, &target, &ev, &names).unwrap();
        assert_close(
            &base.probabilities,
            &other.probabilities,
            1e-12,
            &format!("case {case}"),
        );
    }
}

pub fn dsep_matches_moralization(cases: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..cases {
        let n = rng.random_range(2..=12);
        let edge_prob = rng.random_range(0.1..0.6);
        let net = random_network(
            &mut rng,
            NetworkShape {
                nodes: n,
                max_states: 2,
                max_parents: 3,
                edge_prob,
            },
        );
        let mut parents = vec![Vec::new(); n];
        for spec in net.nodes() {
            parents[index_of(&spec.name)] = spec.parents.iter().map(|p| index_of(p)).collect();
        }
        let mut ids: Vec<usize> = (0..n).collect();
        ids.shuffle(&mut rng);
        let nx = rng.random_range(1..=2.min(n - 1));
        let ny = rng.random_range(1..=2.min(n - nx));
        let nz = rng.random_range(0..=3.min(n - nx - ny));
        let (x, rest) = ids.split_at(nx);
        let (y, rest) = rest.split_at(ny);
        let z = &rest[..nz];
        let names = |s: &[usize]| s.iter().map(|i| format!("N{i}")).collect::<Vec<_>>();
        let (xn, yn, zn) = (names(x), names(y), names(z));
        fn r(v: &[String]) -> Vec<&str> {
            v.iter().map(String::as_str).collect()
        }
        let got = d_separated(&net, &r(&xn), &r(&yn), &r(&zn)).unwrap();
        assert_eq!(
            got,
            dsep_by_moralization(&parents, x, y, z),
            "case {case}: {xn:?} {yn:?} | {zn:?}"
        );
    }
}

pub fn min_fill_width_is_near_optimal(cases: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..cases {
        let n = rng.random_range(3..=8);
        let net = random_network(&mut rng, shape(n));
        let target = net.nodes()[rng.random_range(0..n)].name.clone();
        let order: Vec<usize> = elimination_order(&net, &[&target], &Evidence::new())
            .unwrap()
            .iter()
            .map(|o| net.id(o).unwrap())
            .collect();
        let anc = net.ancestral_set([net.id(&target).unwrap()]);
        assert!(order.iter().all(|&v| anc[v]), "case {case}: eliminates a barren node");
        let mut adj = vec![BTreeSet::new(); net.len()];
        for v in (0..net.len()).filter(|&v| anc[v]) {
            let fam: Vec<usize> = net.parent_ids(v).iter().copied().chain([v]).collect();
            for &a in &fam {
                for &b in &fam {
                    if a != b {
                        adj[a].insert(b);
                    }
                }
            }
        }
        let width = induced_width(&adj, &order);
        let best = optimal_induced_width(&adj, &order);
        assert!(width <= best + 2, "case {case}: width {width}, optimal {best}");
    }
}

#[derive(Clone, Copy)]
enum Ref {
    Node(usize),
    Input(usize),
}

struct ClassGen {
    name: String,
    inputs: Vec<usize>,
    nodes: Vec<(usize, Vec<Ref>, Vec<Vec<f64>>)>,
}

fn states(card: usize) -> Vec<String> {
    (0..card).map(|s| format!("s{s}")).collect()
}

fn gen_class(rng: &mut ChaCha8Rng, name: String) -> ClassGen {
    let inputs: Vec<usize> = (0..rng.random_range(0..=2)).map(|_| rng.random_range(2..=3)).collect();
    let m = rng.random_range(2..=4);
    let mut nodes = Vec::new();
    for k in 0..m {
        let mut cand: Vec<Ref> = (0..k).map(Ref::Node).chain((0..inputs.len()).map(Ref::Input)).collect();
        cand.shuffle(rng);
        cand.truncate(rng.random_range(0..=2));
        let card = rng.random_range(2..=3);
        let rows: usize = cand
            .iter()
            .map(|r| match *r {
                Ref::Node(j) => nodes.get(j).map_or(0, |n: &(usize, Vec<Ref>, Vec<Vec<f64>>)| n.0),
                Ref::Input(j) => inputs[j],
            })
            .product();
        let cpt = (0..rows).map(|_| random_row(rng, card)).collect();
        nodes.push((card, cand, cpt));
    }
    ClassGen { name, inputs, nodes }
}

fn to_class(g: &ClassGen) -> OobnClass {
    let local = |r: &Ref| match *r {
        Ref::Node(j) => format!("V{j}"),
        Ref::Input(j) => format!("I{j}"),
    };
    OobnClass {
        name: g.name.clone(),
        inputs: g
            .inputs
            .iter()
            .enumerate()
            .map(|(j, &c)| InputSpec {
                name: format!("I{j}"),
                states: states(c),
            })
            .collect(),
        outputs: (0..g.nodes.len()).map(|k| format!("V{k}")).collect(),
        nodes: g
            .nodes
            .iter()
            .enumerate()
            .map(|(k, (card, parents, cpt))| NodeSpec {
                name: format!("V{k}"),
                states: states(*card),
                parents: parents.iter().map(local).collect(),
                cpt: cpt.clone(),
            })
            .collect(),
    }
}

/// Random OOBN plus the network obtained by writing every instance out by
/// hand with placeholder parents replaced by their sources.
fn gen_oobn(rng: &mut ChaCha8Rng) -> (OobnModel, Network) {
    let classes: Vec<ClassGen> = (0..rng.random_range(1..=3))
        .map(|c| gen_class(rng, format!("C{c}")))
        .collect();
    let mut top: Vec<NodeSpec> = Vec::new();
    let mut instances = Vec::new();
    let mut bindings = Vec::new();
    let mut expanded = Vec::new();
    // (qualified name, card, instance, local name) of every instance node so far
    let mut available: Vec<(String, usize, Option<String>, String)> = Vec::new();
    for i in 0..rng.random_range(1..=4) {
        let inst = format!("i{i}");
        let c = &classes[rng.random_range(0..classes.len())];
        let mut sources = Vec::new();
        for (j, &card) in c.inputs.iter().enumerate() {
            let mut cand: Vec<&(String, usize, Option<String>, String)> = available
                .iter()
                .filter(|a| a.1 == card && !sources.contains(&a.0))
                .collect();
            cand.shuffle(rng);
            let (qualified, source) = match cand.first() {
                Some(a) if rng.random_bool(0.8) => (
                    a.0.clone(),
                    BindingSource {
                        instance: a.2.clone(),
                        node: a.3.clone(),
                    },
                ),
                _ => {
                    let root = format!("R{}", top.len());
                    top.push(NodeSpec {
                        name: root.clone(),
                        states: states(card),
                        parents: vec![],
                        cpt: vec![random_row(rng, card)],
                    });
                    (
                        root.clone(),
                        BindingSource {
                            instance: None,
                            node: root,
                        },
                    )
                }
            };
            bindings.push(Binding {
                instance: inst.clone(),
                input: format!("I{j}"),
                source,
            });
            sources.push(qualified);
        }
        for (k, (card, parents, cpt)) in c.nodes.iter().enumerate() {
            expanded.push(NodeSpec {
                name: format!("{inst}.V{k}"),
                states: states(*card),
                parents: parents
                    .iter()
                    .map(|r| match *r {
                        Ref::Node(j) => format!("{inst}.V{j}"),
                        Ref::Input(j) => sources[j].clone(),
                    })
                    .collect(),
                cpt: cpt.clone(),
            });
        }
        for (k, (card, _, _)) in c.nodes.iter().enumerate() {
            available.push((format!("{inst}.V{k}"), *card, Some(inst.clone()), format!("V{k}")));
        }
        instances.push(Instance {
            name: inst,
            class: c.name.clone(),
        });
    }
    let mut tparents: Vec<String> = available.iter().map(|a| a.0.clone()).collect();
    tparents.shuffle(rng);
    tparents.truncate(rng.random_range(1..=2));
    let rows: usize = tparents
        .iter()
        .map(|p| available.iter().find(|a| &a.0 == p).unwrap().1)
        .product();
    top.push(NodeSpec {
        name: "T".into(),
        states: states(2),
        parents: tparents,
        cpt: (0..rows).map(|_| random_row(rng, 2)).collect(),
    });
    expanded.extend(top.iter().cloned());
    let model = OobnModel {
        classes: classes.iter().map(to_class).collect(),
        instances,
        bindings,
        top_level: top,
    };
    (model, Network::build(expanded).unwrap())
}

pub fn flatten_matches_hand_expansion(cases: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..cases {
        let (model, hand) = gen_oobn(&mut rng);
        let flat = model.flatten().unwrap();
        assert_eq!(flat.len(), hand.len(), "case {case}");
        let names: BTreeSet<&str> = flat.nodes().iter().map(|n| n.name.as_str()).collect();
        assert_eq!(names.len(), flat.len(), "case {case}: duplicate names");
        let ev = random_evidence(&mut rng, &hand, 2, &[]);
        for n in hand.nodes().iter().filter(|n| !ev.contains(&n.name)) {
            let a = &posterior(&flat, &[n.name.as_str()], &ev).unwrap()[0].probabilities;
            let b = &posterior(&hand, &[n.name.as_str()], &ev).unwrap()[0].probabilities;
            assert_close(a, b, 1e-12, &format!("case {case} node {}", n.name));
        }
    }
}

const SLICE_NAMES: [&str; 3] = ["A", "B", "C"];

fn gen_template(rng: &mut ChaCha8Rng) -> DbnTemplate {
    let m = rng.random_range(2..=3);
    let dag = random_dag(rng, m, 0.5, 2);
    let mut edges: Vec<(usize, usize)> = (0..m).flat_map(|a| (0..m).map(move |b| (a, b))).collect();
    edges.shuffle(rng);
    edges.truncate(rng.random_range(1..=2));
    let mut slice_nodes = Vec::new();
    let mut initial_cpts = std::collections::BTreeMap::new();
    for (i, parents) in dag.iter().enumerate() {
        let lagged = edges.iter().filter(|e| e.1 == i).count();
        let intra_rows = 1 << parents.len();
        slice_nodes.push(NodeSpec {
            name: SLICE_NAMES[i].into(),
            states: states(2),
            parents: parents.iter().map(|&p| SLICE_NAMES[p].to_string()).collect(),
            cpt: (0..intra_rows << lagged).map(|_| random_row(rng, 2)).collect(),
        });
        if lagged > 0 {
            initial_cpts.insert(
                SLICE_NAMES[i].to_string(),
                (0..intra_rows).map(|_| random_row(rng, 2)).collect(),
            );
        }
    }
    DbnTemplate {
        slice_nodes,
        inter_edges: edges
            .iter()
            .map(|&(a, b)| InterEdge {
                from: SLICE_NAMES[a].into(),
                to: SLICE_NAMES[b].into(),
            })
            .collect(),
        initial_cpts,
        slice_labels: ["Nov", "Dec", "Jan", "Feb", "Mar"].map(String::from).to_vec(),
    }
}

/// Unrolled network written out directly from the template fields.
fn hand_unroll(t: &DbnTemplate, slices: usize) -> Network {
    let mut nodes = Vec::new();
    for s in 0..slices {
        let label = &t.slice_labels[s];
        for n in &t.slice_nodes {
            let mut parents: Vec<String> = n.parents.iter().map(|p| format!("{label}.{p}")).collect();
            let cpt = if s == 0 {
                t.initial_cpts.get(&n.name).cloned().unwrap_or_else(|| n.cpt.clone())
            } else {
                let prev = &t.slice_labels[s - 1];
                parents.extend(
                    t.inter_edges
                        .iter()
                        .filter(|e| e.to == n.name)
                        .map(|e| format!("{prev}.{}", e.from)),
                );
                n.cpt.clone()
            };
            nodes.push(NodeSpec {
                name: format!("{label}.{}", n.name),
                states: n.states.clone(),
                parents,
                cpt,
            });
        }
    }
    Network::build(nodes).unwrap()
}

pub fn dbn_slices_match_enumeration(cases: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..cases {
        let t = gen_template(&mut rng);
        let five = t.unroll(5).unwrap();
        assert_eq!(five.len(), 5 * t.slice_nodes.len());
        for w in t.slice_labels.windows(2) {
            for e in &t.inter_edges {
                let child = five.node(&format!("{}.{}", w[1], e.to)).unwrap();
                assert!(child.parents.contains(&format!("{}.{}", w[0], e.from)), "case {case}");
            }
        }
        let hand = hand_unroll(&t, 3);
        let target = SLICE_NAMES[rng.random_range(0..t.slice_nodes.len())];
        let exclude: Vec<String> = t.slice_labels[..3].iter().map(|l| format!("{l}.{target}")).collect();
        let ex: Vec<&str> = exclude.iter().map(String::as_str).collect();
        let ev = random_evidence(&mut rng, &hand, 2, &ex);
        let got = t.slice_posteriors(3, target, &ev, Execution::Sequential).unwrap();
        for (s, name) in exclude.iter().enumerate() {
            assert_close(
                &got[s].probabilities,
                &enumerated_marginal(&hand, &ev, name),
                1e-9,
                &format!("case {case} {name}"),
            );
        }
    }
}

pub fn mutual_information_matches_oracle(cases: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..cases {
        let n = rng.random_range(2..=8);
        let net = random_network(&mut rng, shape(n));
        let target = net.nodes()[rng.random_range(0..net.len())].name.clone();
        let ev = random_evidence(&mut rng, &net, 2, &[&target]);
        let report = sensitivity_ranking(&net, &target, &ev).unwrap();
        let joint = enumerate_joint(&net, &ev).unwrap();
        let ti = joint.scope.iter().position(|s| *s == target).unwrap();
        let observed: Vec<&str> = ev.nodes().collect();
        for e in &report.entries {
            let ni = joint.scope.iter().position(|s| *s == e.node).unwrap();
            let table = pair_table(&joint.table, &joint.cards, ni, ti);
            let want = ibn_oracles::mutual_information_bits(&table, joint.cards[ni], joint.cards[ti]);
            assert!(
                (e.mutual_information - want).abs() < 1e-9,
                "case {case} {}: {} vs {want}",
                e.node,
                e.mutual_information
            );
            if d_separated(&net, &[&e.node], &[&target], &observed).unwrap() {
                assert!(e.mutual_information.abs() <= 1e-12, "case {case} {}", e.node);
            }
        }
        assert_eq!(report.entries.len(), net.len() - 1 - ev.len());
    }
}
