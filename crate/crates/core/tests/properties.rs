mod support;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use ibn_core::analysis::{evaluate_scenario, mutual_information_bits, sensitivity_ranking, Scenario};
use ibn_core::dbn::DbnTemplate;
use ibn_core::generate::{random_evidence, random_network, random_row, NetworkShape};
use ibn_core::io::{load, parse, ModelBody};
use ibn_core::management::{
    catchment_load, load_to_evidence, raw_load, uniform_assignment, Catalogue, Practice, NUTRIENTS,
};
use ibn_core::pipeline::{run_pipeline, InterventionSpec};
use ibn_core::probit::truncnorm::draw_latent;
use ibn_core::probit::{build_design, CovariateSpec, MonthlyRecord, TimeSeriesDataset};
use ibn_core::{d_separated, posterior, Evidence, Execution, Network};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn models() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn net_from_seed(seed: u64, max_nodes: usize) -> (Network, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_nodes);
    let net = random_network(
        &mut rng,
        NetworkShape {
            nodes: n,
            max_states: 3,
            max_parents: 3,
            edge_prob: 0.4,
        },
    );
    (net, rng)
}

fn demo() -> Network {
    load(&models().join("demo.json"))
        .unwrap()
        .science_model()
        .unwrap()
        .network
}

fn bundled_catalogue() -> Catalogue {
    match load(&models().join("catalogue.json")).unwrap().body {
        ModelBody::Catalogue(c) => c,
        _ => panic!("catalogue.json is not a catalogue"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn local_markov_property(seed in any::<u64>()) {
        let (net, mut rng) = net_from_seed(seed, 12);
        for id in 0..net.len() {
            let parents: BTreeSet<usize> = net.parent_ids(id).iter().copied().collect();
            let desc = net.descendants(id);
            let mut w: Vec<usize> = (0..net.len())
                .filter(|v| *v != id && !desc.contains(v) && !parents.contains(v))
                .collect();
            w.shuffle(&mut rng);
            w.truncate(rng.random_range(0..=w.len()));
            if w.is_empty() {
                continue;
            }
            let names = |s: &mut dyn Iterator<Item = usize>| s.map(|v| net.name(v)).collect::<Vec<_>>();
            let wn = names(&mut w.iter().copied());
            let pn = names(&mut parents.iter().copied());
            prop_assert!(d_separated(&net, &[net.name(id)], &wn, &pn).unwrap());
        }
    }

    #[test]
    fn dsep_is_symmetric(seed in any::<u64>()) {
        let (net, mut rng) = net_from_seed(seed, 12);
        let mut ids: Vec<&str> = net.nodes().iter().map(|n| n.name.as_str()).collect();
        ids.shuffle(&mut rng);
        let (x, rest) = ids.split_at(1);
        let (y, z) = rest.split_at(1);
        let z = &z[..z.len().min(3)];
        prop_assert_eq!(d_separated(&net, x, y, z).unwrap(), d_separated(&net, y, x, z).unwrap());
    }

    #[test]
    fn markov_blanket_members_are_adjacent_or_coparents(seed in any::<u64>()) {
        let (net, _) = net_from_seed(seed, 12);
        for spec in net.nodes() {
            let mb = net.markov_blanket(&spec.name).unwrap();
            prop_assert!(!mb.contains(&spec.name));
            let id = net.id(&spec.name).unwrap();
            for m in &mb {
                let mid = net.id(m).unwrap();
                let edge = net.parent_ids(id).contains(&mid) || net.parent_ids(mid).contains(&id);
                let coparent = net.child_ids(id).iter().any(|c| net.parent_ids(*c).contains(&mid));
                prop_assert!(edge || coparent, "{m} in blanket of {}", spec.name);
            }
        }
    }

    #[test]
    fn posteriors_are_normalized(seed in any::<u64>()) {
        let (net, mut rng) = net_from_seed(seed, 10);
        let ev = random_evidence(&mut rng, &net, 3, &[]);
        for spec in net.nodes().iter().filter(|n| !ev.contains(&n.name)) {
            let p = posterior(&net, &[spec.name.as_str()], &ev).unwrap().remove(0);
            prop_assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dseparated_evidence_leaves_posterior_unchanged(seed in any::<u64>()) {
        let (net, mut rng) = net_from_seed(seed, 10);
        let target = net.nodes()[rng.random_range(0..net.len())].name.clone();
        let ev = random_evidence(&mut rng, &net, 2, &[&target]);
        let before = posterior(&net, &[target.as_str()], &ev).unwrap().remove(0);
        let observed: Vec<&str> = ev.nodes().collect();
        for spec in net.nodes() {
            if spec.name == target || ev.contains(&spec.name) {
                continue;
            }
            if d_separated(&net, &[&spec.name], &[&target], &observed).unwrap() {
                let mut more = ev.clone();
                more.insert(spec.name.clone(), spec.states[rng.random_range(0..spec.states.len())].clone());
                let after = posterior(&net, &[target.as_str()], &more).unwrap().remove(0);
                for (a, b) in after.probabilities.iter().zip(&before.probabilities) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mutual_information_is_symmetric(ca in 2usize..5, cb in 2usize..5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let joint = random_row(&mut rng, ca * cb);
        let transposed: Vec<f64> = (0..cb).flat_map(|j| (0..ca).map(move |i| (i, j))).map(|(i, j)| joint[i * cb + j]).collect();
        let a = mutual_information_bits(&joint, ca, cb);
        let b = mutual_information_bits(&transposed, cb, ca);
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn ranking_is_deterministic(seed in any::<u64>()) {
        let (net, mut rng) = net_from_seed(seed, 9);
        let target = net.nodes()[0].name.clone();
        let ev = random_evidence(&mut rng, &net, 2, &[&target]);
        let a = sensitivity_ranking(&net, &target, &ev).unwrap();
        let b = sensitivity_ranking(&net, &target, &ev).unwrap();
        prop_assert_eq!(a.to_text(), b.to_text());
        prop_assert_eq!(serde_json_bytes(&a), serde_json_bytes(&b));
    }

    #[test]
    fn hazard_is_monotone(
        p in 0.0f64..=1.0, dp in 0.0f64..=1.0,
        soil in 0usize..3, up in 0usize..3,
        ph in 4.0f64..8.5,
        d in 0.0f64..2000.0, closer in 0.0f64..1.0,
    ) {
        support::rubric::monotone_under_perturbation(p, dp, soil, up, ph, d, closer);
    }

    #[test]
    fn latent_draws_agree_with_response(mean in -40.0f64..40.0, y in any::<bool>(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let z = draw_latent(&mut rng, mean, y);
            prop_assert!(z.is_finite());
            prop_assert_eq!(z > 0.0, y, "mean {} z {}", mean, z);
        }
    }

    #[test]
    fn design_columns_are_standardized(rows in 3usize..40, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let recs: Vec<MonthlyRecord> = (0..rows)
            .map(|t| MonthlyRecord {
                month: format!("{:04}-{:02}", 2000 + t / 12, t % 12 + 1),
                bloom: rng.random_range(0..=1),
                min_temp: rng.random_range(5.0..25.0),
                max_temp: rng.random_range(15.0..35.0),
                solar: rng.random_range(5.0..30.0),
                clear_sky: rng.random_range(0.0..1.0),
                rainfall: rng.random_range(0.0..400.0),
            })
            .collect();
        let data = TimeSeriesDataset::new(recs).unwrap();
        check_standardized(&data)?;
    }
}

fn serde_json_bytes<T: serde::Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec(v).unwrap()
}

fn check_standardized(data: &TimeSeriesDataset) -> Result<(), TestCaseError> {
    let spec = CovariateSpec::default();
    let d = build_design(data, &spec).unwrap();
    let n = data.len();
    prop_assert_eq!(d.rows(), n - 1);
    let k = spec.main_effects.len();
    for (i, name) in spec.main_effects.iter().enumerate() {
        let z: Vec<f64> = data
            .column(name)
            .unwrap()
            .iter()
            .map(|&v| d.transforms[i].apply(v))
            .collect();
        let mean = z.iter().sum::<f64>() / n as f64;
        let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        prop_assert!(
            mean.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9,
            "{name}: mean {mean} sd {sd}"
        );
        for t in 1..n {
            prop_assert!((d.x[(t - 1, i)] - z[t]).abs() < 1e-12);
            prop_assert!((d.x[(t - 1, k + i)] - z[t - 1]).abs() < 1e-12);
        }
    }
    for (c, [a, b]) in spec.interactions.iter().enumerate() {
        let ia = spec.main_effects.iter().position(|m| m == a).unwrap();
        let ib = spec.main_effects.iter().position(|m| m == b).unwrap();
        for t in 0..n - 1 {
            prop_assert!((d.x[(t, 2 * k + c)] - d.x[(t, ia)] * d.x[(t, ib)]).abs() < 1e-12);
        }
    }
    Ok(())
}

#[test]
fn bundled_dataset_design_is_standardized() {
    let data = TimeSeriesDataset::from_csv(std::fs::File::open(models().join("bloom-monthly.csv")).unwrap()).unwrap();
    assert_eq!(data.len(), 77);
    let d = build_design(&data, &CovariateSpec::default()).unwrap();
    assert_eq!((d.rows(), d.candidates()), (76, 17));
    check_standardized(&data).unwrap();
}

#[test]
fn hazard_rubric_exhaustive_table() {
    assert_eq!(support::rubric::exhaustive_table(), 27);
}

#[test]
fn bundled_practices_are_dominated() {
    let cat = bundled_catalogue();
    for s in &cat.sources {
        let one = std::slice::from_ref(s);
        let load = |p| raw_load(one, &uniform_assignment(one, p), cat.attenuation_m).unwrap();
        let (cur, plan, best) = (load(Practice::Current), load(Practice::Planned), load(Practice::Best));
        for n in NUTRIENTS {
            assert!(best.get(n) <= plan.get(n) && plan.get(n) <= cur.get(n), "{} {n}", s.id);
        }
    }
}

#[test]
fn bundled_baseline_is_unit_load() {
    let cat = bundled_catalogue();
    let load = catchment_load(&cat, &uniform_assignment(&cat.sources, Practice::Current)).unwrap();
    for n in NUTRIENTS {
        assert_eq!(load.get(n), 1.0, "{n}");
    }
    let typical = match load_models_scenario("typical-year") {
        Some(s) => s.evidence,
        None => panic!("typical-year scenario missing"),
    };
    assert_eq!(load_to_evidence(&load, &cat.linkage).unwrap(), typical);
}

fn load_models_scenario(name: &str) -> Option<Scenario> {
    match load(&models().join("scenarios.json")).unwrap().body {
        ModelBody::ScenarioSet(set) => set.get(name).cloned(),
        _ => None,
    }
}

fn random_assignment(cat: &Catalogue, rng: &mut ChaCha8Rng) -> Vec<(String, Practice)> {
    let all = [Practice::Current, Practice::Planned, Practice::Best];
    cat.sources
        .iter()
        .map(|s| (s.id.clone(), all[rng.random_range(0..3)]))
        .collect()
}

#[test]
fn pipeline_stages_compose() {
    let cat = bundled_catalogue();
    let net = demo();
    let target = cat.linkage.target.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let mut iv = InterventionSpec::labeled("random practices");
        iv.practice_overrides = random_assignment(&cat, &mut rng).into_iter().collect();
        let report = run_pipeline(&cat, &iv, &net).unwrap();
        let again = run_pipeline(&cat, &iv, &net).unwrap();
        assert_eq!(serde_json_bytes(&report), serde_json_bytes(&again));

        let load = catchment_load(&cat, &iv.practice_overrides).unwrap();
        let ev = load_to_evidence(&load, &cat.linkage).unwrap();
        let manual = evaluate_scenario(&net, &Scenario::new("manual", ev), &target, &[]).unwrap();
        assert_eq!(report.loads, load);
        for (a, b) in report
            .posterior
            .probabilities
            .iter()
            .zip(&manual.posterior.probabilities)
        {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn maximum_emission_never_lowers_bloom() {
    let cat = bundled_catalogue();
    let net = demo();
    let worst = run_pipeline(&cat, &InterventionSpec::default(), &net)
        .unwrap()
        .probability();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..40 {
        let mut iv = InterventionSpec::labeled("random practices");
        iv.practice_overrides = random_assignment(&cat, &mut rng).into_iter().collect();
        let p = run_pipeline(&cat, &iv, &net).unwrap().probability();
        assert!(worst >= p - 1e-12, "{worst} < {p}");
    }
}

fn dynamic() -> DbnTemplate {
    match load(&models().join("demo-dynamic.json")).unwrap().body {
        ModelBody::DbnTemplate(b) => b.template,
        _ => panic!("demo-dynamic.json is not a dbn template"),
    }
}

#[test]
fn first_slice_matches_single_slice_network() {
    let t = dynamic();
    let one = t.unroll(1).unwrap();
    let five = t
        .slice_posteriors(5, "BloomInitiation", &Evidence::new(), Execution::Sequential)
        .unwrap();
    let single = posterior(&one, &["Nov.BloomInitiation"], &Evidence::new())
        .unwrap()
        .remove(0);
    for (a, b) in five[0].probabilities.iter().zip(&single.probabilities) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn unrolled_size_is_linear() {
    let t = dynamic();
    let sizes: Vec<(usize, usize)> = (1..=5)
        .map(|n| t.unroll(n).map(|u| (u.len(), u.edge_count())).unwrap())
        .collect();
    let (n1, e1) = sizes[0];
    let lag = t.inter_edges.len();
    for (i, &(n, e)) in sizes.iter().enumerate() {
        assert_eq!(n, (i + 1) * n1);
        assert_eq!(e, (i + 1) * e1 + i * lag);
    }
}

#[test]
fn without_lags_every_slice_is_identical() {
    let mut t = dynamic();
    t.inter_edges.clear();
    t.initial_cpts.clear();
    for n in &mut t.slice_nodes {
        if n.name == "Runoff" {
            n.cpt = dynamic().initial_cpts["Runoff"].clone();
        }
    }
    let p = t
        .slice_posteriors(5, "BloomInitiation", &Evidence::new(), Execution::Sequential)
        .unwrap();
    for s in &p[1..] {
        for (a, b) in s.probabilities.iter().zip(&p[0].probabilities) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn bundled_files_round_trip() {
    let mut files = vec![];
    for dir in [models(), models().join("interventions")] {
        for e in std::fs::read_dir(dir).unwrap() {
            let path = e.unwrap().path();
            if path.extension().is_some_and(|x| x == "json") {
                files.push(path);
            }
        }
    }
    assert!(files.len() >= 12);
    for path in files {
        let text = std::fs::read_to_string(&path).unwrap();
        let doc = parse(&text).unwrap();
        assert_eq!(doc.to_json(), text, "{}", path.display());
        assert_eq!(parse(&doc.to_json()).unwrap(), doc);
    }
    let csv = std::fs::read_to_string(models().join("bloom-monthly.csv")).unwrap();
    assert_eq!(TimeSeriesDataset::from_csv(csv.as_bytes()).unwrap().to_csv(), csv);
}
