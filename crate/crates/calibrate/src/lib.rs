//! Builders for the bundled demo models and the search that calibrates
//! them.
//!
//! The science network is an OOBN of five subnetworks (water, air, sea
//! water, light, nutrients) plus top-level temperature and bloom
//! initiation. Most CPTs are fixed discretized-Gaussian shapes. The
//! nutrient-pool CPT is logistic in the four dissolved nutrient states and
//! the bloom CPT is logistic in bottom current, light climate and
//! temperature when the pool is not enough (and certain when it is). Six of
//! those logistic coefficients are tuned by coordinate descent until the
//! bloom probabilities of the bundled scenarios hold.
//!
//! The management catalogue is solved in closed form by fixed-point
//! iteration so that whole-catchment land-use runs and the natural
//! vegetation conversion produce the intended load indices.

use std::collections::BTreeMap;
use std::path::Path;

use ibn_core::analysis::{Scenario, ScenarioSet};
use ibn_core::compose::{Binding, BindingSource, InputSpec, Instance, OobnClass, OobnModel};
use ibn_core::dbn::{DbnTemplate, InterEdge, DEFAULT_SLICE_LABELS};
use ibn_core::io::{DbnBody, ModelBody, ModelDocument, OobnBody};
use ibn_core::management::{
    raw_load, uniform_assignment, Catalogue, Emissions, Linkage, NutrientLink, NutrientSource, Practice, SoilType,
    SourceKind,
};
use ibn_core::pipeline::InterventionSpec;
use ibn_core::probit::{MonthlyRecord, TimeSeriesDataset};
use ibn_core::{posterior, Evidence, Network, NodeSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const TARGET: &str = "BloomInitiation";
pub const LMH: [&str; 3] = ["Low", "Medium", "High"];

pub const IRON: &str = "nutrients.DissolvedIron";
pub const PHOSPHORUS: &str = "nutrients.DissolvedPhosphorus";
pub const NITROGEN: &str = "nutrients.DissolvedNitrogen";
pub const ORGANICS: &str = "nutrients.DissolvedOrganics";
pub const POOL: &str = "nutrients.AvailableNutrientPool";

/// Logistic coefficients of the pool and bloom CPTs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub pool_a: f64,
    pub w_fe: f64,
    pub w_p: f64,
    pub w_n: f64,
    pub w_o: f64,
    pub bloom_b0: f64,
    pub w_bcc: f64,
    pub w_light: f64,
    pub w_temp: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            pool_a: -3.5,
            w_fe: 0.6,
            w_p: 1.2,
            w_n: 0.1,
            w_o: 0.05,
            bloom_b0: -4.0,
            w_bcc: 0.5,
            w_light: 0.5,
            w_temp: 0.5,
        }
    }
}

impl Params {
    const FREE: usize = 6;

    fn get(&self, i: usize) -> f64 {
        [self.pool_a, self.w_fe, self.w_p, self.w_n, self.w_o, self.bloom_b0][i]
    }

    fn set(&mut self, i: usize, v: f64) {
        *[
            &mut self.pool_a,
            &mut self.w_fe,
            &mut self.w_p,
            &mut self.w_n,
            &mut self.w_o,
            &mut self.bloom_b0,
        ][i] = v;
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// Discretized Gaussian over state indices `0..k`, centred at `center`,
/// rounded to 4 decimals with the last entry absorbing the remainder.
fn ord(k: usize, center: f64, sigma: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..k)
        .map(|i| (-(i as f64 - center).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    let mut row: Vec<f64> = raw.iter().map(|x| round4(x / sum)).collect();
    let head: f64 = row[..k - 1].iter().sum();
    row[k - 1] = round4(1.0 - head);
    row
}

fn ord3(center: f64) -> Vec<f64> {
    ord(3, center, 0.75)
}

/// CPT rows over all parent state combinations, first parent slowest.
fn table(cards: &[usize], f: impl Fn(&[usize]) -> Vec<f64>) -> Vec<Vec<f64>> {
    let total: usize = cards.iter().product();
    let mut idx = vec![0; cards.len()];
    let mut out = Vec::with_capacity(total);
    for _ in 0..total {
        out.push(f(&idx));
        for d in (0..cards.len()).rev() {
            idx[d] += 1;
            if idx[d] < cards[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    out
}

fn node(name: &str, states: &[&str], parents: &[&str], cpt: Vec<Vec<f64>>) -> NodeSpec {
    NodeSpec::new(name, states, parents, cpt)
}

fn lmh(name: &str, parents: &[&str], cpt: Vec<Vec<f64>>) -> NodeSpec {
    node(name, &LMH, parents, cpt)
}

fn f(i: usize) -> f64 {
    i as f64
}

fn runoff_cpt(lagged: bool) -> Vec<Vec<f64>> {
    if lagged {
        table(&[3, 3, 3, 3], |s| {
            ord3(0.1 + 0.45 * f(s[0]) + 0.2 * f(s[1]) + 0.2 * f(s[2]) + 0.1 * f(s[3]))
        })
    } else {
        table(&[3, 3], |s| ord3(0.1 + 0.6 * f(s[0]) + 0.3 * f(s[1])))
    }
}

fn water() -> OobnClass {
    OobnClass {
        name: "Water".into(),
        inputs: vec![],
        outputs: vec!["Runoff".into()],
        nodes: vec![
            lmh("PastRain", &[], vec![vec![0.3, 0.45, 0.25]]),
            lmh("Rain", &[], vec![vec![0.35, 0.4, 0.25]]),
            lmh("Groundwater", &["PastRain"], table(&[3], |s| ord3(0.3 + 0.7 * f(s[0])))),
            lmh("Runoff", &["Rain", "Groundwater"], runoff_cpt(false)),
        ],
    }
}

const WIND_SPEED: [&str; 3] = ["Calm", "Moderate", "Strong"];
const BCC: [&str; 3] = ["Low", "Moderate", "High"];
const TURBIDITY: [&str; 3] = ["Clear", "Moderate", "Turbid"];
const LIGHT_CLIMATE: [&str; 3] = ["Poor", "Adequate", "Optimal"];

fn air() -> OobnClass {
    OobnClass {
        name: "Air".into(),
        inputs: vec![],
        outputs: vec!["WindSpeed".into()],
        nodes: vec![
            node("Wind", &["Offshore", "Onshore"], &[], vec![vec![0.55, 0.45]]),
            node(
                "WindSpeed",
                &WIND_SPEED,
                &["Wind"],
                vec![vec![0.45, 0.4, 0.15], vec![0.25, 0.45, 0.3]],
            ),
        ],
    }
}

fn sea() -> OobnClass {
    OobnClass {
        name: "SeaWater".into(),
        inputs: vec![InputSpec {
            name: "WindSpeed".into(),
            states: WIND_SPEED.map(String::from).to_vec(),
        }],
        outputs: vec!["BottomCurrentClimate".into(), "Turbidity".into()],
        nodes: vec![
            node("Tide", &["Neap", "Spring"], &[], vec![vec![0.5, 0.5]]),
            node(
                "BottomCurrentClimate",
                &BCC,
                &["Tide", "WindSpeed"],
                table(&[2, 3], |s| ord3(0.2 + 0.5 * f(s[0]) + 0.6 * f(s[1]))),
            ),
            node(
                "Turbidity",
                &TURBIDITY,
                &["WindSpeed", "Tide"],
                table(&[3, 2], |s| ord3(0.2 + 0.6 * f(s[0]) + 0.3 * f(s[1]))),
            ),
        ],
    }
}

fn light() -> OobnClass {
    OobnClass {
        name: "Light".into(),
        inputs: vec![InputSpec {
            name: "Turbidity".into(),
            states: TURBIDITY.map(String::from).to_vec(),
        }],
        outputs: vec!["LightClimate".into()],
        nodes: vec![
            lmh("SurfaceLight", &[], vec![vec![0.25, 0.45, 0.3]]),
            node(
                "LightQuality",
                &["Poor", "Good"],
                &["Turbidity"],
                vec![vec![0.2, 0.8], vec![0.45, 0.55], vec![0.75, 0.25]],
            ),
            lmh(
                "LightQuantity",
                &["SurfaceLight", "Turbidity"],
                table(&[3, 3], |s| ord3(0.6 + 0.7 * f(s[0]) - 0.4 * f(s[1]))),
            ),
            node(
                "LightClimate",
                &LIGHT_CLIMATE,
                &["LightQuality", "LightQuantity"],
                table(&[2, 3], |s| ord3(0.1 + 0.7 * f(s[0]) + 0.55 * f(s[1]))),
            ),
        ],
    }
}

fn nutrients(p: &Params) -> OobnClass {
    let dissolved = |s: &[usize]| ord3(0.5 + 0.25 * f(s[0]) + 0.25 * f(s[1]));
    let pool = table(&[3, 3, 3, 3], |s| {
        let e = sigmoid(p.pool_a + p.w_fe * f(s[0]) + p.w_p * f(s[1]) + p.w_n * f(s[2]) + p.w_o * f(s[3]));
        vec![1.0 - e, e]
    });
    OobnClass {
        name: "Nutrients".into(),
        inputs: vec![InputSpec {
            name: "Runoff".into(),
            states: LMH.map(String::from).to_vec(),
        }],
        outputs: vec!["AvailableNutrientPool".into()],
        nodes: vec![
            lmh("PointSources", &[], vec![vec![0.3, 0.45, 0.25]]),
            lmh("Particulates", &["Runoff"], table(&[3], |s| ord3(0.2 + 0.8 * f(s[0])))),
            node(
                "SedimentNutrientClimate",
                &["Poor", "Moderate", "Rich"],
                &["Particulates"],
                table(&[3], |s| ord3(0.3 + 0.7 * f(s[0]))),
            ),
            lmh(
                "DissolvedIron",
                &["Runoff", "SedimentNutrientClimate"],
                table(&[3, 3], dissolved),
            ),
            lmh(
                "DissolvedPhosphorus",
                &["Runoff", "PointSources"],
                table(&[3, 3], dissolved),
            ),
            lmh(
                "DissolvedNitrogen",
                &["Runoff", "PointSources"],
                table(&[3, 3], dissolved),
            ),
            lmh(
                "DissolvedOrganics",
                &["Runoff", "PointSources"],
                table(&[3, 3], dissolved),
            ),
            node(
                "AvailableNutrientPool",
                &["NotEnough", "Enough"],
                &[
                    "DissolvedIron",
                    "DissolvedPhosphorus",
                    "DissolvedNitrogen",
                    "DissolvedOrganics",
                ],
                pool,
            ),
        ],
    }
}

fn temperature() -> NodeSpec {
    node(
        "Temperature",
        &["Low", "Normal", "High"],
        &[],
        vec![vec![0.25, 0.5, 0.25]],
    )
}

/// Bloom CPT; parent order is pool, bottom current, light climate,
/// temperature.
fn bloom(p: &Params, parents: [&str; 4]) -> NodeSpec {
    let cpt = table(&[2, 3, 3, 3], |s| {
        if s[0] == 1 {
            vec![1.0, 0.0]
        } else {
            let y = sigmoid(p.bloom_b0 + p.w_bcc * f(s[1]) + p.w_light * f(s[2]) + p.w_temp * f(s[3]));
            vec![y, 1.0 - y]
        }
    });
    node(TARGET, &["Yes", "No"], &parents, cpt)
}

pub fn science_model(p: &Params) -> OobnModel {
    let inst = |name: &str, class: &str| Instance {
        name: name.into(),
        class: class.into(),
    };
    let bind = |instance: &str, input: &str, from: &str, node: &str| Binding {
        instance: instance.into(),
        input: input.into(),
        source: BindingSource {
            instance: Some(from.into()),
            node: node.into(),
        },
    };
    OobnModel {
        classes: vec![water(), air(), sea(), light(), nutrients(p)],
        instances: vec![
            inst("water", "Water"),
            inst("air", "Air"),
            inst("sea", "SeaWater"),
            inst("light", "Light"),
            inst("nutrients", "Nutrients"),
        ],
        bindings: vec![
            bind("sea", "WindSpeed", "air", "WindSpeed"),
            bind("light", "Turbidity", "sea", "Turbidity"),
            bind("nutrients", "Runoff", "water", "Runoff"),
        ],
        top_level: vec![
            temperature(),
            bloom(
                p,
                [POOL, "sea.BottomCurrentClimate", "light.LightClimate", "Temperature"],
            ),
        ],
    }
}

/// Nutrient evidence with the four dissolved nodes at the given states
/// (0 Low, 1 Medium, 2 High) in iron, phosphorus, nitrogen, organics order.
pub fn nutrient_evidence(states: [usize; 4]) -> Evidence {
    [IRON, PHOSPHORUS, NITROGEN, ORGANICS]
        .iter()
        .zip(states)
        .map(|(n, s)| (n.to_string(), LMH[s].to_string()))
        .collect()
}

pub fn typical_year() -> Evidence {
    nutrient_evidence([1, 1, 1, 1])
}

/// Climate states pinned by the storm scenario.
pub fn storm_extra() -> Evidence {
    Evidence::new()
        .with("water.Rain", "High")
        .with("air.WindSpeed", "Strong")
        .with("light.LightClimate", "Optimal")
        .with("Temperature", "High")
}

pub fn storm() -> Evidence {
    let mut ev = typical_year();
    for (n, s) in storm_extra().iter() {
        ev.insert(n, s);
    }
    ev
}

#[derive(Debug, Clone)]
pub struct Target {
    pub name: &'static str,
    pub evidence: Evidence,
    pub value: f64,
}

/// Bloom probabilities the science model is calibrated to.
pub fn bloom_targets() -> Vec<Target> {
    let t = |name, evidence, value| Target { name, evidence, value };
    vec![
        t("typical-year", typical_year(), 0.28),
        t("storm", storm(), 0.42),
        t("low-iron", nutrient_evidence([0, 1, 1, 1]), 0.23),
        t("low-nitrogen", nutrient_evidence([1, 1, 0, 1]), 0.27),
        t("all-high", nutrient_evidence([2, 2, 2, 2]), 0.63),
        t("high-except-organics", nutrient_evidence([2, 2, 2, 1]), 0.62),
    ]
}

pub fn bloom_probability(net: &Network, ev: &Evidence) -> f64 {
    posterior(net, &[TARGET], ev).expect("calibration query")[0].probabilities[0]
}

fn objective(p: &Params, targets: &[Target]) -> f64 {
    let net = science_model(p).flatten().expect("demo model flattens");
    targets
        .iter()
        .map(|t| (bloom_probability(&net, &t.evidence) - t.value).powi(2))
        .sum()
}

#[derive(Debug, Clone)]
pub struct Calibration {
    pub params: Params,
    pub sse: f64,
    pub sweeps: usize,
}

/// Coordinate descent over the six free coefficients with per-coordinate
/// step halving.
pub fn calibrate(start: Params) -> Calibration {
    let targets = bloom_targets();
    let mut p = start;
    let mut best = objective(&p, &targets);
    let mut steps = [0.5; Params::FREE];
    let mut sweeps = 0;
    while sweeps < 2000 && best > 1e-12 && steps.iter().any(|&s| s > 1e-10) {
        sweeps += 1;
        for i in 0..Params::FREE {
            let mut improved = false;
            for dir in [1.0, -1.0] {
                let mut q = p;
                q.set(i, p.get(i) + dir * steps[i]);
                let v = objective(&q, &targets);
                if v < best {
                    best = v;
                    p = q;
                    improved = true;
                    break;
                }
            }
            if improved {
                steps[i] *= 1.5;
            } else {
                steps[i] *= 0.5;
            }
        }
    }
    Calibration {
        params: p,
        sse: best,
        sweeps,
    }
}

/// Per-slice template from the flattened science network with instance
/// prefixes stripped; runoff also depends on the previous month's rain and
/// groundwater.
pub fn dynamic_template(p: &Params) -> DbnTemplate {
    let net = science_model(p).flatten().expect("demo model flattens");
    let strip = |n: &str| n.rsplit('.').next().unwrap_or(n).to_string();
    let mut slice_nodes: Vec<NodeSpec> = net
        .nodes()
        .iter()
        .map(|n| NodeSpec {
            name: strip(&n.name),
            states: n.states.clone(),
            parents: n.parents.iter().map(|q| strip(q)).collect(),
            cpt: n.cpt.clone(),
        })
        .collect();
    let runoff = slice_nodes
        .iter_mut()
        .find(|n| n.name == "Runoff")
        .expect("runoff node");
    let initial = std::mem::replace(&mut runoff.cpt, runoff_cpt(true));
    DbnTemplate {
        slice_nodes,
        inter_edges: vec![
            InterEdge {
                from: "Rain".into(),
                to: "Runoff".into(),
            },
            InterEdge {
                from: "Groundwater".into(),
                to: "Runoff".into(),
            },
        ],
        initial_cpts: [("Runoff".to_string(), initial)].into(),
        slice_labels: DEFAULT_SLICE_LABELS.map(String::from).to_vec(),
    }
}

/// Warm months in the first two slices, normal temperatures after.
pub fn dynamic_baseline() -> Evidence {
    ["High", "High", "Normal", "Normal", "Normal"]
        .iter()
        .zip(DEFAULT_SLICE_LABELS)
        .map(|(s, l)| (format!("{l}.Temperature"), s.to_string()))
        .collect()
}

pub const CATEGORIES: [&str; 9] = [
    "natural_vegetation",
    "grazing",
    "forestry",
    "agriculture",
    "stormwater",
    "wwtp",
    "aquaculture",
    "poultry",
    "waste_disposal",
];

/// Nutrient order used by the profile arrays below.
const NUTRIENT_ORDER: [&str; 5] = ["iron", "phosphorus", "nitrogen", "organics", "potassium"];

/// Whole-catchment load index per nutrient for each single-land-use run.
const RUN_INDEX: [(&str, [f64; 5]); 5] = [
    ("wwtp", [0.75, 0.95, 0.95, 0.95, 0.95]),
    ("grazing", [0.95, 0.95, 0.75, 0.95, 0.95]),
    ("waste_disposal", [1.25, 1.25, 1.25, 1.25, 1.2]),
    ("aquaculture", [1.2, 1.25, 1.2, 1.2, 1.1]),
    ("poultry", [1.2, 1.2, 1.2, 0.95, 1.0]),
];

/// Relative load increase when natural vegetation becomes agriculture.
pub const CONVERSION_INCREASE: [f64; 5] = [0.10, 0.12, 0.11, 0.03, 0.08];

/// Profiles not solved for (current practice).
const FIXED_PROFILES: [(&str, [f64; 5]); 3] = [
    ("natural_vegetation", [0.15, 0.08, 0.1, 0.2, 0.1]),
    ("forestry", [0.35, 0.2, 0.25, 0.4, 0.2]),
    ("stormwater", [0.3, 0.45, 0.5, 0.55, 0.35]),
];

fn emissions(current: [f64; 5], category: &str) -> Emissions {
    let scaled = |k: f64, potassium_zero: bool| -> BTreeMap<String, f64> {
        NUTRIENT_ORDER
            .iter()
            .zip(current)
            .map(|(n, p)| {
                let v = if potassium_zero && *n == "potassium" {
                    0.0
                } else {
                    p * k
                };
                (n.to_string(), v)
            })
            .collect()
    };
    [
        (Practice::Current, scaled(1.0, false)),
        (Practice::Planned, scaled(0.8, false)),
        (Practice::Best, scaled(0.6, category == "wwtp")),
    ]
    .into()
}

struct Site {
    id: &'static str,
    kind: SourceKind,
    category: &'static str,
    size: f64,
    ph: f64,
    soil: SoilType,
    distance: f64,
}

const SITES: [Site; 14] = {
    use SoilType::*;
    use SourceKind::*;
    const fn s(
        id: &'static str,
        kind: SourceKind,
        category: &'static str,
        size: f64,
        ph: f64,
        soil: SoilType,
        distance: f64,
    ) -> Site {
        Site {
            id,
            kind,
            category,
            size,
            ph,
            soil,
            distance,
        }
    }
    [
        s(
            "natveg-glasshouse",
            Diffuse,
            "natural_vegetation",
            2600.0,
            5.2,
            Sand,
            800.0,
        ),
        s(
            "natveg-coastal",
            Diffuse,
            "natural_vegetation",
            1960.0,
            6.1,
            Sand,
            150.0,
        ),
        s("grazing-north", Diffuse, "grazing", 5200.0, 6.4, Clay, 600.0),
        s("grazing-south", Diffuse, "grazing", 2300.0, 5.8, Loam, 350.0),
        s("forestry-pine", Diffuse, "forestry", 4100.0, 5.0, Sand, 900.0),
        s("agriculture-upper", Diffuse, "agriculture", 3100.0, 6.2, Loam, 400.0),
        s("agriculture-lower", Diffuse, "agriculture", 2240.0, 6.8, Clay, 120.0),
        s("stormwater-urban", Diffuse, "stormwater", 1900.0, 7.0, Clay, 60.0),
        s("stormwater-industrial", Diffuse, "stormwater", 1600.0, 6.6, Loam, 200.0),
        s("wwtp-north", Point, "wwtp", 1800.0, 7.2, Clay, 30.0),
        s("wwtp-south", Point, "wwtp", 1400.0, 6.9, Loam, 80.0),
        s("aquaculture-bay", Point, "aquaculture", 900.0, 7.5, Sand, 20.0),
        s("poultry-farm", Point, "poultry", 1100.0, 6.0, Loam, 450.0),
        s("waste-disposal", Point, "waste_disposal", 700.0, 5.4, Clay, 300.0),
    ]
};

fn build_catalogue(profiles: &BTreeMap<&str, [f64; 5]>) -> Catalogue {
    let sources = SITES
        .iter()
        .map(|s| NutrientSource {
            id: s.id.into(),
            kind: s.kind,
            category: s.category.into(),
            area_or_capacity: s.size,
            soil_ph: s.ph,
            soil_type: s.soil,
            distance_m: s.distance,
            emissions: emissions(profiles[s.category], s.category),
        })
        .collect();
    let link = |node: &str| NutrientLink {
        node: node.into(),
        states: LMH.map(String::from).to_vec(),
        thresholds: vec![0.85, 1.05],
    };
    Catalogue {
        sources,
        category_profiles: profiles
            .iter()
            .map(|(c, p)| (c.to_string(), emissions(*p, c)))
            .collect(),
        attenuation_m: 500.0,
        linkage: Linkage {
            science_model: "demo".into(),
            target: TARGET.into(),
            target_state: "Yes".into(),
            nutrients: [
                ("iron".to_string(), link(IRON)),
                ("phosphorus".to_string(), link(PHOSPHORUS)),
                ("nitrogen".to_string(), link(NITROGEN)),
                ("organics".to_string(), link(ORGANICS)),
            ]
            .into(),
        },
    }
}

/// Solves the category profiles by fixed-point iteration: each solved
/// profile depends on the reference load, which depends on all profiles.
pub fn catalogue() -> Catalogue {
    let mut profiles: BTreeMap<&str, [f64; 5]> = CATEGORIES.iter().map(|c| (*c, [0.3; 5])).collect();
    for (c, p) in FIXED_PROFILES {
        profiles.insert(c, p);
    }
    for _ in 0..500 {
        let cat = build_catalogue(&profiles);
        let cur = uniform_assignment(&cat.sources, Practice::Current);
        let reference = cat.reference_load().expect("reference load");
        let weight = |filter: &dyn Fn(&NutrientSource) -> bool| -> f64 {
            let picked: Vec<NutrientSource> = cat.sources.iter().filter(|s| filter(s)).cloned().collect();
            let ones: Vec<NutrientSource> = picked
                .into_iter()
                .map(|mut s| {
                    s.emissions = emissions([1.0; 5], "");
                    s
                })
                .collect();
            raw_load(&ones, &cur, cat.attenuation_m).expect("weights").get("iron")
        };
        let w_all = weight(&|_| true);
        let w_nv = weight(&|s| s.category == "natural_vegetation");
        let w_ag = weight(&|s| s.category == "agriculture");
        for (c, idx) in RUN_INDEX {
            let mut p = [0.0; 5];
            for (k, n) in NUTRIENT_ORDER.iter().enumerate() {
                p[k] = idx[k] * reference.get(n) / w_all;
            }
            profiles.insert(c, p);
        }
        let nv = profiles["natural_vegetation"];
        let ag = profiles["agriculture"];
        let mut next = [0.0; 5];
        for (k, n) in NUTRIENT_ORDER.iter().enumerate() {
            let t = CONVERSION_INCREASE[k];
            let r0 = reference.get(n) - w_ag * ag[k];
            next[k] = (t * r0 + w_nv * nv[k]) / (w_nv - t * w_ag);
        }
        profiles.insert("agriculture", next);
    }
    let cat = build_catalogue(&profiles);
    for (c, p) in &profiles {
        assert!(
            p.iter().all(|v| (0.0..=1.0).contains(v)),
            "profile {c} out of range: {p:?}"
        );
    }
    cat
}

pub fn interventions(cat: &Catalogue) -> Vec<(String, InterventionSpec)> {
    let mut out = Vec::new();
    for (c, _) in RUN_INDEX {
        let mut iv = InterventionSpec::recategorize_all(cat, c);
        iv.label = format!("whole catchment as {}", c.replace('_', " "));
        out.push((c.replace('_', "-"), iv));
    }
    let mut conv = InterventionSpec::convert(cat, "natural_vegetation", "agriculture");
    conv.label = "natural vegetation converted to agriculture".into();
    out.push(("agriculture-conversion".into(), conv));
    let mut storm = InterventionSpec::labeled("storm event");
    storm.extra_evidence = storm_extra();
    out.push(("storm".into(), storm));
    let mut best = InterventionSpec::labeled("best practice everywhere");
    best.practice_overrides = cat.sources.iter().map(|s| (s.id.clone(), Practice::Best)).collect();
    out.push(("best-practice".into(), best));
    out
}

pub fn scenarios() -> ScenarioSet {
    let sc = |name: &str, description: &str, evidence: Evidence, baseline: Option<&str>| Scenario {
        name: name.into(),
        description: description.into(),
        evidence,
        baseline: baseline.map(String::from),
    };
    ScenarioSet {
        model: Some("demo".into()),
        scenarios: vec![
            sc(
                "typical-year",
                "Dissolved nutrient states implied by current-practice catchment loads",
                typical_year(),
                None,
            ),
            sc(
                "storm",
                "Typical year with heavy rain, strong wind, optimal light climate and high temperature",
                storm(),
                Some("typical-year"),
            ),
            sc(
                "nutrient-pool-enough",
                "Available dissolved nutrient pool observed as enough",
                Evidence::new().with(POOL, "Enough"),
                Some("typical-year"),
            ),
            sc(
                "low-iron",
                "Dissolved iron low, other nutrients medium",
                nutrient_evidence([0, 1, 1, 1]),
                Some("typical-year"),
            ),
            sc(
                "all-nutrients-high",
                "All four dissolved nutrients high",
                nutrient_evidence([2, 2, 2, 2]),
                Some("typical-year"),
            ),
        ],
    }
}

/// Synthetic monthly series, November 1999 to March 2006 (77 months).
pub fn dataset(seed: u64) -> TimeSeriesDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n01 = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rows = Vec::with_capacity(77);
    let r1 = |x: f64| (x * 10.0).round() / 10.0;
    let mut month = 1999 * 12 + 10;
    for _ in 0..77 {
        let (y, m) = (month / 12, month % 12 + 1);
        let season = (2.0 * std::f64::consts::PI * (m as f64 - 1.0) / 12.0).cos();
        let mut e = || n01.sample(&mut rng);
        let min_temp = r1(15.0 + 5.0 * season + 1.2 * e());
        let max_temp = r1(25.5 + 3.5 * season + 1.0 * e());
        let solar = r1(18.0 + 5.0 * season + 2.0 * e());
        let clear_sky = ((0.45 - 0.1 * season + 0.08 * e()).clamp(0.05, 0.95) * 100.0).round() / 100.0;
        let rainfall = r1((90.0 + 70.0 * season + 45.0 * e()).max(0.0));
        let latent = -0.8 + (max_temp - 25.5) / 3.5 + 0.4 * (solar - 18.0) / 5.0 - 0.3 * (rainfall - 90.0) / 70.0 + e();
        rows.push(MonthlyRecord {
            month: format!("{y:04}-{m:02}"),
            bloom: (latent > 0.0) as u8,
            min_temp,
            max_temp,
            solar,
            clear_sky,
            rainfall,
        });
        month += 1;
    }
    TimeSeriesDataset::new(rows).expect("synthetic series is valid")
}

/// Writes every bundled file under `dir`.
pub fn write_all(dir: &Path, params: &Params) -> std::io::Result<Vec<String>> {
    std::fs::create_dir_all(dir.join("interventions"))?;
    let mut written = Vec::new();
    let mut save = |rel: &str, doc: ModelDocument| -> std::io::Result<()> {
        std::fs::write(dir.join(rel), doc.to_json())?;
        written.push(rel.to_string());
        Ok(())
    };
    save(
        "demo.json",
        ModelDocument::new(ModelBody::Oobn(OobnBody {
            model: science_model(params),
            target: Some(TARGET.into()),
            default_evidence: typical_year(),
            scenarios: vec![],
        })),
    )?;
    save(
        "demo-dynamic.json",
        ModelDocument::new(ModelBody::DbnTemplate(DbnBody {
            template: dynamic_template(params),
            target: Some(TARGET.into()),
            baseline_evidence: dynamic_baseline(),
        })),
    )?;
    let cat = catalogue();
    for (name, iv) in interventions(&cat) {
        save(
            &format!("interventions/{name}.json"),
            ModelDocument::new(ModelBody::Intervention(iv)),
        )?;
    }
    save("catalogue.json", ModelDocument::new(ModelBody::Catalogue(cat)))?;
    save(
        "scenarios.json",
        ModelDocument::new(ModelBody::ScenarioSet(scenarios())),
    )?;
    std::fs::write(dir.join("bloom-monthly.csv"), dataset(2008).to_csv())?;
    written.push("bloom-monthly.csv".into());
    Ok(written)
}
