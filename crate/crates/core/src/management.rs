//! Management catalogue: nutrient sources with practice-dependent emission
//! probabilities, the hazard rubric, and catchment load aggregation.
//!
//! Nothing here propagates probabilities. Every operation is a
//! deterministic function of the catalogue data.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::Evidence;

/// Nutrient keys a catalogue may use. Potassium has no science-model node.
pub const NUTRIENTS: [&str; 5] = ["nitrogen", "phosphorus", "iron", "organics", "potassium"];

pub const DEFAULT_ATTENUATION_M: f64 = 500.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManagementError {
    #[error("source `{source_id}` has no emission entry for ({practice}, {nutrient})")]
    MissingEmissionEntry {
        source_id: String,
        practice: Practice,
        nutrient: String,
    },
    #[error("source `{0}` has no practice assigned")]
    UnassignedSource(String),
    #[error("unknown source `{0}`")]
    UnknownSource(String),
    #[error("unknown land-use category `{0}`")]
    UnknownCategory(String),
    #[error("unknown nutrient `{0}`")]
    UnknownNutrient(String),
    #[error("duplicate source id `{0}`")]
    DuplicateSource(String),
    #[error("thresholds for `{0}` are not strictly increasing")]
    ThresholdOrderError(String),
    #[error("nutrient `{nutrient}` maps to {states} states but has {thresholds} thresholds")]
    ThresholdCount {
        nutrient: String,
        states: usize,
        thresholds: usize,
    },
    #[error("invalid value for {field} of `{source_id}`: {value}")]
    InvalidValue {
        source_id: String,
        field: &'static str,
        value: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Practice {
    Current,
    Planned,
    Best,
}

impl Practice {
    pub const ALL: [Practice; 3] = [Practice::Current, Practice::Planned, Practice::Best];

    pub fn as_str(self) -> &'static str {
        match self {
            Practice::Current => "current",
            Practice::Planned => "planned",
            Practice::Best => "best",
        }
    }
}

impl fmt::Display for Practice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Practice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Practice::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown practice `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Point,
    Diffuse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SoilType {
    Clay,
    Loam,
    Sand,
}

/// (practice, nutrient) → P(high emission).
pub type Emissions = BTreeMap<Practice, BTreeMap<String, f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NutrientSource {
    pub id: String,
    pub kind: SourceKind,
    pub category: String,
    /// Hectares for diffuse sources, capacity units for point sources.
    pub area_or_capacity: f64,
    pub soil_ph: f64,
    pub soil_type: SoilType,
    pub distance_m: f64,
    pub emissions: Emissions,
}

impl NutrientSource {
    pub fn p_high(&self, practice: Practice, nutrient: &str) -> Result<f64, ManagementError> {
        self.emissions
            .get(&practice)
            .and_then(|m| m.get(nutrient))
            .copied()
            .ok_or_else(|| ManagementError::MissingEmissionEntry {
                source_id: self.id.clone(),
                practice,
                nutrient: nutrient.to_string(),
            })
    }

    fn validate(&self) -> Result<(), ManagementError> {
        let bad = |field, value| ManagementError::InvalidValue {
            source_id: self.id.clone(),
            field,
            value,
        };
        if !(self.area_or_capacity >= 0.0 && self.area_or_capacity.is_finite()) {
            return Err(bad("area_or_capacity", self.area_or_capacity));
        }
        if !(self.distance_m >= 0.0 && self.distance_m.is_finite()) {
            return Err(bad("distance_m", self.distance_m));
        }
        if !(0.0..=14.0).contains(&self.soil_ph) {
            return Err(bad("soil_ph", self.soil_ph));
        }
        validate_emissions(&self.id, &self.emissions)
    }
}

fn validate_emissions(owner: &str, emissions: &Emissions) -> Result<(), ManagementError> {
    for table in emissions.values() {
        for (nutrient, &p) in table {
            if !NUTRIENTS.contains(&nutrient.as_str()) {
                return Err(ManagementError::UnknownNutrient(nutrient.clone()));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(ManagementError::InvalidValue {
                    source_id: owner.to_string(),
                    field: "emission probability",
                    value: p,
                });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HazardClass {
    Negligible,
    Low,
    Moderate,
    High,
}

impl HazardClass {
    pub fn from_score(score: u8) -> HazardClass {
        match score {
            0..=3 => HazardClass::Negligible,
            4..=8 => HazardClass::Low,
            9..=16 => HazardClass::Moderate,
            _ => HazardClass::High,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HazardRating {
    pub value: HazardClass,
    pub score: u8,
}

pub fn emission_band(p_high: f64) -> u8 {
    if p_high < 1.0 / 3.0 {
        1
    } else if p_high < 2.0 / 3.0 {
        2
    } else {
        3
    }
}

pub fn mobility(soil: SoilType, ph: f64) -> u8 {
    let base = match soil {
        SoilType::Sand => 3,
        SoilType::Loam => 2,
        SoilType::Clay => 1,
    };
    if ph < 5.5 {
        (base + 1).min(3)
    } else {
        base
    }
}

pub fn proximity(distance_m: f64) -> u8 {
    if distance_m < 100.0 {
        3
    } else if distance_m < 500.0 {
        2
    } else {
        1
    }
}

/// Rubric score E × M × D and its band.
pub fn hazard_score(p_high: f64, soil: SoilType, ph: f64, distance_m: f64) -> HazardRating {
    let score = emission_band(p_high) * mobility(soil, ph) * proximity(distance_m);
    HazardRating {
        value: HazardClass::from_score(score),
        score,
    }
}

pub fn hazard_rating(
    source: &NutrientSource,
    practice: Practice,
    nutrient: &str,
) -> Result<HazardRating, ManagementError> {
    let p = source.p_high(practice, nutrient)?;
    Ok(hazard_score(p, source.soil_type, source.soil_ph, source.distance_m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardRow {
    pub source: String,
    pub practice: Practice,
    pub nutrient: String,
    pub p_high: f64,
    pub rating: HazardRating,
}

/// One row per (source, practice, nutrient) entry in the catalogue.
pub fn hazard_report(sources: &[NutrientSource]) -> Vec<HazardRow> {
    let mut rows = Vec::new();
    for s in sources {
        for (&practice, table) in &s.emissions {
            for (nutrient, &p) in table {
                rows.push(HazardRow {
                    source: s.id.clone(),
                    practice,
                    nutrient: nutrient.clone(),
                    p_high: p,
                    rating: hazard_score(p, s.soil_type, s.soil_ph, s.distance_m),
                });
            }
        }
    }
    rows
}

/// Per-nutrient load, either raw or as an index relative to the baseline.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NutrientLoad(pub BTreeMap<String, f64>);

impl NutrientLoad {
    pub fn get(&self, nutrient: &str) -> f64 {
        self.0.get(nutrient).copied().unwrap_or(0.0)
    }

    /// Mean index over the nutrient keys present.
    pub fn total_index(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0.values().sum::<f64>() / self.0.len() as f64
    }

    pub fn add(&self, other: &NutrientLoad) -> NutrientLoad {
        let mut out = self.0.clone();
        for (k, v) in &other.0 {
            *out.entry(k.clone()).or_insert(0.0) += v;
        }
        NutrientLoad(out)
    }
}

/// Practice per source id.
pub type Assignment = BTreeMap<String, Practice>;

pub fn uniform_assignment(sources: &[NutrientSource], practice: Practice) -> Assignment {
    sources.iter().map(|s| (s.id.clone(), practice)).collect()
}

/// Transport weight of a source: exp(-d/λ) × M/3.
pub fn transport_factor(source: &NutrientSource, attenuation_m: f64) -> f64 {
    (-source.distance_m / attenuation_m).exp() * f64::from(mobility(source.soil_type, source.soil_ph)) / 3.0
}

/// Unnormalized load delivered to the receiving waters.
pub fn raw_load(
    sources: &[NutrientSource],
    assignment: &Assignment,
    attenuation_m: f64,
) -> Result<NutrientLoad, ManagementError> {
    let mut out: BTreeMap<String, f64> = BTreeMap::new();
    for s in sources {
        let practice = *assignment
            .get(&s.id)
            .ok_or_else(|| ManagementError::UnassignedSource(s.id.clone()))?;
        let table = s
            .emissions
            .get(&practice)
            .ok_or_else(|| ManagementError::MissingEmissionEntry {
                source_id: s.id.clone(),
                practice,
                nutrient: "*".into(),
            })?;
        let w = s.area_or_capacity * transport_factor(s, attenuation_m);
        for (n, &p) in table {
            *out.entry(n.clone()).or_insert(0.0) += w * p;
        }
    }
    Ok(NutrientLoad(out))
}

/// Science-model node fed by one nutrient, with its cut points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NutrientLink {
    pub node: String,
    pub states: Vec<String>,
    /// Strictly increasing; a load on a cut point takes the higher state.
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Linkage {
    /// Model id of the science network.
    pub science_model: String,
    pub target: String,
    pub target_state: String,
    pub nutrients: BTreeMap<String, NutrientLink>,
}

impl Linkage {
    pub fn validate(&self) -> Result<(), ManagementError> {
        for (n, link) in &self.nutrients {
            if !NUTRIENTS.contains(&n.as_str()) {
                return Err(ManagementError::UnknownNutrient(n.clone()));
            }
            if link.states.len() != link.thresholds.len() + 1 {
                return Err(ManagementError::ThresholdCount {
                    nutrient: n.clone(),
                    states: link.states.len(),
                    thresholds: link.thresholds.len(),
                });
            }
            if link.thresholds.windows(2).any(|w| !(w[0] < w[1])) || link.thresholds.iter().any(|t| !t.is_finite()) {
                return Err(ManagementError::ThresholdOrderError(n.clone()));
            }
        }
        Ok(())
    }
}

/// Maps each linked nutrient's load index to a state of its science node.
/// Nutrients without a link are ignored.
pub fn load_to_evidence(load: &NutrientLoad, linkage: &Linkage) -> Result<Evidence, ManagementError> {
    linkage.validate()?;
    let mut ev = Evidence::new();
    for (nutrient, link) in &linkage.nutrients {
        let x = load.get(nutrient);
        let k = link.thresholds.iter().filter(|&&t| x >= t).count();
        ev.insert(link.node.clone(), link.states[k].clone());
    }
    Ok(ev)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Catalogue {
    pub sources: Vec<NutrientSource>,
    /// Emission profile used when a source is recategorized.
    #[serde(default)]
    pub category_profiles: BTreeMap<String, Emissions>,
    #[serde(default = "default_attenuation")]
    pub attenuation_m: f64,
    pub linkage: Linkage,
}

fn default_attenuation() -> f64 {
    DEFAULT_ATTENUATION_M
}

impl Catalogue {
    pub fn source(&self, id: &str) -> Option<&NutrientSource> {
        self.sources.iter().find(|s| s.id == id)
    }

    pub fn validate(&self) -> Result<(), ManagementError> {
        let mut ids = BTreeSet::new();
        for s in &self.sources {
            if !ids.insert(s.id.as_str()) {
                return Err(ManagementError::DuplicateSource(s.id.clone()));
            }
            s.validate()?;
        }
        for (cat, e) in &self.category_profiles {
            validate_emissions(cat, e)?;
        }
        if !(self.attenuation_m > 0.0 && self.attenuation_m.is_finite()) {
            return Err(ManagementError::InvalidValue {
                source_id: "<catalogue>".into(),
                field: "attenuation_m",
                value: self.attenuation_m,
            });
        }
        self.linkage.validate()
    }

    pub fn total_area(&self, kind: SourceKind) -> f64 {
        self.sources
            .iter()
            .filter(|s| s.kind == kind)
            .map(|s| s.area_or_capacity)
            .sum()
    }

    /// Share of diffuse area in `category`.
    pub fn area_share(&self, category: &str) -> f64 {
        let cat: f64 = self
            .sources
            .iter()
            .filter(|s| s.kind == SourceKind::Diffuse && s.category == category)
            .map(|s| s.area_or_capacity)
            .sum();
        cat / self.total_area(SourceKind::Diffuse)
    }

    /// Sources with the given ids moved to new categories, taking the
    /// category's emission profile.
    pub fn recategorize(&self, overrides: &BTreeMap<String, String>) -> Result<Vec<NutrientSource>, ManagementError> {
        for (id, cat) in overrides {
            if self.source(id).is_none() {
                return Err(ManagementError::UnknownSource(id.clone()));
            }
            if !self.category_profiles.contains_key(cat) {
                return Err(ManagementError::UnknownCategory(cat.clone()));
            }
        }
        Ok(self
            .sources
            .iter()
            .map(|s| match overrides.get(&s.id) {
                Some(cat) => NutrientSource {
                    category: cat.clone(),
                    emissions: self.category_profiles[cat].clone(),
                    ..s.clone()
                },
                None => s.clone(),
            })
            .collect())
    }

    /// Raw current-practice load of the catalogue as given; the
    /// normalization constant for load indices.
    pub fn reference_load(&self) -> Result<NutrientLoad, ManagementError> {
        raw_load(
            &self.sources,
            &uniform_assignment(&self.sources, Practice::Current),
            self.attenuation_m,
        )
    }

    /// Load index of `sources` (typically recategorized copies of this
    /// catalogue's sources) relative to the reference load.
    pub fn load_index(
        &self,
        sources: &[NutrientSource],
        assignment: &Assignment,
    ) -> Result<NutrientLoad, ManagementError> {
        let reference = self.reference_load()?;
        let raw = raw_load(sources, assignment, self.attenuation_m)?;
        Ok(normalize(&raw, &reference))
    }
}

/// Divides each nutrient by its reference; a zero reference gives 0.
pub fn normalize(raw: &NutrientLoad, reference: &NutrientLoad) -> NutrientLoad {
    NutrientLoad(
        raw.0
            .iter()
            .map(|(n, &v)| {
                let r = reference.get(n);
                (n.clone(), if r > 0.0 { v / r } else { 0.0 })
            })
            .collect(),
    )
}

/// Load index of the catalogue under `assignment`, normalized so the
/// all-current baseline is exactly 1.0 for every nutrient it emits.
pub fn catchment_load(catalogue: &Catalogue, assignment: &Assignment) -> Result<NutrientLoad, ManagementError> {
    catalogue.load_index(&catalogue.sources, assignment)
}
