use ibn_core::management::{hazard_score, HazardClass, SoilType};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SOILS: [SoilType; 3] = [SoilType::Clay, SoilType::Loam, SoilType::Sand];

/// Every emission × mobility × proximity band combination against
/// score = E·M·D and its class. Returns the number of cases checked.
pub fn exhaustive_table() -> usize {
    let emission = [(0.1, 1), (0.5, 2), (0.9, 3)];
    let mobility = [(SoilType::Clay, 1), (SoilType::Loam, 2), (SoilType::Sand, 3)];
    let proximity = [(1000.0, 1), (300.0, 2), (50.0, 3)];
    let mut seen = 0;
    for (p, e) in emission {
        for (soil, m) in mobility {
            for (dist, d) in proximity {
                let r = hazard_score(p, soil, 7.0, dist);
                let score = e * m * d;
                let class = match score {
                    0..=3 => HazardClass::Negligible,
                    4..=8 => HazardClass::Low,
                    9..=16 => HazardClass::Moderate,
                    _ => HazardClass::High,
                };
                assert_eq!((r.score, r.value), (score, class), "p {p} {soil:?} {dist} m");
                seen += 1;
            }
        }
    }
    // acid soil bumps mobility by one band, capped at sand
    assert_eq!(hazard_score(0.1, SoilType::Clay, 5.0, 1000.0).score, 2);
    assert_eq!(hazard_score(0.1, SoilType::Sand, 5.0, 1000.0).score, 3);
    seen
}

/// Raising emission, coarsening soil or moving closer never lowers the score.
pub fn monotone_under_perturbation(p: f64, dp: f64, soil: usize, up: usize, ph: f64, d: f64, closer: f64) {
    let base = hazard_score(p, SOILS[soil], ph, d).score;
    assert!(hazard_score((p + dp).min(1.0), SOILS[soil], ph, d).score >= base);
    assert!(hazard_score(p, SOILS[(soil + up).min(2)], ph, d).score >= base);
    assert!(hazard_score(p, SOILS[soil], ph, d * closer).score >= base);
}

pub fn random_perturbations(cases: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cases {
        monotone_under_perturbation(
            rng.random_range(0.0..=1.0),
            rng.random_range(0.0..=1.0),
            rng.random_range(0..3),
            rng.random_range(0..3),
            rng.random_range(4.0..8.5),
            rng.random_range(0.0..2000.0),
            rng.random_range(0.0..1.0),
        );
    }
}
