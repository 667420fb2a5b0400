//! RJMCMC against the exhaustive model-posterior oracle. The frozen
//! tables come from `regenerate_oracle` in probit_oracle.rs.

use ibn_core::probit::{bma_predict, bma_summary, rjmcmc_chain, Design, JumpProposal, RjSample, RjmcmcConfig};
use ibn_oracles::{simulate_probit, ProbitProblem};

pub const FIVE_COEFS: [f64; 6] = [-0.3, 0.8, 0.0, 0.25, 0.0, -0.15];
pub const FIVE_SEED: u64 = 11;
pub const TWO_COEFS: [f64; 3] = [0.1, 0.25, 0.2];
pub const TWO_SEED: u64 = 23;
pub const PRIOR_SCALE: f64 = 3.0;
pub const ORACLE_DRAWS: usize = 1_000_000;

/// Posterior model probabilities indexed by `sum_j gamma_j 2^j`.
pub const FIVE_MODELS: [f64; 32] = [
    0.000001, 0.254851, 0.000000, 0.021731, 0.000000, 0.221726, 0.000000, 0.013467, 0.000000, 0.012160, 0.000000,
    0.001012, 0.000000, 0.010763, 0.000000, 0.000650, 0.000000, 0.284122, 0.000000, 0.034444, 0.000000, 0.112738,
    0.000000, 0.009175, 0.000000, 0.015037, 0.000000, 0.001717, 0.000000, 0.005938, 0.000000, 0.000467,
];
pub const FIVE_PREDICTIVE: [f64; 10] = [
    0.445038, 0.837684, 0.131420, 0.134861, 0.838851, 0.411306, 0.050475, 0.635672, 0.752969, 0.072336,
];
pub const TWO_MODELS: [f64; 4] = [0.252690, 0.468935, 0.105690, 0.172685];

pub fn five() -> ProbitProblem {
    simulate_probit(100, &FIVE_COEFS, PRIOR_SCALE, FIVE_SEED)
}

pub fn two() -> ProbitProblem {
    simulate_probit(100, &TWO_COEFS, PRIOR_SCALE, TWO_SEED)
}

pub fn test_points() -> Vec<Vec<f64>> {
    (0..10)
        .map(|t| (0..5).map(|j| 1.5 * ((5 * t + j) as f64 * 0.37 + 0.2).sin()).collect())
        .collect()
}

pub fn design(p: &ProbitProblem) -> Design {
    let names = (0..p.candidates()).map(|j| format!("x{j}")).collect();
    Design::from_rows(names, &p.x, p.y.clone()).unwrap()
}

pub fn visit_distribution(samples: &[RjSample], k: usize) -> Vec<f64> {
    let mut freq = vec![0.0; 1 << k];
    for s in samples {
        freq[s.model_index() as usize] += 1.0;
    }
    freq.iter().map(|c| c / samples.len() as f64).collect()
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

pub fn config(iterations: usize, seed: u64, proposal: JumpProposal) -> RjmcmcConfig {
    RjmcmcConfig {
        prior_scale: PRIOR_SCALE,
        iterations,
        burn_in: 5_000,
        seed,
        thin: 1,
        proposal,
    }
}

/// Max total variation over both jump proposals.
pub fn five_candidate_visits() -> f64 {
    let d = design(&five());
    let mut worst: f64 = 0.0;
    for proposal in [JumpProposal::Prior, JumpProposal::Conditional] {
        let chain = rjmcmc_chain(&d, &config(100_000, 3, proposal)).unwrap();
        let freq = visit_distribution(&chain.samples, 5);
        let tv = total_variation(&freq, &FIVE_MODELS);
        assert!(tv < 0.05, "{proposal:?}: TV {tv}");
        worst = worst.max(tv);

        let summary = bma_summary(&chain.samples, &d.names).unwrap();
        let top = &summary.models[0];
        let idx: usize = top
            .gamma
            .iter()
            .enumerate()
            .filter(|(_, &g)| g)
            .map(|(j, _)| 1 << j)
            .sum();
        let oracle_top = FIVE_MODELS.iter().cloned().fold(0.0, f64::max);
        assert_eq!(
            FIVE_MODELS[idx], oracle_top,
            "{proposal:?}: sampler top model differs from oracle"
        );
        assert!((top.probability.value - oracle_top).abs() < 0.05);

        for (x, want) in test_points().iter().zip(FIVE_PREDICTIVE) {
            let got = bma_predict(&chain.samples, x).unwrap();
            assert!((got - want).abs() < 0.02, "{proposal:?}: predictive {got} vs {want}");
        }
    }
    worst
}

pub fn two_candidate_tv() -> f64 {
    let d = design(&two());
    let chain = rjmcmc_chain(&d, &config(100_000, 7, JumpProposal::Prior)).unwrap();
    let tv = total_variation(&visit_distribution(&chain.samples, 2), &TWO_MODELS);
    assert!(tv < 0.03, "TV {tv}");
    tv
}

/// Inclusion probability of the one strong covariate among 17 candidates.
pub fn strong_covariate_inclusion() -> f64 {
    let mut coefs = vec![0.0; 18];
    coefs[5] = 2.0;
    let d = design(&simulate_probit(200, &coefs, PRIOR_SCALE, 31));
    let chain = rjmcmc_chain(&d, &config(20_000, 1, JumpProposal::Prior)).unwrap();
    let s = bma_summary(&chain.samples, &d.names).unwrap();
    let p = s.inclusion[4].probability.value;
    assert!(p > 0.9, "{:?}", s.inclusion[4]);
    p
}

/// Posterior mass of the top model, which must be the empty one.
pub fn null_data_top_model() -> f64 {
    let d = design(&simulate_probit(200, &[0.0; 18], PRIOR_SCALE, 41));
    let chain = rjmcmc_chain(&d, &config(20_000, 1, JumpProposal::Prior)).unwrap();
    let s = bma_summary(&chain.samples, &d.names).unwrap();
    assert!(
        s.models[0].gamma.iter().all(|g| !g),
        "top model {:?}",
        s.models[0].gamma
    );
    s.models[0].probability.value
}

pub fn same_seed_same_stream() {
    let d = design(&five());
    let cfg = config(8_000, 99, JumpProposal::Prior);
    let a = rjmcmc_chain(&d, &cfg).unwrap();
    let b = rjmcmc_chain(&d, &cfg).unwrap();
    assert_eq!(a.samples, b.samples);
    let c = rjmcmc_chain(&d, &RjmcmcConfig { seed: 100, ..cfg }).unwrap();
    assert_ne!(a.samples, c.samples);
}
