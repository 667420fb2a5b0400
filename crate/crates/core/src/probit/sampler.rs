//! Reversible-jump sampler over covariate subsets for the probit model.
//!
//! Each iteration makes one birth/death proposal on a uniformly chosen
//! candidate, then refreshes the latent utilities and the included
//! coefficients by data augmentation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::design::Design;
use super::truncnorm::draw_latent;
use super::ProbitError;
use crate::exec::Execution;

/// How a birth move draws the new coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpProposal {
    /// From the coefficient prior; accepted on the probit likelihood ratio.
    #[default]
    Prior,
    /// From its Gaussian full conditional given the latent utilities.
    Conditional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RjmcmcConfig {
    #[serde(default = "default_scale")]
    pub prior_scale: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default)]
    pub proposal: JumpProposal,
}

fn default_scale() -> f64 {
    3.0
}

fn default_thin() -> usize {
    1
}

impl Default for RjmcmcConfig {
    fn default() -> Self {
        RjmcmcConfig {
            prior_scale: 3.0,
            iterations: 20_000,
            burn_in: 2_000,
            seed: 1,
            thin: 1,
            proposal: JumpProposal::Prior,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RjSample {
    pub gamma: Vec<bool>,
    /// Intercept first, then included candidates in candidate order.
    pub beta: Vec<f64>,
}

impl RjSample {
    /// Model index `sum_j gamma_j 2^j`.
    pub fn model_index(&self) -> u64 {
        self.gamma
            .iter()
            .enumerate()
            .filter(|(_, &g)| g)
            .map(|(j, _)| 1u64 << j)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub births_proposed: usize,
    pub births_accepted: usize,
    pub deaths_proposed: usize,
    pub deaths_accepted: usize,
}

impl ChainDiagnostics {
    pub fn acceptance_rate(&self) -> f64 {
        let p = self.births_proposed + self.deaths_proposed;
        if p == 0 {
            0.0
        } else {
            (self.births_accepted + self.deaths_accepted) as f64 / p as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub samples: Vec<RjSample>,
    pub diagnostics: ChainDiagnostics,
}

/// ln Phi(x), accurate far into the lower tail.
pub fn log_norm_cdf(x: f64) -> f64 {
    if x > -30.0 {
        (0.5 * erfc(-x / std::f64::consts::SQRT_2)).ln()
    } else {
        let x2 = x * x;
        -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

fn log_lik(y: &[bool], eta: &[f64]) -> f64 {
    y.iter()
        .zip(eta)
        .map(|(&yi, &e)| log_norm_cdf(if yi { e } else { -e }))
        .sum()
}

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((x - mean).powi(2) / var + var.ln() + (2.0 * std::f64::consts::PI).ln())
}

struct State<'a> {
    /// n × (K+1), intercept in column 0.
    x: &'a DMatrix<f64>,
    y: &'a [bool],
    s2: f64,
    /// Inclusion per design column; column 0 always on.
    active: Vec<bool>,
    beta: Vec<f64>,
    eta: Vec<f64>,
    z: Vec<f64>,
}

impl State<'_> {
    fn col_dot(&self, j: usize, v: &[f64]) -> f64 {
        self.x.column(j).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    fn shift_eta(&self, j: usize, b: f64) -> Vec<f64> {
        self.eta
            .iter()
            .zip(self.x.column(j).iter())
            .map(|(e, xj)| e + xj * b)
            .collect()
    }

    fn latent_sq(&self, eta: &[f64]) -> f64 {
        self.z.iter().zip(eta).map(|(z, e)| (z - e).powi(2)).sum()
    }

    /// Full conditional N(m, v) of coefficient `j` given the latent
    /// utilities and the linear predictor `eta` excluding `j`.
    fn conditional(&self, j: usize, eta_without: &[f64]) -> (f64, f64) {
        let r: Vec<f64> = self.z.iter().zip(eta_without).map(|(z, e)| z - e).collect();
        let v = 1.0 / (self.col_dot(j, self.x.column(j).as_slice()) + 1.0 / self.s2);
        (v * self.col_dot(j, &r), v)
    }

    fn jump<R: Rng>(
        &mut self,
        rng: &mut R,
        proposal: JumpProposal,
        diag: &mut ChainDiagnostics,
    ) -> Result<(), ProbitError> {
        let k = self.x.ncols() - 1;
        let j = 1 + rng.random_range(0..k);
        let birth = !self.active[j];
        let (b, eta_new, log_alpha);
        if birth {
            diag.births_proposed += 1;
            match proposal {
                JumpProposal::Prior => {
                    let e: f64 = StandardNormal.sample(rng);
                    b = e * self.s2.sqrt();
                    eta_new = self.shift_eta(j, b);
                    log_alpha = log_lik(self.y, &eta_new) - log_lik(self.y, &self.eta);
                }
                JumpProposal::Conditional => {
                    let (m, v) = self.conditional(j, &self.eta);
                    let e: f64 = StandardNormal.sample(rng);
                    b = m + e * v.sqrt();
                    eta_new = self.shift_eta(j, b);
                    log_alpha = -0.5 * (self.latent_sq(&eta_new) - self.latent_sq(&self.eta))
                        + log_normal(b, 0.0, self.s2)
                        - log_normal(b, m, v);
                }
            }
        } else {
            diag.deaths_proposed += 1;
            b = 0.0;
            eta_new = self.shift_eta(j, -self.beta[j]);
            log_alpha = match proposal {
                JumpProposal::Prior => log_lik(self.y, &eta_new) - log_lik(self.y, &self.eta),
                JumpProposal::Conditional => {
                    let (m, v) = self.conditional(j, &eta_new);
                    -0.5 * (self.latent_sq(&eta_new) - self.latent_sq(&self.eta)) + log_normal(self.beta[j], m, v)
                        - log_normal(self.beta[j], 0.0, self.s2)
                }
            };
        }
        if log_alpha.is_nan() {
            return Err(ProbitError::NumericalFailure(format!(
                "acceptance ratio is NaN ({} of candidate {}, coefficient {b})",
                if birth { "birth" } else { "death" },
                j - 1
            )));
        }
        let u: f64 = rng.random();
        if u.ln() < log_alpha {
            self.active[j] = birth;
            self.beta[j] = b;
            self.eta = eta_new;
            if birth {
                diag.births_accepted += 1;
            } else {
                diag.deaths_accepted += 1;
            }
        }
        Ok(())
    }

    fn refresh_latent<R: Rng>(&mut self, rng: &mut R) {
        for i in 0..self.z.len() {
            self.z[i] = draw_latent(rng, self.eta[i], self.y[i]);
        }
    }

    /// Conjugate draw of the included coefficients given the latents.
    fn refresh_beta<R: Rng>(&mut self, rng: &mut R) -> Result<(), ProbitError> {
        let cols: Vec<usize> = (0..self.active.len()).filter(|&c| self.active[c]).collect();
        let p = cols.len();
        let mut prec = DMatrix::<f64>::zeros(p, p);
        let mut rhs = DVector::<f64>::zeros(p);
        for (a, &ca) in cols.iter().enumerate() {
            rhs[a] = self.col_dot(ca, &self.z);
            for (b, &cb) in cols.iter().enumerate().skip(a) {
                let v = self.col_dot(ca, self.x.column(cb).as_slice());
                prec[(a, b)] = v;
                prec[(b, a)] = v;
            }
            prec[(a, a)] += 1.0 / self.s2;
        }
        let chol = prec
            .cholesky()
            .ok_or_else(|| ProbitError::NumericalFailure("coefficient precision is not positive definite".into()))?;
        let mean = chol.solve(&rhs);
        let eps = DVector::<f64>::from_fn(p, |_, _| StandardNormal.sample(rng));
        let noise = chol
            .l()
            .transpose()
            .solve_upper_triangular(&eps)
            .ok_or_else(|| ProbitError::NumericalFailure("singular Cholesky factor".into()))?;
        for (a, &c) in cols.iter().enumerate() {
            self.beta[c] = mean[a] + noise[a];
        }
        let n = self.eta.len();
        for i in 0..n {
            self.eta[i] = cols.iter().map(|&c| self.x[(i, c)] * self.beta[c]).sum();
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(ProbitError::NumericalFailure("non-finite coefficient draw".into()));
        }
        Ok(())
    }

    fn sample(&self) -> RjSample {
        RjSample {
            gamma: self.active[1..].to_vec(),
            beta: (0..self.active.len())
                .filter(|&c| self.active[c])
                .map(|c| self.beta[c])
                .collect(),
        }
    }
}

fn with_intercept(design: &Design) -> DMatrix<f64> {
    let n = design.rows();
    let k = design.candidates();
    DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { design.x[(i, j - 1)] })
}

impl RjmcmcConfig {
    /// Checks the settings that do not depend on the design.
    pub fn validate(&self) -> Result<(), ProbitError> {
        if self.iterations <= self.burn_in {
            return Err(ProbitError::InvalidConfig("iterations must exceed burn_in".into()));
        }
        if !(self.prior_scale > 0.0 && self.prior_scale.is_finite()) {
            return Err(ProbitError::InvalidConfig("prior_scale must be positive".into()));
        }
        if self.thin == 0 {
            return Err(ProbitError::InvalidConfig("thin must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_config(design: &Design, config: &RjmcmcConfig) -> Result<(), ProbitError> {
    config.validate()?;
    if design.y.len() != design.rows() {
        return Err(ProbitError::DimensionMismatch {
            expected: design.rows(),
            found: design.y.len(),
        });
    }
    if design.candidates() == 0 {
        return Err(ProbitError::InvalidConfig("design has no candidate columns".into()));
    }
    Ok(())
}

/// One chain, starting from the null model. Deterministic given the seed.
pub fn rjmcmc_chain(design: &Design, config: &RjmcmcConfig) -> Result<Chain, ProbitError> {
    check_config(design, config)?;
    let x = with_intercept(design);
    let n = design.rows();
    let cols = x.ncols();
    let mut active = vec![false; cols];
    active[0] = true;
    let mut state = State {
        x: &x,
        y: &design.y,
        s2: config.prior_scale * config.prior_scale,
        active,
        beta: vec![0.0; cols],
        eta: vec![0.0; n],
        z: vec![0.0; n],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut diag = ChainDiagnostics::default();
    state.refresh_latent(&mut rng);
    state.refresh_beta(&mut rng)?;
    let keep = (config.iterations - config.burn_in).div_ceil(config.thin);
    let mut samples = Vec::with_capacity(keep);
    for it in 0..config.iterations {
        state.jump(&mut rng, config.proposal, &mut diag)?;
        state.refresh_latent(&mut rng);
        state.refresh_beta(&mut rng)?;
        if it >= config.burn_in && (it - config.burn_in).is_multiple_of(config.thin) {
            samples.push(state.sample());
        }
    }
    Ok(Chain {
        samples,
        diagnostics: diag,
    })
}

/// Samples after burn-in from one chain.
pub fn rjmcmc_fit(design: &Design, config: &RjmcmcConfig) -> Result<Vec<RjSample>, ProbitError> {
    rjmcmc_chain(design, config).map(|c| c.samples)
}

/// Independent chains seeded `seed, seed+1, ...`.
pub fn rjmcmc_chains(
    design: &Design,
    config: &RjmcmcConfig,
    chains: usize,
    exec: Execution,
) -> Result<Vec<Chain>, ProbitError> {
    let configs: Vec<RjmcmcConfig> = (0..chains as u64)
        .map(|c| RjmcmcConfig {
            seed: config.seed.wrapping_add(c),
            ..config.clone()
        })
        .collect();
    exec.try_map(&configs, |cfg| rjmcmc_chain(design, cfg))
}
