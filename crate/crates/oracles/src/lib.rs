//! Brute-force reference computations for the test suites.
//!
//! Nothing here depends on `ibn-core`: every oracle works on plain parent
//! lists, adjacency sets, probability tables and matrices so it cannot share
//! a code path with the implementation it checks.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::erf::erfc;

/// d-separation by Lauritzen's criterion: moralize the ancestral graph of
/// `x ∪ y ∪ z`, delete `z`, and test undirected connectivity.
pub fn dsep_by_moralization(parents: &[Vec<usize>], x: &[usize], y: &[usize], z: &[usize]) -> bool {
    let n = parents.len();
    let mut anc = vec![false; n];
    let mut stack: Vec<usize> = x.iter().chain(y).chain(z).copied().collect();
    while let Some(v) = stack.pop() {
        if !anc[v] {
            anc[v] = true;
            stack.extend(parents[v].iter().copied());
        }
    }
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for v in (0..n).filter(|&v| anc[v]) {
        for (i, &p) in parents[v].iter().enumerate() {
            adj[v].insert(p);
            adj[p].insert(v);
            for &q in &parents[v][i + 1..] {
                adj[p].insert(q);
                adj[q].insert(p);
            }
        }
    }
    let blocked: BTreeSet<usize> = z.iter().copied().collect();
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = x.iter().copied().collect();
    for &s in x {
        seen[s] = true;
    }
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] && !blocked.contains(&w) {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    y.iter().all(|&v| !seen[v])
}

/// Induced width (largest neighbour set at elimination time) of an order.
pub fn induced_width(adj: &[BTreeSet<usize>], order: &[usize]) -> usize {
    let mut g = adj.to_vec();
    let mut width = 0;
    for &v in order {
        let nb: Vec<usize> = g[v].iter().copied().collect();
        width = width.max(nb.len());
        for &a in &nb {
            for &b in &nb {
                if a != b {
                    g[a].insert(b);
                }
            }
            g[a].remove(&v);
        }
        g[v].clear();
    }
    width
}

/// Minimum induced width over every permutation of `vars`.
pub fn optimal_induced_width(adj: &[BTreeSet<usize>], vars: &[usize]) -> usize {
    fn rec(adj: &[BTreeSet<usize>], rest: &mut Vec<usize>, order: &mut Vec<usize>, best: &mut usize) {
        if rest.is_empty() {
            *best = (*best).min(induced_width(adj, order));
            return;
        }
        for i in 0..rest.len() {
            let v = rest.remove(i);
            order.push(v);
            rec(adj, rest, order, best);
            order.pop();
            rest.insert(i, v);
        }
    }
    let mut best = usize::MAX;
    rec(adj, &mut vars.to_vec(), &mut Vec::new(), &mut best);
    if vars.is_empty() {
        0
    } else {
        best
    }
}

/// Mutual information in bits of a row-major `ca × cb` joint table
/// (normalized internally).
pub fn mutual_information_bits(joint: &[f64], ca: usize, cb: usize) -> f64 {
    let total: f64 = joint.iter().sum();
    let p: Vec<f64> = joint.iter().map(|x| x / total).collect();
    let pa: Vec<f64> = (0..ca).map(|i| (0..cb).map(|j| p[i * cb + j]).sum()).collect();
    let pb: Vec<f64> = (0..cb).map(|j| (0..ca).map(|i| p[i * cb + j]).sum()).collect();
    let mut mi = 0.0;
    for i in 0..ca {
        for j in 0..cb {
            let pij = p[i * cb + j];
            if pij > 0.0 {
                mi += pij * (pij / (pa[i] * pb[j])).log2();
            }
        }
    }
    mi.max(0.0)
}

/// Sums a row-major joint over every axis except `a` and `b`, returning a
/// `cards[a] × cards[b]` table.
pub fn pair_table(joint: &[f64], cards: &[usize], a: usize, b: usize) -> Vec<f64> {
    let mut out = vec![0.0; cards[a] * cards[b]];
    let mut assign = vec![0usize; cards.len()];
    for &x in joint {
        out[assign[a] * cards[b] + assign[b]] += x;
        for k in (0..cards.len()).rev() {
            assign[k] += 1;
            if assign[k] < cards[k] {
                break;
            }
            assign[k] = 0;
        }
    }
    out
}

fn log_phi(x: f64) -> f64 {
    if x > -8.0 {
        (0.5 * erfc(-x / std::f64::consts::SQRT_2)).ln()
    } else {
        let x2 = x * x;
        -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse Mills ratio φ(x)/Φ(x).
fn mills(x: f64) -> f64 {
    let log_pdf = -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln();
    (log_pdf - log_phi(x)).exp()
}

/// A probit variable-selection problem: rows of candidate covariates (no
/// intercept column), binary responses, and the N(0, s²) coefficient prior
/// shared by the intercept and every included coefficient.
#[derive(Debug, Clone)]
pub struct ProbitProblem {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<bool>,
    pub prior_scale: f64,
}

#[derive(Debug, Clone)]
pub struct ModelPosterior {
    /// Inclusion mask over candidates; index of a model is `Σ γ_j 2^j`.
    pub gamma: Vec<bool>,
    pub log_marginal: f64,
    pub probability: f64,
    /// Posterior mean of Φ(η) at each test point under this model.
    pub predictive: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ProbitOracle {
    pub models: Vec<ModelPosterior>,
    /// Model-averaged predictive at each test point.
    pub bma_predictive: Vec<f64>,
}

impl ProbitProblem {
    pub fn candidates(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    fn design(&self, gamma: &[bool]) -> DMatrix<f64> {
        let cols: Vec<usize> = (0..gamma.len()).filter(|&j| gamma[j]).collect();
        DMatrix::from_fn(self.x.len(), cols.len() + 1, |i, c| {
            if c == 0 {
                1.0
            } else {
                self.x[i][cols[c - 1]]
            }
        })
    }

    fn log_post(&self, xm: &DMatrix<f64>, beta: &DVector<f64>) -> f64 {
        let eta = xm * beta;
        let s2 = self.prior_scale * self.prior_scale;
        let d = beta.len() as f64;
        let ll: f64 = eta
            .iter()
            .zip(&self.y)
            .map(|(&e, &y)| log_phi(if y { e } else { -e }))
            .sum();
        ll - 0.5 * beta.norm_squared() / s2 - 0.5 * d * (2.0 * std::f64::consts::PI * s2).ln()
    }

    /// Posterior mode and negative Hessian there, by Newton iteration.
    fn laplace(&self, xm: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let d = xm.ncols();
        let s2 = self.prior_scale * self.prior_scale;
        let mut beta = DVector::zeros(d);
        let mut neg_hess = DMatrix::identity(d, d);
        for _ in 0..100 {
            let eta = xm * &beta;
            let mut grad = -&beta / s2;
            neg_hess = DMatrix::identity(d, d) / s2;
            for i in 0..xm.nrows() {
                let sgn = if self.y[i] { 1.0 } else { -1.0 };
                let u = sgn * eta[i];
                let lam = mills(u);
                let row = xm.row(i).transpose();
                grad += &row * (sgn * lam);
                neg_hess += &row * row.transpose() * (lam * (lam + u));
            }
            let step = neg_hess.clone().cholesky().expect("positive definite").solve(&grad);
            beta += &step;
            if step.norm() < 1e-12 {
                break;
            }
        }
        (beta, neg_hess)
    }

    /// Exact model posterior over all `2^K` models (uniform model prior) by
    /// importance sampling each marginal likelihood with a Laplace-centred
    /// multivariate-t proposal (7 degrees of freedom, `draws` draws).
    pub fn exact_posterior(&self, test_points: &[Vec<f64>], draws: usize, seed: u64) -> ProbitOracle {
        let k = self.candidates();
        let nu = 7.0;
        let mut models = Vec::with_capacity(1 << k);
        for m in 0..(1usize << k) {
            let gamma: Vec<bool> = (0..k).map(|j| m >> j & 1 == 1).collect();
            let xm = self.design(&gamma);
            let d = xm.ncols();
            let (mode, neg_hess) = self.laplace(&xm);
            let cov = neg_hess.try_inverse().expect("invertible");
            let chol = cov.clone().cholesky().expect("positive definite");
            let l = chol.l();
            let log_det_cov: f64 = 2.0 * l.diagonal().iter().map(|x| x.ln()).sum::<f64>();
            let log_t_norm = statrs::function::gamma::ln_gamma((nu + d as f64) / 2.0)
                - statrs::function::gamma::ln_gamma(nu / 2.0)
                - 0.5 * d as f64 * (nu * std::f64::consts::PI).ln()
                - 0.5 * log_det_cov;
            let tests: Vec<DVector<f64>> = test_points
                .iter()
                .map(|p| {
                    DVector::from_iterator(
                        d,
                        std::iter::once(1.0).chain((0..k).filter(|&j| gamma[j]).map(|j| p[j])),
                    )
                })
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (m as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let chi = ChiSquared::new(nu).expect("valid");
            let mut log_w = Vec::with_capacity(draws);
            let mut preds = vec![Vec::with_capacity(draws); tests.len()];
            for _ in 0..draws {
                let zvec = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let scale = (nu / chi.sample(&mut rng)).sqrt();
                let beta = &mode + &l * &zvec * scale;
                // Mahalanobis distance in the proposal metric is |z|² scale²
                let maha = zvec.norm_squared() * scale * scale;
                let log_q = log_t_norm - 0.5 * (nu + d as f64) * (1.0 + maha / nu).ln();
                log_w.push(self.log_post(&xm, &beta) - log_q);
                for (t, pt) in tests.iter().enumerate() {
                    preds[t].push(phi(pt.dot(&beta)));
                }
            }
            let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = log_w.iter().map(|lw| (lw - max).exp()).collect();
            let sw: f64 = w.iter().sum();
            let log_marginal = max + (sw / draws as f64).ln();
            let predictive = preds
                .iter()
                .map(|p| p.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw)
                .collect();
            models.push(ModelPosterior {
                gamma,
                log_marginal,
                probability: 0.0,
                predictive,
            });
        }
        let max = models.iter().map(|m| m.log_marginal).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = models.iter().map(|m| (m.log_marginal - max).exp()).sum();
        for m in &mut models {
            m.probability = (m.log_marginal - max).exp() / z;
        }
        let bma_predictive = (0..test_points.len())
            .map(|t| models.iter().map(|m| m.probability * m.predictive[t]).sum())
            .collect();
        ProbitOracle { models, bma_predictive }
    }
}

/// Simulates a probit problem with standard-normal covariates.
/// `coefficients[0]` is the intercept.
pub fn simulate_probit(rows: usize, coefficients: &[f64], prior_scale: f64, seed: u64) -> ProbitProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = coefficients.len() - 1;
    let mut x = Vec::with_capacity(rows);
    let mut y = Vec::with_capacity(rows);
    for _ in 0..rows {
        let row: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let eta = coefficients[0] + row.iter().zip(&coefficients[1..]).map(|(a, b)| a * b).sum::<f64>();
        let eps: f64 = rng.sample(StandardNormal);
        y.push(eta + eps > 0.0);
        x.push(row);
    }
    ProbitProblem { x, y, prior_scale }
}
