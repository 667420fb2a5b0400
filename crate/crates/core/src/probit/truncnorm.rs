//! Unit-variance normal draws truncated to one side of zero.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

/// Draw from N(0, 1) restricted to `(alpha, inf)`.
pub fn lower_tail<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> f64 {
    if alpha <= 0.0 {
        loop {
            let x: f64 = StandardNormal.sample(rng);
            if x > alpha {
                return x;
            }
        }
    }
    // Robert (1995): translated exponential proposal.
    let lambda = 0.5 * (alpha + (alpha * alpha + 4.0).sqrt());
    let exp = Exp::new(lambda).expect("positive rate");
    loop {
        let x = alpha + exp.sample(rng);
        let u: f64 = rng.random();
        if u <= (-0.5 * (x - lambda).powi(2)).exp() {
            return x;
        }
    }
}

/// Latent utility for one observation: N(mean, 1) truncated to `> 0` when
/// `y`, else to `<= 0`.
pub fn draw_latent<R: Rng + ?Sized>(rng: &mut R, mean: f64, y: bool) -> f64 {
    if y {
        mean + lower_tail(rng, -mean)
    } else {
        mean - lower_tail(rng, mean)
    }
}
