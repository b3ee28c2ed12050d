//! Sampling oracles for the bivariate Gaussian expectations of the kernel.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Activation, OutputHead};

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    fn from_samples(sum: f64, sum_sq: f64, count: usize) -> Self {
        let k = count as f64;
        let mean = sum / k;
        let var = ((sum_sq / k) - mean * mean).max(0.0) * k / (k - 1.0).max(1.0);
        Self {
            mean,
            std_err: (var / k).sqrt(),
        }
    }

    pub fn within(&self, value: f64, sigmas: f64, slack: f64) -> bool {
        (self.mean - value).abs() <= sigmas * self.std_err + slack
    }
}

/// Mean of `h(u, v)` over `(u, v) ~ N(0, [[a, c], [c, b]])`.
pub fn bivariate_mean<R: Rng>(
    var_p: f64,
    var_q: f64,
    cov: f64,
    samples: usize,
    rng: &mut R,
    mut h: impl FnMut(f64, f64) -> f64,
) -> Estimate {
    let sp = var_p.max(0.0).sqrt();
    let rho = if sp > 0.0 && var_q > 0.0 {
        (cov / (sp * var_q.sqrt())).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    let sq = var_q.max(0.0).sqrt();
    let ortho = (1.0 - rho * rho).max(0.0).sqrt();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        let value = h(sp * z1, sq * (rho * z1 + ortho * z2));
        sum += value;
        sum_sq += value * value;
    }
    Estimate::from_samples(sum, sum_sq, samples)
}

/// `c · E[σ(u)σ(v)]`.
pub fn second_moment<R: Rng>(
    activation: Activation,
    var_p: f64,
    var_q: f64,
    cov: f64,
    c_sigma: f64,
    samples: usize,
    rng: &mut R,
) -> Estimate {
    let e = bivariate_mean(var_p, var_q, cov, samples, rng, |u, v| {
        activation.apply(u) * activation.apply(v)
    });
    scaled(e, c_sigma)
}

/// `c · E[σ̇(u)σ̇(v)]`.
pub fn derivative_moment<R: Rng>(
    activation: Activation,
    var_p: f64,
    var_q: f64,
    cov: f64,
    c_sigma: f64,
    samples: usize,
    rng: &mut R,
) -> Estimate {
    let e = bivariate_mean(var_p, var_q, cov, samples, rng, |u, v| {
        activation.derivative(u) * activation.derivative(v)
    });
    scaled(e, c_sigma)
}

/// `E[Φ̇(u)Φ̇(v)]` for the sigmoid output head.
pub fn sigmoid_factor<R: Rng>(
    var_p: f64,
    var_q: f64,
    cov: f64,
    samples: usize,
    rng: &mut R,
) -> Estimate {
    let head = OutputHead::Sigmoid;
    bivariate_mean(var_p, var_q, cov, samples, rng, |u, v| {
        head.derivative(u) * head.derivative(v)
    })
}

fn scaled(e: Estimate, c: f64) -> Estimate {
    Estimate {
        mean: e.mean * c,
        std_err: e.std_err * c.abs(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn linear_moment_recovers_covariance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let e = second_moment(Activation::Linear, 2.0, 1.0, 0.5, 1.0, 200_000, &mut rng);
        assert!(e.within(0.5, 4.0, 0.0), "{e:?}");
    }

    #[test]
    fn degenerate_variance_is_handled() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let e = second_moment(Activation::Relu, 0.0, 1.0, 0.0, 2.0, 1000, &mut rng);
        assert_eq!(e.mean, 0.0);
    }
}
