//! Asymmetric Laplace (ALD) and Gaussian noise components and their mixtures.
//!
//! The ALD density with skewness `tau`, location `mu` and scale `sigma` is
//!
//! ```text
//! f(x) = tau (1 - tau) / sigma * exp(-rho_tau(x - mu) / sigma)
//! ```
//!
//! where `rho_tau` is the pinball loss. Exactly a fraction `tau` of the mass
//! lies below `mu`.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the mixture weight sum.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Pinball (check) loss `u * (tau - 1[u < 0])`.
#[inline]
pub fn pinball_loss(tau: f64, u: f64) -> f64 {
    if u < 0.0 {
        u * (tau - 1.0)
    } else {
        u * tau
    }
}

/// One asymmetric Laplace component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AldParams {
    tau: f64,
    mu: f64,
    sigma: f64,
}

impl AldParams {
    pub fn new(tau: f64, mu: f64, sigma: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::invalid(
                "tau",
                format!("must lie in (0, 1), got {tau}"),
            ));
        }
        if !mu.is_finite() {
            return Err(Error::invalid("mu", format!("must be finite, got {mu}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(
                "sigma",
                format!("must be positive, got {sigma}"),
            ));
        }
        Ok(Self { tau, mu, sigma })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Peak value `tau (1 - tau) / sigma`, attained at `mu`.
    pub fn peak(&self) -> f64 {
        self.tau * (1.0 - self.tau) / self.sigma
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.peak() * (-pinball_loss(self.tau, x - self.mu) / self.sigma).exp()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.peak().ln() - pinball_loss(self.tau, x - self.mu) / self.sigma
    }

    /// `mu + sigma (1 - 2 tau) / (tau (1 - tau))`. This is the offset the
    /// quantile filter subtracts from each residual.
    pub fn mean(&self) -> f64 {
        self.mu + self.sigma * (1.0 - 2.0 * self.tau) / (self.tau * (1.0 - self.tau))
    }

    pub fn variance(&self) -> f64 {
        let t = self.tau;
        self.sigma * self.sigma * (1.0 - 2.0 * t + 2.0 * t * t) / (t * t * (1.0 - t) * (1.0 - t))
    }
}

impl Distribution<f64> for AldParams {
    /// Two-sided exponential decomposition: below `mu` with probability `tau`
    /// at rate `(1 - tau) / sigma`, above it at rate `tau / sigma`.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let below = rng.random::<f64>() < self.tau;
        let e: f64 = Exp1.sample(rng);
        if below {
            self.mu - e * self.sigma / (1.0 - self.tau)
        } else {
            self.mu + e * self.sigma / self.tau
        }
    }
}

pub fn ald_pdf(p: &AldParams, x: f64) -> f64 {
    p.pdf(x)
}

pub fn ald_mean(p: &AldParams) -> f64 {
    p.mean()
}

pub fn ald_sample<R: Rng + ?Sized>(p: &AldParams, rng: &mut R) -> f64 {
    p.sample(rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    mean: f64,
    variance: f64,
}

impl GaussianParams {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::invalid(
                "mean",
                format!("must be finite, got {mean}"),
            ));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::invalid(
                "variance",
                format!("must be positive, got {variance}"),
            ));
        }
        Ok(Self { mean, variance })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let d = x - self.mean;
        (-0.5 * d * d / self.variance).exp() / (2.0 * std::f64::consts::PI * self.variance).sqrt()
    }
}

impl Distribution<f64> for GaussianParams {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let n: f64 = StandardNormal.sample(rng);
        self.mean + self.variance.sqrt() * n
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseComponent {
    Ald(AldParams),
    Gaussian(GaussianParams),
}

impl NoiseComponent {
    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            NoiseComponent::Ald(p) => p.pdf(x),
            NoiseComponent::Gaussian(g) => g.pdf(x),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            NoiseComponent::Ald(p) => p.mean(),
            NoiseComponent::Gaussian(g) => g.mean(),
        }
    }
}

impl Distribution<f64> for NoiseComponent {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseComponent::Ald(p) => p.sample(rng),
            NoiseComponent::Gaussian(g) => g.sample(rng),
        }
    }
}

/// Weighted finite mixture of noise components.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    components: Vec<(f64, NoiseComponent)>,
}

impl NoiseModel {
    pub fn new(components: Vec<(f64, NoiseComponent)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid(
                "components",
                "at least one component is required",
            ));
        }
        if let Some((w, _)) = components
            .iter()
            .find(|(w, _)| !(*w > 0.0 && w.is_finite()))
        {
            return Err(Error::invalid(
                "weight",
                format!("weights must be strictly positive, got {w}"),
            ));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(
                "weight",
                format!("weights must sum to 1, got {total}"),
            ));
        }
        Ok(Self { components })
    }

    pub fn single(component: NoiseComponent) -> Self {
        Self {
            components: vec![(1.0, component)],
        }
    }

    pub fn components(&self) -> &[(f64, NoiseComponent)] {
        &self.components
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.components.iter().map(|(w, c)| w * c.pdf(x)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|(w, c)| w * c.mean()).sum()
    }
}

impl Distribution<f64> for NoiseModel {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let last = self.components.len() - 1;
        for (i, (w, c)) in self.components.iter().enumerate() {
            acc += w;
            if u < acc || i == last {
                return c.sample(rng);
            }
        }
        unreachable!("mixture has at least one component")
    }
}

pub fn mixture_pdf(m: &NoiseModel, x: f64) -> f64 {
    m.pdf(x)
}

pub fn mixture_sample<R: Rng + ?Sized>(m: &NoiseModel, rng: &mut R) -> f64 {
    m.sample(rng)
}
