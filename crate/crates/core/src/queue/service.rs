use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::{ConfigError, Scalar};

/// Gamma-distributed service time with shape `concentration` and `rate`
/// (inverse scale). Mean is `concentration / rate`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaService<T> {
    concentration: T,
    rate: T,
}

impl<T: Scalar> GammaService<T> {
    pub fn new(concentration: T, rate: T) -> Result<Self, ConfigError> {
        if !(concentration > T::zero() && concentration.is_finite()) {
            return Err(ConfigError::invalid(
                "gamma.concentration",
                format!("must be positive and finite, got {concentration}"),
            ));
        }
        if !(rate > T::zero() && rate.is_finite()) {
            return Err(ConfigError::invalid(
                "gamma.rate",
                format!("must be positive and finite, got {rate}"),
            ));
        }
        Ok(Self {
            concentration,
            rate,
        })
    }

    pub fn concentration(&self) -> T {
        self.concentration
    }

    pub fn rate(&self) -> T {
        self.rate
    }

    pub fn mean(&self) -> T {
        self.concentration / self.rate
    }

    pub fn variance(&self) -> T {
        self.concentration / (self.rate * self.rate)
    }

    fn sampler(&self) -> Gamma<f64> {
        Gamma::new(self.concentration.as_f64(), 1.0 / self.rate.as_f64())
            .expect("parameters validated at construction")
    }
}

/// Service-time law of the server.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ServiceModel<T> {
    Gamma(GammaService<T>),
    /// Fixed service time; mostly for hand-traceable scenarios.
    Constant(T),
}

impl<T: Scalar> ServiceModel<T> {
    pub fn mean(&self) -> T {
        match self {
            ServiceModel::Gamma(g) => g.mean(),
            ServiceModel::Constant(s) => *s,
        }
    }

    pub fn sampler(&self) -> ServiceSampler<T> {
        match self {
            ServiceModel::Gamma(g) => ServiceSampler::Gamma(g.sampler()),
            ServiceModel::Constant(s) => ServiceSampler::Constant(*s),
        }
    }
}

/// Prepared sampler for a [`ServiceModel`].
#[derive(Clone, Copy, Debug)]
pub enum ServiceSampler<T> {
    Gamma(Gamma<f64>),
    Constant(T),
}

impl<T: Scalar> ServiceSampler<T> {
    /// Draws one strictly positive service time.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match self {
            ServiceSampler::Gamma(g) => {
                let mut s = T::lit(g.sample(rng));
                // A Gamma draw can underflow to zero once narrowed.
                if s <= T::zero() {
                    s = T::min_positive_value();
                }
                s
            }
            ServiceSampler::Constant(s) => *s,
        }
    }
}

/// One Gamma draw; convenience over [`ServiceModel::sampler`].
pub fn sample_service<T: Scalar, R: Rng + ?Sized>(dist: &GammaService<T>, rng: &mut R) -> T {
    ServiceSampler::<T>::Gamma(dist.sampler()).sample(rng)
}
