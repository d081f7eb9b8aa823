use crate::{ConfigError, Scalar};

/// Univariate Gaussian mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixture<T> {
    weights: Vec<T>,
    means: Vec<T>,
    stddevs: Vec<T>,
}

/// Allowed deviation of the weight sum from 1.
pub(crate) fn weight_tolerance<T: Scalar>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(64.0))
}

impl<T: Scalar> GaussianMixture<T> {
    pub fn new(weights: Vec<T>, means: Vec<T>, stddevs: Vec<T>) -> Result<Self, ConfigError> {
        let k = weights.len();
        if k == 0 {
            return Err(ConfigError::invalid("weights", "mixture has no components"));
        }
        if means.len() != k || stddevs.len() != k {
            return Err(ConfigError::invalid(
                "means",
                format!(
                    "lengths differ: {} weights, {} means, {} stddevs",
                    k,
                    means.len(),
                    stddevs.len()
                ),
            ));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= T::zero() && w.is_finite())) {
            return Err(ConfigError::invalid("weights", format!("weight {w} is not a finite non-negative number")));
        }
        let total = weights.iter().fold(T::zero(), |a, w| a + *w);
        if (total - T::one()).abs() > weight_tolerance::<T>() {
            return Err(ConfigError::invalid("weights", format!("weights sum to {total}, expected 1")));
        }
        if let Some(m) = means.iter().find(|m| !m.is_finite()) {
            return Err(ConfigError::invalid("means", format!("mean {m} is not finite")));
        }
        if let Some(s) = stddevs.iter().find(|s| !(**s > T::zero() && s.is_finite())) {
            return Err(ConfigError::invalid("stddevs", format!("stddev {s} is not positive and finite")));
        }
        Ok(Self {
            weights,
            means,
            stddevs,
        })
    }

    pub fn single(mean: T, stddev: T) -> Result<Self, ConfigError> {
        Self::new(vec![T::one()], vec![mean], vec![stddev])
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn means(&self) -> &[T] {
        &self.means
    }

    pub fn stddevs(&self) -> &[T] {
        &self.stddevs
    }

    pub fn mean(&self) -> T {
        self.weights
            .iter()
            .zip(&self.means)
            .fold(T::zero(), |a, (w, m)| a + *w * *m)
    }

    /// `P(Z ≤ z)`, clamped to `[0, 1]`.
    pub fn cdf(&self, z: T) -> T {
        let mut acc = T::zero();
        for ((w, m), s) in self.weights.iter().zip(&self.means).zip(&self.stddevs) {
            acc = acc + *w * ((z - *m) / *s).std_normal_cdf();
        }
        acc.max(T::zero()).min(T::one())
    }

    /// `P(Z > z) = 1 − cdf(z)`.
    pub fn ccdf(&self, z: T) -> T {
        T::one() - self.cdf(z)
    }

    pub fn pdf(&self, z: T) -> T {
        self.log_pdf(z).exp()
    }

    pub fn log_pdf(&self, z: T) -> T {
        let terms: Vec<T> = self
            .weights
            .iter()
            .zip(&self.means)
            .zip(&self.stddevs)
            .map(|((w, m), s)| w.ln() + log_normal_pdf(z, *m, *s))
            .collect();
        log_sum_exp(&terms)
    }
}

pub(crate) fn log_normal_pdf<T: Scalar>(z: T, mean: T, stddev: T) -> T {
    let half_ln_2pi = T::lit(0.918_938_533_204_672_8);
    let u = (z - mean) / stddev;
    -T::lit(0.5) * u * u - stddev.ln() - half_ln_2pi
}

pub(crate) fn log_sum_exp<T: Scalar>(terms: &[T]) -> T {
    let max = terms.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let sum = terms.iter().fold(T::zero(), |a, t| a + (*t - max).exp());
    max + sum.ln()
}
