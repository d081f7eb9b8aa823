//! Expectation-Maximization for a univariate Gaussian mixture.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mixture::{log_normal_pdf, log_sum_exp, GaussianMixture};
use crate::{RngStream, Scalar};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmOptions {
    pub components: usize,
    pub max_iterations: usize,
    /// Stop once the relative log-likelihood gain falls below this.
    pub tolerance: f64,
    /// Groups smaller than `components * min_samples_per_component` get a
    /// single moment-matched Gaussian.
    pub min_samples_per_component: usize,
    /// Variance floor as a fraction of the group's sample stddev.
    pub stddev_floor: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            components: 4,
            max_iterations: 300,
            tolerance: 1e-7,
            min_samples_per_component: 8,
            stddev_floor: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStrategy {
    Em,
    MomentMatched,
    Degenerate,
}

#[derive(Clone, Debug)]
pub struct GroupFit<T> {
    pub mixture: GaussianMixture<T>,
    pub strategy: FitStrategy,
    pub iterations: usize,
    pub converged: bool,
    /// Mean log-likelihood per sample after initialization and after each
    /// EM iteration.
    pub log_likelihood_trace: Vec<T>,
}

impl<T: Scalar> GroupFit<T> {
    pub fn final_log_likelihood(&self) -> Option<T> {
        self.log_likelihood_trace.last().copied()
    }
}

fn mean_std<T: Scalar>(xs: &[T]) -> (T, T) {
    let n = T::from_count(xs.len());
    let mean = xs.iter().fold(T::zero(), |a, x| a + *x) / n;
    let var = xs.iter().fold(T::zero(), |a, x| a + (*x - mean) * (*x - mean)) / n;
    (mean, var.sqrt())
}

fn average_log_likelihood<T: Scalar>(xs: &[T], mixture: &GaussianMixture<T>) -> T {
    let n = T::from_count(xs.len());
    xs.iter().fold(T::zero(), |a, x| a + mixture.log_pdf(*x)) / n
}

/// k-means++ seeding: the first center uniformly, then each next center with
/// probability proportional to the squared distance to the nearest chosen one.
fn kmeans_pp<T: Scalar>(xs: &[T], k: usize, rng: &mut RngStream) -> Vec<T> {
    let mut centers = vec![xs[rng.random_range(0..xs.len())]];
    let mut d2: Vec<f64> = xs
        .iter()
        .map(|x| (*x - centers[0]).as_f64().powi(2))
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if !(total > 0.0) {
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = xs.len() - 1;
        for (i, d) in d2.iter().enumerate() {
            if target < *d {
                pick = i;
                break;
            }
            target -= d;
        }
        let c = xs[pick];
        centers.push(c);
        for (d, x) in d2.iter_mut().zip(xs) {
            *d = d.min((*x - c).as_f64().powi(2));
        }
    }
    centers
}

/// Fits one group of latencies.
pub fn fit_group<T: Scalar>(xs: &[T], options: &EmOptions, rng: &mut RngStream) -> GroupFit<T> {
    assert!(!xs.is_empty(), "cannot fit an empty group");
    let (mean, std) = mean_std(xs);
    if !(std > T::zero()) {
        // All values identical (or one sample).
        let floor = T::lit(options.stddev_floor) * mean.abs().max(T::min_positive_value());
        let mixture = GaussianMixture::single(mean, floor.max(T::min_positive_value()))
            .expect("single component is valid");
        let ll = average_log_likelihood(xs, &mixture);
        return GroupFit {
            mixture,
            strategy: FitStrategy::Degenerate,
            iterations: 0,
            converged: true,
            log_likelihood_trace: vec![ll],
        };
    }
    let floor = T::lit(options.stddev_floor) * std;
    let k = options.components.max(1);
    if k == 1 || xs.len() < k * options.min_samples_per_component {
        let mixture = GaussianMixture::single(mean, std.max(floor)).expect("single component is valid");
        let ll = average_log_likelihood(xs, &mixture);
        return GroupFit {
            mixture,
            strategy: FitStrategy::MomentMatched,
            iterations: 0,
            converged: true,
            log_likelihood_trace: vec![ll],
        };
    }

    let centers = kmeans_pp(xs, k, rng);
    let k = centers.len();
    let n = T::from_count(xs.len());

    // Hard assignment to the nearest center gives the starting parameters.
    let mut counts = vec![0usize; k];
    let mut spread = vec![T::zero(); k];
    for x in xs {
        let (j, _) = centers
            .iter()
            .enumerate()
            .map(|(j, c)| (j, (*x - *c).abs()))
            .fold((0, T::infinity()), |best, cur| if cur.1 < best.1 { cur } else { best });
        counts[j] += 1;
        spread[j] = spread[j] + (*x - centers[j]) * (*x - centers[j]);
    }
    let mut weights: Vec<T> = counts.iter().map(|c| T::from_count((*c).max(1))).collect();
    let total = weights.iter().fold(T::zero(), |a, w| a + *w);
    weights.iter_mut().for_each(|w| *w = *w / total);
    let mut means = centers.clone();
    let mut stddevs: Vec<T> = counts
        .iter()
        .zip(&spread)
        .map(|(c, s)| {
            if *c > 1 {
                (*s / T::from_count(*c)).sqrt().max(floor)
            } else {
                std
            }
        })
        .collect();

    let mut resp = vec![T::zero(); xs.len() * k];
    let mut log_terms = vec![T::zero(); k];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    let e_step = |weights: &[T], means: &[T], stddevs: &[T], resp: &mut [T], log_terms: &mut [T]| -> T {
        let log_w: Vec<T> = weights.iter().map(|w| w.ln()).collect();
        let mut ll = T::zero();
        for (i, x) in xs.iter().enumerate() {
            for j in 0..k {
                log_terms[j] = log_w[j] + log_normal_pdf(*x, means[j], stddevs[j]);
            }
            let norm = log_sum_exp(log_terms);
            ll = ll + norm;
            for j in 0..k {
                resp[i * k + j] = (log_terms[j] - norm).exp();
            }
        }
        ll / n
    };

    let mut ll = e_step(&weights, &means, &stddevs, &mut resp, &mut log_terms);
    trace.push(ll);
    while iterations < options.max_iterations {
        // M-step
        for j in 0..k {
            let mut nk = T::zero();
            let mut sx = T::zero();
            for (i, x) in xs.iter().enumerate() {
                let r = resp[i * k + j];
                nk = nk + r;
                sx = sx + r * *x;
            }
            if !(nk > T::zero()) {
                weights[j] = T::zero();
                continue;
            }
            let mu = sx / nk;
            let mut sv = T::zero();
            for (i, x) in xs.iter().enumerate() {
                let d = *x - mu;
                sv = sv + resp[i * k + j] * d * d;
            }
            weights[j] = nk / n;
            means[j] = mu;
            stddevs[j] = (sv / nk).sqrt().max(floor);
        }
        let total = weights.iter().fold(T::zero(), |a, w| a + *w);
        weights.iter_mut().for_each(|w| *w = *w / total);
        iterations += 1;

        let next = e_step(&weights, &means, &stddevs, &mut resp, &mut log_terms);
        trace.push(next);
        let gain = next - ll;
        ll = next;
        if gain < T::lit(options.tolerance) * ll.abs() {
            converged = true;
            break;
        }
    }

    // Present components in ascending mean order.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|a, b| means[*a].partial_cmp(&means[*b]).expect("finite means"));
    let mut w: Vec<T> = order.iter().map(|j| weights[*j]).collect();
    let total = w.iter().fold(T::zero(), |a, x| a + *x);
    w.iter_mut().for_each(|x| *x = *x / total);
    let mixture = GaussianMixture::new(
        w,
        order.iter().map(|j| means[*j]).collect(),
        order.iter().map(|j| stddevs[*j]).collect(),
    )
    .expect("EM keeps parameters valid");
    GroupFit {
        mixture,
        strategy: FitStrategy::Em,
        iterations,
        converged,
        log_likelihood_trace: trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn two_bumps(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, "synthetic");
        let a = Normal::new(5.0, 1.0).unwrap();
        let b = Normal::new(15.0, 2.0).unwrap();
        (0..n)
            .map(|_| {
                if rng.random::<f64>() < 0.5 {
                    a.sample(&mut rng)
                } else {
                    b.sample(&mut rng)
                }
            })
            .collect()
    }

    #[test]
    fn recovers_two_component_mixture() {
        let xs = two_bumps(5_000, 1);
        let opts = EmOptions {
            components: 2,
            ..EmOptions::default()
        };
        let fit = fit_group(&xs, &opts, &mut RngStream::new(1, "em-init"));
        assert_eq!(fit.strategy, FitStrategy::Em);
        let m = &fit.mixture;
        assert!((m.weights()[0] - 0.5).abs() < 0.05, "{m:?}");
        assert!((m.weights()[1] - 0.5).abs() < 0.05, "{m:?}");
        assert!((m.means()[0] - 5.0).abs() < 0.3, "{m:?}");
        assert!((m.means()[1] - 15.0).abs() < 0.3, "{m:?}");
    }

    #[test]
    fn log_likelihood_never_decreases() {
        for seed in 0..5 {
            let xs = two_bumps(2_000, seed);
            let fit = fit_group(&xs, &EmOptions::default(), &mut RngStream::new(seed, "em-init"));
            for w in fit.log_likelihood_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-12 * w[0].abs(), "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn single_component_is_moment_matched() {
        let xs = [1.0f64, 2.0, 3.0, 4.0, 10.0];
        let opts = EmOptions {
            components: 1,
            ..EmOptions::default()
        };
        let fit = fit_group(&xs, &opts, &mut RngStream::new(0, "em-init"));
        assert_eq!(fit.strategy, FitStrategy::MomentMatched);
        assert!((fit.mixture.means()[0] - 4.0).abs() < 1e-12);
        let var: f64 = xs.iter().map(|x| (x - 4.0) * (x - 4.0)).sum::<f64>() / 5.0;
        assert!((fit.mixture.stddevs()[0] - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn small_groups_fall_back_to_one_gaussian() {
        let xs: Vec<f64> = (1..=31).map(f64::from).collect();
        let fit = fit_group(&xs, &EmOptions::default(), &mut RngStream::new(0, "em-init"));
        assert_eq!(fit.strategy, FitStrategy::MomentMatched);
        assert_eq!(fit.mixture.components(), 1);
    }

    #[test]
    fn identical_values_collapse_to_floor() {
        let xs = [7.5f64; 100];
        let fit = fit_group(&xs, &EmOptions::default(), &mut RngStream::new(0, "em-init"));
        assert_eq!(fit.strategy, FitStrategy::Degenerate);
        assert_eq!(fit.mixture.means(), &[7.5]);
        assert!((fit.mixture.stddevs()[0] - 7.5e-3).abs() < 1e-15);
    }

    #[test]
    fn few_distinct_values_limit_components() {
        let xs: Vec<f64> = (0..200).map(|i| if i % 2 == 0 { 3.0 } else { 9.0 }).collect();
        let fit = fit_group(&xs, &EmOptions::default(), &mut RngStream::new(0, "em-init"));
        assert!(fit.mixture.components() <= 2);
        assert!((fit.mixture.cdf(6.0) - 0.5).abs() < 1e-9);
    }
}
