//! Target delays as nearest-rank quantiles of the no-AQM sojourn time.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use delta_aqm::{Aqm, NoAqm, Simulation};

use crate::config::ScenarioConfig;
use crate::BenchError;

/// Smallest run length that resolves quantile `q`: `ceil(10 / (1 − q))`.
pub fn required_packets(q: f64) -> u64 {
    let m = 10.0 / (1.0 - q);
    // 1 − q is inexact; snap values within rounding noise of an integer.
    let nearest = m.round();
    if (m - nearest).abs() <= 1e-6 * m {
        nearest as u64
    } else {
        m.ceil() as u64
    }
}

/// Nearest-rank quantile of ascending `sorted`: the element of rank `ceil(q·m)`.
///
/// # Panics
///
/// If `sorted` is empty or `q` is outside `(0, 1]`.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    assert!(q > 0.0 && q <= 1.0, "quantile {q} outside (0, 1]");
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Sorted sojourn times of the first `m` packets of a no-AQM run.
pub fn no_aqm_sojourns(base: &ScenarioConfig, seed: u64) -> Result<Vec<f64>, BenchError> {
    let config = base.queue_config(f64::INFINITY)?;
    let mut sim = Simulation::new(config, Aqm::online(NoAqm), seed)?;
    let mut sojourns = Vec::with_capacity(base.num_packets as usize);
    sim.run_until_with(base.num_packets, |p| {
        sojourns.push(p.sojourn().expect("no-AQM serves every packet"));
    });
    sojourns.sort_by(f64::total_cmp);
    Ok(sojourns)
}

fn check_quantiles(quantiles: &[f64], m: u64) -> Result<(), BenchError> {
    for &q in quantiles {
        if !(q > 0.0 && q < 1.0) {
            return Err(BenchError::Config {
                field: "quantile".into(),
                reason: format!("must lie in (0, 1), got {q}"),
            });
        }
        let required = required_packets(q);
        if m < required {
            return Err(BenchError::TooFewPackets { quantile: q, m, required });
        }
    }
    Ok(())
}

/// One no-AQM run of `base` with `seed`; one target per quantile.
pub fn calibrate_targets(base: &ScenarioConfig, seed: u64, quantiles: &[f64]) -> Result<Vec<f64>, BenchError> {
    check_quantiles(quantiles, base.num_packets)?;
    let sorted = no_aqm_sojourns(base, seed)?;
    Ok(quantiles.iter().map(|&q| nearest_rank(&sorted, q)).collect())
}

/// Link, load and run length: everything the no-AQM sojourns depend on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct CacheKey {
    concentration: u64,
    rate: u64,
    utilization: Option<u64>,
    inter_arrival: Option<u64>,
    m: u64,
    seed: u64,
}

impl CacheKey {
    fn new(base: &ScenarioConfig, seed: u64) -> Self {
        Self {
            concentration: base.gamma.concentration.to_bits(),
            rate: base.gamma.rate.to_bits(),
            utilization: base.utilization.map(f64::to_bits),
            inter_arrival: base.inter_arrival.map(f64::to_bits),
            m: base.num_packets,
            seed,
        }
    }
}

type Slot = Arc<OnceLock<Result<Arc<Vec<f64>>, BenchError>>>;

/// Shares calibration runs between scenarios with the same link, load,
/// run length and seed. Safe to use from several threads; each run
/// happens once.
#[derive(Default)]
pub struct Calibrator {
    runs: Mutex<HashMap<CacheKey, Slot>>,
}

impl Calibrator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn targets(&self, base: &ScenarioConfig, seed: u64, quantiles: &[f64]) -> Result<Vec<f64>, BenchError> {
        check_quantiles(quantiles, base.num_packets)?;
        let slot = {
            let mut runs = self.runs.lock().expect("calibration cache poisoned");
            runs.entry(CacheKey::new(base, seed)).or_default().clone()
        };
        let sorted = slot.get_or_init(|| no_aqm_sojourns(base, seed).map(Arc::new)).clone()?;
        Ok(quantiles.iter().map(|&q| nearest_rank(&sorted, q)).collect())
    }

    pub fn target(&self, base: &ScenarioConfig, seed: u64, q: f64) -> Result<f64, BenchError> {
        Ok(self.targets(base, seed, &[q])?[0])
    }

    /// Number of distinct calibration runs performed so far.
    pub fn runs(&self) -> usize {
        self.runs.lock().expect("calibration cache poisoned").len()
    }
}
