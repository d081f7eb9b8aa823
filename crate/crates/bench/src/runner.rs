//! Executes scenarios, one report row per (scenario, seed).

use std::collections::HashMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use delta_aqm::{
    Aqm, Codel, CodelParams, ConditionMode, Delta, LatencyModel, NoAqm, OfflineOptimum, SearchMode, Simulation,
};
use rayon::prelude::*;

use crate::calibrate::Calibrator;
use crate::config::{AqmSpec, ScenarioConfig, SearchKind, Suite, TargetSpec};
use crate::report::{BenchReport, IncrementalWriter, Row, RowError};
use crate::tune::{default_grid, tune_codel, INTERVAL_FACTORS, TARGET_FACTORS};
use crate::BenchError;

/// Environment variable holding the default number of worker threads.
pub const JOBS_ENV: &str = "DELTA_AQM_JOBS";

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; falls back to [`JOBS_ENV`], then to the core count.
    pub jobs: Option<usize>,
    /// Rows are appended here, in completion order, as they finish.
    pub partial_path: Option<PathBuf>,
}

impl RunOptions {
    pub fn resolved_jobs(&self) -> Result<usize, BenchError> {
        if let Some(j) = self.jobs {
            return Ok(j.max(1));
        }
        match std::env::var(JOBS_ENV) {
            Ok(v) => v.trim().parse::<usize>().map(|j| j.max(1)).map_err(|_| BenchError::Config {
                field: JOBS_ENV.into(),
                reason: format!("not a thread count: {v:?}"),
            }),
            Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }
}

type ModelSlot = Arc<OnceLock<Result<Arc<LatencyModel>, BenchError>>>;

/// Shared state across rows: calibration runs and loaded model files.
#[derive(Default)]
pub struct Runner {
    calibrator: Calibrator,
    models: Mutex<HashMap<PathBuf, ModelSlot>>,
}

impl Runner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn calibrator(&self) -> &Calibrator {
        &self.calibrator
    }

    pub fn model(&self, path: &Path) -> Result<Arc<LatencyModel>, BenchError> {
        let slot = {
            let mut models = self.models.lock().expect("model cache poisoned");
            models.entry(path.to_path_buf()).or_default().clone()
        };
        slot.get_or_init(|| {
            LatencyModel::load_from_path(path)
                .map(Arc::new)
                .map_err(|e| BenchError::Model {
                    path: path.display().to_string(),
                    reason: e.to_string(),
                })
        })
        .clone()
    }

    pub fn target_delay(&self, scenario: &ScenarioConfig, seed: u64) -> Result<f64, BenchError> {
        match scenario.target {
            TargetSpec::Delay(d) => Ok(d),
            TargetSpec::Quantile(q) => {
                let seed = scenario.calibration_seed.unwrap_or(seed);
                self.calibrator.target(&scenario.calibration_base(), seed, q)
            }
        }
    }

    /// CoDel parameters for a row: the explicit ones, or the best pilot
    /// over the grid restricted to whichever value was fixed.
    pub fn codel_params(&self, scenario: &ScenarioConfig, seed: u64, target_delay: f64) -> Result<CodelParams, BenchError> {
        let AqmSpec::Codel { target, interval } = scenario.aqm else {
            return Err(BenchError::Config {
                field: "aqm".into(),
                reason: "not a codel scenario".into(),
            });
        };
        if let Some(p) = scenario.fixed_codel()? {
            return Ok(p);
        }
        let grid = match (target, interval) {
            (None, None) => default_grid(target_delay, scenario.mean_service())?,
            (Some(t), _) => INTERVAL_FACTORS
                .iter()
                .map(|f| CodelParams::new(t, f * scenario.mean_service()))
                .collect::<Result<_, _>>()?,
            (None, Some(i)) => TARGET_FACTORS
                .iter()
                .map(|f| CodelParams::new(f * target_delay, i))
                .collect::<Result<_, _>>()?,
        };
        let config = scenario.queue_config(target_delay)?;
        let pilot = (scenario.num_packets / 20).max(1);
        Ok(tune_codel(&config, seed, pilot, &grid)?.best)
    }

    fn build_aqm(&self, scenario: &ScenarioConfig, seed: u64, target_delay: f64) -> Result<Aqm<f64>, BenchError> {
        Ok(match &scenario.aqm {
            AqmSpec::None => Aqm::online(NoAqm),
            AqmSpec::OfflineOptimum => Aqm::clairvoyant(OfflineOptimum),
            AqmSpec::Codel { .. } => Aqm::Codel(Codel::new(self.codel_params(scenario, seed, target_delay)?)),
            AqmSpec::Delta {
                model_path,
                mode,
                include_self_in_condition,
            } => {
                let model = self.model(model_path)?;
                let search = match mode {
                    SearchKind::Enum => SearchMode::Enumerate,
                    SearchKind::Dp => SearchMode::DynamicProgram,
                };
                let condition = if *include_self_in_condition {
                    ConditionMode::IncludeSelf
                } else {
                    ConditionMode::Predecessors
                };
                Aqm::online(Delta::new(model, search, condition))
            }
        })
    }

    /// One run of `scenario` with `seed`.
    pub fn run_row(&self, scenario: &ScenarioConfig, seed: u64) -> Result<Row, BenchError> {
        let start = Instant::now();
        scenario.validate()?;
        let target_delay = self.target_delay(scenario, seed)?;
        let config = scenario.queue_config(target_delay)?;
        let aqm = self.build_aqm(scenario, seed, target_delay)?;
        let mut sim = Simulation::new(config, aqm, seed)?;
        let metrics = sim.run_until(scenario.num_packets);
        let m = metrics.completed;
        let ratio = |r: Option<f64>| r.unwrap_or(0.0);
        Ok(Row {
            scenario_id: scenario.id.clone(),
            aqm: scenario.aqm.name().to_string(),
            utilization: scenario.utilization(),
            target_quantile: scenario.target_quantile(),
            target_delay,
            m,
            served_on_time: metrics.served_on_time,
            delayed: metrics.served_late,
            dropped: metrics.dropped,
            failed_ratio: ratio(metrics.failed_ratio()),
            delayed_ratio: ratio(metrics.delayed_ratio()),
            dropped_ratio: ratio(metrics.dropped_ratio()),
            seed,
            wall_time: start.elapsed().as_secs_f64(),
        })
    }

    /// Runs every (scenario, seed) pair on `jobs` threads. Failed rows
    /// become error entries; the rest of the suite still runs.
    pub fn run_suite(&self, suite: &Suite, options: &RunOptions) -> Result<BenchReport, BenchError> {
        let jobs: Vec<(&ScenarioConfig, u64)> = suite
            .scenarios
            .iter()
            .flat_map(|s| s.seeds().into_iter().map(move |seed| (s, seed)))
            .collect();
        let partial = match &options.partial_path {
            Some(p) => {
                let file = File::create(p).map_err(|e| BenchError::io(p, e))?;
                Some(Mutex::new(IncrementalWriter::new(BufWriter::new(file))?))
            }
            None => None,
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.resolved_jobs()?)
            .build()
            .map_err(|e| BenchError::Io(e.to_string()))?;
        let results: Vec<Result<Row, RowError>> = pool.install(|| {
            jobs.par_iter()
                .map(|&(scenario, seed)| {
                    let result = self.run_row(scenario, seed).map_err(|e| RowError {
                        scenario_id: scenario.id.clone(),
                        seed,
                        error: e.to_string(),
                    });
                    if let (Some(w), Ok(row)) = (&partial, &result) {
                        // A failed partial write must not sink the row itself.
                        let _ = w.lock().expect("partial writer poisoned").push(row);
                    }
                    result
                })
                .collect()
        });
        let mut report = BenchReport::default();
        for r in results {
            match r {
                Ok(row) => report.rows.push(row),
                Err(e) => report.errors.push(e),
            }
        }
        report.sort();
        Ok(report)
    }
}

/// [`Runner::run_suite`] with a fresh runner.
pub fn run_benchmark(suite: &Suite, options: &RunOptions) -> Result<BenchReport, BenchError> {
    Runner::new().run_suite(suite, options)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(id: &str, aqm: AqmSpec) -> ScenarioConfig {
        let mut s = ScenarioConfig::new(id, 0.9, TargetSpec::Quantile(0.9));
        s.num_packets = 4_000;
        s.aqm = aqm;
        s
    }

    #[test]
    fn no_aqm_row_is_neutral() {
        let mut s = small("none", AqmSpec::None);
        s.num_packets = 1_000;
        let report = run_benchmark(&Suite { scenarios: vec![s] }, &RunOptions::default()).unwrap();
        assert_eq!(report.rows.len(), 1);
        let row = &report.rows[0];
        assert_eq!(row.dropped, 0);
        assert_eq!(row.m, 1_000);
        assert!(row.is_consistent());
        // Calibrated on its own seed: exactly the top tenth misses.
        assert_eq!(row.delayed, 100);
    }

    #[test]
    fn missing_model_is_a_row_error() {
        let delta = small(
            "delta",
            AqmSpec::Delta {
                model_path: "/nonexistent/model.json".into(),
                mode: SearchKind::Dp,
                include_self_in_condition: false,
            },
        );
        let suite = Suite {
            scenarios: vec![delta, small("none", AqmSpec::None)],
        };
        let report = run_benchmark(&suite, &RunOptions::default()).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.errors.len(), 1);
        assert!(report.errors[0].error.contains("model"));
    }

    #[test]
    fn empty_suite_gives_empty_report() {
        let report = run_benchmark(&Suite::default(), &RunOptions::default()).unwrap();
        assert!(report.rows.is_empty() && report.errors.is_empty());
    }

    #[test]
    fn calibration_link_overrides_the_target_only() {
        let runner = Runner::new();
        let mut fast = small("fast", AqmSpec::None);
        fast.gamma.rate = 1.5;
        let own = runner.target_delay(&fast, 2).unwrap();
        fast.calibration_gamma = Some(crate::GammaParams::default());
        let borrowed = runner.target_delay(&fast, 2).unwrap();
        let reference = runner.target_delay(&small("ref", AqmSpec::None), 2).unwrap();
        assert_eq!(borrowed, reference);
        assert!(borrowed > 2.0 * own);
        let row = runner.run_row(&fast, 2).unwrap();
        assert!(row.failed_ratio < 0.1);
    }

    #[test]
    fn codel_grid_honours_fixed_values() {
        let runner = Runner::new();
        let s = small(
            "codel",
            AqmSpec::Codel {
                target: Some(7.0),
                interval: None,
            },
        );
        let p = runner.codel_params(&s, 1, 50.0).unwrap();
        assert_eq!(p.target(), 7.0);
        let s = small(
            "codel",
            AqmSpec::Codel {
                target: Some(7.0),
                interval: Some(3.0),
            },
        );
        assert_eq!(runner.codel_params(&s, 1, 50.0).unwrap(), CodelParams::new(7.0, 3.0).unwrap());
    }
}
