//! CoDel parameter search by short pilot runs.

use delta_aqm::sim::derive_seed;
use delta_aqm::{Aqm, Codel, CodelParams, Config, Simulation};

use crate::BenchError;

pub const TARGET_FACTORS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];
pub const INTERVAL_FACTORS: [f64; 3] = [1.0, 2.0, 4.0];

/// Targets as fractions of the delay target, intervals as multiples of the
/// mean service time.
pub fn default_grid(target_delay: f64, mean_service: f64) -> Result<Vec<CodelParams>, BenchError> {
    let mut grid = Vec::with_capacity(TARGET_FACTORS.len() * INTERVAL_FACTORS.len());
    for t in TARGET_FACTORS {
        for i in INTERVAL_FACTORS {
            grid.push(CodelParams::new(t * target_delay, i * mean_service)?);
        }
    }
    Ok(grid)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PilotScore {
    pub params: CodelParams,
    pub failed_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tuned {
    pub best: CodelParams,
    /// One entry per grid candidate, in grid order.
    pub pilots: Vec<PilotScore>,
}

/// Runs `pilot_packets` packets per candidate and keeps the lowest failed
/// ratio; ties go to the smaller target, then the smaller interval.
///
/// Pilots use a seed derived from `seed`, so they never replay the
/// evaluation run itself.
pub fn tune_codel(config: &Config, seed: u64, pilot_packets: u64, grid: &[CodelParams]) -> Result<Tuned, BenchError> {
    if grid.is_empty() {
        return Err(BenchError::Config {
            field: "codel.grid".into(),
            reason: "no candidates".into(),
        });
    }
    let pilot_seed = derive_seed(seed, "codel-pilot");
    let mut pilots = Vec::with_capacity(grid.len());
    for &params in grid {
        let mut sim = Simulation::new(*config, Aqm::Codel(Codel::new(params)), pilot_seed)?;
        let failed_ratio = sim.run_until(pilot_packets.max(1)).failed_ratio().unwrap_or(0.0);
        pilots.push(PilotScore { params, failed_ratio });
    }
    let best = pilots
        .iter()
        .min_by(|a, b| {
            a.failed_ratio
                .total_cmp(&b.failed_ratio)
                .then(a.params.target().total_cmp(&b.params.target()))
                .then(a.params.interval().total_cmp(&b.params.interval()))
        })
        .expect("grid is non-empty")
        .params;
    Ok(Tuned { best, pilots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use delta_aqm::{GammaService, QueueConfig, ServiceModel};

    fn config(target: f64) -> Config {
        QueueConfig::with_utilization(0.916, ServiceModel::Gamma(GammaService::new(5.0, 0.5).unwrap()), target)
            .unwrap()
    }

    #[test]
    fn default_grid_has_twelve_candidates() {
        let grid = default_grid(80.0, 10.0).unwrap();
        assert_eq!(grid.len(), 12);
        assert_eq!(grid[0], CodelParams::new(20.0, 10.0).unwrap());
        assert_eq!(grid[11], CodelParams::new(80.0, 40.0).unwrap());
    }

    #[test]
    fn single_candidate_wins() {
        let only = CodelParams::new(30.0, 20.0).unwrap();
        let tuned = tune_codel(&config(60.0), 1, 2_000, &[only]).unwrap();
        assert_eq!(tuned.best, only);
        assert_eq!(tuned.pilots.len(), 1);
    }

    #[test]
    fn empty_grid_is_rejected() {
        assert!(tune_codel(&config(60.0), 1, 2_000, &[]).is_err());
    }

    #[test]
    fn ties_go_to_the_smaller_target_then_interval() {
        // Huge targets never drop, so every candidate scores the same.
        let grid = [
            CodelParams::new(5e6, 10.0).unwrap(),
            CodelParams::new(1e6, 40.0).unwrap(),
            CodelParams::new(1e6, 20.0).unwrap(),
        ];
        let tuned = tune_codel(&config(60.0), 3, 2_000, &grid).unwrap();
        assert!(tuned.pilots.iter().all(|p| p.failed_ratio == tuned.pilots[0].failed_ratio));
        assert_eq!(tuned.best, grid[2]);
    }

    #[test]
    fn best_candidate_scores_lowest() {
        let grid = default_grid(60.0, 10.0).unwrap();
        let tuned = tune_codel(&config(60.0), 9, 5_000, &grid).unwrap();
        let best = tuned.pilots.iter().find(|p| p.params == tuned.best).unwrap();
        assert!(tuned.pilots.iter().all(|p| p.failed_ratio >= best.failed_ratio));
    }
}
