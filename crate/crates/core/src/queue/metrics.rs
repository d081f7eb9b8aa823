use serde::{Deserialize, Serialize};

/// Outcome counts of a run.
///
/// `served_on_time + served_late + dropped == completed` always holds. The
/// ratio accessors return `None` for an empty run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RunMetrics {
    pub completed: u64,
    pub served_on_time: u64,
    pub served_late: u64,
    pub dropped: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    OnTime,
    Late,
    Dropped,
}

impl RunMetrics {
    pub fn record(&mut self, outcome: Outcome) {
        self.completed += 1;
        match outcome {
            Outcome::OnTime => self.served_on_time += 1,
            Outcome::Late => self.served_late += 1,
            Outcome::Dropped => self.dropped += 1,
        }
    }

    pub fn from_outcomes(outcomes: impl IntoIterator<Item = Outcome>) -> Self {
        let mut m = Self::default();
        outcomes.into_iter().for_each(|o| m.record(o));
        m
    }

    pub fn is_empty(&self) -> bool {
        self.completed == 0
    }

    fn ratio(&self, count: u64) -> Option<f64> {
        (self.completed > 0).then(|| count as f64 / self.completed as f64)
    }

    /// `R_M`: fraction served within the target.
    pub fn success_ratio(&self) -> Option<f64> {
        self.ratio(self.served_on_time)
    }

    /// `(late + dropped) / m`, i.e. `1 − R_M`.
    pub fn failed_ratio(&self) -> Option<f64> {
        self.ratio(self.served_late + self.dropped)
    }

    pub fn delayed_ratio(&self) -> Option<f64> {
        self.ratio(self.served_late)
    }

    pub fn dropped_ratio(&self) -> Option<f64> {
        self.ratio(self.dropped)
    }
}
