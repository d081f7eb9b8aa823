//! CoDel (RFC 8289), expressed as a per-packet dequeue hook.
//!
//! The RFC's `dequeue()` may drop several packets in one call. Here the
//! server calls [`Codel::on_dequeue`] once per head packet at the same
//! instant until it gets [`CodelVerdict::Deliver`], and calls
//! [`Codel::on_empty`] if the queue ran dry in between. The resulting
//! drop sequence matches the RFC pseudocode.

use serde::{Deserialize, Serialize};

use crate::{ConfigError, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodelConfig<T> {
    target: T,
    interval: T,
}

impl<T: Scalar> CodelConfig<T> {
    pub fn new(target: T, interval: T) -> Result<Self, ConfigError> {
        if !(target > T::zero() && target.is_finite()) {
            return Err(ConfigError::invalid("codel.target", format!("must be positive, got {target}")));
        }
        if !(interval > T::zero() && interval.is_finite()) {
            return Err(ConfigError::invalid(
                "codel.interval",
                format!("must be positive, got {interval}"),
            ));
        }
        Ok(Self { target, interval })
    }

    pub fn target(&self) -> T {
        self.target
    }

    pub fn interval(&self) -> T {
        self.interval
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CodelVerdict {
    Deliver,
    Drop,
}

#[derive(Clone, Debug)]
pub struct Codel<T> {
    config: CodelConfig<T>,
    first_above_time: Option<T>,
    drop_next: T,
    count: u32,
    last_count: u32,
    dropping: bool,
    // A drop in the dropping state still owes its control-law update, which
    // the RFC applies only if the following packet is also droppable.
    pending_advance: bool,
    // The packet right after the drop that entered the dropping state is
    // delivered unconditionally.
    deliver_next: bool,
}

impl<T: Scalar> Codel<T> {
    pub fn new(config: CodelConfig<T>) -> Self {
        Self {
            config,
            first_above_time: None,
            drop_next: T::zero(),
            count: 0,
            last_count: 0,
            dropping: false,
            pending_advance: false,
            deliver_next: false,
        }
    }

    pub fn config(&self) -> &CodelConfig<T> {
        &self.config
    }

    pub fn is_dropping(&self) -> bool {
        self.dropping
    }

    pub fn count(&self) -> u32 {
        self.count
    }

    /// Scheduled time of the next drop while in the dropping state.
    pub fn drop_next(&self) -> T {
        self.drop_next
    }

    fn control_law(&self, t: T, count: u32) -> T {
        t + self.config.interval / T::lit(f64::from(count)).sqrt()
    }

    // `dodequeue` from the RFC: tracks how long the sojourn stayed above
    // target. `backlog_after` is the number of packets left behind; a
    // backlog of at most one packet never counts as congestion.
    fn ok_to_drop(&mut self, sojourn: T, now: T, backlog_after: usize) -> bool {
        if sojourn < self.config.target || backlog_after <= 1 {
            self.first_above_time = None;
            return false;
        }
        match self.first_above_time {
            None => {
                self.first_above_time = Some(now + self.config.interval);
                false
            }
            Some(t) => now >= t,
        }
    }

    /// Decides the fate of the head packet being dequeued at `now`.
    pub fn on_dequeue(&mut self, sojourn: T, now: T, backlog_after: usize) -> CodelVerdict {
        let ok = self.ok_to_drop(sojourn, now, backlog_after);
        if self.deliver_next {
            self.deliver_next = false;
            return CodelVerdict::Deliver;
        }
        if self.dropping {
            if !ok {
                self.dropping = false;
                self.pending_advance = false;
                return CodelVerdict::Deliver;
            }
            if self.pending_advance {
                self.drop_next = self.control_law(self.drop_next, self.count);
                self.pending_advance = false;
            }
            if now >= self.drop_next {
                self.count += 1;
                self.pending_advance = true;
                return CodelVerdict::Drop;
            }
            return CodelVerdict::Deliver;
        }
        if ok {
            self.dropping = true;
            let delta = self.count.saturating_sub(self.last_count);
            let sixteen = T::lit(16.0) * self.config.interval;
            self.count = if delta > 1 && now - self.drop_next < sixteen {
                delta
            } else {
                1
            };
            self.drop_next = self.control_law(now, self.count);
            self.last_count = self.count;
            self.deliver_next = true;
            return CodelVerdict::Drop;
        }
        CodelVerdict::Deliver
    }

    /// The queue was found empty right after a drop.
    pub fn on_empty(&mut self) {
        self.first_above_time = None;
        if self.deliver_next {
            self.deliver_next = false;
        } else {
            self.dropping = false;
            self.pending_advance = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn codel(target: f64, interval: f64) -> Codel<f64> {
        Codel::new(CodelConfig::new(target, interval).unwrap())
    }

    /// Dequeues once per time unit; a drop is followed by another dequeue at
    /// the same instant, as the server does.
    fn drive(c: &mut Codel<f64>, sojourn: impl Fn(f64) -> f64, until: usize) -> Vec<f64> {
        let mut drops = Vec::new();
        for step in 0..=until {
            let now = step as f64;
            while c.on_dequeue(sojourn(now), now, 50) == CodelVerdict::Drop {
                drops.push(now);
            }
        }
        drops
    }

    #[test]
    fn no_drops_below_target() {
        let mut c = codel(5.0, 100.0);
        assert!(drive(&mut c, |_| 4.9, 2_000).is_empty());
        assert!(!c.is_dropping());
    }

    #[test]
    fn first_drop_waits_a_full_interval() {
        let mut c = codel(5.0, 100.0);
        let drops = drive(&mut c, |_| 50.0, 150);
        assert_eq!(drops.first().copied(), Some(100.0));
    }

    #[test]
    fn control_law_schedule_matches_hand_trace() {
        // Hand trace: enter at t=100 with count 1, drop_next = 100 + 100/1.
        // Drop at 200 (count 2), drop_next = 200 + 100/sqrt(2) = 270.71...
        // Drop at 271 (count 3), drop_next = 270.71 + 100/sqrt(3) = 328.45...
        // Drop at 329 (count 4), drop_next = 328.45 + 100/sqrt(4) = 378.45...
        let mut c = codel(5.0, 100.0);
        let mut schedule = Vec::new();
        let mut drops = Vec::new();
        for step in 0..=380 {
            let now = step as f64;
            while c.on_dequeue(50.0, now, 50) == CodelVerdict::Drop {
                drops.push(now);
                schedule.push(c.drop_next());
            }
        }
        assert_eq!(drops, vec![100.0, 200.0, 271.0, 329.0, 379.0]);
        let i = 100.0;
        let expected_next = [
            100.0 + i,
            200.0 + i / 2f64.sqrt(),
            200.0 + i / 2f64.sqrt() + i / 3f64.sqrt(),
        ];
        // After the first drop drop_next is set immediately; later drops
        // update it when the following packet is examined.
        assert_eq!(schedule[0], expected_next[0]);
        let gaps: Vec<f64> = expected_next.windows(2).map(|w| w[1] - w[0]).collect();
        assert!((gaps[0] - i / 2f64.sqrt()).abs() < 1e-12);
        assert!((gaps[1] - i / 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(c.count(), 5);
        // The packet after the 5th drop applied its update:
        // 328.45 + 100/sqrt(4) + 100/sqrt(5).
        let d6 = expected_next[2] + i / 2.0 + i / 5f64.sqrt();
        assert!((c.drop_next() - d6).abs() < 1e-9);
    }

    #[test]
    fn inter_drop_gaps_follow_inverse_sqrt() {
        // Fine time grid so drop instants track drop_next closely.
        let mut c = codel(1.0, 10.0);
        let mut drops = Vec::new();
        for step in 0..=100_000 {
            let now = step as f64 * 1e-3;
            while c.on_dequeue(5.0, now, 50) == CodelVerdict::Drop {
                drops.push(now);
            }
        }
        for (k, w) in drops.windows(2).take(6).enumerate() {
            let expected = 10.0 / ((k + 1) as f64).sqrt();
            assert!((w[1] - w[0] - expected).abs() < 2e-3, "gap {k}: {}", w[1] - w[0]);
        }
    }

    #[test]
    fn leaves_dropping_when_sojourn_recovers() {
        let mut c = codel(5.0, 100.0);
        let drops = drive(&mut c, |t| if t < 250.0 { 50.0 } else { 1.0 }, 1_000);
        assert_eq!(drops, vec![100.0, 200.0]);
        assert!(!c.is_dropping());
    }

    #[test]
    fn short_backlog_is_not_congestion() {
        let mut c = codel(5.0, 100.0);
        for step in 0..1_000 {
            assert_eq!(c.on_dequeue(50.0, step as f64, 1), CodelVerdict::Deliver);
        }
    }

    #[test]
    fn reentry_resumes_previous_count() {
        let mut c = codel(5.0, 100.0);
        let mut drops = drive(&mut c, |t| if t < 340.0 { 50.0 } else { 1.0 }, 345);
        assert_eq!(drops.len(), 4);
        assert!(!c.is_dropping());
        // Congestion returns soon: count restarts from count - last_count = 3.
        for step in 346..=600 {
            let now = step as f64;
            while c.on_dequeue(50.0, now, 50) == CodelVerdict::Drop {
                drops.push(now);
            }
        }
        assert!(drops.len() > 4);
        assert!(c.count() >= 3);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(CodelConfig::new(0.0, 1.0).is_err());
        assert!(CodelConfig::new(1.0, -1.0).is_err());
    }
}
