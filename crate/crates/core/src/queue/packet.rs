use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PacketStatus {
    Waiting,
    InService,
    Served,
    Dropped,
}

/// A packet traversing the queue.
///
/// The service draw is sampled when the packet arrives. Online policies never
/// see packets, only [`QueueState`](super::QueueState) snapshots, so the draw
/// is reachable only by the clairvoyant baseline and by completion observers.
#[derive(Clone, Debug, PartialEq)]
pub struct Packet<T> {
    id: u64,
    arrival_time: T,
    target_delay: T,
    service_draw: T,
    predecessors_at_entry: usize,
    status: PacketStatus,
    service_start: Option<T>,
    completion_time: Option<T>,
}

impl<T: Scalar> Packet<T> {
    pub fn new(
        id: u64,
        arrival_time: T,
        target_delay: T,
        service_draw: T,
        predecessors_at_entry: usize,
    ) -> Self {
        Self {
            id,
            arrival_time,
            target_delay,
            service_draw,
            predecessors_at_entry,
            status: PacketStatus::Waiting,
            service_start: None,
            completion_time: None,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn arrival_time(&self) -> T {
        self.arrival_time
    }

    pub fn target_delay(&self) -> T {
        self.target_delay
    }

    /// Absolute time by which the packet must be served.
    pub fn deadline(&self) -> T {
        self.arrival_time + self.target_delay
    }

    pub fn service_draw(&self) -> T {
        self.service_draw
    }

    /// Packets ahead of this one (waiting or in service) when it was enqueued.
    pub fn predecessors_at_entry(&self) -> usize {
        self.predecessors_at_entry
    }

    pub fn status(&self) -> PacketStatus {
        self.status
    }

    pub fn service_start(&self) -> Option<T> {
        self.service_start
    }

    pub fn completion_time(&self) -> Option<T> {
        self.completion_time
    }

    /// Queueing delay W; set once service starts.
    pub fn waiting_time(&self) -> Option<T> {
        self.service_start.map(|s| s - self.arrival_time)
    }

    /// Sojourn Y = completion − arrival; only served packets have one.
    pub fn sojourn(&self) -> Option<T> {
        self.completion_time.map(|c| c - self.arrival_time)
    }

    pub fn on_time(&self) -> Option<bool> {
        self.sojourn().map(|y| y <= self.target_delay)
    }

    /// Remaining delay budget `max(τ − (t − T), 0)` at time `t`.
    ///
    /// # Panics
    ///
    /// If `t` precedes the arrival or the packet already left the system.
    pub fn remaining_budget(&self, t: T) -> T {
        assert!(
            matches!(self.status, PacketStatus::Waiting | PacketStatus::InService),
            "remaining budget of a {:?} packet",
            self.status
        );
        remaining_budget(self.target_delay, self.arrival_time, t)
    }

    pub(crate) fn begin_service(&mut self, t: T) {
        assert_eq!(self.status, PacketStatus::Waiting);
        assert!(t >= self.arrival_time);
        self.status = PacketStatus::InService;
        self.service_start = Some(t);
    }

    pub(crate) fn finish_service(&mut self, t: T) {
        assert_eq!(self.status, PacketStatus::InService);
        self.status = PacketStatus::Served;
        self.completion_time = Some(t);
    }

    pub(crate) fn mark_dropped(&mut self) {
        assert_eq!(self.status, PacketStatus::Waiting);
        self.status = PacketStatus::Dropped;
    }
}

/// `max(target − (t − arrival), 0)`.
///
/// # Panics
///
/// If `t < arrival`.
pub fn remaining_budget<T: Scalar>(target: T, arrival: T, t: T) -> T {
    assert!(t >= arrival, "budget queried at {t} before arrival at {arrival}");
    (target - (t - arrival)).max(T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_examples() {
        assert_eq!(remaining_budget(100.0, 0.0, 30.0), 70.0);
        assert_eq!(remaining_budget(100.0, 0.0, 130.0), 0.0);
        assert_eq!(remaining_budget(10.9, 5.0, 5.0), 10.9);
    }

    #[test]
    #[should_panic(expected = "before arrival")]
    fn budget_before_arrival_panics() {
        remaining_budget(1.0f64, 5.0, 4.0);
    }

    #[test]
    fn lifecycle_served() {
        let mut p = Packet::new(0, 2.0, 10.0, 3.0, 1);
        p.begin_service(4.0);
        assert_eq!(p.remaining_budget(4.0), 8.0);
        p.finish_service(7.0);
        assert_eq!(p.waiting_time(), Some(2.0));
        assert_eq!(p.sojourn(), Some(5.0));
        assert_eq!(p.sojourn().unwrap(), p.waiting_time().unwrap() + p.service_draw());
        assert_eq!(p.on_time(), Some(true));
    }

    #[test]
    fn dropped_packets_never_complete() {
        let mut p = Packet::new(0, 0.0f32, 1.0, 1.0, 0);
        p.mark_dropped();
        assert_eq!(p.status(), PacketStatus::Dropped);
        assert_eq!(p.sojourn(), None);
    }

    #[test]
    #[should_panic]
    fn cannot_drop_in_service_packet() {
        let mut p = Packet::new(0, 0.0, 1.0, 1.0, 0);
        p.begin_service(0.0);
        p.mark_dropped();
    }
}
