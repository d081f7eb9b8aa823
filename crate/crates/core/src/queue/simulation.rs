use std::collections::VecDeque;

use super::service::ServiceSampler;
use super::{Outcome, Packet, PacketStatus, QueueState, RunMetrics, ServiceModel};
use crate::policy::{Clairvoyance, ClairvoyantPolicy, Codel, CodelVerdict, DroppingVector, OnlinePolicy};
use crate::sim::{Event, EventKind, EventQueue, RngStream};
use crate::{ConfigError, Scalar};

/// Default number of head-of-line waiting packets a policy sees per round.
pub const DEFAULT_AQM_WINDOW: usize = 15;

/// Queue and traffic parameters of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueueConfig<T> {
    /// Deterministic gap between arrivals; the first arrival is at t = 0.
    pub inter_arrival: T,
    pub service: ServiceModel<T>,
    /// Target delay τ, the same for every packet.
    pub target_delay: T,
    pub aqm_window: usize,
}

impl<T: Scalar> QueueConfig<T> {
    /// Inter-arrival gap giving utilization `rho = mean service / gap`.
    pub fn with_utilization(
        utilization: T,
        service: ServiceModel<T>,
        target_delay: T,
    ) -> Result<Self, ConfigError> {
        if !(utilization > T::zero() && utilization < T::one()) {
            return Err(ConfigError::invalid(
                "utilization",
                format!("must lie in (0, 1), got {utilization}"),
            ));
        }
        let config = Self {
            inter_arrival: service.mean() / utilization,
            service,
            target_delay,
            aqm_window: DEFAULT_AQM_WINDOW,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.inter_arrival > T::zero() && self.inter_arrival.is_finite()) {
            return Err(ConfigError::invalid(
                "inter_arrival",
                format!("must be positive, got {}", self.inter_arrival),
            ));
        }
        if !(self.target_delay >= T::zero()) {
            return Err(ConfigError::invalid(
                "target_delay",
                format!("must be non-negative, got {}", self.target_delay),
            ));
        }
        if !(1..=128).contains(&self.aqm_window) {
            return Err(ConfigError::invalid(
                "aqm_window",
                format!("must be between 1 and 128, got {}", self.aqm_window),
            ));
        }
        if let ServiceModel::Constant(s) = self.service {
            if !(s > T::zero()) {
                return Err(ConfigError::invalid("service", "constant service must be positive"));
            }
        }
        Ok(())
    }

    pub fn utilization(&self) -> T {
        self.service.mean() / self.inter_arrival
    }
}

/// The AQM attached to the server.
pub enum Aqm<T: Scalar> {
    /// Decides from budgets at every decision round.
    Online(Box<dyn OnlinePolicy<T>>),
    /// Decides at every decision round with access to true service draws.
    Clairvoyant(Box<dyn ClairvoyantPolicy<T>>),
    /// Acts only when the server dequeues a packet.
    Codel(Codel<T>),
}

impl<T: Scalar> Aqm<T> {
    pub fn online(policy: impl OnlinePolicy<T> + 'static) -> Self {
        Aqm::Online(Box::new(policy))
    }

    pub fn clairvoyant(policy: impl ClairvoyantPolicy<T> + 'static) -> Self {
        Aqm::Clairvoyant(Box::new(policy))
    }

    pub fn name(&self) -> &str {
        match self {
            Aqm::Online(p) => p.name(),
            Aqm::Clairvoyant(p) => p.name(),
            Aqm::Codel(_) => "codel",
        }
    }
}

/// Single FIFO queue, single server, deterministic arrivals.
///
/// Decision rounds run after every arrival and every service completion,
/// before the server picks its next packet. Dropped packets leave the queue
/// at once. The packet in service is never offered to the policy.
pub struct Simulation<T: Scalar> {
    config: QueueConfig<T>,
    aqm: Aqm<T>,
    events: EventQueue<T>,
    service_rng: RngStream,
    sampler: ServiceSampler<T>,
    waiting: VecDeque<Packet<T>>,
    in_service: Option<Packet<T>>,
    busy_until: T,
    next_id: u64,
    budget: u64,
    metrics: RunMetrics,
    state: QueueState<T>,
    truth: [Vec<T>; 3],
    decision_rounds: u64,
}

impl<T: Scalar> Simulation<T> {
    pub fn new(config: QueueConfig<T>, aqm: Aqm<T>, seed: u64) -> Result<Self, ConfigError> {
        config.validate()?;
        let mut events = EventQueue::new();
        events.schedule(T::zero(), EventKind::Arrival);
        Ok(Self {
            sampler: config.service.sampler(),
            config,
            aqm,
            events,
            service_rng: RngStream::new(seed, "service"),
            waiting: VecDeque::new(),
            in_service: None,
            busy_until: T::zero(),
            next_id: 0,
            budget: u64::MAX,
            metrics: RunMetrics::default(),
            state: QueueState::empty(T::zero()),
            truth: [Vec::new(), Vec::new(), Vec::new()],
            decision_rounds: 0,
        })
    }

    pub fn config(&self) -> &QueueConfig<T> {
        &self.config
    }

    pub fn aqm(&self) -> &Aqm<T> {
        &self.aqm
    }

    pub fn now(&self) -> T {
        self.events.now()
    }

    pub fn metrics(&self) -> RunMetrics {
        self.metrics
    }

    pub fn waiting_len(&self) -> usize {
        self.waiting.len()
    }

    pub fn server_busy(&self) -> bool {
        self.in_service.is_some()
    }

    pub fn decision_rounds(&self) -> u64 {
        self.decision_rounds
    }

    /// Runs until `packet_budget` packets have completed (served or dropped).
    pub fn run_until(&mut self, packet_budget: u64) -> RunMetrics {
        self.run_until_with(packet_budget, |_| {})
    }

    /// Like [`run_until`](Self::run_until), handing each of the first
    /// `packet_budget` completed packets to `observer` in completion order.
    ///
    /// # Panics
    ///
    /// If the event queue drains before the budget is met.
    pub fn run_until_with<F: FnMut(&Packet<T>)>(&mut self, packet_budget: u64, mut observer: F) -> RunMetrics {
        self.budget = packet_budget;
        while self.metrics.completed < packet_budget {
            let event = self
                .events
                .pop()
                .expect("event queue drained before the packet budget was met");
            self.step(event, &mut observer);
        }
        self.metrics
    }

    /// Schedules an extra decision round at `time`.
    pub fn schedule_decision_round(&mut self, time: T) {
        self.events.schedule(time, EventKind::DecisionRound);
    }

    /// Removes the next pending event without dispatching it.
    pub fn next_event(&mut self) -> Option<Event<T>> {
        self.events.pop()
    }

    /// Dispatches one event.
    pub fn step<F: FnMut(&Packet<T>)>(&mut self, event: Event<T>, observer: &mut F) {
        let now = event.time;
        match event.kind {
            EventKind::Arrival => {
                self.arrive(now);
                self.decision_round(now, observer);
            }
            EventKind::ServiceCompletion => {
                let mut packet = self
                    .in_service
                    .take()
                    .expect("completion event without a packet in service");
                packet.finish_service(now);
                let outcome = if packet.on_time() == Some(true) {
                    Outcome::OnTime
                } else {
                    Outcome::Late
                };
                self.complete(&packet, outcome, observer);
                self.decision_round(now, observer);
            }
            EventKind::DecisionRound => self.decision_round(now, observer),
        }
        if self.in_service.is_none() {
            self.start_service(now, observer);
        }
    }

    fn arrive(&mut self, now: T) {
        let id = self.next_id;
        self.next_id += 1;
        let next = T::from_u64(id + 1).expect("packet id fits scalar") * self.config.inter_arrival;
        self.events.schedule(next, EventKind::Arrival);
        let service = self.sampler.sample(&mut self.service_rng);
        let predecessors = self.waiting.len() + usize::from(self.in_service.is_some());
        self.waiting
            .push_back(Packet::new(id, now, self.config.target_delay, service, predecessors));
    }

    fn complete<F: FnMut(&Packet<T>)>(&mut self, packet: &Packet<T>, outcome: Outcome, observer: &mut F) {
        if self.metrics.completed < self.budget {
            self.metrics.record(outcome);
            observer(packet);
        }
    }

    fn decision_round<F: FnMut(&Packet<T>)>(&mut self, now: T, observer: &mut F) {
        if matches!(self.aqm, Aqm::Codel(_)) {
            return;
        }
        loop {
            let n = self.waiting.len().min(self.config.aqm_window);
            if n == 0 {
                return;
            }
            self.decision_rounds += 1;
            self.state.reset(now, self.in_service.is_some());
            for p in self.waiting.iter().take(n) {
                self.state.push(p.remaining_budget(now));
            }
            let vector = match &mut self.aqm {
                Aqm::Online(policy) => policy.decide(&self.state),
                Aqm::Clairvoyant(policy) => {
                    let [arrivals, targets, draws] = &mut self.truth;
                    arrivals.clear();
                    targets.clear();
                    draws.clear();
                    for p in self.waiting.iter().take(n) {
                        arrivals.push(p.arrival_time());
                        targets.push(p.target_delay());
                        draws.push(p.service_draw());
                    }
                    let server_free_at = if self.in_service.is_some() { self.busy_until } else { now };
                    let truth = Clairvoyance {
                        now,
                        server_free_at,
                        arrivals,
                        targets,
                        service_draws: draws,
                    };
                    policy.decide(&self.state, &truth)
                }
                Aqm::Codel(_) => unreachable!(),
            };
            assert_eq!(vector.len(), n, "policy answered {} decisions for {n} packets", vector.len());
            let all_dropped = vector.kept() == 0;
            self.apply(&vector, observer);
            // A fully dropped window exposes packets the policy has not seen yet.
            if !(all_dropped && n == self.config.aqm_window && !self.waiting.is_empty()) {
                return;
            }
        }
    }

    fn apply<F: FnMut(&Packet<T>)>(&mut self, vector: &DroppingVector, observer: &mut F) {
        if vector.dropped() == 0 {
            return;
        }
        let n = vector.len();
        let tail = self.waiting.split_off(n);
        let window = std::mem::replace(&mut self.waiting, tail);
        let mut kept = VecDeque::with_capacity(n + self.waiting.len());
        for (i, mut packet) in window.into_iter().enumerate() {
            if vector.keeps(i) {
                kept.push_back(packet);
            } else {
                packet.mark_dropped();
                self.complete(&packet, Outcome::Dropped, observer);
            }
        }
        kept.append(&mut self.waiting);
        self.waiting = kept;
    }

    fn start_service<F: FnMut(&Packet<T>)>(&mut self, now: T, observer: &mut F) {
        while let Some(mut packet) = self.waiting.pop_front() {
            if let Aqm::Codel(codel) = &mut self.aqm {
                let sojourn = now - packet.arrival_time();
                if codel.on_dequeue(sojourn, now, self.waiting.len()) == CodelVerdict::Drop {
                    packet.mark_dropped();
                    self.complete(&packet, Outcome::Dropped, observer);
                    if self.waiting.is_empty() {
                        if let Aqm::Codel(codel) = &mut self.aqm {
                            codel.on_empty();
                        }
                    }
                    continue;
                }
            }
            debug_assert_eq!(packet.status(), PacketStatus::Waiting);
            packet.begin_service(now);
            self.busy_until = now + packet.service_draw();
            self.events.schedule(self.busy_until, EventKind::ServiceCompletion);
            self.in_service = Some(packet);
            return;
        }
    }
}
