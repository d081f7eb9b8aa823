//! Discrete-event kernel: a virtual clock and a time-ordered event queue.
//!
//! Events are dispatched in nondecreasing time order; events scheduled for
//! the same instant dispatch in insertion order.

mod rng;

pub use rng::{derive_seed, RngStream};

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    Arrival,
    ServiceCompletion,
    DecisionRound,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event<T> {
    pub time: T,
    pub kind: EventKind,
    pub sequence: u64,
}

struct Pending<T>(Event<T>);

impl<T: Scalar> PartialEq for Pending<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for Pending<T> {}

impl<T: Scalar> PartialOrd for Pending<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Pending<T> {
    // Reversed so the max-heap pops the earliest (time, sequence).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .time
            .partial_cmp(&self.0.time)
            .expect("event times are never NaN")
            .then_with(|| other.0.sequence.cmp(&self.0.sequence))
    }
}

/// Virtual clock plus pending-event set.
pub struct EventQueue<T: Scalar> {
    clock: T,
    next_sequence: u64,
    heap: BinaryHeap<Pending<T>>,
}

impl<T: Scalar> Default for EventQueue<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> EventQueue<T> {
    pub fn new() -> Self {
        Self {
            clock: T::zero(),
            next_sequence: 0,
            heap: BinaryHeap::new(),
        }
    }

    pub fn now(&self) -> T {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Queues an event at `time`, returning it with its assigned sequence.
    ///
    /// # Panics
    ///
    /// If `time` is NaN or earlier than the current clock.
    pub fn schedule(&mut self, time: T, kind: EventKind) -> Event<T> {
        assert!(!time.is_nan(), "event time is NaN");
        assert!(
            time >= self.clock,
            "scheduling {kind:?} at {time} before current clock {}",
            self.clock
        );
        let event = Event {
            time,
            kind,
            sequence: self.next_sequence,
        };
        self.next_sequence += 1;
        self.heap.push(Pending(event));
        event
    }

    /// Removes the next event and advances the clock to its time.
    pub fn pop(&mut self) -> Option<Event<T>> {
        let Pending(event) = self.heap.pop()?;
        debug_assert!(event.time >= self.clock);
        self.clock = event.time;
        Some(event)
    }

    pub fn peek_time(&self) -> Option<T> {
        self.heap.peek().map(|p| p.0.time)
    }
}
