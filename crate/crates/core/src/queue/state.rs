use crate::Scalar;

/// Snapshot of the AQM-visible part of the queue at a decision round.
///
/// Holds the remaining delay budgets of the first `n` waiting packets, head
/// first, and whether a packet currently occupies the server. The packet in
/// service is ahead of every waiting packet but cannot be dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct QueueState<T> {
    time: T,
    budgets: Vec<T>,
    in_service: bool,
}

impl<T: Scalar> QueueState<T> {
    /// # Panics
    ///
    /// If any budget is negative or NaN.
    pub fn new(time: T, budgets: Vec<T>, in_service: bool) -> Self {
        assert!(
            budgets.iter().all(|b| *b >= T::zero()),
            "remaining budgets must be non-negative"
        );
        Self {
            time,
            budgets,
            in_service,
        }
    }

    pub fn empty(time: T) -> Self {
        Self::new(time, Vec::new(), false)
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn budgets(&self) -> &[T] {
        &self.budgets
    }

    pub fn len(&self) -> usize {
        self.budgets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.budgets.is_empty()
    }

    pub fn in_service(&self) -> bool {
        self.in_service
    }

    pub(crate) fn reset(&mut self, time: T, in_service: bool) {
        self.time = time;
        self.in_service = in_service;
        self.budgets.clear();
    }

    pub(crate) fn push(&mut self, budget: T) {
        debug_assert!(budget >= T::zero());
        self.budgets.push(budget);
    }
}
