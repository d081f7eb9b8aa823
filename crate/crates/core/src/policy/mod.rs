//! AQM policies: a mapping from a queue snapshot to a keep/drop vector.
//!
//! Online policies ([`OnlinePolicy`]) only ever receive a [`QueueState`].
//! The clairvoyant baseline additionally receives a [`Clairvoyance`] view
//! with the true service draws; the simulator builds that view only for
//! policies registered through [`Aqm::Clairvoyant`](crate::Aqm).

mod codel;
mod delta;
mod offline;

pub use codel::{Codel, CodelConfig, CodelVerdict};
pub use delta::{
    delta_decide_dp, delta_decide_enum, ConditionMode, Delta, DeltaDecision, SearchMode,
    SuccessModel, ENUMERATION_CAP,
};
pub use offline::OfflineOptimum;

use std::fmt;

use crate::{QueueState, Scalar};

/// Keep (`true`) / drop (`false`) per waiting packet, head first.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct DroppingVector(Vec<bool>);

impl DroppingVector {
    pub fn keep_all(n: usize) -> Self {
        Self(vec![true; n])
    }

    pub fn drop_all(n: usize) -> Self {
        Self(vec![false; n])
    }

    /// From 0/1 bits, `0` meaning drop.
    pub fn from_bits(bits: &[u8]) -> Self {
        Self(bits.iter().map(|b| *b != 0).collect())
    }

    /// From a bitmask of `n` decisions where the head is the most
    /// significant bit.
    pub fn from_mask(mask: u128, n: usize) -> Self {
        Self((0..n).map(|i| (mask >> (n - 1 - i)) & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn keeps(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn kept(&self) -> usize {
        self.0.iter().filter(|k| **k).count()
    }

    pub fn dropped(&self) -> usize {
        self.len() - self.kept()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn bits(&self) -> Vec<u8> {
        self.0.iter().map(|k| u8::from(*k)).collect()
    }
}

impl fmt::Display for DroppingVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", u8::from(*k))?;
        }
        write!(f, ")")
    }
}

/// A policy that decides from the budgets alone.
pub trait OnlinePolicy<T: Scalar>: Send {
    fn name(&self) -> &str;

    /// Returns a vector of exactly `state.len()` decisions.
    fn decide(&mut self, state: &QueueState<T>) -> DroppingVector;
}

/// Ground truth for the waiting packets in a decision window, head first.
#[derive(Clone, Copy, Debug)]
pub struct Clairvoyance<'a, T> {
    pub now: T,
    /// When the server can start the next service.
    pub server_free_at: T,
    pub arrivals: &'a [T],
    pub targets: &'a [T],
    pub service_draws: &'a [T],
}

/// A policy with access to true service draws.
pub trait ClairvoyantPolicy<T: Scalar>: Send {
    fn name(&self) -> &str;

    fn decide(&mut self, state: &QueueState<T>, truth: &Clairvoyance<'_, T>) -> DroppingVector;
}

/// Pass-through policy.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoAqm;

impl<T: Scalar> OnlinePolicy<T> for NoAqm {
    fn name(&self) -> &str {
        "none"
    }

    fn decide(&mut self, state: &QueueState<T>) -> DroppingVector {
        DroppingVector::keep_all(state.len())
    }
}
