//! Delta: keep the subset of waiting packets that maximizes the expected
//! number of on-time deliveries.
//!
//! A kept packet `i` scores `ψ = P(latency ≤ δ_i | X)`, where `X` is its
//! effective predecessor count under the candidate vector; dropped packets
//! score 0. The objective is `Ψ_x = Σ ψ` over kept packets.
//!
//! `ψ` depends on the vector only through how many packets ahead are kept,
//! so the search over `2^n` vectors collapses to a dynamic program over
//! (position, kept-so-far) with `O(n²)` states. Both searches are provided;
//! they return the same vector and the bitwise-same score.
//!
//! Ties are broken towards more kept packets, then towards the
//! lexicographically largest vector (keeping earlier packets).

use std::marker::PhantomData;

use super::{DroppingVector, OnlinePolicy};
use crate::{QueueState, Scalar};

/// Largest window the exhaustive search accepts.
pub const ENUMERATION_CAP: usize = 15;

/// Conditional success probability `P(latency ≤ budget | predecessors)`.
pub trait SuccessModel<T> {
    fn success_prob(&self, budget: T, predecessors: usize) -> T;
}

impl<T, F> SuccessModel<T> for F
where
    F: Fn(T, usize) -> T,
{
    fn success_prob(&self, budget: T, predecessors: usize) -> T {
        self(budget, predecessors)
    }
}

impl<T, M: SuccessModel<T> + ?Sized> SuccessModel<T> for std::sync::Arc<M> {
    fn success_prob(&self, budget: T, predecessors: usize) -> T {
        (**self).success_prob(budget, predecessors)
    }
}

/// How the conditioning count for packet `i` is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ConditionMode {
    /// Kept waiting packets ahead of `i`, plus the packet in service.
    /// Same definition as the predecessor count recorded for training.
    #[default]
    Predecessors,
    /// `Σ_{j ≤ i} x_j` over waiting packets, counting `i` itself.
    IncludeSelf,
}

impl ConditionMode {
    fn offset(self, in_service: bool) -> usize {
        match self {
            ConditionMode::Predecessors => usize::from(in_service),
            ConditionMode::IncludeSelf => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum SearchMode {
    /// All `2^n` vectors; window limited to [`ENUMERATION_CAP`].
    Enumerate,
    #[default]
    DynamicProgram,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaDecision<T> {
    pub vector: DroppingVector,
    pub score: T,
}

// ψ(δ_i, offset + k) for 0 ≤ k ≤ i, packed row by row.
fn fill_table<T: Scalar, M: SuccessModel<T> + ?Sized>(
    state: &QueueState<T>,
    model: &M,
    mode: ConditionMode,
    table: &mut Vec<T>,
) {
    let offset = mode.offset(state.in_service());
    table.clear();
    for (i, &budget) in state.budgets().iter().enumerate() {
        for k in 0..=i {
            table.push(model.success_prob(budget, offset + k));
        }
    }
}

#[inline]
fn cell(i: usize, k: usize) -> usize {
    i * (i + 1) / 2 + k
}

fn enumerate<T: Scalar>(n: usize, table: &[T]) -> DeltaDecision<T> {
    assert!(n <= ENUMERATION_CAP, "enumeration over {n} packets exceeds cap {ENUMERATION_CAP}");
    let mut best = (T::zero(), 0usize, 0u32);
    for mask in 0u32..(1u32 << n) {
        let mut score = T::zero();
        let mut kept = 0usize;
        for i in 0..n {
            if (mask >> (n - 1 - i)) & 1 == 1 {
                score = score + table[cell(i, kept)];
                kept += 1;
            }
        }
        let better = score > best.0
            || (score == best.0 && (kept > best.1 || (kept == best.1 && mask > best.2)));
        if better {
            best = (score, kept, mask);
        }
    }
    DeltaDecision {
        vector: DroppingVector::from_mask(u128::from(best.2), n),
        score: best.0,
    }
}

/// Best score for each kept count after positions `from..n`, starting from
/// `kept` packets kept with prefix score `score`. Sums run head first, so
/// they match the enumeration bit for bit.
fn best_per_count<T: Scalar>(from: usize, kept: usize, score: T, n: usize, table: &[T], row: &mut Vec<Option<T>>) {
    row.clear();
    row.resize(n + 1, None);
    row[kept] = Some(score);
    for i in from..n {
        // Walk k downwards so row[k] still holds position i when read.
        for k in (kept..=kept + (i - from)).rev() {
            let Some(s) = row[k] else { continue };
            let keep = s + table[cell(i, k)];
            row[k + 1] = match row[k + 1] {
                Some(cur) if cur >= keep => Some(cur),
                _ => Some(keep),
            };
        }
    }
}

// Rounding can absorb the difference between two prefixes once a large
// term is added, so a per-prefix DP alone may settle a final tie the wrong
// way. The forward pass finds the optimum; the vector is then rebuilt head
// first, keeping a packet whenever the optimum stays reachable.
fn dynamic_program<T: Scalar>(n: usize, table: &[T], row: &mut Vec<Option<T>>) -> DeltaDecision<T> {
    assert!(n <= 128, "dynamic program supports windows up to 128 packets");
    best_per_count(0, 0, T::zero(), n, table, row);
    let (mut best, mut goal) = (T::zero(), 0);
    for (k, slot) in row.iter().enumerate() {
        if let Some(s) = *slot {
            if s >= best {
                best = s;
                goal = k;
            }
        }
    }
    let (mut kept, mut score, mut mask) = (0usize, T::zero(), 0u128);
    for i in 0..n {
        mask <<= 1;
        if kept < goal {
            let keep = score + table[cell(i, kept)];
            best_per_count(i + 1, kept + 1, keep, n, table, row);
            if row[goal] == Some(best) {
                kept += 1;
                score = keep;
                mask |= 1;
            }
        }
    }
    DeltaDecision {
        vector: DroppingVector::from_mask(mask, n),
        score,
    }
}

/// Exhaustive search over all keep/drop vectors.
///
/// # Panics
///
/// If the state holds more than [`ENUMERATION_CAP`] packets.
pub fn delta_decide_enum<T: Scalar, M: SuccessModel<T> + ?Sized>(
    state: &QueueState<T>,
    model: &M,
    mode: ConditionMode,
) -> DeltaDecision<T> {
    let mut table = Vec::new();
    fill_table(state, model, mode, &mut table);
    enumerate(state.len(), &table)
}

/// Dynamic-program search; same result as [`delta_decide_enum`].
pub fn delta_decide_dp<T: Scalar, M: SuccessModel<T> + ?Sized>(
    state: &QueueState<T>,
    model: &M,
    mode: ConditionMode,
) -> DeltaDecision<T> {
    let mut table = Vec::new();
    fill_table(state, model, mode, &mut table);
    dynamic_program(state.len(), &table, &mut Vec::new())
}

/// Delta as an [`OnlinePolicy`].
pub struct Delta<T, M> {
    model: M,
    search: SearchMode,
    condition: ConditionMode,
    table: Vec<T>,
    row: Vec<Option<T>>,
    last_score: T,
    _scalar: PhantomData<T>,
}

impl<T: Scalar, M: SuccessModel<T>> Delta<T, M> {
    pub fn new(model: M, search: SearchMode, condition: ConditionMode) -> Self {
        Self {
            model,
            search,
            condition,
            table: Vec::new(),
            row: Vec::new(),
            last_score: T::zero(),
            _scalar: PhantomData,
        }
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn search(&self) -> SearchMode {
        self.search
    }

    pub fn condition(&self) -> ConditionMode {
        self.condition
    }

    /// Objective value of the most recent decision.
    pub fn last_score(&self) -> T {
        self.last_score
    }
}

impl<T: Scalar, M: SuccessModel<T> + Send> OnlinePolicy<T> for Delta<T, M> {
    fn name(&self) -> &str {
        "delta"
    }

    fn decide(&mut self, state: &QueueState<T>) -> DroppingVector {
        if state.is_empty() {
            self.last_score = T::zero();
            return DroppingVector::default();
        }
        fill_table(state, &self.model, self.condition, &mut self.table);
        let decision = match self.search {
            SearchMode::Enumerate => enumerate(state.len(), &self.table),
            SearchMode::DynamicProgram => dynamic_program(state.len(), &self.table, &mut self.row),
        };
        self.last_score = decision.score;
        decision.vector
    }
}
