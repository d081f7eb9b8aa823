use delta_aqm::{
    delta_decide_dp, delta_decide_enum, ConditionMode, Delta, DroppingVector, GaussianMixture, OnlinePolicy,
    QueueState, Scalar, SearchMode,
};
use proptest::prelude::*;
use std::time::Instant;

/// Ψ of a given vector, summed head first.
fn psi_of(state: &QueueState<f64>, model: &dyn Fn(f64, usize) -> f64, mode: ConditionMode, x: &DroppingVector) -> f64 {
    let offset = match mode {
        ConditionMode::Predecessors => usize::from(state.in_service()),
        ConditionMode::IncludeSelf => 1,
    };
    let mut kept = 0;
    let mut total = 0.0;
    for (i, &budget) in state.budgets().iter().enumerate() {
        if x.keeps(i) {
            total += model(budget, offset + kept);
            kept += 1;
        }
    }
    total
}

/// Latency given `k` predecessors: about `(k + 1)` service times.
fn queue_like(mean: f64, spread: f64) -> impl Fn(f64, usize) -> f64 {
    move |budget: f64, k: usize| {
        let n = (k + 1) as f64;
        let mix = GaussianMixture::single(mean * n, spread * n.sqrt()).unwrap();
        mix.cdf(budget)
    }
}

/// Arbitrary table on a coarse grid so ties are common.
fn grid_table(values: Vec<u8>) -> impl Fn(f64, usize) -> f64 {
    move |budget: f64, k: usize| {
        let slot = (budget.to_bits() as usize ^ k.wrapping_mul(0x9e37)) % values.len();
        f64::from(values[slot] % 5) / 4.0
    }
}

fn state_strategy(max_n: usize) -> impl Strategy<Value = QueueState<f64>> {
    sized_state(0, max_n)
}

fn sized_state(min_n: usize, max_n: usize) -> impl Strategy<Value = QueueState<f64>> {
    (
        prop::collection::vec(prop_oneof![Just(0.0), 0.0..120.0f64], min_n..=max_n),
        any::<bool>(),
        0.0..1e4f64,
    )
        .prop_map(|(budgets, busy, t)| QueueState::new(t, budgets, busy))
}

fn mode_strategy() -> impl Strategy<Value = ConditionMode> {
    prop_oneof![Just(ConditionMode::Predecessors), Just(ConditionMode::IncludeSelf)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn dp_matches_enumeration_on_queue_models(
        state in state_strategy(12),
        mean in 1.0..20.0f64,
        spread in 0.1..10.0f64,
        mode in mode_strategy(),
    ) {
        let model = queue_like(mean, spread);
        let e = delta_decide_enum(&state, &model, mode);
        let d = delta_decide_dp(&state, &model, mode);
        prop_assert_eq!(e.score.to_bits(), d.score.to_bits());
        prop_assert_eq!(&e.vector, &d.vector);
        prop_assert_eq!(e.score, psi_of(&state, &model, mode, &e.vector));
    }

    #[test]
    fn dp_matches_enumeration_on_tied_tables(
        state in state_strategy(12),
        values in prop::collection::vec(any::<u8>(), 1..16),
        mode in mode_strategy(),
    ) {
        let model = grid_table(values);
        let e = delta_decide_enum(&state, &model, mode);
        let d = delta_decide_dp(&state, &model, mode);
        prop_assert_eq!(e.score.to_bits(), d.score.to_bits());
        prop_assert_eq!(&e.vector, &d.vector);
    }

    #[test]
    fn optimum_dominates_every_vector(
        state in state_strategy(10),
        mean in 1.0..20.0f64,
        spread in 0.1..10.0f64,
        mask in any::<u128>(),
    ) {
        let model = queue_like(mean, spread);
        let mode = ConditionMode::Predecessors;
        let best = delta_decide_dp(&state, &model, mode);
        let n = state.len();
        let keep_all = DroppingVector::keep_all(n);
        let other = DroppingVector::from_mask(mask & ((1u128 << n) - 1), n);
        prop_assert!(best.score >= psi_of(&state, &model, mode, &keep_all));
        prop_assert!(best.score >= psi_of(&state, &model, mode, &other));
        prop_assert!(best.score >= 0.0 && best.score <= n as f64);
    }

    #[test]
    fn more_budget_never_lowers_the_optimum(
        state in sized_state(1, 10),
        which in any::<prop::sample::Index>(),
        extra in 0.0..50.0f64,
    ) {
        let model = queue_like(10.0, 4.5);
        let mode = ConditionMode::Predecessors;
        let before = delta_decide_dp(&state, &model, mode).score;
        let mut budgets = state.budgets().to_vec();
        let i = which.index(budgets.len());
        budgets[i] += extra;
        let looser = QueueState::new(state.time(), budgets, state.in_service());
        let after = delta_decide_dp(&looser, &model, mode).score;
        prop_assert!(after >= before - 1e-12);
    }

    #[test]
    fn policy_and_free_functions_agree(state in state_strategy(12), search in prop_oneof![Just(SearchMode::Enumerate), Just(SearchMode::DynamicProgram)]) {
        let model = queue_like(10.0, 4.5);
        let expected = delta_decide_enum(&state, &model, ConditionMode::Predecessors);
        let mut policy = Delta::new(queue_like(10.0, 4.5), search, ConditionMode::Predecessors);
        let vector = policy.decide(&state);
        prop_assert_eq!(vector, expected.vector);
        prop_assert_eq!(policy.last_score(), expected.score);
    }
}

#[test]
fn all_zero_budgets_still_keep_everything_when_psi_is_zero() {
    // Nothing can make it: every vector scores zero and the tie-break keeps all.
    let state = QueueState::new(0.0, vec![0.0; 6], true);
    let model = |_: f64, _: usize| 0.0;
    let d = delta_decide_dp(&state, &model, ConditionMode::Predecessors);
    assert_eq!(d.score, 0.0);
    assert_eq!(d.vector, DroppingVector::keep_all(6));
}

#[test]
fn hopeless_head_is_dropped_for_the_packets_behind() {
    // Head can wait 1 time unit; the two behind have ample budget but each
    // extra predecessor costs them success probability.
    let state = QueueState::new(0.0, vec![1.0, 25.0, 25.0], true);
    let model = queue_like(10.0, 2.0);
    let d = delta_decide_dp(&state, &model, ConditionMode::Predecessors);
    assert_eq!(d.vector.bits(), vec![0, 1, 1]);
}

#[test]
fn single_precision_search_agrees() {
    let budgets = [3.0f32, 18.0, 22.5, 40.0, 41.0, 7.0, 90.0];
    let state = QueueState::new(0.0f32, budgets.to_vec(), true);
    let model = |b: f32, k: usize| {
        let n = f32::from_count(k + 1);
        GaussianMixture::single(10.0 * n, 4.5 * n.sqrt()).unwrap().cdf(b)
    };
    let e = delta_decide_enum(&state, &model, ConditionMode::Predecessors);
    let d = delta_decide_dp(&state, &model, ConditionMode::Predecessors);
    assert_eq!(e, d);
}

#[test]
fn dp_on_a_full_window_is_fast() {
    let budgets: Vec<f64> = (0..15).map(|i| 5.0 + 7.0 * i as f64).collect();
    let state = QueueState::new(0.0, budgets, true);
    // Precomputed table so the timing covers the search, not the CDF.
    let table: Vec<Vec<f64>> = state
        .budgets()
        .iter()
        .map(|&b| (0..=16).map(|k| queue_like(10.0, 4.5)(b, k)).collect())
        .collect();
    let lookup = |b: f64, k: usize| {
        let i = state.budgets().iter().position(|&x| x == b).unwrap();
        table[i][k]
    };
    let mut policy = Delta::new(lookup, SearchMode::DynamicProgram, ConditionMode::Predecessors);
    policy.decide(&state);
    let rounds = 1_000;
    let start = Instant::now();
    for _ in 0..rounds {
        std::hint::black_box(policy.decide(std::hint::black_box(&state)));
    }
    let per_round = start.elapsed() / rounds;
    assert!(per_round.as_micros() < 1_000, "DP took {per_round:?} per round");
}

#[test]
fn rounding_ties_follow_the_enumeration() {
    // Keeping packet 1 first scores about 1e-26, keeping it second about
    // 1e-127; both vanish once packet 3 adds a success near 1, so the final
    // scores tie and the lexicographic rule must pick [1, 1, 0, 1].
    let state = QueueState::new(0.0, vec![0.0, 25.771609896208812, 0.0, 89.74103367198373], true);
    let model = queue_like(17.926114002743784, 0.6614127698734147);
    let e = delta_decide_enum(&state, &model, ConditionMode::Predecessors);
    let d = delta_decide_dp(&state, &model, ConditionMode::Predecessors);
    assert_eq!(e.vector, DroppingVector::from_bits(&[1, 1, 0, 1]));
    assert_eq!(d.vector, e.vector);
    assert_eq!(d.score.to_bits(), e.score.to_bits());
}
