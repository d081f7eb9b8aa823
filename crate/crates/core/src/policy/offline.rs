use super::{Clairvoyance, ClairvoyantPolicy, DroppingVector};
use crate::{QueueState, Scalar};

/// Clairvoyant baseline: drops the head while its true completion time would
/// miss its deadline, then keeps the rest of the window.
///
/// Because the simulator re-runs this check right before every service start,
/// every packet that enters service finishes on time.
#[derive(Clone, Copy, Debug, Default)]
pub struct OfflineOptimum;

impl<T: Scalar> ClairvoyantPolicy<T> for OfflineOptimum {
    fn name(&self) -> &str {
        "offline_optimum"
    }

    fn decide(&mut self, state: &QueueState<T>, truth: &Clairvoyance<'_, T>) -> DroppingVector {
        let n = state.len();
        let start = truth.now.max(truth.server_free_at);
        let mut x = DroppingVector::keep_all(n);
        for i in 0..n {
            let finish = start + truth.service_draws[i];
            if finish > truth.arrivals[i] + truth.targets[i] {
                x.0[i] = false;
            } else {
                break;
            }
        }
        x
    }
}
