//! Deadline-aware active queue management on a single FIFO queue.
//!
//! The crate provides a small discrete-event simulator of one queue with a
//! Gamma-service server and deterministic arrivals, four AQM policies
//! (no AQM, a clairvoyant offline optimum, CoDel, and Delta), and the
//! conditional latency predictor Delta relies on.
//!
//! Delta keeps the subset of waiting packets that maximizes the expected
//! number of deadline hits, scoring each kept packet by the predicted
//! probability that its remaining latency fits in its remaining budget.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the type
//! aliases below fix it to `f64`.

mod error;
pub mod policy;
pub mod predictor;
pub mod queue;
mod scalar;
pub mod sim;

pub use error::{ConfigError, FitError, ModelFileError};
pub use policy::{
    delta_decide_dp, delta_decide_enum, Clairvoyance, ClairvoyantPolicy, Codel, CodelConfig, CodelVerdict,
    ConditionMode, Delta, DeltaDecision, DroppingVector, NoAqm, OfflineOptimum, OnlinePolicy, SearchMode,
    SuccessModel,
};
pub use predictor::{
    collect_dataset, ConditionalLatencyModel, Dataset, FitOptions, GaussianMixture, TrainingSample,
    TrainingScenario,
};
pub use queue::{
    Aqm, GammaService, Outcome, Packet, PacketStatus, QueueConfig, QueueState, RunMetrics, ServiceModel,
    Simulation,
};
pub use scalar::Scalar;
pub use sim::{EventKind, RngStream};

pub type Mixture = GaussianMixture<f64>;
pub type LatencyModel = ConditionalLatencyModel<f64>;
pub type Sim = Simulation<f64>;
pub type Config = QueueConfig<f64>;
pub type Snapshot = QueueState<f64>;
pub type Gamma = GammaService<f64>;
pub type CodelParams = CodelConfig<f64>;
