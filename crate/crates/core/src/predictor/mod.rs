//! Conditional latency density `p(latency | predecessors)` learned from a
//! run without AQM, queried for success probabilities at decision time.

mod dataset;
mod em;
mod mixture;
mod model;

pub use dataset::{collect_dataset, Dataset, LinkInfo, TrainingSample, TrainingScenario};
pub use em::{fit_group, EmOptions, FitStrategy, GroupFit};
pub use mixture::GaussianMixture;
pub use model::{
    ConditionFit, ConditionalLatencyModel, FitOptions, ModelMetadata, ESTIMATOR, MODEL_FILE_VERSION,
};
