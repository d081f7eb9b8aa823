//! Single FIFO queue with one server, deterministic arrivals and a
//! pluggable AQM.

mod metrics;
mod packet;
mod service;
mod simulation;
mod state;

pub use metrics::{Outcome, RunMetrics};
pub use packet::{remaining_budget, Packet, PacketStatus};
pub use service::{sample_service, GammaService, ServiceModel, ServiceSampler};
pub use simulation::{Aqm, QueueConfig, Simulation, DEFAULT_AQM_WINDOW};
pub use state::QueueState;
