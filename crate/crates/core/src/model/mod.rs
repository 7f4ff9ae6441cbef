//! Stream networks, mid-level fusion, classification heads, baselines, and
//! gate-based importance extraction.

pub mod attention;
pub mod checkpoint;
pub mod config;
pub mod network;
pub mod probe;

pub use attention::{AttentionAccumulator, AttentionReport, PairScore, DEFAULT_TOP_K};
pub use config::{Activation, Architecture, HeadVariant, ModelConfig};
pub use probe::ModelProbe;
pub use network::{fuse, ArchitectureEcho, Model, ModelInput, Trace, TEMPORAL_KERNEL};

#[cfg(test)]
mod tests;
