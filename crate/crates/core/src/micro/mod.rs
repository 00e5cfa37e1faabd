//! Microscopic particle system: exact event simulation on a torus and
//! replica estimators.

pub mod config;
pub mod estimate;
pub mod experiments;
pub mod fenwick;
pub mod sim;

pub use config::{ParticleConfiguration, Point};
pub use estimate::{
    estimate_density, estimate_pair_correlation, write_snapshots, CorrelationEstimate, PairEstimate, SnapshotManifest,
    Torus, MIN_REPLICAS,
};
pub use experiments::{
    fluctuation_growth_demo, micro_meso_compare, run_replicas, CompareOptions, DemoOptions, EpsilonResult,
    FluctuationDemo, MicroMesoComparison,
};
pub use sim::{init_poisson, init_poisson_capped, Event, RunOutput, RunStatus, SimState, Snapshot, POPULATION_CAP};
