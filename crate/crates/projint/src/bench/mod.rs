//! Reference oracles, the benchmark experiments, CSV/JSON emission, and the
//! command-line interface.

pub mod cli;
pub mod emit;
pub mod experiment;
pub mod oracle;
pub mod selftest;

pub use emit::{emit, render, EmitFormat};
pub use experiment::{
    run_experiment, ExperimentId, ExperimentResult, ExperimentSpec, FitSummary, GridPoint,
    PlateauSummary, SchemeSeries,
};
pub use oracle::{reference_full, reference_reduced, FullOracle, ReducedOracle};
