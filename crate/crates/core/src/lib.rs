//! Doppler velocity traces to machine-learned aortic boundary conditions.
//!
//! The numeric core is generic over the scalar type via [`Real`]; the
//! `*64` and `*32` aliases below fix it for the common cases.

// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bc;
pub mod config;
pub mod dataset;
pub mod features;
pub mod ids;
pub mod linalg;
pub mod models;
pub mod oracle;
pub mod pipeline;
pub mod scalar;
pub mod synth;
pub mod trace;

pub use bc::{
    assemble_bc_set, bc_deviation_stats, enforce_continuity, export_bc, parse_bc, peak_snapshot, velocity_to_massflow,
    BcError, BcType, Boundary, BoundaryConditionSet, BoundaryKind, ExportMode, FluidProperties, MassFlowProfile,
    OutletFlows, VesselGeometry,
};
pub use config::{load_config, ConfigError, PipelineConfig};
pub use dataset::{assemble_dataset, Dataset, DatasetError, DatasetRow};
pub use features::{split_dataset, standardize, target_log_transform, FeatureError, SplitIndices, SplitRatios};
pub use ids::{CaseId, VesselId};
pub use models::{
    fit_model, grid_search, make_voting_ensemble, predict_velocity_profile, EvaluationReport, FittedModel,
    ModelArtifact, ModelError, ModelFamily, ModelSpec,
};
pub use oracle::{evaluate_bc_set, percent_error, simplified_bernoulli, OracleError, OracleReport};
pub use pipeline::{run_command, Command, PipelineError};
pub use scalar::Real;
pub use trace::{
    clean_trace, estimate_heart_rate, parse_digitizer_csv, resample_trace, RawTrace, TraceError, VelocityTrace,
};

pub type RawTrace64 = RawTrace<f64>;
pub type VelocityTrace64 = VelocityTrace<f64>;
pub type Dataset64 = Dataset<f64>;
pub type ModelArtifact64 = ModelArtifact<f64>;
pub type ModelArtifact32 = ModelArtifact<f32>;
pub type FittedModel64 = FittedModel<f64>;
pub type MassFlowProfile64 = MassFlowProfile<f64>;
pub type BoundaryConditionSet64 = BoundaryConditionSet<f64>;
pub type VesselGeometry64 = VesselGeometry<f64>;
pub type FluidProperties64 = FluidProperties<f64>;
pub type OracleReport64 = OracleReport<f64>;
pub type EvaluationReport64 = EvaluationReport<f64>;
