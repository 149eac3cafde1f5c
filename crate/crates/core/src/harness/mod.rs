//! Experiment specs, drivers and tabular output.

pub mod aim_trace;
pub mod audit;
pub mod curves;
mod embeddings;
pub mod raster;
mod run;
mod spec;
mod table;
pub mod training;

pub use aim_trace::{exp_aim_trace, quadratic_pair};
pub use audit::{descent_audit, exp_audit};
pub use curves::{exp_energy_curves, quantile};
pub use embeddings::{load_embeddings, parse_embeddings};
pub use raster::{exp_raster_s, exp_raster_t};
pub use run::{run_experiment, Assertion, ExperimentOutput};
pub use spec::{
    AimTraceParams, AuditParams, CurveMode, EnergyCurveParams, ExperimentKind, ExperimentSpec, GradCheckParams,
    RasterSParams, RasterTParams, TrainParams, SPEC_VERSION,
};
pub use table::{Cell, CsvTable};
pub use training::{exp_grad_check, exp_train};
