use serde::Serialize;
use serde_json::Value;

use crate::error::Result;
use crate::harness::spec::{EnergyCurveInput, ExperimentKind, ExperimentSpec};
use crate::harness::{aim_trace, audit, curves, raster, training, CsvTable};

/// A named scientific check evaluated by an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

/// Tables, JSON artifacts and checks produced by one experiment run.
#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    /// File stem and table.
    pub tables: Vec<(String, CsvTable)>,
    pub json: Vec<(String, Value)>,
    /// Parameters after defaults and overrides were applied.
    pub resolved: Value,
    pub summary: Value,
    pub assertions: Vec<Assertion>,
}

impl ExperimentOutput {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn table(&self, name: &str) -> Option<&CsvTable> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

/// Runs the experiment a spec describes. `grid` overrides raster resolution.
pub fn run_experiment(spec: &ExperimentSpec, seed: u64, grid: Option<usize>) -> Result<ExperimentOutput> {
    match spec.kind {
        ExperimentKind::AimTrace => aim_trace::exp_aim_trace(&spec.params()?, seed),
        ExperimentKind::RasterS => {
            let mut p: crate::harness::RasterSParams = spec.params()?;
            if let Some(g) = grid {
                p.grid = g;
            }
            raster::exp_raster_s(&p, seed)
        }
        ExperimentKind::RasterT => {
            let mut p: crate::harness::RasterTParams = spec.params()?;
            if let Some(g) = grid {
                p.grid = g;
            }
            raster::exp_raster_t(&p, seed)
        }
        ExperimentKind::EnergyCurves => {
            let input: EnergyCurveInput = spec.params()?;
            curves::exp_energy_curves(&input.resolve(), seed)
        }
        ExperimentKind::Audit => audit::exp_audit(&spec.params()?, seed),
        ExperimentKind::GradCheck => training::exp_grad_check(&spec.params()?, seed),
        ExperimentKind::Train => training::exp_train(&spec.params()?, seed),
    }
}
