use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::energy::{BetaMode, RhoKind};
use crate::error::{Error, Result};

pub const SPEC_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    AimTrace,
    RasterS,
    RasterT,
    EnergyCurves,
    Audit,
    GradCheck,
    Train,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::AimTrace => "aim-trace",
            ExperimentKind::RasterS => "raster-s",
            ExperimentKind::RasterT => "raster-t",
            ExperimentKind::EnergyCurves => "energy-curves",
            ExperimentKind::Audit => "audit",
            ExperimentKind::GradCheck => "grad-check",
            ExperimentKind::Train => "train",
        }
    }
}

/// JSON experiment description. `parameters` is validated against the
/// kind's own schema, which rejects unknown keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub version: u32,
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "empty_object")]
    pub parameters: serde_json::Value,
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        Self { version: SPEC_VERSION, kind, seed: Some(seed), parameters: empty_object() }
    }

    pub fn with_parameters(mut self, p: impl Serialize) -> Result<Self> {
        self.parameters = serde_json::to_value(p)?;
        Ok(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if spec.version != SPEC_VERSION {
            return Err(Error::Config(format!("unsupported spec version {} (expected {SPEC_VERSION})", spec.version)));
        }
        Ok(spec)
    }

    pub fn params<T: DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_value(self.parameters.clone())
            .map_err(|e| Error::Config(format!("{} parameters: {e}", self.kind.name())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AimTraceParams {
    pub n: usize,
    pub d: usize,
    /// Entry scale of `S`, `W`, `B1`, `B2`.
    pub scale: f64,
    /// `alpha2 = alpha2_factor / L_h`.
    pub alpha2_factor: f64,
    /// `alpha1 = alpha1_ratio * alpha2`.
    pub alpha1_ratio: f64,
    /// `y0 = y_h* + init_scale * N(0, 1)`.
    pub init_scale: f64,
    pub steps: usize,
}

impl Default for AimTraceParams {
    fn default() -> Self {
        Self { n: 10, d: 10, scale: 0.3, alpha2_factor: 0.5, alpha1_ratio: 0.5, init_scale: 5.0, steps: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RasterSParams {
    pub grid: usize,
    pub window: f64,
    pub scale: f64,
    pub thresholds: Vec<f64>,
}

impl Default for RasterSParams {
    fn default() -> Self {
        Self { grid: 301, window: 3.0, scale: 0.5, thresholds: vec![0.5, 0.7, 1.0, 1.5, 2.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RasterTParams {
    pub grid: usize,
    pub window: f64,
    pub scale: f64,
    pub alpha2_factor: f64,
    pub kappas: Vec<f64>,
    /// Cells within this radius of the origin are left out of member fractions.
    pub origin_radius: f64,
}

impl Default for RasterTParams {
    fn default() -> Self {
        Self {
            grid: 301,
            window: 3.0,
            scale: 1.0,
            alpha2_factor: 1.0,
            kappas: vec![0.1, 0.3, 0.5, 0.7, 0.9, 0.99],
            origin_radius: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveMode {
    RandomInit,
    Trained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainParams {
    pub n: usize,
    pub d: usize,
    pub depth: usize,
    pub samples: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub batch: usize,
    pub weight_scale: f64,
    pub head_scale: f64,
    pub alpha2: f64,
    /// Class separation of the synthetic task.
    pub shift: f64,
    pub layernorm: bool,
    pub beta_mode: BetaMode,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            n: 8,
            d: 8,
            depth: 2,
            samples: 200,
            steps: 400,
            learning_rate: 0.01,
            batch: 1,
            weight_scale: 0.02,
            head_scale: 0.1,
            alpha2: 0.1,
            shift: 0.5,
            layernorm: false,
            beta_mode: BetaMode::Reweighted,
        }
    }
}

fn default_train() -> TrainParams {
    TrainParams::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyCurveParams {
    pub mode: CurveMode,
    pub samples: usize,
    pub depth: usize,
    pub n: usize,
    pub d: usize,
    pub weight_scale: f64,
    pub alpha2: f64,
    pub use_relu: bool,
    pub beta_mode: BetaMode,
    pub rho: RhoKind,
    /// Optional embedding file; samples then draw rows from it.
    pub embeddings: Option<String>,
    #[serde(default = "default_train")]
    pub train: TrainParams,
}

impl Default for EnergyCurveParams {
    fn default() -> Self {
        Self {
            mode: CurveMode::RandomInit,
            samples: 200,
            depth: 12,
            n: 32,
            d: 64,
            weight_scale: 0.02,
            alpha2: 0.1,
            use_relu: true,
            beta_mode: BetaMode::Reweighted,
            rho: RhoKind::NegExp,
            embeddings: None,
            train: TrainParams::default(),
        }
    }
}

/// Partial form used for parsing, so that the training mode can pick its own defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct EnergyCurveInput {
    mode: Option<CurveMode>,
    samples: Option<usize>,
    depth: Option<usize>,
    n: Option<usize>,
    d: Option<usize>,
    weight_scale: Option<f64>,
    alpha2: Option<f64>,
    use_relu: Option<bool>,
    beta_mode: Option<BetaMode>,
    rho: Option<RhoKind>,
    embeddings: Option<String>,
    train: Option<TrainParams>,
}

impl EnergyCurveInput {
    pub(crate) fn resolve(self) -> EnergyCurveParams {
        let mode = self.mode.unwrap_or(CurveMode::RandomInit);
        let base = EnergyCurveParams::default();
        let train = self.train.unwrap_or_default();
        let (depth, n, d, scale, alpha2, beta) = match mode {
            CurveMode::RandomInit => (base.depth, base.n, base.d, base.weight_scale, base.alpha2, base.beta_mode),
            CurveMode::Trained => (train.depth, train.n, train.d, train.weight_scale, train.alpha2, train.beta_mode),
        };
        EnergyCurveParams {
            mode,
            samples: self.samples.unwrap_or(base.samples),
            depth: self.depth.unwrap_or(depth),
            n: self.n.unwrap_or(n),
            d: self.d.unwrap_or(d),
            weight_scale: self.weight_scale.unwrap_or(scale),
            alpha2: self.alpha2.unwrap_or(alpha2),
            use_relu: self.use_relu.unwrap_or(base.use_relu),
            beta_mode: self.beta_mode.unwrap_or(beta),
            rho: self.rho.unwrap_or(base.rho),
            embeddings: self.embeddings,
            train,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditParams {
    pub runs: usize,
    pub n_max: usize,
    pub d_max: usize,
    pub depth: usize,
    pub weight_scale: f64,
    pub alpha2: f64,
    pub kappa: f64,
    /// Also audit alternating-minimization traces on quadratic instances.
    pub include_aim: bool,
    pub aim_steps: usize,
}

impl Default for AuditParams {
    fn default() -> Self {
        Self {
            runs: 500,
            n_max: 8,
            d_max: 4,
            depth: 8,
            weight_scale: 0.3,
            alpha2: 0.05,
            kappa: 0.5,
            include_aim: true,
            aim_steps: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradCheckParams {
    pub n: usize,
    pub d: usize,
    pub depth: usize,
    pub outputs: usize,
    pub use_relu: bool,
    pub weight_scale: f64,
    pub alpha2: f64,
    /// Inputs are `|N(0, 1)| + input_offset`.
    pub input_offset: f64,
    pub tol: f64,
}

impl Default for GradCheckParams {
    fn default() -> Self {
        Self {
            n: 5,
            d: 6,
            depth: 2,
            outputs: 2,
            use_relu: true,
            weight_scale: 0.4,
            alpha2: 0.1,
            input_offset: 1e-3,
            tol: 1e-4,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let ok = r#"{"version": 1, "kind": "aim-trace", "seed": 4, "parameters": {"steps": 10}}"#;
        let spec = ExperimentSpec::from_json(ok).unwrap();
        assert_eq!(spec.params::<AimTraceParams>().unwrap().steps, 10);
        let typo = r#"{"version": 1, "kind": "aim-trace", "parameters": {"stpes": 10}}"#;
        assert!(ExperimentSpec::from_json(typo).unwrap().params::<AimTraceParams>().is_err());
        let top = r#"{"version": 1, "kind": "aim-trace", "extra": 1}"#;
        assert!(ExperimentSpec::from_json(top).is_err());
        let ver = r#"{"version": 2, "kind": "aim-trace"}"#;
        assert!(ExperimentSpec::from_json(ver).is_err());
    }

    #[test]
    fn trained_curves_take_training_shape() {
        let p = EnergyCurveInput { mode: Some(CurveMode::Trained), ..Default::default() }.resolve();
        assert_eq!((p.depth, p.n, p.d), (2, 8, 8));
        let p = EnergyCurveInput::default().resolve();
        assert_eq!((p.depth, p.n, p.d), (12, 32, 64));
    }
}
