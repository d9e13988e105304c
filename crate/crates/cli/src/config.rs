//! Experiment configuration: a single JSON document with strict schema.
//!
//! Every run is described by one [`ExperimentConfig`]. Values come from an
//! optional config file, then `--paper-scale`, then `--set key=value`
//! overrides, in that order. Unknown keys are rejected so typos fail before
//! any compute starts.

use std::path::{Path, PathBuf};

use elastmap_core::adjoint::InitialModulus;
use elastmap_core::fem::BoundaryLoad;
use elastmap_core::fieldgen::ModulusField;
use elastmap_core::materials::{MaterialKind, MaterialModel};
use elastmap_core::net::Fcnn;
use elastmap_core::pinn::{ConstitutiveWeight, LossWeights, PinnConfig, Variant};
use elastmap_core::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub mesh: MeshSection,
    pub field: FieldSection,
    pub material: MaterialSection,
    pub load: LoadSection,
    pub pinn: PinnSection,
    pub noise: NoiseSection,
    pub adjoint: AdjointSection,
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSection {
    pub grid_n: usize,
}

impl Default for MeshSection {
    fn default() -> Self {
        MeshSection { grid_n: 20 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldSource {
    Grf,
    Image,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldSection {
    pub source: FieldSource,
    pub length_scale: f64,
    pub seed: u64,
    pub image_path: Option<String>,
}

impl Default for FieldSection {
    fn default() -> Self {
        FieldSection {
            source: FieldSource::Grf,
            length_scale: 0.2,
            seed: 0,
            image_path: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaterialKindConfig {
    /// Plane-strain baseline.
    NeoHookean,
    NeoHookeanPlaneStress,
    MooneyRivlin,
    Gent,
}

impl From<MaterialKindConfig> for MaterialKind {
    fn from(k: MaterialKindConfig) -> MaterialKind {
        match k {
            MaterialKindConfig::NeoHookean => MaterialKind::NeoHookeanPlaneStrain,
            MaterialKindConfig::NeoHookeanPlaneStress => MaterialKind::NeoHookeanPlaneStress,
            MaterialKindConfig::MooneyRivlin => MaterialKind::MooneyRivlin,
            MaterialKindConfig::Gent => MaterialKind::Gent,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialSection {
    pub kind: MaterialKindConfig,
    pub nu: f64,
    pub mu2: f64,
    #[serde(rename = "Jm")]
    pub jm: f64,
}

impl Default for MaterialSection {
    fn default() -> Self {
        MaterialSection {
            kind: MaterialKindConfig::NeoHookean,
            nu: 0.3,
            mu2: elastmap_core::materials::DEFAULT_MU2,
            jm: elastmap_core::materials::DEFAULT_JM,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadSection {
    /// Prescribed equibiaxial stretch displacement.
    pub d: f64,
    /// Load ramp steps.
    pub steps: usize,
}

impl Default for LoadSection {
    fn default() -> Self {
        LoadSection { d: 0.2, steps: 10 }
    }
}

/// Constitutive-term weight: the adaptive per-point rule, or a fixed factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstitutiveWeightConfig {
    Fixed(f64),
    Named(ModulusSquaredTag),
}

/// The only named weighting rule; spelled "modulus-squared" in configs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModulusSquaredTag {
    #[serde(rename = "modulus-squared")]
    ModulusSquared,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsSection {
    pub pde: f64,
    pub constitutive: ConstitutiveWeightConfig,
    pub data: f64,
}

impl Default for WeightsSection {
    fn default() -> Self {
        WeightsSection {
            pde: 1.0,
            constitutive: ConstitutiveWeightConfig::Named(ModulusSquaredTag::ModulusSquared),
            data: 100.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PinnSection {
    /// Constraint/feature variant: A, B, C, or D.
    pub variant: String,
    /// Output arrangement: I through V.
    pub fcnn: String,
    pub iterations: usize,
    pub lr: f64,
    pub seed: u64,
    pub log_stride: usize,
    pub weights: WeightsSection,
}

impl Default for PinnSection {
    fn default() -> Self {
        PinnSection {
            variant: "B".to_string(),
            fcnn: "II".to_string(),
            iterations: 20_000,
            lr: 1e-3,
            seed: 0,
            log_stride: 100,
            weights: WeightsSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// Per-component RMS percentage added to reference strains.
    pub percent: f64,
    pub seed: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            percent: 0.0,
            seed: 0,
        }
    }
}

/// Initial modulus: a number means uniform; strings select "uniform:X" or
/// "random:SEED".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialModulusConfig {
    Uniform(f64),
    Spec(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdjointSection {
    #[serde(rename = "E_init")]
    pub e_init: InitialModulusConfig,
    pub max_iter: usize,
    /// Convergence tolerance on the relative strain error, as a fraction.
    pub tol: f64,
}

impl Default for AdjointSection {
    fn default() -> Self {
        AdjointSection {
            e_init: InitialModulusConfig::Uniform(3.0),
            max_iter: 200,
            tol: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: "out".to_string(),
        }
    }
}

impl ExperimentConfig {
    /// Loads and resolves a config: file, then `--paper-scale`, then `--set`
    /// overrides, then strict deserialization.
    pub fn load(path: Option<&Path>, paper_scale: bool, sets: &[String]) -> Result<ExperimentConfig> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                serde_json::from_str::<Value>(&text)
                    .map_err(|e| Error::format(format!("{}: {e}", p.display())))?
            }
            None => Value::Object(Default::default()),
        };
        if !value.is_object() {
            return Err(Error::invalid("config root must be a JSON object"));
        }
        if paper_scale {
            set_path(&mut value, "mesh.grid_n", Value::from(50))?;
            set_path(&mut value, "pinn.iterations", Value::from(500_000))?;
        }
        for s in sets {
            let (key, raw) = s
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("--set expects key=value, got {s:?}")))?;
            set_path(&mut value, key, parse_scalar(raw))?;
        }
        let config: ExperimentConfig = serde_json::from_value(value)
            .map_err(|e| Error::invalid(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Checks ranges and parses every enum-like string so that a bad config
    /// fails before any compute, whichever subcommand runs.
    pub fn validate(&self) -> Result<()> {
        if self.mesh.grid_n == 0 {
            return Err(Error::invalid("mesh.grid_n must be at least 1"));
        }
        if !(self.field.length_scale > 0.0) || !self.field.length_scale.is_finite() {
            return Err(Error::invalid("field.length_scale must be finite and > 0"));
        }
        if !(self.pinn.lr > 0.0) || !self.pinn.lr.is_finite() {
            return Err(Error::invalid("pinn.lr must be finite and > 0"));
        }
        if self.pinn.log_stride == 0 {
            return Err(Error::invalid("pinn.log_stride must be at least 1"));
        }
        if !(self.noise.percent >= 0.0) || !self.noise.percent.is_finite() {
            return Err(Error::invalid("noise.percent must be finite and >= 0"));
        }
        if self.adjoint.max_iter == 0 {
            return Err(Error::invalid("adjoint.max_iter must be at least 1"));
        }
        if !(self.adjoint.tol > 0.0) || !self.adjoint.tol.is_finite() {
            return Err(Error::invalid("adjoint.tol must be finite and > 0"));
        }
        if self.output.directory.is_empty() {
            return Err(Error::invalid("output.directory must not be empty"));
        }
        self.variant()?;
        self.fcnn()?;
        self.material_model()?;
        self.boundary_load()?;
        self.loss_weights()?;
        self.initial_modulus()?;
        Ok(())
    }

    pub fn variant(&self) -> Result<Variant> {
        self.pinn.variant.parse()
    }

    pub fn fcnn(&self) -> Result<Fcnn> {
        self.pinn.fcnn.parse()
    }

    pub fn material_model(&self) -> Result<MaterialModel> {
        MaterialModel::from_kind(
            self.material.kind.into(),
            self.material.nu,
            self.material.mu2,
            self.material.jm,
        )
    }

    pub fn boundary_load(&self) -> Result<BoundaryLoad> {
        BoundaryLoad::new(self.load.d, self.load.steps)
    }

    pub fn loss_weights(&self) -> Result<LossWeights> {
        let constitutive = match self.pinn.weights.constitutive {
            ConstitutiveWeightConfig::Named(_) => ConstitutiveWeight::ModulusSquared,
            ConstitutiveWeightConfig::Fixed(w) => {
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::invalid(
                        "pinn.weights.constitutive must be \"modulus-squared\" or a finite number >= 0",
                    ));
                }
                ConstitutiveWeight::Fixed(w)
            }
        };
        Ok(LossWeights {
            pde: self.pinn.weights.pde,
            data: self.pinn.weights.data,
            constitutive,
        })
    }

    /// Full training configuration for this experiment's architecture.
    pub fn pinn_config(&self) -> Result<PinnConfig> {
        let mut cfg = PinnConfig::new(
            self.variant()?,
            self.fcnn()?,
            self.boundary_load()?,
            self.material_model()?,
        );
        cfg.weights = self.loss_weights()?;
        cfg.learning_rate = self.pinn.lr;
        cfg.iterations = self.pinn.iterations;
        cfg.seed = self.pinn.seed;
        cfg.log_stride = self.pinn.log_stride;
        Ok(cfg)
    }

    /// Initial modulus for the inversion.
    pub fn initial_modulus(&self) -> Result<InitialModulus> {
        match &self.adjoint.e_init {
            InitialModulusConfig::Uniform(x) => uniform_init(*x),
            InitialModulusConfig::Spec(s) => {
                if let Some(rest) = s.strip_prefix("random:") {
                    let seed: u64 = rest
                        .parse()
                        .map_err(|_| Error::invalid(format!("adjoint.E_init: bad seed {rest:?}")))?;
                    Ok(InitialModulus::Random { seed })
                } else if let Some(rest) = s.strip_prefix("uniform:") {
                    let x: f64 = rest
                        .parse()
                        .map_err(|_| Error::invalid(format!("adjoint.E_init: bad value {rest:?}")))?;
                    uniform_init(x)
                } else {
                    Err(Error::invalid(format!(
                        "adjoint.E_init must be a number, \"uniform:X\", or \"random:SEED\", got {s:?}"
                    )))
                }
            }
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(&self.output.directory)
    }
}

fn uniform_init(x: f64) -> Result<InitialModulus> {
    if !x.is_finite() || !(1.0..=5.0).contains(&x) {
        return Err(Error::invalid(format!(
            "adjoint.E_init = {x} must lie in the modulus box [1, 5]"
        )));
    }
    Ok(InitialModulus::Uniform(x))
}

/// Builds a reference modulus field from a per-element field CSV.
pub fn modulus_from_values(values: Vec<f64>, elements: usize) -> Result<ModulusField> {
    if values.len() != elements {
        return Err(Error::invalid(format!(
            "modulus field has {} values for {} elements",
            values.len(),
            elements
        )));
    }
    Ok(ModulusField { values })
}

/// Sets a dotted key in a JSON object tree, creating intermediate objects.
fn set_path(root: &mut Value, dotted: &str, v: Value) -> Result<()> {
    let parts: Vec<&str> = dotted.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::invalid(format!("bad override key {dotted:?}")));
    }
    let mut cur = root;
    for p in &parts[..parts.len() - 1] {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::invalid(format!("override key {dotted:?} crosses a non-object")))?;
        cur = obj
            .entry(p.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = cur
        .as_object_mut()
        .ok_or_else(|| Error::invalid(format!("override key {dotted:?} crosses a non-object")))?;
    obj.insert(parts[parts.len() - 1].to_string(), v);
    Ok(())
}

/// `--set` values parse as JSON scalars when possible, else as strings,
/// so `iterations=1000` is a number and `variant=B` is a string.
fn parse_scalar(raw: &str) -> Value {
    serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}
