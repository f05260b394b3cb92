//! Model files: one JSON schema with a `variant` discriminator.
//!
//! ```json
//! {"variant": "explicit", "rows": [[0.5, 0.5], [0.2, 0.3]], "weights": [1, 2]}
//! {"variant": "lazy_chain", "r": [[...]], "rho_r": [...], "rho_delta": [...], "rho_absorb": [...]}
//! {"variant": "birth_death", "up": [...], "down": [...], "kill": [...]}
//! {"variant": "density", "density": [[...]], "masses": [...]}
//! {"variant": "generator", "rates": [[-1, 1], [0.5, -0.7]]}
//! ```
//!
//! `weights` (the function `V`) is optional everywhere and defaults to `V ≡ 1`.

use std::path::Path;
use std::sync::Arc;

use peripheral::qsd::{AbsorbedModel, LazyChain, ModelVariant};
use peripheral::semigroup::SubMarkovGenerator;
use peripheral::{Kernel, WeightedSpace};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Continuous-time model: a rate matrix with nonnegative off-diagonal entries
/// and nonpositive row sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorModel {
    pub rates: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl GeneratorModel {
    pub fn compile(&self) -> Result<SubMarkovGenerator, CliError> {
        let n = self.rates.len();
        let space = match &self.weights {
            Some(w) if w.len() != n => {
                return Err(CliError::invariant(format!(
                    "weights: expected {n} entries, found {}",
                    w.len()
                )))
            }
            Some(w) => WeightedSpace::with_weights(w.clone()).map_err(CliError::invariant)?,
            None => WeightedSpace::uniform(n),
        };
        SubMarkovGenerator::from_rows(&self.rates)
            .and_then(|g| g.with_space(Arc::new(space)))
            .map_err(CliError::invariant)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ModelFile {
    Absorbed(AbsorbedModel),
    Generator(GeneratorFile),
}

/// [`GeneratorModel`] with its discriminator, for serialization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorFile {
    variant: GeneratorTag,
    #[serde(flatten)]
    pub model: GeneratorModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
enum GeneratorTag {
    Generator,
}

impl ModelFile {
    pub fn generator(model: GeneratorModel) -> Self {
        Self::Generator(GeneratorFile {
            variant: GeneratorTag::Generator,
            model,
        })
    }

    /// The discrete-time kernel; generators are rejected.
    pub fn kernel(&self) -> Result<Kernel, CliError> {
        match self {
            Self::Absorbed(m) => m.compile().map_err(CliError::invariant),
            Self::Generator(_) => Err(CliError::usage(
                "this command needs a discrete-time model, found variant \"generator\"",
            )),
        }
    }

    pub fn absorbed(&self) -> Result<&AbsorbedModel, CliError> {
        match self {
            Self::Absorbed(m) => Ok(m),
            Self::Generator(_) => Err(CliError::usage(
                "this command needs a discrete-time model, found variant \"generator\"",
            )),
        }
    }

    pub fn generator_model(&self) -> Result<SubMarkovGenerator, CliError> {
        match self {
            Self::Generator(g) => g.model.compile(),
            Self::Absorbed(_) => Err(CliError::usage(
                "semigroup needs a model with variant \"generator\"",
            )),
        }
    }

    /// Validates the model's invariants without keeping the compiled form.
    pub fn validate(&self) -> Result<(), CliError> {
        match self {
            Self::Absorbed(m) => m.compile().map(|_| ()).map_err(CliError::invariant),
            Self::Generator(g) => g.model.compile().map(|_| ()),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExplicitPayload {
    rows: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BirthDeathPayload {
    up: Vec<f64>,
    down: Vec<f64>,
    kill: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DensityPayload {
    density: Vec<Vec<f64>>,
    masses: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LazyChainPayload {
    r: Vec<Vec<f64>>,
    rho_r: Vec<f64>,
    rho_delta: Vec<f64>,
    rho_absorb: Vec<f64>,
}

fn field<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T, CliError> {
    serde_path_to_error::deserialize(value)
        .map_err(|e| CliError::schema(&e.path().to_string(), e.inner().to_string()))
}

/// Parses and validates a model document. Schema errors carry the path to the
/// offending field.
///
/// Each variant is decoded through its own payload type: serde's internally
/// tagged enums buffer their input and would lose the error path.
pub fn parse_model(text: &str) -> Result<ModelFile, CliError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::schema("", e.to_string()))?;
    let serde_json::Value::Object(mut map) = value else {
        return Err(CliError::schema("", "expected a JSON object".into()));
    };
    let variant = match map.remove("variant") {
        Some(serde_json::Value::String(v)) => v,
        _ => {
            return Err(CliError::schema(
                "variant",
                "missing string discriminator".into(),
            ))
        }
    };
    if variant == "generator" {
        let model = ModelFile::generator(field(map.into())?);
        model.validate()?;
        return Ok(model);
    }
    let weights = match map.remove("weights") {
        Some(w) => Some(field::<Vec<f64>>(w).map_err(|e| match e {
            CliError::Schema { path, message } => {
                CliError::schema(&format!("weights{}", path.trim_start_matches('.')), message)
            }
            other => other,
        })?),
        None => None,
    };
    let body = serde_json::Value::Object(map);
    let variant = match variant.as_str() {
        "explicit" => {
            let ExplicitPayload { rows } = field(body)?;
            ModelVariant::Explicit { rows }
        }
        "lazy_chain" => {
            let LazyChainPayload { r, rho_r, rho_delta, rho_absorb } = field(body)?;
            ModelVariant::LazyChain(LazyChain { r, rho_r, rho_delta, rho_absorb })
        }
        "birth_death" => {
            let BirthDeathPayload { up, down, kill } = field(body)?;
            ModelVariant::BirthDeath { up, down, kill }
        }
        "density" => {
            let DensityPayload { density, masses } = field(body)?;
            ModelVariant::Density { density, masses }
        }
        other => {
            return Err(CliError::schema(
                "variant",
                format!("unknown variant `{other}`, expected explicit, lazy_chain, birth_death, density or generator"),
            ))
        }
    };
    let model = ModelFile::Absorbed(AbsorbedModel { variant, weights });
    model.validate()?;
    Ok(model)
}

pub fn load_model(path: &Path) -> Result<ModelFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    parse_model(&text)
}

pub fn serialize_model(model: &ModelFile) -> String {
    serde_json::to_string_pretty(model).expect("models serialize")
}
