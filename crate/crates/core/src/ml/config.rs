use serde::{Deserialize, Serialize};

use crate::hashcore::{canonical_bytes, CanonicalJson, Decimal6, Digest};

use super::MlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }
}

/// Full list of layer widths, input first and class count last, plus the
/// hidden activation. An MLP with hidden widths `[32, 64, 32]` on 8 features
/// and 2 classes has `layers = [8, 32, 64, 32, 2]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub layers: Vec<usize>,
    pub activation: Activation,
}

impl Architecture {
    pub fn mlp(inputs: usize, hidden: &[usize], classes: usize, activation: Activation) -> Self {
        let mut layers = vec![inputs];
        layers.extend_from_slice(hidden);
        layers.push(classes);
        Self { layers, activation }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0]
    }

    pub fn classes(&self) -> usize {
        *self.layers.last().expect("validated architecture has layers")
    }

    pub fn validate(&self) -> Result<(), MlError> {
        if self.layers.len() < 2 {
            return Err(MlError::Config("architecture needs at least input and output widths".into()));
        }
        if self.layers.iter().any(|&w| w == 0) {
            return Err(MlError::Config("layer widths must be positive".into()));
        }
        if self.classes() < 2 {
            return Err(MlError::Config("at least two classes required".into()));
        }
        Ok(())
    }

    pub fn to_canonical(&self) -> CanonicalJson {
        canonical_bytes(self).expect("architecture has no floats")
    }

    pub fn digest(&self) -> Digest {
        self.to_canonical().digest()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

/// Training configuration. `learning_rate` is a decimal string on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub architecture: Architecture,
    pub epochs: u32,
    pub learning_rate: Decimal6,
    pub batch_size: u32,
    pub optimizer: Optimizer,
    pub rng_seed: u64,
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), MlError> {
        self.architecture.validate()?;
        if self.epochs == 0 {
            return Err(MlError::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(MlError::Config("batch_size must be at least 1".into()));
        }
        if self.learning_rate <= Decimal6::ZERO {
            return Err(MlError::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }

    pub fn to_canonical(&self) -> CanonicalJson {
        canonical_bytes(self).expect("config has no floats")
    }

    pub fn digest(&self) -> Digest {
        self.to_canonical().digest()
    }

    /// Parses and validates a config file. Any JSON layout is accepted; the
    /// digest is over the canonical re-serialization. Floats are rejected.
    pub fn from_json(bytes: &[u8]) -> Result<Self, MlError> {
        let canon = CanonicalJson::parse(bytes)?;
        let cfg: TrainingConfig =
            serde_json::from_slice(canon.as_bytes()).map_err(|e| MlError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
