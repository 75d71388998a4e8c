//! Sequence models: from-scratch stacked LSTM + linear head, min-max
//! normalization, MSE loss, Adam, and the teacher-forced / autoregressive
//! training regimes for the three model variants.

mod adam;
mod bptt;
mod checkpoint;
mod lstm;
mod normalizer;
mod train;

pub use adam::{adam_step, AdamParams, AdamState};
pub use bptt::{bptt_gradients, loss_mse, window_forward, SupervisedWindow, TrainRegime};
pub use checkpoint::{load_model, save_model, CHECKPOINT_MAGIC};
pub use lstm::{model_step, HiddenState, ModelWeights, Topology};
pub use normalizer::Normalizer;
pub use train::{train, TrainReport};

use crate::episode::ROBOT_DIMS;
use crate::error::{Error, Result};
use std::ops::Range;

/// The three model variants: what goes in and what comes out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelVariant {
    /// Slave state to next slave state (9 -> 9).
    S2S,
    /// Slave state to next master state (9 -> 9).
    S2M,
    /// Paired states to next paired states (18 -> 18).
    Sm2Sm,
}

impl ModelVariant {
    pub fn input_cols(&self) -> Range<usize> {
        match self {
            ModelVariant::S2S | ModelVariant::S2M => 0..ROBOT_DIMS,
            ModelVariant::Sm2Sm => 0..2 * ROBOT_DIMS,
        }
    }

    pub fn output_cols(&self) -> Range<usize> {
        match self {
            ModelVariant::S2S => 0..ROBOT_DIMS,
            ModelVariant::S2M => ROBOT_DIMS..2 * ROBOT_DIMS,
            ModelVariant::Sm2Sm => 0..2 * ROBOT_DIMS,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_cols().len()
    }

    pub fn output_dim(&self) -> usize {
        self.output_cols().len()
    }

    /// Free running requires the output space to be the input space.
    pub fn supports_autoregression(&self) -> bool {
        self.input_cols() == self.output_cols()
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelVariant::S2S => "s2s",
            ModelVariant::S2M => "s2m",
            ModelVariant::Sm2Sm => "sm2sm",
        }
    }
}

impl std::str::FromStr for ModelVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s2s" => Ok(ModelVariant::S2S),
            "s2m" => Ok(ModelVariant::S2M),
            "sm2sm" => Ok(ModelVariant::Sm2Sm),
            other => Err(Error::InvalidConfig(format!("unknown variant {other:?}"))),
        }
    }
}

impl std::fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything that defines a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub variant: ModelVariant,
    pub lstm_layers: usize,
    pub units: usize,
    /// Window length in 20 ms steps.
    pub window: usize,
    /// Random windows per optimizer step (one step per epoch).
    pub batch_size: usize,
    pub autoregressive: bool,
    /// Ground-truth re-injection period in steps when autoregressive.
    pub anchor_period: usize,
    /// Model prediction stride, ms.
    pub prediction_stride_ms: u64,
    pub adam: AdamParams,
    pub epochs: usize,
    pub seed: u64,
    /// Global gradient-norm clip; defaults on for autoregressive runs.
    pub grad_clip: Option<f64>,
}

impl ModelConfig {
    pub fn new(variant: ModelVariant, autoregressive: bool) -> Self {
        ModelConfig {
            variant,
            lstm_layers: 6,
            units: 50,
            window: 150,
            batch_size: 100,
            autoregressive,
            anchor_period: 10,
            prediction_stride_ms: 20,
            adam: AdamParams::default(),
            epochs: 100,
            seed: 0,
            grad_clip: if autoregressive { Some(1.0) } else { None },
        }
    }

    pub fn regime(&self) -> TrainRegime {
        if self.autoregressive {
            TrainRegime::Autoregressive {
                anchor_period: self.anchor_period,
            }
        } else {
            TrainRegime::TeacherForced
        }
    }

    pub fn topology(&self) -> Topology {
        Topology::new(
            self.variant.input_dim(),
            self.variant.output_dim(),
            self.units,
            self.lstm_layers,
        )
    }

    /// Table-row label, e.g. `sm2sm-ar` or `s2s`.
    pub fn label(&self) -> String {
        if self.autoregressive {
            format!("{}-ar", self.variant)
        } else {
            self.variant.to_string()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lstm_layers == 0 || self.units == 0 {
            return Err(Error::InvalidConfig("layers and units must be >= 1".into()));
        }
        if self.window < 2 {
            return Err(Error::InvalidConfig("window must be >= 2".into()));
        }
        if self.anchor_period == 0 {
            return Err(Error::InvalidConfig("anchor period must be >= 1".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidConfig("batch size and epochs must be >= 1".into()));
        }
        if self.autoregressive && !self.variant.supports_autoregression() {
            return Err(Error::InvalidConfig(format!(
                "variant {} cannot train autoregressively: its output space differs from its input space",
                self.variant
            )));
        }
        Ok(())
    }
}

/// A trained model: configuration, dataset normalizer, and weights.
#[derive(Clone, Debug)]
pub struct SequenceModel {
    pub config: ModelConfig,
    pub normalizer: Normalizer,
    pub weights: ModelWeights,
}

impl SequenceModel {
    pub fn fresh_hidden(&self) -> HiddenState {
        HiddenState::zeros(&self.weights.topo)
    }

    /// One normalized-space inference step.
    pub fn step(&self, x: &[f64], hidden: &mut HiddenState) -> Result<Vec<f64>> {
        model_step(&self.weights, x, hidden)
    }
}
