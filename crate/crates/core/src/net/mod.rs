//! Heat-map predictor: the [`Predictor`] interface and a reference
//! multi-encoder hourglass with hand-written backpropagation.

mod checkpoint;
mod model;
pub(crate) mod tensor;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use model::{ForwardPass, HeatmapNet, CENTER_BIAS_INIT};
pub use train::{
    sample_loss, train, train_observed, write_loss_csv, LossRecord, ObjectTarget, TrainConfig, TrainOutcome,
    TrainingFrame, TrainingSet,
};

use crate::error::{Error, Result};
use crate::frame::GrayFrame;
use crate::grid::{CenterMap, VectorMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetConfig {
    /// Downsampling blocks per encoder.
    pub encoder_blocks: usize,
    /// Channels of the first block; each further block doubles them.
    pub base_channels: usize,
    /// Cascaded hourglasses, 1 or 2.
    pub stages: usize,
    pub classes: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            encoder_blocks: 2,
            base_channels: 8,
            stages: 1,
            classes: 2,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.encoder_blocks == 0 || self.encoder_blocks > 16 {
            return Err(Error::invalid(format!(
                "encoder_blocks must be in 1..=16, got {}",
                self.encoder_blocks
            )));
        }
        if self.base_channels == 0 {
            return Err(Error::invalid("base_channels must be >= 1"));
        }
        if self
            .base_channels
            .checked_shl(self.encoder_blocks as u32)
            .is_none_or(|c| c >> self.encoder_blocks != self.base_channels || c > 1 << 20)
        {
            return Err(Error::invalid("base_channels too large for the block count"));
        }
        if !(1..=2).contains(&self.stages) {
            return Err(Error::invalid(format!("stages must be 1 or 2, got {}", self.stages)));
        }
        if self.classes == 0 {
            return Err(Error::invalid("classes must be >= 1"));
        }
        Ok(())
    }

    /// Channel width at resolution level `level` (0 is full resolution).
    pub fn channels(&self, level: usize) -> usize {
        self.base_channels << level
    }

    /// Input width and height must be multiples of this.
    pub fn size_multiple(&self) -> usize {
        1 << self.encoder_blocks
    }
}

/// One network input: two consecutive frames and the feedback map.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictorInput {
    pub current: GrayFrame,
    pub previous: GrayFrame,
    pub feedback: CenterMap,
}

impl PredictorInput {
    pub fn new(current: GrayFrame, previous: GrayFrame, feedback: CenterMap) -> Result<Self> {
        let g = feedback.geometry();
        for (name, f) in [("current", &current), ("previous", &previous)] {
            if (f.width(), f.height()) != (g.width, g.height) {
                return Err(Error::Shape(format!(
                    "{name} frame is {}x{}, feedback is {}x{}",
                    f.width(),
                    f.height(),
                    g.width,
                    g.height
                )));
            }
        }
        Ok(Self {
            current,
            previous,
            feedback,
        })
    }

    pub fn width(&self) -> usize {
        self.current.width()
    }

    pub fn height(&self) -> usize {
        self.current.height()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionMaps {
    pub centers: CenterMap,
    pub motion: VectorMap,
    pub subpixel: VectorMap,
}

/// Anything that turns a [`PredictorInput`] into prediction maps.
pub trait Predictor {
    fn classes(&self) -> usize;
    fn predict(&self, input: &PredictorInput) -> Result<PredictionMaps>;
}

impl<T: Predictor + ?Sized> Predictor for &T {
    fn classes(&self) -> usize {
        (**self).classes()
    }

    fn predict(&self, input: &PredictorInput) -> Result<PredictionMaps> {
        (**self).predict(input)
    }
}

impl<T: Predictor + ?Sized> Predictor for std::sync::Arc<T> {
    fn classes(&self) -> usize {
        (**self).classes()
    }

    fn predict(&self, input: &PredictorInput) -> Result<PredictionMaps> {
        (**self).predict(input)
    }
}

impl<T: Predictor + ?Sized> Predictor for Box<T> {
    fn classes(&self) -> usize {
        (**self).classes()
    }

    fn predict(&self, input: &PredictorInput) -> Result<PredictionMaps> {
        (**self).predict(input)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Every learnable tensor of a net, in declaration order. Gradients use the
/// same type.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameters {
    pub config: NetConfig,
    pub tensors: Vec<NamedTensor>,
}

impl Parameters {
    pub fn len(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config,
            tensors: self
                .tensors
                .iter()
                .map(|t| NamedTensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: vec![0.0; t.data.len()],
                })
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.tensors.iter().flat_map(|t| t.data.iter().copied())
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.tensors {
            for v in &mut t.data {
                *v *= factor;
            }
        }
    }

    pub fn add_assign(&mut self, other: &Parameters) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += y;
            }
        }
    }
}

/// A net paired with its parameters.
#[derive(Clone, Debug)]
pub struct Model {
    net: HeatmapNet,
    params: Parameters,
}

impl Model {
    pub fn new(params: Parameters) -> Result<Self> {
        let net = HeatmapNet::new(params.config)?;
        net.check_parameters(&params)?;
        Ok(Self { net, params })
    }

    pub fn net(&self) -> &HeatmapNet {
        &self.net
    }

    pub fn parameters(&self) -> &Parameters {
        &self.params
    }

    pub fn config(&self) -> NetConfig {
        self.params.config
    }
}

impl Predictor for Model {
    fn classes(&self) -> usize {
        self.params.config.classes
    }

    fn predict(&self, input: &PredictorInput) -> Result<PredictionMaps> {
        self.net.predict(&self.params, input)
    }
}
