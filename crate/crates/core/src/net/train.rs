use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{HeatmapNet, NetConfig, Parameters, PredictionMaps, PredictorInput};
use crate::augment::{build_feedback, AugmentConfig};
use crate::error::{Error, Result};
use crate::frame::GrayFrame;
use crate::grid::{render_centers, Center, GridGeometry, Point, RenderConfig};
use crate::loss::{focal_loss, l1_loss, densify, total_loss, FocalParams, HeadGradients, HeadLosses, LossWeights};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Optional cap on optimizer steps across all epochs.
    pub max_steps: Option<usize>,
    pub adam_betas: (f64, f64),
    pub adam_epsilon: f64,
    pub weights: LossWeights,
    pub focal: FocalParams,
    pub shuffle: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.0013,
            batch_size: 6,
            max_epochs: 16,
            max_steps: None,
            adam_betas: (0.9, 0.999),
            adam_epsilon: 1e-8,
            weights: LossWeights::default(),
            focal: FocalParams::default(),
            shuffle: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning_rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        let (b1, b2) = self.adam_betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return Err(Error::invalid(format!("Adam betas must be in [0, 1), got ({b1}, {b2})")));
        }
        if !(self.adam_epsilon > 0.0) {
            return Err(Error::invalid("adam_epsilon must be > 0"));
        }
        Ok(())
    }
}

/// One ground-truth object of a training frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectTarget {
    pub class: usize,
    pub position: Point,
    /// Displacement back to the previous-frame position, when known.
    pub motion: Option<Point>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingFrame {
    pub current: GrayFrame,
    pub previous: GrayFrame,
    pub objects: Vec<ObjectTarget>,
    /// Previous-frame centers the feedback map is simulated from.
    pub previous_centers: Vec<Center>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub classes: usize,
    pub frames: Vec<TrainingFrame>,
}

impl TrainingSet {
    fn geometry(&self) -> Result<GridGeometry> {
        let first = self
            .frames
            .first()
            .ok_or_else(|| Error::invalid("training set is empty"))?;
        let g = GridGeometry::new(first.current.width(), first.current.height(), self.classes)?;
        for (i, f) in self.frames.iter().enumerate() {
            for frame in [&f.current, &f.previous] {
                if (frame.width(), frame.height()) != (g.width, g.height) {
                    return Err(Error::Shape(format!("training frame {i} differs in size")));
                }
            }
            for o in &f.objects {
                g.check_class(o.class)?;
                if !g.contains(o.position) {
                    return Err(Error::invalid(format!("training frame {i} has an object outside the grid")));
                }
            }
        }
        Ok(g)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    pub epoch: usize,
    /// 1-based optimizer step.
    pub step: usize,
    /// Weighted total, averaged over the batch.
    pub total: f64,
    pub center: f64,
    pub motion: f64,
    pub subpixel: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: Parameters,
    pub history: Vec<LossRecord>,
}

/// Per-sample head losses and their gradients on the head outputs.
///
/// Targets are anchored at the pixel containing each object: the center map
/// peaks at `floor(position)`, where the subpixel head should read the
/// fractional part and the motion head the displacement.
pub fn sample_loss(
    maps: &PredictionMaps,
    objects: &[ObjectTarget],
    render: &RenderConfig,
    focal: &FocalParams,
) -> Result<(HeadLosses, HeadGradients)> {
    let geometry = maps.centers.geometry();
    let anchors: Vec<Center> = objects
        .iter()
        .map(|o| Center::new(o.class, o.position.floor()))
        .collect();
    let truth = render_centers(&anchors, geometry, render)?;
    let (center, center_grad) = focal_loss(&truth, &maps.centers, objects.len(), focal)?;

    let at: Vec<(usize, usize)> = anchors
        .iter()
        .map(|c| (c.position.x as usize, c.position.y as usize))
        .collect();
    let fracs: Vec<Point> = objects.iter().map(|o| o.position.fract()).collect();
    let (subpixel, sub_grad) = l1_loss(&fracs, &maps.subpixel, &at)?;

    let (motion_truth, motion_at): (Vec<Point>, Vec<(usize, usize)>) = objects
        .iter()
        .zip(&at)
        .filter_map(|(o, &p)| o.motion.map(|m| (m, p)))
        .unzip();
    let (motion, motion_grad) = l1_loss(&motion_truth, &maps.motion, &motion_at)?;

    let (w, h) = (geometry.width, geometry.height);
    Ok((
        HeadLosses {
            center,
            motion,
            subpixel,
        },
        HeadGradients {
            center: center_grad,
            motion: densify(&motion_grad, w, h),
            subpixel: densify(&sub_grad, w, h),
        },
    ))
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    fn new(params: &Parameters) -> Self {
        let zeros = || params.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect();
        Self {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut Parameters, grads: &Parameters, cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = cfg.adam_betas;
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        for (i, (p, g)) in params.tensors.iter_mut().zip(&grads.tensors).enumerate() {
            for (j, (w, &gj)) in p.data.iter_mut().zip(&g.data).enumerate() {
                let m = &mut self.m[i][j];
                let v = &mut self.v[i][j];
                *m = b1 * *m + (1.0 - b1) * gj;
                *v = b2 * *v + (1.0 - b2) * gj * gj;
                let update = cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.adam_epsilon);
                *w -= update;
            }
        }
    }
}

/// Minibatch Adam training from a seeded initialization.
pub fn train(
    data: &TrainingSet,
    config: &TrainConfig,
    net_config: NetConfig,
    augment: &AugmentConfig,
    render: &RenderConfig,
) -> Result<TrainOutcome> {
    train_observed(data, config, net_config, augment, render, |_| {})
}

/// [`train`] with a callback invoked after every optimizer step.
pub fn train_observed(
    data: &TrainingSet,
    config: &TrainConfig,
    net_config: NetConfig,
    augment: &AugmentConfig,
    render: &RenderConfig,
    mut observe: impl FnMut(&LossRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    augment.validate()?;
    if net_config.classes != data.classes {
        return Err(Error::Shape(format!(
            "net has {} classes, data has {}",
            net_config.classes, data.classes
        )));
    }
    let geometry = data.geometry()?;
    let net = HeatmapNet::new(net_config)?;
    let mut params = net.init_parameters(config.seed);
    let mut grads = params.zeros_like();
    let mut adam = Adam::new(&params);
    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut aug_rng = ChaCha8Rng::seed_from_u64(augment.seed);
    let mut order: Vec<usize> = (0..data.frames.len()).collect();
    let mut history = Vec::new();
    let mut step = 0;

    'epochs: for epoch in 0..config.max_epochs {
        if config.shuffle {
            order.shuffle(&mut order_rng);
        }
        for batch in order.chunks(config.batch_size) {
            if config.max_steps.is_some_and(|m| step >= m) {
                break 'epochs;
            }
            step += 1;
            for t in &mut grads.tensors {
                t.data.fill(0.0);
            }
            let mut sum = LossRecord {
                epoch,
                step,
                total: 0.0,
                center: 0.0,
                motion: 0.0,
                subpixel: 0.0,
            };
            for &i in batch {
                let frame = &data.frames[i];
                let feedback = build_feedback(&frame.previous_centers, geometry, render, augment, &mut aug_rng)?;
                let input = PredictorInput::new(frame.current.clone(), frame.previous.clone(), feedback.map)?;
                let pass = net.forward(&params, &input)?;
                let (losses, head_grads) = sample_loss(pass.maps(), &frame.objects, render, &config.focal)?;
                let (total, weighted) = total_loss(&losses, &head_grads, &config.weights);
                if !total.is_finite() {
                    return Err(Error::Diverged { step, loss: total });
                }
                net.backward_pass(&params, &pass, &weighted, &mut grads)?;
                sum.total += total;
                sum.center += losses.center;
                sum.motion += losses.motion;
                sum.subpixel += losses.subpixel;
            }
            let n = batch.len() as f64;
            grads.scale(1.0 / n);
            if grads.values().any(|v| !v.is_finite()) {
                return Err(Error::Diverged {
                    step,
                    loss: f64::NAN,
                });
            }
            adam.step(&mut params, &grads, config);
            let record = LossRecord {
                total: sum.total / n,
                center: sum.center / n,
                motion: sum.motion / n,
                subpixel: sum.subpixel / n,
                ..sum
            };
            observe(&record);
            history.push(record);
        }
    }
    Ok(TrainOutcome { params, history })
}

pub fn write_loss_csv<W: Write>(history: &[LossRecord], mut out: W) -> Result<()> {
    writeln!(out, "epoch,step,total,center,motion,subpixel")?;
    for r in history {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.epoch, r.step, r.total, r.center, r.motion, r.subpixel
        )?;
    }
    Ok(())
}
