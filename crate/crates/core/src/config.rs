//! Flat `key = value` configuration with dotted section prefixes.
//!
//! ```text
//! # comment
//! classes = 2
//! sgr.theta = 0.32
//! sgr.class1.theta = 0.4   # per-class override
//! net.base_channels = 8
//! ```
//!
//! Every key is optional; unknown and repeated keys are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::assoc::{AssocConfig, DEFAULT_KAPPA};
use crate::augment::AugmentConfig;
use crate::error::{Error, Result};
use crate::grid::RenderConfig;
use crate::loss::{FocalParams, LossWeights};
use crate::metrics::{DEFAULT_GATE, DEFAULT_IOU_THRESHOLDS, TIGHT_GATE};
use crate::net::{NetConfig, TrainConfig};
use crate::pipeline::{TrackingConfig, DEFAULT_WINDOW};
use crate::sgr::{ClassParams, SgrConfig, DEFAULT_LAMBDA, DEFAULT_PHI, DEFAULT_THETA};
use crate::synth::ScenarioConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub gate: f64,
    pub tight_gate: f64,
    pub iou_thresholds: Vec<f64>,
    /// Class scored by detection and track metrics.
    pub class: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            gate: DEFAULT_GATE,
            tight_gate: TIGHT_GATE,
            iou_thresholds: DEFAULT_IOU_THRESHOLDS.to_vec(),
            class: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub classes: usize,
    pub render: RenderConfig,
    pub tracking: TrackingConfig,
    pub net: NetConfig,
    pub train: TrainConfig,
    pub augment: AugmentConfig,
    pub scenario: ScenarioConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let render = RenderConfig::default();
        Self {
            classes: 2,
            render,
            tracking: TrackingConfig {
                sgr: SgrConfig::uniform(2, ClassParams::default(), render),
                assoc: AssocConfig { kappa: DEFAULT_KAPPA },
                window: DEFAULT_WINDOW,
                feedback: true,
            },
            net: NetConfig::default(),
            train: TrainConfig::default(),
            augment: AugmentConfig::default(),
            scenario: ScenarioConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

struct Entries {
    source: String,
    map: BTreeMap<String, (String, usize)>,
}

impl Entries {
    fn parse(text: &str, source: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let loc = format!("{source}:{}", i + 1);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(&loc, format!("expected key = value, got {line:?}")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::config(&loc, "empty key"));
            }
            if map.insert(key.to_string(), (value.trim().to_string(), i + 1)).is_some() {
                return Err(Error::config(&loc, format!("duplicate key {key}")));
            }
        }
        Ok(Self {
            source: source.to_string(),
            map,
        })
    }

    fn location(&self, key: &str) -> String {
        match self.map.get(key) {
            Some((_, line)) => format!("{}:{line}", self.source),
            None => format!("{}:{key}", self.source),
        }
    }

    fn get<T: FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.map.remove(key) {
            None => Ok(default),
            Some((value, line)) => value.parse().map_err(|e| {
                Error::config(format!("{}:{line}", self.source), format!("{key}: cannot parse {value:?}: {e}"))
            }),
        }
    }

    fn get_list(&mut self, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        match self.map.remove(key) {
            None => Ok(default),
            Some((value, line)) => value
                .split(',')
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|e| {
                        Error::config(format!("{}:{line}", self.source), format!("{key}: {e}"))
                    })
                })
                .collect(),
        }
    }

    fn finish(self) -> Result<()> {
        match self.map.into_iter().next() {
            None => Ok(()),
            Some((key, (_, line))) => Err(Error::config(format!("{}:{line}", self.source), format!("unknown key {key}"))),
        }
    }
}

fn checked<T>(location: String, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidInput(m) => Error::config(location, m),
        other => other,
    })
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut e = Entries::parse(text, source)?;
        let d = Self::default();

        let classes: usize = e.get("classes", d.classes)?;
        if classes == 0 {
            return Err(Error::config(e.location("classes"), "classes must be >= 1"));
        }
        let loc = e.location("render.sigma");
        let render = checked(loc, RenderConfig::new(e.get("render.sigma", d.render.sigma)?))?;

        let sgr_enabled: bool = e.get("sgr.enabled", true)?;
        let theta: f64 = e.get("sgr.theta", DEFAULT_THETA)?;
        let lambda: f64 = e.get("sgr.lambda", DEFAULT_LAMBDA)?;
        let phi: f64 = e.get("sgr.phi", DEFAULT_PHI)?;
        let mut per_class = Vec::with_capacity(classes);
        for c in 0..classes {
            let key = |k: &str| format!("sgr.class{c}.{k}");
            let loc = e.location(&key("theta"));
            let t = e.get(&key("theta"), theta)?;
            let l = e.get(&key("lambda"), lambda)?;
            let p = e.get(&key("phi"), phi)?;
            let params = if sgr_enabled {
                ClassParams::new(t, l, p)
            } else {
                ClassParams::threshold_only(t)
            };
            per_class.push(checked(loc, params)?);
        }
        let sgr = SgrConfig {
            classes: per_class,
            render,
        };
        let loc = e.location("assoc.kappa");
        let assoc = checked(loc, AssocConfig::new(e.get("assoc.kappa", DEFAULT_KAPPA)?))?;
        let loc = e.location("detect.window");
        let tracking = TrackingConfig {
            sgr,
            assoc,
            window: e.get("detect.window", d.tracking.window)?,
            feedback: e.get("detect.feedback", true)?,
        };
        checked(loc, tracking.validate())?;

        let net = NetConfig {
            encoder_blocks: e.get("net.encoder_blocks", d.net.encoder_blocks)?,
            base_channels: e.get("net.base_channels", d.net.base_channels)?,
            stages: e.get("net.stages", d.net.stages)?,
            classes,
        };
        checked(e.location("net"), net.validate())?;

        let t = &d.train;
        let loc = e.location("loss");
        let weights = checked(
            loc.clone(),
            LossWeights::new(
                e.get("loss.center_weight", t.weights.center)?,
                e.get("loss.motion_weight", t.weights.motion)?,
                e.get("loss.subpixel_weight", t.weights.subpixel)?,
            ),
        )?;
        let focal = checked(
            loc,
            FocalParams::new(e.get("loss.focal_alpha", t.focal.alpha)?, e.get("loss.focal_beta", t.focal.beta)?),
        )?;
        let max_steps: usize = e.get("train.max_steps", 0)?;
        let train = TrainConfig {
            learning_rate: e.get("train.learning_rate", t.learning_rate)?,
            batch_size: e.get("train.batch_size", t.batch_size)?,
            max_epochs: e.get("train.max_epochs", t.max_epochs)?,
            max_steps: (max_steps > 0).then_some(max_steps),
            adam_betas: (e.get("train.beta1", t.adam_betas.0)?, e.get("train.beta2", t.adam_betas.1)?),
            adam_epsilon: e.get("train.epsilon", t.adam_epsilon)?,
            weights,
            focal,
            shuffle: e.get("train.shuffle", t.shuffle)?,
            seed: e.get("train.seed", t.seed)?,
        };
        checked(e.location("train"), train.validate())?;

        let a = &d.augment;
        let augment = AugmentConfig {
            rcr_prob: e.get("augment.rcr_prob", a.rcr_prob)?,
            rcr_max_reduction: e.get("augment.rcr_max_reduction", a.rcr_max_reduction)?,
            rcp_cluster_prob: e.get("augment.rcp_cluster_prob", a.rcp_cluster_prob)?,
            rcp_cluster_size: (
                e.get("augment.rcp_cluster_min", a.rcp_cluster_size.0)?,
                e.get("augment.rcp_cluster_max", a.rcp_cluster_size.1)?,
            ),
            rcp_offset_radius: e.get("augment.rcp_offset_radius", a.rcp_offset_radius)?,
            rcp_background_rate: e.get("augment.rcp_background_rate", a.rcp_background_rate)?,
            shift_radius: e.get("augment.shift_radius", a.shift_radius)?,
            deletion_prob: e.get("augment.deletion_prob", a.deletion_prob)?,
            seed: e.get("augment.seed", a.seed)?,
        };
        checked(e.location("augment"), augment.validate())?;

        let s = &d.scenario;
        let scenario = ScenarioConfig {
            width: e.get("scenario.width", s.width)?,
            height: e.get("scenario.height", s.height)?,
            frame_count: e.get("scenario.frames", s.frame_count)?,
            vehicle_count: e.get("scenario.vehicles", s.vehicle_count)?,
            speed_range: (e.get("scenario.speed_min", s.speed_range.0)?, e.get("scenario.speed_max", s.speed_range.1)?),
            vehicle_length_range: (
                e.get("scenario.length_min", s.vehicle_length_range.0)?,
                e.get("scenario.length_max", s.vehicle_length_range.1)?,
            ),
            vehicle_width_range: (
                e.get("scenario.width_min", s.vehicle_width_range.0)?,
                e.get("scenario.width_max", s.vehicle_width_range.1)?,
            ),
            stop_prob: e.get("scenario.stop_prob", s.stop_prob)?,
            go_prob: e.get("scenario.go_prob", s.go_prob)?,
            jitter_radius: e.get("scenario.jitter_radius", s.jitter_radius)?,
            stripe_prob: e.get("scenario.stripe_prob", s.stripe_prob)?,
            stripe_delta: e.get("scenario.stripe_delta", s.stripe_delta)?,
            noise_sigma: e.get("scenario.noise_sigma", s.noise_sigma)?,
            seed: e.get("scenario.seed", s.seed)?,
        };
        checked(e.location("scenario"), scenario.validate())?;

        let ev = &d.eval;
        let eval = EvalConfig {
            gate: e.get("eval.gate", ev.gate)?,
            tight_gate: e.get("eval.tight_gate", ev.tight_gate)?,
            iou_thresholds: e.get_list("eval.iou_thresholds", ev.iou_thresholds.clone())?,
            class: e.get("eval.class", ev.class)?,
        };
        for (name, g) in [("eval.gate", eval.gate), ("eval.tight_gate", eval.tight_gate)] {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::config(e.location(name), format!("{name} must be > 0")));
            }
        }
        if eval.class >= classes {
            return Err(Error::config(e.location("eval.class"), "eval.class out of range"));
        }
        e.finish()?;

        Ok(Self {
            classes,
            render,
            tracking,
            net,
            train,
            augment,
            scenario,
            eval,
        })
    }

    /// Every key with its effective value; parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("classes", self.classes.to_string());
        kv("render.sigma", self.render.sigma.to_string());
        let uniform = self.tracking.sgr.classes.windows(2).all(|w| w[0] == w[1]);
        let first = self.tracking.sgr.classes[0];
        let enabled = self.tracking.sgr.classes.iter().all(|c| c.theta() > c.lambda());
        kv("sgr.enabled", enabled.to_string());
        if uniform {
            kv("sgr.theta", first.theta().to_string());
            if enabled {
                kv("sgr.lambda", first.lambda().to_string());
                kv("sgr.phi", first.phi().to_string());
            }
        } else {
            for (c, p) in self.tracking.sgr.classes.iter().enumerate() {
                kv(&format!("sgr.class{c}.theta"), p.theta().to_string());
                if enabled {
                    kv(&format!("sgr.class{c}.lambda"), p.lambda().to_string());
                    kv(&format!("sgr.class{c}.phi"), p.phi().to_string());
                }
            }
        }
        kv("assoc.kappa", self.tracking.assoc.kappa.to_string());
        kv("detect.window", self.tracking.window.to_string());
        kv("detect.feedback", self.tracking.feedback.to_string());
        kv("net.encoder_blocks", self.net.encoder_blocks.to_string());
        kv("net.base_channels", self.net.base_channels.to_string());
        kv("net.stages", self.net.stages.to_string());
        let t = &self.train;
        kv("train.learning_rate", t.learning_rate.to_string());
        kv("train.batch_size", t.batch_size.to_string());
        kv("train.max_epochs", t.max_epochs.to_string());
        kv("train.max_steps", t.max_steps.unwrap_or(0).to_string());
        kv("train.beta1", t.adam_betas.0.to_string());
        kv("train.beta2", t.adam_betas.1.to_string());
        kv("train.epsilon", t.adam_epsilon.to_string());
        kv("train.shuffle", t.shuffle.to_string());
        kv("train.seed", t.seed.to_string());
        kv("loss.center_weight", t.weights.center.to_string());
        kv("loss.motion_weight", t.weights.motion.to_string());
        kv("loss.subpixel_weight", t.weights.subpixel.to_string());
        kv("loss.focal_alpha", t.focal.alpha.to_string());
        kv("loss.focal_beta", t.focal.beta.to_string());
        let a = &self.augment;
        kv("augment.rcr_prob", a.rcr_prob.to_string());
        kv("augment.rcr_max_reduction", a.rcr_max_reduction.to_string());
        kv("augment.rcp_cluster_prob", a.rcp_cluster_prob.to_string());
        kv("augment.rcp_cluster_min", a.rcp_cluster_size.0.to_string());
        kv("augment.rcp_cluster_max", a.rcp_cluster_size.1.to_string());
        kv("augment.rcp_offset_radius", a.rcp_offset_radius.to_string());
        kv("augment.rcp_background_rate", a.rcp_background_rate.to_string());
        kv("augment.shift_radius", a.shift_radius.to_string());
        kv("augment.deletion_prob", a.deletion_prob.to_string());
        kv("augment.seed", a.seed.to_string());
        let sc = &self.scenario;
        kv("scenario.width", sc.width.to_string());
        kv("scenario.height", sc.height.to_string());
        kv("scenario.frames", sc.frame_count.to_string());
        kv("scenario.vehicles", sc.vehicle_count.to_string());
        kv("scenario.speed_min", sc.speed_range.0.to_string());
        kv("scenario.speed_max", sc.speed_range.1.to_string());
        kv("scenario.length_min", sc.vehicle_length_range.0.to_string());
        kv("scenario.length_max", sc.vehicle_length_range.1.to_string());
        kv("scenario.width_min", sc.vehicle_width_range.0.to_string());
        kv("scenario.width_max", sc.vehicle_width_range.1.to_string());
        kv("scenario.stop_prob", sc.stop_prob.to_string());
        kv("scenario.go_prob", sc.go_prob.to_string());
        kv("scenario.jitter_radius", sc.jitter_radius.to_string());
        kv("scenario.stripe_prob", sc.stripe_prob.to_string());
        kv("scenario.stripe_delta", sc.stripe_delta.to_string());
        kv("scenario.noise_sigma", sc.noise_sigma.to_string());
        kv("scenario.seed", sc.seed.to_string());
        let ev = &self.eval;
        kv("eval.gate", ev.gate.to_string());
        kv("eval.tight_gate", ev.tight_gate.to_string());
        kv(
            "eval.iou_thresholds",
            ev.iou_thresholds.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(","),
        );
        kv("eval.class", ev.class.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_default() {
        assert_eq!(PipelineConfig::parse("", "t").unwrap(), PipelineConfig::default());
        assert_eq!(
            PipelineConfig::parse("# only a comment\n\n", "t").unwrap(),
            PipelineConfig::default()
        );
    }

    #[test]
    fn overrides_and_per_class() {
        let c = PipelineConfig::parse(
            "sgr.theta = 0.4\nsgr.class1.lambda = 0.1 # looser\nnet.stages=2\nassoc.kappa=20\n",
            "t",
        )
        .unwrap();
        assert_eq!(c.tracking.sgr.classes[0].theta(), 0.4);
        assert_eq!(c.tracking.sgr.classes[0].lambda(), DEFAULT_LAMBDA);
        assert_eq!(c.tracking.sgr.classes[1].lambda(), 0.1);
        assert_eq!(c.net.stages, 2);
        assert_eq!(c.tracking.assoc.kappa, 20.0);
    }

    #[test]
    fn errors_carry_location() {
        for (text, needle) in [
            ("bogus = 1", "unknown key"),
            ("sgr.theta = abc", "cannot parse"),
            ("classes = 2\nclasses = 3", "duplicate"),
            ("just words", "key = value"),
            ("detect.window = 4", "odd"),
            ("sgr.theta = 0.2\nsgr.lambda = 0.3", "exceed"),
        ] {
            match PipelineConfig::parse(text, "cfg") {
                Err(Error::Config { location, message }) => {
                    assert!(location.starts_with("cfg:"), "{location}");
                    assert!(message.contains(needle), "{message} lacks {needle}");
                }
                other => panic!("{text:?}: expected config error, got {other:?}"),
            }
        }
    }

    #[test]
    fn disabled_sgr_is_threshold_only() {
        let c = PipelineConfig::parse("sgr.enabled = false", "t").unwrap();
        let p = c.tracking.sgr.classes[0];
        assert_eq!((p.lambda(), p.phi()), (p.theta(), 1.0));
    }

    #[test]
    fn text_round_trip() {
        let c = PipelineConfig::parse(
            "sgr.class1.theta = 0.5\ntrain.max_steps = 40\neval.iou_thresholds = 0.5, 0.7\n",
            "t",
        )
        .unwrap();
        assert_eq!(PipelineConfig::parse(&c.to_text(), "t").unwrap(), c);
        let d = PipelineConfig::default();
        assert_eq!(PipelineConfig::parse(&d.to_text(), "t").unwrap(), d);
    }
}
