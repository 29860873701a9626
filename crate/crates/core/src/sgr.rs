//! Selective Gaussian Reconstruction: the feedback filter applied to each
//! decoded frame before its peaks are re-rendered as the next frame's
//! feedback heat map.

use crate::error::{Error, Result};
use crate::grid::{render_weighted, CenterMap, GridGeometry, Peak, Point, RenderConfig, WeightedCenter};

pub const DEFAULT_THETA: f64 = 0.32;
pub const DEFAULT_LAMBDA: f64 = 0.28;
pub const DEFAULT_PHI: f64 = 1.2;

/// Per-class thresholds and amplification.
///
/// `theta` is the detection threshold, `lambda` the feedback threshold and
/// `phi` the amplification applied to detections at or above `theta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassParams {
    theta: f64,
    lambda: f64,
    phi: f64,
}

impl ClassParams {
    /// Requires `0 < lambda < theta <= 1`, `lambda < 1` and `phi >= 1`.
    pub fn new(theta: f64, lambda: f64, phi: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::invalid(format!("theta must be in (0, 1], got {theta}")));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::invalid(format!("lambda must be in (0, 1), got {lambda}")));
        }
        if !(phi >= 1.0 && phi.is_finite()) {
            return Err(Error::invalid(format!("phi must be >= 1, got {phi}")));
        }
        if theta <= lambda {
            return Err(Error::invalid(format!(
                "theta ({theta}) must exceed lambda ({lambda})"
            )));
        }
        Ok(Self { theta, lambda, phi })
    }

    /// Plain threshold-and-rerender: `lambda == theta`, `phi == 1`. The
    /// pass-through band is empty, so peaks below `theta` are dropped and the
    /// rest are re-rendered unchanged.
    pub fn threshold_only(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::invalid(format!("theta must be in (0, 1), got {theta}")));
        }
        Ok(Self {
            theta,
            lambda: theta,
            phi: 1.0,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }
}

impl Default for ClassParams {
    fn default() -> Self {
        Self {
            theta: DEFAULT_THETA,
            lambda: DEFAULT_LAMBDA,
            phi: DEFAULT_PHI,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SgrConfig {
    pub classes: Vec<ClassParams>,
    pub render: RenderConfig,
}

impl SgrConfig {
    pub fn uniform(classes: usize, params: ClassParams, render: RenderConfig) -> Self {
        Self {
            classes: vec![params; classes],
            render,
        }
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.classes.iter().map(|p| p.theta).collect()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.classes.iter().map(|p| p.lambda).collect()
    }
}

/// Filtered confidence of a single peak: dropped below `lambda`, passed
/// through below `theta`, amplified by `phi` (clamped to 1) otherwise.
pub fn sgr_confidence(w: f64, params: &ClassParams) -> f64 {
    if w < params.lambda {
        0.0
    } else if w < params.theta {
        w
    } else {
        (w * params.phi).min(1.0)
    }
}

/// Rebuilds the full multi-class feedback map from a frame's peaks.
pub fn sgr_filter(peaks: &[Peak], geometry: GridGeometry, config: &SgrConfig) -> Result<CenterMap> {
    if config.classes.len() != geometry.classes {
        return Err(Error::Shape(format!(
            "SGR has parameters for {} classes, grid has {}",
            config.classes.len(),
            geometry.classes
        )));
    }
    let mut survivors = Vec::with_capacity(peaks.len());
    for p in peaks {
        let params = config.classes.get(p.class).ok_or_else(|| {
            Error::invalid(format!("peak class {} out of range", p.class))
        })?;
        if !(0.0..=1.0).contains(&p.confidence) {
            return Err(Error::invalid(format!(
                "peak confidence {} outside [0, 1]",
                p.confidence
            )));
        }
        let amplitude = sgr_confidence(p.confidence, params);
        if amplitude > 0.0 {
            survivors.push(WeightedCenter {
                class: p.class,
                position: Point::new(p.x as f64, p.y as f64),
                amplitude,
            });
        }
    }
    render_weighted(&survivors, geometry, &config.render)
}
