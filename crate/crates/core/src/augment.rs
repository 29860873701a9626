//! Simulated feedback heat maps for training.
//!
//! At inference the previous frame's center map arrives filtered and
//! re-rendered with imperfect confidences, occasional misses and spurious
//! peaks. Training builds the same kind of map from previous-frame ground
//! truth: random deletion and shift, randomized confidence reduction (RCR),
//! and randomized center propagation (RCP) of false centers.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::grid::{render_weighted, Center, CenterMap, GridGeometry, Point, RenderConfig, WeightedCenter};

/// Reduced confidences never fall below this floor.
pub const RCR_FLOOR: f64 = 0.05;
/// Confidence range of injected false centers.
pub const FALSE_CONFIDENCE: (f64, f64) = (0.05, 0.5);

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentConfig {
    pub rcr_prob: f64,
    pub rcr_max_reduction: f64,
    pub rcp_cluster_prob: f64,
    /// Inclusive range of false centers per cluster.
    pub rcp_cluster_size: (usize, usize),
    pub rcp_offset_radius: f64,
    /// Expected number of stray false centers per frame.
    pub rcp_background_rate: f64,
    pub shift_radius: f64,
    pub deletion_prob: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            rcr_prob: 0.7,
            rcr_max_reduction: 0.8,
            rcp_cluster_prob: 0.1,
            rcp_cluster_size: (1, 4),
            rcp_offset_radius: 10.0,
            rcp_background_rate: 1.0,
            shift_radius: 1.0,
            deletion_prob: 0.05,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    /// Every augmentation off: the feedback is the exact ground-truth map.
    pub fn identity() -> Self {
        Self {
            rcr_prob: 0.0,
            rcp_cluster_prob: 0.0,
            rcp_background_rate: 0.0,
            shift_radius: 0.0,
            deletion_prob: 0.0,
            ..Self::default()
        }
    }

    /// Shift and deletion only, with RCR and RCP switched off.
    pub fn without_rcr_rcp(&self) -> Self {
        Self {
            rcr_prob: 0.0,
            rcp_cluster_prob: 0.0,
            rcp_background_rate: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("rcr_prob", self.rcr_prob),
            ("rcp_cluster_prob", self.rcp_cluster_prob),
            ("deletion_prob", self.deletion_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if !(0.0..1.0).contains(&self.rcr_max_reduction) {
            return Err(Error::invalid(format!(
                "rcr_max_reduction must be in [0, 1), got {}",
                self.rcr_max_reduction
            )));
        }
        for (name, r) in [
            ("rcp_offset_radius", self.rcp_offset_radius),
            ("shift_radius", self.shift_radius),
            ("rcp_background_rate", self.rcp_background_rate),
        ] {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::invalid(format!("{name} must be >= 0, got {r}")));
            }
        }
        let (lo, hi) = self.rcp_cluster_size;
        if lo > hi {
            return Err(Error::invalid(format!("rcp_cluster_size range {lo}..={hi} is empty")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Truth,
    RcpCluster,
    RcpBackground,
}

/// How one rendered center came about.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Provenance {
    pub class: usize,
    pub position: Point,
    pub origin: Origin,
    pub base_confidence: f64,
    pub reduction: f64,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackSample {
    pub map: CenterMap,
    pub provenance: Vec<Provenance>,
}

/// Randomized confidence reduction: with probability `rcr_prob` subtracts
/// `U(0, rcr_max_reduction)`, flooring at [`RCR_FLOOR`].
pub fn rcr<R: Rng + ?Sized>(confidence: f64, config: &AugmentConfig, rng: &mut R) -> f64 {
    if config.rcr_prob > 0.0 && rng.random_bool(config.rcr_prob) {
        let reduction = if config.rcr_max_reduction > 0.0 {
            rng.random_range(0.0..config.rcr_max_reduction)
        } else {
            0.0
        };
        (confidence - reduction).max(RCR_FLOOR)
    } else {
        confidence
    }
}

fn offset_in_disc<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Point {
    if radius <= 0.0 {
        return Point::default();
    }
    let r = radius * rng.random::<f64>().sqrt();
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    Point::new(r * a.cos(), r * a.sin())
}

fn false_confidence<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(FALSE_CONFIDENCE.0..FALSE_CONFIDENCE.1)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FalseCenter {
    pub center: Center,
    pub confidence: f64,
    pub origin: Origin,
}

/// Randomized center propagation: clusters of false centers around true
/// ones plus Poisson-distributed strays anywhere on the grid. Cluster
/// members landing outside the grid are dropped.
pub fn rcp<R: Rng + ?Sized>(
    true_centers: &[Center],
    geometry: GridGeometry,
    config: &AugmentConfig,
    rng: &mut R,
) -> Vec<FalseCenter> {
    let mut out = Vec::new();
    if config.rcp_cluster_prob > 0.0 {
        let (lo, hi) = config.rcp_cluster_size;
        for c in true_centers {
            if !rng.random_bool(config.rcp_cluster_prob) {
                continue;
            }
            let k = rng.random_range(lo..=hi);
            for _ in 0..k {
                let p = c.position + offset_in_disc(config.rcp_offset_radius, rng);
                let w = false_confidence(rng);
                if geometry.contains(p) {
                    out.push(FalseCenter {
                        center: Center::new(c.class, p),
                        confidence: w,
                        origin: Origin::RcpCluster,
                    });
                }
            }
        }
    }
    if config.rcp_background_rate > 0.0 {
        let count = Poisson::new(config.rcp_background_rate)
            .map(|d| d.sample(rng) as usize)
            .unwrap_or(0);
        for _ in 0..count {
            let class = rng.random_range(0..geometry.classes);
            let p = Point::new(
                rng.random_range(0.0..geometry.width as f64),
                rng.random_range(0.0..geometry.height as f64),
            );
            out.push(FalseCenter {
                center: Center::new(class, p),
                confidence: false_confidence(rng),
                origin: Origin::RcpBackground,
            });
        }
    }
    out
}

fn clamp_into(p: Point, geometry: GridGeometry) -> Point {
    let max_x = (geometry.width as f64).next_down();
    let max_y = (geometry.height as f64).next_down();
    Point::new(p.x.clamp(0.0, max_x), p.y.clamp(0.0, max_y))
}

/// Builds a simulated feedback map from previous-frame ground truth:
/// deletion, shift, unit confidence with RCR, RCP false centers, render.
pub fn build_feedback<R: Rng + ?Sized>(
    prev_truth: &[Center],
    geometry: GridGeometry,
    render: &RenderConfig,
    config: &AugmentConfig,
    rng: &mut R,
) -> Result<FeedbackSample> {
    let mut provenance = Vec::with_capacity(prev_truth.len());
    for c in prev_truth {
        if config.deletion_prob > 0.0 && rng.random_bool(config.deletion_prob) {
            continue;
        }
        let shifted = if config.shift_radius > 0.0 {
            clamp_into(c.position + offset_in_disc(config.shift_radius, rng), geometry)
        } else {
            c.position
        };
        let confidence = rcr(1.0, config, rng);
        provenance.push(Provenance {
            class: c.class,
            position: shifted,
            origin: Origin::Truth,
            base_confidence: 1.0,
            reduction: 1.0 - confidence,
            confidence,
        });
    }
    for f in rcp(prev_truth, geometry, config, rng) {
        provenance.push(Provenance {
            class: f.center.class,
            position: f.center.position,
            origin: f.origin,
            base_confidence: f.confidence,
            reduction: 0.0,
            confidence: f.confidence,
        });
    }
    let weighted: Vec<WeightedCenter> = provenance
        .iter()
        .map(|p| WeightedCenter {
            class: p.class,
            position: p.position,
            amplitude: p.confidence,
        })
        .collect();
    let map = render_weighted(&weighted, geometry, render)?;
    Ok(FeedbackSample { map, provenance })
}
