//! Training objectives with analytic gradients: penalty-reduced focal loss on
//! center maps, L1 on motion and subpixel vectors, and their weighted sum.

use crate::error::{Error, Result};
use crate::grid::{CenterMap, Point, VectorMap};

/// Predictions are clipped to `[EPS, 1 - EPS]` inside the logarithms.
pub const LOG_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FocalParams {
    pub alpha: f64,
    pub beta: f64,
}

impl FocalParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(beta >= 0.0) {
            return Err(Error::invalid(format!(
                "focal params need alpha > 0 and beta >= 0, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }
}

impl Default for FocalParams {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            beta: 4.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub center: f64,
    pub motion: f64,
    pub subpixel: f64,
}

impl LossWeights {
    pub fn new(center: f64, motion: f64, subpixel: f64) -> Result<Self> {
        let all = [center, motion, subpixel];
        if all.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || all.iter().all(|w| *w == 0.0) {
            return Err(Error::invalid(format!(
                "loss weights must be >= 0 and not all zero, got ({center}, {motion}, {subpixel})"
            )));
        }
        Ok(Self {
            center,
            motion,
            subpixel,
        })
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            center: 1.0,
            motion: 0.1,
            subpixel: 1.0,
        }
    }
}

/// Penalty-reduced focal loss and its gradient with respect to every
/// prediction value (same layout as the maps).
///
/// Pixels whose truth is exactly 1 are positives. The sum is normalized by
/// the object count, or by 1 when the frame has no objects.
pub fn focal_loss(
    truth: &CenterMap,
    pred: &CenterMap,
    n_objects: usize,
    params: &FocalParams,
) -> Result<(f64, Vec<f64>)> {
    if truth.geometry() != pred.geometry() {
        return Err(Error::Shape(format!(
            "truth {:?} vs prediction {:?}",
            truth.geometry(),
            pred.geometry()
        )));
    }
    let norm = 1.0 / n_objects.max(1) as f64;
    let FocalParams { alpha, beta } = *params;
    let mut grad = vec![0.0; pred.values().len()];
    let mut sum = 0.0;
    for ((&m, &n), g) in truth.values().iter().zip(pred.values()).zip(grad.iter_mut()) {
        let inside = n > LOG_EPS && n < 1.0 - LOG_EPS;
        let nc = n.clamp(LOG_EPS, 1.0 - LOG_EPS);
        let (f, df) = if m == 1.0 {
            let q = 1.0 - n;
            let ln = nc.ln();
            let f = q.powf(alpha) * ln;
            let mut df = -alpha * q.powf(alpha - 1.0) * ln;
            if inside {
                df += q.powf(alpha) / n;
            }
            (f, df)
        } else {
            let reduce = (1.0 - m).powf(beta);
            let ln = (1.0 - nc).ln();
            let f = reduce * n.powf(alpha) * ln;
            let mut df = alpha * n.powf(alpha - 1.0) * ln;
            if inside {
                df -= n.powf(alpha) / (1.0 - n);
            }
            (f, reduce * df)
        };
        sum += f;
        *g = -norm * df;
    }
    Ok((-norm * sum, grad))
}

/// One entry of a sparse gradient over a two-channel vector map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SparseGrad {
    pub x: usize,
    pub y: usize,
    pub grad: Point,
}

/// Mean absolute error between `truth[i]` and the prediction read at pixel
/// `at[i]`, summed over both components. The subgradient at zero is zero.
/// An empty object list contributes nothing.
pub fn l1_loss(
    truth: &[Point],
    pred: &VectorMap,
    at: &[(usize, usize)],
) -> Result<(f64, Vec<SparseGrad>)> {
    if truth.len() != at.len() {
        return Err(Error::Shape(format!(
            "{} truth vectors for {} positions",
            truth.len(),
            at.len()
        )));
    }
    if truth.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let norm = 1.0 / truth.len() as f64;
    let mut sum = 0.0;
    let mut grads = Vec::with_capacity(truth.len());
    for (&t, &(x, y)) in truth.iter().zip(at) {
        if x >= pred.width() || y >= pred.height() {
            return Err(Error::invalid(format!(
                "position ({x}, {y}) outside {}x{} map",
                pred.width(),
                pred.height()
            )));
        }
        let d = pred.get(x, y) - t;
        sum += d.x.abs() + d.y.abs();
        let sign = |v: f64| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 };
        grads.push(SparseGrad {
            x,
            y,
            grad: Point::new(norm * sign(d.x), norm * sign(d.y)),
        });
    }
    Ok((norm * sum, grads))
}

/// Scatters a sparse gradient into a dense two-channel buffer.
pub fn densify(grads: &[SparseGrad], width: usize, height: usize) -> Vec<f64> {
    let n = width * height;
    let mut dense = vec![0.0; 2 * n];
    for g in grads {
        let i = g.y * width + g.x;
        dense[i] += g.grad.x;
        dense[n + i] += g.grad.y;
    }
    dense
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HeadLosses {
    pub center: f64,
    pub motion: f64,
    pub subpixel: f64,
}

/// Dense gradients with respect to each head's output.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HeadGradients {
    pub center: Vec<f64>,
    pub motion: Vec<f64>,
    pub subpixel: Vec<f64>,
}

/// Weighted sum of the head losses, with each gradient scaled by its weight.
pub fn total_loss(
    losses: &HeadLosses,
    grads: &HeadGradients,
    weights: &LossWeights,
) -> (f64, HeadGradients) {
    let total = weights.center * losses.center
        + weights.motion * losses.motion
        + weights.subpixel * losses.subpixel;
    let scale = |g: &[f64], w: f64| g.iter().map(|v| v * w).collect::<Vec<_>>();
    (
        total,
        HeadGradients {
            center: scale(&grads.center, weights.center),
            motion: scale(&grads.motion, weights.motion),
            subpixel: scale(&grads.subpixel, weights.subpixel),
        },
    )
}
