//! Gaussian center heat maps: rendering object centers into per-class
//! confidence planes and decoding planes back into refined peaks.

use std::io::Write;
use std::ops::{Add, Sub};

use crate::error::{Error, Result};

/// Default Gaussian scale in pixels, matched to 10-15 px vehicles.
pub const DEFAULT_SIGMA: f64 = 2.0;

/// Gaussians are evaluated out to this many sigmas; beyond it the value is
/// below `exp(-8)` and treated as zero.
const SUPPORT_SIGMAS: f64 = 4.0;

/// A real-valued pixel position. Integer coordinates address pixel centers.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn floor(self) -> Point {
        Point::new(self.x.floor(), self.y.floor())
    }

    /// Fractional part, `p - floor(p)`, each component in `[0, 1)`.
    pub fn fract(self) -> Point {
        self - self.floor()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    pub classes: usize,
}

impl GridGeometry {
    pub fn new(width: usize, height: usize, classes: usize) -> Result<Self> {
        if width == 0 || height == 0 || classes == 0 {
            return Err(Error::invalid(format!(
                "grid geometry must be non-empty, got {width}x{height} with {classes} classes"
            )));
        }
        Ok(Self {
            width,
            height,
            classes,
        })
    }

    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    /// Whether a real position falls on a pixel of the grid, i.e. lies in
    /// `[0, width) x [0, height)`.
    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x < self.width as f64 && p.y < self.height as f64
    }

    pub fn check_class(&self, class: usize) -> Result<()> {
        if class >= self.classes {
            return Err(Error::invalid(format!(
                "class {class} out of range for {} classes",
                self.classes
            )));
        }
        Ok(())
    }
}

/// Per-class confidence grid. Storage is class-major, then row-major
/// (`class * W * H + y * W + x`), with every value in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterMap {
    geometry: GridGeometry,
    values: Vec<f64>,
}

impl CenterMap {
    pub fn zeros(geometry: GridGeometry) -> Self {
        Self {
            geometry,
            values: vec![0.0; geometry.classes * geometry.plane_len()],
        }
    }

    pub fn from_values(geometry: GridGeometry, values: Vec<f64>) -> Result<Self> {
        let expected = geometry.classes * geometry.plane_len();
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "center map needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!(
                "center map value {bad} outside [0, 1]"
            )));
        }
        Ok(Self { geometry, values })
    }

    pub fn geometry(&self) -> GridGeometry {
        self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn plane(&self, class: usize) -> &[f64] {
        let n = self.geometry.plane_len();
        &self.values[class * n..(class + 1) * n]
    }

    pub fn get(&self, class: usize, x: usize, y: usize) -> f64 {
        self.values[self.index(class, x, y)]
    }

    fn index(&self, class: usize, x: usize, y: usize) -> usize {
        class * self.geometry.plane_len() + y * self.geometry.width + x
    }

    /// Binary 8-bit graymap (P5) of one class plane, values scaled by 255
    /// and rounded. Lossy; intended for overlays and debugging.
    pub fn write_pgm<W: Write>(&self, class: usize, mut out: W) -> Result<()> {
        self.geometry.check_class(class)?;
        let GridGeometry { width, height, .. } = self.geometry;
        write!(out, "P5\n{width} {height}\n255\n")?;
        let bytes: Vec<u8> = self
            .plane(class)
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        out.write_all(&bytes)?;
        Ok(())
    }
}

/// Two-channel per-pixel vector field (axis 0 = x, axis 1 = y). Used for the
/// motion field (unconstrained, pixels per frame) and the subpixel field
/// (values in `[0, 1)`).
#[derive(Clone, Debug, PartialEq)]
pub struct VectorMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl VectorMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; 2 * width * height],
        }
    }

    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != 2 * width * height {
            return Err(Error::Shape(format!(
                "vector map {width}x{height} needs {} values, got {}",
                2 * width * height,
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> Point {
        let n = self.width * self.height;
        let i = y * self.width + x;
        Point::new(self.values[i], self.values[n + i])
    }

    pub fn set(&mut self, x: usize, y: usize, v: Point) {
        let n = self.width * self.height;
        let i = y * self.width + x;
        self.values[i] = v.x;
        self.values[n + i] = v.y;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderConfig {
    pub sigma: f64,
}

impl RenderConfig {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(Self { sigma })
    }
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            sigma: DEFAULT_SIGMA,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Center {
    pub class: usize,
    pub position: Point,
}

impl Center {
    pub const fn new(class: usize, position: Point) -> Self {
        Self { class, position }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedCenter {
    pub class: usize,
    pub position: Point,
    pub amplitude: f64,
}

/// A local maximum of a class plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub class: usize,
    pub x: usize,
    pub y: usize,
    pub confidence: f64,
}

/// A peak after subpixel refinement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefinedPeak {
    pub class: usize,
    pub position: Point,
    pub confidence: f64,
}

/// Renders unit-amplitude Gaussians, max-composed per class.
pub fn render_centers(
    centers: &[Center],
    geometry: GridGeometry,
    config: &RenderConfig,
) -> Result<CenterMap> {
    let weighted: Vec<WeightedCenter> = centers
        .iter()
        .map(|c| WeightedCenter {
            class: c.class,
            position: c.position,
            amplitude: 1.0,
        })
        .collect();
    render_weighted(&weighted, geometry, config)
}

/// Renders amplitude-scaled Gaussians, max-composed per class.
pub fn render_weighted(
    centers: &[WeightedCenter],
    geometry: GridGeometry,
    config: &RenderConfig,
) -> Result<CenterMap> {
    for c in centers {
        geometry.check_class(c.class)?;
        if !geometry.contains(c.position) {
            return Err(Error::invalid(format!(
                "center ({}, {}) outside {}x{} grid",
                c.position.x, c.position.y, geometry.width, geometry.height
            )));
        }
        if !(0.0..=1.0).contains(&c.amplitude) {
            return Err(Error::invalid(format!(
                "amplitude {} outside [0, 1]",
                c.amplitude
            )));
        }
    }

    let mut map = CenterMap::zeros(geometry);
    let radius = SUPPORT_SIGMAS * config.sigma;
    let radius_sq = radius * radius;
    let inv_two_sigma_sq = 1.0 / (2.0 * config.sigma * config.sigma);
    let plane_len = geometry.plane_len();

    for c in centers {
        if c.amplitude == 0.0 {
            continue;
        }
        let x0 = (c.position.x - radius).ceil().max(0.0) as usize;
        let x1 = ((c.position.x + radius).floor() as usize).min(geometry.width - 1);
        let y0 = (c.position.y - radius).ceil().max(0.0) as usize;
        let y1 = ((c.position.y + radius).floor() as usize).min(geometry.height - 1);
        let plane = &mut map.values[c.class * plane_len..(c.class + 1) * plane_len];
        for y in y0..=y1 {
            let dy = y as f64 - c.position.y;
            let row = &mut plane[y * geometry.width..(y + 1) * geometry.width];
            for (x, v) in row.iter_mut().enumerate().take(x1 + 1).skip(x0) {
                let dx = x as f64 - c.position.x;
                let d2 = dx * dx + dy * dy;
                if d2 > radius_sq {
                    continue;
                }
                let g = c.amplitude * (-d2 * inv_two_sigma_sq).exp();
                if g > *v {
                    *v = g;
                }
            }
        }
    }
    Ok(map)
}

/// Windowed non-maximum suppression followed by per-class thresholding.
///
/// A pixel is a peak when it is the maximum of the (border-clipped) window
/// centered on it under the order "higher value first, then smaller
/// row-major index", and its value reaches the class floor. On plateaus this
/// keeps exactly the first pixel in row-major order.
pub fn extract_peaks(map: &CenterMap, window: usize, floors: &[f64]) -> Result<Vec<Peak>> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::invalid(format!(
            "peak window must be odd and >= 1, got {window}"
        )));
    }
    let geometry = map.geometry();
    if floors.len() != geometry.classes {
        return Err(Error::Shape(format!(
            "{} floors given for {} classes",
            floors.len(),
            geometry.classes
        )));
    }
    let (w, h) = (geometry.width, geometry.height);
    let half = window / 2;
    let mut peaks = Vec::new();
    let mut row_best = vec![0usize; w * h];

    for (class, &floor) in floors.iter().enumerate() {
        let plane = map.plane(class);
        // Lexicographic order: larger value wins, ties go to the smaller index.
        let better = |a: usize, b: usize| -> usize {
            if plane[b] > plane[a] || (plane[b] == plane[a] && b < a) {
                b
            } else {
                a
            }
        };
        for y in 0..h {
            for x in 0..w {
                let lo = x.saturating_sub(half);
                let hi = (x + half).min(w - 1);
                let mut best = y * w + lo;
                for xx in lo + 1..=hi {
                    best = better(best, y * w + xx);
                }
                row_best[y * w + x] = best;
            }
        }
        for y in 0..h {
            let lo = y.saturating_sub(half);
            let hi = (y + half).min(h - 1);
            for x in 0..w {
                let i = y * w + x;
                if plane[i] < floor {
                    continue;
                }
                let mut best = row_best[lo * w + x];
                for yy in lo + 1..=hi {
                    best = better(best, row_best[yy * w + x]);
                }
                if best == i {
                    peaks.push(Peak {
                        class,
                        x,
                        y,
                        confidence: plane[i],
                    });
                }
            }
        }
    }
    Ok(peaks)
}

/// Adds the subpixel offset stored at each peak's pixel to its integer
/// position.
pub fn refine(peaks: &[Peak], subpixel: &VectorMap) -> Result<Vec<RefinedPeak>> {
    peaks
        .iter()
        .map(|p| {
            if p.x >= subpixel.width() || p.y >= subpixel.height() {
                return Err(Error::Shape(format!(
                    "peak ({}, {}) outside {}x{} subpixel map",
                    p.x,
                    p.y,
                    subpixel.width(),
                    subpixel.height()
                )));
            }
            let s = subpixel.get(p.x, p.y);
            Ok(RefinedPeak {
                class: p.class,
                position: Point::new(p.x as f64 + s.x, p.y as f64 + s.y),
                confidence: p.confidence,
            })
        })
        .collect()
}
