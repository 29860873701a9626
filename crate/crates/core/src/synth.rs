//! Synthetic aerial-style sequences with ground truth.
//!
//! Small oriented vehicles drive across a textured background, stop and go,
//! despawn at the borders and respawn elsewhere. Each frame is shifted by a
//! global registration jitter, may carry an illumination stripe, and gets
//! sensor noise. Ground truth stays in unjittered coordinates.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::frame::GrayFrame;
use crate::grid::{Center, Point};
use crate::io::TruthRow;
use crate::net::{ObjectTarget, TrainingFrame, TrainingSet};

pub const MOVING: usize = 0;
pub const STATIONARY: usize = 1;
pub const CLASS_COUNT: usize = 2;

/// Spawned vehicles keep at least this distance from existing ones.
const SPAWN_SPACING: f64 = 16.0;
const SPAWN_ATTEMPTS: usize = 64;
const SUPERSAMPLE: usize = 4;
const NOISE_CELL: f64 = 16.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub vehicle_count: usize,
    /// Pixels per frame while moving.
    pub speed_range: (f64, f64),
    pub vehicle_length_range: (f64, f64),
    pub vehicle_width_range: (f64, f64),
    pub stop_prob: f64,
    pub go_prob: f64,
    pub jitter_radius: f64,
    pub stripe_prob: f64,
    pub stripe_delta: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            width: 96,
            height: 96,
            frame_count: 100,
            vehicle_count: 6,
            speed_range: (5.0, 20.0),
            vehicle_length_range: (10.0, 15.0),
            vehicle_width_range: (4.0, 6.0),
            stop_prob: 0.03,
            go_prob: 0.1,
            jitter_radius: 1.0,
            stripe_prob: 0.1,
            stripe_delta: 0.08,
            noise_sigma: 0.02,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("scene must be non-empty"));
        }
        let range = |name: &str, (lo, hi): (f64, f64), min: f64| {
            if !(lo >= min && hi >= lo && hi.is_finite()) {
                Err(Error::invalid(format!("{name} must satisfy {min} <= lo <= hi, got ({lo}, {hi})")))
            } else {
                Ok(())
            }
        };
        range("speed_range", self.speed_range, 0.0)?;
        range("vehicle_length_range", self.vehicle_length_range, f64::MIN_POSITIVE)?;
        range("vehicle_width_range", self.vehicle_width_range, f64::MIN_POSITIVE)?;
        for (name, p) in [
            ("stop_prob", self.stop_prob),
            ("go_prob", self.go_prob),
            ("stripe_prob", self.stripe_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        for (name, v) in [
            ("jitter_radius", self.jitter_radius),
            ("stripe_delta", self.stripe_delta),
            ("noise_sigma", self.noise_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruthRecord {
    pub frame: usize,
    pub position: Point,
    pub class: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthTrack {
    pub id: u64,
    /// One record per frame over a contiguous span.
    pub records: Vec<TruthRecord>,
}

impl GroundTruthTrack {
    pub fn first_frame(&self) -> usize {
        self.records[0].frame
    }

    pub fn last_frame(&self) -> usize {
        self.records[self.records.len() - 1].frame
    }

    pub fn at(&self, frame: usize) -> Option<&TruthRecord> {
        let first = self.first_frame();
        if frame < first {
            return None;
        }
        self.records.get(frame - first)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub width: usize,
    pub height: usize,
    pub frames: Vec<GrayFrame>,
    /// Sorted by id.
    pub tracks: Vec<GroundTruthTrack>,
}

/// A ground-truth object as seen in one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameObject {
    pub track_id: u64,
    pub class: usize,
    pub position: Point,
    /// Displacement back to the previous frame, when the track existed then.
    pub motion: Option<Point>,
}

impl Scene {
    pub fn objects_at(&self, frame: usize) -> Vec<FrameObject> {
        self.tracks
            .iter()
            .filter_map(|t| {
                let r = t.at(frame)?;
                let motion = frame
                    .checked_sub(1)
                    .and_then(|p| t.at(p))
                    .map(|prev| prev.position - r.position);
                Some(FrameObject {
                    track_id: t.id,
                    class: r.class,
                    position: r.position,
                    motion,
                })
            })
            .collect()
    }

    /// Truth in CSV row form, ordered by frame then track id.
    pub fn truth_rows(&self) -> Vec<TruthRow> {
        let mut rows: Vec<TruthRow> = self
            .tracks
            .iter()
            .flat_map(|t| {
                t.records.iter().map(move |r| TruthRow {
                    frame: r.frame,
                    track_id: t.id,
                    class: r.class,
                    x: r.position.x,
                    y: r.position.y,
                })
            })
            .collect();
        rows.sort_by_key(|r| (r.frame, r.track_id));
        rows
    }

    /// Rebuilds a scene from frames and truth rows, as written by
    /// [`Scene::truth_rows`]. Each track must cover a contiguous span.
    pub fn from_parts(frames: Vec<GrayFrame>, truth: &[TruthRow]) -> Result<Self> {
        let first = frames.first().ok_or_else(|| Error::invalid("scene has no frames"))?;
        let (width, height) = (first.width(), first.height());
        if frames.iter().any(|f| (f.width(), f.height()) != (width, height)) {
            return Err(Error::Shape("frames differ in size".into()));
        }
        let mut tracks: BTreeMap<u64, Vec<TruthRecord>> = BTreeMap::new();
        for r in truth {
            if r.frame >= frames.len() {
                return Err(Error::invalid(format!("truth row for frame {} beyond the last frame", r.frame)));
            }
            if r.class >= CLASS_COUNT {
                return Err(Error::invalid(format!("truth class {} out of range", r.class)));
            }
            let position = Point::new(r.x, r.y);
            if !(r.x >= 0.0 && r.y >= 0.0 && r.x < width as f64 && r.y < height as f64) {
                return Err(Error::invalid(format!("truth position ({}, {}) outside the frame", r.x, r.y)));
            }
            tracks.entry(r.track_id).or_default().push(TruthRecord {
                frame: r.frame,
                position,
                class: r.class,
            });
        }
        let mut out = Vec::with_capacity(tracks.len());
        for (id, mut records) in tracks {
            records.sort_by_key(|r| r.frame);
            if records.windows(2).any(|w| w[1].frame != w[0].frame + 1) {
                return Err(Error::invalid(format!("truth track {id} is not contiguous")));
            }
            out.push(GroundTruthTrack { id, records });
        }
        Ok(Self {
            width,
            height,
            frames,
            tracks: out,
        })
    }

    /// One training sample per frame. Frame 0 uses itself as the previous
    /// frame and has no previous centers, as at the start of tracking.
    pub fn training_frames(&self) -> Vec<TrainingFrame> {
        (0..self.frames.len())
            .map(|t| {
                let objects = self.objects_at(t);
                let (previous, previous_centers) = if t == 0 {
                    (self.frames[0].clone(), Vec::new())
                } else {
                    let prev = self
                        .objects_at(t - 1)
                        .into_iter()
                        .map(|o| Center::new(o.class, o.position.floor()))
                        .collect();
                    (self.frames[t - 1].clone(), prev)
                };
                TrainingFrame {
                    current: self.frames[t].clone(),
                    previous,
                    objects: objects
                        .iter()
                        .map(|o| ObjectTarget {
                            class: o.class,
                            position: o.position,
                            motion: o.motion,
                        })
                        .collect(),
                    previous_centers,
                }
            })
            .collect()
    }
}

/// Concatenates the training frames of several scenes.
pub fn training_set(scenes: &[Scene]) -> TrainingSet {
    TrainingSet {
        classes: CLASS_COUNT,
        frames: scenes.iter().flat_map(Scene::training_frames).collect(),
    }
}

#[derive(Clone, Debug)]
struct Vehicle {
    id: u64,
    position: Point,
    heading: Point,
    speed: f64,
    length: f64,
    width: f64,
    shade: f64,
    moving: bool,
}

struct Stripe {
    horizontal: bool,
    start: f64,
    width: f64,
    delta: f64,
}

struct Background {
    coarse: Vec<f64>,
    fine: Vec<f64>,
    cols: usize,
    rows: usize,
    roads: Vec<(Point, Point, f64)>,
}

impl Background {
    fn new<R: Rng + ?Sized>(width: usize, height: usize, rng: &mut R) -> Self {
        // Lattice spans the frame plus a margin, so jittered samples stay on it.
        let cols = (width as f64 / NOISE_CELL).ceil() as usize + 4;
        let rows = (height as f64 / NOISE_CELL).ceil() as usize + 4;
        let coarse = (0..cols * rows).map(|_| rng.random_range(0.35..0.65)).collect();
        let fine = (0..4 * cols * rows).map(|_| rng.random_range(-0.06..0.06)).collect();
        let road_count = rng.random_range(1..=2);
        let roads = (0..road_count)
            .map(|_| {
                let angle = rng.random_range(0.0..std::f64::consts::PI);
                let through = Point::new(
                    rng.random_range(0.0..width as f64),
                    rng.random_range(0.0..height as f64),
                );
                (through, Point::new(angle.cos(), angle.sin()), rng.random_range(5.0..9.0))
            })
            .collect();
        Self {
            coarse,
            fine,
            cols,
            rows,
            roads,
        }
    }

    fn value_noise(values: &[f64], cols: usize, rows: usize, x: f64, y: f64) -> f64 {
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let fx = x.floor();
        let fy = y.floor();
        let (tx, ty) = (smooth(x - fx), smooth(y - fy));
        let ix = (fx as isize).rem_euclid(cols as isize) as usize;
        let iy = (fy as isize).rem_euclid(rows as isize) as usize;
        let ix1 = (ix + 1) % cols;
        let iy1 = (iy + 1) % rows;
        let v = |i: usize, j: usize| values[j * cols + i];
        let top = v(ix, iy) * (1.0 - tx) + v(ix1, iy) * tx;
        let bottom = v(ix, iy1) * (1.0 - tx) + v(ix1, iy1) * tx;
        top * (1.0 - ty) + bottom * ty
    }

    fn sample(&self, x: f64, y: f64) -> f64 {
        let u = (x + 2.0 * NOISE_CELL) / NOISE_CELL;
        let v = (y + 2.0 * NOISE_CELL) / NOISE_CELL;
        let mut value = Self::value_noise(&self.coarse, self.cols, self.rows, u, v)
            + Self::value_noise(&self.fine, 2 * self.cols, 2 * self.rows, 2.0 * u, 2.0 * v);
        for (through, dir, width) in &self.roads {
            let d = Point::new(x, y) - *through;
            if (d.x * dir.y - d.y * dir.x).abs() < width / 2.0 {
                value -= 0.15;
            }
        }
        value
    }
}

fn spawn<R: Rng + ?Sized>(id: u64, cfg: &ScenarioConfig, others: &[Vehicle], moving: bool, rng: &mut R) -> Vehicle {
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let mut position = Point::new(rng.random_range(0.0..w), rng.random_range(0.0..h));
    for _ in 0..SPAWN_ATTEMPTS {
        if others.iter().all(|o| o.position.distance(position) >= SPAWN_SPACING) {
            break;
        }
        position = Point::new(rng.random_range(0.0..w), rng.random_range(0.0..h));
    }
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let uniform = |rng: &mut R, (lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..hi) } else { lo };
    let speed = uniform(rng, cfg.speed_range);
    let length = uniform(rng, cfg.vehicle_length_range);
    let width = uniform(rng, cfg.vehicle_width_range);
    let shade = if rng.random_bool(0.5) {
        rng.random_range(0.85..0.97)
    } else {
        rng.random_range(0.03..0.15)
    };
    Vehicle {
        id,
        position,
        heading: Point::new(angle.cos(), angle.sin()),
        speed,
        length,
        width,
        shade,
        moving,
    }
}

fn initial_moving<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> bool {
    let total = cfg.stop_prob + cfg.go_prob;
    if total == 0.0 {
        true
    } else {
        rng.random_bool(cfg.go_prob / total)
    }
}

/// Generates a scene from `config.seed`.
pub fn simulate(config: &ScenarioConfig) -> Result<Scene> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    simulate_with(config, &mut rng)
}

pub fn simulate_with<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<Scene> {
    config.validate()?;
    let background = Background::new(config.width, config.height, rng);
    let noise = Normal::new(0.0, config.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::invalid(format!("noise: {e}")))?;
    let mut next_id = 1u64;
    let mut vehicles: Vec<Vehicle> = Vec::with_capacity(config.vehicle_count);
    for _ in 0..config.vehicle_count {
        let moving = initial_moving(config, rng);
        let v = spawn(next_id, config, &vehicles, moving, rng);
        next_id += 1;
        vehicles.push(v);
    }
    let mut tracks: BTreeMap<u64, Vec<TruthRecord>> = BTreeMap::new();
    let mut frames = Vec::with_capacity(config.frame_count);
    let bounds = |p: Point| {
        p.x >= 0.0 && p.y >= 0.0 && p.x < config.width as f64 && p.y < config.height as f64
    };

    for t in 0..config.frame_count {
        let mut displaced = vec![false; vehicles.len()];
        if t > 0 {
            for i in 0..vehicles.len() {
                let v = &mut vehicles[i];
                if v.moving {
                    if config.stop_prob > 0.0 && rng.random_bool(config.stop_prob) {
                        v.moving = false;
                    }
                } else if config.go_prob > 0.0 && rng.random_bool(config.go_prob) {
                    v.moving = true;
                }
                let before = v.position;
                if v.moving {
                    v.position = v.position + Point::new(v.heading.x * v.speed, v.heading.y * v.speed);
                }
                if !bounds(v.position) {
                    let moving = initial_moving(config, rng);
                    let others: Vec<Vehicle> = vehicles
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, o)| o.clone())
                        .collect();
                    vehicles[i] = spawn(next_id, config, &others, moving, rng);
                    next_id += 1;
                    continue;
                }
                displaced[i] = before.distance(v.position) >= 1.0;
            }
        }
        for (i, v) in vehicles.iter().enumerate() {
            let continuing = tracks.get(&v.id).is_some_and(|r| !r.is_empty());
            let class = if continuing {
                if displaced[i] {
                    MOVING
                } else {
                    STATIONARY
                }
            } else if v.moving && v.speed >= 1.0 {
                MOVING
            } else {
                STATIONARY
            };
            tracks.entry(v.id).or_default().push(TruthRecord {
                frame: t,
                position: v.position,
                class,
            });
        }
        frames.push(render_frame(config, &background, &vehicles, &noise, rng)?);
    }

    Ok(Scene {
        width: config.width,
        height: config.height,
        frames,
        tracks: tracks
            .into_iter()
            .map(|(id, records)| GroundTruthTrack { id, records })
            .collect(),
    })
}

/// Fraction of the pixel `(px, py)` covered by the vehicle's rectangle.
fn coverage(v: &Vehicle, px: usize, py: usize) -> f64 {
    let n = SUPERSAMPLE;
    let mut inside = 0;
    for sy in 0..n {
        for sx in 0..n {
            let x = px as f64 + (sx as f64 + 0.5) / n as f64 - 0.5;
            let y = py as f64 + (sy as f64 + 0.5) / n as f64 - 0.5;
            let d = Point::new(x, y) - v.position;
            let along = d.x * v.heading.x + d.y * v.heading.y;
            let across = -d.x * v.heading.y + d.y * v.heading.x;
            if along.abs() <= v.length / 2.0 && across.abs() <= v.width / 2.0 {
                inside += 1;
            }
        }
    }
    inside as f64 / (n * n) as f64
}

fn render_frame<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    background: &Background,
    vehicles: &[Vehicle],
    noise: &Normal<f64>,
    rng: &mut R,
) -> Result<GrayFrame> {
    let (w, h) = (cfg.width, cfg.height);
    let jitter = if cfg.jitter_radius > 0.0 {
        let r = cfg.jitter_radius * rng.random::<f64>().sqrt();
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        Point::new(r * a.cos(), r * a.sin())
    } else {
        Point::new(0.0, 0.0)
    };
    let stripe = if cfg.stripe_prob > 0.0 && rng.random_bool(cfg.stripe_prob) {
        let horizontal = rng.random_bool(0.5);
        let extent = if horizontal { h } else { w } as f64;
        let delta = if rng.random_bool(0.5) { cfg.stripe_delta } else { -cfg.stripe_delta };
        Some(Stripe {
            horizontal,
            start: rng.random_range(0.0..extent),
            width: rng.random_range(8.0..24.0),
            delta,
        })
    } else {
        None
    };

    // World content at pixel p is sampled at p - jitter.
    let mut world = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            world[y * w + x] = background.sample(x as f64 - jitter.x, y as f64 - jitter.y);
        }
    }
    for v in vehicles {
        let shifted = Vehicle {
            position: v.position + jitter,
            ..v.clone()
        };
        let reach = (v.length.hypot(v.width) / 2.0).ceil() + 1.0;
        let x0 = (shifted.position.x - reach).floor().max(0.0) as usize;
        let y0 = (shifted.position.y - reach).floor().max(0.0) as usize;
        let x1 = ((shifted.position.x + reach).ceil().max(0.0) as usize).min(w - 1);
        let y1 = ((shifted.position.y + reach).ceil().max(0.0) as usize).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let c = coverage(&shifted, x, y);
                if c > 0.0 {
                    let p = &mut world[y * w + x];
                    *p = *p * (1.0 - c) + v.shade * c;
                }
            }
        }
    }
    let mut pixels = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut v = world[y * w + x];
            if let Some(s) = &stripe {
                let coord = if s.horizontal { y } else { x } as f64;
                if coord >= s.start && coord < s.start + s.width {
                    v += s.delta;
                }
            }
            if cfg.noise_sigma > 0.0 {
                v += noise.sample(rng);
            }
            pixels.push((v.clamp(0.0, 1.0) * 255.0).round() / 255.0);
        }
    }
    GrayFrame::new(w, h, pixels)
}
