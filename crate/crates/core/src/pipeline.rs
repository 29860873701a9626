//! The frame loop: predict, decode peaks, associate, and filter the decoded
//! map back into the next frame's feedback input.

use crate::assoc::{associate, AssocConfig, Detection, TrackId, TrackSet, TrackState};
use crate::error::{Error, Result};
use crate::frame::GrayFrame;
use crate::grid::{extract_peaks, refine, CenterMap, GridGeometry, Point};
use crate::io::{DetectionRow, TrackRow};
use crate::net::{PredictionMaps, Predictor, PredictorInput};
use crate::sgr::{sgr_filter, SgrConfig};

pub const DEFAULT_WINDOW: usize = 15;

#[derive(Clone, Debug, PartialEq)]
pub struct TrackingConfig {
    pub sgr: SgrConfig,
    pub assoc: AssocConfig,
    /// Odd side length of the peak-extraction window.
    pub window: usize,
    /// When false every frame receives an all-zero feedback map.
    pub feedback: bool,
}

impl TrackingConfig {
    pub fn new(sgr: SgrConfig, assoc: AssocConfig, window: usize) -> Result<Self> {
        let c = Self {
            sgr,
            assoc,
            window,
            feedback: true,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window % 2 == 0 {
            return Err(Error::invalid(format!("window must be odd, got {}", self.window)));
        }
        Ok(())
    }
}

/// A decoded peak, before the detection threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FramePeak {
    pub class: usize,
    pub position: Point,
    pub confidence: f64,
    pub motion: Point,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackPoint {
    pub id: TrackId,
    pub class: usize,
    pub position: Point,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameOutput {
    pub frame: usize,
    /// Every peak at or above its class feedback threshold.
    pub peaks: Vec<FramePeak>,
    /// Objects detected in this frame, by id.
    pub tracks: Vec<TrackPoint>,
    /// Feedback map handed to the next frame.
    pub feedback: CenterMap,
}

/// Sequential tracking state for one video. `P` may be an owned predictor
/// or a reference to one.
pub struct TrackingSession<P: Predictor> {
    predictor: P,
    config: TrackingConfig,
    previous: Option<GrayFrame>,
    feedback: Option<CenterMap>,
    tracks: TrackSet,
    frame: usize,
}

impl<P: Predictor> TrackingSession<P> {
    pub fn new(predictor: P, config: TrackingConfig) -> Result<Self> {
        config.validate()?;
        if config.sgr.classes.len() != predictor.classes() {
            return Err(Error::config(
                "sgr",
                format!(
                    "thresholds for {} classes, predictor has {}",
                    config.sgr.classes.len(),
                    predictor.classes()
                ),
            ));
        }
        Ok(Self {
            predictor,
            config,
            previous: None,
            feedback: None,
            tracks: TrackSet::new(),
            frame: 0,
        })
    }

    pub fn frame(&self) -> usize {
        self.frame
    }

    pub fn tracks(&self) -> &TrackSet {
        &self.tracks
    }

    pub fn config(&self) -> &TrackingConfig {
        &self.config
    }

    /// Processes the next frame. The first frame is paired with itself and
    /// an all-zero feedback map.
    pub fn step(&mut self, current: GrayFrame) -> Result<FrameOutput> {
        let geometry = GridGeometry::new(current.width(), current.height(), self.predictor.classes())?;
        let previous = match self.previous.take() {
            Some(p) => {
                if (p.width(), p.height()) != (current.width(), current.height()) {
                    return Err(Error::Shape(format!(
                        "frame {} is {}x{}, previous was {}x{}",
                        self.frame,
                        current.width(),
                        current.height(),
                        p.width(),
                        p.height()
                    )));
                }
                p
            }
            None => current.clone(),
        };
        let feedback = match self.feedback.take() {
            Some(f) if self.config.feedback => f,
            _ => CenterMap::zeros(geometry),
        };
        let input = PredictorInput::new(current.clone(), previous, feedback)?;
        let maps = self.predictor.predict(&input)?;
        if maps.centers.geometry() != geometry {
            return Err(Error::Shape("predictor returned maps of the wrong size".into()));
        }
        let out = self.decode(&maps, geometry)?;
        self.previous = Some(current);
        self.feedback = Some(out.feedback.clone());
        self.frame += 1;
        Ok(out)
    }

    fn decode(&mut self, maps: &PredictionMaps, geometry: GridGeometry) -> Result<FrameOutput> {
        let peaks = extract_peaks(&maps.centers, self.config.window, &self.config.sgr.lambdas())?;
        let refined = refine(&peaks, &maps.subpixel)?;
        let thetas = self.config.sgr.thetas();
        let mut frame_peaks = Vec::with_capacity(peaks.len());
        let mut detections = Vec::new();
        for (p, r) in peaks.iter().zip(&refined) {
            let motion = maps.motion.get(p.x, p.y);
            frame_peaks.push(FramePeak {
                class: p.class,
                position: r.position,
                confidence: p.confidence,
                motion,
            });
            if p.confidence >= thetas[p.class] {
                detections.push(Detection {
                    class: p.class,
                    center: r.position,
                    confidence: p.confidence,
                    motion,
                    subpixel: maps.subpixel.get(p.x, p.y),
                });
            }
        }
        let tracks = associate(&detections, &self.tracks, self.frame, &self.config.assoc)?;
        let points = tracks
            .objects()
            .filter(|o| o.state == TrackState::Active && o.last_seen == self.frame)
            .map(|o| TrackPoint {
                id: o.id,
                class: o.detection.class,
                position: o.detection.center,
                confidence: o.detection.confidence,
            })
            .collect();
        self.tracks = tracks;
        let feedback = sgr_filter(&peaks, geometry, &self.config.sgr)?;
        Ok(FrameOutput {
            frame: self.frame,
            peaks: frame_peaks,
            tracks: points,
            feedback,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrackingRun {
    pub detections: Vec<DetectionRow>,
    pub tracks: Vec<TrackRow>,
}

impl TrackingRun {
    pub fn push(&mut self, out: &FrameOutput) {
        self.detections.extend(out.peaks.iter().map(|p| DetectionRow {
            frame: out.frame,
            class: p.class,
            x: p.position.x,
            y: p.position.y,
            confidence: p.confidence,
            vx: p.motion.x,
            vy: p.motion.y,
        }));
        self.tracks.extend(out.tracks.iter().map(|t| TrackRow {
            frame: out.frame,
            id: t.id,
            class: t.class,
            x: t.position.x,
            y: t.position.y,
            confidence: t.confidence,
        }));
    }
}

/// Runs the full loop over a frame sequence of at least two frames.
pub fn run_tracking<P, I>(frames: I, predictor: &P, config: &TrackingConfig) -> Result<TrackingRun>
where
    P: Predictor + ?Sized,
    I: IntoIterator<Item = Result<GrayFrame>>,
{
    let mut session = TrackingSession::new(predictor, config.clone())?;
    let mut run = TrackingRun::default();
    for frame in frames {
        let out = session.step(frame?)?;
        run.push(&out);
    }
    if session.frame() < 2 {
        return Err(Error::invalid(format!(
            "tracking needs at least two frames, got {}",
            session.frame()
        )));
    }
    Ok(run)
}
