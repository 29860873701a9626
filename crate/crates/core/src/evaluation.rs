//! Scoring of CSV-level tracker output against truth rows.

use std::collections::BTreeMap;

use crate::config::EvalConfig;
use crate::error::Result;
use crate::grid::Point;
use crate::io::{DetectionRow, TrackRow, TruthRow};
use crate::metrics::{
    detection_counts, detection_map, prf1, tracking_map, FrameSample, MetricsReport, ScoredPoint, TrackPath,
};

/// Groups scored points and truth of one class by frame. Frames without
/// any entry still appear when they lie below the largest index seen.
pub fn frame_samples<I>(scored: I, truth: &[TruthRow], class: usize) -> Vec<FrameSample>
where
    I: IntoIterator<Item = (usize, usize, ScoredPoint)>,
{
    let mut frames: BTreeMap<usize, FrameSample> = BTreeMap::new();
    for (frame, c, p) in scored {
        if c == class {
            frames.entry(frame).or_default().detections.push(p);
        }
    }
    for t in truth.iter().filter(|t| t.class == class) {
        frames.entry(t.frame).or_default().truth.push(Point::new(t.x, t.y));
    }
    let n = frames.keys().next_back().map_or(0, |k| k + 1);
    (0..n).map(|f| frames.remove(&f).unwrap_or_default()).collect()
}

pub fn detection_points(rows: &[DetectionRow]) -> impl Iterator<Item = (usize, usize, ScoredPoint)> + '_ {
    rows.iter().map(|r| (r.frame, r.class, ScoredPoint::new(r.x, r.y, r.confidence)))
}

pub fn track_points(rows: &[TrackRow]) -> impl Iterator<Item = (usize, usize, ScoredPoint)> + '_ {
    rows.iter().map(|r| (r.frame, r.class, ScoredPoint::new(r.x, r.y, r.confidence)))
}

/// Per-id paths restricted to records of `class`.
pub fn predicted_paths(rows: &[TrackRow], class: usize) -> Vec<TrackPath> {
    let mut paths: BTreeMap<u64, TrackPath> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.class == class) {
        let p = paths.entry(r.id).or_insert_with(|| TrackPath {
            id: r.id,
            ..TrackPath::default()
        });
        p.points.insert(r.frame, Point::new(r.x, r.y));
    }
    paths.into_values().collect()
}

pub fn truth_paths(rows: &[TruthRow], class: usize) -> Vec<TrackPath> {
    let mut paths: BTreeMap<u64, TrackPath> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.class == class) {
        let p = paths.entry(r.track_id).or_insert_with(|| TrackPath {
            id: r.track_id,
            ..TrackPath::default()
        });
        p.points.insert(r.frame, Point::new(r.x, r.y));
    }
    paths.into_values().collect()
}

/// Precision, recall and F1 come from the tracked detections. Average
/// precision uses the full peak list when given, since it reaches below the
/// detection threshold, and the tracked detections otherwise.
pub fn evaluate_run(
    tracks: &[TrackRow],
    detections: Option<&[DetectionRow]>,
    truth: &[TruthRow],
    config: &EvalConfig,
) -> Result<MetricsReport> {
    let class = config.class;
    let tracked = frame_samples(track_points(tracks), truth, class);
    let ranked = match detections {
        Some(d) => frame_samples(detection_points(d), truth, class),
        None => tracked.clone(),
    };
    let counts = detection_counts(&tracked, config.gate)?;
    let (precision, recall, f1) = prf1(counts);
    let tracking = tracking_map(
        &predicted_paths(tracks, class),
        &truth_paths(truth, class),
        config.gate,
        &config.iou_thresholds,
    )?;
    Ok(MetricsReport {
        gate: config.gate,
        tight_gate: config.tight_gate,
        counts,
        precision,
        recall,
        f1,
        map: detection_map(&ranked, config.gate)?,
        map_tight: detection_map(&ranked, config.tight_gate)?,
        tracking: Some(tracking),
    })
}
