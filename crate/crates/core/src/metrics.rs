//! Detection and track scoring: gated one-to-one matching, precision,
//! recall, F1, all-point interpolated average precision, and track-level
//! average precision over temporal IoU thresholds.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::Point;

pub const DEFAULT_GATE: f64 = 10.0;
pub const TIGHT_GATE: f64 = 5.0;
pub const DEFAULT_IOU_THRESHOLDS: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredPoint {
    pub position: Point,
    pub confidence: f64,
}

impl ScoredPoint {
    pub fn new(x: f64, y: f64, confidence: f64) -> Self {
        Self {
            position: Point::new(x, y),
            confidence,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MatchResult {
    /// `(detection index, truth index)`, in processing order.
    pub matches: Vec<(usize, usize)>,
    pub false_positives: Vec<usize>,
    pub false_negatives: Vec<usize>,
}

impl MatchResult {
    pub fn counts(&self) -> Counts {
        Counts {
            tp: self.matches.len(),
            fp: self.false_positives.len(),
            fn_: self.false_negatives.len(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

fn check_gate(gate: f64) -> Result<()> {
    if gate > 0.0 && gate.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("gate must be > 0, got {gate}")))
    }
}

/// Descending confidence, then ascending position, then input index.
fn detection_order(dets: &[ScoredPoint]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        let (da, db) = (&dets[a], &dets[b]);
        db.confidence
            .total_cmp(&da.confidence)
            .then(da.position.x.total_cmp(&db.position.x))
            .then(da.position.y.total_cmp(&db.position.y))
            .then(a.cmp(&b))
    });
    order
}

/// Greedy one-to-one matching: detections in descending confidence each
/// claim the nearest unclaimed truth strictly closer than `gate`, ties going
/// to the smaller truth index.
pub fn match_detections(dets: &[ScoredPoint], truth: &[Point], gate: f64) -> Result<MatchResult> {
    check_gate(gate)?;
    let mut claimed = vec![false; truth.len()];
    let mut result = MatchResult::default();
    for i in detection_order(dets) {
        let p = dets[i].position;
        let mut best: Option<(f64, usize)> = None;
        for (j, t) in truth.iter().enumerate() {
            if claimed[j] {
                continue;
            }
            let d = p.distance(*t);
            if d < gate && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, j));
            }
        }
        match best {
            Some((_, j)) => {
                claimed[j] = true;
                result.matches.push((i, j));
            }
            None => result.false_positives.push(i),
        }
    }
    result.false_negatives = (0..truth.len()).filter(|&j| !claimed[j]).collect();
    Ok(result)
}

/// Precision, recall and F1; any empty denominator yields 0.
pub fn prf1(counts: Counts) -> (f64, f64, f64) {
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let p = ratio(counts.tp, counts.tp + counts.fp);
    let r = ratio(counts.tp, counts.tp + counts.fn_);
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

/// Precision-recall points of a confidence sweep, one per distinct
/// confidence, in order of decreasing threshold.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

impl PrCurve {
    /// Builds the sweep from `(confidence, is_true_positive)` outcomes.
    pub fn from_outcomes(outcomes: &[(f64, bool)], total_truth: usize) -> Self {
        let mut sorted = outcomes.to_vec();
        sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut points = Vec::new();
        let (mut tp, mut seen) = (0usize, 0usize);
        let mut i = 0;
        while i < sorted.len() {
            let threshold = sorted[i].0;
            while i < sorted.len() && sorted[i].0 == threshold {
                tp += sorted[i].1 as usize;
                seen += 1;
                i += 1;
            }
            points.push(PrPoint {
                threshold,
                recall: if total_truth == 0 { 0.0 } else { tp as f64 / total_truth as f64 },
                precision: tp as f64 / seen as f64,
            });
        }
        Self { points }
    }

    /// All-point interpolated area: each recall step is weighted by the best
    /// precision reached at that recall or beyond.
    pub fn average_precision(&self) -> f64 {
        let mut ap = 0.0;
        let mut prev_recall = 0.0;
        for (k, pt) in self.points.iter().enumerate() {
            if pt.recall > prev_recall {
                let envelope = self.points[k..]
                    .iter()
                    .map(|q| q.precision)
                    .fold(0.0, f64::max);
                ap += (pt.recall - prev_recall) * envelope;
                prev_recall = pt.recall;
            }
        }
        ap
    }
}

/// Detections and truth of one frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameSample {
    pub detections: Vec<ScoredPoint>,
    pub truth: Vec<Point>,
}

/// P-R sweep over every distinct confidence across all frames.
///
/// Greedy matching in descending confidence never lets a lower-confidence
/// detection change a higher one's outcome, so one matching pass per frame
/// gives the outcome at every threshold.
pub fn detection_pr_curve(frames: &[FrameSample], gate: f64) -> Result<PrCurve> {
    check_gate(gate)?;
    let mut outcomes = Vec::new();
    let mut total_truth = 0;
    for f in frames {
        let m = match_detections(&f.detections, &f.truth, gate)?;
        total_truth += f.truth.len();
        outcomes.extend(m.matches.iter().map(|&(i, _)| (f.detections[i].confidence, true)));
        outcomes.extend(m.false_positives.iter().map(|&i| (f.detections[i].confidence, false)));
    }
    Ok(PrCurve::from_outcomes(&outcomes, total_truth))
}

pub fn detection_map(frames: &[FrameSample], gate: f64) -> Result<f64> {
    Ok(detection_pr_curve(frames, gate)?.average_precision())
}

pub fn detection_counts(frames: &[FrameSample], gate: f64) -> Result<Counts> {
    let mut c = Counts::default();
    for f in frames {
        c += match_detections(&f.detections, &f.truth, gate)?.counts();
    }
    Ok(c)
}

/// A track as a set of per-frame positions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrackPath {
    pub id: u64,
    pub points: BTreeMap<usize, Point>,
}

impl TrackPath {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Frames where both tracks are within `gate`, over the number of frames in
/// which either track exists. For gap-free tracks the denominator is the
/// union of the two spans, and disjoint spans add their lengths.
pub fn track_iou(a: &TrackPath, b: &TrackPath, gate: f64) -> f64 {
    let shared = a.points.keys().filter(|f| b.points.contains_key(f)).count();
    let union = a.len() + b.len() - shared;
    if union == 0 {
        return 0.0;
    }
    let matched = a
        .points
        .iter()
        .filter(|(f, p)| b.points.get(f).is_some_and(|q| p.distance(*q) < gate))
        .count();
    matched as f64 / union as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackingScore {
    /// `(iou threshold, average precision)` pairs.
    pub per_threshold: Vec<(f64, f64)>,
    /// Mean of the per-threshold values.
    pub overall: f64,
}

pub fn mean_ap(aps: &[f64]) -> f64 {
    if aps.is_empty() {
        0.0
    } else {
        aps.iter().sum::<f64>() / aps.len() as f64
    }
}

/// Track-level average precision. Track confidence is its length; longer
/// tracks claim first, each taking the unclaimed truth track of highest IoU
/// (ties to the smaller index). A claim at or above the IoU threshold is a
/// true positive; otherwise the prediction is a false positive and claims
/// nothing.
pub fn tracking_map(
    pred: &[TrackPath],
    truth: &[TrackPath],
    gate: f64,
    iou_thresholds: &[f64],
) -> Result<TrackingScore> {
    check_gate(gate)?;
    if let Some(t) = iou_thresholds.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
        return Err(Error::invalid(format!("IoU threshold {t} outside (0, 1]")));
    }
    let mut order: Vec<usize> = (0..pred.len()).collect();
    order.sort_by(|&a, &b| pred[b].len().cmp(&pred[a].len()).then(pred[a].id.cmp(&pred[b].id)).then(a.cmp(&b)));
    let iou: Vec<Vec<f64>> = pred
        .iter()
        .map(|p| truth.iter().map(|t| track_iou(p, t, gate)).collect())
        .collect();
    let mut per_threshold = Vec::with_capacity(iou_thresholds.len());
    for &thr in iou_thresholds {
        let mut claimed = vec![false; truth.len()];
        let mut outcomes = Vec::with_capacity(pred.len());
        for &i in &order {
            let mut best: Option<(f64, usize)> = None;
            for (j, &v) in iou[i].iter().enumerate() {
                if !claimed[j] && best.is_none_or(|(bv, _)| v.partial_cmp(&bv) == Some(Ordering::Greater)) {
                    best = Some((v, j));
                }
            }
            let hit = match best {
                Some((v, j)) if v >= thr => {
                    claimed[j] = true;
                    true
                }
                _ => false,
            };
            outcomes.push((pred[i].len() as f64, hit));
        }
        let ap = PrCurve::from_outcomes(&outcomes, truth.len()).average_precision();
        per_threshold.push((thr, ap));
    }
    let overall = mean_ap(&per_threshold.iter().map(|(_, ap)| *ap).collect::<Vec<_>>());
    Ok(TrackingScore {
        per_threshold,
        overall,
    })
}

/// Everything `eval` reports.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub gate: f64,
    pub tight_gate: f64,
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub map: f64,
    pub map_tight: f64,
    pub tracking: Option<TrackingScore>,
}

impl MetricsReport {
    /// `key=value` lines; tracking values are in percent.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "true_positives={}", self.counts.tp);
        let _ = writeln!(s, "false_positives={}", self.counts.fp);
        let _ = writeln!(s, "false_negatives={}", self.counts.fn_);
        let _ = writeln!(s, "precision={:.6}", self.precision);
        let _ = writeln!(s, "recall={:.6}", self.recall);
        let _ = writeln!(s, "f1={:.6}", self.f1);
        let _ = writeln!(s, "map_d{}={:.6}", self.gate, self.map);
        let _ = writeln!(s, "map_d{}={:.6}", self.tight_gate, self.map_tight);
        if let Some(t) = &self.tracking {
            for (thr, ap) in &t.per_threshold {
                let _ = writeln!(s, "track_ap_iou{:.2}={:.2}", thr, 100.0 * ap);
            }
            let _ = writeln!(s, "track_map={:.2}", 100.0 * t.overall);
        }
        s
    }
}

/// Scores per-frame detections at both gates, plus tracks when given.
pub fn evaluate(
    frames: &[FrameSample],
    tracks: Option<(&[TrackPath], &[TrackPath])>,
    gate: f64,
    tight_gate: f64,
    iou_thresholds: &[f64],
) -> Result<MetricsReport> {
    let counts = detection_counts(frames, gate)?;
    let (precision, recall, f1) = prf1(counts);
    let tracking = match tracks {
        Some((pred, truth)) => Some(tracking_map(pred, truth, gate, iou_thresholds)?),
        None => None,
    };
    Ok(MetricsReport {
        gate,
        tight_gate,
        counts,
        precision,
        recall,
        f1,
        map: detection_map(frames, gate)?,
        map_tight: detection_map(frames, tight_gate)?,
        tracking,
    })
}
