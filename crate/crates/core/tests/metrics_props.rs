use heatrack::grid::Point;
use heatrack::metrics::{
    detection_map, match_detections, mean_ap, tracking_map, FrameSample, ScoredPoint, TrackPath,
};
use proptest::prelude::*;

fn points(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((0.0f64..40.0, 0.0f64..40.0), n)
        .prop_map(|v| v.into_iter().map(|(x, y)| Point::new(x, y)).collect())
}

fn scored(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<ScoredPoint>> {
    // A coarse confidence grid produces ties on purpose.
    prop::collection::vec((0.0f64..40.0, 0.0f64..40.0, 1u32..10), n)
        .prop_map(|v| v.into_iter().map(|(x, y, c)| ScoredPoint::new(x, y, c as f64 / 10.0)).collect())
}

fn frames() -> impl Strategy<Value = Vec<FrameSample>> {
    prop::collection::vec(
        (scored(0..8), points(0..6)).prop_map(|(detections, truth)| FrameSample { detections, truth }),
        1..5,
    )
}

fn shuffle<T>(v: &mut [T], mut s: u64) {
    for i in (1..v.len()).rev() {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        v.swap(i, (s >> 33) as usize % (i + 1));
    }
}

/// Reference AP: re-match from scratch at every distinct threshold, then
/// integrate recall steps under the running-maximum precision envelope.
fn oracle_ap(frames: &[FrameSample], gate: f64) -> f64 {
    let total: usize = frames.iter().map(|f| f.truth.len()).sum();
    let mut thresholds: Vec<f64> = frames.iter().flat_map(|f| f.detections.iter().map(|d| d.confidence)).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut curve = Vec::new();
    for &t in &thresholds {
        let (mut tp, mut n) = (0, 0);
        for f in frames {
            let kept: Vec<ScoredPoint> = f.detections.iter().copied().filter(|d| d.confidence >= t).collect();
            tp += match_detections(&kept, &f.truth, gate).unwrap().matches.len();
            n += kept.len();
        }
        let recall = if total == 0 { 0.0 } else { tp as f64 / total as f64 };
        curve.push((recall, tp as f64 / n as f64));
    }
    let mut ap = 0.0;
    let mut prev = 0.0;
    for i in 0..curve.len() {
        let (r, _) = curve[i];
        if r > prev {
            let env = curve[i..].iter().map(|c| c.1).fold(0.0, f64::max);
            ap += (r - prev) * env;
            prev = r;
        }
    }
    ap
}

proptest! {
    #[test]
    fn counts_partition_inputs(dets in scored(0..10), truth in points(0..8), gate in 1.0f64..15.0) {
        let m = match_detections(&dets, &truth, gate).unwrap();
        let c = m.counts();
        prop_assert_eq!(c.tp + c.fn_, truth.len());
        prop_assert_eq!(c.tp + c.fp, dets.len());
        for &(i, j) in &m.matches {
            prop_assert!(dets[i].position.distance(truth[j]) < gate);
        }
    }

    #[test]
    fn matching_ignores_detection_order(dets in scored(0..10), truth in points(0..8), seed in any::<u64>()) {
        let mut shuffled = dets.clone();
        shuffle(&mut shuffled, seed);
        let key = |ds: &[ScoredPoint], m: &heatrack::metrics::MatchResult| {
            let mut v: Vec<(u64, u64, u64, usize)> = m
                .matches
                .iter()
                .map(|&(i, j)| (ds[i].confidence.to_bits(), ds[i].position.x.to_bits(), ds[i].position.y.to_bits(), j))
                .collect();
            v.sort_unstable();
            v
        };
        let a = match_detections(&dets, &truth, 10.0).unwrap();
        let b = match_detections(&shuffled, &truth, 10.0).unwrap();
        prop_assert_eq!(a.counts(), b.counts());
        prop_assert_eq!(key(&dets, &a), key(&shuffled, &b));
    }

    #[test]
    fn tight_gate_never_scores_higher(fs in frames()) {
        let tight = detection_map(&fs, 5.0).unwrap();
        let loose = detection_map(&fs, 10.0).unwrap();
        prop_assert!(tight <= loose + 1e-12, "gate 5: {}, gate 10: {}", tight, loose);
    }

    #[test]
    fn average_precision_matches_rematching_oracle(fs in frames(), gate in 2.0f64..12.0) {
        let ap = detection_map(&fs, gate).unwrap();
        let want = oracle_ap(&fs, gate);
        prop_assert!((ap - want).abs() < 1e-12, "ap {} vs oracle {}", ap, want);
        prop_assert!((0.0..=1.0).contains(&ap));
    }

    #[test]
    fn overall_tracking_map_is_the_mean(
        paths in prop::collection::vec(prop::collection::btree_map(0usize..20, (0.0f64..30.0, 0.0f64..30.0), 1..10), 1..6),
        truths in prop::collection::vec(prop::collection::btree_map(0usize..20, (0.0f64..30.0, 0.0f64..30.0), 1..10), 1..6),
    ) {
        let to_paths = |v: &[std::collections::BTreeMap<usize, (f64, f64)>]| -> Vec<TrackPath> {
            v.iter()
                .enumerate()
                .map(|(i, m)| TrackPath { id: i as u64, points: m.iter().map(|(&f, &(x, y))| (f, Point::new(x, y))).collect() })
                .collect()
        };
        let pred = to_paths(&paths);
        let truth = to_paths(&truths);
        let s = tracking_map(&pred, &truth, 10.0, &[0.25, 0.5, 0.75]).unwrap();
        let aps: Vec<f64> = s.per_threshold.iter().map(|p| p.1).collect();
        prop_assert_eq!(s.overall, mean_ap(&aps));
        // Stricter IoU thresholds can only lose matches.
        prop_assert!(aps.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn truth_as_prediction_is_perfect(
        tracks in prop::collection::vec(prop::collection::btree_map(0usize..30, (0.0f64..30.0, 0.0f64..30.0), 1..12), 1..6),
    ) {
        // Gaps included: a vehicle that changes class leaves holes in its
        // per-class path.
        let truth: Vec<TrackPath> = tracks
            .iter()
            .enumerate()
            .map(|(i, m)| TrackPath { id: i as u64, points: m.iter().map(|(&f, &(x, y))| (f, Point::new(x, y))).collect() })
            .collect();
        let perfect = tracking_map(&truth, &truth, 10.0, &[0.25, 0.5, 0.75]).unwrap();
        prop_assert!(perfect.per_threshold.iter().all(|p| p.1 == 1.0), "{:?}", perfect);
    }
}
