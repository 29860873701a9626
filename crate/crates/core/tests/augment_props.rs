use heatrack::augment::{build_feedback, rcp, rcr, AugmentConfig, Origin};
use heatrack::grid::{render_centers, Center, GridGeometry, Point, RenderConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn centers(w: f64, h: f64) -> impl Strategy<Value = Vec<Center>> {
    prop::collection::vec((0usize..2, 0.0..w, 0.0..h), 0..8)
        .prop_map(|v| v.into_iter().map(|(c, x, y)| Center::new(c, Point::new(x, y))).collect())
}

/// Standard error of a Bernoulli(p) mean over n trials.
fn std_err(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

proptest! {
    #[test]
    fn identity_feedback_is_the_truth_render(cs in centers(32.0, 24.0), seed in any::<u64>()) {
        let g = GridGeometry::new(32, 24, 2).unwrap();
        let render = RenderConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = build_feedback(&cs, g, &render, &AugmentConfig::identity(), &mut rng).unwrap();
        prop_assert_eq!(s.map, render_centers(&cs, g, &render).unwrap());
    }

    #[test]
    fn feedback_is_seeded_and_bounded(cs in centers(32.0, 24.0), seed in any::<u64>()) {
        let g = GridGeometry::new(32, 24, 2).unwrap();
        let render = RenderConfig::default();
        let cfg = AugmentConfig::default();
        let a = build_feedback(&cs, g, &render, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = build_feedback(&cs, g, &render, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(a.map.values().iter().all(|v| (0.0..=1.0).contains(v)));
        for p in &a.provenance {
            prop_assert!((0.0..=1.0).contains(&p.confidence));
        }
        prop_assert_eq!(a, b);
    }

    #[test]
    fn rcr_stays_in_range(w in 0.0f64..=1.0, seed in any::<u64>()) {
        let cfg = AugmentConfig::default();
        let out = rcr(w, &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        // Either untouched, or reduced by at most the maximum and floored.
        if out != w {
            prop_assert!(out >= 0.05);
            prop_assert!(out <= w.max(0.05));
            prop_assert!(out >= w - cfg.rcr_max_reduction);
        }
    }

    #[test]
    fn cluster_members_stay_near_their_center(cs in centers(64.0, 64.0), seed in any::<u64>()) {
        let g = GridGeometry::new(64, 64, 2).unwrap();
        let cfg = AugmentConfig { rcp_cluster_prob: 1.0, rcp_background_rate: 0.0, ..AugmentConfig::default() };
        let out = rcp(&cs, g, &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        for f in &out {
            prop_assert_eq!(f.origin, Origin::RcpCluster);
            prop_assert!(g.contains(f.center.position));
            prop_assert!((0.05..0.5).contains(&f.confidence));
            prop_assert!(cs.iter().any(|c| c.class == f.center.class && c.position.distance(f.center.position) <= cfg.rcp_offset_radius));
        }
    }
}

#[test]
fn rcr_reduction_rate() {
    let cfg = AugmentConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 100_000;
    let reduced = (0..n).filter(|_| rcr(1.0, &cfg, &mut rng) < 1.0).count();
    let rate = reduced as f64 / n as f64;
    assert!((rate - 0.7).abs() <= 0.01, "reduced fraction {rate}");
    assert!((rate - 0.7).abs() <= 3.0 * std_err(0.7, n), "reduced fraction {rate}");
}

#[test]
fn rcr_mean_reduction() {
    // Subtracting U(0, 0.8) from 1 leaves 0.6 on average when reduced.
    let cfg = AugmentConfig { rcr_prob: 1.0, ..AugmentConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 100_000;
    let mean = (0..n).map(|_| rcr(1.0, &cfg, &mut rng)).sum::<f64>() / n as f64;
    let se = (0.8f64 * 0.8 / 12.0 / n as f64).sqrt();
    assert!((mean - 0.6).abs() <= 3.0 * se, "mean {mean}");
}

#[test]
fn stray_count_rate() {
    let g = GridGeometry::new(96, 96, 2).unwrap();
    let cfg = AugmentConfig { rcp_cluster_prob: 0.0, rcp_background_rate: 2.0, ..AugmentConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let frames = 10_000;
    let total: usize = (0..frames).map(|_| rcp(&[], g, &cfg, &mut rng).len()).sum();
    let mean = total as f64 / frames as f64;
    assert!((mean - 2.0).abs() <= 0.05, "mean strays {mean}");
    // Poisson variance equals its mean.
    assert!((mean - 2.0).abs() <= 3.0 * (2.0 / frames as f64).sqrt(), "mean strays {mean}");
}

#[test]
fn cluster_frequency() {
    let g = GridGeometry::new(96, 96, 1).unwrap();
    let cfg = AugmentConfig {
        rcp_background_rate: 0.0,
        rcp_offset_radius: 0.0,
        ..AugmentConfig::default()
    };
    let center = [Center::new(0, Point::new(48.0, 48.0))];
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let n = 100_000;
    let mut with_cluster = 0;
    let mut members = 0;
    for _ in 0..n {
        let k = rcp(&center, g, &cfg, &mut rng).len();
        with_cluster += (k > 0) as usize;
        members += k;
    }
    let rate = with_cluster as f64 / n as f64;
    assert!((rate - 0.1).abs() <= 3.0 * std_err(0.1, n), "cluster rate {rate}");
    // Sizes are uniform over 1..=4.
    let mean_size = members as f64 / with_cluster as f64;
    let se = (1.25f64 / with_cluster as f64).sqrt();
    assert!((mean_size - 2.5).abs() <= 3.0 * se, "mean cluster size {mean_size}");
}

#[test]
fn full_deletion_without_rcp_is_empty() {
    let g = GridGeometry::new(32, 32, 2).unwrap();
    let cfg = AugmentConfig { deletion_prob: 1.0, ..AugmentConfig::default().without_rcr_rcp() };
    let cs = [Center::new(0, Point::new(5.0, 5.0)), Center::new(1, Point::new(20.0, 9.0))];
    let s = build_feedback(&cs, g, &RenderConfig::default(), &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert!(s.map.values().iter().all(|v| *v == 0.0));
}
