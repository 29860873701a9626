use heatrack::grid::{render_weighted, GridGeometry, Peak, Point, RenderConfig, WeightedCenter};
use heatrack::sgr::{sgr_confidence, sgr_filter, ClassParams, SgrConfig};
use proptest::prelude::*;

fn oracle(w: f64, theta: f64, lambda: f64, phi: f64) -> f64 {
    if w < lambda {
        0.0
    } else if w < theta {
        w
    } else {
        let a = phi * w;
        if a > 1.0 {
            1.0
        } else {
            a
        }
    }
}

fn params() -> impl Strategy<Value = ClassParams> {
    (0.01f64..0.98, 0.001f64..1.0, 1.0f64..5.0).prop_map(|(lambda, gap, phi)| {
        let theta = (lambda + gap * (1.0 - lambda)).max(lambda + 1e-3).min(1.0);
        ClassParams::new(theta, lambda, phi).unwrap()
    })
}

fn peaks(w: usize, h: usize) -> impl Strategy<Value = Vec<Peak>> {
    prop::collection::vec((0usize..2, 0..w, 0..h, 0.0f64..=1.0), 0..10).prop_map(|v| {
        v.into_iter()
            .map(|(class, x, y, confidence)| Peak { class, x, y, confidence })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]
    #[test]
    fn confidence_matches_piecewise_oracle(w in 0.0f64..=1.0, p in params()) {
        prop_assert_eq!(sgr_confidence(w, &p), oracle(w, p.theta(), p.lambda(), p.phi()));
    }
}

proptest! {
    #[test]
    fn pass_band_is_idempotent(p in params(), t in 0.0f64..1.0) {
        let w = p.lambda() + t * (p.theta() - p.lambda());
        prop_assume!(w >= p.lambda() && w < p.theta());
        let once = sgr_confidence(w, &p);
        prop_assert_eq!(sgr_confidence(once, &p), once);
    }

    #[test]
    fn confidence_is_monotone(p in params(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(sgr_confidence(lo, &p) <= sgr_confidence(hi, &p));
    }

    #[test]
    fn filtered_map_stays_in_unit_range(ps in peaks(20, 16), p in params()) {
        let g = GridGeometry::new(20, 16, 2).unwrap();
        let cfg = SgrConfig::uniform(2, p, RenderConfig::default());
        let m = sgr_filter(&ps, g, &cfg).unwrap();
        prop_assert!(m.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn threshold_only_is_plain_rerender(ps in peaks(20, 16), theta in 0.05f64..0.95) {
        let g = GridGeometry::new(20, 16, 2).unwrap();
        let render = RenderConfig::default();
        let cfg = SgrConfig::uniform(2, ClassParams::threshold_only(theta).unwrap(), render);
        let kept: Vec<WeightedCenter> = ps
            .iter()
            .filter(|p| p.confidence >= theta)
            .map(|p| WeightedCenter {
                class: p.class,
                position: Point::new(p.x as f64, p.y as f64),
                amplitude: p.confidence,
            })
            .collect();
        let want = render_weighted(&kept, g, &render).unwrap();
        prop_assert_eq!(sgr_filter(&ps, g, &cfg).unwrap(), want);
    }
}
