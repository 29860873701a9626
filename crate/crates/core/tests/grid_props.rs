use heatrack::grid::{extract_peaks, render_centers, Center, CenterMap, GridGeometry, Point, RenderConfig};
use proptest::prelude::*;

const WINDOW: usize = 15;

/// Centers at least `WINDOW + 1` apart and `WINDOW` from the border, built
/// by rejection from a candidate list.
fn spaced_centers(classes: usize) -> impl Strategy<Value = Vec<Center>> {
    prop::collection::vec((0..classes, 15.0f64..113.0, 15.0f64..81.0), 1..40).prop_map(|cands| {
        let mut kept: Vec<Center> = Vec::new();
        for (class, x, y) in cands {
            let p = Point::new(x, y);
            if kept.iter().all(|c| c.position.distance(p) >= (WINDOW + 1) as f64) {
                kept.push(Center::new(class, p));
            }
        }
        kept
    })
}

fn random_map() -> impl Strategy<Value = CenterMap> {
    (1usize..3, 1usize..14, 1usize..12).prop_flat_map(|(c, w, h)| {
        prop::collection::vec(prop_oneof![Just(0.0), Just(0.5), 0.0f64..=1.0], c * w * h)
            .prop_map(move |v| CenterMap::from_values(GridGeometry::new(w, h, c).unwrap(), v).unwrap())
    })
}

proptest! {
    #[test]
    fn render_then_extract_recovers_rounded_centers(centers in spaced_centers(2)) {
        let g = GridGeometry::new(128, 96, 2).unwrap();
        let map = render_centers(&centers, g, &RenderConfig::default()).unwrap();
        let peaks = extract_peaks(&map, WINDOW, &[0.1, 0.1]).unwrap();
        let mut got: Vec<(usize, usize, usize)> = peaks.iter().map(|p| (p.class, p.x, p.y)).collect();
        let mut want: Vec<(usize, usize, usize)> = centers
            .iter()
            .map(|c| (c.class, c.position.x.round() as usize, c.position.y.round() as usize))
            .collect();
        got.sort_unstable();
        want.sort_unstable();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn raising_a_floor_only_removes_peaks(
        map in random_map(),
        window in prop::sample::select(vec![1usize, 3, 5, 7]),
        lo in 0.0f64..1.0,
        bump in 0.0f64..0.5,
        raised in 0usize..2,
    ) {
        let c = map.geometry().classes;
        let low = vec![lo; c];
        let mut high = low.clone();
        high[raised % c] = (lo + bump).min(1.0);
        let a = extract_peaks(&map, window, &low).unwrap();
        let b = extract_peaks(&map, window, &high).unwrap();
        prop_assert!(b.len() <= a.len());
        for p in &b {
            prop_assert!(a.contains(p), "peak {:?} appeared after raising a floor", p);
        }
    }

    #[test]
    fn peaks_are_window_maxima(map in random_map(), window in prop::sample::select(vec![1usize, 3, 5])) {
        let g = map.geometry();
        let r = (window / 2) as isize;
        for p in extract_peaks(&map, window, &vec![0.0; g.classes]).unwrap() {
            for dy in -r..=r {
                for dx in -r..=r {
                    let (x, y) = (p.x as isize + dx, p.y as isize + dy);
                    if x < 0 || y < 0 || x >= g.width as isize || y >= g.height as isize {
                        continue;
                    }
                    let v = map.get(p.class, x as usize, y as usize);
                    prop_assert!(v <= p.confidence);
                    // Equal neighbors must come later in row-major order.
                    if v == p.confidence && (dx, dy) != (0, 0) {
                        prop_assert!((y, x) > (p.y as isize, p.x as isize));
                    }
                }
            }
        }
    }

    #[test]
    fn render_ignores_center_order(
        pts in prop::collection::vec((0usize..2, 0.0f64..40.0, 0.0f64..30.0), 0..12),
        seed in any::<u64>(),
    ) {
        let centers: Vec<Center> = pts.iter().map(|&(c, x, y)| Center::new(c, Point::new(x, y))).collect();
        let mut shuffled = centers.clone();
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        let g = GridGeometry::new(40, 30, 2).unwrap();
        let a = render_centers(&centers, g, &RenderConfig::default()).unwrap();
        let b = render_centers(&shuffled, g, &RenderConfig::default()).unwrap();
        prop_assert_eq!(a.values(), b.values());
        prop_assert!(a.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
