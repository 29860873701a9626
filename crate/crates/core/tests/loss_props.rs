use heatrack::grid::{CenterMap, GridGeometry, Point, VectorMap};
use heatrack::loss::{densify, focal_loss, l1_loss, FocalParams};
use proptest::prelude::*;

/// Central-difference steps. The focal loss is smooth, so a larger step
/// keeps rounding error well under the tolerance on tiny gradients.
const FOCAL_STEP: f64 = 1e-5;
const L1_STEP: f64 = 1e-6;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Truth with exact positives mixed into soft negatives, and predictions
/// kept away from the log clip.
fn focal_case() -> impl Strategy<Value = (CenterMap, CenterMap, usize)> {
    let g = GridGeometry::new(8, 8, 2).unwrap();
    let n = g.plane_len() * 2;
    (
        prop::collection::vec(prop_oneof![1 => Just(1.0), 4 => 0.0f64..0.999], n),
        prop::collection::vec(0.01f64..0.99, n),
    )
        .prop_map(move |(t, p)| {
            let objects = t.iter().filter(|v| **v == 1.0).count();
            (
                CenterMap::from_values(g, t).unwrap(),
                CenterMap::from_values(g, p).unwrap(),
                objects,
            )
        })
}

fn with_value(map: &CenterMap, i: usize, v: f64) -> CenterMap {
    let mut vals = map.values().to_vec();
    vals[i] = v;
    CenterMap::from_values(map.geometry(), vals).unwrap()
}

proptest! {
    #[test]
    fn focal_gradient_matches_central_differences((truth, pred, n) in focal_case()) {
        let params = FocalParams::default();
        let (_, grad) = focal_loss(&truth, &pred, n, &params).unwrap();
        for i in 0..pred.values().len() {
            let v = pred.values()[i];
            let (up, _) = focal_loss(&truth, &with_value(&pred, i, v + FOCAL_STEP), n, &params).unwrap();
            let (dn, _) = focal_loss(&truth, &with_value(&pred, i, v - FOCAL_STEP), n, &params).unwrap();
            let fd = (up - dn) / (2.0 * FOCAL_STEP);
            prop_assert!(rel_err(grad[i], fd) < 1e-4, "pixel {}: analytic {} vs fd {}", i, grad[i], fd);
        }
    }

    #[test]
    fn focal_loss_is_nonnegative((truth, pred, n) in focal_case()) {
        let (l, _) = focal_loss(&truth, &pred, n, &FocalParams::default()).unwrap();
        prop_assert!(l >= 0.0);
    }

    /// Positives improve as the prediction rises toward 1, every other
    /// pixel as it falls toward 0.
    #[test]
    fn focal_loss_improves_toward_target((truth, pred, n) in focal_case(), i in 0usize..128, step in 0.001f64..0.5) {
        let params = FocalParams::default();
        let (base, _) = focal_loss(&truth, &pred, n, &params).unwrap();
        let v = pred.values()[i];
        let moved = if truth.values()[i] == 1.0 { (v + step).min(1.0) } else { (v - step).max(0.0) };
        let (after, _) = focal_loss(&truth, &with_value(&pred, i, moved), n, &params).unwrap();
        prop_assert!(after <= base, "{} -> {}", base, after);
    }

    #[test]
    fn l1_gradient_matches_central_differences(
        vals in prop::collection::vec(-5.0f64..5.0, 128),
        objs in prop::collection::vec((0usize..8, 0usize..8, -5.0f64..5.0, -5.0f64..5.0), 1..6),
    ) {
        let pred = VectorMap::from_values(8, 8, vals.clone()).unwrap();
        let truth: Vec<Point> = objs.iter().map(|o| Point::new(o.2, o.3)).collect();
        let at: Vec<(usize, usize)> = objs.iter().map(|o| (o.0, o.1)).collect();
        // Keep clear of the kink at every component.
        for (t, &(x, y)) in truth.iter().zip(&at) {
            let d = pred.get(x, y) - *t;
            prop_assume!(d.x.abs() > 1e-3 && d.y.abs() > 1e-3);
        }
        let (_, sparse) = l1_loss(&truth, &pred, &at).unwrap();
        let dense = densify(&sparse, 8, 8);
        for i in 0..vals.len() {
            let eval = |delta: f64| {
                let mut v = vals.clone();
                v[i] += delta;
                l1_loss(&truth, &VectorMap::from_values(8, 8, v).unwrap(), &at).unwrap().0
            };
            let fd = (eval(L1_STEP) - eval(-L1_STEP)) / (2.0 * L1_STEP);
            // Objects sharing a pixel can cancel exactly; the difference quotient
            // then only carries rounding noise.
            prop_assert!((dense[i] - fd).abs() <= 1e-4 * dense[i].abs().max(fd.abs()).max(1e-6) + 1e-9,
                "component {}: analytic {} vs fd {}", i, dense[i], fd);
        }
    }
}

#[test]
fn focal_value_at_half_confidence_positive() {
    let g = GridGeometry::new(1, 1, 1).unwrap();
    let t = CenterMap::from_values(g, vec![1.0]).unwrap();
    let p = CenterMap::from_values(g, vec![0.5]).unwrap();
    let (l, _) = focal_loss(&t, &p, 1, &FocalParams::default()).unwrap();
    assert!((l - 0.173287).abs() < 1e-6, "{l}");
}
