//! Reverse-mode gradients of the reference net against central finite
//! differences, plus the algebraic properties backward must satisfy.

use heatrack::frame::GrayFrame;
use heatrack::grid::{CenterMap, GridGeometry};
use heatrack::loss::HeadGradients;
use heatrack::net::{HeatmapNet, NetConfig, Parameters, PredictionMaps, PredictorInput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_input(w: usize, h: usize, classes: usize, rng: &mut ChaCha8Rng) -> PredictorInput {
    let mut frame = || GrayFrame::new(w, h, (0..w * h).map(|_| rng.random::<f64>()).collect()).unwrap();
    let cur = frame();
    let prev = frame();
    let fb = CenterMap::from_values(
        GridGeometry::new(w, h, classes).unwrap(),
        (0..classes * w * h).map(|_| rng.random::<f64>()).collect(),
    )
    .unwrap();
    PredictorInput::new(cur, prev, fb).unwrap()
}

fn random_upstream(w: usize, h: usize, classes: usize, rng: &mut ChaCha8Rng) -> HeadGradients {
    let mut v = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    HeadGradients {
        center: v(classes * w * h),
        motion: v(2 * w * h),
        subpixel: v(2 * w * h),
    }
}

fn dot(maps: &PredictionMaps, g: &HeadGradients) -> f64 {
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    d(maps.centers.values(), &g.center) + d(maps.motion.values(), &g.motion) + d(maps.subpixel.values(), &g.subpixel)
}

/// |a - b| relative to the larger magnitude, with a floor so that exact
/// zeros compare against absolute rounding noise.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn finite_difference_check(config: NetConfig, w: usize, h: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = HeatmapNet::new(config).unwrap();
    // Zero biases put pre-activations of all-zero patches exactly on the
    // ReLU kink; jitter them so the check runs at a differentiable point.
    let mut params = net.init_parameters(seed);
    for t in params.tensors.iter_mut().filter(|t| t.shape.len() == 1) {
        for v in &mut t.data {
            *v += rng.random_range(-0.1..0.1);
        }
    }
    let input = random_input(w, h, config.classes, &mut rng);
    let upstream = random_upstream(w, h, config.classes, &mut rng);
    let grads = net.backward(&params, &input, &upstream).unwrap();

    let step = 1e-5;
    let mut worst = (0.0, String::new());
    let mut probe = params.clone();
    for (ti, t) in params.tensors.iter().enumerate() {
        for j in 0..t.data.len() {
            let orig = t.data[j];
            probe.tensors[ti].data[j] = orig + step;
            let up = dot(&net.predict(&probe, &input).unwrap(), &upstream);
            probe.tensors[ti].data[j] = orig - step;
            let down = dot(&net.predict(&probe, &input).unwrap(), &upstream);
            probe.tensors[ti].data[j] = orig;
            let fd = (up - down) / (2.0 * step);
            let an = grads.tensors[ti].data[j];
            let e = rel_err(fd, an);
            if e > 1e-3 && std::env::var("FD_DEBUG").is_ok() {
                eprintln!("{}[{j}] an {an} fd {fd}", t.name);
            }
            if e > worst.0 {
                worst = (e, format!("{}[{j}]: analytic {an}, numeric {fd}", t.name));
            }
        }
    }
    assert!(worst.0 <= 1e-3, "worst relative error {} at {}", worst.0, worst.1);
}

#[test]
fn tiny_net_matches_finite_differences() {
    let config = NetConfig {
        encoder_blocks: 1,
        base_channels: 4,
        stages: 1,
        classes: 2,
    };
    finite_difference_check(config, 16, 16, 11);
}

#[test]
fn two_stage_net_matches_finite_differences() {
    let config = NetConfig {
        encoder_blocks: 2,
        base_channels: 2,
        stages: 2,
        classes: 1,
    };
    finite_difference_check(config, 8, 8, 12);
}

#[test]
fn zero_upstream_gives_zero_gradient() {
    let config = NetConfig {
        encoder_blocks: 2,
        base_channels: 4,
        stages: 1,
        classes: 2,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = HeatmapNet::new(config).unwrap();
    let params = net.init_parameters(3);
    let input = random_input(16, 16, 2, &mut rng);
    let n = 16 * 16;
    let zero = HeadGradients {
        center: vec![0.0; 2 * n],
        motion: vec![0.0; 2 * n],
        subpixel: vec![0.0; 2 * n],
    };
    let g = net.backward(&params, &input, &zero).unwrap();
    assert!(g.values().all(|v| v == 0.0));
}

#[test]
fn backward_is_linear_in_upstream() {
    let config = NetConfig {
        encoder_blocks: 2,
        base_channels: 4,
        stages: 2,
        classes: 2,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let net = HeatmapNet::new(config).unwrap();
    let params = net.init_parameters(4);
    let input = random_input(16, 16, 2, &mut rng);
    let g1 = random_upstream(16, 16, 2, &mut rng);
    let g2 = random_upstream(16, 16, 2, &mut rng);
    let sum = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
    let g12 = HeadGradients {
        center: sum(&g1.center, &g2.center),
        motion: sum(&g1.motion, &g2.motion),
        subpixel: sum(&g1.subpixel, &g2.subpixel),
    };
    let a = net.backward(&params, &input, &g1).unwrap();
    let b = net.backward(&params, &input, &g2).unwrap();
    let c = net.backward(&params, &input, &g12).unwrap();
    for ((x, y), z) in a.values().zip(b.values()).zip(c.values()) {
        assert!((x + y - z).abs() <= 1e-9 * (1.0 + z.abs()));
    }
}

#[test]
fn forward_is_deterministic() {
    let net = HeatmapNet::new(NetConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let input = random_input(32, 32, 2, &mut rng);
    let a = net.predict(&net.init_parameters(7), &input).unwrap();
    let b = net.predict(&net.init_parameters(7), &input).unwrap();
    assert_eq!(a, b);
    let c = net.predict(&net.init_parameters(8), &input).unwrap();
    assert_ne!(a, c);
}

fn perturbed(input: &PredictorInput, x: usize, y: usize) -> PredictorInput {
    let w = input.width();
    let mut px = input.current.pixels().to_vec();
    px[y * w + x] = 1.0 - px[y * w + x];
    PredictorInput::new(
        GrayFrame::new(w, input.height(), px).unwrap(),
        input.previous.clone(),
        input.feedback.clone(),
    )
    .unwrap()
}

#[test]
fn receptive_field_covers_sixteen_pixels() {
    // With two blocks an output pixel must react to input pixels at least
    // 8 px away along each axis, i.e. a 16x16 neighborhood or more.
    let net = HeatmapNet::new(NetConfig::default()).unwrap();
    let params = net.init_parameters(21);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let input = random_input(64, 64, 2, &mut rng);
    let base = net.predict(&params, &input).unwrap();
    let (cx, cy) = (32usize, 32usize);
    let reacts = |dx: isize, dy: isize| {
        let x = (cx as isize + dx) as usize;
        let y = (cy as isize + dy) as usize;
        let out = net.predict(&params, &perturbed(&input, x, y)).unwrap();
        (0..2).any(|c| out.centers.get(c, cx, cy) != base.centers.get(c, cx, cy))
            || out.motion.get(cx, cy) != base.motion.get(cx, cy)
    };
    for (dx, dy) in [(8, 0), (-8, 0), (0, 8), (0, -8), (8, 8), (-8, -8)] {
        assert!(reacts(dx, dy), "output at center ignores input offset ({dx}, {dy})");
    }
    // far outside any plausible receptive field
    let far = net.predict(&params, &perturbed(&input, 0, 63)).unwrap();
    assert_eq!(far.centers.get(0, 63, 0), base.centers.get(0, 63, 0));
}

#[test]
fn parameter_count_matches_shapes() {
    let net = HeatmapNet::new(NetConfig::default()).unwrap();
    let p: Parameters = net.init_parameters(0);
    let declared: usize = net.parameter_specs().iter().map(|(_, s)| s.iter().product::<usize>()).sum();
    assert_eq!(p.len(), declared);
}
