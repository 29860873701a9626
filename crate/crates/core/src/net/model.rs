use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::{
    concat, conv_backward, conv_forward, relu_backward, relu_inplace, sigmoid, split, upsample2,
    upsample2_backward, ConvShape, Tensor,
};
use super::{NamedTensor, NetConfig, Parameters, PredictionMaps, PredictorInput};
use crate::error::{Error, Result};
use crate::grid::{CenterMap, GridGeometry, VectorMap};
use crate::loss::HeadGradients;

/// Initial bias of the centers head: `sigmoid(-2.19) ~ 0.1`.
pub const CENTER_BIAS_INIT: f64 = -2.19;

#[derive(Clone, Copy, Debug)]
struct Conv {
    shape: ConvShape,
    weight: usize,
    bias: usize,
}

#[derive(Clone, Debug)]
struct EncoderLayout {
    /// Per block: a same-resolution conv, then a stride-2 conv.
    blocks: Vec<(Conv, Conv)>,
    bottleneck: Conv,
}

#[derive(Clone, Debug)]
struct DecoderLevel {
    /// Applied to the upsampled coarser features.
    up: Conv,
    /// Applied to `[up features, skip sum]`.
    merge: Conv,
}

#[derive(Clone, Debug)]
struct StageLayout {
    encoders: Vec<EncoderLayout>,
    fuse: Conv,
    /// Indexed by resolution level.
    decoder: Vec<DecoderLevel>,
}

#[derive(Clone, Debug)]
struct Head {
    hidden: Conv,
    out: Conv,
}

#[derive(Default)]
struct Builder {
    specs: Vec<(String, Vec<usize>)>,
}

impl Builder {
    fn conv(&mut self, name: &str, cin: usize, cout: usize, kernel: usize, stride: usize) -> Conv {
        let weight = self.specs.len();
        self.specs.push((format!("{name}.weight"), vec![cout, cin, kernel, kernel]));
        self.specs.push((format!("{name}.bias"), vec![cout]));
        Conv {
            shape: ConvShape {
                cin,
                cout,
                kernel,
                stride,
            },
            weight,
            bias: weight + 1,
        }
    }

    fn encoder(&mut self, prefix: &str, cin: usize, cfg: &NetConfig) -> EncoderLayout {
        let mut blocks = Vec::with_capacity(cfg.encoder_blocks);
        let mut c = cin;
        for b in 0..cfg.encoder_blocks {
            let ch = cfg.channels(b);
            let same = self.conv(&format!("{prefix}.block{b}.conv"), c, ch, 3, 1);
            let down = self.conv(&format!("{prefix}.block{b}.down"), ch, ch, 3, 2);
            blocks.push((same, down));
            c = ch;
        }
        let bottleneck = self.conv(
            &format!("{prefix}.bottleneck"),
            c,
            cfg.channels(cfg.encoder_blocks),
            3,
            1,
        );
        EncoderLayout { blocks, bottleneck }
    }

    fn stage(&mut self, prefix: &str, inputs: &[(&str, usize)], cfg: &NetConfig) -> StageLayout {
        let encoders = inputs
            .iter()
            .map(|(name, cin)| self.encoder(&format!("{prefix}.enc_{name}"), *cin, cfg))
            .collect();
        let top = cfg.channels(cfg.encoder_blocks);
        let fuse = self.conv(&format!("{prefix}.fuse"), top, top, 3, 1);
        let mut decoder = Vec::with_capacity(cfg.encoder_blocks);
        for b in 0..cfg.encoder_blocks {
            let ch = cfg.channels(b);
            let up = self.conv(&format!("{prefix}.dec{b}.up"), cfg.channels(b + 1), ch, 3, 1);
            let merge = self.conv(&format!("{prefix}.dec{b}.merge"), 2 * ch, ch, 3, 1);
            decoder.push(DecoderLevel { up, merge });
        }
        StageLayout {
            encoders,
            fuse,
            decoder,
        }
    }

    fn head(&mut self, name: &str, cin: usize, cout: usize) -> Head {
        Head {
            hidden: self.conv(&format!("head_{name}.hidden"), cin, cin, 3, 1),
            out: self.conv(&format!("head_{name}.out"), cin, cout, 1, 1),
        }
    }
}

/// Reference hourglass topology for a [`NetConfig`].
///
/// Three encoders (current frame, previous frame, feedback) are fused by
/// summation at the bottleneck. Each decoder level upsamples, convolves, and
/// merges with the summed same-level encoder activations. An optional second
/// stage re-encodes the first stage's output and adds the first stage's
/// decoder activations into its own skips. Three heads read the final
/// full-resolution features.
#[derive(Clone, Debug)]
pub struct HeatmapNet {
    config: NetConfig,
    specs: Vec<(String, Vec<usize>)>,
    stages: Vec<StageLayout>,
    centers: Head,
    motion: Head,
    subpixel: Head,
}

struct EncoderTape {
    input: Tensor,
    /// Same-resolution block outputs, summed into the skips.
    skips: Vec<Tensor>,
    /// Stride-2 block outputs.
    downs: Vec<Tensor>,
    bottleneck: Tensor,
}

impl EncoderTape {
    fn block_input(&self, b: usize) -> &Tensor {
        if b == 0 {
            &self.input
        } else {
            &self.downs[b - 1]
        }
    }
}

struct DecoderTape {
    upsampled: Tensor,
    hidden: Tensor,
    merged: Tensor,
    out: Tensor,
}

struct StageTape {
    encoders: Vec<EncoderTape>,
    fuse_in: Tensor,
    fused: Tensor,
    decoder: Vec<DecoderTape>,
}

impl StageTape {
    fn output(&self) -> &Tensor {
        &self.decoder[0].out
    }
}

struct HeadTape {
    hidden: Tensor,
    out: Tensor,
}

/// Activations recorded by a forward pass, consumed by the backward pass.
pub struct ForwardPass {
    stages: Vec<StageTape>,
    heads: [HeadTape; 3],
    maps: PredictionMaps,
}

impl ForwardPass {
    pub fn maps(&self) -> &PredictionMaps {
        &self.maps
    }
}

impl HeatmapNet {
    pub fn new(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let mut b = Builder::default();
        let mut stages = vec![b.stage(
            "stage1",
            &[("current", 1), ("previous", 1), ("feedback", config.classes)],
            &config,
        )];
        if config.stages == 2 {
            stages.push(b.stage("stage2", &[("refine", config.channels(0))], &config));
        }
        let ch = config.channels(0);
        let centers = b.head("centers", ch, config.classes);
        let motion = b.head("motion", ch, 2);
        let subpixel = b.head("subpixel", ch, 2);
        Ok(Self {
            config,
            specs: b.specs,
            stages,
            centers,
            motion,
            subpixel,
        })
    }

    pub fn config(&self) -> NetConfig {
        self.config
    }

    /// Parameter names and shapes in declaration order.
    pub fn parameter_specs(&self) -> &[(String, Vec<usize>)] {
        &self.specs
    }

    /// Uniform fan-in scaled weights, zero biases, and the centers-head bias
    /// set to [`CENTER_BIAS_INIT`].
    pub fn init_parameters(&self, seed: u64) -> Parameters {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers_bias = self.centers.out.bias;
        let tensors = self
            .specs
            .iter()
            .enumerate()
            .map(|(i, (name, shape))| {
                let n: usize = shape.iter().product();
                let data = if shape.len() == 4 {
                    let fan_in = (shape[1] * shape[2] * shape[3]) as f64;
                    let bound = (6.0 / fan_in).sqrt();
                    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
                } else if i == centers_bias {
                    vec![CENTER_BIAS_INIT; n]
                } else {
                    vec![0.0; n]
                };
                NamedTensor {
                    name: name.clone(),
                    shape: shape.clone(),
                    data,
                }
            })
            .collect();
        Parameters {
            config: self.config,
            tensors,
        }
    }

    pub fn zero_parameters(&self) -> Parameters {
        Parameters {
            config: self.config,
            tensors: self
                .specs
                .iter()
                .map(|(name, shape)| NamedTensor {
                    name: name.clone(),
                    shape: shape.clone(),
                    data: vec![0.0; shape.iter().product()],
                })
                .collect(),
        }
    }

    pub fn check_parameters(&self, params: &Parameters) -> Result<()> {
        if params.config != self.config {
            return Err(Error::Shape(format!(
                "parameters are for {:?}, net is {:?}",
                params.config, self.config
            )));
        }
        if params.tensors.len() != self.specs.len() {
            return Err(Error::Shape(format!(
                "{} parameter tensors, net declares {}",
                params.tensors.len(),
                self.specs.len()
            )));
        }
        for (t, (name, shape)) in params.tensors.iter().zip(&self.specs) {
            if &t.name != name || &t.shape != shape || t.data.len() != shape.iter().product::<usize>() {
                return Err(Error::Shape(format!(
                    "parameter {} {:?} does not match expected {} {:?}",
                    t.name, t.shape, name, shape
                )));
            }
        }
        Ok(())
    }

    fn check_input(&self, input: &PredictorInput) -> Result<()> {
        let m = self.config.size_multiple();
        let g = input.feedback.geometry();
        if g.classes != self.config.classes {
            return Err(Error::Shape(format!(
                "feedback has {} classes, net expects {}",
                g.classes, self.config.classes
            )));
        }
        for f in [&input.current, &input.previous] {
            if (f.width(), f.height()) != (g.width, g.height) {
                return Err(Error::Shape("frames and feedback differ in size".into()));
            }
        }
        if g.width % m != 0 || g.height % m != 0 {
            return Err(Error::Shape(format!(
                "input {}x{} is not divisible by {m}",
                g.width, g.height
            )));
        }
        Ok(())
    }

    pub fn predict(&self, params: &Parameters, input: &PredictorInput) -> Result<PredictionMaps> {
        Ok(self.forward(params, input)?.maps)
    }

    /// Forward pass that keeps the activations needed by [`Self::backward`].
    pub fn forward(&self, params: &Parameters, input: &PredictorInput) -> Result<ForwardPass> {
        self.check_parameters(params)?;
        self.check_input(input)?;
        let (w, h) = (input.width(), input.height());
        let frame = |f: &crate::frame::GrayFrame| Tensor::from_vec(1, h, w, f.pixels().to_vec());
        let inputs = vec![
            frame(&input.current),
            frame(&input.previous),
            Tensor::from_vec(self.config.classes, h, w, input.feedback.values().to_vec()),
        ];
        let p = &params.tensors;
        let mut stages: Vec<StageTape> = Vec::with_capacity(self.stages.len());
        let first = self.stage_forward(p, &self.stages[0], inputs, None);
        stages.push(first);
        for layout in &self.stages[1..] {
            let prev = stages.last().expect("first stage");
            let next = self.stage_forward(p, layout, vec![prev.output().clone()], Some(prev));
            stages.push(next);
        }
        let features = stages.last().expect("stage").output();
        let mut heads = [
            head_forward(p, &self.centers, features),
            head_forward(p, &self.motion, features),
            head_forward(p, &self.subpixel, features),
        ];
        for v in &mut heads[0].out.data {
            *v = sigmoid(*v);
        }
        for v in &mut heads[2].out.data {
            *v = sigmoid(*v);
        }
        let geometry = GridGeometry::new(w, h, self.config.classes)?;
        let maps = PredictionMaps {
            centers: CenterMap::from_values(geometry, heads[0].out.data.clone())
                .map_err(|e| Error::invalid(format!("centers head produced invalid values: {e}")))?,
            motion: VectorMap::from_values(w, h, heads[1].out.data.clone())?,
            subpixel: VectorMap::from_values(w, h, heads[2].out.data.clone())?,
        };
        Ok(ForwardPass {
            stages,
            heads,
            maps,
        })
    }

    fn stage_forward(
        &self,
        p: &[NamedTensor],
        layout: &StageLayout,
        inputs: Vec<Tensor>,
        previous: Option<&StageTape>,
    ) -> StageTape {
        let blocks = self.config.encoder_blocks;
        let encoders: Vec<EncoderTape> = layout
            .encoders
            .iter()
            .zip(inputs)
            .map(|(enc, input)| {
                let mut skips = Vec::with_capacity(blocks);
                let mut downs: Vec<Tensor> = Vec::with_capacity(blocks);
                for (b, (same, down)) in enc.blocks.iter().enumerate() {
                    let x = if b == 0 { &input } else { &downs[b - 1] };
                    let a = conv_relu(p, same, x);
                    let d = conv_relu(p, down, &a);
                    skips.push(a);
                    downs.push(d);
                }
                let bottleneck = conv_relu(p, &enc.bottleneck, &downs[blocks - 1]);
                EncoderTape {
                    input,
                    skips,
                    downs,
                    bottleneck,
                }
            })
            .collect();

        let mut fuse_in = encoders[0].bottleneck.clone();
        for e in &encoders[1..] {
            fuse_in.add_assign(&e.bottleneck);
        }
        if let Some(prev) = previous {
            fuse_in.add_assign(&prev.fused);
        }
        let fused = conv_relu(p, &layout.fuse, &fuse_in);

        let mut decoder: Vec<Option<DecoderTape>> = (0..blocks).map(|_| None).collect();
        for b in (0..blocks).rev() {
            let coarse = if b + 1 == blocks {
                &fused
            } else {
                &decoder[b + 1].as_ref().expect("coarser level").out
            };
            let upsampled = upsample2(coarse);
            let level = &layout.decoder[b];
            let hidden = conv_relu(p, &level.up, &upsampled);
            let mut skip = encoders[0].skips[b].clone();
            for e in &encoders[1..] {
                skip.add_assign(&e.skips[b]);
            }
            if let Some(prev) = previous {
                skip.add_assign(&prev.decoder[b].out);
            }
            let merged = concat(&hidden, &skip);
            let out = conv_relu(p, &level.merge, &merged);
            decoder[b] = Some(DecoderTape {
                upsampled,
                hidden,
                merged,
                out,
            });
        }
        StageTape {
            encoders,
            fuse_in,
            fused,
            decoder: decoder.into_iter().map(|d| d.expect("level")).collect(),
        }
    }

    /// Parameter gradients for upstream gradients on the three head outputs
    /// (centers and subpixel are taken after their sigmoid).
    pub fn backward(
        &self,
        params: &Parameters,
        input: &PredictorInput,
        upstream: &HeadGradients,
    ) -> Result<Parameters> {
        let pass = self.forward(params, input)?;
        let mut grads = params.zeros_like();
        self.backward_pass(params, &pass, upstream, &mut grads)?;
        Ok(grads)
    }

    /// Accumulates the gradients of a recorded forward pass into `grads`.
    pub fn backward_pass(
        &self,
        params: &Parameters,
        pass: &ForwardPass,
        upstream: &HeadGradients,
        grads: &mut Parameters,
    ) -> Result<()> {
        self.check_parameters(params)?;
        self.check_parameters(grads)?;
        let out = &pass.heads[0].out;
        let (h, w) = (out.height, out.width);
        let expect = [
            ("centers", &upstream.center, self.config.classes * h * w),
            ("motion", &upstream.motion, 2 * h * w),
            ("subpixel", &upstream.subpixel, 2 * h * w),
        ];
        for (name, g, n) in expect {
            if g.len() != n {
                return Err(Error::Shape(format!("{name} gradient has {} values, expected {n}", g.len())));
            }
        }
        let p = &params.tensors;
        let g = &mut grads.tensors;

        let squash = |grad: &[f64], y: &Tensor| {
            let data = grad.iter().zip(&y.data).map(|(g, s)| g * s * (1.0 - s)).collect();
            Tensor::from_vec(y.channels, y.height, y.width, data)
        };
        let stage_count = pass.stages.len();
        let features = pass.stages[stage_count - 1].output();
        let mut grad_features = Tensor::zeros(features.channels, h, w);
        let head_grads = [
            (&self.centers, squash(&upstream.center, &pass.heads[0].out)),
            (&self.motion, Tensor::from_vec(2, h, w, upstream.motion.clone())),
            (&self.subpixel, squash(&upstream.subpixel, &pass.heads[2].out)),
        ];
        for ((head, grad_out), tape) in head_grads.into_iter().zip(&pass.heads) {
            let gf = head_backward(p, g, head, tape, features, &grad_out);
            grad_features.add_assign(&gf);
        }

        let blocks = self.config.encoder_blocks;
        let mut ext_levels: Vec<Option<Tensor>> = (0..blocks).map(|_| None).collect();
        ext_levels[0] = Some(grad_features);
        let mut ext_fused: Option<Tensor> = None;
        for s in (0..stage_count).rev() {
            let want_input = s > 0;
            let back = self.stage_backward(
                p,
                g,
                &self.stages[s],
                &pass.stages[s],
                std::mem::take(&mut ext_levels),
                ext_fused.take(),
                want_input,
            );
            if s > 0 {
                let mut levels = back.skips.into_iter().map(Some).collect::<Vec<_>>();
                let input_grad = back.inputs.into_iter().next().flatten().expect("stage input grad");
                levels[0].as_mut().expect("level 0").add_assign(&input_grad);
                ext_levels = levels;
                ext_fused = Some(back.fuse_in);
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn stage_backward(
        &self,
        p: &[NamedTensor],
        g: &mut [NamedTensor],
        layout: &StageLayout,
        tape: &StageTape,
        mut ext_levels: Vec<Option<Tensor>>,
        ext_fused: Option<Tensor>,
        want_input: bool,
    ) -> StageBackward {
        let blocks = self.config.encoder_blocks;
        let mut skip_grads: Vec<Tensor> = Vec::with_capacity(blocks);
        let mut carried: Option<Tensor> = None;
        for b in 0..blocks {
            let level = &layout.decoder[b];
            let lt = &tape.decoder[b];
            let mut grad = match (ext_levels[b].take(), carried.take()) {
                (Some(mut a), Some(c)) => {
                    a.add_assign(&c);
                    a
                }
                (Some(a), None) => a,
                (None, Some(c)) => c,
                (None, None) => Tensor::zeros(lt.out.channels, lt.out.height, lt.out.width),
            };
            relu_backward(&mut grad, &lt.out);
            let grad_merged = conv_back(p, g, &level.merge, &lt.merged, &grad, true).expect("merge input grad");
            let (mut grad_hidden, grad_skip) = split(grad_merged, lt.hidden.channels);
            skip_grads.push(grad_skip);
            relu_backward(&mut grad_hidden, &lt.hidden);
            let grad_up = conv_back(p, g, &level.up, &lt.upsampled, &grad_hidden, true).expect("up input grad");
            carried = Some(upsample2_backward(&grad_up));
        }

        let mut grad_fused = carried.expect("at least one level");
        if let Some(e) = ext_fused {
            grad_fused.add_assign(&e);
        }
        relu_backward(&mut grad_fused, &tape.fused);
        let grad_fuse_in = conv_back(p, g, &layout.fuse, &tape.fuse_in, &grad_fused, true).expect("fuse input grad");

        let mut inputs = Vec::with_capacity(layout.encoders.len());
        for (enc, et) in layout.encoders.iter().zip(&tape.encoders) {
            let mut grad = grad_fuse_in.clone();
            relu_backward(&mut grad, &et.bottleneck);
            let mut grad = conv_back(p, g, &enc.bottleneck, &et.downs[blocks - 1], &grad, true)
                .expect("bottleneck input grad");
            let mut input_grad = None;
            for b in (0..blocks).rev() {
                let (same, down) = &enc.blocks[b];
                relu_backward(&mut grad, &et.downs[b]);
                let mut grad_a = conv_back(p, g, down, &et.skips[b], &grad, true).expect("down input grad");
                grad_a.add_assign(&skip_grads[b]);
                relu_backward(&mut grad_a, &et.skips[b]);
                let need = b > 0 || want_input;
                let gi = conv_back(p, g, same, et.block_input(b), &grad_a, need);
                if b > 0 {
                    grad = gi.expect("block input grad");
                } else {
                    input_grad = gi;
                }
            }
            inputs.push(input_grad);
        }
        StageBackward {
            inputs,
            skips: skip_grads,
            fuse_in: grad_fuse_in,
        }
    }
}

struct StageBackward {
    inputs: Vec<Option<Tensor>>,
    skips: Vec<Tensor>,
    fuse_in: Tensor,
}

fn conv_relu(p: &[NamedTensor], conv: &Conv, input: &Tensor) -> Tensor {
    let mut out = conv_forward(&conv.shape, &p[conv.weight].data, &p[conv.bias].data, input);
    relu_inplace(&mut out);
    out
}

fn conv_back(
    p: &[NamedTensor],
    g: &mut [NamedTensor],
    conv: &Conv,
    input: &Tensor,
    grad_out: &Tensor,
    want_input: bool,
) -> Option<Tensor> {
    let (gw, gb) = pair_mut(g, conv.weight, conv.bias);
    conv_backward(&conv.shape, &p[conv.weight].data, input, grad_out, &mut gw.data, &mut gb.data, want_input)
}

fn pair_mut(g: &mut [NamedTensor], a: usize, b: usize) -> (&mut NamedTensor, &mut NamedTensor) {
    debug_assert!(a < b);
    let (lo, hi) = g.split_at_mut(b);
    (&mut lo[a], &mut hi[0])
}

fn head_forward(p: &[NamedTensor], head: &Head, features: &Tensor) -> HeadTape {
    let hidden = conv_relu(p, &head.hidden, features);
    let out = conv_forward(&head.out.shape, &p[head.out.weight].data, &p[head.out.bias].data, &hidden);
    HeadTape { hidden, out }
}

fn head_backward(
    p: &[NamedTensor],
    g: &mut [NamedTensor],
    head: &Head,
    tape: &HeadTape,
    features: &Tensor,
    grad_out: &Tensor,
) -> Tensor {
    let mut grad_hidden = conv_back(p, g, &head.out, &tape.hidden, grad_out, true).expect("head grad");
    relu_backward(&mut grad_hidden, &tape.hidden);
    conv_back(p, g, &head.hidden, features, &grad_hidden, true).expect("feature grad")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::GrayFrame;

    fn input(w: usize, h: usize, classes: usize) -> PredictorInput {
        let px = |k: usize| (0..w * h).map(|i| ((i * 37 + k * 11) % 101) as f64 / 100.0).collect();
        let fb = CenterMap::from_values(
            GridGeometry::new(w, h, classes).unwrap(),
            (0..classes * w * h).map(|i| ((i * 13) % 17) as f64 / 16.0).collect(),
        )
        .unwrap();
        PredictorInput::new(
            GrayFrame::new(w, h, px(1)).unwrap(),
            GrayFrame::new(w, h, px(2)).unwrap(),
            fb,
        )
        .unwrap()
    }

    #[test]
    fn zero_parameters_give_half() {
        let net = HeatmapNet::new(NetConfig::default()).unwrap();
        let maps = net.predict(&net.zero_parameters(), &input(16, 16, 2)).unwrap();
        assert!(maps.centers.values().iter().all(|&v| v == 0.5));
        assert!(maps.subpixel.values().iter().all(|&v| v == 0.5));
        assert!(maps.motion.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_shapes() {
        let net = HeatmapNet::new(NetConfig::default()).unwrap();
        let params = net.init_parameters(1);
        let maps = net.predict(&params, &input(96, 96, 2)).unwrap();
        assert_eq!(maps.centers.geometry(), GridGeometry::new(96, 96, 2).unwrap());
        assert_eq!((maps.motion.width(), maps.motion.height()), (96, 96));
        assert_eq!((maps.subpixel.width(), maps.subpixel.height()), (96, 96));
    }

    #[test]
    fn rejects_indivisible_input() {
        let net = HeatmapNet::new(NetConfig::default()).unwrap();
        let params = net.init_parameters(1);
        assert!(net.predict(&params, &input(18, 16, 2)).is_err());
        assert!(net.predict(&params, &input(16, 16, 3)).is_err());
    }

    #[test]
    fn centers_bias_initialized() {
        let net = HeatmapNet::new(NetConfig::default()).unwrap();
        let params = net.init_parameters(3);
        let b = params.get("head_centers.out.bias").unwrap();
        assert!(b.data.iter().all(|&v| v == CENTER_BIAS_INIT));
        let names: Vec<_> = params.tensors.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names[0], "stage1.enc_current.block0.conv.weight");
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
    }

    #[test]
    fn two_stage_shapes() {
        let cfg = NetConfig {
            stages: 2,
            ..NetConfig::default()
        };
        let net = HeatmapNet::new(cfg).unwrap();
        let maps = net.predict(&net.init_parameters(2), &input(32, 16, 2)).unwrap();
        assert_eq!((maps.centers.geometry().width, maps.centers.geometry().height), (32, 16));
    }
}
