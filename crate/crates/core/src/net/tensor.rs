//! Dense CHW tensors and the handful of kernels the reference net needs.

/// Single-sample activation tensor in channel-major, row-major layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), channels * height * width, "tensor data length");
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.channels == other.channels && self.height == other.height && self.width == other.width
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// `c = a * b + beta * c` with explicit row/column strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (usize, usize),
    b: &[f64],
    b_strides: (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rows: usize, cols: usize, (rs, cs): (usize, usize)| {
        (rows.saturating_sub(1)) * rs + (cols.saturating_sub(1)) * cs + 1
    };
    assert!(k == 0 || a.len() >= last(m, k, a_strides), "gemm: lhs too short");
    assert!(k == 0 || b.len() >= last(k, n, b_strides), "gemm: rhs too short");
    assert!(c.len() >= m * n, "gemm: output too short");
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Square-kernel 2D convolution geometry with "same"-style padding `k / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvShape {
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvShape {
    pub fn pad(&self) -> usize {
        self.kernel / 2
    }

    pub fn out_dims(&self, height: usize, width: usize) -> (usize, usize) {
        let p = self.pad();
        (
            (height + 2 * p - self.kernel) / self.stride + 1,
            (width + 2 * p - self.kernel) / self.stride + 1,
        )
    }

    pub fn patch_len(&self) -> usize {
        self.cin * self.kernel * self.kernel
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1
    }
}

/// Unfolds `input` into a `[cin * k * k, oh * ow]` patch matrix.
fn im2col(shape: &ConvShape, input: &Tensor, oh: usize, ow: usize, col: &mut [f64]) {
    let (k, s, p) = (shape.kernel, shape.stride, shape.pad() as isize);
    let (h, w) = (input.height as isize, input.width as isize);
    let out_len = oh * ow;
    for ci in 0..shape.cin {
        let plane = &input.data[ci * input.plane_len()..(ci + 1) * input.plane_len()];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let dst = &mut col[row * out_len..(row + 1) * out_len];
                for oy in 0..oh {
                    let iy = (oy * s) as isize + ky as isize - p;
                    let seg = &mut dst[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= h {
                        seg.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * input.width..(iy as usize + 1) * input.width];
                    let dx = kx as isize - p;
                    if s == 1 {
                        let lo = (-dx).max(0) as usize;
                        let hi = ((w - dx).min(ow as isize)).max(lo as isize) as usize;
                        seg[..lo].fill(0.0);
                        seg[hi..].fill(0.0);
                        let start = (lo as isize + dx) as usize;
                        seg[lo..hi].copy_from_slice(&src[start..start + (hi - lo)]);
                    } else {
                        for (ox, v) in seg.iter_mut().enumerate() {
                            let ix = (ox * s) as isize + dx;
                            *v = if ix >= 0 && ix < w { src[ix as usize] } else { 0.0 };
                        }
                    }
                }
            }
        }
    }
}

/// Folds a patch-matrix gradient back onto the input, accumulating.
fn col2im(shape: &ConvShape, col: &[f64], oh: usize, ow: usize, grad: &mut Tensor) {
    let (k, s, p) = (shape.kernel, shape.stride, shape.pad() as isize);
    let (h, w) = (grad.height as isize, grad.width as isize);
    let out_len = oh * ow;
    let plane_len = grad.plane_len();
    for ci in 0..shape.cin {
        let plane = &mut grad.data[ci * plane_len..(ci + 1) * plane_len];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let src = &col[row * out_len..(row + 1) * out_len];
                for oy in 0..oh {
                    let iy = (oy * s) as isize + ky as isize - p;
                    if iy < 0 || iy >= h {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * grad.width..(iy as usize + 1) * grad.width];
                    let seg = &src[oy * ow..(oy + 1) * ow];
                    let dx = kx as isize - p;
                    if s == 1 {
                        let lo = (-dx).max(0) as usize;
                        let hi = ((w - dx).min(ow as isize)).max(lo as isize) as usize;
                        let start = (lo as isize + dx) as usize;
                        for (d, v) in dst[start..start + (hi - lo)].iter_mut().zip(&seg[lo..hi]) {
                            *d += v;
                        }
                    } else {
                        for (ox, v) in seg.iter().enumerate() {
                            let ix = (ox * s) as isize + dx;
                            if ix >= 0 && ix < w {
                                dst[ix as usize] += v;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Convolution forward pass: returns `weight * input + bias`.
pub(crate) fn conv_forward(shape: &ConvShape, weight: &[f64], bias: &[f64], input: &Tensor) -> Tensor {
    debug_assert_eq!(input.channels, shape.cin);
    let (oh, ow) = shape.out_dims(input.height, input.width);
    let out_len = oh * ow;
    let mut out = Tensor::zeros(shape.cout, oh, ow);
    for (co, b) in bias.iter().enumerate() {
        out.data[co * out_len..(co + 1) * out_len].fill(*b);
    }
    let kk = shape.patch_len();
    if shape.is_pointwise() {
        gemm(shape.cout, kk, out_len, weight, (kk, 1), &input.data, (out_len, 1), 1.0, &mut out.data);
    } else {
        let mut col = vec![0.0; kk * out_len];
        im2col(shape, input, oh, ow, &mut col);
        gemm(shape.cout, kk, out_len, weight, (kk, 1), &col, (out_len, 1), 1.0, &mut out.data);
    }
    out
}

/// Convolution backward pass. Accumulates weight and bias gradients and,
/// when `want_input` is set, returns the input gradient.
pub(crate) fn conv_backward(
    shape: &ConvShape,
    weight: &[f64],
    input: &Tensor,
    grad_out: &Tensor,
    grad_weight: &mut [f64],
    grad_bias: &mut [f64],
    want_input: bool,
) -> Option<Tensor> {
    let (oh, ow) = (grad_out.height, grad_out.width);
    let out_len = oh * ow;
    let kk = shape.patch_len();
    for (co, gb) in grad_bias.iter_mut().enumerate() {
        *gb += grad_out.data[co * out_len..(co + 1) * out_len].iter().sum::<f64>();
    }
    if shape.is_pointwise() {
        // dW += dOut * input^T
        gemm(shape.cout, out_len, kk, &grad_out.data, (out_len, 1), &input.data, (1, out_len), 1.0, grad_weight);
        if !want_input {
            return None;
        }
        let mut grad_in = Tensor::zeros(input.channels, input.height, input.width);
        gemm(kk, shape.cout, out_len, weight, (1, kk), &grad_out.data, (out_len, 1), 0.0, &mut grad_in.data);
        return Some(grad_in);
    }
    let mut col = vec![0.0; kk * out_len];
    im2col(shape, input, oh, ow, &mut col);
    gemm(shape.cout, out_len, kk, &grad_out.data, (out_len, 1), &col, (1, out_len), 1.0, grad_weight);
    if !want_input {
        return None;
    }
    gemm(kk, shape.cout, out_len, weight, (1, kk), &grad_out.data, (out_len, 1), 0.0, &mut col);
    let mut grad_in = Tensor::zeros(input.channels, input.height, input.width);
    col2im(shape, &col, oh, ow, &mut grad_in);
    Some(grad_in)
}

pub(crate) fn relu_inplace(t: &mut Tensor) {
    for v in &mut t.data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Masks `grad` by the positive entries of the ReLU output.
pub(crate) fn relu_backward(grad: &mut Tensor, output: &Tensor) {
    for (g, o) in grad.data.iter_mut().zip(&output.data) {
        if *o <= 0.0 {
            *g = 0.0;
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn upsample2(input: &Tensor) -> Tensor {
    let (h, w) = (input.height * 2, input.width * 2);
    let mut out = Tensor::zeros(input.channels, h, w);
    for c in 0..input.channels {
        let src = &input.data[c * input.plane_len()..(c + 1) * input.plane_len()];
        let dst = &mut out.data[c * h * w..(c + 1) * h * w];
        for y in 0..h {
            let srow = &src[(y / 2) * input.width..(y / 2 + 1) * input.width];
            for (x, d) in dst[y * w..(y + 1) * w].iter_mut().enumerate() {
                *d = srow[x / 2];
            }
        }
    }
    out
}

/// Adjoint of [`upsample2`]: sums each 2x2 block.
pub(crate) fn upsample2_backward(grad: &Tensor) -> Tensor {
    let (h, w) = (grad.height / 2, grad.width / 2);
    let mut out = Tensor::zeros(grad.channels, h, w);
    for c in 0..grad.channels {
        let src = &grad.data[c * grad.plane_len()..(c + 1) * grad.plane_len()];
        let dst = &mut out.data[c * h * w..(c + 1) * h * w];
        for y in 0..grad.height {
            let srow = &src[y * grad.width..(y + 1) * grad.width];
            let drow = &mut dst[(y / 2) * w..(y / 2 + 1) * w];
            for (x, v) in srow.iter().enumerate() {
                drow[x / 2] += v;
            }
        }
    }
    out
}

pub(crate) fn concat(a: &Tensor, b: &Tensor) -> Tensor {
    debug_assert_eq!((a.height, a.width), (b.height, b.width));
    let mut data = Vec::with_capacity(a.data.len() + b.data.len());
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    Tensor::from_vec(a.channels + b.channels, a.height, a.width, data)
}

/// Splits a concatenated gradient back into its two parts.
pub(crate) fn split(grad: Tensor, first_channels: usize) -> (Tensor, Tensor) {
    let cut = first_channels * grad.plane_len();
    let (h, w, c) = (grad.height, grad.width, grad.channels);
    let mut data = grad.data;
    let tail = data.split_off(cut);
    (
        Tensor::from_vec(first_channels, h, w, data),
        Tensor::from_vec(c - first_channels, h, w, tail),
    )
}
