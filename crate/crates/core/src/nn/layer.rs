//! Layer kinds and their forward/backward kernels.
//!
//! Batched tensors are row-major with the batch as the leading dimension.
//! Convolutions use NCHW; a `(N, C*H*W)` input is accepted by conv layers
//! and read as NCHW, which is how the generator goes from its dense
//! projection to the first transposed convolution.

use super::gemm::{gemm, MatMut, MatRef};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Geometry of a 2-D (transposed) convolution.
///
/// `in_height`/`in_width` always describe the layer's *input*. For a
/// transposed convolution that is the small side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub in_height: usize,
    pub in_width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvSpec {
    /// Kernel 4, stride 2, padding 1: halves (conv) or doubles (deconv)
    /// even spatial sizes.
    pub fn k4s2(in_channels: usize, out_channels: usize, in_height: usize, in_width: usize) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            in_height,
            in_width,
            kernel: 4,
            stride: 2,
            padding: 1,
        }
    }

    /// Output spatial size when used as a convolution.
    pub fn conv_output(&self) -> Option<(usize, usize)> {
        let out = |n: usize| {
            let padded = n + 2 * self.padding;
            (padded >= self.kernel && (padded - self.kernel).is_multiple_of(self.stride))
                .then(|| (padded - self.kernel) / self.stride + 1)
        };
        Some((out(self.in_height)?, out(self.in_width)?))
    }

    /// Output spatial size when used as a transposed convolution.
    pub fn deconv_output(&self) -> Option<(usize, usize)> {
        let out = |n: usize| {
            ((n - 1) * self.stride + self.kernel)
                .checked_sub(2 * self.padding)
                .filter(|&v| v > 0)
        };
        Some((out(self.in_height)?, out(self.in_width)?))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    /// `y = x W + b`, `W` stored as `[inputs, outputs]`.
    Dense {
        inputs: usize,
        outputs: usize,
    },
    /// Weight `[out, in, k, k]`.
    Conv2d(ConvSpec),
    /// Weight `[in, out, k, k]`; the adjoint of `Conv2d` with the same tensor.
    Deconv2d(ConvSpec),
    Relu,
    LeakyRelu {
        slope: f64,
    },
    Sigmoid,
    Flatten,
}

impl LayerSpec {
    pub fn leaky_relu() -> Self {
        LayerSpec::LeakyRelu { slope: 0.2 }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv2d(_) => "conv2d",
            LayerSpec::Deconv2d(_) => "deconv2d",
            LayerSpec::Relu => "relu",
            LayerSpec::LeakyRelu { .. } => "leaky_relu",
            LayerSpec::Sigmoid => "sigmoid",
            LayerSpec::Flatten => "flatten",
        }
    }

    pub fn is_relu_family(&self) -> bool {
        matches!(self, LayerSpec::Relu | LayerSpec::LeakyRelu { .. })
    }

    /// Shapes of `(weight, bias)` for parametrized layers.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            LayerSpec::Dense { inputs, outputs } => Some((vec![inputs, outputs], vec![outputs])),
            LayerSpec::Conv2d(c) => Some((
                vec![c.out_channels, c.in_channels, c.kernel, c.kernel],
                vec![c.out_channels],
            )),
            LayerSpec::Deconv2d(c) => Some((
                vec![c.in_channels, c.out_channels, c.kernel, c.kernel],
                vec![c.out_channels],
            )),
            _ => None,
        }
    }

    /// Glorot fan sum used for weight initialization.
    pub(crate) fn fan_sum(&self) -> usize {
        match *self {
            LayerSpec::Dense { inputs, outputs } => inputs + outputs,
            LayerSpec::Conv2d(c) | LayerSpec::Deconv2d(c) => (c.in_channels + c.out_channels) * c.kernel * c.kernel,
            _ => 0,
        }
    }

    /// Output shape for a given input shape, or a description of the mismatch.
    pub fn output_shape(&self, input: &[usize]) -> std::result::Result<Vec<usize>, String> {
        if input.is_empty() {
            return Err("input has no batch dimension".into());
        }
        let n = input[0];
        let per_sample: usize = input[1..].iter().product();
        match *self {
            LayerSpec::Dense { inputs, outputs } => {
                if input.len() != 2 || input[1] != inputs {
                    return Err(format!("dense expects [N, {inputs}], got {input:?}"));
                }
                Ok(vec![n, outputs])
            }
            LayerSpec::Conv2d(c) | LayerSpec::Deconv2d(c) => {
                let expected = [c.in_channels, c.in_height, c.in_width];
                let ok = (input.len() == 4 && input[1..] == expected)
                    || (input.len() == 2 && per_sample == expected.iter().product());
                if !ok {
                    return Err(format!(
                        "{} expects [N, {}, {}, {}], got {input:?}",
                        self.kind(),
                        c.in_channels,
                        c.in_height,
                        c.in_width
                    ));
                }
                let dims = if matches!(self, LayerSpec::Conv2d(_)) {
                    c.conv_output()
                } else {
                    c.deconv_output()
                };
                let (h, w) = dims.ok_or_else(|| format!("invalid geometry {c:?}"))?;
                Ok(vec![n, c.out_channels, h, w])
            }
            LayerSpec::Flatten => Ok(vec![n, per_sample]),
            LayerSpec::Relu | LayerSpec::LeakyRelu { .. } | LayerSpec::Sigmoid => Ok(input.to_vec()),
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

/// Patch-extraction geometry over the large spatial side.
struct Im2Col {
    channels: usize,
    height: usize,
    width: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    out_h: usize,
    out_w: usize,
}

impl Im2Col {
    fn rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    fn cols(&self) -> usize {
        self.out_h * self.out_w
    }

    /// `image` is `(C, H, W)`; `cols` becomes `(C*k*k, OH*OW)`.
    fn unfold(&self, image: &[f64], cols: &mut [f64]) {
        let p = self.cols();
        let k = self.kernel;
        for c in 0..self.channels {
            let plane = &image[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ki in 0..k {
                for kj in 0..k {
                    let row = &mut cols[((c * k + ki) * k + kj) * p..][..p];
                    for oh in 0..self.out_h {
                        let ih = (oh * self.stride + ki) as isize - self.padding as isize;
                        let dst = &mut row[oh * self.out_w..(oh + 1) * self.out_w];
                        if ih < 0 || ih >= self.height as isize {
                            dst.fill(0.0);
                            continue;
                        }
                        let src = &plane[ih as usize * self.width..(ih as usize + 1) * self.width];
                        for (ow, d) in dst.iter_mut().enumerate() {
                            let iw = (ow * self.stride + kj) as isize - self.padding as isize;
                            *d = if iw < 0 || iw >= self.width as isize {
                                0.0
                            } else {
                                src[iw as usize]
                            };
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of `unfold`: accumulates `cols` back into `image`.
    fn fold(&self, cols: &[f64], image: &mut [f64]) {
        let p = self.cols();
        let k = self.kernel;
        for c in 0..self.channels {
            let plane = &mut image[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ki in 0..k {
                for kj in 0..k {
                    let row = &cols[((c * k + ki) * k + kj) * p..][..p];
                    for oh in 0..self.out_h {
                        let ih = (oh * self.stride + ki) as isize - self.padding as isize;
                        if ih < 0 || ih >= self.height as isize {
                            continue;
                        }
                        let dst = &mut plane[ih as usize * self.width..(ih as usize + 1) * self.width];
                        for ow in 0..self.out_w {
                            let iw = (ow * self.stride + kj) as isize - self.padding as isize;
                            if iw >= 0 && iw < self.width as isize {
                                dst[iw as usize] += row[oh * self.out_w + ow];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn conv_geometry(c: &ConvSpec) -> Im2Col {
    let (out_h, out_w) = c.conv_output().expect("validated geometry");
    Im2Col {
        channels: c.in_channels,
        height: c.in_height,
        width: c.in_width,
        kernel: c.kernel,
        stride: c.stride,
        padding: c.padding,
        out_h,
        out_w,
    }
}

fn deconv_geometry(c: &ConvSpec) -> Im2Col {
    let (height, width) = c.deconv_output().expect("validated geometry");
    Im2Col {
        channels: c.out_channels,
        height,
        width,
        kernel: c.kernel,
        stride: c.stride,
        padding: c.padding,
        out_h: c.in_height,
        out_w: c.in_width,
    }
}

/// Forward pass of one layer. `params` is `(weight, bias)` for parametrized kinds.
pub(crate) fn forward(
    spec: &LayerSpec,
    params: Option<(&Tensor, &Tensor)>,
    x: &Tensor,
    out_shape: Vec<usize>,
) -> Tensor {
    let n = x.batch();
    match *spec {
        LayerSpec::Dense { inputs, outputs } => {
            let (w, b) = params.expect("dense has parameters");
            let mut y = Vec::with_capacity(n * outputs);
            for _ in 0..n {
                y.extend_from_slice(b.data());
            }
            gemm(
                MatRef::new(x.data(), n, inputs),
                MatRef::new(w.data(), inputs, outputs),
                1.0,
                MatMut::new(&mut y, n, outputs),
            );
            Tensor::from_parts(out_shape, y)
        }
        LayerSpec::Conv2d(c) => {
            let (w, b) = params.expect("conv has parameters");
            let g = conv_geometry(&c);
            let (rows, p) = (g.rows(), g.cols());
            let in_len = x.sample_len();
            let out_len = c.out_channels * p;
            let mut cols = vec![0.0; rows * p];
            let mut y = vec![0.0; n * out_len];
            for s in 0..n {
                g.unfold(&x.data()[s * in_len..(s + 1) * in_len], &mut cols);
                let ys = &mut y[s * out_len..(s + 1) * out_len];
                for (o, chunk) in ys.chunks_mut(p).enumerate() {
                    chunk.fill(b.data()[o]);
                }
                gemm(
                    MatRef::new(w.data(), c.out_channels, rows),
                    MatRef::new(&cols, rows, p),
                    1.0,
                    MatMut::new(ys, c.out_channels, p),
                );
            }
            Tensor::from_parts(out_shape, y)
        }
        LayerSpec::Deconv2d(c) => {
            let (w, b) = params.expect("deconv has parameters");
            let g = deconv_geometry(&c);
            let (rows, p) = (g.rows(), g.cols());
            let in_len = x.sample_len();
            let out_len = c.out_channels * g.height * g.width;
            let plane = g.height * g.width;
            let mut cols = vec![0.0; rows * p];
            let mut y = vec![0.0; n * out_len];
            for s in 0..n {
                gemm(
                    MatRef::new(w.data(), c.in_channels, rows).t(),
                    MatRef::new(&x.data()[s * in_len..(s + 1) * in_len], c.in_channels, p),
                    0.0,
                    MatMut::new(&mut cols, rows, p),
                );
                let ys = &mut y[s * out_len..(s + 1) * out_len];
                g.fold(&cols, ys);
                for (o, chunk) in ys.chunks_mut(plane).enumerate() {
                    let bias = b.data()[o];
                    chunk.iter_mut().for_each(|v| *v += bias);
                }
            }
            Tensor::from_parts(out_shape, y)
        }
        LayerSpec::Relu => map(x, out_shape, |v| v.max(0.0)),
        LayerSpec::LeakyRelu { slope } => map(x, out_shape, |v| if v > 0.0 { v } else { slope * v }),
        LayerSpec::Sigmoid => map(x, out_shape, sigmoid),
        LayerSpec::Flatten => Tensor::from_parts(out_shape, x.data().to_vec()),
    }
}

fn map(x: &Tensor, shape: Vec<usize>, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::from_parts(shape, x.data().iter().map(|&v| f(v)).collect())
}

/// What a backward pass should produce for one layer.
#[derive(Clone, Copy)]
pub(crate) struct LayerBackward {
    pub param_grads: bool,
    pub input_grad: bool,
    pub guided: bool,
}

/// Backward pass of one layer.
///
/// `x` is the layer input, `y` its output, `dy` the upstream gradient.
/// Returns `(d_input, Some((d_weight, d_bias)))`.
pub(crate) fn backward(
    spec: &LayerSpec,
    params: Option<(&Tensor, &Tensor)>,
    x: &Tensor,
    y: &Tensor,
    dy: &Tensor,
    what: LayerBackward,
) -> (Option<Tensor>, Option<(Tensor, Tensor)>) {
    let n = x.batch();
    match *spec {
        LayerSpec::Dense { inputs, outputs } => {
            let (w, _) = params.expect("dense has parameters");
            let dx = what.input_grad.then(|| {
                let mut dx = vec![0.0; n * inputs];
                gemm(
                    MatRef::new(dy.data(), n, outputs),
                    MatRef::new(w.data(), inputs, outputs).t(),
                    0.0,
                    MatMut::new(&mut dx, n, inputs),
                );
                Tensor::from_parts(x.shape().to_vec(), dx)
            });
            let dp = what.param_grads.then(|| {
                let mut dw = vec![0.0; inputs * outputs];
                gemm(
                    MatRef::new(x.data(), n, inputs).t(),
                    MatRef::new(dy.data(), n, outputs),
                    0.0,
                    MatMut::new(&mut dw, inputs, outputs),
                );
                let mut db = vec![0.0; outputs];
                for row in dy.data().chunks(outputs) {
                    db.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                }
                (
                    Tensor::from_parts(vec![inputs, outputs], dw),
                    Tensor::from_parts(vec![outputs], db),
                )
            });
            (dx, dp)
        }
        LayerSpec::Conv2d(c) => {
            let (w, _) = params.expect("conv has parameters");
            let g = conv_geometry(&c);
            let (rows, p) = (g.rows(), g.cols());
            let in_len = x.sample_len();
            let out_len = c.out_channels * p;
            let mut cols = vec![0.0; rows * p];
            let mut dx = what.input_grad.then(|| vec![0.0; n * in_len]);
            let mut dw = vec![0.0; c.out_channels * rows];
            let mut db = vec![0.0; c.out_channels];
            for s in 0..n {
                let dys = &dy.data()[s * out_len..(s + 1) * out_len];
                if what.param_grads {
                    g.unfold(&x.data()[s * in_len..(s + 1) * in_len], &mut cols);
                    gemm(
                        MatRef::new(dys, c.out_channels, p),
                        MatRef::new(&cols, rows, p).t(),
                        1.0,
                        MatMut::new(&mut dw, c.out_channels, rows),
                    );
                    for (o, chunk) in dys.chunks(p).enumerate() {
                        db[o] += chunk.iter().sum::<f64>();
                    }
                }
                if let Some(dx) = dx.as_mut() {
                    gemm(
                        MatRef::new(w.data(), c.out_channels, rows).t(),
                        MatRef::new(dys, c.out_channels, p),
                        0.0,
                        MatMut::new(&mut cols, rows, p),
                    );
                    g.fold(&cols, &mut dx[s * in_len..(s + 1) * in_len]);
                }
            }
            let dx = dx.map(|d| Tensor::from_parts(x.shape().to_vec(), d));
            let dp = what.param_grads.then(|| {
                (
                    Tensor::from_parts(w.shape().to_vec(), dw),
                    Tensor::from_parts(vec![c.out_channels], db),
                )
            });
            (dx, dp)
        }
        LayerSpec::Deconv2d(c) => {
            let (w, _) = params.expect("deconv has parameters");
            let g = deconv_geometry(&c);
            let (rows, p) = (g.rows(), g.cols());
            let in_len = x.sample_len();
            let plane = g.height * g.width;
            let out_len = c.out_channels * plane;
            let mut cols = vec![0.0; rows * p];
            let mut dx = what.input_grad.then(|| vec![0.0; n * in_len]);
            let mut dw = vec![0.0; c.in_channels * rows];
            let mut db = vec![0.0; c.out_channels];
            for s in 0..n {
                let dys = &dy.data()[s * out_len..(s + 1) * out_len];
                g.unfold(dys, &mut cols);
                if let Some(dx) = dx.as_mut() {
                    gemm(
                        MatRef::new(w.data(), c.in_channels, rows),
                        MatRef::new(&cols, rows, p),
                        0.0,
                        MatMut::new(&mut dx[s * in_len..(s + 1) * in_len], c.in_channels, p),
                    );
                }
                if what.param_grads {
                    gemm(
                        MatRef::new(&x.data()[s * in_len..(s + 1) * in_len], c.in_channels, p),
                        MatRef::new(&cols, rows, p).t(),
                        1.0,
                        MatMut::new(&mut dw, c.in_channels, rows),
                    );
                    for (o, chunk) in dys.chunks(plane).enumerate() {
                        db[o] += chunk.iter().sum::<f64>();
                    }
                }
            }
            let dx = dx.map(|d| Tensor::from_parts(x.shape().to_vec(), d));
            let dp = what.param_grads.then(|| {
                (
                    Tensor::from_parts(w.shape().to_vec(), dw),
                    Tensor::from_parts(vec![c.out_channels], db),
                )
            });
            (dx, dp)
        }
        LayerSpec::Relu => (Some(gate(x, dy, 0.0, what.guided)), None),
        LayerSpec::LeakyRelu { slope } => (Some(gate(x, dy, slope, what.guided)), None),
        LayerSpec::Sigmoid => {
            let dx = y
                .data()
                .iter()
                .zip(dy.data())
                .map(|(&s, &g)| g * s * (1.0 - s))
                .collect();
            (Some(Tensor::from_parts(x.shape().to_vec(), dx)), None)
        }
        LayerSpec::Flatten => (Some(Tensor::from_parts(x.shape().to_vec(), dy.data().to_vec())), None),
    }
}

/// ReLU-family backward. The guided rule also drops negative upstream signal.
fn gate(x: &Tensor, dy: &Tensor, slope: f64, guided: bool) -> Tensor {
    let dx = x
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&v, &g)| {
            let g = if guided { g.max(0.0) } else { g };
            if v > 0.0 {
                g
            } else {
                slope * g
            }
        })
        .collect();
    Tensor::from_parts(x.shape().to_vec(), dx)
}

pub(crate) fn check_params(spec: &LayerSpec, layer: usize, w: &Tensor, b: &Tensor) -> Result<()> {
    if let Some((ws, bs)) = spec.param_shapes() {
        if w.shape() != ws.as_slice() || b.shape() != bs.as_slice() {
            return Err(Error::LayerShape {
                layer,
                message: format!(
                    "parameters {:?}/{:?} do not match {} layer ({ws:?}/{bs:?})",
                    w.shape(),
                    b.shape(),
                    spec.kind()
                ),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k4s2_halves_and_doubles() {
        let c = ConvSpec::k4s2(1, 4, 52, 32);
        assert_eq!(c.conv_output(), Some((26, 16)));
        let c = ConvSpec::k4s2(1, 4, 26, 16);
        assert_eq!(c.conv_output(), Some((13, 8)));
        assert_eq!(ConvSpec::k4s2(64, 32, 13, 8).deconv_output(), Some((26, 16)));
        assert_eq!(ConvSpec::k4s2(32, 1, 26, 16).deconv_output(), Some((52, 32)));
    }

    #[test]
    fn conv_rejects_wrong_input() {
        let spec = LayerSpec::Conv2d(ConvSpec::k4s2(2, 4, 8, 8));
        assert!(spec.output_shape(&[3, 1, 8, 8]).is_err());
        assert_eq!(spec.output_shape(&[3, 2, 8, 8]).unwrap(), vec![3, 4, 4, 4]);
        assert_eq!(spec.output_shape(&[3, 128]).unwrap(), vec![3, 4, 4, 4]);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!(sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn guided_gate_drops_negative_signal() {
        let x = Tensor::new(vec![1, 4], vec![1.0, -1.0, 2.0, -2.0]).unwrap();
        let dy = Tensor::new(vec![1, 4], vec![-1.0, 1.0, 3.0, -3.0]).unwrap();
        assert_eq!(gate(&x, &dy, 0.0, false).data(), &[-1.0, 0.0, 3.0, 0.0]);
        assert_eq!(gate(&x, &dy, 0.0, true).data(), &[0.0, 0.0, 3.0, 0.0]);
        assert_eq!(gate(&x, &dy, 0.2, false).data(), &[-1.0, 0.2, 3.0, -0.6000000000000001]);
        assert_eq!(gate(&x, &dy, 0.2, true).data(), &[0.0, 0.2, 3.0, 0.0]);
    }
}
