use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng as _;

use crate::error::{config_err, Error, Result};
use crate::rng::{rng_for, tag};
use crate::tensor::{Real, Tensor};

/// Description of one layer. Shapes are per sample; the batch dimension is
/// implicit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Relu,
    Flatten,
    /// Terminal layer. Passes logits through; the training loop applies
    /// softmax cross-entropy on its output.
    SoftmaxXentHead {
        classes: usize,
    },
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LayerSpec::Dense { inputs, outputs } => write!(f, "dense({inputs},{outputs})"),
            LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, padding } => {
                write!(f, "conv2d({in_channels},{out_channels},{kernel},{stride},{padding})")
            }
            LayerSpec::Relu => f.write_str("relu"),
            LayerSpec::Flatten => f.write_str("flatten"),
            LayerSpec::SoftmaxXentHead { classes } => write!(f, "head({classes})"),
        }
    }
}

impl FromStr for LayerSpec {
    type Err = Error;

    /// Parses the display form, e.g. `dense(8,16)` or `conv2d(1,4,3,1,1)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) if s.ends_with(')') => (&s[..open], &s[open + 1..s.len() - 1]),
            Some(_) => return Err(config_err!("malformed layer `{s}`")),
            None => (s, ""),
        };
        let nums = if args.trim().is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|a| a.trim().parse::<usize>().map_err(|_| config_err!("bad argument `{a}` in layer `{s}`")))
                .collect::<Result<Vec<_>>>()?
        };
        let spec = match (name.trim(), nums.as_slice()) {
            ("dense", &[inputs, outputs]) => LayerSpec::Dense { inputs, outputs },
            ("conv2d", &[in_channels, out_channels, kernel, stride, padding]) => {
                LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, padding }
            }
            ("relu", []) => LayerSpec::Relu,
            ("flatten", []) => LayerSpec::Flatten,
            ("head", &[classes]) => LayerSpec::SoftmaxXentHead { classes },
            _ => return Err(config_err!("unknown layer `{s}`")),
        };
        Ok(spec)
    }
}

impl LayerSpec {
    pub fn is_parametric(&self) -> bool {
        matches!(self, LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. })
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *self {
            LayerSpec::Dense { inputs, outputs } => {
                if input != [inputs] {
                    return Err(config_err!("{self} expects input [{inputs}], got {input:?}"));
                }
                Ok(vec![outputs])
            }
            LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, padding } => {
                let &[c, h, w] = input else {
                    return Err(config_err!("{self} expects a [c,h,w] input, got {input:?}"));
                };
                if c != in_channels {
                    return Err(config_err!("{self} expects {in_channels} channels, got {c}"));
                }
                if kernel == 0 || stride == 0 || out_channels == 0 {
                    return Err(config_err!("{self} has a zero-sized dimension"));
                }
                if h + 2 * padding < kernel || w + 2 * padding < kernel {
                    return Err(config_err!("{self} kernel larger than padded input {input:?}"));
                }
                let oh = (h + 2 * padding - kernel) / stride + 1;
                let ow = (w + 2 * padding - kernel) / stride + 1;
                Ok(vec![out_channels, oh, ow])
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::SoftmaxXentHead { classes } => {
                if input != [classes] {
                    return Err(config_err!("{self} expects logits [{classes}], got {input:?}"));
                }
                Ok(vec![classes])
            }
        }
    }

    /// Shapes of the parameter tensors (weights first, then bias).
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            LayerSpec::Dense { inputs, outputs } => vec![vec![outputs, inputs], vec![outputs]],
            LayerSpec::Conv2d { in_channels, out_channels, kernel, .. } => {
                vec![vec![out_channels, in_channels, kernel, kernel], vec![out_channels]]
            }
            _ => Vec::new(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes().iter().map(|s| s.iter().product::<usize>()).sum()
    }

    /// Forward FLOPs for one sample. One multiply-accumulate is two FLOPs and
    /// each bias add is one; element-wise layers are free.
    pub fn forward_flops(&self, input: &[usize]) -> Result<u64> {
        let out = self.output_shape(input)?;
        Ok(match *self {
            LayerSpec::Dense { inputs, outputs } => (2 * inputs * outputs + outputs) as u64,
            LayerSpec::Conv2d { in_channels, kernel, .. } => {
                let positions: usize = out.iter().product();
                (positions * (2 * in_channels * kernel * kernel + 1)) as u64
            }
            _ => 0,
        })
    }

    fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Dense { inputs, .. } => inputs,
            LayerSpec::Conv2d { in_channels, kernel, .. } => in_channels * kernel * kernel,
            _ => 0,
        }
    }

    /// He-uniform weights and zero biases, drawn from a stream keyed by
    /// `(seed, index)`.
    pub fn init_params<T: Real>(&self, seed: u64, index: u64, stream: u64) -> Vec<Tensor<T>> {
        let shapes = self.param_shapes();
        if shapes.is_empty() {
            return Vec::new();
        }
        let mut rng = rng_for(seed, &[stream, index]);
        let limit = libm::sqrt(6.0 / self.fan_in().max(1) as f64);
        let weights = Tensor::from_fn(shapes[0].clone(), |_| T::of_f64(rng.random_range(-limit..limit)));
        vec![weights, Tensor::zeros(shapes[1].clone())]
    }
}

/// A layer together with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T = f32> {
    pub spec: LayerSpec,
    pub params: Vec<Tensor<T>>,
}

impl<T: Real> Layer<T> {
    pub fn new(spec: LayerSpec, seed: u64, index: u64) -> Self {
        Self { params: spec.init_params(seed, index, tag::LAYER_INIT), spec }
    }

    /// `x` is batched: `[batch, ..per-sample input]`.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let out_shape = self.spec.output_shape(&x.shape()[1..])?;
        let batch = x.rows();
        let mut shape = vec![batch];
        shape.extend_from_slice(&out_shape);
        match self.spec {
            LayerSpec::Dense { inputs, outputs } => {
                let (w, b) = (self.params[0].data(), self.params[1].data());
                let mut y = Vec::with_capacity(batch * outputs);
                for r in 0..batch {
                    let xr = x.row(r);
                    for o in 0..outputs {
                        let wr = &w[o * inputs..(o + 1) * inputs];
                        let mut acc = b[o];
                        for i in 0..inputs {
                            acc = acc + wr[i] * xr[i];
                        }
                        y.push(acc);
                    }
                }
                Tensor::new(shape, y)
            }
            LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, padding } => {
                let (h, w) = (x.shape()[2], x.shape()[3]);
                let (oh, ow) = (out_shape[1], out_shape[2]);
                let (wt, b) = (self.params[0].data(), self.params[1].data());
                let mut y = vec![T::zero(); batch * out_channels * oh * ow];
                for n in 0..batch {
                    let xin = x.row(n);
                    for o in 0..out_channels {
                        for oy in 0..oh {
                            for ox in 0..ow {
                                let mut acc = b[o];
                                for c in 0..in_channels {
                                    for ky in 0..kernel {
                                        let iy = (oy * stride + ky) as isize - padding as isize;
                                        if iy < 0 || iy >= h as isize {
                                            continue;
                                        }
                                        for kx in 0..kernel {
                                            let ix = (ox * stride + kx) as isize - padding as isize;
                                            if ix < 0 || ix >= w as isize {
                                                continue;
                                            }
                                            let wv = wt[((o * in_channels + c) * kernel + ky) * kernel + kx];
                                            let xv = xin[(c * h + iy as usize) * w + ix as usize];
                                            acc = acc + wv * xv;
                                        }
                                    }
                                }
                                y[((n * out_channels + o) * oh + oy) * ow + ox] = acc;
                            }
                        }
                    }
                }
                Tensor::new(shape, y)
            }
            LayerSpec::Relu => {
                let y = x.data().iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect();
                Tensor::new(shape, y)
            }
            LayerSpec::Flatten | LayerSpec::SoftmaxXentHead { .. } => Tensor::new(shape, x.data().to_vec()),
        }
    }

    /// Returns parameter gradients (congruent with `params`) and the
    /// gradient with respect to the input `x` that was fed to `forward`.
    pub fn backward(&self, x: &Tensor<T>, upstream: &Tensor<T>) -> Result<(Vec<Tensor<T>>, Tensor<T>)> {
        let out_shape = self.spec.output_shape(&x.shape()[1..])?;
        let batch = x.rows();
        if upstream.rows() != batch || upstream.shape()[1..] != out_shape[..] {
            return Err(config_err!(
                "upstream gradient {:?} does not match layer output [{batch}, {:?}]",
                upstream.shape(),
                out_shape
            ));
        }
        let g = upstream.data();
        match self.spec {
            LayerSpec::Dense { inputs, outputs } => {
                let w = self.params[0].data();
                let mut dw = vec![T::zero(); outputs * inputs];
                let mut db = vec![T::zero(); outputs];
                let mut dx = vec![T::zero(); batch * inputs];
                for r in 0..batch {
                    let xr = x.row(r);
                    let gr = &g[r * outputs..(r + 1) * outputs];
                    let dxr = &mut dx[r * inputs..(r + 1) * inputs];
                    for o in 0..outputs {
                        let go = gr[o];
                        db[o] = db[o] + go;
                        let wr = &w[o * inputs..(o + 1) * inputs];
                        let dwr = &mut dw[o * inputs..(o + 1) * inputs];
                        for i in 0..inputs {
                            dwr[i] = dwr[i] + go * xr[i];
                            dxr[i] = dxr[i] + go * wr[i];
                        }
                    }
                }
                Ok((
                    vec![Tensor::new(vec![outputs, inputs], dw)?, Tensor::new(vec![outputs], db)?],
                    Tensor::new(x.shape().to_vec(), dx)?,
                ))
            }
            LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, padding } => {
                let (h, w) = (x.shape()[2], x.shape()[3]);
                let (oh, ow) = (out_shape[1], out_shape[2]);
                let wt = self.params[0].data();
                let mut dw = vec![T::zero(); wt.len()];
                let mut db = vec![T::zero(); out_channels];
                let mut dx = vec![T::zero(); x.len()];
                let per_sample = in_channels * h * w;
                for n in 0..batch {
                    let xin = x.row(n);
                    let dxn = &mut dx[n * per_sample..(n + 1) * per_sample];
                    for o in 0..out_channels {
                        for oy in 0..oh {
                            for ox in 0..ow {
                                let go = g[((n * out_channels + o) * oh + oy) * ow + ox];
                                db[o] = db[o] + go;
                                for c in 0..in_channels {
                                    for ky in 0..kernel {
                                        let iy = (oy * stride + ky) as isize - padding as isize;
                                        if iy < 0 || iy >= h as isize {
                                            continue;
                                        }
                                        for kx in 0..kernel {
                                            let ix = (ox * stride + kx) as isize - padding as isize;
                                            if ix < 0 || ix >= w as isize {
                                                continue;
                                            }
                                            let wi = ((o * in_channels + c) * kernel + ky) * kernel + kx;
                                            let xi = (c * h + iy as usize) * w + ix as usize;
                                            dw[wi] = dw[wi] + go * xin[xi];
                                            dxn[xi] = dxn[xi] + go * wt[wi];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                Ok((
                    vec![Tensor::new(self.params[0].shape().to_vec(), dw)?, Tensor::new(vec![out_channels], db)?],
                    Tensor::new(x.shape().to_vec(), dx)?,
                ))
            }
            LayerSpec::Relu => {
                let dx = x.data().iter().zip(g).map(|(&xv, &gv)| if xv > T::zero() { gv } else { T::zero() }).collect();
                Ok((Vec::new(), Tensor::new(x.shape().to_vec(), dx)?))
            }
            LayerSpec::Flatten | LayerSpec::SoftmaxXentHead { .. } => {
                Ok((Vec::new(), Tensor::new(x.shape().to_vec(), g.to_vec())?))
            }
        }
    }
}
