//! Convolution kernels.
//!
//! Inputs are copied into zero-padded `f64` planes once per call. Each output
//! element accumulates its terms in `(in_channel, ky, kx)` order; weight
//! gradients accumulate in `(batch, oy, ox)` order. Neither order depends on
//! anything but the shapes.

use super::Shape;
use crate::error::{Error, Result};

pub fn conv2d_output_dim(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    if stride == 0 || kernel == 0 || kernel > padded {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeometry {
    pub input: Shape,
    pub weight: Shape,
    pub output: Shape,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn new(input: Shape, weight: Shape, bias: Option<Shape>, stride: usize, padding: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::shape("conv2d: stride must be positive"));
        }
        if input.c != weight.c {
            return Err(Error::shape(format!(
                "conv2d: input has {} channels but weight {} expects {}",
                input.c, weight, weight.c
            )));
        }
        if let Some(b) = bias {
            if b.numel() != weight.n {
                return Err(Error::shape(format!(
                    "conv2d: bias {b} has {} elements, expected {} (one per output channel)",
                    b.numel(),
                    weight.n
                )));
            }
        }
        let oh = conv2d_output_dim(input.h, weight.h, stride, padding);
        let ow = conv2d_output_dim(input.w, weight.w, stride, padding);
        let (Some(oh), Some(ow)) = (oh, ow) else {
            return Err(Error::shape(format!(
                "conv2d: kernel {}x{} larger than padded input {}x{}",
                weight.h,
                weight.w,
                input.h + 2 * padding,
                input.w + 2 * padding
            )));
        };
        Ok(ConvGeometry {
            input,
            weight,
            output: Shape::new(input.n, weight.n, oh, ow),
            stride,
            padding,
        })
    }

    fn padded_h(&self) -> usize {
        self.input.h + 2 * self.padding
    }

    fn padded_w(&self) -> usize {
        self.input.w + 2 * self.padding
    }

    /// Zero-padded `f64` copy of every `(n, c)` plane of the input.
    fn pad_input(&self, input: &[f32]) -> Vec<f64> {
        let (ph, pw, p) = (self.padded_h(), self.padded_w(), self.padding);
        let s = self.input;
        let mut out = vec![0.0f64; s.n * s.c * ph * pw];
        for plane in 0..s.n * s.c {
            let src = &input[plane * s.h * s.w..(plane + 1) * s.h * s.w];
            let dst = &mut out[plane * ph * pw..(plane + 1) * ph * pw];
            for y in 0..s.h {
                let row = &src[y * s.w..(y + 1) * s.w];
                let drow = &mut dst[(y + p) * pw + p..(y + p) * pw + p + s.w];
                for (d, &v) in drow.iter_mut().zip(row) {
                    *d = v as f64;
                }
            }
        }
        out
    }
}

pub(crate) fn forward(g: &ConvGeometry, input: &[f32], weight: &[f32], bias: Option<&[f32]>) -> Vec<f32> {
    let padded = g.pad_input(input);
    let (ph, pw) = (g.padded_h(), g.padded_w());
    let (o, wt, s) = (g.output, g.weight, g.stride);
    let mut out = vec![0.0f32; o.numel()];
    let mut acc = vec![0.0f64; o.h * o.w];
    for n in 0..o.n {
        for oc in 0..o.c {
            acc.fill(bias.map_or(0.0, |b| b[oc] as f64));
            for ic in 0..wt.c {
                let plane = &padded[(n * wt.c + ic) * ph * pw..(n * wt.c + ic + 1) * ph * pw];
                for ky in 0..wt.h {
                    for kx in 0..wt.w {
                        let w = weight[wt.index(oc, ic, ky, kx)] as f64;
                        for oy in 0..o.h {
                            let row = &plane[(oy * s + ky) * pw + kx..];
                            let arow = &mut acc[oy * o.w..(oy + 1) * o.w];
                            if s == 1 {
                                for (a, &v) in arow.iter_mut().zip(&row[..o.w]) {
                                    *a += w * v;
                                }
                            } else {
                                for (ox, a) in arow.iter_mut().enumerate() {
                                    *a += w * row[ox * s];
                                }
                            }
                        }
                    }
                }
            }
            let base = o.index(n, oc, 0, 0);
            for (dst, &a) in out[base..base + o.h * o.w].iter_mut().zip(&acc) {
                *dst = a as f32;
            }
        }
    }
    out
}

pub(crate) fn backward_input(g: &ConvGeometry, grad_out: &[f32], weight: &[f32]) -> Vec<f32> {
    let (ph, pw, p) = (g.padded_h(), g.padded_w(), g.padding);
    let (i, o, wt, s) = (g.input, g.output, g.weight, g.stride);
    let mut out = vec![0.0f32; i.numel()];
    let mut acc = vec![0.0f64; ph * pw];
    let gout: Vec<f64> = grad_out.iter().map(|&v| v as f64).collect();
    for n in 0..i.n {
        for ic in 0..i.c {
            acc.fill(0.0);
            for oc in 0..o.c {
                let gplane = &gout[o.index(n, oc, 0, 0)..o.index(n, oc, 0, 0) + o.h * o.w];
                for ky in 0..wt.h {
                    for kx in 0..wt.w {
                        let w = weight[wt.index(oc, ic, ky, kx)] as f64;
                        for oy in 0..o.h {
                            let grow = &gplane[oy * o.w..(oy + 1) * o.w];
                            let arow = &mut acc[(oy * s + ky) * pw + kx..];
                            if s == 1 {
                                for (a, &gv) in arow[..o.w].iter_mut().zip(grow) {
                                    *a += w * gv;
                                }
                            } else {
                                for (ox, &gv) in grow.iter().enumerate() {
                                    arow[ox * s] += w * gv;
                                }
                            }
                        }
                    }
                }
            }
            let base = i.index(n, ic, 0, 0);
            for y in 0..i.h {
                let src = &acc[(y + p) * pw + p..(y + p) * pw + p + i.w];
                for (dst, &a) in out[base + y * i.w..base + (y + 1) * i.w].iter_mut().zip(src) {
                    *dst = a as f32;
                }
            }
        }
    }
    debug_assert_eq!(acc.len(), ph * pw);
    out
}

pub(crate) fn backward_weight(g: &ConvGeometry, grad_out: &[f32], input: &[f32]) -> Vec<f32> {
    let padded = g.pad_input(input);
    let (ph, pw) = (g.padded_h(), g.padded_w());
    let (o, wt, s) = (g.output, g.weight, g.stride);
    let taps = wt.h * wt.w;
    let mut acc = vec![0.0f64; wt.numel()];
    let mut offsets = Vec::with_capacity(taps);
    for ky in 0..wt.h {
        for kx in 0..wt.w {
            offsets.push(ky * pw + kx);
        }
    }
    for oc in 0..o.c {
        for ic in 0..wt.c {
            let a = &mut acc[wt.index(oc, ic, 0, 0)..wt.index(oc, ic, 0, 0) + taps];
            for n in 0..o.n {
                let plane = &padded[(n * wt.c + ic) * ph * pw..(n * wt.c + ic + 1) * ph * pw];
                let gbase = o.index(n, oc, 0, 0);
                for oy in 0..o.h {
                    for ox in 0..o.w {
                        let gv = grad_out[gbase + oy * o.w + ox] as f64;
                        let origin = oy * s * pw + ox * s;
                        for (av, &off) in a.iter_mut().zip(&offsets) {
                            *av += gv * plane[origin + off];
                        }
                    }
                }
            }
        }
    }
    acc.into_iter().map(|v| v as f32).collect()
}

pub(crate) fn backward_bias(g: &ConvGeometry, grad_out: &[f32]) -> Vec<f32> {
    let o = g.output;
    (0..o.c)
        .map(|oc| {
            let mut acc = 0.0f64;
            for n in 0..o.n {
                let base = o.index(n, oc, 0, 0);
                for &v in &grad_out[base..base + o.h * o.w] {
                    acc += v as f64;
                }
            }
            acc as f32
        })
        .collect()
}
