//! Independent reference implementations for the integration tests.
//!
//! Everything here works on plain `f64` slices and shares no code with the
//! library, so agreement between the two is evidence rather than tautology.

#![allow(dead_code)]

pub mod expr;

use dehaze_adv::metrics::{ssim_on_tape, SsimConfig};
use dehaze_adv::{Shape, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: Shape, lo: f32, hi: f32) -> Tensor {
    Tensor::from_fn(shape, |_| rng.gen_range(lo..hi))
}

pub fn to_f64(t: &Tensor) -> Vec<f64> {
    t.data().iter().map(|&v| v as f64).collect()
}

/// Direct seven-loop convolution with zero padding.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_brute(
    x: &[f64],
    xs: Shape,
    w: &[f64],
    ws: Shape,
    bias: Option<&[f64]>,
    stride: usize,
    pad: usize,
) -> (Vec<f64>, Shape) {
    let oh = (xs.h + 2 * pad - ws.h) / stride + 1;
    let ow = (xs.w + 2 * pad - ws.w) / stride + 1;
    let os = Shape::new(xs.n, ws.n, oh, ow);
    let mut out = vec![0.0; os.numel()];
    for n in 0..xs.n {
        for o in 0..ws.n {
            for y in 0..oh {
                for x_ in 0..ow {
                    let mut acc = bias.map_or(0.0, |b| b[o]);
                    for c in 0..xs.c {
                        for ky in 0..ws.h {
                            for kx in 0..ws.w {
                                let iy = (y * stride + ky) as isize - pad as isize;
                                let ix = (x_ * stride + kx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= xs.h as isize || ix >= xs.w as isize {
                                    continue;
                                }
                                let xi = ((n * xs.c + c) * xs.h + iy as usize) * xs.w + ix as usize;
                                let wi = ((o * ws.c + c) * ws.h + ky) * ws.w + kx;
                                acc += x[xi] * w[wi];
                            }
                        }
                    }
                    out[((n * os.c + o) * oh + y) * ow + x_] = acc;
                }
            }
        }
    }
    (out, os)
}

/// Channel concatenation of `(N, C_i, H, W)` blocks.
pub fn concat_channels(parts: &[(&[f64], Shape)]) -> (Vec<f64>, Shape) {
    let s0 = parts[0].1;
    let c: usize = parts.iter().map(|p| p.1.c).sum();
    let os = Shape::new(s0.n, c, s0.h, s0.w);
    let mut out = Vec::with_capacity(os.numel());
    for n in 0..s0.n {
        for (data, s) in parts {
            let block = s.c * s.plane();
            out.extend_from_slice(&data[n * block..(n + 1) * block]);
        }
    }
    (out, os)
}

/// Central differences of `f` at `x`, every element in turn.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let fp = f(&probe);
            probe[i] = x[i] - h;
            let fm = f(&probe);
            probe[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Elementwise relative error with a floor of 1% of the largest reference
/// magnitude, so entries that are nearly zero are judged on absolute terms.
pub fn max_rel_err(got: &[f32], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-2 * scale.max(1e-12);
    got.iter()
        .zip(want)
        .map(|(&g, &w)| (g as f64 - w).abs() / (g as f64).abs().max(w.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Normalised `size × size` Gaussian window.
pub fn gauss2d(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size - 1) as f64 / 2.0;
    let mut w: Vec<f64> = (0..size * size)
        .map(|i| {
            let (y, x) = ((i / size) as f64 - c, (i % size) as f64 - c);
            (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Mean SSIM over valid 11×11 Gaussian windows (σ = 1.5, C1 = 0.01², C2 = 0.03²),
/// averaged per plane and then over planes.
pub fn ssim_ref(x: &[f64], y: &[f64], s: Shape) -> f64 {
    const K: usize = 11;
    let w = gauss2d(K, 1.5);
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let (oh, ow) = (s.h - K + 1, s.w - K + 1);
    let mut total = 0.0;
    for p in 0..s.n * s.c {
        let off = p * s.plane();
        let mut acc = 0.0;
        for oy in 0..oh {
            for ox in 0..ow {
                let (mut mx, mut my) = (0.0, 0.0);
                for ky in 0..K {
                    for kx in 0..K {
                        let i = off + (oy + ky) * s.w + ox + kx;
                        mx += w[ky * K + kx] * x[i];
                        my += w[ky * K + kx] * y[i];
                    }
                }
                let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
                for ky in 0..K {
                    for kx in 0..K {
                        let i = off + (oy + ky) * s.w + ox + kx;
                        let (dx, dy) = (x[i] - mx, y[i] - my);
                        vx += w[ky * K + kx] * dx * dx;
                        vy += w[ky * K + kx] * dy * dy;
                        cxy += w[ky * K + kx] * dx * dy;
                    }
                }
                acc += (2.0 * mx * my + c1) * (2.0 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            }
        }
        total += acc / (oh * ow) as f64;
    }
    total / (s.n * s.c) as f64
}

/// Mean of `(a - b)²`, walking rows and then columns of `width`-wide rows.
pub fn mse_ref(a: &[f64], b: &[f64], width: usize) -> f64 {
    let rows = a.len() / width;
    let mut sum = 0.0;
    for r in 0..rows {
        for c in 0..width {
            let d = a[r * width + c] - b[r * width + c];
            sum += d * d;
        }
    }
    sum / (rows * width) as f64
}

pub fn psnr_ref(a: &[f64], b: &[f64], width: usize) -> f64 {
    10.0 * (1.0 / mse_ref(a, b, width)).log10()
}

/// Forward pass of the dehazing network: five 3×3 convolutions with dense
/// skip concatenations and the `K·I − K + 1` output head.
pub fn dehaze_ref(layers: &[(Vec<f64>, Shape, Vec<f64>)], input: &[f64], s: Shape) -> Vec<f64> {
    let conv = |l: usize, x: &[f64], xs: Shape| {
        let (w, ws, b) = &layers[l];
        conv2d_brute(x, xs, w, *ws, Some(b), 1, 1)
    };
    let relu = |(v, s): (Vec<f64>, Shape)| (v.into_iter().map(|a| a.max(0.0)).collect::<Vec<_>>(), s);
    let (x1, s1) = relu(conv(0, input, s));
    let (x2, s2) = relu(conv(1, &x1, s1));
    let (c, cs) = concat_channels(&[(&x1, s1), (&x2, s2)]);
    let (x3, s3) = relu(conv(2, &c, cs));
    let (c, cs) = concat_channels(&[(&x2, s2), (&x3, s3)]);
    let (x4, s4) = relu(conv(3, &c, cs));
    let (c, cs) = concat_channels(&[(&x1, s1), (&x3, s3), (&x4, s4)]);
    let (k, _) = conv(4, &c, cs);
    k.iter().zip(input).map(|(k, i)| k * i - k + 1.0).collect()
}

/// Kolmogorov distribution tail `P(K > λ)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-1.0f64).powi(k - 1) * (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-15 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// One-sample KS test of `samples` against `U(lo, hi)`; returns the p-value.
pub fn ks_uniform_p(mut samples: Vec<f64>, lo: f64, hi: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &v) in samples.iter().enumerate() {
        let cdf = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
        d = d.max((i as f64 + 1.0) / n - cdf).max(cdf - i as f64 / n);
    }
    let sq = n.sqrt();
    kolmogorov_tail((sq + 0.12 + 0.11 / sq) * d)
}

/// Pearson correlation coefficient.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Largest absolute deviation of the tape's conv2d from [`conv2d_brute`].
pub fn conv_error(rng: &mut ChaCha8Rng, xs: Shape, ws: Shape, stride: usize, pad: usize) -> f64 {
    let x = random_tensor(rng, xs, -1.0, 1.0);
    let w = random_tensor(rng, ws, -1.0, 1.0);
    let b = random_tensor(rng, Shape::new(1, 1, 1, ws.n), -1.0, 1.0);
    let mut tape = Tape::new();
    let (xv, wv) = (tape.constant(x.clone()), tape.constant(w.clone()));
    let bv = tape.constant(b.clone().reshape(Shape::new(ws.n, 1, 1, 1)).unwrap());
    let out = tape.conv2d(xv, wv, Some(bv), stride, pad).unwrap();
    let (want, os) = conv2d_brute(&to_f64(&x), xs, &to_f64(&w), ws, Some(&to_f64(&b)), stride, pad);
    assert_eq!(tape.shape(out), os, "output shape for input {xs}, weight {ws}, stride {stride}, pad {pad}");
    tape.value(out).data().iter().zip(&want).map(|(&g, w)| (g as f64 - w).abs()).fold(0.0, f64::max)
}

/// A conv2d check on a random geometry; returns the error and a description.
pub fn random_conv_case(rng: &mut ChaCha8Rng) -> (f64, String) {
    let (kh, kw): (usize, usize) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
    let pad = rng.gen_range(0..=2);
    let stride = rng.gen_range(1..=3);
    let h = rng.gen_range(kh.saturating_sub(2 * pad).max(1)..=12);
    let w = rng.gen_range(kw.saturating_sub(2 * pad).max(1)..=12);
    let xs = Shape::new(rng.gen_range(1..=3), rng.gen_range(1..=4), h, w);
    let ws = Shape::new(rng.gen_range(1..=5), xs.c, kh, kw);
    (conv_error(rng, xs, ws, stride, pad), format!("input {xs}, weight {ws}, stride {stride}, pad {pad}"))
}

/// Relative error of the on-tape SSIM gradient against central differences
/// of [`ssim_ref`], for one random 16×16 pair.
pub fn ssim_gradient_error(rng: &mut ChaCha8Rng) -> f64 {
    let s = Shape::new(1, 1, 16, 16);
    let x = random_tensor(rng, s, 0.1, 0.9);
    let y = x.zip_map(&random_tensor(rng, s, -0.3, 0.3), |a, n| (a + n).clamp(0.0, 1.0)).unwrap();

    let mut tape = Tape::new();
    let xv = tape.param(x.clone());
    let yv = tape.constant(y.clone());
    let loss = ssim_on_tape(&mut tape, xv, yv, &SsimConfig::default()).unwrap();
    let grads = tape.backward(loss).unwrap();

    let yd = to_f64(&y);
    let fd = central_diff(|p| ssim_ref(p, &yd, s), &to_f64(&x), 1e-3);
    max_rel_err(grads.get(xv).unwrap().data(), &fd)
}

/// MSCN coefficients of the channel-mean grey image over fully contained
/// 7×7 Gaussian windows (σ = 7/6), `C = 1/255`.
pub fn mscn_ref(img: &Tensor) -> Vec<f64> {
    let s = img.shape();
    let d = to_f64(img);
    let gray: Vec<f64> = (0..s.plane()).map(|i| (0..s.c).map(|c| d[c * s.plane() + i]).sum::<f64>() / s.c as f64).collect();
    let win = gauss2d(7, 7.0 / 6.0);
    let mut out = Vec::new();
    for y in 0..s.h - 6 {
        for x in 0..s.w - 6 {
            let at = |k: usize| gray[(y + k / 7) * s.w + x + k % 7];
            let mu: f64 = (0..49).map(|k| win[k] * at(k)).sum();
            let var: f64 = (0..49).map(|k| win[k] * (at(k) - mu).powi(2)).sum();
            out.push((gray[(y + 3) * s.w + x + 3] - mu) / (var.sqrt() + 1.0 / 255.0));
        }
    }
    out
}

pub const HIST_BINS: usize = 101;

/// Normalised 101-bin histogram over `[-3, 3]`; outliers land in the end bins.
pub fn histogram_ref(coeffs: &[f64]) -> Vec<f64> {
    let width = 6.0 / HIST_BINS as f64;
    let mut mass = vec![0.0; HIST_BINS];
    for &c in coeffs {
        let bin = (((c + 3.0) / width).floor().max(0.0) as usize).min(HIST_BINS - 1);
        mass[bin] += 1.0 / coeffs.len() as f64;
    }
    mass
}

/// Equal-weight average of per-image MSCN histograms.
pub fn pooled_histogram_ref<'a>(images: impl IntoIterator<Item = &'a Tensor>) -> Vec<f64> {
    let hists: Vec<Vec<f64>> = images.into_iter().map(|t| histogram_ref(&mscn_ref(t))).collect();
    (0..HIST_BINS).map(|b| hists.iter().map(|h| h[b]).sum::<f64>() / hists.len() as f64).collect()
}

/// Index of the first maximal bin.
pub fn peak_bin(mass: &[f64]) -> usize {
    mass.iter().enumerate().fold(0, |best, (i, &m)| if m > mass[best] { i } else { best })
}

/// Non-decreasing up to the peak and non-increasing after it.
pub fn is_unimodal(mass: &[f64]) -> bool {
    let p = peak_bin(mass);
    mass[..=p].windows(2).all(|w| w[1] >= w[0]) && mass[p..].windows(2).all(|w| w[1] <= w[0])
}
