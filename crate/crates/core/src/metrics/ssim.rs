//! Structural similarity with a Gaussian window.
//!
//! Local means, variances and covariance are Gaussian-weighted over every
//! fully contained window position ("valid" region). The per-position index
//! is averaged over positions, then over channels and batch items.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range of the pixel values.
    pub range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        SsimConfig { window: 11, sigma: 1.5, k1: 0.01, k2: 0.03, range: 1.0 }
    }
}

impl SsimConfig {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.range).powi(2)
    }
}

/// Normalised `size × size` Gaussian weights, row-major.
pub fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let center = (size as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - center;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = g.iter().sum();
    let g: Vec<f64> = g.into_iter().map(|v| v / total).collect();
    let mut out = Vec::with_capacity(size * size);
    for &a in &g {
        for &b in &g {
            out.push(a * b);
        }
    }
    out
}

fn check_size(shape: Shape, window: usize) -> Result<()> {
    if shape.h < window || shape.w < window {
        return Err(Error::shape(format!(
            "ssim: image {}x{} is smaller than the {window}x{window} window",
            shape.h, shape.w
        )));
    }
    Ok(())
}

/// Mean SSIM of two equally shaped images.
pub fn ssim(x: &Tensor, y: &Tensor, cfg: &SsimConfig) -> Result<f64> {
    x.expect_same_shape(y, "ssim")?;
    let s = x.shape();
    check_size(s, cfg.window)?;
    let win = gaussian_window(cfg.window, cfg.sigma);
    let (c1, c2) = (cfg.c1(), cfg.c2());
    let (oh, ow) = (s.h - cfg.window + 1, s.w - cfg.window + 1);
    let mut total = 0.0f64;
    for plane in 0..s.n * s.c {
        let xp = &x.data()[plane * s.plane()..(plane + 1) * s.plane()];
        let yp = &y.data()[plane * s.plane()..(plane + 1) * s.plane()];
        let mut plane_sum = 0.0f64;
        for oy in 0..oh {
            for ox in 0..ow {
                let (mut mx, mut my, mut mxx, mut myy, mut mxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for ky in 0..cfg.window {
                    for kx in 0..cfg.window {
                        let w = win[ky * cfg.window + kx];
                        let i = (oy + ky) * s.w + ox + kx;
                        let (a, b) = (xp[i] as f64, yp[i] as f64);
                        mx += w * a;
                        my += w * b;
                        mxx += w * (a * a);
                        myy += w * (b * b);
                        mxy += w * (a * b);
                    }
                }
                let vx = mxx - mx * mx;
                let vy = myy - my * my;
                let cov = mxy - mx * my;
                let num = (2.0 * (mx * my) + c1) * (2.0 * cov + c2);
                let den = ((mx * mx) + (my * my) + c1) * (vx + vy + c2);
                plane_sum += num / den;
            }
        }
        total += plane_sum / (oh * ow) as f64;
    }
    Ok(total / (s.n * s.c) as f64)
}

/// Record the SSIM of `x` and `y` on `tape`; returns a scalar var.
///
/// Local statistics are Gaussian-filtered with a fixed depthwise convolution,
/// so gradients flow to whichever of `x`, `y` are tracked.
pub fn ssim_on_tape(tape: &mut Tape, x: Var, y: Var, cfg: &SsimConfig) -> Result<Var> {
    let s = tape.shape(x);
    if s != tape.shape(y) {
        return Err(Error::shape(format!("ssim: operand shapes {s} and {} differ", tape.shape(y))));
    }
    check_size(s, cfg.window)?;
    let flat = Shape::new(s.n * s.c, 1, s.h, s.w);
    let win: Vec<f32> = gaussian_window(cfg.window, cfg.sigma).into_iter().map(|v| v as f32).collect();
    let win = tape.constant(Tensor::new(Shape::new(1, 1, cfg.window, cfg.window), win)?);

    let x = tape.reshape(x, flat)?;
    let y = tape.reshape(y, flat)?;
    let xx = tape.square(x);
    let yy = tape.square(y);
    let xy = tape.mul(x, y)?;

    let mx = tape.conv2d(x, win, None, 1, 0)?;
    let my = tape.conv2d(y, win, None, 1, 0)?;
    let mxx = tape.conv2d(xx, win, None, 1, 0)?;
    let myy = tape.conv2d(yy, win, None, 1, 0)?;
    let mxy = tape.conv2d(xy, win, None, 1, 0)?;

    let mx2 = tape.square(mx);
    let my2 = tape.square(my);
    let mxmy = tape.mul(mx, my)?;
    let vx = tape.sub(mxx, mx2)?;
    let vy = tape.sub(myy, my2)?;
    let cov = tape.sub(mxy, mxmy)?;

    let (c1, c2) = (cfg.c1() as f32, cfg.c2() as f32);
    let lum_num = tape.scale(mxmy, 2.0);
    let lum_num = tape.offset(lum_num, c1);
    let cs_num = tape.scale(cov, 2.0);
    let cs_num = tape.offset(cs_num, c2);
    let num = tape.mul(lum_num, cs_num)?;

    let lum_den = tape.add(mx2, my2)?;
    let lum_den = tape.offset(lum_den, c1);
    let cs_den = tape.add(vx, vy)?;
    let cs_den = tape.offset(cs_den, c2);
    let den = tape.mul(lum_den, cs_den)?;

    let map = tape.div(num, den)?;
    Ok(tape.mean(map))
}
