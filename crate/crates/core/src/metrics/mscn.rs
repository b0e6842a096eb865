//! Mean-subtracted contrast-normalised (MSCN) coefficients.
//!
//! The image is reduced to grey by channel mean, then each valid position of
//! a 7×7 Gaussian window (σ = 7/6) yields `(g − μ) / (σ + C)` with
//! `C = 1/255`.

use serde::{Deserialize, Serialize};

use super::ssim::gaussian_window;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MSCN_WINDOW: usize = 7;
pub const MSCN_SIGMA: f64 = 7.0 / 6.0;
pub const MSCN_C: f64 = 1.0 / 255.0;
pub const MSCN_BINS: usize = 101;
pub const MSCN_RANGE: (f64, f64) = (-3.0, 3.0);

/// MSCN field of batch item 0, row-major over the valid region.
pub fn mscn(image: &Tensor) -> Result<(usize, usize, Vec<f64>)> {
    let s = image.shape();
    if s.h < MSCN_WINDOW || s.w < MSCN_WINDOW {
        return Err(Error::shape(format!(
            "mscn: image {}x{} is smaller than the {MSCN_WINDOW}x{MSCN_WINDOW} window",
            s.h, s.w
        )));
    }
    let mut grey = vec![0.0f64; s.plane()];
    for c in 0..s.c {
        let plane = &image.data()[c * s.plane()..(c + 1) * s.plane()];
        for (g, &v) in grey.iter_mut().zip(plane) {
            *g += v as f64;
        }
    }
    for g in &mut grey {
        *g /= s.c as f64;
    }

    let win = gaussian_window(MSCN_WINDOW, MSCN_SIGMA);
    let half = MSCN_WINDOW / 2;
    let (oh, ow) = (s.h - MSCN_WINDOW + 1, s.w - MSCN_WINDOW + 1);
    let mut out = Vec::with_capacity(oh * ow);
    for oy in 0..oh {
        for ox in 0..ow {
            let (mut mu, mut m2) = (0.0, 0.0);
            for ky in 0..MSCN_WINDOW {
                for kx in 0..MSCN_WINDOW {
                    let w = win[ky * MSCN_WINDOW + kx];
                    let v = grey[(oy + ky) * s.w + ox + kx];
                    mu += w * v;
                    m2 += w * v * v;
                }
            }
            let sigma = (m2 - mu * mu).abs().sqrt();
            let centre = grey[(oy + half) * s.w + ox + half];
            out.push((centre - mu) / (sigma + MSCN_C));
        }
    }
    Ok((oh, ow, out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub centers: Vec<f64>,
    pub mass: Vec<f64>,
}

impl Histogram {
    pub fn empty() -> Self {
        let (lo, hi) = MSCN_RANGE;
        let width = (hi - lo) / MSCN_BINS as f64;
        Histogram {
            centers: (0..MSCN_BINS).map(|i| lo + (i as f64 + 0.5) * width).collect(),
            mass: vec![0.0; MSCN_BINS],
        }
    }

    /// Index of the zero-centred bin.
    pub fn zero_bin() -> usize {
        MSCN_BINS / 2
    }

    pub fn peak_bin(&self) -> usize {
        let mut best = 0;
        for (i, &m) in self.mass.iter().enumerate() {
            if m > self.mass[best] {
                best = i;
            }
        }
        best
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// True when the mass rises to a single maximum and falls after it,
    /// ignoring wiggles smaller than `tolerance`.
    pub fn is_unimodal(&self, tolerance: f64) -> bool {
        let peak = self.peak_bin();
        let rising = self.mass[..=peak].windows(2).all(|w| w[1] + tolerance >= w[0]);
        let falling = self.mass[peak..].windows(2).all(|w| w[1] <= w[0] + tolerance);
        rising && falling
    }

    /// Pool several histograms with equal weight.
    pub fn average(hists: &[Histogram]) -> Histogram {
        let mut out = Histogram::empty();
        if hists.is_empty() {
            return out;
        }
        for h in hists {
            for (o, &m) in out.mass.iter_mut().zip(&h.mass) {
                *o += m;
            }
        }
        for o in &mut out.mass {
            *o /= hists.len() as f64;
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_center,mass\n");
        for (c, m) in self.centers.iter().zip(&self.mass) {
            s.push_str(&format!("{c:.6},{m:.9}\n"));
        }
        s
    }
}

/// Normalised histogram of coefficients; values outside the range land in
/// the end bins.
pub fn mscn_histogram(coeffs: &[f64]) -> Histogram {
    let mut h = Histogram::empty();
    if coeffs.is_empty() {
        return h;
    }
    let (lo, hi) = MSCN_RANGE;
    let width = (hi - lo) / MSCN_BINS as f64;
    let mut counts = vec![0u64; MSCN_BINS];
    for &v in coeffs {
        let idx = ((v - lo) / width).floor();
        let idx = if idx.is_nan() { MSCN_BINS / 2 } else { idx.clamp(0.0, (MSCN_BINS - 1) as f64) as usize };
        counts[idx] += 1;
    }
    let total = coeffs.len() as f64;
    for (m, c) in h.mass.iter_mut().zip(counts) {
        *m = c as f64 / total;
    }
    h
}

/// Equal-weight average of the per-image MSCN histograms.
pub fn pooled_histogram<'a>(images: impl IntoIterator<Item = &'a Tensor>) -> Result<Histogram> {
    let hists = images
        .into_iter()
        .map(|img| Ok(mscn_histogram(&mscn(img)?.2)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Histogram::average(&hists))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;
    use rand::Rng;

    #[test]
    fn constant_image_is_a_point_mass_at_zero() {
        let img = Tensor::full(Shape::new(1, 3, 16, 16), 0.42);
        let (_, _, c) = mscn(&img).unwrap();
        assert!(c.iter().all(|&v| v.abs() < 1e-9));
        let h = mscn_histogram(&c);
        assert_eq!(h.mass[Histogram::zero_bin()], 1.0);
        assert!(h.centers[Histogram::zero_bin()].abs() < 1e-12);
    }

    #[test]
    fn white_noise_is_unimodal_near_zero() {
        let mut rng = crate::rng::seeded(11);
        let img = Tensor::from_fn(Shape::new(1, 3, 64, 64), |_| rng.gen::<f32>());
        let (_, _, c) = mscn(&img).unwrap();
        let h = mscn_histogram(&c);
        let peak = h.centers[h.peak_bin()];
        assert!((-0.3..=0.3).contains(&peak), "peak at {peak}");
        assert!((h.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mass_is_normalised_for_any_input() {
        let mut rng = crate::rng::seeded(3);
        for _ in 0..20 {
            let img = Tensor::from_fn(Shape::new(1, 3, 12, 9), |_| rng.gen::<f32>().powi(3));
            let (_, _, c) = mscn(&img).unwrap();
            assert!((mscn_histogram(&c).total() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_small_images() {
        assert!(mscn(&Tensor::zeros(Shape::new(1, 3, 6, 20))).is_err());
    }
}
