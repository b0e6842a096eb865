//! Image quality metrics.
//!
//! All inputs are `[0, 1]` images; `psnr` uses a peak of 1.

mod mscn;
mod report;
mod ssim;

pub use mscn::{mscn, mscn_histogram, pooled_histogram, Histogram, MSCN_BINS, MSCN_RANGE};
pub use report::{ImageRecord, MetricsReport, Summary};
pub use ssim::{gaussian_window, ssim, ssim_on_tape, SsimConfig};

use crate::error::Result;
use crate::tensor::Tensor;

/// PSNR reported when the MSE is below [`MSE_FLOOR`].
pub const PSNR_CAP_DB: f64 = 100.0;
pub const MSE_FLOOR: f64 = 1e-10;

/// Mean over all elements of `(x − y)²`.
pub fn mse(x: &Tensor, y: &Tensor) -> Result<f64> {
    x.expect_same_shape(y, "mse")?;
    let sum = x.data().iter().zip(y.data()).fold(0.0f64, |acc, (&a, &b)| {
        let d = a as f64 - b as f64;
        acc + d * d
    });
    Ok(sum / x.len() as f64)
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse < MSE_FLOOR {
        PSNR_CAP_DB
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

pub fn psnr(x: &Tensor, y: &Tensor) -> Result<f64> {
    Ok(psnr_from_mse(mse(x, y)?))
}
