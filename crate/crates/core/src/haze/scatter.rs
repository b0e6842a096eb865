//! Homogeneous atmospheric scattering: `I = J·t + A·(1 − t)`, `t = exp(−β·d)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazeParams {
    /// Scattering coefficient per unit depth.
    pub beta: f32,
    /// Atmospheric light per channel.
    pub airlight: [f32; 3],
}

impl HazeParams {
    pub fn new(beta: f32, airlight: f32) -> Self {
        HazeParams { beta, airlight: [airlight; 3] }
    }

    pub fn validate(&self) -> Result<()> {
        // β = 0 is the haze-free limit and is accepted.
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::config(format!("scattering coefficient must be finite and non-negative, got {}", self.beta)));
        }
        if self.airlight.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::config(format!("airlight {:?} must lie in [0, 1]", self.airlight)));
        }
        Ok(())
    }
}

pub fn transmission(beta: f32, depth: f32) -> f32 {
    (-(beta * depth)).exp()
}

/// Apply haze to a clear image `(1, 3, H, W)` with depth `(1, 1, H, W)`.
pub fn apply_haze(clear: &Tensor, depth: &Tensor, params: &HazeParams) -> Result<Tensor> {
    params.validate()?;
    let (cs, ds) = (clear.shape(), depth.shape());
    if cs.c != 3 || ds.c != 1 || (cs.n, cs.h, cs.w) != (ds.n, ds.h, ds.w) {
        return Err(Error::shape(format!("apply_haze: clear image {cs} does not match depth map {ds}")));
    }
    if depth.data().iter().any(|d| !(*d >= 0.0)) {
        return Err(Error::config("depth values must be non-negative"));
    }
    let plane = cs.plane();
    let mut out = clear.clone();
    for n in 0..cs.n {
        let d = &depth.data()[n * plane..(n + 1) * plane];
        for c in 0..3 {
            let a = params.airlight[c];
            let base = (n * 3 + c) * plane;
            for (v, &dv) in out.data_mut()[base..base + plane].iter_mut().zip(d) {
                let t = transmission(params.beta, dv);
                *v = *v * t + a * (1.0 - t);
            }
        }
    }
    Ok(out)
}
