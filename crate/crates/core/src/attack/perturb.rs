use rand::Rng;

use crate::rng;
use crate::tensor::Tensor;

pub fn sign(v: f32) -> f32 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Clip `δ` so that `I + δ` stays inside `[0, 1]`.
fn clip_to_valid_range(delta: f32, pixel: f32) -> f32 {
    delta.clamp(-pixel, 1.0 - pixel)
}

/// Uniform `U(−ε, ε)` draw per element, clipped so `I + δ ∈ [0, 1]`.
pub fn init_delta(hazy: &Tensor, epsilon: f32, seed: u64) -> Tensor {
    if epsilon == 0.0 {
        return Tensor::zeros(hazy.shape());
    }
    let mut rng = rng::seeded(seed);
    let mut delta = Tensor::zeros(hazy.shape());
    for (d, &x) in delta.data_mut().iter_mut().zip(hazy.data()) {
        let u: f32 = rng.gen();
        *d = clip_to_valid_range((2.0 * u - 1.0) * epsilon, x);
    }
    delta
}

/// One projected sign step: `δ + α·sign(g)`, clipped to `[−ε, ε]`, then to
/// `[−I, 1 − I]`.
pub fn pgd_step(delta: &Tensor, grad: &Tensor, alpha: f32, epsilon: f32, hazy: &Tensor) -> Tensor {
    assert_eq!(delta.shape(), grad.shape(), "perturbation and gradient shapes differ");
    assert_eq!(delta.shape(), hazy.shape(), "perturbation and image shapes differ");
    let mut out = delta.clone();
    for ((d, &g), &x) in out.data_mut().iter_mut().zip(grad.data()).zip(hazy.data()) {
        let stepped = *d + alpha * sign(g);
        *d = clip_to_valid_range(stepped.clamp(-epsilon, epsilon), x);
    }
    out
}
