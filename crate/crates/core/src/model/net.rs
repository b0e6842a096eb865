//! A five-layer K-estimation network.
//!
//! ```text
//! x1 = relu(conv1(I))              3 → 8
//! x2 = relu(conv2(x1))             8 → 8
//! x3 = relu(conv3([x1, x2]))      16 → 8
//! x4 = relu(conv4([x2, x3]))      16 → 8
//! K  = conv5([x1, x3, x4])        24 → 3
//! J  = K ⊙ I − K + 1
//! ```
//!
//! All convolutions are 3×3 with unit stride and padding. The output is left
//! unclamped; callers clamp a copy for metrics and export.

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::{self, ImageRecord, SsimConfig};
use crate::rng;
use crate::tensor::{Shape, Tape, Tensor, Var};

pub const IMAGE_CHANNELS: usize = 3;
const KERNEL: usize = 3;
const OUTPUT_BIAS: f32 = 1.0;
const HEAD_SCALE: f32 = 0.1;

/// `(in_channels, out_channels)` per layer.
pub const ARCHITECTURE: [(usize, usize); 5] = [(3, 8), (8, 8), (16, 8), (16, 8), (24, 3)];

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<ConvLayer>,
}

/// Parameters recorded on a tape.
#[derive(Debug, Clone)]
pub struct ParamVars {
    pub layers: Vec<(Var, Var)>,
}

impl ParamVars {
    pub fn iter(&self) -> impl Iterator<Item = Var> + '_ {
        self.layers.iter().flat_map(|&(w, b)| [w, b])
    }
}

impl ModelParams {
    pub fn weight_shape(layer: usize) -> Shape {
        let (i, o) = ARCHITECTURE[layer];
        Shape::new(o, i, KERNEL, KERNEL)
    }

    pub fn bias_shape(layer: usize) -> Shape {
        Shape::new(1, ARCHITECTURE[layer].1, 1, 1)
    }

    pub fn zeros() -> Self {
        let layers = (0..ARCHITECTURE.len())
            .map(|l| ConvLayer {
                weight: Tensor::zeros(Self::weight_shape(l)),
                bias: Tensor::zeros(Self::bias_shape(l)),
            })
            .collect();
        ModelParams { layers }
    }

    /// He-uniform hidden layers; the K head starts near `K = 1`, i.e. near
    /// the identity map `J = I`.
    pub fn init(seed: u64) -> Self {
        let mut rng = rng::substream(seed, "init", 0);
        let last = ARCHITECTURE.len() - 1;
        let layers = (0..ARCHITECTURE.len())
            .map(|l| {
                let ws = Self::weight_shape(l);
                let fan_in = (ws.c * ws.h * ws.w) as f32;
                let mut bound = (6.0 / fan_in).sqrt();
                if l == last {
                    bound *= HEAD_SCALE;
                }
                let weight = Tensor::from_fn(ws, |_| rng.gen_range(-bound..bound));
                let bias = if l == last {
                    Tensor::full(Self::bias_shape(l), OUTPUT_BIAS)
                } else {
                    Tensor::zeros(Self::bias_shape(l))
                };
                ConvLayer { weight, bias }
            })
            .collect();
        ModelParams { layers }
    }

    /// Refuse parameter sets whose layer shapes do not match
    /// [`ARCHITECTURE`], the layout the fingerprint describes.
    pub fn check_architecture(&self) -> Result<()> {
        let ok = self.layers.len() == ARCHITECTURE.len()
            && self.layers.iter().enumerate().all(|(l, layer)| {
                layer.weight.shape() == Self::weight_shape(l) && layer.bias.shape() == Self::bias_shape(l)
            });
        if ok {
            Ok(())
        } else {
            Err(Error::format("parameters do not match the architecture fingerprint"))
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weight.all_finite() && l.bias.all_finite())
    }

    /// Architecture fingerprint: leading 8 bytes of SHA-256 over the layer
    /// specification.
    pub fn fingerprint() -> u64 {
        let mut h = Sha256::new();
        h.update(b"k-head-v1");
        for (i, o) in ARCHITECTURE {
            h.update(format!("conv{KERNEL}x{KERNEL}:{i}->{o};").as_bytes());
        }
        u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
    }

    /// Hex SHA-256 over all parameter bits.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for l in &self.layers {
            for t in [&l.weight, &l.bias] {
                for v in t.data() {
                    h.update(v.to_le_bytes());
                }
            }
        }
        hex::encode(h.finalize())
    }

    pub fn bitwise_eq(&self, other: &ModelParams) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weight.bitwise_eq(&b.weight) && a.bias.bitwise_eq(&b.bias))
    }

    /// Record the parameters on `tape`, as gradient-tracked leaves when
    /// `trainable`, otherwise as constants.
    pub fn record(&self, tape: &mut Tape, trainable: bool) -> ParamVars {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                if trainable {
                    (tape.param(l.weight.clone()), tape.param(l.bias.clone()))
                } else {
                    (tape.constant(l.weight.clone()), tape.constant(l.bias.clone()))
                }
            })
            .collect();
        ParamVars { layers }
    }

    /// Record the forward pass on `tape`; returns the raw prediction.
    pub fn forward_on_tape(tape: &mut Tape, params: &ParamVars, input: Var) -> Result<Var> {
        let s = tape.shape(input);
        if s.c != IMAGE_CHANNELS {
            return Err(Error::shape(format!("dehazing network expects {IMAGE_CHANNELS} channels, got input {s}")));
        }
        let conv = |tape: &mut Tape, l: usize, x: Var| -> Result<Var> {
            let (w, b) = params.layers[l];
            tape.conv2d(x, w, Some(b), 1, 1)
        };
        let x1 = conv(tape, 0, input)?;
        let x1 = tape.relu(x1);
        let x2 = conv(tape, 1, x1)?;
        let x2 = tape.relu(x2);
        let c1 = tape.concat(&[x1, x2])?;
        let x3 = conv(tape, 2, c1)?;
        let x3 = tape.relu(x3);
        let c2 = tape.concat(&[x2, x3])?;
        let x4 = conv(tape, 3, c2)?;
        let x4 = tape.relu(x4);
        let c3 = tape.concat(&[x1, x3, x4])?;
        let k = conv(tape, 4, c3)?;
        let ki = tape.mul(k, input)?;
        let j = tape.sub(ki, k)?;
        Ok(tape.offset(j, 1.0))
    }

    /// Raw (unclamped) prediction without gradient tracking.
    pub fn forward(&self, hazy: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let vars = self.record(&mut tape, false);
        let x = tape.constant(hazy.clone());
        let y = Self::forward_on_tape(&mut tape, &vars, x)?;
        Ok(tape.value(y).clone())
    }

    /// Clamped prediction, as used for metrics and export.
    pub fn predict(&self, hazy: &Tensor) -> Result<Tensor> {
        Ok(self.forward(hazy)?.clamp01())
    }

    /// Apply `θ ← θ − lr·g` layer by layer.
    pub(crate) fn sgd_step(&mut self, grads: &[(Tensor, Tensor)], lr: f32) {
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(grads) {
            for (p, g) in layer.weight.data_mut().iter_mut().zip(gw.data()) {
                *p -= lr * g;
            }
            for (p, g) in layer.bias.data_mut().iter_mut().zip(gb.data()) {
                *p -= lr * g;
            }
        }
    }
}

/// A frozen copy of a trained model. There is no mutable access.
#[derive(Debug, Clone)]
pub struct TeacherModel {
    params: ModelParams,
    hash: String,
}

impl TeacherModel {
    pub fn new(params: ModelParams) -> Self {
        let hash = params.hash();
        TeacherModel { params, hash }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Hash taken at construction.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn forward(&self, hazy: &Tensor) -> Result<Tensor> {
        self.params.forward(hazy)
    }
}

/// Clean-input PSNR/SSIM/MSE of `params` on every pair.
pub fn evaluate_clean(params: &ModelParams, pairs: &[crate::haze::ImagePair]) -> Result<Vec<ImageRecord>> {
    let cfg = SsimConfig::default();
    pairs
        .iter()
        .enumerate()
        .map(|(id, p)| {
            let pred = params.predict(&p.hazy)?;
            let mse = metrics::mse(&pred, &p.clear)?;
            Ok(ImageRecord { id, psnr_db: metrics::psnr_from_mse(mse), ssim: metrics::ssim(&pred, &p.clear, &cfg)?, mse })
        })
        .collect()
}
