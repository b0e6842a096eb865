use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ε numerators (over 255) of the standard sweep.
pub const STANDARD_EPSILONS: [u32; 5] = [0, 2, 4, 6, 8];
pub const DEFAULT_ALPHA: f32 = 2.0 / 255.0;
pub const DEFAULT_STEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttackKind {
    /// Push the output away from the clean prediction.
    P,
    /// As `P`, perturbing only the hazier-than-average pixels.
    M,
    /// Push the output away from the clear ground truth.
    G,
    /// Pull the output towards the hazy input.
    I,
    /// Uniform noise, no gradients.
    N,
}

impl AttackKind {
    pub const ALL: [AttackKind; 5] = [AttackKind::P, AttackKind::M, AttackKind::G, AttackKind::I, AttackKind::N];

    pub fn uses_gradients(self) -> bool {
        self != AttackKind::N
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AttackKind::P => "P",
            AttackKind::M => "M",
            AttackKind::G => "G",
            AttackKind::I => "I",
            AttackKind::N => "N",
        };
        f.write_str(s)
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "P" => Ok(AttackKind::P),
            "M" => Ok(AttackKind::M),
            "G" => Ok(AttackKind::G),
            "I" => Ok(AttackKind::I),
            "N" => Ok(AttackKind::N),
            _ => Err(Error::config(format!("unknown attack kind {s:?} (expected P, M, G, I or N)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    Mse,
    /// `1 − SSIM`
    Ssim,
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distance::Mse => "mse",
            Distance::Ssim => "ssim",
        })
    }
}

impl FromStr for Distance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Ok(Distance::Mse),
            "ssim" => Ok(Distance::Ssim),
            _ => Err(Error::config(format!("unknown distance {s:?} (expected mse or ssim)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub distance: Distance,
    /// ℓ∞ budget in pixel units.
    pub epsilon: f32,
    /// Step size in pixel units.
    pub alpha: f32,
    pub steps: usize,
    pub seed: u64,
}

impl AttackConfig {
    /// Budget and step size given as numerators over 255.
    pub fn from_255(kind: AttackKind, distance: Distance, epsilon: u32, alpha: u32, steps: usize, seed: u64) -> Self {
        AttackConfig { kind, distance, epsilon: epsilon as f32 / 255.0, alpha: alpha as f32 / 255.0, steps, seed }
    }

    pub fn new(kind: AttackKind, distance: Distance, epsilon: f32, seed: u64) -> Self {
        AttackConfig { kind, distance, epsilon, alpha: DEFAULT_ALPHA, steps: DEFAULT_STEPS, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::config(format!("epsilon must lie in [0, 1], got {}", self.epsilon)));
        }
        if self.kind.uses_gradients() && self.steps > 0 && !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config(format!("alpha must be positive when steps > 0, got {}", self.alpha)));
        }
        Ok(())
    }
}
