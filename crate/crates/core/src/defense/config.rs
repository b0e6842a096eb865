use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::attack::{AttackKind, Distance, DEFAULT_ALPHA, DEFAULT_STEPS};
use crate::error::{Error, Result};
use crate::model::TrainConfig;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DefenseMode {
    /// Teacher-guided: the inner attack and the adversarial term use a
    /// frozen teacher's prediction.
    P,
    /// Ground-truth guided.
    G,
}

impl DefenseMode {
    pub fn attack_kind(self) -> AttackKind {
        match self {
            DefenseMode::P => AttackKind::P,
            DefenseMode::G => AttackKind::G,
        }
    }
}

impl fmt::Display for DefenseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DefenseMode::P => "P",
            DefenseMode::G => "G",
        })
    }
}

impl FromStr for DefenseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "P" => Ok(DefenseMode::P),
            "G" => Ok(DefenseMode::G),
            _ => Err(Error::config(format!("unknown defense mode {s:?} (expected P or G)"))),
        }
    }
}

/// Inner attack length: fixed, or drawn per iteration from a set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepSchedule {
    Fixed(usize),
    Sampled(Vec<usize>),
}

impl StepSchedule {
    /// The step set of the multi-step study.
    pub fn multi_step() -> Self {
        StepSchedule::Sampled(vec![20, 25, 30])
    }

    pub fn steps_at(&self, seed: u64, iteration: usize) -> usize {
        match self {
            StepSchedule::Fixed(k) => *k,
            StepSchedule::Sampled(set) => {
                *set.choose(&mut rng::substream(seed, "defense-steps", iteration as u64)).expect("validated non-empty")
            }
        }
    }
}

/// Halt once the windowed validation metrics stop moving.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub psnr_tolerance_db: f64,
    pub ssim_tolerance: f64,
    /// Consecutive stable windows required.
    pub patience: usize,
}

impl Default for EarlyStop {
    fn default() -> Self {
        EarlyStop { psnr_tolerance_db: 0.05, ssim_tolerance: 0.002, patience: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenseConfig {
    pub mode: DefenseMode,
    pub lambda: f32,
    pub epsilon: f32,
    pub alpha: f32,
    pub steps: StepSchedule,
    pub distance: Distance,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f32,
    pub seed: u64,
    /// Iterations per loss-curve point.
    pub window: usize,
    /// Needs validation pairs; ignored without them.
    pub early_stop: Option<EarlyStop>,
}

/// Fine-tuning runs at a fifth of the baseline learning rate by default.
pub const DEFENSE_LR_FACTOR: f32 = 0.2;

impl DefenseConfig {
    pub fn new(mode: DefenseMode) -> Self {
        DefenseConfig {
            mode,
            lambda: 1.0,
            epsilon: 8.0 / 255.0,
            alpha: DEFAULT_ALPHA,
            steps: StepSchedule::Fixed(DEFAULT_STEPS),
            distance: Distance::Mse,
            epochs: 40,
            batch_size: 8,
            lr: TrainConfig::default().lr * DEFENSE_LR_FACTOR,
            seed: 0,
            window: 50,
            early_stop: Some(EarlyStop::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("lambda must be finite and non-negative, got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::config(format!("epsilon must lie in [0, 1], got {}", self.epsilon)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if let StepSchedule::Sampled(set) = &self.steps {
            if set.is_empty() {
                return Err(Error::config("sampled step set is empty"));
            }
        }
        if self.batch_size == 0 || self.window == 0 {
            return Err(Error::config("batch size and curve window must be at least 1"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!("learning rate must be finite and non-negative, got {}", self.lr)));
        }
        if let Some(es) = &self.early_stop {
            if es.patience == 0 {
                return Err(Error::config("early-stop patience must be at least 1"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = DefenseConfig::new(DefenseMode::P);
        assert_eq!(c.lambda, 1.0);
        assert_eq!(c.epsilon, 8.0 / 255.0);
        assert_eq!(c.epochs, 40);
        assert_eq!(c.steps, StepSchedule::Fixed(10));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_negative_lambda() {
        let c = DefenseConfig { lambda: -1.0, ..DefenseConfig::new(DefenseMode::G) };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn sampled_steps_stay_in_the_set() {
        let s = StepSchedule::multi_step();
        let drawn: Vec<usize> = (0..100).map(|i| s.steps_at(3, i)).collect();
        assert!(drawn.iter().all(|k| [20, 25, 30].contains(k)));
        for k in [20, 25, 30] {
            assert!(drawn.contains(&k));
        }
        assert_eq!(drawn, (0..100).map(|i| s.steps_at(3, i)).collect::<Vec<_>>());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("p".parse::<DefenseMode>().unwrap(), DefenseMode::P);
        assert!("X".parse::<DefenseMode>().is_err());
    }
}
