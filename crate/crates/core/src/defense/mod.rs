//! Min-max adversarial fine-tuning.
//!
//! Each outer step crafts perturbations against the current student with a
//! short inner attack, then takes one SGD step on the clean reconstruction
//! loss plus `λ` times the loss on the adversarial inputs.

mod config;
mod evaluate;
mod trainer;

pub use config::{DefenseConfig, DefenseMode, EarlyStop, StepSchedule};
pub use evaluate::{evaluate_defense, AbRow, DefenseReport, EvalSpec};
pub use trainer::{defend, defend_g, defend_p, CurvePoint, DefenseOutcome, EarlyStopEvent};
