//! Iterative sign-gradient attacks on the dehazing network.
//!
//! Five attack kinds share one loop: start from uniform noise inside the
//! ℓ∞ ball, then repeatedly step along the sign of the loss gradient with
//! respect to the perturbation, clipping back into the ball and into the
//! valid pixel range.

mod config;
mod loss;
mod mask;
mod perturb;
mod run;
mod sweep;

pub use config::{AttackConfig, AttackKind, Distance, DEFAULT_ALPHA, DEFAULT_STEPS, STANDARD_EPSILONS};
pub use loss::{attack_loss, distance_on_tape, AttackTargets};
pub use mask::{compute_haze_mask, mask_coverage};
pub use perturb::{init_delta, pgd_step, sign};
pub use run::{run_attack, run_attack_with_label, AttackResult};
pub use sweep::{attack_sweep, AttackRecord, SweepEntry, SweepSpec};
