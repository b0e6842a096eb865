use super::config::{AttackKind, Distance};
use crate::error::{Error, Result};
use crate::metrics::{ssim_on_tape, SsimConfig};
use crate::tensor::{Tape, Var};

/// Reference images an attack loss may compare against, already on the tape.
#[derive(Debug, Clone, Copy, Default)]
pub struct AttackTargets {
    /// Pseudo-label `J_p` for kinds P and M.
    pub pseudo_label: Option<Var>,
    /// Clear image `J` for kind G.
    pub clear: Option<Var>,
    /// Hazy input `I` for kind I.
    pub hazy: Option<Var>,
}

/// `Re(a, b)`: mean squared error or `1 − SSIM`.
pub fn distance_on_tape(tape: &mut Tape, distance: Distance, a: Var, b: Var) -> Result<Var> {
    match distance {
        Distance::Mse => tape.mse(a, b),
        Distance::Ssim => {
            let s = ssim_on_tape(tape, a, b, &SsimConfig::default())?;
            let neg = tape.scale(s, -1.0);
            Ok(tape.offset(neg, 1.0))
        }
    }
}

fn require(target: Option<Var>, what: &str, kind: AttackKind) -> Result<Var> {
    target.ok_or_else(|| Error::config(format!("attack kind {kind} needs the {what}")))
}

/// The objective the attacker maximizes, given the prediction on the
/// perturbed input. For kind M the caller feeds the prediction on the masked
/// perturbation.
pub fn attack_loss(tape: &mut Tape, kind: AttackKind, distance: Distance, prediction: Var, targets: &AttackTargets) -> Result<Var> {
    match kind {
        AttackKind::P | AttackKind::M => {
            let label = require(targets.pseudo_label, "pseudo-label", kind)?;
            distance_on_tape(tape, distance, prediction, label)
        }
        AttackKind::G => {
            let clear = require(targets.clear, "clear image", kind)?;
            distance_on_tape(tape, distance, prediction, clear)
        }
        AttackKind::I => {
            let hazy = require(targets.hazy, "hazy input", kind)?;
            let d = distance_on_tape(tape, distance, prediction, hazy)?;
            Ok(tape.scale(d, -1.0))
        }
        AttackKind::N => Err(Error::Contract("the noise attack has no loss".into())),
    }
}
