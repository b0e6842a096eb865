use super::config::{AttackConfig, AttackKind};
use super::loss::{attack_loss, AttackTargets};
use super::mask::compute_haze_mask;
use super::perturb::{init_delta, pgd_step};
use crate::error::{Error, Result};
use crate::model::{ModelParams, ParamVars};
use crate::tensor::{Tape, Tensor, Var};

/// Slack allowed on the budget check for f32 rounding in `I + δ`.
const BUDGET_SLACK: f32 = 1e-6;

#[derive(Debug, Clone)]
pub struct AttackResult {
    /// Effective perturbation, so `adversarial == hazy + delta`.
    pub delta: Tensor,
    pub adversarial: Tensor,
    /// Clamped prediction on the adversarial input.
    pub prediction: Tensor,
    /// Haze mask, for kind M only.
    pub mask: Option<Tensor>,
    /// Attack objective at each iterate `δ_0 … δ_k`; empty for kind N.
    pub loss_trace: Vec<f64>,
    pub gradient_evaluations: usize,
}

/// Attack `hazy` (one or more images stacked on the batch axis).
///
/// Kinds P and M use the model's own prediction on the clean input as the
/// pseudo-label; kind G needs `clear`.
pub fn run_attack(params: &ModelParams, hazy: &Tensor, cfg: &AttackConfig, clear: Option<&Tensor>) -> Result<AttackResult> {
    let label = match cfg.kind {
        AttackKind::P | AttackKind::M => Some(params.forward(hazy)?),
        _ => None,
    };
    run_attack_with_label(params, hazy, cfg, clear, label.as_ref())
}

/// As [`run_attack`], with the pseudo-label supplied by the caller (for
/// example a frozen teacher's prediction).
pub fn run_attack_with_label(
    params: &ModelParams,
    hazy: &Tensor,
    cfg: &AttackConfig,
    clear: Option<&Tensor>,
    pseudo_label: Option<&Tensor>,
) -> Result<AttackResult> {
    cfg.validate()?;
    if !hazy.all_finite() {
        return Err(Error::Contract("attack input contains non-finite values".into()));
    }
    for t in clear.iter().chain(pseudo_label.iter()) {
        hazy.expect_same_shape(t, "attack")?;
    }
    let needs = |present: bool, what: &str| {
        if present {
            Ok(())
        } else {
            Err(Error::config(format!("attack kind {} needs the {what}", cfg.kind)))
        }
    };
    match cfg.kind {
        AttackKind::P | AttackKind::M => needs(pseudo_label.is_some(), "pseudo-label")?,
        AttackKind::G => needs(clear.is_some(), "clear image")?,
        AttackKind::I | AttackKind::N => {}
    }

    let mut delta = init_delta(hazy, cfg.epsilon, cfg.seed);
    if cfg.kind == AttackKind::N {
        let adversarial = perturbed(hazy, &delta)?;
        let prediction = params.predict(&adversarial)?;
        let result = AttackResult { delta, adversarial, prediction, mask: None, loss_trace: Vec::new(), gradient_evaluations: 0 };
        check_invariants(hazy, &result, cfg.epsilon)?;
        return Ok(result);
    }

    let mask = match cfg.kind {
        AttackKind::M => Some(compute_haze_mask(hazy, &pseudo_label.expect("checked above").clamp01())?),
        _ => None,
    };
    let objective = |delta: &Tensor, track: bool| -> Result<(Tape, Var, Var, Var)> {
        let mut tape = Tape::new();
        let vars: ParamVars = params.record(&mut tape, false);
        let x = tape.constant(hazy.clone());
        let d = if track { tape.param(delta.clone()) } else { tape.constant(delta.clone()) };
        let step = match &mask {
            Some(m) => {
                let m = tape.constant(m.clone());
                tape.mul(d, m)?
            }
            None => d,
        };
        let input = tape.add(x, step)?;
        let pred = ModelParams::forward_on_tape(&mut tape, &vars, input)?;
        let targets = AttackTargets {
            pseudo_label: pseudo_label.map(|t| tape.constant(t.clone())),
            clear: clear.map(|t| tape.constant(t.clone())),
            hazy: Some(x),
        };
        let loss = attack_loss(&mut tape, cfg.kind, cfg.distance, pred, &targets)?;
        Ok((tape, d, pred, loss))
    };

    let mut trace = Vec::with_capacity(cfg.steps + 1);
    let mut evaluations = 0;
    for _ in 0..cfg.steps {
        let (tape, d, _, loss) = objective(&delta, true)?;
        trace.push(tape.value(loss).item()? as f64);
        let grads = tape.backward(loss)?;
        evaluations += 1;
        let g = grads.get(d).expect("perturbation is tracked");
        delta = pgd_step(&delta, g, cfg.alpha, cfg.epsilon, hazy);
    }
    let (tape, _, _, loss) = objective(&delta, false)?;
    trace.push(tape.value(loss).item()? as f64);

    if let Some(m) = &mask {
        delta = delta.zip_map(m, |d, m| d * m)?;
    }
    let adversarial = perturbed(hazy, &delta)?;
    let prediction = params.predict(&adversarial)?;
    let result = AttackResult { delta, adversarial, prediction, mask, loss_trace: trace, gradient_evaluations: evaluations };
    check_invariants(hazy, &result, cfg.epsilon)?;
    Ok(result)
}

fn perturbed(hazy: &Tensor, delta: &Tensor) -> Result<Tensor> {
    Ok(hazy.zip_map(delta, |a, d| a + d)?.clamp01())
}

fn check_invariants(hazy: &Tensor, result: &AttackResult, epsilon: f32) -> Result<()> {
    let linf = result.adversarial.zip_map(hazy, |a, b| a - b)?.max_abs();
    if linf > epsilon + BUDGET_SLACK {
        return Err(Error::Contract(format!("perturbation {linf} exceeds budget {epsilon}")));
    }
    if result.adversarial.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Contract("adversarial input left [0, 1]".into()));
    }
    Ok(())
}
