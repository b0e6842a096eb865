use serde::{Deserialize, Serialize};

use super::config::{DefenseConfig, DefenseMode};
use crate::attack::{distance_on_tape, run_attack_with_label, AttackConfig};
use crate::error::{Error, Result};
use crate::haze::{Dataset, ImagePair};
use crate::metrics::{self, Summary, SsimConfig};
use crate::model::{batch, epoch_order, layer_grads, ModelParams, TeacherModel};
use crate::rng;
use crate::tensor::{Tape, Tensor};

/// Averages over one window of outer iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub window: usize,
    /// Outer iterations completed at the end of the window.
    pub iteration: usize,
    pub total_loss: f64,
    pub clean_loss: f64,
    pub adversarial_loss: f64,
    /// Attacked validation metrics, when validation pairs were given.
    pub val_psnr_db: Option<f64>,
    pub val_ssim: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopEvent {
    pub window: usize,
    pub iteration: usize,
}

#[derive(Debug, Clone)]
pub struct DefenseOutcome {
    pub params: ModelParams,
    pub curve: Vec<CurvePoint>,
    pub iterations: usize,
    pub early_stop: Option<EarlyStopEvent>,
    pub student_hash_before: String,
    pub teacher_hash: Option<String>,
}

/// Teacher-guided defense.
pub fn defend_p(
    student: &ModelParams,
    teacher: &TeacherModel,
    dataset: &Dataset,
    val: Option<&[ImagePair]>,
    cfg: &DefenseConfig,
) -> Result<DefenseOutcome> {
    if cfg.mode != DefenseMode::P {
        return Err(Error::config("defend_p needs mode P"));
    }
    defend(student, Some(teacher), dataset, val, cfg)
}

/// Ground-truth guided defense.
pub fn defend_g(student: &ModelParams, dataset: &Dataset, val: Option<&[ImagePair]>, cfg: &DefenseConfig) -> Result<DefenseOutcome> {
    if cfg.mode != DefenseMode::G {
        return Err(Error::config("defend_g needs mode G"));
    }
    defend(student, None, dataset, val, cfg)
}

#[derive(Default)]
struct WindowSums {
    total: f64,
    clean: f64,
    adversarial: f64,
    count: usize,
}

/// Shared loop of both modes. Mode P requires `teacher`.
pub fn defend(
    student: &ModelParams,
    teacher: Option<&TeacherModel>,
    dataset: &Dataset,
    val: Option<&[ImagePair]>,
    cfg: &DefenseConfig,
) -> Result<DefenseOutcome> {
    cfg.validate()?;
    student.check_architecture()?;
    if dataset.is_empty() {
        return Err(Error::config("defense dataset is empty"));
    }
    let teacher = match (cfg.mode, teacher) {
        (DefenseMode::P, None) => return Err(Error::config("teacher-guided defense needs a teacher")),
        (DefenseMode::P, t) => t,
        (DefenseMode::G, _) => None,
    };
    let teacher_hash = teacher.map(|t| t.hash().to_owned());
    let student_hash_before = student.hash();

    let mut params = student.clone();
    let mut curve = Vec::new();
    let mut sums = WindowSums::default();
    let mut iteration = 0;
    let mut stable_windows = 0;
    let mut early_stop = None;

    'epochs: for epoch in 0..cfg.epochs {
        for chunk in epoch_order(dataset.len(), cfg.seed, "defense-shuffle", epoch).chunks(cfg.batch_size) {
            let (hazy, clear) = batch(dataset, chunk)?;
            let target = match teacher {
                Some(t) => t.forward(&hazy)?,
                None => clear.clone(),
            };
            // With λ = 0 the adversarial term has no effect on the update.
            let adversarial = if cfg.lambda > 0.0 {
                let attack = AttackConfig {
                    kind: cfg.mode.attack_kind(),
                    distance: cfg.distance,
                    epsilon: cfg.epsilon,
                    alpha: cfg.alpha,
                    steps: cfg.steps.steps_at(cfg.seed, iteration),
                    seed: rng::derive_seed(cfg.seed, "defense-init", iteration as u64),
                };
                let label = (cfg.mode == DefenseMode::P).then_some(&target);
                Some(run_attack_with_label(&params, &hazy, &attack, Some(&clear), label)?.adversarial)
            } else {
                None
            };

            let (total, clean_value, adv_value) = outer_step(&mut params, &hazy, &clear, adversarial.as_ref(), &target, cfg)?;
            if !total.is_finite() {
                return Err(Error::Diverged { step: iteration, loss: total });
            }
            iteration += 1;
            sums.total += total;
            sums.clean += clean_value;
            sums.adversarial += adv_value;
            sums.count += 1;

            if sums.count == cfg.window {
                let point = close_window(&mut sums, curve.len(), iteration, &params, val, cfg)?;
                if let (Some(es), Some(prev)) = (&cfg.early_stop, curve.last()) {
                    if is_stable(prev, &point, es.psnr_tolerance_db, es.ssim_tolerance) {
                        stable_windows += 1;
                    } else {
                        stable_windows = 0;
                    }
                    if stable_windows >= es.patience {
                        early_stop = Some(EarlyStopEvent { window: point.window, iteration });
                        curve.push(point);
                        break 'epochs;
                    }
                }
                curve.push(point);
            }
        }
    }
    if sums.count > 0 {
        let point = close_window(&mut sums, curve.len(), iteration, &params, val, cfg)?;
        curve.push(point);
    }
    if !params.all_finite() {
        return Err(Error::Diverged { step: iteration, loss: f64::NAN });
    }
    if let (Some(t), Some(h)) = (teacher, &teacher_hash) {
        if t.params().hash() != *h {
            return Err(Error::Contract("teacher parameters changed during defense".into()));
        }
    }
    Ok(DefenseOutcome { params, curve, iterations: iteration, early_stop, student_hash_before, teacher_hash })
}

/// One SGD step on `Re(Γ(I), J) + λ·Re(Γ(I^δ), target)`; the adversarial
/// input is data, so no gradient reaches the inner attack.
fn outer_step(
    params: &mut ModelParams,
    hazy: &Tensor,
    clear: &Tensor,
    adversarial: Option<&Tensor>,
    target: &Tensor,
    cfg: &DefenseConfig,
) -> Result<(f64, f64, f64)> {
    let mut tape = Tape::new();
    let vars = params.record(&mut tape, true);
    let x = tape.constant(hazy.clone());
    let j = tape.constant(clear.clone());
    let pred = ModelParams::forward_on_tape(&mut tape, &vars, x)?;
    let clean = distance_on_tape(&mut tape, cfg.distance, pred, j)?;
    let clean_value = tape.value(clean).item()? as f64;
    let (loss, adv_value) = match adversarial {
        Some(adv) => {
            let xa = tape.constant(adv.clone());
            let t = tape.constant(target.clone());
            let pred_adv = ModelParams::forward_on_tape(&mut tape, &vars, xa)?;
            let adv_loss = distance_on_tape(&mut tape, cfg.distance, pred_adv, t)?;
            let adv_value = tape.value(adv_loss).item()? as f64;
            let weighted = tape.scale(adv_loss, cfg.lambda);
            (tape.add(clean, weighted)?, adv_value)
        }
        None => (clean, 0.0),
    };
    let total = tape.value(loss).item()? as f64;
    if total.is_finite() {
        let mut grads = tape.backward(loss)?;
        params.sgd_step(&layer_grads(&mut grads, &vars), cfg.lr);
    }
    Ok((total, clean_value, adv_value))
}

fn close_window(
    sums: &mut WindowSums,
    window: usize,
    iteration: usize,
    params: &ModelParams,
    val: Option<&[ImagePair]>,
    cfg: &DefenseConfig,
) -> Result<CurvePoint> {
    let n = sums.count as f64;
    let (val_psnr_db, val_ssim) = match val {
        Some(pairs) if !pairs.is_empty() => {
            let (p, s) = attacked_validation(params, pairs, cfg)?;
            (Some(p), Some(s))
        }
        _ => (None, None),
    };
    let point = CurvePoint {
        window,
        iteration,
        total_loss: sums.total / n,
        clean_loss: sums.clean / n,
        adversarial_loss: sums.adversarial / n,
        val_psnr_db,
        val_ssim,
    };
    *sums = WindowSums::default();
    Ok(point)
}

/// Mean PSNR/SSIM on validation pairs under the mode's own attack at the
/// training budget, with a fixed step count and fixed draws so that windows
/// are comparable.
fn attacked_validation(params: &ModelParams, pairs: &[ImagePair], cfg: &DefenseConfig) -> Result<(f64, f64)> {
    let sc = SsimConfig::default();
    let steps = cfg.steps.steps_at(cfg.seed, 0);
    let mut psnrs = Vec::with_capacity(pairs.len());
    let mut ssims = Vec::with_capacity(pairs.len());
    for (i, pair) in pairs.iter().enumerate() {
        let attack = AttackConfig {
            kind: cfg.mode.attack_kind(),
            distance: cfg.distance,
            epsilon: cfg.epsilon,
            alpha: cfg.alpha,
            steps,
            seed: rng::derive_seed(cfg.seed, "defense-val", i as u64),
        };
        let label = params.forward(&pair.hazy)?;
        let r = run_attack_with_label(params, &pair.hazy, &attack, Some(&pair.clear), Some(&label))?;
        psnrs.push(metrics::psnr(&r.prediction, &pair.clear)?);
        ssims.push(metrics::ssim(&r.prediction, &pair.clear, &sc)?);
    }
    Ok((Summary::of(psnrs).mean, Summary::of(ssims).mean))
}

fn is_stable(prev: &CurvePoint, cur: &CurvePoint, psnr_tol: f64, ssim_tol: f64) -> bool {
    match (prev.val_psnr_db, cur.val_psnr_db, prev.val_ssim, cur.val_ssim) {
        (Some(p0), Some(p1), Some(s0), Some(s1)) => (p1 - p0).abs() < psnr_tol && (s1 - s0).abs() < ssim_tol,
        _ => false,
    }
}
