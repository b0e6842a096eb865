use std::thread;

use serde::{Deserialize, Serialize};

use super::config::{AttackConfig, AttackKind, Distance};
use super::mask::mask_coverage;
use super::run::{run_attack, AttackResult};
use crate::error::{Error, Result};
use crate::haze::ImagePair;
use crate::metrics::{self, SsimConfig};
use crate::model::ModelParams;
use crate::rng;

/// A grid of attacks over images, budgets and step counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kind: AttackKind,
    pub distance: Distance,
    pub epsilons: Vec<f32>,
    pub alpha: f32,
    pub steps: Vec<usize>,
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    pub jobs: usize,
}

/// Per-image outcome of one attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub id: usize,
    pub epsilon: f32,
    pub kind: AttackKind,
    pub distance: Distance,
    pub steps: usize,
    /// Prediction on the adversarial input against the clear image.
    pub psnr_db: f64,
    pub ssim: f64,
    pub mse: f64,
    /// Adversarial input against the clean input.
    pub input_psnr_db: f64,
    pub input_ssim: f64,
    /// Prediction against the adversarial input it came from.
    pub output_input_ssim: f64,
    pub linf: f32,
    pub mask_coverage: Option<f64>,
    pub gradient_evaluations: usize,
    pub final_loss: Option<f64>,
}

impl AttackRecord {
    fn measure(id: usize, cfg: &AttackConfig, pair: &ImagePair, r: &AttackResult) -> Result<Self> {
        let sc = SsimConfig::default();
        let mse = metrics::mse(&r.prediction, &pair.clear)?;
        Ok(AttackRecord {
            id,
            epsilon: cfg.epsilon,
            kind: cfg.kind,
            distance: cfg.distance,
            steps: if cfg.kind.uses_gradients() { cfg.steps } else { 0 },
            psnr_db: metrics::psnr_from_mse(mse),
            ssim: metrics::ssim(&r.prediction, &pair.clear, &sc)?,
            mse,
            input_psnr_db: metrics::psnr(&r.adversarial, &pair.hazy)?,
            input_ssim: metrics::ssim(&r.adversarial, &pair.hazy, &sc)?,
            output_input_ssim: metrics::ssim(&r.prediction, &r.adversarial, &sc)?,
            linf: r.adversarial.zip_map(&pair.hazy, |a, b| a - b)?.max_abs(),
            mask_coverage: r.mask.as_ref().map(mask_coverage),
            gradient_evaluations: r.gradient_evaluations,
            final_loss: r.loss_trace.last().copied(),
        })
    }
}

/// A record together with the full attack output.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub record: AttackRecord,
    pub result: AttackResult,
}

/// Run the grid, ordered by step count, then budget, then image.
///
/// Image `i` always starts from the same uniform draw, derived from
/// `(seed, i)`, whatever the budget or step count.
pub fn attack_sweep(params: &ModelParams, pairs: &[ImagePair], spec: &SweepSpec) -> Result<Vec<SweepEntry>> {
    if spec.epsilons.is_empty() || spec.steps.is_empty() {
        return Err(Error::config("sweep needs at least one budget and one step count"));
    }
    let mut jobs = Vec::new();
    for &steps in &spec.steps {
        for &epsilon in &spec.epsilons {
            for id in 0..pairs.len() {
                let cfg = AttackConfig {
                    kind: spec.kind,
                    distance: spec.distance,
                    epsilon,
                    alpha: spec.alpha,
                    steps,
                    seed: rng::derive_seed(spec.seed, "attack-init", id as u64),
                };
                cfg.validate()?;
                jobs.push((id, cfg));
            }
        }
    }
    let run = |&(id, cfg): &(usize, AttackConfig)| -> Result<SweepEntry> {
        let pair = &pairs[id];
        let result = run_attack(params, &pair.hazy, &cfg, Some(&pair.clear))?;
        Ok(SweepEntry { record: AttackRecord::measure(id, &cfg, pair, &result)?, result })
    };
    let workers = spec.jobs.clamp(1, jobs.len().max(1));
    if workers == 1 {
        return jobs.iter().map(run).collect();
    }
    let chunk = jobs.len().div_ceil(workers);
    thread::scope(|s| {
        let handles: Vec<_> = jobs
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(run).collect::<Result<Vec<_>>>()))
            .collect();
        let mut out = Vec::with_capacity(jobs.len());
        for h in handles {
            out.extend(h.join().expect("attack worker panicked")?);
        }
        Ok(out)
    })
}
