use serde::{Deserialize, Serialize};

use crate::attack::{attack_sweep, AttackKind, Distance, SweepSpec, DEFAULT_ALPHA, DEFAULT_STEPS};
use crate::error::{Error, Result};
use crate::haze::ImagePair;
use crate::attack::{AttackRecord, SweepEntry};
use crate::metrics::{ImageRecord, Summary};
use crate::model::{evaluate_clean, ModelParams};

/// Attacks applied to both checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSpec {
    pub kinds: Vec<AttackKind>,
    pub distance: Distance,
    pub epsilons: Vec<f32>,
    pub alpha: f32,
    pub steps: usize,
    pub seed: u64,
    pub jobs: usize,
}

impl EvalSpec {
    /// Kinds P and G at `ε ∈ {0, 2, 4, 6, 8}/255`.
    pub fn standard(seed: u64) -> Self {
        EvalSpec {
            kinds: vec![AttackKind::P, AttackKind::G],
            distance: Distance::Mse,
            epsilons: crate::attack::STANDARD_EPSILONS.iter().map(|&e| e as f32 / 255.0).collect(),
            alpha: DEFAULT_ALPHA,
            steps: DEFAULT_STEPS,
            seed,
            jobs: 1,
        }
    }
}

/// One cell pair of the after/before table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbRow {
    /// `None` for the clean-input rows.
    pub kind: Option<AttackKind>,
    pub epsilon: f32,
    /// `psnr` or `ssim`.
    pub metric: String,
    pub after: f64,
    pub before: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenseReport {
    pub rows: Vec<AbRow>,
}

impl DefenseReport {
    /// The attacked row for `(kind, ε, metric)`.
    pub fn find(&self, kind: Option<AttackKind>, epsilon: f32, metric: &str) -> Option<&AbRow> {
        self.rows.iter().find(|r| r.kind == kind && r.epsilon == epsilon && r.metric == metric)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("attack,epsilon_255,metric,after,before,after_over_before\n");
        for r in &self.rows {
            let attack = r.kind.map_or_else(|| "clean".to_owned(), |k| k.to_string());
            out.push_str(&format!(
                "{attack},{},{},{:.6},{:.6},{:.3}/{:.3}\n",
                crate::report::format_eps255(r.epsilon),
                r.metric,
                r.after,
                r.before,
                r.after,
                r.before
            ));
        }
        out
    }
}

/// Clean rows first, then for each kind and budget a PSNR and an SSIM row.
pub fn evaluate_defense(before: &ModelParams, after: &ModelParams, pairs: &[ImagePair], spec: &EvalSpec) -> Result<DefenseReport> {
    before.check_architecture()?;
    after.check_architecture()?;
    if pairs.is_empty() {
        return Err(Error::config("evaluation needs at least one image pair"));
    }
    let clean = |params| -> Result<(f64, f64)> {
        let records: Vec<ImageRecord> = evaluate_clean(params, pairs)?;
        Ok((Summary::of(records.iter().map(|r| r.psnr_db)).mean, Summary::of(records.iter().map(|r| r.ssim)).mean))
    };
    let (clean_before, clean_after) = (clean(before)?, clean(after)?);
    let mut rows = vec![
        AbRow { kind: None, epsilon: 0.0, metric: "psnr".into(), after: clean_after.0, before: clean_before.0 },
        AbRow { kind: None, epsilon: 0.0, metric: "ssim".into(), after: clean_after.1, before: clean_before.1 },
    ];
    for &kind in &spec.kinds {
        let sweep = SweepSpec {
            kind,
            distance: spec.distance,
            epsilons: spec.epsilons.clone(),
            alpha: spec.alpha,
            steps: vec![spec.steps],
            seed: spec.seed,
            jobs: spec.jobs,
        };
        let b = attack_sweep(before, pairs, &sweep)?;
        let a = attack_sweep(after, pairs, &sweep)?;
        for (i, &epsilon) in spec.epsilons.iter().enumerate() {
            let range = i * pairs.len()..(i + 1) * pairs.len();
            let (bp, bs) = mean_metrics(&b[range.clone()]);
            let (ap, as_) = mean_metrics(&a[range]);
            rows.push(AbRow { kind: Some(kind), epsilon, metric: "psnr".into(), after: ap, before: bp });
            rows.push(AbRow { kind: Some(kind), epsilon, metric: "ssim".into(), after: as_, before: bs });
        }
    }
    Ok(DefenseReport { rows })
}

fn mean_metrics(entries: &[SweepEntry]) -> (f64, f64) {
    let records: Vec<&AttackRecord> = entries.iter().map(|e| &e.record).collect();
    (Summary::of(records.iter().map(|r| r.psnr_db)).mean, Summary::of(records.iter().map(|r| r.ssim)).mean)
}
