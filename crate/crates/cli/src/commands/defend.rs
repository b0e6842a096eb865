use dehaze_adv::defense::{defend, evaluate_defense, DefenseConfig, DefenseMode, EarlyStop, EvalSpec, StepSchedule};
use dehaze_adv::model::{save_checkpoint, TeacherModel};
use dehaze_adv::report::defense_curve_csv;
use serde_json::json;

use super::{load_dataset, load_model};
use crate::args::DefendArgs;
use crate::error::{CliError, CliResult};
use crate::manifest::{file_sha256, RunDir};
use crate::units::parse_amount;

pub fn run(a: &DefendArgs) -> CliResult<()> {
    let mode: DefenseMode = a.mode.parse().map_err(|e: dehaze_adv::Error| CliError::usage(e.to_string()))?;
    let epsilon = parse_amount(&a.eps, a.budget.raw, "eps")?;
    let alpha = parse_amount(&a.budget.alpha, a.budget.raw, "alpha")?;
    if a.jobs == 0 {
        return Err(CliError::usage("--jobs must be at least 1"));
    }
    let mut cfg = DefenseConfig {
        lambda: a.lambda,
        epsilon,
        alpha,
        steps: if a.multi_step { StepSchedule::multi_step() } else { StepSchedule::Fixed(a.steps) },
        epochs: a.epochs,
        batch_size: a.batch,
        seed: a.seed,
        window: a.window,
        early_stop: (!a.no_early_stop && a.val.is_some()).then(EarlyStop::default),
        ..DefenseConfig::new(mode)
    };
    if let Some(lr) = a.lr {
        cfg.lr = lr;
    }
    cfg.validate()?;

    let student = load_model(&a.model)?;
    let teacher_path = a.teacher.clone().unwrap_or_else(|| a.model.clone());
    let teacher = match mode {
        DefenseMode::P => Some(TeacherModel::new(load_model(&teacher_path)?)),
        DefenseMode::G => None,
    };
    let data = load_dataset(&a.data, None)?;
    let val = a.val.as_deref().map(|p| load_dataset(p, None)).transpose()?;
    let eval_path = a.eval_data.clone().or_else(|| a.val.clone()).unwrap_or_else(|| a.data.clone());
    let eval = load_dataset(&eval_path, a.eval_limit)?;

    let mut dir = RunDir::create(&a.out)?;
    let outcome = defend(&student, teacher.as_ref(), &data, val.as_ref().map(|v| v.pairs.as_slice()), &cfg)?;
    save_checkpoint(&outcome.params, &dir.path("defended.hzck"))?;
    dir.record("defended.hzck");
    dir.write("curve.csv", &defense_curve_csv(&outcome.curve))?;

    let spec = EvalSpec { alpha, steps: a.steps, jobs: a.jobs, ..EvalSpec::standard(a.seed) };
    let report = evaluate_defense(&student, &outcome.params, &eval.pairs, &spec)?;
    dir.write("ab_report.csv", &report.to_csv())?;

    for (kind, label) in [(None, "clean"), (Some(mode.attack_kind()), "attacked")] {
        let eps = if kind.is_some() { epsilon } else { 0.0 };
        let nearest = spec.epsilons.iter().copied().min_by(|x, y| (x - eps).abs().total_cmp(&(y - eps).abs())).unwrap_or(0.0);
        if let Some(row) = report.find(kind, if kind.is_some() { nearest } else { 0.0 }, "psnr") {
            println!("{label} PSNR after/before: {:.3}/{:.3} dB", row.after, row.before);
        }
    }
    let config = json!({
        "mode": mode, "lambda": cfg.lambda, "eps": a.eps, "alpha": a.budget.alpha, "raw": a.budget.raw,
        "epsilon_value": epsilon, "alpha_value": alpha, "steps": cfg.steps, "epochs": cfg.epochs, "lr": cfg.lr,
        "batch": cfg.batch_size, "window": cfg.window, "early_stop": cfg.early_stop, "seed": cfg.seed,
        "eval_limit": a.eval_limit, "jobs": a.jobs, "distance": cfg.distance,
    });
    let mut inputs = json!({
        "model": a.model, "student_hash": outcome.student_hash_before,
        "data": a.data, "data_sha256": file_sha256(&a.data)?,
        "eval_data": eval_path, "eval_images": eval.len(),
    });
    if let Some(v) = &a.val {
        inputs["val"] = json!(v);
    }
    if mode == DefenseMode::P {
        inputs["teacher"] = json!(teacher_path);
        inputs["teacher_hash"] = json!(outcome.teacher_hash);
    }
    let results = json!({
        "defended_hash": outcome.params.hash(),
        "iterations": outcome.iterations,
        "early_stop": outcome.early_stop,
        "windows": outcome.curve.len(),
    });
    dir.finish("defend", config, inputs, results)?;
    Ok(())
}
