use dehaze_adv::metrics::{psnr, Summary};
use dehaze_adv::model::{evaluate_clean, save_checkpoint, train, ModelParams, TrainConfig};
use dehaze_adv::report::{image_records_csv, train_loss_csv};
use serde_json::json;

use super::load_dataset;
use crate::args::TrainArgs;
use crate::error::CliResult;
use crate::manifest::{file_sha256, RunDir};

pub fn run(a: &TrainArgs) -> CliResult<()> {
    let data = load_dataset(&a.data, None)?;
    let val = a.val.as_deref().map(|p| load_dataset(p, None)).transpose()?;
    let cfg = TrainConfig { epochs: a.epochs, batch_size: a.batch, lr: a.lr, seed: a.seed, ..TrainConfig::default() };
    cfg.validate()?;
    let mut dir = RunDir::create(&a.out)?;

    let init = ModelParams::init(a.seed);
    let outcome = train(&init, &data, &cfg)?;
    save_checkpoint(&outcome.params, &dir.path("model.hzck"))?;
    dir.record("model.hzck");
    dir.write("loss.csv", &train_loss_csv(&outcome.loss_history))?;

    let mut results = json!({
        "model_hash": outcome.params.hash(),
        "init_hash": init.hash(),
        "optimizer_steps": outcome.loss_history.len(),
        "final_loss": outcome.loss_history.last(),
    });
    let mut inputs = json!({ "data": a.data, "data_sha256": file_sha256(&a.data)? });
    let mut summary = format!("trained {} steps", outcome.loss_history.len());
    if let (Some(val), Some(path)) = (&val, &a.val) {
        let records = evaluate_clean(&outcome.params, &val.pairs)?;
        dir.write("val_metrics.csv", &image_records_csv(&records))?;
        let p = Summary::of(records.iter().map(|r| r.psnr_db));
        let s = Summary::of(records.iter().map(|r| r.ssim));
        let hazy = Summary::of(val.pairs.iter().map(|pair| psnr(&pair.hazy, &pair.clear).unwrap_or(f64::NAN)));
        results["val_psnr_db"] = json!(p);
        results["val_ssim"] = json!(s);
        results["val_hazy_psnr_db"] = json!(hazy);
        inputs["val"] = json!(path);
        inputs["val_sha256"] = json!(file_sha256(path)?);
        summary += &format!(", validation {:.2} dB (hazy input {:.2} dB), SSIM {:.3}", p.mean, hazy.mean, s.mean);
    }
    let config = json!({
        "epochs": a.epochs, "lr": a.lr, "batch": a.batch, "seed": a.seed, "loss": cfg.loss,
    });
    dir.finish("train", config, inputs, results)?;
    println!("{summary}; checkpoint in {}", a.out.display());
    Ok(())
}
