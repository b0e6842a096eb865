use dehaze_adv::attack::{attack_sweep, AttackKind, Distance, SweepEntry, SweepSpec};
use dehaze_adv::haze::{Dataset, ImagePair};
use dehaze_adv::image_io::save_image;
use dehaze_adv::metrics::Summary;
use dehaze_adv::report::{attack_records_csv, comparison_csv, comparison_table, format_eps255, loss_trace_csv};
use serde_json::json;

use super::{load_dataset, load_model};
use crate::args::AttackArgs;
use crate::error::{CliError, CliResult};
use crate::manifest::{file_sha256, RunDir};
use crate::units::{parse_amount, parse_list, parse_steps};

/// File stem shared by the per-setting outputs.
pub fn setting_label(kind: AttackKind, distance: Distance, epsilon: f32, steps: usize) -> String {
    format!("{kind}_{distance}_eps{}_k{steps}", format_eps255(epsilon))
}

pub fn run(a: &AttackArgs) -> CliResult<()> {
    let kind: AttackKind = a.kind.parse().map_err(|e: dehaze_adv::Error| CliError::usage(e.to_string()))?;
    let distance: Distance = a.distance.parse().map_err(|e: dehaze_adv::Error| CliError::usage(e.to_string()))?;
    let raw = a.budget.raw;
    let epsilons = parse_list(&a.eps_list, "eps-list", |p| parse_amount(p, raw, "eps-list"))?;
    let alpha = parse_amount(&a.budget.alpha, raw, "alpha")?;
    let steps = if kind.uses_gradients() { parse_steps(&a.steps)? } else { vec![0] };
    if a.jobs == 0 {
        return Err(CliError::usage("--jobs must be at least 1"));
    }

    let params = load_model(&a.model)?;
    let data = load_dataset(&a.data, a.limit)?;
    let mut dir = RunDir::create(&a.out)?;
    let spec = SweepSpec { kind, distance, epsilons: epsilons.clone(), alpha, steps: steps.clone(), seed: a.seed, jobs: a.jobs };
    let hash_before = params.hash();
    let entries = attack_sweep(&params, &data.pairs, &spec)?;

    let records: Vec<_> = entries.iter().map(|e| e.record.clone()).collect();
    dir.write("metrics.csv", &attack_records_csv(&records))?;
    dir.write("loss_trace.csv", &loss_trace_csv(&entries))?;
    dir.write("comparison.csv", &comparison_csv(&comparison_table(&records)))?;

    let mut settings = Vec::new();
    for group in entries.chunks(data.len()) {
        let r0 = &group[0].record;
        let label = setting_label(kind, distance, r0.epsilon, r0.steps);
        save_adversarial(&mut dir, &label, group, &data.pairs, data.height, data.width)?;
        if a.dump_images {
            for e in group {
                for (suffix, img) in [("adv", &e.result.adversarial), ("pred", &e.result.prediction)] {
                    let name = format!("images/{label}/{:04}_{suffix}.png", e.record.id);
                    let path = dir.path(&name);
                    std::fs::create_dir_all(path.parent().expect("nested path"))?;
                    save_image(img, &path)?;
                    dir.record(&name);
                }
            }
        }
        let psnr = Summary::of(group.iter().map(|e| e.record.psnr_db));
        let ssim = Summary::of(group.iter().map(|e| e.record.ssim));
        println!("{label}: PSNR {:.3} dB, SSIM {:.4} over {} images", psnr.mean, ssim.mean, group.len());
        settings.push(json!({
            "label": label,
            "epsilon": r0.epsilon,
            "epsilon_255": format_eps255(r0.epsilon),
            "steps": r0.steps,
            "psnr_db": psnr,
            "ssim": ssim,
            "max_linf": group.iter().map(|e| e.record.linf).fold(0.0f32, f32::max),
        }));
    }
    let budget_violations = entries.iter().filter(|e| e.record.linf > e.record.epsilon + 1e-6).count();
    let gradient_evaluations: usize = entries.iter().map(|e| e.record.gradient_evaluations).sum();

    let config = json!({
        "kind": kind, "distance": distance,
        "eps_list": a.eps_list, "alpha": a.budget.alpha, "raw": raw,
        "epsilons": epsilons, "alpha_value": alpha,
        "steps": steps, "seed": a.seed, "limit": a.limit, "dump_images": a.dump_images, "jobs": a.jobs,
    });
    let inputs = json!({
        "model": a.model, "model_hash": hash_before,
        "data": a.data, "data_sha256": file_sha256(&a.data)?, "images": data.len(),
    });
    let results = json!({
        "settings": settings,
        "gradient_evaluations": gradient_evaluations,
        "budget_violations": budget_violations,
        "model_unchanged": hash_before == params.hash(),
    });
    dir.finish("attack", config, inputs, results)?;
    Ok(())
}

/// Adversarial inputs paired with their clear images, in the dataset format.
fn save_adversarial(dir: &mut RunDir, label: &str, group: &[SweepEntry], pairs: &[ImagePair], height: usize, width: usize) -> CliResult<()> {
    let adv = Dataset {
        height,
        width,
        pairs: group
            .iter()
            .map(|e| ImagePair { hazy: e.result.adversarial.clone(), clear: pairs[e.record.id].clear.clone() })
            .collect(),
    };
    let name = format!("adversarial/{label}.hzds");
    std::fs::create_dir_all(dir.path("adversarial"))?;
    adv.save(&dir.path(&name))?;
    dir.record(&name);
    Ok(())
}
