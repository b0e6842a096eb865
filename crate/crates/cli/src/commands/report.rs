use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dehaze_adv::haze::Dataset;
use dehaze_adv::metrics::{pooled_histogram, Histogram};
use dehaze_adv::report::{comparison_csv, comparison_table, merge_csv, parse_attack_csv};
use serde_json::{json, Value};

use super::load_dataset;
use crate::args::ReportArgs;
use crate::error::{CliError, CliResult};
use crate::manifest::{read_manifest, RunDir};

/// Tolerance for small wiggles when classifying a histogram as unimodal.
const UNIMODAL_TOLERANCE: f64 = 1e-3;

pub fn run(a: &ReportArgs) -> CliResult<()> {
    let mut metrics = Vec::new();
    let mut ab = Vec::new();
    // Clean inputs keyed by (data path, limit); adversarial files keyed by label.
    let mut clean_sources: BTreeMap<(String, Option<usize>), ()> = BTreeMap::new();
    let mut adversarial: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    let mut runs = Vec::new();
    for run in &a.runs {
        let manifest = read_manifest(run)?;
        let command = manifest["command"].as_str().unwrap_or_default().to_owned();
        match command.as_str() {
            "attack" => {
                metrics.push(fs::read_to_string(run.join("metrics.csv"))?);
                let data = manifest["inputs"]["data"].as_str().unwrap_or_default().to_owned();
                let limit = manifest["config"]["limit"].as_u64().map(|v| v as usize);
                clean_sources.insert((data, limit), ());
                for out in manifest["outputs"].as_array().into_iter().flatten().filter_map(Value::as_str) {
                    if let Some(name) = out.strip_prefix("adversarial/").and_then(|n| n.strip_suffix(".hzds")) {
                        adversarial.entry(name.to_owned()).or_default().push(run.join(out));
                    }
                }
            }
            "defend" => ab.push(fs::read_to_string(run.join("ab_report.csv"))?),
            other => return Err(CliError::usage(format!("{}: cannot report on a {other:?} run", run.display()))),
        }
        runs.push(json!({ "path": run, "command": command }));
    }

    let mut dir = RunDir::create(&a.out)?;
    let mut summary = Vec::new();
    if !metrics.is_empty() {
        let merged = merge_csv(&metrics)?;
        dir.write("merged_metrics.csv", &merged)?;
        let rows = comparison_table(&parse_attack_csv(&merged)?);
        dir.write("comparison.csv", &comparison_csv(&rows))?;
        for r in &rows {
            println!(
                "{} {} eps {:.0}/255 k {}: input {:.2} dB / SSIM {:.4}, output {:.2} dB / SSIM {:.4}",
                r.kind, r.distance, r.epsilon * 255.0, r.steps, r.input_psnr_db, r.input_ssim, r.output_psnr_db, r.output_ssim
            );
        }

        let mut hist_rows = Vec::new();
        let mut clean_images = Vec::new();
        for (data, limit) in clean_sources.keys() {
            clean_images.extend(load_dataset(Path::new(data), *limit)?.pairs.into_iter().map(|p| p.hazy));
        }
        let clean = pooled_histogram(&clean_images)?;
        dir.write("mscn_clean.csv", &clean.to_csv())?;
        hist_rows.push(("clean".to_owned(), clean));
        for (label, files) in &adversarial {
            let mut images = Vec::new();
            for f in files {
                images.extend(Dataset::load(f)?.pairs.into_iter().map(|p| p.hazy));
            }
            let h = pooled_histogram(&images)?;
            dir.write(&format!("mscn_adv_{label}.csv"), &h.to_csv())?;
            hist_rows.push((label.clone(), h));
        }
        dir.write("mscn_summary.csv", &mscn_summary_csv(&hist_rows))?;
        summary.push(json!({ "comparison_rows": rows.len(), "histograms": hist_rows.len() }));
    }
    if !ab.is_empty() {
        dir.write("merged_ab_report.csv", &merge_csv(&ab)?)?;
    }
    dir.finish("report", json!({ "runs": a.runs }), json!({ "runs": runs }), json!(summary))?;
    Ok(())
}

fn mscn_summary_csv(rows: &[(String, Histogram)]) -> String {
    let mut out = String::from("source,peak_bin,peak_center,bins_from_zero,unimodal,total_mass\n");
    for (label, h) in rows {
        let peak = h.peak_bin();
        out.push_str(&format!(
            "{label},{peak},{},{},{},{}\n",
            h.centers[peak],
            peak.abs_diff(Histogram::zero_bin()),
            h.is_unimodal(UNIMODAL_TOLERANCE),
            h.total()
        ));
    }
    out
}
