//! CSV exports and the cross-run summary tables.
//!
//! Floating-point fields are written with Rust's shortest round-trip
//! formatting, so a CSV parsed back yields the exact values that were
//! written and repeated runs produce identical bytes.

use std::collections::BTreeMap;

use crate::attack::{AttackKind, AttackRecord, Distance, SweepEntry};
use crate::defense::CurvePoint;
use crate::error::{Error, Result};
use crate::metrics::{ImageRecord, Summary};

pub const ATTACK_CSV_HEADER: &str = "id,epsilon_255,attack_kind,psnr_db,ssim,mse,distance,steps,input_psnr_db,input_ssim,output_input_ssim,linf,mask_coverage,gradient_evaluations,final_loss";

/// `ε·255`, as an integer when it is one.
pub fn format_eps255(epsilon: f32) -> String {
    let v = epsilon as f64 * 255.0;
    if (v - v.round()).abs() < 1e-4 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.4}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn attack_records_csv<'a>(records: impl IntoIterator<Item = &'a AttackRecord>) -> String {
    let mut out = format!("{ATTACK_CSV_HEADER}\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.id,
            format_eps255(r.epsilon),
            r.kind,
            r.psnr_db,
            r.ssim,
            r.mse,
            r.distance,
            r.steps,
            r.input_psnr_db,
            r.input_ssim,
            r.output_input_ssim,
            r.linf,
            opt(r.mask_coverage),
            r.gradient_evaluations,
            opt(r.final_loss),
        ));
    }
    out
}

/// Inverse of [`attack_records_csv`].
pub fn parse_attack_csv(text: &str) -> Result<Vec<AttackRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == ATTACK_CSV_HEADER => {}
        _ => return Err(Error::format("attack CSV has an unexpected header")),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| parse_attack_row(line).map_err(|e| Error::format(format!("attack CSV line {}: {e}", i + 2))))
        .collect()
}

fn parse_attack_row(line: &str) -> std::result::Result<AttackRecord, String> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 15 {
        return Err(format!("expected 15 fields, found {}", f.len()));
    }
    fn num<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
        s.parse().map_err(|_| format!("bad number {s:?}"))
    }
    let optf = |s: &str| if s.is_empty() { Ok(None) } else { num::<f64>(s).map(Some) };
    let eps: f32 = num(f[1])?;
    Ok(AttackRecord {
        id: num(f[0])?,
        epsilon: eps / 255.0,
        kind: f[2].parse::<AttackKind>().map_err(|e| e.to_string())?,
        psnr_db: num(f[3])?,
        ssim: num(f[4])?,
        mse: num(f[5])?,
        distance: f[6].parse::<Distance>().map_err(|e| e.to_string())?,
        steps: num(f[7])?,
        input_psnr_db: num(f[8])?,
        input_ssim: num(f[9])?,
        output_input_ssim: num(f[10])?,
        linf: num(f[11])?,
        mask_coverage: optf(f[12])?,
        gradient_evaluations: num(f[13])?,
        final_loss: optf(f[14])?,
    })
}

/// Per-step attack objective, one row per `(image, ε, k, t)`.
pub fn loss_trace_csv(entries: &[SweepEntry]) -> String {
    let mut out = String::from("id,epsilon_255,steps,step,loss\n");
    for e in entries {
        for (t, l) in e.result.loss_trace.iter().enumerate() {
            out.push_str(&format!("{},{},{},{t},{l}\n", e.record.id, format_eps255(e.record.epsilon), e.record.steps));
        }
    }
    out
}

pub fn train_loss_csv(history: &[f64]) -> String {
    let mut out = String::from("step,loss\n");
    for (i, l) in history.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    out
}

pub fn image_records_csv(records: &[ImageRecord]) -> String {
    let mut out = String::from("id,psnr_db,ssim,mse\n");
    for r in records {
        out.push_str(&format!("{},{},{},{}\n", r.id, r.psnr_db, r.ssim, r.mse));
    }
    out
}

pub fn defense_curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("window,iteration,total_loss,clean_loss,adversarial_loss,val_psnr_db,val_ssim\n");
    for p in curve {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.window,
            p.iteration,
            p.total_loss,
            p.clean_loss,
            p.adversarial_loss,
            opt(p.val_psnr_db),
            opt(p.val_ssim)
        ));
    }
    out
}

/// Concatenate CSV tables that share a header. A single table comes back
/// unchanged.
pub fn merge_csv(tables: &[String]) -> Result<String> {
    let first = tables.first().ok_or_else(|| Error::config("nothing to merge"))?;
    let header = first.lines().next().unwrap_or_default();
    let mut out = format!("{header}\n");
    for t in tables {
        let mut lines = t.lines();
        if lines.next() != Some(header) {
            return Err(Error::format("cannot merge CSV tables with different headers"));
        }
        for l in lines.filter(|l| !l.is_empty()) {
            out.push_str(l);
            out.push('\n');
        }
    }
    Ok(out)
}

/// Mean damage to the input against mean damage to the output, per attack
/// setting.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ComparisonRow {
    pub kind: AttackKind,
    pub distance: Distance,
    pub epsilon: f32,
    pub steps: usize,
    pub images: usize,
    /// `I^δ` against `I`.
    pub input_psnr_db: f64,
    pub input_ssim: f64,
    /// `J_p^δ` against `J`.
    pub output_psnr_db: f64,
    pub output_ssim: f64,
}

pub fn comparison_table(records: &[AttackRecord]) -> Vec<ComparisonRow> {
    let mut groups: BTreeMap<(String, String, u32, usize), Vec<&AttackRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.kind.to_string(), r.distance.to_string(), r.epsilon.to_bits(), r.steps))
            .or_default()
            .push(r);
    }
    let mut rows: Vec<ComparisonRow> = groups
        .into_values()
        .map(|g| ComparisonRow {
            kind: g[0].kind,
            distance: g[0].distance,
            epsilon: g[0].epsilon,
            steps: g[0].steps,
            images: g.len(),
            input_psnr_db: Summary::of(g.iter().map(|r| r.input_psnr_db)).mean,
            input_ssim: Summary::of(g.iter().map(|r| r.input_ssim)).mean,
            output_psnr_db: Summary::of(g.iter().map(|r| r.psnr_db)).mean,
            output_ssim: Summary::of(g.iter().map(|r| r.ssim)).mean,
        })
        .collect();
    rows.sort_by(|a, b| {
        (a.kind.to_string(), a.distance.to_string(), a.steps)
            .cmp(&(b.kind.to_string(), b.distance.to_string(), b.steps))
            .then(a.epsilon.total_cmp(&b.epsilon))
    });
    rows
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("attack_kind,distance,epsilon_255,steps,images,input_psnr_db,input_ssim,output_psnr_db,output_ssim\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.kind,
            r.distance,
            format_eps255(r.epsilon),
            r.steps,
            r.images,
            r.input_psnr_db,
            r.input_ssim,
            r.output_psnr_db,
            r.output_ssim
        ));
    }
    out
}
