use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: usize,
    pub psnr_db: f64,
    pub ssim: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Summary {
        let values: Vec<f64> = values.into_iter().collect();
        if values.is_empty() {
            return Summary { mean: f64::NAN, std: f64::NAN };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Summary { mean, std: var.sqrt() }
    }
}

/// Per-image metrics with aggregates and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub records: Vec<ImageRecord>,
    pub psnr: Summary,
    pub ssim: Summary,
    pub mse: Summary,
    /// Free-form provenance: checkpoint hash, attack configuration, etc.
    pub provenance: serde_json::Value,
}

impl MetricsReport {
    pub fn new(records: Vec<ImageRecord>, provenance: serde_json::Value) -> Self {
        MetricsReport {
            psnr: Summary::of(records.iter().map(|r| r.psnr_db)),
            ssim: Summary::of(records.iter().map(|r| r.ssim)),
            mse: Summary::of(records.iter().map(|r| r.mse)),
            records,
            provenance,
        }
    }
}
