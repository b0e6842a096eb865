//! Paired dataset file.
//!
//! Layout, little-endian:
//!
//! ```text
//! "HZDS" | version u16 | count u32 | channels u16 (=3) | height u16 | width u16
//! count × ( hazy f32[3·H·W] plane-major | clear f32[3·H·W] plane-major )
//! ```
//!
//! A JSON sidecar records the master seed and the sampled haze parameters of
//! every pair.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scatter::{apply_haze, HazeParams};
use super::scene::{render_clear, SceneSpec, DEFAULT_PALETTE};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{Shape, Tensor};

pub const MAGIC: &[u8; 4] = b"HZDS";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;

pub const BETA_RANGE: (f32, f32) = (0.8, 2.5);
pub const AIRLIGHT_RANGE: (f32, f32) = (0.7, 1.0);
const OBJECT_COUNT_RANGE: (usize, usize) = (2, 6);

/// A hazy image and its clear counterpart, each `(1, 3, H, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePair {
    pub hazy: Tensor,
    pub clear: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub height: usize,
    pub width: usize,
    pub pairs: Vec<ImagePair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub index: usize,
    pub seed: u64,
    pub beta: f32,
    pub airlight: [f32; 3],
    pub object_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u16,
    pub master_seed: u64,
    pub count: usize,
    pub height: usize,
    pub width: usize,
    pub pairs: Vec<PairRecord>,
}

/// Sidecar path for a dataset file: `<path>.json`.
pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn image_shape(&self) -> Shape {
        Shape::new(1, 3, self.height, self.width)
    }

    /// Generate `count` pairs; pair `i` depends only on `(master_seed, i)`.
    pub fn generate(count: usize, height: usize, width: usize, master_seed: u64) -> Result<(Dataset, DatasetManifest)> {
        if count == 0 {
            return Err(Error::config("dataset must contain at least one pair"));
        }
        if height > u16::MAX as usize || width > u16::MAX as usize {
            return Err(Error::config("image dimensions must fit in u16"));
        }
        let mut pairs = Vec::with_capacity(count);
        let mut records = Vec::with_capacity(count);
        for index in 0..count {
            let (pair, record) = generate_pair(index, height, width, master_seed)?;
            pairs.push(pair);
            records.push(record);
        }
        let manifest = DatasetManifest {
            format: "HZDS".into(),
            version: VERSION,
            master_seed,
            count,
            height,
            width,
            pairs: records,
        };
        Ok((Dataset { height, width, pairs }, manifest))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let per = 3 * self.height * self.width;
        let mut out = Vec::with_capacity(HEADER_LEN + self.len() * 2 * per * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&3u16.to_le_bytes());
        out.extend_from_slice(&(self.height as u16).to_le_bytes());
        out.extend_from_slice(&(self.width as u16).to_le_bytes());
        for pair in &self.pairs {
            for t in [&pair.hazy, &pair.clear] {
                for v in t.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Dataset> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::format("dataset file shorter than its header"));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::format("not a dataset file (bad magic)"));
        }
        let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
        let version = u16_at(4);
        if version != VERSION {
            return Err(Error::format(format!("unsupported dataset version {version}")));
        }
        let count = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
        let (c, h, w) = (u16_at(10) as usize, u16_at(12) as usize, u16_at(14) as usize);
        if c != 3 {
            return Err(Error::format(format!("dataset has {c} channels, expected 3")));
        }
        let per = c * h * w;
        let expected = HEADER_LEN + count * 2 * per * 4;
        if bytes.len() != expected {
            return Err(Error::format(format!("dataset file is {} bytes, header implies {expected}", bytes.len())));
        }
        let shape = Shape::new(1, 3, h, w);
        let mut floats = bytes[HEADER_LEN..].chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")));
        let mut pairs = Vec::with_capacity(count);
        for _ in 0..count {
            let hazy = Tensor::new(shape, floats.by_ref().take(per).collect())?;
            let clear = Tensor::new(shape, floats.by_ref().take(per).collect())?;
            pairs.push(ImagePair { hazy, clear });
        }
        Ok(Dataset { height: h, width: w, pairs })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(fs::File::create(path)?);
        f.write_all(&self.to_bytes())?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        Dataset::from_bytes(&fs::read(path)?)
    }

    /// The first `n` pairs (or all of them).
    pub fn take(&self, n: usize) -> Dataset {
        Dataset { height: self.height, width: self.width, pairs: self.pairs.iter().take(n).cloned().collect() }
    }
}

fn generate_pair(index: usize, height: usize, width: usize, master_seed: u64) -> Result<(ImagePair, PairRecord)> {
    let seed = rng::derive_seed(master_seed, "pair", index as u64);
    let mut hr = rng::substream(master_seed, "haze", index as u64);
    let beta = hr.gen_range(BETA_RANGE.0..=BETA_RANGE.1);
    let airlight = hr.gen_range(AIRLIGHT_RANGE.0..=AIRLIGHT_RANGE.1);
    let object_count = hr.gen_range(OBJECT_COUNT_RANGE.0..=OBJECT_COUNT_RANGE.1);
    let spec = SceneSpec { seed, height, width, object_count, palette: DEFAULT_PALETTE.to_vec() };
    let (clear, depth) = render_clear(&spec)?;
    let params = HazeParams::new(beta, airlight);
    let hazy = apply_haze(&clear, &depth, &params)?;
    debug_assert!(hazy.data().iter().all(|v| (0.0..=1.0).contains(v)));
    Ok((
        ImagePair { hazy, clear },
        PairRecord { index, seed, beta, airlight: params.airlight, object_count },
    ))
}

/// Generate a dataset and write it to `path` plus its JSON sidecar.
pub fn gen_dataset(count: usize, height: usize, width: usize, master_seed: u64, path: &Path) -> Result<(Dataset, DatasetManifest)> {
    let (dataset, manifest) = Dataset::generate(count, height, width, master_seed)?;
    dataset.save(path)?;
    fs::write(manifest_path(path), serde_json::to_string_pretty(&manifest)?)?;
    Ok((dataset, manifest))
}
