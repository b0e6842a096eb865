use std::fs;

use dehaze_adv::haze::{gen_dataset, manifest_path};
use dehaze_adv::metrics::{psnr, Summary};

use crate::args::GenArgs;
use crate::error::CliResult;

pub fn run(a: &GenArgs) -> CliResult<()> {
    let sidecar = manifest_path(&a.out);
    if sidecar.exists() {
        fs::remove_file(&sidecar)?;
    }
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let width = a.width.unwrap_or(a.size);
    let (ds, _) = gen_dataset(a.count, a.size, width, a.seed, &a.out)?;
    let hazy = Summary::of(ds.pairs.iter().map(|p| psnr(&p.hazy, &p.clear).unwrap_or(f64::NAN)));
    println!(
        "wrote {} pairs of {}x{} to {} (hazy vs clear: {:.2} dB mean)",
        ds.len(),
        a.size,
        width,
        a.out.display(),
        hazy.mean
    );
    Ok(())
}
