mod attack;
mod defend;
mod gen;
mod report;
mod train;

use std::path::Path;

use dehaze_adv::haze::Dataset;
use dehaze_adv::model::{load_checkpoint, ModelParams};

use crate::args::Command;
use crate::error::{CliError, CliResult};
use crate::manifest::remove_stale;

pub fn run(command: Command) -> CliResult<()> {
    // Clear the old manifest before any input is read, so a run that fails
    // early cannot leave a previous success on record.
    let out = match &command {
        Command::Gen(_) => None,
        Command::Train(a) => Some(&a.out),
        Command::Attack(a) => Some(&a.out),
        Command::Defend(a) => Some(&a.out),
        Command::Report(a) => Some(&a.out),
    };
    if let Some(out) = out.filter(|o| o.is_dir()) {
        remove_stale(out)?;
    }
    match command {
        Command::Gen(a) => gen::run(&a),
        Command::Train(a) => train::run(&a),
        Command::Attack(a) => attack::run(&a),
        Command::Defend(a) => defend::run(&a),
        Command::Report(a) => report::run(&a),
    }
}

pub(crate) fn load_dataset(path: &Path, limit: Option<usize>) -> CliResult<Dataset> {
    let ds = Dataset::load(path).map_err(|e| CliError::Runtime(format!("cannot load dataset {}: {e}", path.display())))?;
    match limit {
        Some(0) => Err(CliError::usage("--limit must be at least 1")),
        Some(n) => Ok(ds.take(n)),
        None => Ok(ds),
    }
}

pub(crate) fn load_model(path: &Path) -> CliResult<ModelParams> {
    load_checkpoint(path).map_err(|e| CliError::Runtime(format!("cannot load checkpoint {}: {e}", path.display())))
}
