use std::path::Path;

use crate::output::{read_manifest, verify_dir};
use crate::{CliResult, Finished};

pub fn run(dir: &Path) -> CliResult<Finished> {
    let manifest = read_manifest(dir)?;
    let bad = verify_dir(dir)?;
    for path in &bad {
        eprintln!("checksum mismatch: {path}");
    }
    println!("{} artifacts, {} mismatched", manifest.artifacts.len(), bad.len());
    Ok(Finished { manifest, exit_code: if bad.is_empty() { 0 } else { 3 } })
}
