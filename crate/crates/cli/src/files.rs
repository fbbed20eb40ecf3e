//! Reading inputs and writing outputs. Every error names the file involved.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use opdepth_core::config::ConfigFile;
use opdepth_core::io::{read_csv_depth, read_intrinsics, read_pfm, write_csv_depth, write_pfm};
use opdepth_core::{DepthMap, Intrinsics};

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// PFM, or comma-separated text when the extension is `.csv`.
pub fn read_depth(path: &Path) -> Result<DepthMap> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let parsed = if is_csv(path) {
        let text = String::from_utf8(bytes)
            .with_context(|| format!("{}: not UTF-8 text", path.display()))?;
        read_csv_depth(&text)
    } else {
        read_pfm(&bytes)
    };
    parsed.with_context(|| format!("{}", path.display()))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn read_k(path: &Path) -> Result<Intrinsics> {
    read_intrinsics(&read_text(path)?).with_context(|| format!("{}", path.display()))
}

/// The parsed config file, or an empty configuration.
pub fn read_config(path: Option<&Path>) -> Result<ConfigFile> {
    match path {
        Some(p) => ConfigFile::parse(&read_text(p)?).with_context(|| format!("{}", p.display())),
        None => Ok(ConfigFile::default()),
    }
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so a failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)
        .and_then(|_| tmp.as_file().sync_all())
        .with_context(|| format!("cannot write {}", path.display()))?;
    tmp.persist(path)
        .map_err(|e| e.error)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn write_depth(path: &Path, depth: &DepthMap) -> Result<()> {
    if is_csv(path) {
        write_atomic(path, write_csv_depth(depth).as_bytes())
    } else {
        write_atomic(path, &write_pfm(depth))
    }
}
