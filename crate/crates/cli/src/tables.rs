//! Frequency tables: explicit files, the `MALLOWS_TABLE_DIR` cache, or
//! enumeration on the fly.

use std::path::{Path, PathBuf};

use mallows_core::partition::{build_frequency_table, DistanceFrequencyTable, N_ENUM_MAX};
use mallows_core::MallowsError;

use crate::error::{CliError, CliResult};
use crate::manifest::{file_err, Run};

pub const TABLE_DIR_ENV: &str = "MALLOWS_TABLE_DIR";

pub fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(TABLE_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

pub fn cache_path(dir: &Path, n: usize) -> PathBuf {
    dir.join(format!("spearman_n{n}.table"))
}

fn parse(run: &mut Run, path: &Path, n: usize) -> CliResult<DistanceFrequencyTable> {
    let bytes = run.read_input(path)?;
    let text = String::from_utf8(bytes).map_err(|e| CliError::Core(MallowsError::TableFormat { line: 0, msg: e.to_string() }))?;
    let table = DistanceFrequencyTable::from_text(&text)?;
    if table.n() != n {
        return Err(MallowsError::LengthMismatch { expected: n, found: table.n() }.into());
    }
    Ok(table)
}

/// Table for `n` items. An explicit file wins; then the cache directory,
/// which is filled on a miss when `n` is small enough to enumerate.
pub fn table_for(run: &mut Run, n: usize, explicit: Option<&Path>) -> CliResult<DistanceFrequencyTable> {
    if let Some(path) = explicit {
        return parse(run, path, n);
    }
    let cached = cache_dir().map(|d| cache_path(&d, n));
    if let Some(path) = cached.as_deref().filter(|p| p.exists()) {
        log::info!("loading frequency table from {}", path.display());
        return parse(run, path, n);
    }
    if n > N_ENUM_MAX {
        return Err(MallowsError::EnumerationLimit { n, max: N_ENUM_MAX }.into());
    }
    let table = build_frequency_table(n)?;
    if let Some(path) = cached {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|source| file_err(dir, source))?;
        }
        std::fs::write(&path, table.to_text()).map_err(|source| file_err(&path, source))?;
        log::info!("cached frequency table at {}", path.display());
    }
    Ok(table)
}
