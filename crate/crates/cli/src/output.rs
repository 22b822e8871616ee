use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use tvfactor::{Error, Result};

/// Writes `bytes` next to `path` and renames into place, so readers never
/// see a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::ConfigError(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    fs::rename(&tmp, path).map_err(io)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse {
            line: 0,
            detail: format!("{}: {e}", path.display()),
        })?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse {
        line: 0,
        detail: format!("{}: {e}", path.display()),
    })?;
    write_atomic(path, &bytes)
}
