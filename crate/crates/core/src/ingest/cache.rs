//! Local vintage cache of library files.
//!
//! Layout: `<cache_dir>/<dataset_id>/<vintage>/<original_name>`, where the
//! vintage is the download date (`YYYY-MM-DD`). Files are stored byte-exact
//! as served and never rewritten. Writers serialize on `<cache_dir>/.lock`.

use std::fs::{self, File};
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};
use crate::timeseries::ReturnPanel;

use super::parse::parse_french_csv;
use super::registry::{canonical_panel, DatasetId};

const MAX_DOWNLOAD_BYTES: u64 = 64 << 20;

/// A parsed dataset plus where it came from.
#[derive(Debug, Clone)]
pub struct Fetched {
    pub id: DatasetId,
    pub panel: ReturnPanel,
    pub vintage: String,
    pub path: PathBuf,
}

pub fn dataset_dir(cache_dir: &Path, id: DatasetId) -> PathBuf {
    cache_dir.join(id.to_string())
}

/// Cached vintages of `id`, oldest first.
pub fn vintages(cache_dir: &Path, id: DatasetId) -> Vec<String> {
    let Ok(rd) = fs::read_dir(dataset_dir(cache_dir, id)) else {
        return Vec::new();
    };
    let mut out: Vec<String> = rd
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir() && cached_file(&e.path()).is_some())
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    out.sort();
    out
}

fn cached_file(vintage_dir: &Path) -> Option<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(vintage_dir)
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|x| x.to_str())
                    .is_some_and(|x| matches!(x.to_ascii_lowercase().as_str(), "zip" | "csv"))
        })
        .collect();
    files.sort();
    files.into_iter().next()
}

/// Returns the newest cached copy of `id`, downloading one first if the
/// cache is empty and `offline` is not set.
pub fn fetch(id: DatasetId, cache_dir: &Path, offline: bool) -> Result<Fetched> {
    if let Some(vintage) = vintages(cache_dir, id).pop() {
        return load_vintage(id, cache_dir, &vintage);
    }
    if offline {
        return Err(Error::FetchFailed {
            dataset: id.to_string(),
            detail: format!(
                "offline and no cached copy under {}",
                dataset_dir(cache_dir, id).display()
            ),
        });
    }
    let vintage = download(id, cache_dir)?;
    load_vintage(id, cache_dir, &vintage)
}

/// Parses a specific cached vintage.
pub fn load_vintage(id: DatasetId, cache_dir: &Path, vintage: &str) -> Result<Fetched> {
    let dir = dataset_dir(cache_dir, id).join(vintage);
    let path = cached_file(&dir).ok_or_else(|| Error::FetchFailed {
        dataset: id.to_string(),
        detail: format!("vintage {vintage} not in cache"),
    })?;
    let panel = load_path(id, &path)?;
    Ok(Fetched {
        id,
        panel,
        vintage: vintage.to_string(),
        path,
    })
}

/// Parses a library file (ZIP or CSV) at an explicit path.
pub fn load_path(id: DatasetId, path: &Path) -> Result<ReturnPanel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = decode(id, &bytes)?;
    let sections = parse_french_csv(&text)?;
    canonical_panel(id, &sections)
}

/// Text of a CSV, unpacking a single-entry ZIP if needed.
fn decode(id: DatasetId, bytes: &[u8]) -> Result<String> {
    if !bytes.starts_with(b"PK\x03\x04") {
        return Ok(String::from_utf8_lossy(bytes).into_owned());
    }
    let corrupt = |detail: String| Error::CorruptDataset {
        dataset: id.to_string(),
        detail,
    };
    let mut archive =
        zip::ZipArchive::new(Cursor::new(bytes)).map_err(|e| corrupt(format!("bad zip: {e}")))?;
    let csv_entries: Vec<usize> = (0..archive.len())
        .filter(|&i| {
            archive
                .by_index(i)
                .is_ok_and(|f| f.name().to_ascii_lowercase().ends_with(".csv"))
        })
        .collect();
    let [only] = csv_entries[..] else {
        return Err(corrupt(format!(
            "expected one CSV in archive, found {}",
            csv_entries.len()
        )));
    };
    let mut entry = archive.by_index(only).map_err(|e| corrupt(e.to_string()))?;
    let mut raw = Vec::new();
    entry
        .read_to_end(&mut raw)
        .map_err(|e| corrupt(format!("unzip: {e}")))?;
    Ok(String::from_utf8_lossy(&raw).into_owned())
}

/// Downloads `id` into a new vintage directory and returns the vintage tag.
pub fn download(id: DatasetId, cache_dir: &Path) -> Result<String> {
    let failed = |detail: String| Error::FetchFailed {
        dataset: id.to_string(),
        detail,
    };
    let bytes = ureq::get(&id.url())
        .call()
        .map_err(|e| {
            failed(format!(
                "{e} (cache miss for {})",
                dataset_dir(cache_dir, id).display()
            ))
        })?
        .body_mut()
        .with_config()
        .limit(MAX_DOWNLOAD_BYTES)
        .read_to_vec()
        .map_err(|e| failed(e.to_string()))?;

    // Validate before anything lands in the cache.
    let text = decode(id, &bytes)?;
    canonical_panel(id, &parse_french_csv(&text)?)?;

    let vintage = today_utc();
    store(id, cache_dir, &vintage, &id.remote_file(), &bytes)?;
    Ok(vintage)
}

/// Writes raw bytes as a vintage. Existing vintages are left untouched.
pub fn store(
    id: DatasetId,
    cache_dir: &Path,
    vintage: &str,
    file_name: &str,
    bytes: &[u8],
) -> Result<PathBuf> {
    fs::create_dir_all(cache_dir).map_err(|e| Error::io(cache_dir, e))?;
    let lock_path = cache_dir.join(".lock");
    let lock = File::create(&lock_path).map_err(|e| Error::io(&lock_path, e))?;
    lock.lock().map_err(|e| Error::io(&lock_path, e))?;

    let dir = dataset_dir(cache_dir, id).join(vintage);
    let target = dir.join(file_name);
    if !target.exists() {
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let tmp = dir.join(format!(".{file_name}.partial"));
        fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &target).map_err(|e| Error::io(&target, e))?;
    }
    lock.unlock().map_err(|e| Error::io(&lock_path, e))?;
    Ok(target)
}

fn today_utc() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let (y, m, d) = civil_from_days((secs / 86_400) as i64);
    format!("{y:04}-{m:02}-{d:02}")
}

/// Days since 1970-01-01 to a proleptic Gregorian date.
fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    let y = yoe + era * 400 + i64::from(m <= 2);
    (y, m, d)
}
