//! Small shared helpers: atomic file writes, percentage rendering, text normalization.

use std::fs;
use std::io::Write;
use std::path::Path;

/// Writes `bytes` to `path` atomically: the data lands in a temporary file in the
/// same directory and is renamed over the target, so readers never observe a
/// partially written file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let dir = match dir {
        Some(d) => d.to_path_buf(),
        None => std::env::current_dir()?,
    };
    fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Renders `numerator / denominator` as a percentage with exactly one decimal,
/// using exact integer arithmetic with half-up rounding (no float drift).
/// A zero denominator renders as "0.0".
pub fn percent_one_decimal(numerator: u64, denominator: u64) -> String {
    if denominator == 0 {
        return "0.0".to_string();
    }
    // tenths of a percent, rounded half-up: round(n * 1000 / d)
    let tenths = (numerator as u128 * 1000 * 2 + denominator as u128) / (2 * denominator as u128);
    format!("{}.{}", tenths / 10, tenths % 10)
}

/// Lowercases and collapses all whitespace runs to single spaces; used as a
/// text-identity key for passage deduplication.
pub fn normalized_text_key(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last_space = true;
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !last_space {
                out.push(' ');
                last_space = true;
            }
        } else {
            for lc in ch.to_lowercase() {
                out.push(lc);
            }
            last_space = false;
        }
    }
    if out.ends_with(' ') {
        out.pop();
    }
    out
}

/// Current wall-clock instant in RFC 3339 / ISO-8601 form (UTC, second precision).
pub fn now_iso8601() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}
