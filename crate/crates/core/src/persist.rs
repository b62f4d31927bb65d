//! Crash-safe file replacement.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// When set to a byte count, checkpoint saves abort the process after
/// writing that many bytes of the temporary file. Used by crash tests.
pub const FAULT_ENV: &str = "ASAG_FAULT_ABORT_AFTER_BYTES";

fn temp_path(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp-{}", std::process::id()))
}

/// Write `bytes` to a temporary sibling, fsync it, rename it over `path`
/// and fsync the directory. Readers see either the old or the new file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    write_replace(path, bytes, None)
}

/// [`atomic_write`] that honours [`FAULT_ENV`].
pub fn atomic_write_faultable(path: &Path, bytes: &[u8]) -> io::Result<()> {
    write_replace(path, bytes, fault_limit())
}

fn write_replace(path: &Path, bytes: &[u8], fault: Option<usize>) -> io::Result<()> {
    let tmp = temp_path(path);
    let result = (|| {
        let mut f = File::create(&tmp)?;
        match fault {
            Some(limit) if limit < bytes.len() => {
                f.write_all(&bytes[..limit])?;
                f.sync_all()?;
                eprintln!(
                    "fault injection: aborting after {limit} bytes of {}",
                    path.display()
                );
                std::process::abort();
            }
            _ => f.write_all(bytes)?,
        }
        f.sync_all()?;
        drop(f);
        fs::rename(&tmp, path)?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            File::open(dir)?.sync_all()?;
        }
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn fault_limit() -> Option<usize> {
    std::env::var(FAULT_ENV).ok()?.trim().parse().ok()
}
