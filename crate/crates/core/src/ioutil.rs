//! Small shared file-I/O helpers.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Write via a sibling temp file then rename, so partial writes never
/// replace an existing artifact.
pub(crate) fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "tmp.{}",
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub(crate) fn read_exact_chunk(buf: &[u8], at: usize, len: usize) -> Option<&[u8]> {
    buf.get(at..at + len)
}
