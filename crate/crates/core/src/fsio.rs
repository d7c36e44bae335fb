//! Atomic file writes: reports and checkpoints are staged to a sibling
//! temporary file and renamed into place, so interrupted runs never leave a
//! partial file behind.

use std::fs;
use std::io;
use std::path::Path;

pub fn atomic_write(path: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> io::Result<()> {
    let path = path.as_ref();
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, contents.as_ref())?;
    fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_and_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        atomic_write(&path, "a,b\n").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "a,b\n");
        atomic_write(&path, "c,d\n").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "c,d\n");
        // no stray temp file
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
