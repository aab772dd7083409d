//! File output that never leaves partially written files behind.

use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Writes `path` through a temporary file in the same directory and renames
/// it into place once `write` succeeds.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        write(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Deferred writer for one output file.
pub type FileWriter<'a> = Box<dyn FnOnce(&mut dyn Write) -> Result<()> + 'a>;

/// Writes several files, creating none of them unless every writer succeeds.
pub fn write_all_atomic(files: Vec<(&Path, FileWriter<'_>)>) -> Result<()> {
    let mut staged = Vec::with_capacity(files.len());
    for (path, write) in files {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
        {
            let mut w = BufWriter::new(tmp.as_file());
            write(&mut w)?;
            w.flush().map_err(|e| Error::io(path, e))?;
        }
        staged.push((path, tmp));
    }
    for (path, tmp) in staged {
        tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_writer_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        let err = write_all_atomic(vec![
            (
                &a,
                Box::new(|w: &mut dyn Write| w.write_all(b"ok").map_err(|e| Error::io("a", e))),
            ),
            (
                &b,
                Box::new(|_: &mut dyn Write| Err(Error::InvalidConfig("boom".into()))),
            ),
        ]);
        assert!(err.is_err());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn successful_write_lands() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        write_atomic(&a, |w| w.write_all(b"hello").map_err(|e| Error::io("a", e))).unwrap();
        assert_eq!(std::fs::read_to_string(&a).unwrap(), "hello");
    }
}
