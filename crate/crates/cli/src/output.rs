//! Atomic file output. Every file is written to a temporary sibling and
//! renamed into place, so an error never leaves a partial file behind.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use frac_eig_core::GridFunction;
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot write in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Renders rows with a header through the `csv` writer.
pub fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))
}

/// Like [`csv_bytes`] but with an explicit header, for row types whose
/// columns depend on the run (e.g. `y` only in 2D).
pub fn csv_records(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))
}

/// `node_index,x,[y,]u`.
pub fn eigenfunction_csv(u: &GridFunction) -> Result<Vec<u8>> {
    let g = u.grid();
    let two_d = g.dim() == 2;
    let header: &[&str] = if two_d { &["node_index", "x", "y", "u"] } else { &["node_index", "x", "u"] };
    let rows = u.values().iter().enumerate().map(|(i, v)| {
        let x = g.node(i);
        let mut r = vec![i.to_string(), x[0].to_string()];
        if two_d {
            r.push(x[1].to_string());
        }
        r.push(v.to_string());
        r
    });
    csv_records(header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn atomic_write_creates_dirs_and_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/b/out.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn eigenfunction_columns() {
        let g = Arc::new(frac_eig_core::build_grid_1d(0.0, 1.0, 2).unwrap());
        let u = GridFunction::new(g, vec![1.0, 0.5]).unwrap();
        let text = String::from_utf8(eigenfunction_csv(&u).unwrap()).unwrap();
        assert_eq!(text, "node_index,x,u\n0,0.25,1\n1,0.75,0.5\n");
    }
}
