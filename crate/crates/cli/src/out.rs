//! Atomic artifact writing.
//!
//! Every report and plot-data file is first written to a sibling `*.tmp`
//! path and renamed into place, so an interrupted run never leaves a torn
//! file where a consumer expects a complete one.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    pub fn create(dir: &Path) -> std::io::Result<OutDir> {
        fs::create_dir_all(dir)?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
        })
    }

    fn write_atomic(&self, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
        let final_path = self.dir.join(name);
        let tmp = self.dir.join(format!("{name}.tmp"));
        {
            let mut fh = fs::File::create(&tmp)?;
            fh.write_all(bytes)?;
            fh.sync_all()?;
        }
        fs::rename(&tmp, &final_path)?;
        Ok(final_path)
    }

    /// Writes a JSON document, ensuring a trailing newline.
    pub fn write_json(&self, name: &str, text: &str) -> std::io::Result<PathBuf> {
        let mut bytes = text.as_bytes().to_vec();
        if bytes.last() != Some(&b'\n') {
            bytes.push(b'\n');
        }
        self.write_atomic(name, &bytes)
    }

    /// Writes a CSV file with the given header and rows.
    pub fn write_csv(
        &self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> std::io::Result<PathBuf> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e))?;
        for row in rows {
            w.write_record(row)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e))?;
        self.write_atomic(name, &bytes)
    }
}
