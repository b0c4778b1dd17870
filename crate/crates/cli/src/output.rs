//! Output routing. Machine output (CSV, JSON) goes to `--out` when given
//! and to standard output otherwise; the human summary takes whichever
//! stream the data does not occupy, so piping the data never mixes in
//! prose.

use std::path::{Path, PathBuf};

use crate::error::{Failure, Result};

pub struct DataSink {
    path: Option<PathBuf>,
}

impl DataSink {
    pub fn new(path: Option<PathBuf>) -> Self {
        DataSink { path }
    }

    pub fn write(&self, data: &str) -> Result<()> {
        match &self.path {
            Some(path) => write_file(path, data.as_bytes()),
            None => {
                print!("{data}");
                Ok(())
            }
        }
    }

    /// Human summary line; stderr when the data went to stdout.
    pub fn summary(&self, line: &str) {
        match &self.path {
            Some(_) => println!("{line}"),
            None => eprintln!("{line}"),
        }
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes)
        .map_err(|err| Failure::usage(format!("cannot write {}: {err}", path.display())))
}
