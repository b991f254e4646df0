//! Artifact writers. Every CSV starts with a `#` comment line declaring
//! the units of its columns; the plot manifest names x/y columns.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// A column with its unit.
pub struct Column {
    pub name: String,
    pub unit: String,
}

pub fn col(name: impl Into<String>, unit: impl Into<String>) -> Column {
    Column {
        name: name.into(),
        unit: unit.into(),
    }
}

#[derive(Debug, Serialize)]
pub struct PlotEntry {
    pub file: String,
    pub x: String,
    pub y: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group_by: Option<String>,
    pub log_x: bool,
    pub log_y: bool,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub task: String,
    pub plots: Vec<PlotEntry>,
}

/// Output directory plus the files written so far.
pub struct Artifacts {
    pub dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn file(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.dir.join(name);
        let f = File::create(&path)?;
        self.written.push(path);
        Ok(BufWriter::new(f))
    }

    /// Numeric table; non-finite values are written as `nan`/`inf`.
    pub fn csv(&mut self, name: &str, columns: &[Column], rows: &[Vec<f64>]) -> Result<(), CliError> {
        let mut out = self.file(name)?;
        let units: Vec<String> = columns.iter().map(|c| format!("{}[{}]", c.name, c.unit)).collect();
        writeln!(out, "# units: {}", units.join(", "))?;
        let names: Vec<&str> = columns.iter().map(|c| c.name.as_str()).collect();
        writeln!(out, "{}", names.join(","))?;
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Table whose first column is text.
    pub fn labelled_csv(
        &mut self,
        name: &str,
        label: Column,
        columns: &[Column],
        rows: &[(String, Vec<f64>)],
    ) -> Result<(), CliError> {
        let mut out = self.file(name)?;
        let mut units = vec![format!("{}[{}]", label.name, label.unit)];
        units.extend(columns.iter().map(|c| format!("{}[{}]", c.name, c.unit)));
        writeln!(out, "# units: {}", units.join(", "))?;
        let mut names = vec![label.name.as_str()];
        names.extend(columns.iter().map(|c| c.name.as_str()));
        writeln!(out, "{}", names.join(","))?;
        for (text, row) in rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
            writeln!(out, "{text},{}", cells.join(","))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut out = self.file(name)?;
        serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Failed(e.to_string()))?;
        writeln!(out)?;
        out.flush()?;
        Ok(())
    }

    pub fn manifest(&mut self, task: &str, plots: Vec<PlotEntry>) -> Result<(), CliError> {
        self.json(
            "plot_manifest.json",
            &Manifest {
                task: task.to_string(),
                plots,
            },
        )
    }
}

pub fn plot(file: &str, x: &str, y: &[&str]) -> PlotEntry {
    PlotEntry {
        file: file.to_string(),
        x: x.to_string(),
        y: y.iter().map(|s| s.to_string()).collect(),
        group_by: None,
        log_x: false,
        log_y: false,
    }
}
