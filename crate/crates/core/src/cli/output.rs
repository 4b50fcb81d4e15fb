//! CSV and JSON writers. Every file starts with the version and the
//! normalized config, so each one describes itself.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::Result;

use super::experiments::{ExperimentOutput, Table, VERSION};

fn header<W: Write>(out: &mut W, output: &ExperimentOutput) -> std::io::Result<()> {
    let r = &output.report;
    writeln!(out, "# logshare {VERSION}")?;
    writeln!(out, "# experiment: {}", r.experiment.name())?;
    writeln!(out, "# limit: {}", r.limit)?;
    writeln!(out, "# config: {}", r.config.to_json())
}

pub fn write_table<W: Write>(out: &mut W, output: &ExperimentOutput, table: &Table) -> std::io::Result<()> {
    header(out, output)?;
    writeln!(out, "{}", table.columns.join(","))?;
    for row in &table.rows {
        let mut first = true;
        for v in row {
            if !first {
                out.write_all(b",")?;
            }
            first = false;
            write!(out, "{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Writes `<table>.csv` for each table and `report.json` into `dir`,
/// returning the paths written.
pub fn write_outputs(dir: &Path, output: &ExperimentOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for table in &output.tables {
        let path = dir.join(format!("{}.csv", table.name));
        let mut w = BufWriter::new(fs::File::create(&path)?);
        write_table(&mut w, output, table)?;
        w.flush()?;
        written.push(path);
    }
    let path = dir.join("report.json");
    let mut w = BufWriter::new(fs::File::create(&path)?);
    serde_json::to_writer_pretty(&mut w, &output.report)?;
    writeln!(w)?;
    w.flush()?;
    written.push(path);
    Ok(written)
}
