//! Output files: schema-tagged CSV writers and the run manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::sha256_hex;
use crate::error::{CliError, CliResult};

pub const DECISIONS_SCHEMA: &str = "# driftguard decisions v1";
pub const REPORT_SCHEMA: &str = "# driftguard report v1";
pub const RESULTS_SCHEMA: &str = "# driftguard bench results v1";
pub const PLOT_SCHEMA: &str = "# driftguard plot data v1";
pub const TRACE_SCHEMA: &str = "# driftguard tune trace v1";

pub type CsvOut = csv::Writer<BufWriter<File>>;

pub fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::runtime(&format!("cannot create {}", dir.display()), e))
}

/// Opens `path` and writes the schema comment line.
pub fn csv_out(path: &Path, schema: &str) -> CliResult<CsvOut> {
    let file = File::create(path).map_err(|e| CliError::runtime(&format!("cannot create {}", path.display()), e))?;
    let mut buf = BufWriter::new(file);
    writeln!(buf, "{schema}").map_err(|e| CliError::runtime("write failed", e))?;
    Ok(csv::Writer::from_writer(buf))
}

pub fn write_row<I, S>(w: &mut CsvOut, row: I) -> CliResult<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| CliError::runtime("write failed", e))
}

pub fn finish(mut w: CsvOut) -> CliResult<()> {
    w.flush().map_err(|e| CliError::runtime("write failed", e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::runtime(&format!("cannot write {}", path.display()), e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
}

impl InputRecord {
    pub fn of(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        Ok(InputRecord {
            path: path.to_path_buf(),
            sha256: sha256_hex(&bytes),
        })
    }
}

/// Written as `manifest.json` into every output directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: Option<PathBuf>,
    pub config_sha256: Option<String>,
    pub inputs: Vec<InputRecord>,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
}

impl RunManifest {
    pub fn write(&self) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::runtime("manifest", e))?;
        write_text(&self.out_dir.join("manifest.json"), &(text + "\n"))
    }
}
