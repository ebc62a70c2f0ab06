//! Output directory handling and the run manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::config::{Format, RunConfig};
use crate::error::CliError;

pub struct Output {
    dir: PathBuf,
    formats: Vec<Format>,
    written: Vec<String>,
    started: Instant,
}

impl Output {
    pub fn create(dir: &Path, formats: &[Format]) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Output { dir: dir.to_path_buf(), formats: formats.to_vec(), written: Vec::new(), started: Instant::now() })
    }

    fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
    ) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush().map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Writes a JSON document, pretty-printed.
    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.dir.join(name);
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(|e| CliError::io(&path, e.into()))?;
            writeln!(w).map_err(|e| CliError::io(&path, e))
        })
    }

    /// Writes a numeric table as `stem.csv` and/or `stem.json` per the
    /// configured formats.
    pub fn table(&mut self, stem: &str, header: &[String], rows: &[Vec<f64>]) -> Result<(), CliError> {
        for format in self.formats.clone() {
            match format {
                Format::Csv => self.write_with(&format!("{stem}.csv"), |w| {
                    ringtheta::io::write_table(w, header, rows.iter()).map_err(CliError::from)
                })?,
                Format::Json => {
                    let records: Vec<Value> = rows
                        .iter()
                        .map(|r| Value::Object(header.iter().cloned().zip(r.iter().map(|v| Value::from(*v))).collect()))
                        .collect();
                    self.json(&format!("{stem}.json"), &records)?
                }
            }
        }
        Ok(())
    }

    /// Writes `manifest.json` last, listing everything written before it.
    pub fn finish<C: Serialize + serde::de::DeserializeOwned + Default>(
        mut self,
        run: &RunConfig<C>,
        threads: usize,
    ) -> Result<Vec<String>, CliError> {
        let manifest = serde_json::json!({
            "command": run.command,
            "config_hash": run.hash(),
            "config": run.to_file_value(),
            "versions": {
                "ringtheta": ringtheta::VERSION,
                "ringtheta-cli": env!("CARGO_PKG_VERSION"),
            },
            "platform": format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS),
            "threads": threads,
            "wall_time_s": self.started.elapsed().as_secs_f64(),
            "outputs": self.written,
        });
        self.json("manifest.json", &manifest)?;
        Ok(self.written)
    }
}
