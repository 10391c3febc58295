use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Output directory plus the JSON-lines mirror on stdout.
pub struct Sink {
    dir: PathBuf,
}

impl Sink {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Sink { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn file(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.path(name);
        let f = File::create(&path).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        Ok(BufWriter::new(f))
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        serde_json::to_writer_pretty(self.file(name)?, value)?;
        Ok(())
    }

    /// Prints one summary record as a single JSON line.
    pub fn emit<T: Serialize>(&self, value: &T) -> Result<(), CliError> {
        println!("{}", serde_json::to_string(value)?);
        Ok(())
    }

    pub fn csv(&self, name: &str) -> Result<csv::Writer<BufWriter<File>>, CliError> {
        Ok(csv::Writer::from_writer(self.file(name)?))
    }
}

pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `time,<prefix>1,...` rows.
pub fn write_series(
    out: &mut csv::Writer<BufWriter<File>>,
    prefix: &str,
    times: &[f64],
    rows: &[Vec<f64>],
) -> Result<(), CliError> {
    let width = rows.first().map_or(0, Vec::len);
    let mut header = vec!["time".to_string()];
    header.extend((1..=width).map(|i| format!("{prefix}{i}")));
    out.write_record(&header)?;
    for (t, row) in times.iter().zip(rows) {
        let mut rec = vec![fmt(*t)];
        rec.extend(row.iter().map(|v| fmt(*v)));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a `time,y1,...` observation file.
pub fn read_series(path: &Path) -> Result<(Vec<f64>, Vec<Vec<f64>>), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Config(format!("{} row {}: {e}", path.display(), i + 1)))?;
        if vals.len() < 2 {
            return Err(CliError::Config(format!(
                "{} row {}: need a time and at least one value",
                path.display(),
                i + 1
            )));
        }
        times.push(vals[0]);
        rows.push(vals[1..].to_vec());
    }
    if rows.is_empty() {
        return Err(CliError::Config(format!("{} has no rows", path.display())));
    }
    Ok((times, rows))
}
