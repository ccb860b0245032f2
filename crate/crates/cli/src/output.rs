//! CSV and manifest writers.
//!
//! Every CSV starts with one metadata line
//! `# experiment=<id> family=<family> seed=<seed> config_hash=<hash> rows=<n>`,
//! then a header row, then exactly `rows` data rows. Floats use Rust's
//! shortest round-trip formatting; an empty field means "unavailable".

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::CliError;

/// Identifies the run a CSV belongs to.
#[derive(Clone, Debug)]
pub struct RunStamp {
    pub experiment: &'static str,
    pub seed: u64,
    pub config_hash: String,
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// A table under construction.
pub struct Table {
    family: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(family: impl Into<String>, header: &[&str]) -> Self {
        Table { family: family.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width differs from header in {}", self.family);
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Write to `dir/<family>.csv` and return the path.
    pub fn write(&self, dir: &Path, stamp: &RunStamp) -> Result<PathBuf, CliError> {
        let path = dir.join(format!("{}.csv", self.family));
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(
            out,
            "# experiment={} family={} seed={} config_hash={} rows={}",
            stamp.experiment,
            self.family,
            stamp.seed,
            stamp.config_hash,
            self.rows.len()
        )
        .map_err(|e| CliError::io(&path, e))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        for row in &self.rows {
            w.write_record(row).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

/// Parsed metadata line of a CSV written by [`Table::write`].
pub fn read_metadata(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let first = text.lines().next().unwrap_or_default();
    let body =
        first.strip_prefix("# ").ok_or_else(|| CliError::Io(format!("{}: missing metadata line", path.display())))?;
    Ok(body.split(' ').filter_map(|kv| kv.split_once('=')).map(|(k, v)| (k.to_string(), v.to_string())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metadata_line_and_row_count() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("demo", &["time", "value"]);
        t.push(vec!["1".into(), fmt_f64(0.5)]);
        t.push(vec!["2".into(), fmt_f64(f64::NAN)]);
        let stamp = RunStamp { experiment: "identities", seed: 3, config_hash: "abc".into() };
        let path = t.write(dir.path(), &stamp).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# experiment=identities family=demo seed=3 config_hash=abc rows=2");
        assert_eq!(lines[1], "time,value");
        assert_eq!(lines[3], "2,");
        let meta = read_metadata(&path).unwrap();
        assert!(meta.contains(&("rows".into(), "2".into())));
        assert_eq!(lines.len() - 2, 2);
    }

    #[test]
    fn float_formatting_round_trips() {
        for x in [0.1, 1e-300, -2.5e17, 1.0 / 3.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_opt(None), "");
    }
}
