//! Index-level CSV ingestion.
//!
//! One column of strictly positive index levels, optional single header row
//! (detected when the first field does not parse as a number). The output is
//! the series of log-returns `log(I_n / I_{n-1})`.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use super::ModelError;

pub fn load_returns_csv<P: AsRef<Path>>(path: P) -> Result<Vec<f64>, ModelError> {
    let file = File::open(path.as_ref()).map_err(|e| ModelError::Io(format!("{}: {e}", path.as_ref().display())))?;
    returns_from_reader(file)
}

pub fn returns_from_reader<R: Read>(reader: R) -> Result<Vec<f64>, ModelError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut levels = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| ModelError::Parse { row, message: e.to_string() })?;
        let field = record.get(0).unwrap_or("");
        match field.parse::<f64>() {
            Ok(v) => {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(ModelError::NonPositiveIndex { row, value: v });
                }
                levels.push(v);
            }
            Err(_) if row == 1 => continue,
            Err(e) => return Err(ModelError::Parse { row, message: format!("{field:?}: {e}") }),
        }
    }
    Ok(levels.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}
