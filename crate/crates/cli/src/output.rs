use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

/// Full double precision: 17 significant digits, bit-stable across runs.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(value).map_err(CliError::compute)?;
    text.push('\n');
    fs::write(dir.join(name), text)?;
    Ok(())
}

pub fn write_csv(
    dir: &Path,
    name: &str,
    header: &[&str],
    rows: Vec<Vec<String>>,
) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let mut writer = csv::Writer::from_path(dir.join(name)).map_err(CliError::compute)?;
    writer.write_record(header).map_err(CliError::compute)?;
    for row in rows {
        writer.write_record(&row).map_err(CliError::compute)?;
    }
    writer.flush()?;
    Ok(())
}

/// Prints a line to stdout, ignoring a closed pipe.
pub fn say(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}
