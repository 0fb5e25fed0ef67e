//! CSV and JSON rendering.
//!
//! CSV numbers carry 17 significant digits so every double round-trips;
//! lines end in `\n`.

use serde::Serialize;

use crate::CliError;

pub fn csv_number(x: f64) -> String {
    format!("{x:.16e}")
}

/// Header line plus one line per row of numbers.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(csv_number).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn json<T: Serialize + ?Sized>(value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    text.push('\n');
    Ok(text)
}
