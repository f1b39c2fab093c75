//! File formats for the command-line tool: headerless numeric CSV for
//! matrices and vectors, JSON for everything structured. The exact grammar
//! lives in docs/FORMATS.md; parsing is locale-independent and values are
//! written with Rust's shortest-round-trip float formatting.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Parse a rectangular headerless CSV of finite numbers.
/// Errors carry 1-based row/column locations.
pub fn parse_matrix_csv(text: &str, source: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (row_idx, raw_line) in text.lines().enumerate() {
        let line = if row_idx == 0 { raw_line.trim_start_matches('\u{feff}') } else { raw_line };
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (col_idx, field) in line.split(',').enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| {
                Error::InvalidInput(format!(
                    "{source}: row {}, column {}: cannot parse {:?} as a number",
                    row_idx + 1,
                    col_idx + 1,
                    field
                ))
            })?;
            row.push(value);
        }
        if let Some(w) = width {
            if row.len() != w {
                return Err(Error::InvalidInput(format!(
                    "{source}: row {} has {} fields, expected {} (ragged rows are rejected)",
                    row_idx + 1,
                    row.len(),
                    w
                )));
            }
        } else {
            width = Some(row.len());
        }
        rows.push(row);
    }
    let width = width.ok_or_else(|| Error::InvalidInput(format!("{source}: no data rows")))?;
    let height = rows.len();
    Ok(DMatrix::from_fn(height, width, |i, j| rows[i][j]))
}

/// Parse a single-column CSV (one value per line).
pub fn parse_vector_csv(text: &str, source: &str) -> Result<DVector<f64>> {
    let matrix = parse_matrix_csv(text, source)?;
    if matrix.ncols() != 1 {
        return Err(Error::InvalidInput(format!(
            "{source}: expected one value per line, found {} columns",
            matrix.ncols()
        )));
    }
    Ok(matrix.column(0).into_owned())
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix_csv(&read_text(path)?, &path.display().to_string())
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    parse_vector_csv(&read_text(path)?, &path.display().to_string())
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

/// Group sizes file: `{"sizes": [d_1, ..., d_p]}`.
pub fn read_group_sizes(path: &Path) -> Result<Vec<usize>> {
    #[derive(serde::Deserialize)]
    struct Groups {
        sizes: Vec<usize>,
    }
    let text = read_text(path)?;
    let groups: Groups = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    Ok(groups.sizes)
}

/// Shortest-round-trip decimal encoding; `inf`, `-inf`, and `NaN` are
/// spelled exactly like that.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{v}")
    }
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| Error::InvalidInput(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    fs::write(path, content)
        .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))
}

/// SHA-256 of a file's bytes, hex-encoded.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Provenance block attached to every output JSON.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub toolkit_version: String,
    /// Input path -> SHA-256 of the file bytes.
    pub inputs: BTreeMap<String, String>,
    /// Fully resolved configuration (flags and defaults).
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Wall-clock duration; the only field that varies between identical
    /// reruns.
    pub duration_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: BTreeMap::new(),
            config,
            seed: None,
            duration_seconds: 0.0,
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), file_digest(path)?);
        Ok(())
    }
}

/// Serialize an output document as pretty JSON with a trailing newline.
pub fn to_json_document<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangular_parse_round_trip() {
        let text = "1,2.5,-3\n4,5e-2,6\n";
        let m = parse_matrix_csv(text, "test").unwrap();
        assert_eq!(m.nrows(), 2);
        assert_eq!(m.ncols(), 3);
        assert_eq!(m[(1, 1)], 5e-2);
    }

    #[test]
    fn ragged_rows_are_located() {
        let text = "1,2\n3\n";
        let err = parse_matrix_csv(text, "x.csv").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2"), "{msg}");
    }

    #[test]
    fn bad_numbers_are_located() {
        let text = "1,2\n3,oops\n";
        let err = parse_matrix_csv(text, "x.csv").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2, column 2"), "{msg}");
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, f64::INFINITY] {
            let text = format_float(v);
            let back: f64 = text.parse().unwrap();
            assert_eq!(back, v, "{text}");
        }
    }

    #[test]
    fn vector_requires_single_column() {
        assert!(parse_vector_csv("1,2\n", "y.csv").is_err());
        let v = parse_vector_csv("1\n2\n-3\n", "y.csv").unwrap();
        assert_eq!(v.len(), 3);
    }
}
