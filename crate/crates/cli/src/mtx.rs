//! Matrix Market reader/writer, restricted to `coordinate real general`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use delaytrack::sparse::SparseMat;

use crate::error::CliError;

fn malformed(path: &Path, line: usize, msg: impl Into<String>) -> CliError {
    CliError::MalformedMatrix { path: path.to_path_buf(), line, msg: msg.into() }
}

pub fn read_matrix_market(path: &Path) -> Result<SparseMat<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::MissingFile { path: path.to_path_buf(), source: e })?;
    parse_matrix_market(&text, path)
}

/// Parses matrix text; `path` only labels diagnostics.
pub fn parse_matrix_market(text: &str, path: &Path) -> Result<SparseMat<f64>, CliError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (n, header) = lines.next().ok_or_else(|| malformed(path, 1, "empty file"))?;
    let fields: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if fields.first().map(String::as_str) != Some("%%matrixmarket") || fields.len() != 5 {
        return Err(malformed(path, n, "missing '%%MatrixMarket matrix coordinate real general' header"));
    }
    if fields[1..] != ["matrix", "coordinate", "real", "general"] {
        return Err(malformed(path, n, format!("unsupported format '{}'; only coordinate real general", fields[1..].join(" "))));
    }

    let mut body = lines.filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('%'));
    let (n, size) = body.next().ok_or_else(|| malformed(path, n, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| malformed(path, n, format!("bad size line '{}'", size.trim())))?;
    let [rows, cols, nnz] = dims[..] else {
        return Err(malformed(path, n, "size line needs rows, columns and entry count"));
    };

    let mut triplets = Vec::with_capacity(nnz);
    for (n, line) in body {
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 3 {
            return Err(malformed(path, n, format!("expected 'row col value', got '{}'", line.trim())));
        }
        let i: usize = tok[0].parse().map_err(|_| malformed(path, n, format!("bad row index '{}'", tok[0])))?;
        let j: usize = tok[1].parse().map_err(|_| malformed(path, n, format!("bad column index '{}'", tok[1])))?;
        let v: f64 = tok[2].parse().map_err(|_| malformed(path, n, format!("bad value '{}'", tok[2])))?;
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(malformed(path, n, format!("entry ({i}, {j}) outside a {rows}x{cols} matrix (indices are 1-based)")));
        }
        if !v.is_finite() {
            return Err(malformed(path, n, format!("non-finite value '{}'", tok[2])));
        }
        triplets.push((i - 1, j - 1, v));
    }
    if triplets.len() != nnz {
        return Err(malformed(path, n, format!("header announces {nnz} entries, found {}", triplets.len())));
    }
    Ok(SparseMat::from_triplets(rows, cols, triplets))
}

pub fn format_matrix_market(m: &SparseMat<f64>) -> String {
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", m.nrows(), m.ncols(), m.nnz());
    for (i, j, v) in m.iter() {
        let _ = writeln!(out, "{} {} {}", i + 1, j + 1, v);
    }
    out
}

pub fn write_matrix_market(path: &Path, m: &SparseMat<f64>) -> std::io::Result<()> {
    fs::write(path, format_matrix_market(m))
}
