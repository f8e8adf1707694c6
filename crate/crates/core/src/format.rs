//! Plain-text matrix and mask files.
//!
//! Matrix: a `rows cols` header, then one line per row of space-separated
//! values in `{:.16e}` (17 significant digits, exact round trip).
//! Mask: a `rows cols count` header, then `count` lines of zero-based `i j`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Result, RpcaError};
use crate::linalg::{self, DenseMatrix, ObservationMask};

pub fn matrix_to_string(m: &DenseMatrix) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

fn parse_header<const N: usize>(line: Option<&str>, what: &str) -> Result<[usize; N]> {
    let line = line.ok_or_else(|| RpcaError::Parse(format!("{what}: missing header")))?;
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != N {
        return Err(RpcaError::Parse(format!("{what}: header must have {N} fields, got '{line}'")));
    }
    let mut out = [0usize; N];
    for (slot, f) in out.iter_mut().zip(&fields) {
        *slot = f
            .parse()
            .map_err(|_| RpcaError::Parse(format!("{what}: bad header field '{f}'")))?;
    }
    Ok(out)
}

pub fn matrix_from_str(text: &str) -> Result<DenseMatrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let [rows, cols] = parse_header::<2>(lines.next(), "matrix")?;
    let mut entries = Vec::with_capacity(rows * cols);
    for (i, line) in lines.enumerate() {
        if i >= rows {
            return Err(RpcaError::Parse(format!("matrix: more than {rows} rows")));
        }
        let before = entries.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| RpcaError::Parse(format!("matrix: bad number '{tok}' on row {i}")))?;
            entries.push(v);
        }
        if entries.len() - before != cols {
            return Err(RpcaError::Parse(format!(
                "matrix: row {i} has {} values, expected {cols}",
                entries.len() - before
            )));
        }
    }
    if entries.len() != rows * cols {
        return Err(RpcaError::Parse(format!(
            "matrix: expected {rows} rows, got {}",
            entries.len() / cols.max(1)
        )));
    }
    linalg::from_row_major(rows, cols, &entries)
}

pub fn mask_to_string(mask: &ObservationMask) -> String {
    let mut out = format!("{} {} {}\n", mask.rows(), mask.cols(), mask.len());
    for &(i, j) in mask.pairs() {
        out.push_str(&format!("{i} {j}\n"));
    }
    out
}

pub fn mask_from_str(text: &str) -> Result<ObservationMask> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let [rows, cols, count] = parse_header::<3>(lines.next(), "mask")?;
    let mut pairs = Vec::with_capacity(count);
    for line in lines {
        let [i, j] = parse_header::<2>(Some(line), "mask entry")?;
        pairs.push((i, j));
    }
    if pairs.len() != count {
        return Err(RpcaError::Parse(format!("mask: header says {count} entries, found {}", pairs.len())));
    }
    ObservationMask::new(rows, cols, pairs)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| RpcaError::Parse(format!("cannot read {}: {e}", path.display())))
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    write_text(path, &matrix_to_string(m))
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    matrix_from_str(&read_text(path)?)
}

pub fn write_mask(path: &Path, mask: &ObservationMask) -> Result<()> {
    write_text(path, &mask_to_string(mask))
}

pub fn read_mask(path: &Path) -> Result<ObservationMask> {
    mask_from_str(&read_text(path)?)
}
