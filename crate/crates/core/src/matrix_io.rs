//! Kernel matrix files.
//!
//! Both encodings start with an ASCII header line `rows cols`. The text body
//! holds one row per line with 17 significant digits per value; the binary
//! body holds `rows * cols` little-endian `f64`s in row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Text,
    Binary,
}

impl MatrixFormat {
    /// `.bin` files are binary, everything else is text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => MatrixFormat::Binary,
            _ => MatrixFormat::Text,
        }
    }
}

pub fn encode_text(m: &Matrix) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

pub fn encode_binary(m: &Matrix) -> Vec<u8> {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols()).into_bytes();
    out.reserve(m.len() * 8);
    for row in m.row_iter() {
        for v in row.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_matrix(path: &Path, m: &Matrix, format: MatrixFormat) -> Result<()> {
    let bytes = match format {
        MatrixFormat::Text => encode_text(m).into_bytes(),
        MatrixFormat::Binary => encode_binary(m),
    };
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path, format: MatrixFormat) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(path, &bytes, format)
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn decode(path: &Path, bytes: &[u8], format: MatrixFormat) -> Result<Matrix> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| parse_err(path, 1, "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| parse_err(path, 1, "header is not UTF-8"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(path, 1, "invalid header")))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(parse_err(path, 1, "expected header `rows cols`"));
    };
    let body = &bytes[newline + 1..];
    let mut data = Vec::with_capacity(rows * cols);
    match format {
        MatrixFormat::Binary => {
            if body.len() != rows * cols * 8 {
                return Err(parse_err(
                    path,
                    2,
                    format!(
                        "expected {} bytes of data, found {}",
                        rows * cols * 8,
                        body.len()
                    ),
                ));
            }
            data.extend(
                body.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))),
            );
        }
        MatrixFormat::Text => {
            let text =
                std::str::from_utf8(body).map_err(|_| parse_err(path, 2, "body is not UTF-8"))?;
            let mut count = 0;
            for (idx, line) in text.lines().enumerate() {
                let line_no = idx + 2;
                if line.trim().is_empty() {
                    continue;
                }
                let before = data.len();
                for token in line.split_whitespace() {
                    data.push(token.parse::<f64>().map_err(|_| {
                        parse_err(path, line_no, format!("invalid real `{token}`"))
                    })?);
                }
                if data.len() - before != cols {
                    return Err(parse_err(
                        path,
                        line_no,
                        format!("expected {cols} values, found {}", data.len() - before),
                    ));
                }
                count += 1;
            }
            if count != rows {
                return Err(parse_err(
                    path,
                    count + 2,
                    format!("expected {rows} rows, found {count}"),
                ));
            }
        }
    }
    Ok(Matrix::from_row_slice(rows, cols, &data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn both_formats_round_trip(
            rows in 1usize..6,
            cols in 1usize..6,
            seed in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::ZERO, 36),
        ) {
            let m = Matrix::from_fn(rows, cols, |r, c| seed[r * 6 + c]);
            let dir = tempfile::tempdir().unwrap();
            for (name, fmt) in [("k.txt", MatrixFormat::Text), ("k.bin", MatrixFormat::Binary)] {
                let path = dir.path().join(name);
                write_matrix(&path, &m, fmt).unwrap();
                let back = read_matrix(&path, MatrixFormat::from_path(&path)).unwrap();
                prop_assert_eq!(back.shape(), m.shape());
                for (a, b) in m.iter().zip(back.iter()) {
                    prop_assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }
    }

    #[test]
    fn header_is_dimensions() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let text = encode_text(&m);
        assert!(text.starts_with("2 2\n"));
        assert!(text.contains("5.0000000000000000e-1"));
    }

    #[test]
    fn rejects_truncated_body() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.txt");
        fs::write(&path, "2 2\n1 2\n").unwrap();
        assert!(matches!(
            read_matrix(&path, MatrixFormat::Text),
            Err(Error::Parse { .. })
        ));
    }
}
