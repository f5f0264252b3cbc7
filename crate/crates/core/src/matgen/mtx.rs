//! Matrix Market reader and writer for real dense and coordinate files.

use crate::densela::DenseMatrix;
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_matrix_market_str(&text)
}

/// Parses Matrix Market text into a dense matrix. Symmetric storage is
/// expanded and duplicate coordinate entries are summed.
pub fn read_matrix_market_str(text: &str) -> Result<DenseMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(hline, "expected `%%MatrixMarket matrix <layout> <field> <symmetry>`"));
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(parse_err(hline, format!("unknown layout `{other}`"))),
    };
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(Error::UnsupportedField(other.to_string())),
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(Error::UnsupportedField(other.to_string())),
    };

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (sline, size) = body.next().ok_or_else(|| parse_err(hline + 1, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(sline, format!("bad size `{t}`"))))
        .collect::<Result<_>>()?;
    let expect = if layout == Layout::Coordinate { 3 } else { 2 };
    if dims.len() != expect {
        return Err(parse_err(sline, format!("size line needs {expect} integers")));
    }
    let (rows, cols) = (dims[0], dims[1]);
    if symmetry != Symmetry::General && rows != cols {
        return Err(parse_err(sline, "symmetric matrix must be square"));
    }
    let mut m = DenseMatrix::zeros(rows, cols);
    let mut put = |i: usize, j: usize, v: f64| {
        m[(i, j)] += v;
        if i != j {
            match symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => m[(j, i)] += v,
                Symmetry::SkewSymmetric => m[(j, i)] -= v,
            }
        }
    };
    let number = |line: usize, t: &str| -> Result<f64> {
        t.parse::<f64>().map_err(|_| parse_err(line, format!("bad number `{t}`")))
    };

    match layout {
        Layout::Coordinate => {
            let nnz = dims[2];
            let mut seen = 0;
            for (ln, l) in body {
                let t: Vec<&str> = l.split_whitespace().collect();
                if t.len() != 3 {
                    return Err(parse_err(ln, "coordinate entry needs `row col value`"));
                }
                let idx = |s: &str, bound: usize| -> Result<usize> {
                    match s.parse::<usize>() {
                        Ok(k) if k >= 1 && k <= bound => Ok(k - 1),
                        _ => Err(parse_err(ln, format!("index `{s}` out of range 1..={bound}"))),
                    }
                };
                let (i, j) = (idx(t[0], rows)?, idx(t[1], cols)?);
                if symmetry != Symmetry::General && j > i {
                    return Err(parse_err(ln, "symmetric storage must list the lower triangle"));
                }
                put(i, j, number(ln, t[2])?);
                seen += 1;
            }
            if seen != nnz {
                return Err(parse_err(sline, format!("declared {nnz} entries, found {seen}")));
            }
        }
        Layout::Array => {
            // column-major; symmetric arrays hold only the lower triangle
            let mut slots = Vec::new();
            for j in 0..cols {
                let start = match symmetry {
                    Symmetry::General => 0,
                    Symmetry::Symmetric => j,
                    Symmetry::SkewSymmetric => j + 1,
                };
                for i in start..rows {
                    slots.push((i, j));
                }
            }
            let mut k = 0;
            for (ln, l) in body {
                for t in l.split_whitespace() {
                    let &(i, j) = slots.get(k).ok_or_else(|| parse_err(ln, "too many array entries"))?;
                    put(i, j, number(ln, t)?);
                    k += 1;
                }
            }
            if k != slots.len() {
                return Err(parse_err(sline, format!("expected {} array entries, found {k}", slots.len())));
            }
        }
    }
    Ok(m)
}

/// Writes the nonzeros of `m` as `coordinate real general`. Values are
/// printed with enough digits to round-trip exactly.
pub fn write_matrix_market(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::new();
    s.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(s, "{} {} {}", m.rows(), m.cols(), m.nnz());
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            let v = m[(i, j)];
            if v != 0.0 {
                let _ = writeln!(s, "{} {} {:e}", i + 1, j + 1, v);
            }
        }
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}
