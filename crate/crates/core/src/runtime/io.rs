//! Matrix and vector file formats.
//!
//! * Matrix Market `coordinate real general` (and `symmetric` on read).
//! * Raw binary matrix: `u64 rows`, `u64 cols`, then row-major `f64`, all
//!   little endian.
//! * Raw binary vector: `u64 len`, then `f64` values, little endian.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::matrix::{Matrix, MatrixError, Storage};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("malformed binary file: {0}")]
    Binary(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

fn parse_err(line: usize, msg: impl Into<String>) -> IoError {
    IoError::Parse { line, msg: msg.into() }
}

pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<Matrix<f64>, IoError> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let header = header?.to_ascii_lowercase();
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" || fields[2] != "coordinate" {
        return Err(parse_err(1, "expected '%%MatrixMarket matrix coordinate <field> <symmetry>'"));
    }
    if !matches!(fields[3], "real" | "integer" | "double") {
        return Err(parse_err(1, format!("unsupported field '{}'", fields[3])));
    }
    let symmetric = match fields[4] {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(1, format!("unsupported symmetry '{other}'"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if parts.len() != 3 {
                    return Err(parse_err(lineno, "expected 'rows cols nnz'"));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|e| parse_err(lineno, e.to_string()));
                size = Some((p(parts[0])?, p(parts[1])?, p(parts[2])?));
                triplets.reserve(p(parts[2])?);
            }
            Some((rows, cols, _)) => {
                if parts.len() != 3 {
                    return Err(parse_err(lineno, "expected 'row col value'"));
                }
                let r: usize = parts[0].parse().map_err(|_| parse_err(lineno, "bad row index"))?;
                let c: usize = parts[1].parse().map_err(|_| parse_err(lineno, "bad column index"))?;
                let v: f64 = parts[2].parse().map_err(|_| parse_err(lineno, "bad value"))?;
                if r == 0 || c == 0 || r > rows || c > cols {
                    return Err(parse_err(lineno, format!("index ({r}, {c}) outside {rows}x{cols}")));
                }
                triplets.push((r - 1, c - 1, v));
                if symmetric && r != c {
                    triplets.push((c - 1, r - 1, v));
                }
            }
        }
    }
    let (rows, cols, nnz) = size.ok_or_else(|| parse_err(1, "missing size line"))?;
    let declared = if symmetric { triplets.len() } else { nnz };
    if triplets.len() != declared {
        return Err(parse_err(0, format!("declared {nnz} entries, found {}", triplets.len())));
    }
    Ok(Matrix::from_triplets(rows, cols, &triplets)?)
}

/// Writes the stored entries (explicit zeros of dense storage are skipped).
pub fn write_matrix_market<W: Write>(mut w: W, m: &Matrix<f64>) -> Result<(), IoError> {
    let mut entries = Vec::new();
    match m.storage() {
        Storage::Dense(d) => {
            for r in 0..m.rows() {
                for c in 0..m.cols() {
                    let v = d[r * m.cols() + c];
                    if v != 0.0 {
                        entries.push((r, c, v));
                    }
                }
            }
        }
        Storage::Sparse(csr) => {
            for r in 0..m.rows() {
                for p in csr.indptr[r]..csr.indptr[r + 1] {
                    entries.push((r, csr.indices[p], csr.data[p]));
                }
            }
        }
    }
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.rows(), m.cols(), entries.len())?;
    for (r, c, v) in entries {
        // `{:e}` round-trips f64 exactly
        writeln!(w, "{} {} {:e}", r + 1, c + 1, v)?;
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, IoError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| IoError::Binary(format!("truncated header: {e}")))?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>, IoError> {
    let mut buf = vec![0u8; count * 8];
    r.read_exact(&mut buf).map_err(|e| IoError::Binary(format!("expected {count} values: {e}")))?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(IoError::Binary(format!("{} trailing bytes", rest.len())));
    }
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn read_matrix_bin<R: Read>(mut r: R) -> Result<Matrix<f64>, IoError> {
    let rows = read_u64(&mut r)? as usize;
    let cols = read_u64(&mut r)? as usize;
    let data = read_f64s(&mut r, rows * cols)?;
    Ok(Matrix::from_dense(rows, cols, data)?)
}

pub fn write_matrix_bin<W: Write>(mut w: W, m: &Matrix<f64>) -> Result<(), IoError> {
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    let dense = m.to_dense();
    let Storage::Dense(d) = dense.storage() else { unreachable!() };
    for v in d {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_vector_bin<R: Read>(mut r: R) -> Result<Vec<f64>, IoError> {
    let len = read_u64(&mut r)? as usize;
    read_f64s(&mut r, len)
}

pub fn write_vector_bin<W: Write>(mut w: W, v: &[f64]) -> Result<(), IoError> {
    w.write_all(&(v.len() as u64).to_le_bytes())?;
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn is_mtx(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("mtx"))
}

/// Reads `.mtx` as Matrix Market, anything else as raw binary.
pub fn load_matrix(path: &Path) -> Result<Matrix<f64>, IoError> {
    let f = File::open(path)?;
    if is_mtx(path) {
        read_matrix_market(BufReader::new(f))
    } else {
        read_matrix_bin(BufReader::new(f))
    }
}

pub fn save_matrix(path: &Path, m: &Matrix<f64>) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    if is_mtx(path) {
        write_matrix_market(&mut w, m)?;
    } else {
        write_matrix_bin(&mut w, m)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_vector(path: &Path) -> Result<Vec<f64>, IoError> {
    read_vector_bin(BufReader::new(File::open(path)?))
}

pub fn save_vector(path: &Path, v: &[f64]) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_vector_bin(&mut w, v)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::matrix::{gen_banded, gen_dense};

    #[test]
    fn matrix_market_round_trip() {
        let m = gen_banded::<f64>(20, 2, 3);
        let mut buf = Vec::new();
        write_matrix_market(&mut buf, &m).unwrap();
        let back = read_matrix_market(buf.as_slice()).unwrap();
        assert_eq!(back.to_dense(), m.to_dense());
        assert_eq!(back.nnz(), m.nnz());
    }

    #[test]
    fn matrix_market_symmetric_and_comments() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% note\n2 2 2\n1 1 1.5\n2 1 -2\n";
        let m = read_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(m.get(0, 1), -2.0);
        assert_eq!(m.get(1, 0), -2.0);
        assert_eq!(m.get(0, 0), 1.5);
    }

    #[test]
    fn matrix_market_rejects_bad_index() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n";
        assert!(matches!(read_matrix_market(text.as_bytes()), Err(IoError::Parse { line: 3, .. })));
    }

    #[test]
    fn binary_round_trips() {
        let m = gen_dense::<f64>(5, 7, 1);
        let mut buf = Vec::new();
        write_matrix_bin(&mut buf, &m).unwrap();
        assert_eq!(buf.len(), 16 + 35 * 8);
        assert_eq!(&buf[..8], &5u64.to_le_bytes());
        assert_eq!(read_matrix_bin(buf.as_slice()).unwrap(), m);

        let v = vec![1.0, -0.5, f64::MIN_POSITIVE];
        let mut buf = Vec::new();
        write_vector_bin(&mut buf, &v).unwrap();
        assert_eq!(read_vector_bin(buf.as_slice()).unwrap(), v);
        buf.pop();
        assert!(read_vector_bin(buf.as_slice()).is_err());
    }
}
