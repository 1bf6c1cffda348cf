//! Matrix files and atomic writes.
//!
//! CSV: a header line `# rows cols`, then one comma-separated line per row.
//! Binary: magic `SBD1`, rows and cols as little-endian `u64`, then the values
//! as little-endian `f64` in column-major order. Values are column-major in
//! memory either way.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Result, SbdError};

pub const MAGIC: &[u8; 4] = b"SBD1";

/// Dense matrix as read from or written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixData {
    pub rows: usize,
    pub cols: usize,
    /// Column-major values.
    pub data: Vec<f64>,
}

impl MatrixData {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix shape mismatch");
        Self { rows, cols, data }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + self.rows * j]
    }
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| SbdError::io(dir, e))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(|e| SbdError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| SbdError::io(&tmp, e))?;
    f.sync_all().map_err(|e| SbdError::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| SbdError::io(path, e))
}

/// Shortest round-trip representation; `NaN` for missing values.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:?}")
    }
}

pub fn to_csv(m: &MatrixData) -> String {
    let mut s = format!("# {} {}\n", m.rows, m.cols);
    for i in 0..m.rows {
        for j in 0..m.cols {
            if j > 0 {
                s.push(',');
            }
            let _ = write!(s, "{}", fmt_f64(m.get(i, j)));
        }
        s.push('\n');
    }
    s
}

pub fn from_csv(text: &str, path: &Path) -> Result<MatrixData> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| SbdError::format(path, "empty file"))?;
    let dims: Vec<&str> = header
        .strip_prefix('#')
        .ok_or_else(|| SbdError::format(path, "missing `# rows cols` header"))?
        .split_whitespace()
        .collect();
    let parse_dim = |s: &str| s.parse::<usize>().map_err(|_| SbdError::format(path, format!("bad dimension `{s}`")));
    if dims.len() != 2 {
        return Err(SbdError::format(path, "header must hold exactly two dimensions"));
    }
    let (rows, cols) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
    let mut data = vec![0.0; rows * cols];
    let mut seen = 0;
    for (i, line) in lines.enumerate() {
        if i >= rows {
            return Err(SbdError::format(path, format!("more than {rows} rows")));
        }
        let vals: Vec<&str> = line.split(',').collect();
        if vals.len() != cols {
            return Err(SbdError::format(path, format!("row {i} has {} values, expected {cols}", vals.len())));
        }
        for (j, v) in vals.iter().enumerate() {
            data[i + rows * j] = v
                .trim()
                .parse::<f64>()
                .map_err(|_| SbdError::format(path, format!("bad number `{}` in row {i}", v.trim())))?;
        }
        seen += 1;
    }
    if seen != rows {
        return Err(SbdError::format(path, format!("found {seen} rows, expected {rows}")));
    }
    Ok(MatrixData { rows, cols, data })
}

pub fn to_binary(m: &MatrixData) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * m.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.rows as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols as u64).to_le_bytes());
    for v in &m.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn from_binary(bytes: &[u8], path: &Path) -> Result<MatrixData> {
    if bytes.len() < 20 || &bytes[..4] != MAGIC {
        return Err(SbdError::format(path, "missing SBD1 header"));
    }
    let rows = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let n = rows.checked_mul(cols).ok_or_else(|| SbdError::format(path, "dimension overflow"))?;
    if bytes.len() != 20 + 8 * n {
        return Err(SbdError::format(path, format!("expected {} value bytes, found {}", 8 * n, bytes.len() - 20)));
    }
    let data = bytes[20..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(MatrixData { rows, cols, data })
}

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

/// Read a matrix, choosing the format by extension (`.bin` or CSV).
pub fn read_matrix(path: &Path) -> Result<MatrixData> {
    if is_binary(path) {
        let bytes = std::fs::read(path).map_err(|e| SbdError::io(path, e))?;
        from_binary(&bytes, path)
    } else {
        let text = std::fs::read_to_string(path).map_err(|e| SbdError::io(path, e))?;
        from_csv(&text, path)
    }
}

pub fn write_matrix(path: &Path, m: &MatrixData) -> Result<()> {
    if is_binary(path) {
        write_atomic(path, &to_binary(m))
    } else {
        write_atomic(path, to_csv(m).as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout_is_row_per_line() {
        let m = MatrixData::new(2, 3, vec![1.0, 4.0, 2.0, 5.0, 3.0, f64::NAN]);
        let s = to_csv(&m);
        assert_eq!(s, "# 2 3\n1.0,2.0,3.0\n4.0,5.0,NaN\n");
        let back = from_csv(&s, Path::new("x.csv")).unwrap();
        assert_eq!(back.rows, 2);
        assert!(back.get(1, 2).is_nan());
        assert_eq!(back.get(0, 1), 2.0);
    }

    #[test]
    fn binary_layout() {
        let m = MatrixData::new(2, 1, vec![1.5, -2.0]);
        let b = to_binary(&m);
        assert_eq!(&b[..4], b"SBD1");
        assert_eq!(u64::from_le_bytes(b[4..12].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(b[12..20].try_into().unwrap()), 1);
        assert_eq!(f64::from_le_bytes(b[20..28].try_into().unwrap()), 1.5);
        assert_eq!(from_binary(&b, Path::new("x.bin")).unwrap(), m);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let p = Path::new("x.csv");
        assert!(from_csv("1,2\n", p).is_err());
        assert!(from_csv("# 2 2\n1,2\n", p).is_err());
        assert!(from_csv("# 1 2\n1,zz\n", p).is_err());
        assert!(from_binary(b"SBD0", Path::new("x.bin")).is_err());
    }
}
