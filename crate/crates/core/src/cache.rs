//! Binary container for named f64 matrices (`features.bin`, `similarity.bin`).
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "ESCF" | version u32 | count u64
//! per entry: id_len u32 | id utf-8 | rows u64 | cols u64 | rows*cols f64, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"ESCF";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("not a matrix cache (bad magic)")]
    BadMagic,
    #[error("unsupported cache version {0}")]
    Version(u32),
    #[error("corrupt cache: {0}")]
    Corrupt(String),
}

pub fn write_matrices<W: Write>(mut out: W, entries: &[(String, DMatrix<f64>)]) -> Result<(), CacheError> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(entries.len() as u64).to_le_bytes())?;
    for (id, m) in entries {
        out.write_all(&(id.len() as u32).to_le_bytes())?;
        out.write_all(id.as_bytes())?;
        out.write_all(&(m.nrows() as u64).to_le_bytes())?;
        out.write_all(&(m.ncols() as u64).to_le_bytes())?;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.write_all(&m[(i, j)].to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, CacheError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, CacheError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_matrices<R: Read>(mut r: R) -> Result<Vec<(String, DMatrix<f64>)>, CacheError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CacheError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(CacheError::Version(version));
    }
    let count = read_u64(&mut r)?;
    let mut entries = Vec::new();
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        let mut id = vec![0u8; len];
        r.read_exact(&mut id)?;
        let id = String::from_utf8(id).map_err(|_| CacheError::Corrupt("entry id is not utf-8".into()))?;
        let rows = read_u64(&mut r)? as usize;
        let cols = read_u64(&mut r)? as usize;
        let n = rows
            .checked_mul(cols)
            .filter(|n| *n <= 1 << 32)
            .ok_or_else(|| CacheError::Corrupt(format!("entry {id:?} has implausible shape {rows}x{cols}")))?;
        let mut buf = vec![0u8; n * 8];
        r.read_exact(&mut buf)?;
        let values = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        entries.push((id, DMatrix::from_row_iterator(rows, cols, values)));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(CacheError::Corrupt("trailing bytes".into()));
    }
    Ok(entries)
}

/// Writes through a temporary file so readers never see a partial cache.
pub fn save(path: &Path, entries: &[(String, DMatrix<f64>)]) -> Result<(), CacheError> {
    let tmp = path.with_extension("bin.tmp");
    write_matrices(BufWriter::new(File::create(&tmp)?), entries)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Vec<(String, DMatrix<f64>)>, CacheError> {
    read_matrices(BufReader::new(File::open(path)?))
}
