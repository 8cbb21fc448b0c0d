//! Binary matrix dump.
//!
//! A file is a concatenation of records. Each record is
//!
//! | bytes | content |
//! |-------|---------|
//! | 4 | magic `AWMX` |
//! | 4 | format version, u32 little endian (currently 1) |
//! | 8 | rows, u64 little endian |
//! | 8 | cols, u64 little endian |
//! | 16·rows·cols | entries in row-major order, each as (re, im) f64 little endian |

use std::io::{Read, Write};

use super::matrix::{c64, ComplexMatrix};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"AWMX";
pub const VERSION: u32 = 1;

pub fn write_matrix<W: Write>(out: &mut W, m: &ComplexMatrix) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(m.rows() as u64).to_le_bytes())?;
    out.write_all(&(m.cols() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * m.cols());
    for i in 0..m.rows() {
        buf.clear();
        for j in 0..m.cols() {
            let z = m[(i, j)];
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

pub fn to_bytes(ms: &[&ComplexMatrix]) -> Vec<u8> {
    let mut buf = Vec::new();
    for m in ms {
        write_matrix(&mut buf, m).expect("writing to memory");
    }
    buf
}

fn read_exact_or_eof<R: Read>(inp: &mut R, buf: &mut [u8]) -> Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = inp.read(&mut buf[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(false);
            }
            return Err(Error::Shape("truncated matrix record".into()));
        }
        filled += n;
    }
    Ok(true)
}

pub fn read_matrices<R: Read>(mut inp: R) -> Result<Vec<ComplexMatrix>> {
    let mut out = Vec::new();
    let mut head = [0u8; 24];
    while read_exact_or_eof(&mut inp, &mut head)? {
        if &head[0..4] != MAGIC {
            return Err(Error::Shape("bad magic in matrix dump".into()));
        }
        let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Shape(format!("unsupported dump version {version}")));
        }
        let rows = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
        let cols = u64::from_le_bytes(head[16..24].try_into().unwrap()) as usize;
        super::matrix::check_dim(rows.max(cols), "matrix dump")?;
        let mut body = vec![0u8; 16 * rows * cols];
        if !read_exact_or_eof(&mut inp, &mut body)? && !body.is_empty() {
            return Err(Error::Shape("truncated matrix record".into()));
        }
        let data: Vec<c64> = body
            .chunks_exact(16)
            .map(|ch| {
                c64::new(
                    f64::from_le_bytes(ch[0..8].try_into().unwrap()),
                    f64::from_le_bytes(ch[8..16].try_into().unwrap()),
                )
            })
            .collect();
        out.push(ComplexMatrix::from_row_major(rows, cols, &data)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let a = ComplexMatrix::from_fn(2, 3, |i, j| c64::new(i as f64, -(j as f64) * 0.5));
        let b = ComplexMatrix::identity(2);
        let bytes = to_bytes(&[&a, &b]);
        assert_eq!(bytes.len(), 2 * 24 + 16 * 6 + 16 * 4);
        let back = read_matrices(&bytes[..]).unwrap();
        assert_eq!(back.len(), 2);
        assert!((&back[0] - &a).max_abs() == 0.0);
        assert!(read_matrices(&bytes[..30]).is_err());
    }
}
