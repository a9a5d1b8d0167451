//! Little-endian array files for cross-implementation comparison.
//!
//! Layout:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4 | magic `QMXA` |
//! | 2 | format version, `u16` (currently 1) |
//! | 1 | dtype tag: 1 = `f64`, 2 = complex `f64` pair (re, im) |
//! | 1 | rank `r` |
//! | 8 r | dimensions, `u64` each |
//! | rest | data in row-major order |

use std::io::{Read, Write};
use std::path::Path;

use crate::linalg::C64;
use crate::szegedy::WalkOperator;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"QMXA";
pub const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    Real(Vec<f64>),
    Complex(Vec<C64>),
}

impl ArrayData {
    fn tag(&self) -> u8 {
        match self {
            Self::Real(_) => 1,
            Self::Complex(_) => 2,
        }
    }

    fn len(&self) -> usize {
        match self {
            Self::Real(v) => v.len(),
            Self::Complex(v) => v.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Array {
    pub dims: Vec<usize>,
    pub data: ArrayData,
}

impl Array {
    pub fn new(dims: Vec<usize>, data: ArrayData) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::Dimension { expected, found: data.len() });
        }
        if dims.len() > u8::MAX as usize {
            return Err(Error::Format(format!("rank {} too large", dims.len())));
        }
        Ok(Self { dims, data })
    }
}

pub fn write_array<W: Write>(mut w: W, array: &Array) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[array.data.tag(), array.dims.len() as u8])?;
    for &d in &array.dims {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    match &array.data {
        ArrayData::Real(v) => {
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        ArrayData::Complex(v) => {
            for z in v {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn read_exact<R: Read, const K: usize>(r: &mut R) -> Result<[u8; K]> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf).map_err(|e| Error::Format(format!("truncated file: {e}")))?;
    Ok(buf)
}

pub fn read_array<R: Read>(mut r: R) -> Result<Array> {
    if &read_exact::<_, 4>(&mut r)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u16::from_le_bytes(read_exact(&mut r)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let [tag, rank] = read_exact(&mut r)?;
    let dims = (0..rank)
        .map(|_| Ok(u64::from_le_bytes(read_exact(&mut r)?) as usize))
        .collect::<Result<Vec<_>>>()?;
    let count: usize = dims.iter().product();
    let mut next = || -> Result<f64> { Ok(f64::from_le_bytes(read_exact(&mut r)?)) };
    let data = match tag {
        1 => ArrayData::Real((0..count).map(|_| next()).collect::<Result<_>>()?),
        2 => ArrayData::Complex(
            (0..count).map(|_| Ok(C64::new(next()?, next()?))).collect::<Result<_>>()?,
        ),
        t => return Err(Error::Format(format!("unknown dtype tag {t}"))),
    };
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes", rest.len())));
    }
    Array::new(dims, data)
}

pub fn save_array(path: &Path, array: &Array) -> Result<()> {
    let mut buf = Vec::new();
    write_array(&mut buf, array)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_array(path: &Path) -> Result<Array> {
    read_array(std::fs::File::open(path)?)
}

/// Dense `W(P)` as an `N^2 x N^2` real array.
pub fn walk_matrix_array(walk: &WalkOperator) -> Result<Array> {
    let dense = walk.dense()?;
    let m = dense.matrix();
    let d = m.nrows();
    let data = (0..d).flat_map(|i| (0..d).map(move |j| m[(i, j)].re)).collect();
    Array::new(vec![d, d], ArrayData::Real(data))
}

/// Busy-subspace eigenvalues `e^{i theta}` as a rank-1 complex array.
pub fn spectrum_array(walk: &WalkOperator) -> Result<Array> {
    let v = walk.eigenvalues().to_vec();
    Array::new(vec![v.len()], ArrayData::Complex(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let a = Array::new(vec![2, 3], ArrayData::Real(vec![1.0, -2.5, 0.0, 3.0, 1e-300, 7.0])).unwrap();
        let mut buf = Vec::new();
        write_array(&mut buf, &a).unwrap();
        assert_eq!(&buf[..4], b"QMXA");
        assert_eq!(buf.len(), 4 + 2 + 2 + 16 + 48);
        assert_eq!(read_array(&buf[..]).unwrap(), a);

        let c = Array::new(vec![2], ArrayData::Complex(vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.0)])).unwrap();
        let mut buf = Vec::new();
        write_array(&mut buf, &c).unwrap();
        assert_eq!(read_array(&buf[..]).unwrap(), c);
    }

    #[test]
    fn header_bytes() {
        let a = Array::new(vec![1], ArrayData::Real(vec![1.0])).unwrap();
        let mut buf = Vec::new();
        write_array(&mut buf, &a).unwrap();
        assert_eq!(&buf[4..8], &[1, 0, 1, 1]);
        assert_eq!(&buf[8..16], &1u64.to_le_bytes());
        assert_eq!(&buf[16..], &1.0f64.to_le_bytes());
    }

    #[test]
    fn rejects_malformed() {
        assert!(matches!(read_array(&b"NOPE"[..]), Err(Error::Format(_))));
        let a = Array::new(vec![2], ArrayData::Real(vec![1.0, 2.0])).unwrap();
        let mut buf = Vec::new();
        write_array(&mut buf, &a).unwrap();
        assert!(matches!(read_array(&buf[..buf.len() - 1]), Err(Error::Format(_))));
        buf.push(0);
        assert!(matches!(read_array(&buf[..]), Err(Error::Format(_))));
        assert!(Array::new(vec![3], ArrayData::Real(vec![1.0])).is_err());
    }
}
