//! GTCS1 tensor file format.
//!
//! Layout: magic bytes `GTCS1`, unsigned 32-bit little-endian order d,
//! d unsigned 32-bit little-endian dims, then product(dims) little-endian
//! 64-bit floats in column-major order (first index fastest).

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 5] = b"GTCS1";

/// Serializes a tensor into the GTCS1 byte layout.
pub fn write_tensor<W: Write>(w: &mut W, x: &DenseTensor) -> Result<()> {
    w.write_all(MAGIC)?;
    let order = u32::try_from(x.order())
        .map_err(|_| Error::Format(format!("order {} exceeds u32", x.order())))?;
    w.write_all(&order.to_le_bytes())?;
    for &n in x.shape() {
        let n = u32::try_from(n).map_err(|_| Error::Format(format!("dim {n} exceeds u32")))?;
        w.write_all(&n.to_le_bytes())?;
    }
    for &v in x.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Parses a GTCS1 byte stream back into a tensor.
pub fn read_tensor<R: Read>(r: &mut R) -> Result<DenseTensor> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated magic".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let order = read_u32(r)? as usize;
    if order == 0 {
        return Err(Error::Format("order must be at least 1".into()));
    }
    let mut shape = Vec::with_capacity(order);
    let mut len: usize = 1;
    for _ in 0..order {
        let n = read_u32(r)? as usize;
        if n == 0 {
            return Err(Error::Format("zero dimension".into()));
        }
        len = len
            .checked_mul(n)
            .ok_or_else(|| Error::Format("dimension product overflow".into()))?;
        shape.push(n);
    }
    let mut data = Vec::with_capacity(len);
    let mut buf = [0u8; 8];
    for _ in 0..len {
        r.read_exact(&mut buf)
            .map_err(|_| Error::Format("truncated data section".into()))?;
        data.push(f64::from_le_bytes(buf));
    }
    DenseTensor::new(shape, data)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format("truncated header".into()))?;
    Ok(u32::from_le_bytes(buf))
}

/// Writes a tensor to a GTCS1 file.
pub fn save<P: AsRef<Path>>(path: P, x: &DenseTensor) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_tensor(&mut f, x)?;
    use std::io::Write as _;
    f.flush()?;
    Ok(())
}

/// Reads a tensor from a GTCS1 file.
pub fn load<P: AsRef<Path>>(path: P) -> Result<DenseTensor> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_tensor(&mut f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_bytes_2x2() {
        let x = DenseTensor::new(vec![2, 2], vec![1.0, 3.0, 2.0, 4.0]).unwrap();
        let mut bytes = Vec::new();
        write_tensor(&mut bytes, &x).unwrap();
        let mut expect = Vec::new();
        expect.extend_from_slice(b"GTCS1");
        expect.extend_from_slice(&2u32.to_le_bytes());
        expect.extend_from_slice(&2u32.to_le_bytes());
        expect.extend_from_slice(&2u32.to_le_bytes());
        for v in [1.0f64, 3.0, 2.0, 4.0] {
            expect.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(bytes, expect);
    }

    #[test]
    fn roundtrip_order_3() {
        let x = DenseTensor::new(vec![3, 2, 4], (0..24).map(|v| v as f64 * 0.25 - 3.0).collect())
            .unwrap();
        let mut bytes = Vec::new();
        write_tensor(&mut bytes, &x).unwrap();
        let back = read_tensor(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn rejects_bad_magic() {
        let bytes = b"GTCS2\x01\x00\x00\x00\x01\x00\x00\x00";
        assert!(matches!(
            read_tensor(&mut bytes.as_slice()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn rejects_truncated_data() {
        let x = DenseTensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let mut bytes = Vec::new();
        write_tensor(&mut bytes, &x).unwrap();
        bytes.truncate(bytes.len() - 1);
        assert!(matches!(
            read_tensor(&mut bytes.as_slice()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.gt1");
        let x = DenseTensor::new(vec![2, 3], vec![0.5; 6]).unwrap();
        save(&path, &x).unwrap();
        assert_eq!(load(&path).unwrap(), x);
    }
}
