//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "ZSLM"                 4 bytes
//! version                u32 (currently 1)
//! repeated until EOF:
//!   name length          u32
//!   name                 UTF-8 bytes
//!   rank                 u32
//!   dims                 rank × u64
//!   data                 product(dims) × f64
//! ```

use std::io::{ErrorKind, Read, Write};

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ZSLM";
pub const VERSION: u32 = 1;

pub fn write_checkpoint<'a, W, I>(mut out: W, params: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, &'a Tensor)>,
{
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    for (name, tensor) in params {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
        for &d in tensor.shape() {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in tensor.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

/// Reads every record in file order.
pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Vec<(String, Tensor)>> {
    let mut magic = [0u8; 4];
    input
        .read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let mut records = Vec::new();
    loop {
        let mut len_buf = [0u8; 4];
        match input.read_exact(&mut len_buf) {
            Ok(()) => {}
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let truncated = |_| Error::Checkpoint(format!("truncated record {}", records.len()));
        let name_len = u32::from_le_bytes(len_buf) as usize;
        let mut name = vec![0u8; name_len];
        input.read_exact(&mut name).map_err(truncated)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?;
        let rank = read_u32(&mut input)
            .map_err(|_| Error::Checkpoint(format!("truncated record {name}")))?;
        let mut shape = Vec::with_capacity(rank as usize);
        for _ in 0..rank {
            shape.push(
                read_u64(&mut input)
                    .map_err(|_| Error::Checkpoint(format!("truncated record {name}")))?
                    as usize,
            );
        }
        let numel: usize = shape.iter().product();
        let mut bytes = vec![0u8; numel * 8];
        input
            .read_exact(&mut bytes)
            .map_err(|_| Error::Checkpoint(format!("truncated data for {name}")))?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        records.push((name, Tensor::new(shape, data)?));
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_layout() {
        let a = Tensor::matrix(2, 1, vec![1.5, -2.0]).unwrap();
        let b = Tensor::scalar(0.25);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, [("a", &a), ("bias", &b)]).unwrap();
        assert_eq!(&buf[..4], b"ZSLM");
        assert_eq!(&buf[4..8], &1u32.to_le_bytes());
        assert_eq!(&buf[8..12], &1u32.to_le_bytes());
        assert_eq!(buf[12], b'a');
        let back = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(back, vec![("a".to_string(), a), ("bias".to_string(), b)]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            read_checkpoint(&b"NOPE\x01\0\0\0"[..]),
            Err(Error::Checkpoint(_))
        ));
        assert!(matches!(
            read_checkpoint(&b"ZSLM\x02\0\0\0"[..]),
            Err(Error::Checkpoint(_))
        ));
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, [("w", &Tensor::scalar(1.0))]).unwrap();
        buf.pop();
        assert!(matches!(
            read_checkpoint(&buf[..]),
            Err(Error::Checkpoint(_))
        ));
    }
}
