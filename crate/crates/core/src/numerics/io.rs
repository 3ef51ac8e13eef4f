//! Bit-exact tensor file format.
//!
//! Layout: magic `SCWM` (4 bytes), format version u32 = 1, rank u32,
//! `rank` extents as u64, then row-major f64 payload. All integers and
//! floats little-endian, no compression.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::tensor::{Tensor, MAX_RANK};

const MAGIC: [u8; 4] = *b"SCWM";
const VERSION: u32 = 1;

/// Write a tensor to `path`, overwriting any existing file.
pub fn tensor_write(path: &Path, tensor: &Tensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(tensor.rank() as u32).to_le_bytes())?;
    for &d in tensor.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for &v in tensor.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read a tensor previously written by [`tensor_write`].
pub fn tensor_read(path: &Path) -> Result<Tensor> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    read_exact_or_truncated(&mut r, &mut magic)?;
    if magic != MAGIC {
        return Err(Error::BadMagic);
    }

    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }

    let rank = read_u32(&mut r)?;
    if rank as usize > MAX_RANK {
        return Err(Error::RankTooLarge(rank));
    }

    let mut dims = Vec::with_capacity(rank as usize);
    for _ in 0..rank {
        let d = read_u64(&mut r)?;
        dims.push(usize::try_from(d).map_err(|_| Error::Truncated)?);
    }

    let len: usize = dims.iter().product();
    let mut data = Vec::with_capacity(len);
    let mut buf = [0u8; 8];
    for _ in 0..len {
        read_exact_or_truncated(&mut r, &mut buf)?;
        data.push(f64::from_le_bytes(buf));
    }

    // A trailing byte means the file was not produced by tensor_write.
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::Truncated);
    }

    Tensor::from_vec(&dims, data)
}

fn read_exact_or_truncated<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Truncated
        } else {
            Error::Io(e)
        }
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact_or_truncated(r, &mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    read_exact_or_truncated(r, &mut buf)?;
    Ok(u64::from_le_bytes(buf))
}
