//! Little-endian binary helpers shared by the on-disk formats.
//!
//! Tensor fixture format: header of three little-endian u32 (channels,
//! height, width) followed by channels·height·width little-endian f32 in
//! row-major order within each channel.

use std::io::{self, Read, Write};
use std::path::Path;

use ndarray::Array3;

use crate::scalar::Real;

pub(crate) fn write_u32s<W: Write>(w: &mut W, vals: &[u32]) -> io::Result<()> {
    for v in vals {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn write_f32s<W: Write, S: Real>(w: &mut W, vals: impl Iterator<Item = S>) -> io::Result<()> {
    for v in vals {
        let f = v.to_f32().unwrap_or(f32::NAN);
        w.write_all(&f.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_u32s<R: Read>(r: &mut R, n: usize) -> io::Result<Vec<u32>> {
    let mut buf = [0u8; 4];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        out.push(u32::from_le_bytes(buf));
    }
    Ok(out)
}

pub(crate) fn read_f32s<R: Read, S: Real>(r: &mut R, n: usize) -> io::Result<Vec<S>> {
    let mut buf = [0u8; 4];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        out.push(crate::scalar::real(f32::from_le_bytes(buf) as f64));
    }
    Ok(out)
}

/// Writes a (C, H, W) tensor in the fixture format.
pub fn write_tensor3<S: Real>(path: &Path, tensor: &Array3<S>) -> io::Result<()> {
    let mut w = io::BufWriter::new(std::fs::File::create(path)?);
    let (c, h, width) = tensor.dim();
    write_u32s(&mut w, &[c as u32, h as u32, width as u32])?;
    write_f32s(&mut w, tensor.iter().copied())?;
    w.flush()
}

/// Reads a tensor written by [`write_tensor3`].
pub fn read_tensor3<S: Real>(path: &Path) -> io::Result<Array3<S>> {
    let mut r = io::BufReader::new(std::fs::File::open(path)?);
    let dims = read_u32s(&mut r, 3)?;
    let (c, h, w) = (dims[0] as usize, dims[1] as usize, dims[2] as usize);
    let data = read_f32s(&mut r, c * h * w)?;
    Array3::from_shape_vec((c, h, w), data)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        let t = Array3::from_shape_fn((2, 3, 4), |(c, h, w)| (c * 100 + h * 10 + w) as f32);
        write_tensor3(&path, &t).unwrap();
        let back: Array3<f32> = read_tensor3(&path).unwrap();
        assert_eq!(t, back);
    }
}
