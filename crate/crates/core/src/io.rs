//! The `DTNS1` binary container.
//!
//! Layout, all integers and floats little-endian:
//!
//! | bytes        | content                                  |
//! |--------------|------------------------------------------|
//! | 5            | magic `b"DTNS1"`                         |
//! | 4            | `u32` mode count `d`                     |
//! | 8 * d        | `u64` dims `n_1 .. n_d`                  |
//! | 8 * prod(n)  | `f64` payload, mode-1 index fastest      |
//!
//! Matrices are stored as two-mode tensors, which matches their column-major layout.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, TuckerError};
use crate::tensor::DenseTensor;
use crate::Matrix;

pub const MAGIC: &[u8; 5] = b"DTNS1";

pub fn write_tensor<W: Write>(mut w: W, t: &DenseTensor) -> Result<()> {
    w.write_all(MAGIC)?;
    let order = u32::try_from(t.order()).map_err(|_| TuckerError::Format("too many modes".into()))?;
    w.write_all(&order.to_le_bytes())?;
    for &n in t.dims() {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tensor<R: Read>(mut r: R) -> Result<DenseTensor> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(TuckerError::Format(format!("bad magic {magic:?}")));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word).map_err(truncated)?;
    let order = u32::from_le_bytes(word) as usize;
    if order == 0 {
        return Err(TuckerError::Format("zero modes".into()));
    }
    let mut dims = Vec::with_capacity(order);
    let mut buf = [0u8; 8];
    for _ in 0..order {
        r.read_exact(&mut buf).map_err(truncated)?;
        let n = u64::from_le_bytes(buf);
        dims.push(usize::try_from(n).map_err(|_| TuckerError::Format(format!("dim {n} too large")))?);
    }
    let len = dims
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .ok_or_else(|| TuckerError::Format(format!("dims {dims:?} overflow")))?;
    let mut bytes = vec![0u8; len.checked_mul(8).ok_or_else(|| TuckerError::Format("payload too large".into()))?];
    r.read_exact(&mut bytes).map_err(truncated)?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(TuckerError::Format("trailing bytes after payload".into()));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    DenseTensor::new(dims, data).map_err(|e| TuckerError::Format(e.to_string()))
}

fn truncated(e: std::io::Error) -> TuckerError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        TuckerError::Format("file truncated".into())
    } else {
        TuckerError::Io(e)
    }
}

pub fn save_tensor(path: impl AsRef<Path>, t: &DenseTensor) -> Result<()> {
    write_tensor(BufWriter::new(File::create(path)?), t)
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    read_tensor(BufReader::new(File::open(path)?))
}

pub fn matrix_to_tensor(m: &Matrix) -> Result<DenseTensor> {
    DenseTensor::new(vec![m.nrows(), m.ncols()], m.as_slice().to_vec())
}

pub fn tensor_to_matrix(t: &DenseTensor) -> Result<Matrix> {
    match t.dims() {
        &[rows, cols] => Ok(Matrix::from_column_slice(rows, cols, t.data())),
        dims => Err(TuckerError::Format(format!("expected a two-mode container, found dims {dims:?}"))),
    }
}

pub fn save_matrix(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    save_tensor(path, &matrix_to_tensor(m)?)
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    tensor_to_matrix(&load_tensor(path)?)
}
