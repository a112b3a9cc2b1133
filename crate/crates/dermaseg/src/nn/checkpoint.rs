//! Self-describing checkpoint container.
//!
//! Layout (little-endian): a versioned magic string, a component tag
//! (`segmenter`, `s-model`, `c-model`, `discriminator`), the flat key=value
//! config block, epoch, validation score, then named tensors with shape
//! headers.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::ArrayD;

use crate::error::{Error, Result};

const MAGIC: &[u8] = b"DERMASEG-CKPT-v1\n";

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub component: String,
    /// Flat `key=value` lines describing the model config.
    pub config: String,
    pub epoch: u64,
    pub val_score: f64,
    pub tensors: Vec<(String, ArrayD<f64>)>,
}

impl Checkpoint {
    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io_err = |e| Error::io(path, e);

        w.write_all(MAGIC).map_err(io_err)?;
        write_str(&mut w, &self.component).map_err(io_err)?;
        write_str(&mut w, &self.config).map_err(io_err)?;
        w.write_all(&self.epoch.to_le_bytes()).map_err(io_err)?;
        w.write_all(&self.val_score.to_le_bytes()).map_err(io_err)?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes()).map_err(io_err)?;
        for (name, tensor) in &self.tensors {
            write_str(&mut w, name).map_err(io_err)?;
            w.write_all(&(tensor.ndim() as u32).to_le_bytes()).map_err(io_err)?;
            for &d in tensor.shape() {
                w.write_all(&(d as u64).to_le_bytes()).map_err(io_err)?;
            }
            let data = tensor.as_slice().expect("standard layout tensor");
            for v in data {
                w.write_all(&v.to_le_bytes()).map_err(io_err)?;
            }
        }
        w.flush().map_err(io_err)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let io_err = |e| Error::io(path, e);
        let bad = |msg: &str| Error::Checkpoint { path: path.to_path_buf(), msg: msg.to_string() };

        let mut magic = vec![0u8; MAGIC.len()];
        r.read_exact(&mut magic).map_err(io_err)?;
        if magic != MAGIC {
            return Err(bad("bad magic string (not a checkpoint or wrong version)"));
        }
        let component = read_str(&mut r).map_err(io_err)?;
        let config = read_str(&mut r).map_err(io_err)?;
        let epoch = read_u64(&mut r).map_err(io_err)?;
        let val_score = f64::from_le_bytes(read_bytes::<8>(&mut r).map_err(io_err)?);
        let n_tensors = read_u32(&mut r).map_err(io_err)? as usize;
        if n_tensors > 1_000_000 {
            return Err(bad("implausible tensor count"));
        }

        let mut tensors = Vec::with_capacity(n_tensors);
        for _ in 0..n_tensors {
            let name = read_str(&mut r).map_err(io_err)?;
            let ndim = read_u32(&mut r).map_err(io_err)? as usize;
            if ndim > 8 {
                return Err(bad(&format!("tensor {name:?}: implausible rank {ndim}")));
            }
            let mut shape = Vec::with_capacity(ndim);
            let mut len = 1usize;
            for _ in 0..ndim {
                let d = read_u64(&mut r).map_err(io_err)? as usize;
                len = len
                    .checked_mul(d)
                    .ok_or_else(|| bad(&format!("tensor {name:?}: shape overflow")))?;
                shape.push(d);
            }
            let mut data = vec![0.0f64; len];
            for v in &mut data {
                *v = f64::from_le_bytes(read_bytes::<8>(&mut r).map_err(io_err)?);
            }
            let tensor = ArrayD::from_shape_vec(shape, data)
                .map_err(|e| bad(&format!("tensor {name:?}: {e}")))?;
            tensors.push((name, tensor));
        }
        Ok(Checkpoint { component, config, epoch, val_score, tensors })
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> std::io::Result<String> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

fn read_bytes<const N: usize>(r: &mut impl Read) -> std::io::Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    Ok(u32::from_le_bytes(read_bytes::<4>(r)?))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    Ok(u64::from_le_bytes(read_bytes::<8>(r)?))
}
