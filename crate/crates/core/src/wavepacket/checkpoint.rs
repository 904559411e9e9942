//! Self-describing dump of a propagation state.
//!
//! Layout: the magic `CIRSIMCK`, a little-endian `u32` header length, a JSON
//! header (version, grid descriptor, step, time, value count), then the
//! values as little-endian `f64` pairs.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{GridSpec, WaveFunctionGrid};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"CIRSIMCK";

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    grid: GridSpec,
    step: u64,
    time: f64,
    n_values: usize,
}

pub fn write_checkpoint<W: Write>(psi: &WaveFunctionGrid, mut out: W) -> Result<()> {
    let header = Header {
        version: CHECKPOINT_VERSION,
        grid: psi.grid,
        step: psi.step,
        time: psi.time,
        n_values: psi.values.len(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    out.write_all(MAGIC)?;
    out.write_all(&(json.len() as u32).to_le_bytes())?;
    out.write_all(&json)?;
    let mut buf = Vec::with_capacity(psi.values.len() * 16);
    for v in &psi.values {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<WaveFunctionGrid> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let mut len = [0u8; 4];
    input.read_exact(&mut len)?;
    let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
    input.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", header.version)));
    }
    let mut psi = WaveFunctionGrid::zeros(&header.grid)?;
    if psi.values.len() != header.n_values {
        return Err(Error::Checkpoint(format!(
            "grid rebuilds to {} values but the file holds {}",
            psi.values.len(),
            header.n_values
        )));
    }
    let mut raw = vec![0u8; header.n_values * 16];
    input.read_exact(&mut raw)?;
    for (v, chunk) in psi.values.iter_mut().zip(raw.chunks_exact(16)) {
        let re = f64::from_le_bytes(chunk[..8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(chunk[8..].try_into().expect("8 bytes"));
        *v = Complex64::new(re, im);
    }
    psi.step = header.step;
    psi.time = header.time;
    Ok(psi)
}
