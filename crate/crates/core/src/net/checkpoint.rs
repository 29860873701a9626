//! Binary parameter checkpoints.
//!
//! Layout, all integers `u32` little-endian:
//!
//! ```text
//! magic "HTRKCKPT" | version | encoder_blocks base_channels stages classes
//! tensor count
//! per tensor: name length, name (UTF-8), rank, dims..., values (f64 LE),
//!             CRC-32 of the record bytes preceding it
//! ```

use std::io::{Read, Write};

use super::{HeatmapNet, NamedTensor, NetConfig, Parameters};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HTRKCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

const MAX_NAME: usize = 4096;
const MAX_RANK: usize = 8;

fn u32_of(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Checkpoint(format!("{what} {v} does not fit in 32 bits")))
}

pub fn write_checkpoint<W: Write>(params: &Parameters, mut out: W) -> Result<()> {
    HeatmapNet::new(params.config)?.check_parameters(params)?;
    let c = params.config;
    let mut header = Vec::with_capacity(32);
    header.extend_from_slice(CHECKPOINT_MAGIC);
    for v in [
        CHECKPOINT_VERSION as usize,
        c.encoder_blocks,
        c.base_channels,
        c.stages,
        c.classes,
        params.tensors.len(),
    ] {
        header.extend_from_slice(&u32_of(v, "header field")?.to_le_bytes());
    }
    out.write_all(&header)?;
    for t in &params.tensors {
        let mut rec = Vec::with_capacity(16 + t.name.len() + 8 * t.data.len());
        rec.extend_from_slice(&u32_of(t.name.len(), "name length")?.to_le_bytes());
        rec.extend_from_slice(t.name.as_bytes());
        rec.extend_from_slice(&u32_of(t.shape.len(), "rank")?.to_le_bytes());
        for &d in &t.shape {
            rec.extend_from_slice(&u32_of(d, "dimension")?.to_le_bytes());
        }
        for v in &t.data {
            rec.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&rec);
        out.write_all(&rec)?;
        out.write_all(&crc.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

struct Reader<R> {
    inner: R,
    record: Vec<u8>,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, n: usize, what: &str) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner.read_exact(&mut buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Checkpoint(format!("truncated while reading {what}"))
            } else {
                Error::Io(e)
            }
        })?;
        self.record.extend_from_slice(&buf);
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.bytes(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
}

/// Reads and validates a checkpoint against the net its header describes.
pub fn read_checkpoint<R: Read>(input: R) -> Result<Parameters> {
    let mut r = Reader {
        inner: input,
        record: Vec::new(),
    };
    if r.bytes(8, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let config = NetConfig {
        encoder_blocks: r.u32("config")?,
        base_channels: r.u32("config")?,
        stages: r.u32("config")?,
        classes: r.u32("config")?,
    };
    let net = HeatmapNet::new(config).map_err(|e| Error::Checkpoint(format!("bad net config: {e}")))?;
    let count = r.u32("tensor count")?;
    let specs = net.parameter_specs();
    if count != specs.len() {
        return Err(Error::Checkpoint(format!(
            "{count} tensors, the configured net has {}",
            specs.len()
        )));
    }
    let mut tensors = Vec::with_capacity(count);
    for (i, (want_name, want_shape)) in specs.iter().enumerate() {
        r.record.clear();
        let len = r.u32("name length")?;
        if len > MAX_NAME {
            return Err(Error::Checkpoint(format!("tensor {i} name length {len} too large")));
        }
        let name = String::from_utf8(r.bytes(len, "name")?)
            .map_err(|_| Error::Checkpoint(format!("tensor {i} name is not UTF-8")))?;
        let rank = r.u32("rank")?;
        if rank > MAX_RANK {
            return Err(Error::Checkpoint(format!("tensor {name} rank {rank} too large")));
        }
        let shape = (0..rank).map(|_| r.u32("dimension")).collect::<Result<Vec<_>>>()?;
        if &name != want_name || &shape != want_shape {
            return Err(Error::Checkpoint(format!(
                "tensor {i} is {name} {shape:?}, expected {want_name} {want_shape:?}"
            )));
        }
        let n: usize = shape.iter().product();
        let raw = r.bytes(8 * n, "values")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let crc = crc32fast::hash(&r.record);
        let stored = r.u32("checksum")? as u32;
        if crc != stored {
            return Err(Error::Checkpoint(format!("checksum mismatch in tensor {name}")));
        }
        tensors.push(NamedTensor { name, shape, data });
    }
    let mut extra = [0u8; 1];
    if r.inner.read(&mut extra)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
    }
    Ok(Parameters { config, tensors })
}
