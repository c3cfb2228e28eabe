//! Flat little-endian dataset files.
//!
//! Layout: `u64 n`, `u32 rank`, `rank x u64` per-sample dims, `u32 classes`,
//! then `n * prod(dims)` `f32` samples and `n` `u16` labels.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use splitsim_core::data::Dataset;
use splitsim_core::Tensor;

const MAX_RANK: u32 = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub samples: usize,
    pub shape: Vec<usize>,
    pub classes: usize,
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn read_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn decode_header(r: &mut impl Read) -> io::Result<Header> {
    let samples = read_u64(r)? as usize;
    let rank = read_u32(r)?;
    if rank == 0 || rank > MAX_RANK {
        return Err(invalid(format!("sample rank {rank} outside [1, {MAX_RANK}]")));
    }
    let shape = (0..rank).map(|_| read_u64(r).map(|d| d as usize)).collect::<io::Result<Vec<_>>>()?;
    let classes = read_u32(r)? as usize;
    if classes == 0 || classes > usize::from(u16::MAX) + 1 {
        return Err(invalid(format!("class count {classes} unsupported")));
    }
    Ok(Header { samples, shape, classes })
}

pub fn read_header(path: &Path) -> io::Result<Header> {
    decode_header(&mut BufReader::new(File::open(path)?))
}

pub fn write_to(dataset: &Dataset, w: &mut impl Write) -> io::Result<()> {
    if dataset.classes > usize::from(u16::MAX) + 1 {
        return Err(invalid("labels do not fit in u16"));
    }
    w.write_all(&(dataset.len() as u64).to_le_bytes())?;
    let shape = dataset.sample_shape();
    w.write_all(&(shape.len() as u32).to_le_bytes())?;
    for &d in shape {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    w.write_all(&(dataset.classes as u32).to_le_bytes())?;
    for x in dataset.samples.data() {
        w.write_all(&x.to_le_bytes())?;
    }
    for &y in &dataset.labels {
        w.write_all(&(y as u16).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_from(r: &mut impl Read) -> io::Result<Dataset> {
    let h = decode_header(r)?;
    let per_sample: usize = h.shape.iter().product();
    let elems = h.samples.checked_mul(per_sample).ok_or_else(|| invalid("sample count overflows"))?;
    let mut bytes = vec![0u8; elems.checked_mul(4).ok_or_else(|| invalid("sample count overflows"))?];
    r.read_exact(&mut bytes)?;
    let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    let mut label_bytes = vec![0u8; h.samples * 2];
    r.read_exact(&mut label_bytes)?;
    let labels = label_bytes.chunks_exact(2).map(|c| u32::from(u16::from_le_bytes([c[0], c[1]]))).collect();
    if r.read(&mut [0u8])? != 0 {
        return Err(invalid("trailing bytes after labels"));
    }
    let mut shape = vec![h.samples];
    shape.extend(&h.shape);
    let samples = Tensor::new(shape, data).map_err(|e| invalid(e.to_string()))?;
    Dataset::new(samples, labels, h.classes).map_err(|e| invalid(e.to_string()))
}

pub fn save(dataset: &Dataset, path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_to(dataset, &mut w)?;
    w.flush()
}

pub fn load(path: &Path) -> io::Result<Dataset> {
    read_from(&mut BufReader::new(File::open(path)?))
}
