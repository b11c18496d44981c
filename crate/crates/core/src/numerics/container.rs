//! Binary tensor container used for checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "CORFMDL\0"
//! version    u32      1 = f64 tensors, 2 = may contain int8 tensors
//! fingerprint str
//! meta       u32 count, then (key str, value str) pairs
//! tensors    u32 count, then per tensor:
//!              name str, rows u64, cols u64, tag u8
//!              tag 0: rows*cols f64 bit patterns
//!              tag 1: scale f64, rows*cols i8
//! ```
//!
//! `str` is a u32 byte length followed by UTF-8 bytes. Values are stored as
//! raw bit patterns so a write/read cycle is bit-exact.

use std::io::{Read, Write};

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"CORFMDL\0";
pub const FORMAT_F64: u32 = 1;
pub const FORMAT_QUANTIZED: u32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    F64(Vec<f64>),
    Int8 { scale: f64, values: Vec<i8> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub version: u32,
    pub fingerprint: String,
    pub meta: Vec<(String, String)>,
    pub tensors: Vec<StoredTensor>,
}

impl Container {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn tensor(&self, name: &str) -> Option<&StoredTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&self.version.to_le_bytes())?;
        write_str(w, &self.fingerprint)?;
        w.write_all(&(self.meta.len() as u32).to_le_bytes())?;
        for (k, v) in &self.meta {
            write_str(w, k)?;
            write_str(w, v)?;
        }
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for t in &self.tensors {
            write_str(w, &t.name)?;
            w.write_all(&(t.rows as u64).to_le_bytes())?;
            w.write_all(&(t.cols as u64).to_le_bytes())?;
            match &t.payload {
                Payload::F64(values) => {
                    w.write_all(&[0])?;
                    for v in values {
                        w.write_all(&v.to_bits().to_le_bytes())?;
                    }
                }
                Payload::Int8 { scale, values } => {
                    w.write_all(&[1])?;
                    w.write_all(&scale.to_bits().to_le_bytes())?;
                    let bytes: Vec<u8> = values.iter().map(|&v| v as u8).collect();
                    w.write_all(&bytes)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic, not a model file".into()));
        }
        let version = read_u32(r)?;
        if version != FORMAT_F64 && version != FORMAT_QUANTIZED {
            return Err(Error::Format(format!("unsupported format version {version}")));
        }
        let fingerprint = read_str(r)?;
        let meta_len = read_u32(r)?;
        let mut meta = Vec::new();
        for _ in 0..meta_len {
            meta.push((read_str(r)?, read_str(r)?));
        }
        let count = read_u32(r)?;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let name = read_str(r)?;
            let (rows, cols) = (read_u64(r)?, read_u64(r)?);
            let too_large = || Error::Format(format!("tensor {name} too large"));
            let len = rows
                .checked_mul(cols)
                .filter(|&n| n <= 1 << 32)
                .and_then(|n| usize::try_from(n).ok())
                .ok_or_else(too_large)?;
            let (rows, cols) = (rows as usize, cols as usize);
            let mut tag = [0u8; 1];
            read_exact(r, &mut tag)?;
            let payload = match tag[0] {
                0 => {
                    // A corrupt header should not be able to reserve gigabytes up front.
                    let mut values = Vec::with_capacity(len.min(1 << 16));
                    for _ in 0..len {
                        values.push(f64::from_bits(read_u64(r)?));
                    }
                    Payload::F64(values)
                }
                1 if version == FORMAT_QUANTIZED => {
                    let scale = f64::from_bits(read_u64(r)?);
                    let mut bytes = Vec::new();
                    r.by_ref()
                        .take(len as u64)
                        .read_to_end(&mut bytes)
                        .map_err(|e| Error::Format(e.to_string()))?;
                    if bytes.len() != len {
                        return Err(Error::Format("truncated model file".into()));
                    }
                    Payload::Int8 {
                        scale,
                        values: bytes.into_iter().map(|b| b as i8).collect(),
                    }
                }
                other => return Err(Error::Format(format!("tensor {name}: bad payload tag {other}"))),
            };
            tensors.push(StoredTensor { name, rows, cols, payload });
        }
        Ok(Self {
            version,
            fingerprint,
            meta,
            tensors,
        })
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| Error::Format(format!("truncated model file: {e}")))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    if len > 1 << 24 {
        return Err(Error::Format("string field too long".into()));
    }
    let mut buf = vec![0u8; len];
    read_exact(r, &mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::Format("string field is not UTF-8".into()))
}
