//! Middlebury `.flo`: `f32` magic 202021.25, `i32` width, `i32` height, then
//! row-major interleaved `(u, v)` `f32`, all little-endian.
//!
//! Invalid pixels are written as the [`UNKNOWN_FLOW`] sentinel and any
//! component above [`UNKNOWN_FLOW_THRESHOLD`] is read back as invalid.

use std::path::Path;

use crate::error::{Error, Result};
use crate::flow::{FlowField, UNKNOWN_FLOW, UNKNOWN_FLOW_THRESHOLD};

pub const FLO_MAGIC: f32 = 202021.25;
/// Largest accepted side length.
const MAX_SIDE: i32 = 1 << 16;

pub fn encode_flo(flow: &FlowField) -> Result<Vec<u8>> {
    if flow.width == 0 || flow.height == 0 {
        return Err(Error::Domain("flow field has zero size".into()));
    }
    if flow.width > MAX_SIDE as usize || flow.height > MAX_SIDE as usize {
        return Err(Error::Domain("flow field too large for .flo".into()));
    }
    let mut out = Vec::with_capacity(12 + flow.data.len() * 8);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height as i32).to_le_bytes());
    for (d, valid) in flow.data.iter().zip(&flow.valid) {
        let d = if *valid { *d } else { [UNKNOWN_FLOW; 2] };
        if *valid && !(d[0].is_finite() && d[1].is_finite()) {
            return Err(Error::Domain("non-finite flow at a valid pixel".into()));
        }
        out.extend_from_slice(&d[0].to_le_bytes());
        out.extend_from_slice(&d[1].to_le_bytes());
    }
    Ok(out)
}

/// Width and height from a `.flo` header.
pub fn decode_flo_header(bytes: &[u8]) -> Result<(usize, usize)> {
    if bytes.len() < 12 {
        return Err(Error::format("header", "truncated .flo header"));
    }
    let magic = f32::from_le_bytes(bytes[0..4].try_into().unwrap());
    if magic.to_bits() != FLO_MAGIC.to_bits() {
        return Err(Error::format("magic", format!("expected 202021.25, found {magic}")));
    }
    let w = i32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let h = i32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if w <= 0 || h <= 0 || w > MAX_SIDE || h > MAX_SIDE {
        return Err(Error::format("dimensions", format!("invalid size {w}x{h}")));
    }
    Ok((w as usize, h as usize))
}

pub fn decode_flo(bytes: &[u8]) -> Result<FlowField> {
    let (w, h) = decode_flo_header(bytes)?;
    let expected = (w as u64) * (h as u64) * 8 + 12;
    if (bytes.len() as u64) < expected {
        return Err(Error::format("payload", format!("truncated: {} bytes, expected {expected}", bytes.len())));
    }
    if bytes.len() as u64 > expected {
        return Err(Error::format("payload", format!("{} trailing bytes", bytes.len() as u64 - expected)));
    }
    let mut flow = FlowField::zeros(w, h);
    for (i, chunk) in bytes[12..].chunks_exact(8).enumerate() {
        let u = f32::from_le_bytes(chunk[0..4].try_into().unwrap());
        let v = f32::from_le_bytes(chunk[4..8].try_into().unwrap());
        if !(u.abs() <= UNKNOWN_FLOW_THRESHOLD && v.abs() <= UNKNOWN_FLOW_THRESHOLD) {
            flow.set_invalid(i);
        } else {
            flow.data[i] = [u, v];
        }
    }
    Ok(flow)
}

pub fn write_flo(flow: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_flo(flow)?).map_err(|e| Error::io(path, e))
}

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    decode_flo(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Reads only the header; used by manifest validation.
pub fn read_flo_dimensions(path: impl AsRef<Path>) -> Result<(usize, usize)> {
    use std::io::Read;
    let path = path.as_ref();
    let mut head = [0u8; 12];
    std::fs::File::open(path)
        .and_then(|mut f| f.read_exact(&mut head))
        .map_err(|e| Error::io(path, e))?;
    decode_flo_header(&head)
}
