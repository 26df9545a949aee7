//! Grayscale portable float maps: `"Pf\n<w> <h>\n<scale>\n"` then `f32`
//! samples with rows stored bottom-up. A negative scale means little-endian.

use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::DepthMap;

pub fn encode_pfm(depth: &DepthMap) -> Result<Vec<u8>> {
    if depth.width == 0 || depth.height == 0 {
        return Err(Error::Domain("depth map has zero size".into()));
    }
    let mut out = format!("Pf\n{} {}\n-1.0\n", depth.width, depth.height).into_bytes();
    out.reserve(depth.data.len() * 4);
    for row in depth.data.chunks_exact(depth.width).rev() {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Splits the next whitespace-delimited header token.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize, field: &str) -> Result<&'a str> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos || *pos >= bytes.len() {
        return Err(Error::format(field, "truncated header"));
    }
    std::str::from_utf8(&bytes[start..*pos]).map_err(|_| Error::format(field, "non-ASCII header"))
}

pub fn decode_pfm(bytes: &[u8]) -> Result<DepthMap> {
    let mut pos = 0;
    match next_token(bytes, &mut pos, "magic")? {
        "Pf" => {}
        "PF" => return Err(Error::format("magic", "color PFM (PF) where grayscale (Pf) expected")),
        other => return Err(Error::format("magic", format!("unknown PFM magic '{other}'"))),
    }
    let parse_dim = |tok: &str, field: &str| -> Result<usize> {
        tok.parse::<usize>()
            .ok()
            .filter(|&d| d > 0 && d <= 1 << 16)
            .ok_or_else(|| Error::format(field, format!("invalid dimension '{tok}'")))
    };
    let width = parse_dim(next_token(bytes, &mut pos, "width")?, "width")?;
    let height = parse_dim(next_token(bytes, &mut pos, "height")?, "height")?;
    let scale_tok = next_token(bytes, &mut pos, "scale")?;
    let scale: f32 = scale_tok
        .parse()
        .ok()
        .filter(|s: &f32| s.is_finite() && *s != 0.0)
        .ok_or_else(|| Error::format("scale", format!("invalid scale '{scale_tok}'")))?;
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let expected = width * height * 4;
    let payload = &bytes[pos.min(bytes.len())..];
    if payload.len() != expected {
        return Err(Error::format("payload", format!("{} raster bytes, expected {expected}", payload.len())));
    }
    let little = scale < 0.0;
    let mut data = vec![0f32; width * height];
    for (r, row) in payload.chunks_exact(width * 4).enumerate() {
        let y = height - 1 - r;
        for (x, c) in row.chunks_exact(4).enumerate() {
            let b: [u8; 4] = c.try_into().unwrap();
            data[y * width + x] = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        }
    }
    Ok(DepthMap { width, height, data })
}

pub fn write_pfm(depth: &DepthMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pfm(depth)?).map_err(|e| Error::io(path, e))
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<DepthMap> {
    let path = path.as_ref();
    decode_pfm(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
