//! Binary asset container.
//!
//! Layout (little-endian): magic `FFNA`, `u32` version, six `u32` dimensions
//! `(n_v, n_f, n_beta, n_psi, k, n_landmarks)`, then in order:
//! template `f64[n_v*3]`, triangles `u32[n_f*3]`, shape basis
//! `f64[n_beta*n_v*3]`, expression basis `f64[n_psi*n_v*3]`, joint pivots
//! `f64[k*3]`, joint parents `u32[k]`, skin weights `f64[n_v*(k+1)]`, region
//! labels `u8[n_v]`, landmark indices `u32[n_landmarks]`.

use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::{FaceModelAsset, Region};
use crate::error::{Error, Result};
use crate::math::Vec3;

const MAGIC: &[u8; 4] = b"FFNA";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 6 * 4;
/// Upper bound on any single dimension, rejects absurd headers before allocating.
const MAX_DIM: u64 = 1 << 28;

pub fn encode_asset(asset: &FaceModelAsset) -> Vec<u8> {
    let nv = asset.num_vertices();
    let k = asset.num_joints();
    let mut out = Vec::with_capacity(HEADER_LEN + nv * 8 * (3 * (1 + asset.num_shape() + asset.num_expression()) + k + 1));
    out.extend_from_slice(MAGIC);
    for d in [
        VERSION,
        nv as u32,
        asset.num_triangles() as u32,
        asset.num_shape() as u32,
        asset.num_expression() as u32,
        k as u32,
        asset.landmark_indices.len() as u32,
    ] {
        out.extend_from_slice(&d.to_le_bytes());
    }
    let put_vecs = |out: &mut Vec<u8>, vs: &[Vec3]| {
        for c in vs.iter().flatten() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    };
    put_vecs(&mut out, &asset.template_vertices);
    for ix in asset.triangles.iter().flatten() {
        out.extend_from_slice(&ix.to_le_bytes());
    }
    for comp in asset.shape_basis.iter().chain(&asset.expression_basis) {
        put_vecs(&mut out, comp);
    }
    put_vecs(&mut out, &asset.joint_offsets);
    for p in &asset.kinematic_tree {
        out.extend_from_slice(&p.to_le_bytes());
    }
    for w in &asset.skin_weights {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out.extend(asset.region_labels.iter().map(|r| *r as u8));
    for ix in &asset.landmark_indices {
        out.extend_from_slice(&ix.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::format(field, format!("truncated payload: need {n} bytes at offset {}", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32s(&mut self, n: usize, field: &str) -> Result<Vec<u32>> {
        let bytes = self.take(n * 4, field)?;
        Ok(bytes.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn f64s(&mut self, n: usize, field: &str) -> Result<Vec<f64>> {
        let bytes = self.take(n * 8, field)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn vec3s(&mut self, n: usize, field: &str) -> Result<Vec<Vec3>> {
        Ok(self.f64s(n * 3, field)?.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
    }
}

pub fn decode_asset(bytes: &[u8]) -> Result<FaceModelAsset> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format("header", format!("file is {} bytes, header needs {HEADER_LEN}", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format("magic", "expected FFNA"));
    }
    let mut r = Reader { buf: bytes, pos: 4 };
    let head = r.u32s(7, "header")?;
    if head[0] != VERSION {
        return Err(Error::format("version", format!("unsupported version {}", head[0])));
    }
    let names = ["n_v", "n_f", "n_beta", "n_psi", "k", "n_landmarks"];
    for (name, &d) in names.iter().zip(&head[1..]) {
        if d as u64 > MAX_DIM {
            return Err(Error::format(*name, format!("dimension {d} exceeds limit")));
        }
    }
    let [nv, nf, nb, np, k, nl] = [head[1], head[2], head[3], head[4], head[5], head[6]].map(|d| d as usize);
    // Size check up front so truncation is reported before large allocations.
    let need = (nv as u64) * 24 * (1 + nb as u64 + np as u64)
        + nf as u64 * 12
        + k as u64 * 28
        + nv as u64 * 8 * (k as u64 + 1)
        + nv as u64
        + nl as u64 * 4;
    let have = (bytes.len() - HEADER_LEN) as u64;
    if have < need {
        return Err(Error::format("payload", format!("truncated payload: {have} bytes, expected {need}")));
    }
    if have > need {
        return Err(Error::format("payload", format!("{} trailing bytes", have - need)));
    }

    let template_vertices = r.vec3s(nv, "template_vertices")?;
    let triangles = r.u32s(nf * 3, "triangles")?.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    let shape_basis = (0..nb).map(|_| r.vec3s(nv, "shape_basis")).collect::<Result<_>>()?;
    let expression_basis = (0..np).map(|_| r.vec3s(nv, "expression_basis")).collect::<Result<_>>()?;
    let joint_offsets = r.vec3s(k, "joint_offsets")?;
    let kinematic_tree = r.u32s(k, "kinematic_tree")?;
    let skin_weights = r.f64s(nv * (k + 1), "skin_weights")?;
    let region_labels = r
        .take(nv, "region_labels")?
        .iter()
        .map(|&b| Region::from_u8(b).ok_or_else(|| Error::format("region_labels", format!("unknown region tag {b}"))))
        .collect::<Result<_>>()?;
    let landmark_indices = r.u32s(nl, "landmark_indices")?;

    let asset = FaceModelAsset {
        template_vertices,
        triangles: Arc::new(triangles),
        shape_basis,
        expression_basis,
        joint_offsets,
        kinematic_tree,
        skin_weights,
        region_labels,
        landmark_indices,
    };
    asset.validate()?;
    Ok(asset)
}

pub fn save_asset(asset: &FaceModelAsset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_asset(asset)).map_err(|e| Error::io(path, e))
}

pub fn load_asset(path: impl AsRef<Path>) -> Result<FaceModelAsset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_asset(&bytes)
}

/// Hex SHA-256 of the encoded asset; recorded in dataset manifests.
pub fn asset_fingerprint(asset: &FaceModelAsset) -> String {
    let digest = Sha256::digest(encode_asset(asset));
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
