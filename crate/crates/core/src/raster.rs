//! Pinhole camera and z-buffered software rasterizer.
//!
//! Coverage is decided on vertex positions snapped to 1/256 px with exact
//! integer edge functions and a top-left fill rule, so triangles sharing an
//! edge never both claim a pixel. Barycentrics stored in the visibility buffer
//! are perspective-correct with respect to the 3D triangle and are evaluated
//! at the pixel center `(i + 0.5, j + 0.5)` from unsnapped projections.

use std::sync::Arc;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::face_model::Mesh;
use crate::math::{self, Mat3, Vec3};

const SUBPIXEL: f64 = 256.0;
/// Projected coordinates beyond this (in px) are outside the guard band.
const GUARD_BAND: f64 = 1.0e7;
const BAND_ROWS: usize = 16;

pub const NO_TRIANGLE: u32 = u32::MAX;

/// Pinhole camera with rigid extrinsics mapping world to camera frame
/// (`x` right, `y` down, `z` forward).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub rotation: Mat3,
    pub translation: Vec3,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        rotation: Mat3,
        translation: Vec3,
        width: usize,
        height: usize,
    ) -> Result<Camera> {
        let cam = Camera { fx, fy, cx, cy, rotation, translation, width, height };
        cam.validate()?;
        Ok(cam)
    }

    /// Identity extrinsics.
    pub fn intrinsic(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Camera> {
        Camera::new(fx, fy, cx, cy, math::IDENTITY, [0.0; 3], width, height)
    }

    /// Camera looking at the template-space origin from `+z`, world `y` up.
    /// The synthetic head spans roughly 60% of the frame height.
    pub fn head_default(width: usize, height: usize) -> Result<Camera> {
        let f = 1.2 * height as f64;
        Camera::new(
            f,
            f,
            width as f64 / 2.0,
            height as f64 / 2.0,
            [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]],
            [0.0, 0.0, 0.44],
            width,
            height,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::Domain("focal lengths must be positive and finite".into()));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) || self.translation.iter().any(|t| !t.is_finite()) {
            return Err(Error::Domain("camera parameters must be finite".into()));
        }
        if self.width < 8 || self.height < 8 {
            return Err(Error::Domain(format!("image size {}x{} below 8x8", self.width, self.height)));
        }
        if !(math::orthonormality_error(&self.rotation) <= 1e-9) {
            return Err(Error::Domain("camera rotation is not orthonormal".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn to_camera(&self, p: Vec3) -> Vec3 {
        math::add(math::mat_vec(&self.rotation, p), self.translation)
    }

    /// Projects a camera-frame point without a depth check.
    #[inline]
    pub fn project_camera_point(&self, pc: Vec3) -> [f64; 2] {
        [self.fx * pc[0] / pc[2] + self.cx, self.fy * pc[1] / pc[2] + self.cy]
    }

    /// Projects a world point; fails unless its camera depth exceeds `near`.
    pub fn project_with_near(&self, p: Vec3, near: f64) -> Result<([f64; 2], f64)> {
        let pc = self.to_camera(p);
        if !(pc[2] > near) {
            return Err(Error::BehindCamera { depth: pc[2], near });
        }
        Ok((self.project_camera_point(pc), pc[2]))
    }

    pub fn project(&self, p: Vec3) -> Result<([f64; 2], f64)> {
        self.project_with_near(p, 0.0)
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }
}

/// Backdrop behind the head: a flat color or an RGB image resampled to the frame.
#[derive(Debug, Clone, PartialEq)]
pub enum Background {
    Flat([u8; 3]),
    Image(Arc<RgbImage>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    pub background: Background,
    /// Depth of the stationary background plane.
    pub background_depth: f64,
    /// Camera-frame direction from surface toward the light.
    pub light_dir: Vec3,
    pub ambient: f64,
    pub near: f64,
    pub far: f64,
    /// Linear RGB albedo per vertex in `[0, 1]`; `None` uses a uniform skin tone.
    pub vertex_albedo: Option<Arc<Vec<[f32; 3]>>>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            background: Background::Flat([70, 80, 95]),
            background_depth: 1.0,
            light_dir: math::normalize([-0.3, -0.5, -1.0]),
            ambient: 0.3,
            near: 0.01,
            far: 10.0,
            vertex_albedo: None,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.near > 0.0 && self.near < self.far) {
            return Err(Error::Domain("require 0 < near < far".into()));
        }
        if !(self.background_depth > self.near) {
            return Err(Error::Domain("background plane must lie beyond the near plane".into()));
        }
        if !(0.0..=1.0).contains(&self.ambient) {
            return Err(Error::Domain("ambient coefficient must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Per-pixel depth, row-major from the top row.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl DepthMap {
    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        DepthMap { width, height, data: vec![value; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }
}

/// Which triangle is visible at each pixel, where on it, and how far away.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityBuffer {
    pub width: usize,
    pub height: usize,
    /// Triangle index or [`NO_TRIANGLE`].
    pub triangle: Vec<u32>,
    /// Object-space barycentric weights of the pixel-center surface point.
    pub barycentric: Vec<[f64; 3]>,
    /// Camera-frame depth of that point; background plane depth when uncovered.
    pub depth: Vec<f64>,
}

impl VisibilityBuffer {
    #[inline]
    pub fn covered(&self, idx: usize) -> Option<u32> {
        let t = self.triangle[idx];
        (t != NO_TRIANGLE).then_some(t)
    }

    pub fn coverage_mask(&self) -> Vec<bool> {
        self.triangle.iter().map(|&t| t != NO_TRIANGLE).collect()
    }

    pub fn covered_count(&self) -> usize {
        self.triangle.iter().filter(|&&t| t != NO_TRIANGLE).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub frame: RgbImage,
    pub depth: DepthMap,
    pub visibility: VisibilityBuffer,
}

struct TriSetup {
    id: u32,
    screen: [[f64; 2]; 3],
    fixed: [[i64; 2]; 3],
    inv_z: [f64; 3],
    z: [f64; 3],
    /// +1 or -1 so that interior edge values are positive.
    sign: i128,
    owned: [bool; 3],
    area: f64,
    x_range: (usize, usize),
    y_range: (usize, usize),
}

#[inline]
fn edge_fixed(a: [i64; 2], b: [i64; 2], p: [i64; 2]) -> i128 {
    (b[0] - a[0]) as i128 * (p[1] - a[1]) as i128 - (b[1] - a[1]) as i128 * (p[0] - a[0]) as i128
}

#[inline]
fn edge_f64(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// Pixel index range whose centers fall in `[lo, hi]`, clamped to `[0, size)`.
fn center_range(lo: f64, hi: f64, size: usize) -> Option<(usize, usize)> {
    let first = (lo - 0.5).ceil().max(0.0);
    let last = (hi - 0.5).floor().min(size as f64 - 1.0);
    (first <= last).then(|| (first as usize, last as usize))
}

fn setup_triangle(id: u32, cam_pts: [Vec3; 3], camera: &Camera, config: &RenderConfig) -> Option<TriSetup> {
    if cam_pts.iter().any(|p| !(p[2] > config.near)) {
        return None;
    }
    if cam_pts.iter().all(|p| p[2] > config.far) {
        return None;
    }
    let screen = cam_pts.map(|p| camera.project_camera_point(p));
    if screen.iter().flatten().any(|c| !(c.abs() < GUARD_BAND)) {
        return None;
    }
    let fixed = screen.map(|s| [(s[0] * SUBPIXEL).round() as i64, (s[1] * SUBPIXEL).round() as i64]);
    let area_fixed = edge_fixed(fixed[0], fixed[1], fixed[2]);
    if area_fixed == 0 {
        return None;
    }
    let sign: i128 = if area_fixed > 0 { 1 } else { -1 };
    // Edge k is opposite vertex k: (v1,v2), (v2,v0), (v0,v1).
    let owned = [(1, 2), (2, 0), (0, 1)].map(|(a, b)| {
        let dx = (fixed[b][0] - fixed[a][0]) as i128 * sign;
        let dy = (fixed[b][1] - fixed[a][1]) as i128 * sign;
        (dy == 0 && dx > 0) || dy < 0
    });
    let (min_x, max_x) = screen.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s[0]), hi.max(s[0])));
    let (min_y, max_y) = screen.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s[1]), hi.max(s[1])));
    let x_range = center_range(min_x, max_x, camera.width)?;
    let y_range = center_range(min_y, max_y, camera.height)?;
    let area = edge_f64(screen[0], screen[1], screen[2]);
    if area == 0.0 {
        return None;
    }
    Some(TriSetup {
        id,
        screen,
        fixed,
        inv_z: cam_pts.map(|p| 1.0 / p[2]),
        z: cam_pts.map(|p| p[2]),
        sign,
        owned,
        area,
        x_range,
        y_range,
    })
}

/// Perspective-correct barycentrics and depth of the pixel center, if covered.
#[inline]
fn cover(tri: &TriSetup, px: usize, py: usize) -> Option<([f64; 3], f64)> {
    let p_fixed = [(px as i64) * 256 + 128, (py as i64) * 256 + 128];
    let f = &tri.fixed;
    let w = [
        edge_fixed(f[1], f[2], p_fixed) * tri.sign,
        edge_fixed(f[2], f[0], p_fixed) * tri.sign,
        edge_fixed(f[0], f[1], p_fixed) * tri.sign,
    ];
    for k in 0..3 {
        if w[k] < 0 || (w[k] == 0 && !tri.owned[k]) {
            return None;
        }
    }
    let p = [px as f64 + 0.5, py as f64 + 0.5];
    let s = &tri.screen;
    let lam = [
        edge_f64(s[1], s[2], p) / tri.area,
        edge_f64(s[2], s[0], p) / tri.area,
        edge_f64(s[0], s[1], p) / tri.area,
    ];
    // Snapping may place a covered center marginally outside the exact triangle.
    let lam = lam.map(|l| l.max(0.0));
    let q = [lam[0] * tri.inv_z[0], lam[1] * tri.inv_z[1], lam[2] * tri.inv_z[2]];
    let qs = q[0] + q[1] + q[2];
    if !(qs > 0.0) {
        return None;
    }
    let b = [q[0] / qs, q[1] / qs, q[2] / qs];
    let depth = b[0] * tri.z[0] + b[1] * tri.z[1] + b[2] * tri.z[2];
    Some((b, depth))
}

/// Area-weighted vertex normals in the camera frame.
fn vertex_normals(cam_pts: &[Vec3], triangles: &[[u32; 3]]) -> Vec<Vec3> {
    let mut normals = vec![[0.0; 3]; cam_pts.len()];
    for tri in triangles {
        let [a, b, c] = tri.map(|i| cam_pts[i as usize]);
        let n = math::cross(math::sub(b, a), math::sub(c, a));
        for &i in tri {
            normals[i as usize] = math::add(normals[i as usize], n);
        }
    }
    normals.into_iter().map(math::normalize).collect()
}

fn background_pixel(bg: &Background, x: usize, y: usize, width: usize, height: usize) -> [u8; 3] {
    match bg {
        Background::Flat(c) => *c,
        Background::Image(img) => {
            let sx = ((x as u64 * img.width() as u64) / width as u64) as u32;
            let sy = ((y as u64 * img.height() as u64) / height as u64) as u32;
            img.get_pixel(sx.min(img.width() - 1), sy.min(img.height() - 1)).0
        }
    }
}

const DEFAULT_ALBEDO: [f32; 3] = [0.82, 0.63, 0.53];

/// Rasterizes `mesh`; bands of rows are processed in parallel with output
/// bit-identical to [`rasterize_serial`].
pub fn rasterize(mesh: &Mesh, camera: &Camera, config: &RenderConfig) -> Result<RenderOutput> {
    rasterize_impl(mesh, camera, config, true)
}

pub fn rasterize_serial(mesh: &Mesh, camera: &Camera, config: &RenderConfig) -> Result<RenderOutput> {
    rasterize_impl(mesh, camera, config, false)
}

fn rasterize_impl(mesh: &Mesh, camera: &Camera, config: &RenderConfig, parallel: bool) -> Result<RenderOutput> {
    camera.validate()?;
    config.validate()?;
    if !mesh.is_finite() {
        return Err(Error::Domain("mesh has non-finite vertices".into()));
    }
    if let Some(albedo) = &config.vertex_albedo {
        if albedo.len() != mesh.vertices.len() {
            return Err(Error::Shape("vertex albedo length differs from vertex count".into()));
        }
    }
    let nv = mesh.vertices.len();
    if mesh.triangles.iter().flatten().any(|&i| i as usize >= nv) {
        return Err(Error::Shape("triangle index out of range".into()));
    }

    let (w, h) = (camera.width, camera.height);
    let cam_pts: Vec<Vec3> = mesh.vertices.iter().map(|&p| camera.to_camera(p)).collect();
    let normals = vertex_normals(&cam_pts, &mesh.triangles);
    let tris: Vec<TriSetup> = mesh
        .triangles
        .iter()
        .enumerate()
        .filter_map(|(i, t)| setup_triangle(i as u32, t.map(|ix| cam_pts[ix as usize]), camera, config))
        .collect();

    let mut triangle = vec![NO_TRIANGLE; w * h];
    let mut barycentric = vec![[0.0; 3]; w * h];
    let mut depth = vec![config.background_depth; w * h];

    let process_band = |band: usize, tri_band: &mut [u32], bary_band: &mut [[f64; 3]], depth_band: &mut [f64]| {
        let y0 = band * BAND_ROWS;
        let y1 = y0 + tri_band.len() / w;
        for tri in tris.iter().filter(|t| t.y_range.0 < y1 && t.y_range.1 >= y0) {
            for py in tri.y_range.0.max(y0)..=tri.y_range.1.min(y1 - 1) {
                for px in tri.x_range.0..=tri.x_range.1 {
                    if let Some((b, z)) = cover(tri, px, py) {
                        if z < config.near || z > config.far {
                            continue;
                        }
                        let idx = (py - y0) * w + px;
                        // strict test: lower triangle id wins exact ties
                        if tri_band[idx] == NO_TRIANGLE || z < depth_band[idx] {
                            tri_band[idx] = tri.id;
                            bary_band[idx] = b;
                            depth_band[idx] = z;
                        }
                    }
                }
            }
        }
        for idx in 0..tri_band.len() {
            if tri_band[idx] == NO_TRIANGLE {
                depth_band[idx] = config.background_depth;
            }
        }
    };

    let chunk = BAND_ROWS * w;
    if parallel {
        triangle
            .par_chunks_mut(chunk)
            .zip(barycentric.par_chunks_mut(chunk))
            .zip(depth.par_chunks_mut(chunk))
            .enumerate()
            .for_each(|(band, ((t, b), d))| process_band(band, t, b, d));
    } else {
        for (band, ((t, b), d)) in triangle
            .chunks_mut(chunk)
            .zip(barycentric.chunks_mut(chunk))
            .zip(depth.chunks_mut(chunk))
            .enumerate()
        {
            process_band(band, t, b, d);
        }
    }

    let light = math::normalize(config.light_dir);
    let shade = |idx: usize| -> [u8; 3] {
        let (x, y) = (idx % w, idx / w);
        let t = triangle[idx];
        if t == NO_TRIANGLE {
            return background_pixel(&config.background, x, y, w, h);
        }
        let b = barycentric[idx];
        let vi = mesh.triangles[t as usize];
        let mut n = [0.0; 3];
        let mut albedo = [0.0f64; 3];
        let mut point = [0.0; 3];
        for k in 0..3 {
            let v = vi[k] as usize;
            n = math::add(n, math::scale(normals[v], b[k]));
            point = math::add(point, math::scale(cam_pts[v], b[k]));
            let a = config.vertex_albedo.as_ref().map_or(DEFAULT_ALBEDO, |al| al[v]);
            for c in 0..3 {
                albedo[c] += b[k] * a[c] as f64;
            }
        }
        let mut n = math::normalize(n);
        if math::dot(n, point) > 0.0 {
            n = math::scale(n, -1.0);
        }
        let lambert = math::dot(n, light).max(0.0);
        let intensity = config.ambient + (1.0 - config.ambient) * lambert;
        albedo.map(|a| ((a * intensity).clamp(0.0, 1.0) * 255.0).round() as u8)
    };
    let pixels: Vec<[u8; 3]> = if parallel {
        (0..w * h).into_par_iter().map(shade).collect()
    } else {
        (0..w * h).map(shade).collect()
    };
    let frame = RgbImage::from_raw(w as u32, h as u32, pixels.into_iter().flatten().collect())
        .expect("buffer size matches frame dimensions");
    let depth_map = DepthMap { width: w, height: h, data: depth.iter().map(|&d| d as f32).collect() };

    Ok(RenderOutput {
        frame,
        depth: depth_map,
        visibility: VisibilityBuffer { width: w, height: h, triangle, barycentric, depth },
    })
}

/// Reconstructs the world-space surface point seen at a covered pixel.
pub fn surface_point(mesh: &Mesh, tri: u32, b: [f64; 3]) -> Vec3 {
    let vi = mesh.triangles[tri as usize];
    let mut p = [0.0; 3];
    for k in 0..3 {
        p = math::add(p, math::scale(mesh.vertices[vi[k] as usize], b[k]));
    }
    p
}
