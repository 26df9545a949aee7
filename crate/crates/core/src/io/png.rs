//! PNG helpers for frames, masks and background images.

use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::flow::Mask;

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::Image { path: "<memory>".into(), message: e.to_string() })?;
    Ok(out.into_inner())
}

pub fn write_png(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_png(img)?).map_err(|e| Error::io(path, e))
}

/// Decodes any supported PNG into 8-bit RGB.
pub fn read_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    image::load_from_memory_with_format(&bytes, ImageFormat::Png)
        .map(|img| img.to_rgb8())
        .map_err(|e| Error::Image { path: path.into(), message: e.to_string() })
}

pub fn png_dimensions(path: impl AsRef<Path>) -> Result<(usize, usize)> {
    let path = path.as_ref();
    image::image_dimensions(path)
        .map(|(w, h)| (w as usize, h as usize))
        .map_err(|e| Error::Image { path: path.into(), message: e.to_string() })
}

/// Nonzero pixels (any channel) are selected.
pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let img = read_rgb(path)?;
    let bits = img.pixels().map(|p| p.0.iter().any(|&c| c != 0)).collect();
    Mask::new(img.width() as usize, img.height() as usize, bits)
}

pub fn mask_to_image(mask: &Mask) -> RgbImage {
    RgbImage::from_fn(mask.width as u32, mask.height as u32, |x, y| {
        let v = if mask.get(x as usize, y as usize) { 255 } else { 0 };
        image::Rgb([v, v, v])
    })
}
