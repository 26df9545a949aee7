use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::flow::FlowField;

/// Segment lengths red-yellow, yellow-green, green-cyan, cyan-blue,
/// blue-magenta, magenta-red.
const SEGMENTS: [usize; 6] = [15, 6, 4, 11, 13, 6];
pub const WHEEL_SIZE: usize = 55;

fn wheel() -> [[f64; 3]; WHEEL_SIZE] {
    let mut w = [[0.0; 3]; WHEEL_SIZE];
    let mut i = 0;
    // (channel that ramps, direction) per segment, starting from red
    let mut col = [255.0, 0.0, 0.0];
    for (seg, &len) in SEGMENTS.iter().enumerate() {
        let (ch, up) = [(1, true), (0, false), (2, true), (1, false), (0, true), (2, false)][seg];
        for s in 0..len {
            let f = 255.0 * s as f64 / len as f64;
            col[ch] = if up { f } else { 255.0 - f };
            w[i] = col;
            i += 1;
        }
        col[ch] = if up { 255.0 } else { 0.0 };
    }
    w
}

/// Wheel color in `[0, 1]` for direction `(u, v)` at normalized radius `rad`.
/// Rightward flow maps to the first wheel entry (red).
pub fn wheel_color(u: f64, v: f64, rad: f64) -> [f64; 3] {
    let w = wheel();
    let a = (-v).atan2(-u) / std::f64::consts::PI;
    let fk = (a + 1.0) / 2.0 * WHEEL_SIZE as f64;
    let k0 = (fk.floor() as usize) % WHEEL_SIZE;
    let k1 = (k0 + 1) % WHEEL_SIZE;
    let f = fk - fk.floor();
    let rad = rad.clamp(0.0, 1.0);
    let mut out = [0.0; 3];
    for c in 0..3 {
        let col = ((1.0 - f) * w[k0][c] + f * w[k1][c]) / 255.0;
        out[c] = 1.0 - rad * (1.0 - col);
    }
    out
}

/// Renders `flow` with hue for direction and saturation for magnitude.
///
/// `max_magnitude` of `None` uses the largest valid magnitude. Magnitudes
/// above the maximum saturate. Invalid pixels are black.
pub fn flow_to_colorwheel(flow: &FlowField, max_magnitude: Option<f64>) -> Result<RgbImage> {
    let max = match max_magnitude {
        Some(m) if m > 0.0 && m.is_finite() => m,
        Some(m) => return Err(Error::Domain(format!("max magnitude must be positive, got {m}"))),
        None => {
            let m = flow
                .data
                .iter()
                .zip(&flow.valid)
                .filter(|(_, v)| **v)
                .map(|(d, _)| (d[0] as f64).hypot(d[1] as f64))
                .fold(0.0, f64::max);
            if m > 0.0 {
                m
            } else {
                1.0
            }
        }
    };
    let mut img = RgbImage::new(flow.width as u32, flow.height as u32);
    for y in 0..flow.height {
        for x in 0..flow.width {
            let i = flow.index(x, y);
            let px = if flow.valid[i] {
                let (u, v) = (flow.data[i][0] as f64, flow.data[i][1] as f64);
                let c = wheel_color(u, v, u.hypot(v) / max);
                Rgb(c.map(|c| (255.0 * c).round() as u8))
            } else {
                Rgb([0, 0, 0])
            };
            img.put_pixel(x as u32, y as u32, px);
        }
    }
    Ok(img)
}
