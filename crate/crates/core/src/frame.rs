//! 8-bit frames and binary PNM (P5/P6) I/O.

use std::path::Path;

use image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};

/// An 8-bit image, interleaved row-major, with 1 (gray) or 3 (RGB) channels.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Frame({}x{}x{})", self.width, self.height, self.channels)
    }
}

/// Rec.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

impl Frame {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "frames have 1 or 3 channels, got {channels}"
            )));
        }
        if width == 0 || height == 0 || data.len() != width * height * channels {
            return Err(Error::InvalidArgument(format!(
                "{width}x{height}x{channels} frame needs {} bytes, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(Frame {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Self {
        Frame {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    pub fn same_dims(&self, other: &Frame) -> bool {
        self.dims() == other.dims()
    }

    pub(crate) fn check_same_dims(&self, other: &Frame, op: &'static str) -> Result<()> {
        if !self.same_dims(other) {
            return Err(Error::shape(
                op,
                "frame size",
                format!(
                    "{}x{}x{} vs {}x{}x{}",
                    self.width,
                    self.height,
                    self.channels,
                    other.width,
                    other.height,
                    other.channels
                ),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Sample with coordinates clamped to the frame.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize, c: usize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y, c)
    }

    /// Luma plane (Rec.601 for RGB, identity for gray), unrounded.
    pub fn luma(&self) -> Vec<f64> {
        if self.channels == 1 {
            return self.data.iter().map(|&v| f64::from(v)).collect();
        }
        self.data
            .chunks_exact(3)
            .map(|p| {
                LUMA_WEIGHTS[0] * f64::from(p[0])
                    + LUMA_WEIGHTS[1] * f64::from(p[1])
                    + LUMA_WEIGHTS[2] * f64::from(p[2])
            })
            .collect()
    }

    /// Planar `[3, H, W]` values in [0, 1]; gray frames are replicated.
    pub fn to_planar_rgb(&self) -> Vec<f64> {
        let hw = self.width * self.height;
        let mut out = vec![0.0; 3 * hw];
        for p in 0..hw {
            for c in 0..3 {
                let src = if self.channels == 1 { 0 } else { c };
                out[c * hw + p] = f64::from(self.data[p * self.channels + src]) / 255.0;
            }
        }
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let img = image::load_from_memory_with_format(&bytes, ImageFormat::Pnm).map_err(|e| {
            Error::Image {
                path: path.to_path_buf(),
                reason: e.to_string(),
            }
        })?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        match img {
            DynamicImage::ImageLuma8(b) => Frame::new(w, h, 1, b.into_raw()),
            DynamicImage::ImageRgb8(b) => Frame::new(w, h, 3, b.into_raw()),
            other if other.color().has_color() => Frame::new(w, h, 3, other.to_rgb8().into_raw()),
            other => Frame::new(w, h, 1, other.to_luma8().into_raw()),
        }
    }

    /// Writes binary PPM (P6) for RGB frames or PGM (P5) for gray frames.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let magic = if self.channels == 3 { "P6" } else { "P5" };
        let mut bytes = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        bytes.extend_from_slice(&self.data);
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    /// Each channel resized to `size`×`size` with [`resize_plane`], returned
    /// as planar `[3, size, size]` values in [0, 1].
    pub fn resized_planar_rgb(&self, size: usize) -> Vec<f64> {
        let planar = self.to_planar_rgb();
        let hw = self.width * self.height;
        let mut out = Vec::with_capacity(3 * size * size);
        for c in 0..3 {
            out.extend(resize_plane(
                &planar[c * hw..(c + 1) * hw],
                self.width,
                self.height,
                size,
                size,
            ));
        }
        out
    }
}

/// Resize for network input: box average for integer downscale factors,
/// bilinear otherwise.
pub fn resize_plane(src: &[f64], w: usize, h: usize, out_w: usize, out_h: usize) -> Vec<f64> {
    if out_w <= w && out_h <= h && w % out_w == 0 && h % out_h == 0 {
        resize_box(src, w, h, out_w, out_h)
    } else {
        resize_bilinear(src, w, h, out_w, out_h)
    }
}

/// Mean over each `w/out_w × h/out_h` block; dimensions must divide.
pub fn resize_box(src: &[f64], w: usize, h: usize, out_w: usize, out_h: usize) -> Vec<f64> {
    let (fx, fy) = (w / out_w, h / out_h);
    let norm = 1.0 / (fx * fy) as f64;
    let mut out = Vec::with_capacity(out_w * out_h);
    for oy in 0..out_h {
        for ox in 0..out_w {
            let mut acc = 0.0;
            for y in oy * fy..(oy + 1) * fy {
                acc += src[y * w + ox * fx..y * w + (ox + 1) * fx]
                    .iter()
                    .sum::<f64>();
            }
            out.push(acc * norm);
        }
    }
    out
}

/// Bilinear resize with half-pixel centres and edge clamping.
pub fn resize_bilinear(src: &[f64], w: usize, h: usize, out_w: usize, out_h: usize) -> Vec<f64> {
    if w == out_w && h == out_h {
        return src.to_vec();
    }
    let sx = w as f64 / out_w as f64;
    let sy = h as f64 / out_h as f64;
    let mut out = Vec::with_capacity(out_w * out_h);
    for oy in 0..out_h {
        let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let ly = fy - y0 as f64;
        for ox in 0..out_w {
            let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let lx = fx - x0 as f64;
            let top = src[y0 * w + x0] * (1.0 - lx) + src[y0 * w + x1] * lx;
            let bot = src[y1 * w + x0] * (1.0 - lx) + src[y1 * w + x1] * lx;
            out.push(top * (1.0 - ly) + bot * ly);
        }
    }
    out
}
