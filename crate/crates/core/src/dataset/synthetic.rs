use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::record::TripletRecord;
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::metrics::Subset;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticOptions {
    /// Output frames are `size`×`size` RGB.
    pub size: usize,
    /// Range of the Gaussian blur applied to the noise texture, in pixels.
    pub blur_sigma: (f64, f64),
    /// Range of the texture's standard deviation in 8-bit units.
    pub contrast: (f64, f64),
    /// Range of the number of solid shapes drawn over the texture.
    pub shapes: (usize, usize),
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        SyntheticOptions {
            size: 128,
            blur_sigma: (0.6, 2.5),
            contrast: (12.0, 48.0),
            shapes: (2, 8),
        }
    }
}

/// Axis-aligned unit directions `(dy, dx)`.
const DIRECTIONS: [(f64, f64); 4] = [(0.0, 1.0), (0.0, -1.0), (1.0, 0.0), (-1.0, 0.0)];

/// Subset of the `index`-th of `len` ascending magnitudes: the list is cut
/// into four equal buckets.
pub fn subset_for_magnitude_index(index: usize, len: usize) -> Subset {
    Subset::ALL[(index * 4 / len.max(1)).min(3)]
}

/// [`generate_synthetic_with`] using [`SyntheticOptions::default`].
pub fn generate_synthetic(
    count: usize,
    magnitudes: &[f64],
    seed: u64,
) -> Result<Vec<TripletRecord>> {
    generate_synthetic_with(count, magnitudes, seed, &SyntheticOptions::default())
}

/// Triplets of a random textured scene translated by a fixed magnitude.
///
/// Record `k` uses `magnitudes[k % len]` and a random axis-aligned direction.
/// `f0`, `f1` and `f2` sample the scene at offsets `−m/2`, `0` and `+m/2`
/// along that direction, so `f1` is the exact half-motion frame. Each record
/// depends only on `(seed, k)`.
pub fn generate_synthetic_with(
    count: usize,
    magnitudes: &[f64],
    seed: u64,
    opts: &SyntheticOptions,
) -> Result<Vec<TripletRecord>> {
    if magnitudes.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one motion magnitude is required".into(),
        ));
    }
    if magnitudes.iter().any(|m| !m.is_finite() || *m < 0.0)
        || magnitudes.windows(2).any(|w| w[0] > w[1])
    {
        return Err(Error::InvalidArgument(format!(
            "magnitudes must be non-negative and sorted ascending, got {magnitudes:?}"
        )));
    }
    if opts.size < 8 {
        return Err(Error::InvalidArgument(format!(
            "synthetic frames must be at least 8px, got {}",
            opts.size
        )));
    }
    let max_half = magnitudes[magnitudes.len() - 1] / 2.0;
    let margin = max_half.ceil() as usize + 2;
    (0..count)
        .map(|k| {
            let j = k % magnitudes.len();
            let m = magnitudes[j];
            let mut rng = seed::rng(seed, &format!("synthetic.{k}"));
            let canvas = Canvas::textured(opts.size + 2 * margin, opts, &mut rng);
            let (dy, dx) = DIRECTIONS[rng.random_range(0..DIRECTIONS.len())];
            let h = m / 2.0;
            let frames = [-h, 0.0, h]
                .map(|t| canvas.crop(margin as f64 + t * dy, margin as f64 + t * dx, opts.size));
            let rec =
                TripletRecord::inline(format!("syn-{k:05}"), frames, format!("synthetic:m{m}"), 1)?;
            Ok(rec.with_subset(subset_for_magnitude_index(j, magnitudes.len())))
        })
        .collect()
}

/// Square RGB canvas, planar, unclamped until cropping.
struct Canvas {
    size: usize,
    planes: [Vec<f64>; 3],
}

impl Canvas {
    fn textured<R: Rng>(size: usize, opts: &SyntheticOptions, rng: &mut R) -> Self {
        let sigma = rng.random_range(opts.blur_sigma.0..=opts.blur_sigma.1);
        let contrast = rng.random_range(opts.contrast.0..=opts.contrast.1);
        let luma = normalized_noise(size, sigma, rng);
        let mut planes: [Vec<f64>; 3] = Default::default();
        for plane in planes.iter_mut() {
            let mean = rng.random_range(60.0..190.0);
            let tint = rng.random_range(0.6..1.4);
            let chroma = normalized_noise(size, sigma, rng);
            *plane = luma
                .iter()
                .zip(&chroma)
                .map(|(l, c)| mean + contrast * (tint * l + 0.3 * c))
                .collect();
        }
        let mut canvas = Canvas { size, planes };
        let n = rng.random_range(opts.shapes.0..=opts.shapes.1);
        for _ in 0..n {
            canvas.draw_shape(rng);
        }
        canvas
    }

    fn draw_shape<R: Rng>(&mut self, rng: &mut R) {
        let s = self.size as f64;
        let cy = rng.random_range(0.0..s);
        let cx = rng.random_range(0.0..s);
        let ry = rng.random_range(4.0..s / 6.0 + 5.0);
        let rx = rng.random_range(4.0..s / 6.0 + 5.0);
        let disk = rng.random_bool(0.5);
        let color: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..255.0));
        for y in 0..self.size {
            for x in 0..self.size {
                let (u, v) = ((y as f64 - cy) / ry, (x as f64 - cx) / rx);
                let inside = if disk {
                    u * u + v * v <= 1.0
                } else {
                    u.abs() <= 1.0 && v.abs() <= 1.0
                };
                if inside {
                    for c in 0..3 {
                        self.planes[c][y * self.size + x] = color[c];
                    }
                }
            }
        }
    }

    /// `size`×`size` frame whose pixel `(y, x)` samples the canvas at
    /// `(oy + y, ox + x)` bilinearly; integral offsets copy pixels exactly.
    fn crop(&self, oy: f64, ox: f64, size: usize) -> Frame {
        let (y0, x0) = (oy.floor(), ox.floor());
        let (fy, fx) = (oy - y0, ox - x0);
        let (y0, x0) = (y0 as usize, x0 as usize);
        let n = self.size;
        let mut data = Vec::with_capacity(size * size * 3);
        for y in 0..size {
            for x in 0..size {
                let (r0, r1) = ((y0 + y) * n, (y0 + y + 1).min(n - 1) * n);
                let (c0, c1) = (x0 + x, (x0 + x + 1).min(n - 1));
                for p in &self.planes {
                    let top = if fx == 0.0 {
                        p[r0 + c0]
                    } else {
                        p[r0 + c0] * (1.0 - fx) + p[r0 + c1] * fx
                    };
                    let v = if fy == 0.0 {
                        top
                    } else {
                        let bot = if fx == 0.0 {
                            p[r1 + c0]
                        } else {
                            p[r1 + c0] * (1.0 - fx) + p[r1 + c1] * fx
                        };
                        top * (1.0 - fy) + bot * fy
                    };
                    data.push(v.round().clamp(0.0, 255.0) as u8);
                }
            }
        }
        Frame::new(size, size, 3, data).expect("crop dimensions are consistent")
    }
}

/// White noise blurred by a Gaussian of width `sigma`, rescaled to zero
/// mean and unit variance.
fn normalized_noise<R: Rng>(size: usize, sigma: f64, rng: &mut R) -> Vec<f64> {
    let noise: Vec<f64> = (0..size * size)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    let mut v = gaussian_blur(&noise, size, sigma);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64)
        .sqrt()
        .max(1e-12);
    v.iter_mut().for_each(|x| *x = (*x - mean) / std);
    v
}

fn gaussian_blur(src: &[f64], size: usize, sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    let n = size as isize;
    let idx = |i: isize| i.clamp(0, n - 1) as usize;
    let mut tmp = vec![0.0; src.len()];
    for y in 0..size {
        for x in 0..n {
            tmp[y * size + x as usize] = (-r..=r)
                .map(|d| k[(d + r) as usize] * src[y * size + idx(x + d)])
                .sum();
        }
    }
    let mut out = vec![0.0; src.len()];
    for y in 0..n {
        for x in 0..size {
            out[y as usize * size + x] = (-r..=r)
                .map(|d| k[(d + r) as usize] * tmp[idx(y + d) * size + x])
                .sum();
        }
    }
    out
}
