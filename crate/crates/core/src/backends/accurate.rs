use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fast::interpolate_fast;
use crate::error::{Error, Result};
use crate::frame::Frame;

/// Block-matching parameters. `search` bounds each component of the
/// per-side displacement, so full motions up to `2·search` are found.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccurateConfig {
    pub block: usize,
    pub search: usize,
}

impl Default for AccurateConfig {
    fn default() -> Self {
        AccurateConfig {
            block: 16,
            search: 12,
        }
    }
}

impl AccurateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block < 2 || self.block % 2 != 0 {
            return Err(Error::Config(format!(
                "block must be even and >= 2, got {}",
                self.block
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccurateOutput {
    pub frame: Frame,
    /// The frame was smaller than one block; `frame` is the fast blend.
    pub fell_back: bool,
    /// Chosen half-vector `(dy, dx)` per block, row-major over the block grid.
    pub vectors: Vec<(isize, isize)>,
}

/// Integer Rec.601 luma ×1000, padded by `pad` on every side with edge
/// replication so displaced reads need no clamping.
struct PaddedLuma {
    data: Vec<i32>,
    stride: usize,
    pad: usize,
}

impl PaddedLuma {
    fn new(f: &Frame, pad: usize) -> Self {
        let (w, h) = (f.width(), f.height());
        let stride = w + 2 * pad;
        let mut data = Vec::with_capacity(stride * (h + 2 * pad));
        for py in 0..h + 2 * pad {
            let y = py as isize - pad as isize;
            for px in 0..stride {
                let x = px as isize - pad as isize;
                let v = if f.channels() == 1 {
                    i32::from(f.get_clamped(x, y, 0)) * 1000
                } else {
                    i32::from(f.get_clamped(x, y, 0)) * 299
                        + i32::from(f.get_clamped(x, y, 1)) * 587
                        + i32::from(f.get_clamped(x, y, 2)) * 114
                };
                data.push(v);
            }
        }
        PaddedLuma { data, stride, pad }
    }

    #[inline]
    fn at(&self, y: isize, x: isize) -> i32 {
        let py = (y + self.pad as isize) as usize;
        let px = (x + self.pad as isize) as usize;
        self.data[py * self.stride + px]
    }
}

/// Raised-cosine window; shifted copies at `block/2` sum to one.
fn window(block: usize) -> Vec<f64> {
    (0..block)
        .map(|i| {
            let s = (PI * (i as f64 + 0.5) / block as f64).sin();
            s * s
        })
        .collect()
}

/// Block origins along one axis: every pixel lies in exactly two blocks.
fn origins(len: usize, block: usize) -> Vec<isize> {
    let step = (block / 2) as isize;
    let mut v = Vec::new();
    let mut o = -step;
    while o < len as isize {
        v.push(o);
        o += step;
    }
    v
}

/// Bilateral search: minimizes SAD between `f0(p − d)` and `f1(p + d)` over
/// the in-frame pixels of the block. Ties: smaller SAD, then smaller |d|²,
/// then the first candidate in row-major `(dy, dx)` order.
fn search_block(
    l0: &PaddedLuma,
    l1: &PaddedLuma,
    ys: (isize, isize),
    xs: (isize, isize),
    search: isize,
) -> (isize, isize) {
    let mut best = (i64::MAX, i64::MAX, 0isize, 0isize);
    for dy in -search..=search {
        for dx in -search..=search {
            let norm = (dy * dy + dx * dx) as i64;
            let mut sad = 0i64;
            'rows: for y in ys.0..ys.1 {
                for x in xs.0..xs.1 {
                    sad += i64::from((l0.at(y - dy, x - dx) - l1.at(y + dy, x + dx)).abs());
                }
                if sad > best.0 {
                    break 'rows;
                }
            }
            if (sad, norm) < (best.0, best.1) {
                best = (sad, norm, dy, dx);
            }
        }
    }
    (best.2, best.3)
}

/// Motion-compensated interpolation by exhaustive block matching with
/// symmetric half-vector compensation and overlapped-block blending.
pub fn interpolate_accurate(
    frame0: &Frame,
    frame1: &Frame,
    cfg: AccurateConfig,
) -> Result<AccurateOutput> {
    frame0.check_same_dims(frame1, "interpolate_accurate")?;
    cfg.validate()?;
    let (w, h, ch) = frame0.dims();
    if w < cfg.block || h < cfg.block {
        return Ok(AccurateOutput {
            frame: interpolate_fast(frame0, frame1)?,
            fell_back: true,
            vectors: Vec::new(),
        });
    }
    let search = cfg.search as isize;
    let l0 = PaddedLuma::new(frame0, cfg.search);
    let l1 = PaddedLuma::new(frame1, cfg.search);
    let oy = origins(h, cfg.block);
    let ox = origins(w, cfg.block);
    let b = cfg.block as isize;
    let clip = |o: isize, len: usize| (o.max(0), (o + b).min(len as isize));

    let blocks: Vec<(isize, isize)> = oy
        .iter()
        .flat_map(|&y| ox.iter().map(move |&x| (y, x)))
        .collect();
    let vectors: Vec<(isize, isize)> = blocks
        .par_iter()
        .map(|&(by, bx)| search_block(&l0, &l1, clip(by, h), clip(bx, w), search))
        .collect();

    let win = window(cfg.block);
    let mut acc = vec![0.0f64; w * h * ch];
    let mut wsum = vec![0.0f64; w * h];
    for (&(by, bx), &(dy, dx)) in blocks.iter().zip(&vectors) {
        let (y0, y1) = clip(by, h);
        let (x0, x1) = clip(bx, w);
        for y in y0..y1 {
            let wy = win[(y - by) as usize];
            for x in x0..x1 {
                let wt = wy * win[(x - bx) as usize];
                let p = y as usize * w + x as usize;
                wsum[p] += wt;
                for c in 0..ch {
                    let a = u16::from(frame0.get_clamped(x - dx, y - dy, c));
                    let z = u16::from(frame1.get_clamped(x + dx, y + dy, c));
                    acc[p * ch + c] += wt * f64::from((a + z + 1) >> 1);
                }
            }
        }
    }
    let data = acc
        .iter()
        .enumerate()
        .map(|(i, &v)| (v / wsum[i / ch]).round().clamp(0.0, 255.0) as u8)
        .collect();
    Ok(AccurateOutput {
        frame: Frame::new(w, h, ch, data)?,
        fell_back: false,
        vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_is_a_partition_of_unity() {
        let win = window(16);
        for i in 0..8 {
            assert!((win[i] + win[i + 8] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn every_pixel_is_covered_twice() {
        for len in [16, 17, 23, 40] {
            let o = origins(len, 16);
            for p in 0..len as isize {
                assert_eq!(
                    o.iter().filter(|&&s| s <= p && p < s + 16).count(),
                    2,
                    "len {len} p {p}"
                );
            }
        }
    }

    #[test]
    fn odd_block_is_rejected() {
        let f = Frame::filled(32, 32, 1, 0);
        assert!(interpolate_accurate(
            &f,
            &f,
            AccurateConfig {
                block: 15,
                search: 2
            }
        )
        .is_err());
    }

    #[test]
    fn tiny_frames_fall_back() {
        let f = Frame::filled(8, 8, 3, 9);
        let g = Frame::filled(8, 8, 3, 20);
        let out = interpolate_accurate(&f, &g, AccurateConfig::default()).unwrap();
        assert!(out.fell_back);
        assert_eq!(out.frame, interpolate_fast(&f, &g).unwrap());
    }
}
