//! Convolution, bilinear sampling and deformable convolution kernels (NCHW).

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub o: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_hw(&self) -> (usize, usize) {
        (
            (self.h + 2 * self.pad - self.kh) / self.stride + 1,
            (self.w + 2 * self.pad - self.kw) / self.stride + 1,
        )
    }
}

pub(crate) fn conv2d_forward(
    g: &ConvGeom,
    x: &[f64],
    wt: &[f64],
    bias: Option<&[f64]>,
) -> Vec<f64> {
    let (ho, wo) = g.out_hw();
    let mut out = vec![0.0; g.n * g.o * ho * wo];
    for n in 0..g.n {
        for o in 0..g.o {
            let dst = &mut out[(n * g.o + o) * ho * wo..(n * g.o + o + 1) * ho * wo];
            if let Some(b) = bias {
                dst.iter_mut().for_each(|v| *v = b[o]);
            }
            for c in 0..g.c {
                let src = &x[(n * g.c + c) * g.h * g.w..(n * g.c + c + 1) * g.h * g.w];
                for ki in 0..g.kh {
                    for kj in 0..g.kw {
                        let wv = wt[((o * g.c + c) * g.kh + ki) * g.kw + kj];
                        for oy in 0..ho {
                            let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                            if iy < 0 || iy >= g.h as isize {
                                continue;
                            }
                            let row = &src[iy as usize * g.w..(iy as usize + 1) * g.w];
                            let drow = &mut dst[oy * wo..(oy + 1) * wo];
                            for (ox, d) in drow.iter_mut().enumerate() {
                                let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                                if ix >= 0 && ix < g.w as isize {
                                    *d += wv * row[ix as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Returns (d_input, d_weight, d_bias).
pub(crate) fn conv2d_backward(
    g: &ConvGeom,
    x: &[f64],
    wt: &[f64],
    dout: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (ho, wo) = g.out_hw();
    let mut dx = vec![0.0; x.len()];
    let mut dw = vec![0.0; wt.len()];
    let mut db = vec![0.0; g.o];
    for n in 0..g.n {
        for o in 0..g.o {
            let dsrc = &dout[(n * g.o + o) * ho * wo..(n * g.o + o + 1) * ho * wo];
            db[o] += dsrc.iter().sum::<f64>();
            for c in 0..g.c {
                let plane = (n * g.c + c) * g.h * g.w;
                for ki in 0..g.kh {
                    for kj in 0..g.kw {
                        let widx = ((o * g.c + c) * g.kh + ki) * g.kw + kj;
                        let wv = wt[widx];
                        let mut acc = 0.0;
                        for oy in 0..ho {
                            let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                            if iy < 0 || iy >= g.h as isize {
                                continue;
                            }
                            let row = plane + iy as usize * g.w;
                            for ox in 0..wo {
                                let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                                if ix >= 0 && ix < g.w as isize {
                                    let gv = dsrc[oy * wo + ox];
                                    acc += gv * x[row + ix as usize];
                                    dx[row + ix as usize] += gv * wv;
                                }
                            }
                        }
                        dw[widx] += acc;
                    }
                }
            }
        }
    }
    (dx, dw, db)
}

/// One corner of a bilinear footprint: flat index within the plane, weight,
/// and the weight's derivative with respect to the sampling y and x.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Tap {
    pub index: usize,
    pub weight: f64,
    pub dwdy: f64,
    pub dwdx: f64,
}

/// Corners of a bilinear sample at (`py`, `px`) that fall inside an `h`×`w`
/// plane; corners outside contribute zero.
pub(crate) fn bilinear_taps(py: f64, px: f64, h: usize, w: usize) -> impl Iterator<Item = Tap> {
    let y0 = py.floor();
    let x0 = px.floor();
    let ly = py - y0;
    let lx = px - x0;
    let (y0, x0) = (y0 as isize, x0 as isize);
    let corners = [
        (y0, x0, (1.0 - ly) * (1.0 - lx), -(1.0 - lx), -(1.0 - ly)),
        (y0, x0 + 1, (1.0 - ly) * lx, -lx, 1.0 - ly),
        (y0 + 1, x0, ly * (1.0 - lx), 1.0 - lx, -ly),
        (y0 + 1, x0 + 1, ly * lx, lx, ly),
    ];
    corners
        .into_iter()
        .filter_map(move |(y, x, weight, dwdy, dwdx)| {
            if y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w {
                Some(Tap {
                    index: y as usize * w + x as usize,
                    weight,
                    dwdy,
                    dwdx,
                })
            } else {
                None
            }
        })
}

pub(crate) fn bilinear_value(plane: &[f64], py: f64, px: f64, h: usize, w: usize) -> f64 {
    bilinear_taps(py, px, h, w)
        .map(|t| t.weight * plane[t.index])
        .sum()
}

/// Samples `x: [N,C,H,W]` at `coords: [N,Ho,Wo,2]` holding (y, x) pixel positions.
pub(crate) fn bilinear_sample_forward(
    x: &[f64],
    xs: &[usize],
    coords: &[f64],
    cs: &[usize],
) -> Vec<f64> {
    let (n, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
    let (ho, wo) = (cs[1], cs[2]);
    let mut out = vec![0.0; n * c * ho * wo];
    for b in 0..n {
        for p in 0..ho * wo {
            let py = coords[(b * ho * wo + p) * 2];
            let px = coords[(b * ho * wo + p) * 2 + 1];
            for ch in 0..c {
                let plane = &x[(b * c + ch) * h * w..(b * c + ch + 1) * h * w];
                out[(b * c + ch) * ho * wo + p] = bilinear_value(plane, py, px, h, w);
            }
        }
    }
    out
}

pub(crate) fn bilinear_sample_backward(
    x: &[f64],
    xs: &[usize],
    coords: &[f64],
    cs: &[usize],
    dout: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let (n, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
    let (ho, wo) = (cs[1], cs[2]);
    let mut dx = vec![0.0; x.len()];
    let mut dc = vec![0.0; coords.len()];
    for b in 0..n {
        for p in 0..ho * wo {
            let ci = (b * ho * wo + p) * 2;
            let (py, px) = (coords[ci], coords[ci + 1]);
            for ch in 0..c {
                let base = (b * c + ch) * h * w;
                let g = dout[(b * c + ch) * ho * wo + p];
                for t in bilinear_taps(py, px, h, w) {
                    dx[base + t.index] += g * t.weight;
                    dc[ci] += g * t.dwdy * x[base + t.index];
                    dc[ci + 1] += g * t.dwdx * x[base + t.index];
                }
            }
        }
    }
    (dx, dc)
}

/// Geometry of a stride-1, same-size deformable convolution.
#[derive(Clone, Copy, Debug)]
pub(crate) struct DeformGeom {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub o: usize,
    pub kh: usize,
    pub kw: usize,
}

impl DeformGeom {
    fn taps(&self) -> usize {
        self.kh * self.kw
    }

    /// Sampling position of kernel tap `t` for output pixel `p` of sample `b`.
    /// Offsets are stored as (dy, dx) pairs per tap.
    fn position(&self, offsets: &[f64], b: usize, t: usize, p: usize) -> (f64, f64) {
        let hw = self.h * self.w;
        let k = self.taps();
        let (i, j) = (t / self.kw, t % self.kw);
        let (y, x) = (p / self.w, p % self.w);
        let dy = offsets[(b * 2 * k + 2 * t) * hw + p];
        let dx = offsets[(b * 2 * k + 2 * t + 1) * hw + p];
        (
            y as f64 + i as f64 - (self.kh / 2) as f64 + dy,
            x as f64 + j as f64 - (self.kw / 2) as f64 + dx,
        )
    }
}

/// Returns the output and the sampled columns `[N, C*K, H*W]` kept for backward.
pub(crate) fn deform_conv2d_forward(
    g: &DeformGeom,
    x: &[f64],
    offsets: &[f64],
    wt: &[f64],
    bias: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let hw = g.h * g.w;
    let k = g.taps();
    let ck = g.c * k;
    let mut cols = vec![0.0; g.n * ck * hw];
    for b in 0..g.n {
        for t in 0..k {
            for p in 0..hw {
                let (py, px) = g.position(offsets, b, t, p);
                let taps: Vec<Tap> = bilinear_taps(py, px, g.h, g.w).collect();
                for c in 0..g.c {
                    let plane = &x[(b * g.c + c) * hw..(b * g.c + c + 1) * hw];
                    cols[(b * ck + c * k + t) * hw + p] =
                        taps.iter().map(|tp| tp.weight * plane[tp.index]).sum();
                }
            }
        }
    }
    let mut out = vec![0.0; g.n * g.o * hw];
    for b in 0..g.n {
        for o in 0..g.o {
            let dst = &mut out[(b * g.o + o) * hw..(b * g.o + o + 1) * hw];
            dst.iter_mut().for_each(|v| *v = bias[o]);
            for r in 0..ck {
                let wv = wt[o * ck + r];
                let col = &cols[(b * ck + r) * hw..(b * ck + r + 1) * hw];
                for (d, s) in dst.iter_mut().zip(col) {
                    *d += wv * s;
                }
            }
        }
    }
    (out, cols)
}

pub(crate) struct DeformGrads {
    pub input: Vec<f64>,
    pub offsets: Vec<f64>,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

pub(crate) fn deform_conv2d_backward(
    g: &DeformGeom,
    x: &[f64],
    offsets: &[f64],
    wt: &[f64],
    cols: &[f64],
    dout: &[f64],
) -> DeformGrads {
    let hw = g.h * g.w;
    let k = g.taps();
    let ck = g.c * k;
    let mut dw = vec![0.0; wt.len()];
    let mut db = vec![0.0; g.o];
    let mut dx = vec![0.0; x.len()];
    let mut doff = vec![0.0; offsets.len()];
    let mut dcols = vec![0.0; ck * hw];
    for b in 0..g.n {
        dcols.iter_mut().for_each(|v| *v = 0.0);
        for o in 0..g.o {
            let dsrc = &dout[(b * g.o + o) * hw..(b * g.o + o + 1) * hw];
            db[o] += dsrc.iter().sum::<f64>();
            for r in 0..ck {
                let col = &cols[(b * ck + r) * hw..(b * ck + r + 1) * hw];
                dw[o * ck + r] += dsrc.iter().zip(col).map(|(a, c)| a * c).sum::<f64>();
                let wv = wt[o * ck + r];
                for (d, s) in dcols[r * hw..(r + 1) * hw].iter_mut().zip(dsrc) {
                    *d += wv * s;
                }
            }
        }
        for t in 0..k {
            for p in 0..hw {
                let (py, px) = g.position(offsets, b, t, p);
                let mut gy = 0.0;
                let mut gx = 0.0;
                for tp in bilinear_taps(py, px, g.h, g.w) {
                    for c in 0..g.c {
                        let gc = dcols[(c * k + t) * hw + p];
                        let xi = (b * g.c + c) * hw + tp.index;
                        dx[xi] += gc * tp.weight;
                        gy += gc * tp.dwdy * x[xi];
                        gx += gc * tp.dwdx * x[xi];
                    }
                }
                doff[(b * 2 * k + 2 * t) * hw + p] += gy;
                doff[(b * 2 * k + 2 * t + 1) * hw + p] += gx;
            }
        }
    }
    DeformGrads {
        input: dx,
        offsets: doff,
        weight: dw,
        bias: db,
    }
}
