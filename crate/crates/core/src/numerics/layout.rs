//! Pure data-movement kernels shared by forward and backward passes.

/// Splits `shape` around `axis` into (outer, len, inner) extents.
pub(crate) fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Output shape and data of `x.permute(axes)`.
pub(crate) fn permute(data: &[f64], shape: &[usize], axes: &[usize]) -> (Vec<usize>, Vec<f64>) {
    let in_strides = strides(shape);
    let out_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
    let src_strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
    let rank = out_shape.len();
    let mut out = Vec::with_capacity(data.len());
    let mut idx = vec![0usize; rank];
    let mut offset = 0usize;
    let last = rank - 1;
    let (last_len, last_stride) = (out_shape[last], src_strides[last]);
    'outer: loop {
        for k in 0..last_len {
            out.push(data[offset + k * last_stride]);
        }
        // odometer increment over all but the last axis
        let mut d = last;
        loop {
            if d == 0 {
                break 'outer;
            }
            d -= 1;
            idx[d] += 1;
            offset += src_strides[d];
            if idx[d] < out_shape[d] {
                break;
            }
            offset -= src_strides[d] * idx[d];
            idx[d] = 0;
        }
    }
    (out_shape, out)
}

pub(crate) fn inverse_axes(axes: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; axes.len()];
    for (i, &a) in axes.iter().enumerate() {
        inv[a] = i;
    }
    inv
}

/// Cyclic shift along `axis`: `out[i + shift] = x[i]` (indices modulo the axis length).
pub(crate) fn roll(data: &[f64], shape: &[usize], axis: usize, shift: isize) -> Vec<f64> {
    let (outer, n, inner) = split_axis(shape, axis);
    let s = shift.rem_euclid(n as isize) as usize;
    let mut out = vec![0.0; data.len()];
    for o in 0..outer {
        let base = o * n * inner;
        for i in 0..n {
            let j = (i + s) % n;
            out[base + j * inner..base + (j + 1) * inner]
                .copy_from_slice(&data[base + i * inner..base + (i + 1) * inner]);
        }
    }
    out
}

pub(crate) fn slice(
    data: &[f64],
    shape: &[usize],
    axis: usize,
    start: usize,
    len: usize,
) -> Vec<f64> {
    let (outer, n, inner) = split_axis(shape, axis);
    let mut out = Vec::with_capacity(outer * len * inner);
    for o in 0..outer {
        let base = o * n * inner + start * inner;
        out.extend_from_slice(&data[base..base + len * inner]);
    }
    out
}

pub(crate) fn slice_backward(
    grad: &[f64],
    shape: &[usize],
    axis: usize,
    start: usize,
    len: usize,
) -> Vec<f64> {
    let (outer, n, inner) = split_axis(shape, axis);
    let mut out = vec![0.0; outer * n * inner];
    for o in 0..outer {
        let dst = o * n * inner + start * inner;
        let src = o * len * inner;
        out[dst..dst + len * inner].copy_from_slice(&grad[src..src + len * inner]);
    }
    out
}

/// `out(n, c, h*r + i, w*r + j) = x(n, c*r*r + i*r + j, h, w)`
pub(crate) fn pixel_shuffle(data: &[f64], shape: &[usize], r: usize) -> Vec<f64> {
    let (n, cin, h, w) = (shape[0], shape[1], shape[2], shape[3]);
    let c = cin / (r * r);
    let (ho, wo) = (h * r, w * r);
    let mut out = vec![0.0; data.len()];
    for b in 0..n {
        for ch in 0..c {
            for i in 0..r {
                for j in 0..r {
                    let src_c = ch * r * r + i * r + j;
                    let src = &data[((b * cin + src_c) * h) * w..((b * cin + src_c) * h + h) * w];
                    for y in 0..h {
                        let dst_row = ((b * c + ch) * ho + y * r + i) * wo;
                        for x in 0..w {
                            out[dst_row + x * r + j] = src[y * w + x];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Inverse of [`pixel_shuffle`]; `shape` is the shuffled (high resolution) shape.
pub(crate) fn pixel_unshuffle(data: &[f64], shape: &[usize], r: usize) -> Vec<f64> {
    let (n, c, ho, wo) = (shape[0], shape[1], shape[2], shape[3]);
    let (h, w) = (ho / r, wo / r);
    let cout = c * r * r;
    let mut out = vec![0.0; data.len()];
    for b in 0..n {
        for ch in 0..c {
            for i in 0..r {
                for j in 0..r {
                    let dst_c = ch * r * r + i * r + j;
                    let dst_base = (b * cout + dst_c) * h * w;
                    for y in 0..h {
                        let src_row = ((b * c + ch) * ho + y * r + i) * wo;
                        for x in 0..w {
                            out[dst_base + y * w + x] = data[src_row + x * r + j];
                        }
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn upsample_nearest(data: &[f64], shape: &[usize], r: usize) -> Vec<f64> {
    let (planes, h, w) = (shape[0] * shape[1], shape[2], shape[3]);
    let (ho, wo) = (h * r, w * r);
    let mut out = vec![0.0; planes * ho * wo];
    for p in 0..planes {
        for y in 0..ho {
            for x in 0..wo {
                out[(p * ho + y) * wo + x] = data[(p * h + y / r) * w + x / r];
            }
        }
    }
    out
}

pub(crate) fn upsample_nearest_backward(grad: &[f64], shape: &[usize], r: usize) -> Vec<f64> {
    let (planes, h, w) = (shape[0] * shape[1], shape[2], shape[3]);
    let (ho, wo) = (h * r, w * r);
    let mut out = vec![0.0; planes * h * w];
    for p in 0..planes {
        for y in 0..ho {
            for x in 0..wo {
                out[(p * h + y / r) * w + x / r] += grad[(p * ho + y) * wo + x];
            }
        }
    }
    out
}
