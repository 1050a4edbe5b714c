use super::conv::{self, ConvGeom, DeformGeom};
use super::graph::{gelu, matmul_dims, Graph, Op, Var};
use super::layout;
use super::tensor::Tensor;
use crate::error::{Error, Result};

impl Graph {
    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<Vec<usize>> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::shape(op, "operands", format!("{sa:?} vs {sb:?}")));
        }
        Ok(sa.to_vec())
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        let shape = self.same_shape(op.name(), a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| f(*x, *y))
            .collect();
        self.push(Tensor::from_parts(shape, data), op)
    }

    fn map(&mut self, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Result<Var> {
        let v = self.value(x);
        let data = v.data().iter().map(|&a| f(a)).collect();
        let t = Tensor::from_parts(v.shape().to_vec(), data);
        self.push(t, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, Op::Div(a, b), |x, y| x / y)
    }

    /// `x + c` for a constant tensor `c` of the same shape.
    pub fn add_const(&mut self, x: Var, c: &Tensor) -> Result<Var> {
        if self.shape(x) != c.shape() {
            return Err(Error::shape(
                "add_const",
                "operands",
                format!("{:?} vs {:?}", self.shape(x), c.shape()),
            ));
        }
        let data = self
            .value(x)
            .data()
            .iter()
            .zip(c.data())
            .map(|(a, b)| a + b)
            .collect();
        let t = Tensor::from_parts(c.shape().to_vec(), data);
        self.push(t, Op::AddConst(x))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var> {
        self.map(x, Op::Scale(x, s), |v| v * s)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.map(x, Op::Relu(x), |v| v.max(0.0))
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        self.map(x, Op::Gelu(x), gelu)
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.map(x, Op::Sigmoid(x), sigmoid)
    }

    pub fn abs(&mut self, x: Var) -> Result<Var> {
        self.map(x, Op::Abs(x), f64::abs)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let v = self.value(x);
        if shape.iter().product::<usize>() != v.numel() {
            return Err(Error::shape(
                "reshape",
                "numel",
                format!("{:?} -> {shape:?}", v.shape()),
            ));
        }
        let t = Tensor::from_parts(shape.to_vec(), v.data().to_vec());
        self.push(t, Op::Reshape(x))
    }

    pub fn permute(&mut self, x: Var, axes: &[usize]) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let mut seen = vec![false; shape.len()];
        if axes.len() != shape.len()
            || axes
                .iter()
                .any(|&a| a >= shape.len() || std::mem::replace(&mut seen[a], true))
        {
            return Err(Error::shape(
                "permute",
                "axes",
                format!("{axes:?} is not a permutation of rank {}", shape.len()),
            ));
        }
        let (out_shape, data) = layout::permute(self.value(x).data(), &shape, axes);
        self.push(
            Tensor::from_parts(out_shape, data),
            Op::Permute(x, axes.to_vec()),
        )
    }

    /// Cyclic shift along `axis` (`out[i + shift] = x[i]`).
    pub fn roll(&mut self, x: Var, axis: usize, shift: isize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::shape(
                "roll",
                "axis",
                format!("axis {axis} for rank {}", shape.len()),
            ));
        }
        let data = layout::roll(self.value(x).data(), &shape, axis, shift);
        self.push(Tensor::from_parts(shape, data), Op::Roll { x, axis, shift })
    }

    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let mut shape = self.shape(x).to_vec();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(Error::shape(
                "slice",
                format!("axis {axis}"),
                format!("[{start}, {}) of {shape:?}", start + len),
            ));
        }
        let data = layout::slice(self.value(x).data(), &shape, axis, start, len);
        shape[axis] = len;
        self.push(
            Tensor::from_parts(shape, data),
            Op::Slice { x, axis, start },
        )
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = self.shape(inputs[0]).to_vec();
        if axis >= first.len() {
            return Err(Error::shape(
                "concat",
                "axis",
                format!("axis {axis} for rank {}", first.len()),
            ));
        }
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            let ok = s.len() == first.len()
                && s.iter()
                    .zip(&first)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !ok {
                return Err(Error::shape(
                    "concat",
                    format!("non-concat dims (axis {axis})"),
                    format!("{s:?} vs {first:?}"),
                ));
            }
            total += s[axis];
        }
        let (outer, _, inner) = layout::split_axis(&first, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in inputs {
                let len = self.shape(v)[axis] * inner;
                data.extend_from_slice(&self.value(v).data()[o * len..(o + 1) * len]);
            }
        }
        let mut shape = first;
        shape[axis] = total;
        self.push(
            Tensor::from_parts(shape, data),
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
        )
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).sum();
        self.push(Tensor::scalar(s), Op::SumAll(x))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let m = v.sum() / v.numel() as f64;
        self.push(Tensor::scalar(m), Op::MeanAll(x))
    }

    /// Sums out `axis`, removing it from the shape (a rank-1 input yields `[1]`).
    pub fn sum_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::shape(
                "sum_axis",
                "axis",
                format!("axis {axis} for rank {}", shape.len()),
            ));
        }
        let (outer, n, inner) = layout::split_axis(&shape, axis);
        let d = self.value(x).data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for k in 0..n {
                for (acc, v) in out[o * inner..(o + 1) * inner]
                    .iter_mut()
                    .zip(&d[(o * n + k) * inner..(o * n + k + 1) * inner])
                {
                    *acc += v;
                }
            }
        }
        let mut new_shape: Vec<usize> = shape
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != axis)
            .map(|(_, &s)| s)
            .collect();
        if new_shape.is_empty() {
            new_shape.push(1);
        }
        self.push(Tensor::from_parts(new_shape, out), Op::SumAxis { x, axis })
    }

    /// `[M,K]·[K,N]`, `[B,M,K]·[B,K,N]` or `[B,M,K]·[K,N]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let valid_rank = matches!((sa.len(), sb.len()), (2, 2) | (3, 3) | (3, 2));
        if !valid_rank {
            return Err(Error::shape("matmul", "rank", format!("{sa:?} x {sb:?}")));
        }
        if sa[sa.len() - 1] != sb[sb.len() - 2] {
            return Err(Error::shape(
                "matmul",
                "inner (K)",
                format!("{sa:?} x {sb:?}"),
            ));
        }
        if sb.len() == 3 && sa[0] != sb[0] {
            return Err(Error::shape("matmul", "batch", format!("{sa:?} x {sb:?}")));
        }
        let (bt, m, k, n) = matmul_dims(&sa, &sb);
        let (ad, bd) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![0.0; bt * m * n];
        for t in 0..bt {
            let bo = if sb.len() == 3 { t * k * n } else { 0 };
            for i in 0..m {
                let orow = &mut out[(t * m + i) * n..(t * m + i + 1) * n];
                for kk in 0..k {
                    let a_ik = ad[(t * m + i) * k + kk];
                    for (o, bv) in orow.iter_mut().zip(&bd[bo + kk * n..bo + (kk + 1) * n]) {
                        *o += a_ik * bv;
                    }
                }
            }
        }
        let mut shape = sa.clone();
        *shape.last_mut().unwrap() = n;
        self.push(Tensor::from_parts(shape, out), Op::MatMul(a, b))
    }

    /// Affine map over the last axis: `x[..., K] · w[K, N] + b[N]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (sx, sw) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if sw.len() != 2 || *sx.last().unwrap() != sw[0] {
            return Err(Error::shape(
                "linear",
                "in_features",
                format!("input {sx:?}, weight {sw:?}"),
            ));
        }
        let (k, n) = (sw[0], sw[1]);
        if let Some(b) = b {
            if self.shape(b) != [n] {
                return Err(Error::shape(
                    "linear",
                    "bias",
                    format!("{:?} for {n} outputs", self.shape(b)),
                ));
            }
        }
        let m = self.value(x).numel() / k;
        let (xd, wd) = (self.value(x).data(), self.value(w).data());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let orow = &mut out[i * n..(i + 1) * n];
            if let Some(b) = b {
                orow.copy_from_slice(self.value(b).data());
            }
            for kk in 0..k {
                let x_ik = xd[i * k + kk];
                for (o, wv) in orow.iter_mut().zip(&wd[kk * n..(kk + 1) * n]) {
                    *o += x_ik * wv;
                }
            }
        }
        let mut shape = sx;
        *shape.last_mut().unwrap() = n;
        self.push(Tensor::from_parts(shape, out), Op::Linear { x, w, b })
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let d = *v.shape().last().unwrap();
        let mut out = v.data().to_vec();
        for row in out.chunks_mut(d) {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for e in row.iter_mut() {
                *e = (*e - m).exp();
                s += *e;
            }
            for e in row.iter_mut() {
                *e /= s;
            }
        }
        let t = Tensor::from_parts(v.shape().to_vec(), out);
        self.push(t, Op::Softmax(x))
    }

    /// Layer normalization over the last axis followed by `gamma * x + beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let d = *shape.last().unwrap();
        if self.shape(gamma) != [d] || self.shape(beta) != [d] {
            return Err(Error::shape(
                "layer_norm",
                "normalized dim",
                format!("input {shape:?}, gamma {:?}", self.shape(gamma)),
            ));
        }
        let xd = self.value(x).data();
        let (gd, bd) = (self.value(gamma).data(), self.value(beta).data());
        let rows = xd.len() / d;
        let mut xhat = vec![0.0; xd.len()];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; xd.len()];
        for r in 0..rows {
            let row = &xd[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + eps).sqrt();
            inv_std[r] = inv;
            for j in 0..d {
                let h = (row[j] - mean) * inv;
                xhat[r * d + j] = h;
                out[r * d + j] = h * gd[j] + bd[j];
            }
        }
        self.push(
            Tensor::from_parts(shape, out),
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        )
    }

    /// 2-D convolution with zero padding. `input: [N,C,H,W]`, `weight: [O,C,kh,kw]`.
    pub fn conv2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let (sx, sw) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if sx.len() != 4 {
            return Err(Error::shape("conv2d", "input rank", format!("{sx:?}")));
        }
        if sw.len() != 4 {
            return Err(Error::shape("conv2d", "weight rank", format!("{sw:?}")));
        }
        if sw[1] != sx[1] {
            return Err(Error::shape(
                "conv2d",
                "channels (C)",
                format!("input has {}, weight expects {}", sx[1], sw[1]),
            ));
        }
        if stride == 0 {
            return Err(Error::InvalidArgument(
                "conv2d: stride must be positive".into(),
            ));
        }
        if sw[2] > sx[2] + 2 * padding {
            return Err(Error::shape(
                "conv2d",
                "height (kh)",
                format!(
                    "kernel {} exceeds padded height {}",
                    sw[2],
                    sx[2] + 2 * padding
                ),
            ));
        }
        if sw[3] > sx[3] + 2 * padding {
            return Err(Error::shape(
                "conv2d",
                "width (kw)",
                format!(
                    "kernel {} exceeds padded width {}",
                    sw[3],
                    sx[3] + 2 * padding
                ),
            ));
        }
        if let Some(b) = b {
            if self.shape(b) != [sw[0]] {
                return Err(Error::shape(
                    "conv2d",
                    "bias (O)",
                    format!("{:?} for {} outputs", self.shape(b), sw[0]),
                ));
            }
        }
        let geom = ConvGeom {
            n: sx[0],
            c: sx[1],
            h: sx[2],
            w: sx[3],
            o: sw[0],
            kh: sw[2],
            kw: sw[3],
            stride,
            pad: padding,
        };
        let out = conv::conv2d_forward(
            &geom,
            self.value(x).data(),
            self.value(w).data(),
            b.map(|b| self.value(b).data()),
        );
        let (ho, wo) = geom.out_hw();
        self.push(
            Tensor::from_parts(vec![geom.n, geom.o, ho, wo], out),
            Op::Conv2d { x, w, b, geom },
        )
    }

    /// Deformable convolution (stride 1, output the size of the input).
    /// `offsets: [N, 2*kh*kw, H, W]` holds (dy, dx) per kernel tap; samples
    /// outside the image read as zero.
    pub fn deformable_conv2d(&mut self, x: Var, offsets: Var, w: Var, b: Var) -> Result<Var> {
        let (sx, so, sw) = (
            self.shape(x).to_vec(),
            self.shape(offsets).to_vec(),
            self.shape(w).to_vec(),
        );
        if sx.len() != 4 || sw.len() != 4 {
            return Err(Error::shape(
                "deformable_conv2d",
                "rank",
                format!("input {sx:?}, weight {sw:?}"),
            ));
        }
        if sw[1] != sx[1] {
            return Err(Error::shape(
                "deformable_conv2d",
                "channels (C)",
                format!("input has {}, weight expects {}", sx[1], sw[1]),
            ));
        }
        let k = sw[2] * sw[3];
        if so.len() != 4 || so[1] != 2 * k {
            return Err(Error::shape(
                "deformable_conv2d",
                "offset channels",
                format!("expected {} (2*kh*kw), got {:?}", 2 * k, so),
            ));
        }
        if so[0] != sx[0] || so[2] != sx[2] || so[3] != sx[3] {
            return Err(Error::shape(
                "deformable_conv2d",
                "offset spatial",
                format!("offsets {so:?} vs input {sx:?}"),
            ));
        }
        if self.shape(b) != [sw[0]] {
            return Err(Error::shape(
                "deformable_conv2d",
                "bias (O)",
                format!("{:?}", self.shape(b)),
            ));
        }
        let geom = DeformGeom {
            n: sx[0],
            c: sx[1],
            h: sx[2],
            w: sx[3],
            o: sw[0],
            kh: sw[2],
            kw: sw[3],
        };
        let (out, cols) = conv::deform_conv2d_forward(
            &geom,
            self.value(x).data(),
            self.value(offsets).data(),
            self.value(w).data(),
            self.value(b).data(),
        );
        self.push(
            Tensor::from_parts(vec![geom.n, geom.o, geom.h, geom.w], out),
            Op::DeformConv2d {
                x,
                offsets,
                w,
                b,
                geom,
                cols,
            },
        )
    }

    /// `[N, C*r*r, H, W] -> [N, C, H*r, W*r]`.
    pub fn pixel_shuffle(&mut self, x: Var, r: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 4 || r == 0 || s[1] % (r * r) != 0 {
            return Err(Error::shape(
                "pixel_shuffle",
                "channels",
                format!("{s:?} not divisible by r^2 = {}", r * r),
            ));
        }
        let data = layout::pixel_shuffle(self.value(x).data(), &s, r);
        let shape = vec![s[0], s[1] / (r * r), s[2] * r, s[3] * r];
        self.push(Tensor::from_parts(shape, data), Op::PixelShuffle { x, r })
    }

    /// `[N, C, H*r, W*r] -> [N, C*r*r, H, W]`, the inverse of [`Graph::pixel_shuffle`].
    pub fn pixel_unshuffle(&mut self, x: Var, r: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 4 || r == 0 || s[2] % r != 0 || s[3] % r != 0 {
            return Err(Error::shape(
                "pixel_unshuffle",
                "spatial",
                format!("{s:?} not divisible by {r}"),
            ));
        }
        let data = layout::pixel_unshuffle(self.value(x).data(), &s, r);
        let shape = vec![s[0], s[1] * r * r, s[2] / r, s[3] / r];
        self.push(Tensor::from_parts(shape, data), Op::PixelUnshuffle { x, r })
    }

    pub fn upsample_nearest(&mut self, x: Var, r: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 4 || r == 0 {
            return Err(Error::shape("upsample_nearest", "rank", format!("{s:?}")));
        }
        let data = layout::upsample_nearest(self.value(x).data(), &s, r);
        self.push(
            Tensor::from_parts(vec![s[0], s[1], s[2] * r, s[3] * r], data),
            Op::UpsampleNearest { x, r },
        )
    }

    /// Samples `x: [N,C,H,W]` at `coords: [N,Ho,Wo,2]` (pixel-space y, x).
    pub fn bilinear_sample(&mut self, x: Var, coords: Var) -> Result<Var> {
        let (sx, sc) = (self.shape(x).to_vec(), self.shape(coords).to_vec());
        if sx.len() != 4 || sc.len() != 4 || sc[3] != 2 || sc[0] != sx[0] {
            return Err(Error::shape(
                "bilinear_sample",
                "coords",
                format!("input {sx:?}, coords {sc:?}"),
            ));
        }
        let data = conv::bilinear_sample_forward(
            self.value(x).data(),
            &sx,
            self.value(coords).data(),
            &sc,
        );
        self.push(
            Tensor::from_parts(vec![sx[0], sx[1], sc[1], sc[2]], data),
            Op::BilinearSample { x, coords },
        )
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}
