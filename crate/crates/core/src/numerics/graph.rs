use std::collections::BTreeMap;

use super::conv::{self, ConvGeom, DeformGeom};
use super::layout;
use super::tensor::{ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub(crate) usize);

pub(crate) enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddConst(Var),
    Scale(Var, f64),
    Relu(Var),
    Gelu(Var),
    Sigmoid(Var),
    Abs(Var),
    Reshape(Var),
    Permute(Var, Vec<usize>),
    Roll {
        x: Var,
        axis: usize,
        shift: isize,
    },
    Slice {
        x: Var,
        axis: usize,
        start: usize,
    },
    Concat {
        inputs: Vec<Var>,
        axis: usize,
    },
    SumAll(Var),
    MeanAll(Var),
    SumAxis {
        x: Var,
        axis: usize,
    },
    MatMul(Var, Var),
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Softmax(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeom,
    },
    DeformConv2d {
        x: Var,
        offsets: Var,
        w: Var,
        b: Var,
        geom: DeformGeom,
        cols: Vec<f64>,
    },
    PixelShuffle {
        x: Var,
        r: usize,
    },
    PixelUnshuffle {
        x: Var,
        r: usize,
    },
    UpsampleNearest {
        x: Var,
        r: usize,
    },
    BilinearSample {
        x: Var,
        coords: Var,
    },
}

impl Op {
    pub(crate) fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::AddConst(..) => "add_const",
            Op::Scale(..) => "scale",
            Op::Relu(..) => "relu",
            Op::Gelu(..) => "gelu",
            Op::Sigmoid(..) => "sigmoid",
            Op::Abs(..) => "abs",
            Op::Reshape(..) => "reshape",
            Op::Permute(..) => "permute",
            Op::Roll { .. } => "roll",
            Op::Slice { .. } => "slice",
            Op::Concat { .. } => "concat",
            Op::SumAll(..) => "sum",
            Op::MeanAll(..) => "mean",
            Op::SumAxis { .. } => "sum_axis",
            Op::MatMul(..) => "matmul",
            Op::Linear { .. } => "linear",
            Op::Softmax(..) => "softmax",
            Op::LayerNorm { .. } => "layer_norm",
            Op::Conv2d { .. } => "conv2d",
            Op::DeformConv2d { .. } => "deformable_conv2d",
            Op::PixelShuffle { .. } => "pixel_shuffle",
            Op::PixelUnshuffle { .. } => "pixel_unshuffle",
            Op::UpsampleNearest { .. } => "upsample_nearest",
            Op::BilinearSample { .. } => "bilinear_sample",
        }
    }

    fn parents(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) | Op::MatMul(a, b) => {
                vec![*a, *b]
            }
            Op::AddConst(x)
            | Op::Scale(x, _)
            | Op::Relu(x)
            | Op::Gelu(x)
            | Op::Sigmoid(x)
            | Op::Abs(x)
            | Op::Reshape(x)
            | Op::Permute(x, _)
            | Op::SumAll(x)
            | Op::MeanAll(x)
            | Op::Softmax(x) => vec![*x],
            Op::Roll { x, .. }
            | Op::Slice { x, .. }
            | Op::SumAxis { x, .. }
            | Op::PixelShuffle { x, .. }
            | Op::PixelUnshuffle { x, .. }
            | Op::UpsampleNearest { x, .. } => vec![*x],
            Op::Concat { inputs, .. } => inputs.clone(),
            Op::Linear { x, w, b } | Op::Conv2d { x, w, b, .. } => {
                let mut v = vec![*x, *w];
                v.extend(b);
                v
            }
            Op::LayerNorm { x, gamma, beta, .. } => vec![*x, *gamma, *beta],
            Op::DeformConv2d {
                x, offsets, w, b, ..
            } => vec![*x, *offsets, *w, *b],
            Op::BilinearSample { x, coords } => vec![*x, *coords],
        }
    }
}

pub(crate) struct Node {
    pub value: Tensor,
    pub op: Op,
    pub requires_grad: bool,
    pub grad: Option<Tensor>,
}

/// A dynamically recorded computation supporting reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the node list is already a
/// topological order and [`Graph::backward`] simply walks it in reverse.
#[derive(Default)]
pub struct Graph {
    pub(crate) nodes: Vec<Node>,
    params: BTreeMap<String, Var>,
    param_reads: BTreeMap<String, usize>,
    labels: BTreeMap<String, Var>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn push(&mut self, value: Tensor, op: Op) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: op.name() });
        }
        let requires_grad = op.parents().iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: "leaf" });
        }
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
            grad: None,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A leaf that receives a gradient.
    pub fn input(&mut self, value: Tensor) -> Result<Var> {
        self.leaf(value, true)
    }

    /// A leaf excluded from differentiation.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.leaf(value, false)
    }

    /// Binds the parameter `name` from `store`. Repeated requests for the same
    /// name return the same node, so weight sharing is visible in the graph.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        *self.param_reads.entry(name.to_string()).or_insert(0) += 1;
        if let Some(&v) = self.params.get(name) {
            return Ok(v);
        }
        let t = store.require(name)?.clone();
        let v = self.leaf(t, true)?;
        self.params.insert(name.to_string(), v);
        Ok(v)
    }

    /// Parameter names bound so far with how many times each was requested.
    pub fn param_reads(&self) -> &BTreeMap<String, usize> {
        &self.param_reads
    }

    pub fn param_vars(&self) -> &BTreeMap<String, Var> {
        &self.params
    }

    /// Attaches a name to a node for later inspection.
    pub fn label(&mut self, name: impl Into<String>, v: Var) {
        self.labels.insert(name.into(), v);
    }

    pub fn labelled(&self, name: &str) -> Option<Var> {
        self.labels.get(name).copied()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.labels.keys().map(String::as_str)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of recorded nodes per operation name.
    pub fn op_counts(&self) -> BTreeMap<&'static str, usize> {
        let mut m = BTreeMap::new();
        for n in &self.nodes {
            *m.entry(n.op.name()).or_insert(0) += 1;
        }
        m
    }

    /// Nodes from which `target` is reachable (including `target`).
    pub fn ancestors(&self, target: Var) -> Vec<bool> {
        let mut live = vec![false; self.nodes.len()];
        live[target.0] = true;
        for i in (0..=target.0).rev() {
            if live[i] {
                for p in self.nodes[i].op.parents() {
                    live[p.0] = true;
                }
            }
        }
        live
    }

    /// Whether `output` is computed from `input`.
    pub fn depends_on(&self, output: Var, input: Var) -> bool {
        input.0 <= output.0 && self.ancestors(output)[input.0]
    }

    /// Gradients of every bound parameter, by name. Parameters that the loss
    /// does not reach get a zero tensor.
    pub fn param_grads(&self) -> BTreeMap<String, Tensor> {
        self.params
            .iter()
            .map(|(name, &v)| {
                let g = self.nodes[v.0]
                    .grad
                    .clone()
                    .unwrap_or_else(|| Tensor::zeros(self.nodes[v.0].value.shape()));
                (name.clone(), g)
            })
            .collect()
    }

    /// Reverse-mode sweep from a scalar `loss`, populating gradients on every
    /// reachable node that requires one. Previous gradients are cleared.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let lv = &self.nodes[loss.0].value;
        if lv.numel() != 1 {
            return Err(Error::shape(
                "backward",
                "loss",
                format!("expected a scalar, got shape {:?}", lv.shape()),
            ));
        }
        if !lv.is_finite() {
            return Err(Error::NonFinite { op: "backward" });
        }
        for n in &mut self.nodes {
            n.grad = None;
        }
        let shape = self.nodes[loss.0].value.shape().to_vec();
        self.nodes[loss.0].grad = Some(Tensor::ones(&shape));
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = self.nodes[i].grad.take() else {
                continue;
            };
            let contribs = self.node_backward(i, &g);
            self.nodes[i].grad = Some(g);
            for (p, pg) in contribs {
                let node = &mut self.nodes[p.0];
                if !node.requires_grad {
                    continue;
                }
                match &mut node.grad {
                    Some(acc) => acc.add_assign(&pg),
                    slot @ None => *slot = Some(pg),
                }
            }
        }
        Ok(())
    }

    fn node_backward(&self, i: usize, g: &Tensor) -> Vec<(Var, Tensor)> {
        let node = &self.nodes[i];
        let y = &node.value;
        let val = |v: &Var| &self.nodes[v.0].value;
        let like = |v: &Var, data: Vec<f64>| {
            Tensor::from_parts(self.nodes[v.0].value.shape().to_vec(), data)
        };
        let gd = g.data();
        match &node.op {
            Op::Leaf => vec![],
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Sub(a, b) => vec![
                (*a, g.clone()),
                (*b, like(b, gd.iter().map(|v| -v).collect())),
            ],
            Op::Mul(a, b) => {
                let (av, bv) = (val(a).data(), val(b).data());
                vec![
                    (*a, like(a, gd.iter().zip(bv).map(|(g, b)| g * b).collect())),
                    (*b, like(b, gd.iter().zip(av).map(|(g, a)| g * a).collect())),
                ]
            }
            Op::Div(a, b) => {
                let (av, bv) = (val(a).data(), val(b).data());
                vec![
                    (*a, like(a, gd.iter().zip(bv).map(|(g, b)| g / b).collect())),
                    (
                        *b,
                        like(
                            b,
                            gd.iter()
                                .zip(av.iter().zip(bv))
                                .map(|(g, (a, b))| -g * a / (b * b))
                                .collect(),
                        ),
                    ),
                ]
            }
            Op::AddConst(x) => vec![(*x, g.clone())],
            Op::Scale(x, s) => vec![(*x, like(x, gd.iter().map(|v| v * s).collect()))],
            Op::Relu(x) => {
                let xv = val(x).data();
                vec![(
                    *x,
                    like(
                        x,
                        gd.iter()
                            .zip(xv)
                            .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
                            .collect(),
                    ),
                )]
            }
            Op::Gelu(x) => {
                let xv = val(x).data();
                vec![(
                    *x,
                    like(
                        x,
                        gd.iter().zip(xv).map(|(g, x)| g * gelu_grad(*x)).collect(),
                    ),
                )]
            }
            Op::Sigmoid(x) => {
                vec![(
                    *x,
                    like(
                        x,
                        gd.iter()
                            .zip(y.data())
                            .map(|(g, s)| g * s * (1.0 - s))
                            .collect(),
                    ),
                )]
            }
            Op::Abs(x) => {
                let xv = val(x).data();
                vec![(
                    *x,
                    like(
                        x,
                        gd.iter()
                            .zip(xv)
                            .map(|(g, x)| g * x.signum() * (*x != 0.0) as u8 as f64)
                            .collect(),
                    ),
                )]
            }
            Op::Reshape(x) => vec![(*x, like(x, gd.to_vec()))],
            Op::Permute(x, axes) => {
                let (_, data) = layout::permute(gd, y.shape(), &layout::inverse_axes(axes));
                vec![(*x, like(x, data))]
            }
            Op::Roll { x, axis, shift } => {
                vec![(*x, like(x, layout::roll(gd, y.shape(), *axis, -shift)))]
            }
            Op::Slice { x, axis, start } => {
                let len = y.shape()[*axis];
                vec![(
                    *x,
                    like(
                        x,
                        layout::slice_backward(gd, val(x).shape(), *axis, *start, len),
                    ),
                )]
            }
            Op::Concat { inputs, axis } => {
                let mut start = 0;
                inputs
                    .iter()
                    .map(|v| {
                        let len = val(v).shape()[*axis];
                        let part = layout::slice(gd, y.shape(), *axis, start, len);
                        start += len;
                        (*v, like(v, part))
                    })
                    .collect()
            }
            Op::SumAll(x) => vec![(*x, Tensor::full(val(x).shape(), gd[0]))],
            Op::MeanAll(x) => {
                let n = val(x).numel() as f64;
                vec![(*x, Tensor::full(val(x).shape(), gd[0] / n))]
            }
            Op::SumAxis { x, axis } => {
                let (outer, n, inner) = layout::split_axis(val(x).shape(), *axis);
                let mut d = vec![0.0; outer * n * inner];
                for o in 0..outer {
                    for k in 0..n {
                        d[(o * n + k) * inner..(o * n + k + 1) * inner]
                            .copy_from_slice(&gd[o * inner..(o + 1) * inner]);
                    }
                }
                vec![(*x, like(x, d))]
            }
            Op::MatMul(a, b) => {
                let (av, bv) = (val(a), val(b));
                let (bt, m, k, n) = matmul_dims(av.shape(), bv.shape());
                let mut da = vec![0.0; av.numel()];
                let mut db = vec![0.0; bv.numel()];
                let (ad, bd) = (av.data(), bv.data());
                let b_batched = bv.ndim() == 3;
                for t in 0..bt {
                    let ao = t * m * k;
                    let bo = if b_batched { t * k * n } else { 0 };
                    let go = t * m * n;
                    for i in 0..m {
                        for kk in 0..k {
                            let brow = &bd[bo + kk * n..bo + (kk + 1) * n];
                            let grow = &gd[go + i * n..go + (i + 1) * n];
                            da[ao + i * k + kk] = brow.iter().zip(grow).map(|(b, g)| b * g).sum();
                            let a_ik = ad[ao + i * k + kk];
                            for (d, g) in db[bo + kk * n..bo + (kk + 1) * n].iter_mut().zip(grow) {
                                *d += a_ik * g;
                            }
                        }
                    }
                }
                vec![(*a, like(a, da)), (*b, like(b, db))]
            }
            Op::Linear { x, w, b } => {
                let (xv, wv) = (val(x), val(w));
                let (k, n) = (wv.shape()[0], wv.shape()[1]);
                let m = xv.numel() / k;
                let (xd, wd) = (xv.data(), wv.data());
                let mut dx = vec![0.0; xv.numel()];
                let mut dw = vec![0.0; wv.numel()];
                let mut dbias = vec![0.0; n];
                for i in 0..m {
                    let grow = &gd[i * n..(i + 1) * n];
                    for (d, g) in dbias.iter_mut().zip(grow) {
                        *d += g;
                    }
                    for kk in 0..k {
                        let wrow = &wd[kk * n..(kk + 1) * n];
                        dx[i * k + kk] = wrow.iter().zip(grow).map(|(w, g)| w * g).sum();
                        let x_ik = xd[i * k + kk];
                        for (d, g) in dw[kk * n..(kk + 1) * n].iter_mut().zip(grow) {
                            *d += x_ik * g;
                        }
                    }
                }
                let mut out = vec![(*x, like(x, dx)), (*w, like(w, dw))];
                if let Some(b) = b {
                    out.push((*b, like(b, dbias)));
                }
                out
            }
            Op::Softmax(x) => {
                let d = *y.shape().last().unwrap();
                let yd = y.data();
                let mut dx = vec![0.0; yd.len()];
                for r in 0..yd.len() / d {
                    let (ys, gs) = (&yd[r * d..(r + 1) * d], &gd[r * d..(r + 1) * d]);
                    let dot: f64 = ys.iter().zip(gs).map(|(a, b)| a * b).sum();
                    for j in 0..d {
                        dx[r * d + j] = ys[j] * (gs[j] - dot);
                    }
                }
                vec![(*x, like(x, dx))]
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let gam = val(gamma).data();
                let d = gam.len();
                let rows = xhat.len() / d;
                let mut dx = vec![0.0; xhat.len()];
                let mut dg = vec![0.0; d];
                let mut dbeta = vec![0.0; d];
                let mut dxhat = vec![0.0; d];
                for r in 0..rows {
                    let xh = &xhat[r * d..(r + 1) * d];
                    let gs = &gd[r * d..(r + 1) * d];
                    let mut s1 = 0.0;
                    let mut s2 = 0.0;
                    for j in 0..d {
                        dg[j] += gs[j] * xh[j];
                        dbeta[j] += gs[j];
                        dxhat[j] = gs[j] * gam[j];
                        s1 += dxhat[j];
                        s2 += dxhat[j] * xh[j];
                    }
                    let inv = inv_std[r];
                    for j in 0..d {
                        dx[r * d + j] = inv / d as f64 * (d as f64 * dxhat[j] - s1 - xh[j] * s2);
                    }
                }
                vec![
                    (*x, like(x, dx)),
                    (*gamma, like(gamma, dg)),
                    (*beta, like(beta, dbeta)),
                ]
            }
            Op::Conv2d { x, w, b, geom } => {
                let (dx, dw, db) = conv::conv2d_backward(geom, val(x).data(), val(w).data(), gd);
                let mut out = vec![(*x, like(x, dx)), (*w, like(w, dw))];
                if let Some(b) = b {
                    out.push((*b, like(b, db)));
                }
                out
            }
            Op::DeformConv2d {
                x,
                offsets,
                w,
                b,
                geom,
                cols,
            } => {
                let gr = conv::deform_conv2d_backward(
                    geom,
                    val(x).data(),
                    val(offsets).data(),
                    val(w).data(),
                    cols,
                    gd,
                );
                vec![
                    (*x, like(x, gr.input)),
                    (*offsets, like(offsets, gr.offsets)),
                    (*w, like(w, gr.weight)),
                    (*b, like(b, gr.bias)),
                ]
            }
            Op::PixelShuffle { x, r } => {
                vec![(*x, like(x, layout::pixel_unshuffle(gd, y.shape(), *r)))]
            }
            Op::PixelUnshuffle { x, r } => {
                vec![(*x, like(x, layout::pixel_shuffle(gd, y.shape(), *r)))]
            }
            Op::UpsampleNearest { x, r } => {
                vec![(
                    *x,
                    like(x, layout::upsample_nearest_backward(gd, val(x).shape(), *r)),
                )]
            }
            Op::BilinearSample { x, coords } => {
                let (xv, cv) = (val(x), val(coords));
                let (dx, dc) = conv::bilinear_sample_backward(
                    xv.data(),
                    xv.shape(),
                    cv.data(),
                    cv.shape(),
                    gd,
                );
                vec![(*x, like(x, dx)), (*coords, like(coords, dc))]
            }
        }
    }
}

pub(crate) fn matmul_dims(a: &[usize], b: &[usize]) -> (usize, usize, usize, usize) {
    let (bt, m, k) = if a.len() == 3 {
        (a[0], a[1], a[2])
    } else {
        (1, a[0], a[1])
    };
    let n = *b.last().unwrap();
    (bt, m, k, n)
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}
