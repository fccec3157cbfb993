use super::kernels::{self, ConvGeom};
use super::{Result, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Dense {
        x: Var,
        w: Var,
        b: Var,
    },
    Conv {
        input: Var,
        w: Var,
        geom: ConvGeom,
        transposed: bool,
    },
    ChannelBias {
        x: Var,
        b: Var,
    },
    Concat {
        a: Var,
        b: Var,
    },
    Broadcast {
        v: Var,
    },
    Relu {
        x: Var,
    },
    LeakyRelu {
        x: Var,
        alpha: f32,
    },
    Sigmoid {
        x: Var,
    },
    Reshape {
        x: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    Scale {
        x: Var,
        factor: f32,
    },
    Sum {
        x: Var,
    },
    MeanBatch {
        x: Var,
    },
    L2Diff {
        a: Var,
        b: Var,
    },
    SigmoidCrossEntropy {
        logits: Var,
        targets: Vec<f32>,
    },
    ColumnArgmax {
        x: Var,
        mask: Vec<f32>,
    },
}

struct Node {
    value: Tensor,
    grad: Option<Vec<f32>>,
    requires_grad: bool,
    op: Op,
}

/// Ordered record of executed operations.
///
/// Every operation appends its output as a new node, so node order is
/// execution order and `backward` walks it in reverse. Parameters live
/// outside the tape and enter as leaves; a fresh tape per step keeps
/// recorded activations from outliving the step.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(op: &'static str, lhs: &[usize], rhs: &[usize]) -> TensorError {
    TensorError::Shape {
        op,
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
    }
}

#[inline]
fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn add_into(dst: &mut Option<Vec<f32>>, src: Vec<f32>) {
    match dst {
        Some(d) => d.iter_mut().zip(&src).for_each(|(a, b)| *a += b),
        None => *dst = Some(src),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drop every recorded node. Outstanding [`Var`]s become invalid.
    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, requires_grad, Op::Leaf)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient; zeros when nothing reached `v`.
    pub fn grad(&self, v: Var) -> Tensor {
        let node = &self.nodes[v.0];
        match &node.grad {
            Some(g) => Tensor::new(node.value.shape().to_vec(), g.clone()).expect("grad shape"),
            None => Tensor::zeros(node.value.shape().to_vec()),
        }
    }

    /// Short names of the recorded operations in execution order.
    pub fn op_names(&self) -> Vec<&'static str> {
        self.nodes.iter().map(|n| op_name(&n.op)).collect()
    }

    fn push(&mut self, value: Tensor, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// `x[B×n] · w[n×m] + bias[m]`.
    pub fn fully_connected(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[0] {
            return Err(shape_err("fully_connected", xs, ws));
        }
        if bs != [ws[1]] {
            return Err(shape_err("fully_connected bias", ws, bs));
        }
        let (batch, n, m) = (xs[0], xs[1], ws[1]);
        let out = kernels::dense_forward(
            self.value(x).data(),
            self.value(w).data(),
            self.value(b).data(),
            batch,
            n,
            m,
        );
        let rg = self.any_grad(&[x, w, b]);
        Ok(self.push(Tensor::new([batch, m], out)?, rg, Op::Dense { x, w, b }))
    }

    /// Valid cross-correlation of `x[B×C×H×W]` with `filters[F×C×kH×kW]`.
    pub fn conv2d(&mut self, x: Var, filters: Var, stride: (usize, usize)) -> Result<Var> {
        let (xs, fs) = (self.shape(x), self.shape(filters));
        if xs.len() != 4 || fs.len() != 4 || xs[1] != fs[1] || stride.0 == 0 || stride.1 == 0 {
            return Err(shape_err("conv2d", xs, fs));
        }
        if fs[2] > xs[2] || fs[3] > xs[3] {
            return Err(shape_err("conv2d: kernel larger than input", xs, fs));
        }
        let geom = ConvGeom {
            batch: xs[0],
            small_ch: fs[0],
            large_ch: xs[1],
            small_h: (xs[2] - fs[2]) / stride.0 + 1,
            small_w: (xs[3] - fs[3]) / stride.1 + 1,
            large_h: xs[2],
            large_w: xs[3],
            kh: fs[2],
            kw: fs[3],
            sh: stride.0,
            sw: stride.1,
        };
        let out = kernels::to_small(self.value(x).data(), self.value(filters).data(), &geom);
        let shape = [geom.batch, geom.small_ch, geom.small_h, geom.small_w];
        let rg = self.any_grad(&[x, filters]);
        let op = Op::Conv {
            input: x,
            w: filters,
            geom,
            transposed: false,
        };
        Ok(self.push(Tensor::new(shape, out)?, rg, op))
    }

    /// Transposed convolution of `x[B×C×H×W]` with `filters[C×F×kH×kW]`,
    /// producing `B×F×((H−1)·sH+kH)×((W−1)·sW+kW)`.
    pub fn transposed_conv2d(&mut self, x: Var, filters: Var, stride: (usize, usize)) -> Result<Var> {
        let (xs, fs) = (self.shape(x), self.shape(filters));
        if xs.len() != 4 || fs.len() != 4 || xs[1] != fs[0] || stride.0 == 0 || stride.1 == 0 {
            return Err(shape_err("transposed_conv2d", xs, fs));
        }
        if xs.iter().chain(fs).any(|&d| d == 0) {
            return Err(shape_err("transposed_conv2d: empty extent", xs, fs));
        }
        let geom = ConvGeom {
            batch: xs[0],
            small_ch: xs[1],
            large_ch: fs[1],
            small_h: xs[2],
            small_w: xs[3],
            large_h: (xs[2] - 1) * stride.0 + fs[2],
            large_w: (xs[3] - 1) * stride.1 + fs[3],
            kh: fs[2],
            kw: fs[3],
            sh: stride.0,
            sw: stride.1,
        };
        let out = kernels::to_large(self.value(x).data(), self.value(filters).data(), &geom);
        let shape = [geom.batch, geom.large_ch, geom.large_h, geom.large_w];
        let rg = self.any_grad(&[x, filters]);
        let op = Op::Conv {
            input: x,
            w: filters,
            geom,
            transposed: true,
        };
        Ok(self.push(Tensor::new(shape, out)?, rg, op))
    }

    /// Adds `b[C]` to every spatial position of channel `c` in `x[B×C×H×W]`.
    pub fn add_channel_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xs, bs) = (self.shape(x), self.shape(b));
        if xs.len() != 4 || bs != [xs[1]] {
            return Err(shape_err("add_channel_bias", xs, bs));
        }
        let plane = xs[2] * xs[3];
        let channels = xs[1];
        let mut out = self.value(x).clone();
        let bias = self.value(b).data();
        for (k, chunk) in out.data_mut().chunks_mut(plane).enumerate() {
            let bv = bias[k % channels];
            chunk.iter_mut().for_each(|v| *v += bv);
        }
        let rg = self.any_grad(&[x, b]);
        Ok(self.push(out, rg, Op::ChannelBias { x, b }))
    }

    /// Stack `a` and `b` along the channel axis, `a` first.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 4 || sb.len() != 4 || sa[0] != sb[0] || sa[2..] != sb[2..] {
            return Err(shape_err("concat_channels", sa, sb));
        }
        let (batch, ca, cb, plane) = (sa[0], sa[1], sb[1], sa[2] * sa[3]);
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let mut out = Vec::with_capacity(batch * (ca + cb) * plane);
        for n in 0..batch {
            out.extend_from_slice(&da[n * ca * plane..(n + 1) * ca * plane]);
            out.extend_from_slice(&db[n * cb * plane..(n + 1) * cb * plane]);
        }
        let shape = [batch, ca + cb, sa[2], sa[3]];
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(Tensor::new(shape, out)?, rg, Op::Concat { a, b }))
    }

    /// Tile `v[B×n]` over an `H×W` grid: `out[b][i][y][x] = v[b][i]`.
    pub fn broadcast_condition(&mut self, v: Var, height: usize, width: usize) -> Result<Var> {
        let vs = self.shape(v);
        if vs.len() != 2 {
            return Err(shape_err("broadcast_condition", vs, &[height, width]));
        }
        let (batch, n) = (vs[0], vs[1]);
        let plane = height * width;
        let mut out = Vec::with_capacity(batch * n * plane);
        for &value in self.value(v).data() {
            out.extend(std::iter::repeat_n(value, plane));
        }
        let rg = self.any_grad(&[v]);
        Ok(self.push(Tensor::new([batch, n, height, width], out)?, rg, Op::Broadcast { v }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.map(x, |v| v.max(0.0));
        let rg = self.any_grad(&[x]);
        self.push(out, rg, Op::Relu { x })
    }

    /// Elementwise `max(x, αx)`; α must lie in `[0, 1)`.
    pub fn leaky_relu(&mut self, x: Var, alpha: f32) -> Result<Var> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(TensorError::Contract(format!(
                "leaky_relu slope {alpha} outside [0, 1)"
            )));
        }
        let out = self.map(x, |v| if v > 0.0 { v } else { alpha * v });
        let rg = self.any_grad(&[x]);
        Ok(self.push(out, rg, Op::LeakyRelu { x, alpha }))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.map(x, sigmoid);
        let rg = self.any_grad(&[x]);
        self.push(out, rg, Op::Sigmoid { x })
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).clone().reshape(shape.to_vec())?;
        let rg = self.any_grad(&[x]);
        Ok(self.push(out, rg, Op::Reshape { x }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err("add", sa, sb));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let out = Tensor::new(sa.to_vec(), data)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, rg, Op::Add { a, b }))
    }

    /// Elementwise product of same-shaped tensors.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err("mul", sa, sb));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let out = Tensor::new(sa.to_vec(), data)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, rg, Op::Mul { a, b }))
    }

    pub fn scale(&mut self, x: Var, factor: f32) -> Var {
        let out = self.map(x, |v| v * factor);
        let rg = self.any_grad(&[x]);
        self.push(out, rg, Op::Scale { x, factor })
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let total = self.value(x).sum();
        let rg = self.any_grad(&[x]);
        self.push(Tensor::scalar(total), rg, Op::Sum { x })
    }

    /// Mean over the leading (batch) axis, keeping it with extent 1.
    pub fn mean_batch(&mut self, x: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        if xs.is_empty() || xs[0] == 0 {
            return Err(TensorError::Contract(format!("mean_batch over shape {xs:?}")));
        }
        let batch = xs[0];
        let per = self.value(x).numel() / batch;
        let data = self.value(x).data();
        let mut acc = vec![0.0f64; per];
        for n in 0..batch {
            for (a, &v) in acc.iter_mut().zip(&data[n * per..(n + 1) * per]) {
                *a += v as f64;
            }
        }
        let mean = acc.iter().map(|&a| (a / batch as f64) as f32).collect();
        let mut shape = xs;
        shape[0] = 1;
        let rg = self.any_grad(&[x]);
        Ok(self.push(Tensor::new(shape, mean)?, rg, Op::MeanBatch { x }))
    }

    /// Squared Euclidean distance `‖a − b‖²`.
    pub fn l2_diff(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err("l2_diff", sa, sb));
        }
        let total: f64 = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| {
                let d = x as f64 - y as f64;
                d * d
            })
            .sum();
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(Tensor::scalar(total as f32), rg, Op::L2Diff { a, b }))
    }

    /// Batch mean of the logistic loss, in the form
    /// `max(x,0) − x·t + log(1 + e^{−|x|})`.
    pub fn sigmoid_cross_entropy(&mut self, logits: Var, targets: &[f32]) -> Result<Var> {
        let n = self.value(logits).numel();
        if n != targets.len() || n == 0 {
            return Err(shape_err("sigmoid_cross_entropy", self.shape(logits), &[targets.len()]));
        }
        if let Some(t) = targets.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(TensorError::Contract(format!(
                "cross-entropy target {t} outside [0, 1]"
            )));
        }
        let total: f64 = self
            .value(logits)
            .data()
            .iter()
            .zip(targets)
            .map(|(&x, &t)| {
                let x = x as f64;
                x.max(0.0) - x * t as f64 + (-x.abs()).exp().ln_1p()
            })
            .sum();
        let loss = (total / n as f64) as f32;
        let rg = self.any_grad(&[logits]);
        let op = Op::SigmoidCrossEntropy {
            logits,
            targets: targets.to_vec(),
        };
        Ok(self.push(Tensor::scalar(loss), rg, op))
    }

    /// One-hot of the per-column maximum along the height axis of a rank-4
    /// tensor; ties resolve to the lowest row. The backward pass is
    /// straight-through: each column's gradient reaches only its argmax cell.
    pub fn column_argmax(&mut self, x: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 4 {
            return Err(shape_err("column_argmax", &xs, &[0, 0, 0, 0]));
        }
        let mask = argmax_mask(self.value(x));
        let out = Tensor::new(xs, mask.clone())?;
        let rg = self.any_grad(&[x]);
        Ok(self.push(out, rg, Op::ColumnArgmax { x, mask }))
    }

    fn map(&self, x: Var, f: impl Fn(f32) -> f32) -> Tensor {
        let src = self.value(x);
        let data = src.data().iter().map(|&v| f(v)).collect();
        Tensor::new(src.shape().to_vec(), data).expect("same shape")
    }

    /// Accumulate `∂loss/∂v` into every node that requires a gradient.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let ls = self.shape(loss);
        if !self.value(loss).is_scalar() {
            return Err(TensorError::NonScalarLoss(ls.to_vec()));
        }
        let mut pending: Vec<Option<Vec<f32>>> = Vec::new();
        pending.resize_with(loss.0 + 1, || None);
        pending[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = pending[idx].take() else { continue };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            self.propagate(idx, &g, &mut pending);
            add_into(&mut self.nodes[idx].grad, g);
        }
        Ok(())
    }

    fn send(&self, pending: &mut [Option<Vec<f32>>], to: Var, g: Vec<f32>) {
        if self.nodes[to.0].requires_grad {
            add_into(&mut pending[to.0], g);
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, idx: usize, g: &[f32], pending: &mut [Option<Vec<f32>>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::Dense { x, w, b } => {
                let (xs, ws) = (self.shape(*x), self.shape(*w));
                let (batch, n, m) = (xs[0], xs[1], ws[1]);
                if self.wants(*x) {
                    let dx = kernels::dense_input_grad(g, self.value(*w).data(), batch, n, m);
                    self.send(pending, *x, dx);
                }
                if self.wants(*w) {
                    let dw = kernels::dense_weight_grad(self.value(*x).data(), g, batch, n, m);
                    self.send(pending, *w, dw);
                }
                if self.wants(*b) {
                    let mut db = vec![0.0; m];
                    for row in g.chunks(m) {
                        db.iter_mut().zip(row).for_each(|(a, v)| *a += v);
                    }
                    self.send(pending, *b, db);
                }
            }
            Op::Conv {
                input,
                w,
                geom,
                transposed,
            } => {
                let xin = self.value(*input).data();
                let wv = self.value(*w).data();
                if self.wants(*input) {
                    let dx = if *transposed {
                        kernels::to_small(g, wv, geom)
                    } else {
                        kernels::to_large(g, wv, geom)
                    };
                    self.send(pending, *input, dx);
                }
                if self.wants(*w) {
                    let dw = if *transposed {
                        kernels::weight_grad(xin, g, geom)
                    } else {
                        kernels::weight_grad(g, xin, geom)
                    };
                    self.send(pending, *w, dw);
                }
            }
            Op::ChannelBias { x, b } => {
                if self.wants(*x) {
                    self.send(pending, *x, g.to_vec());
                }
                if self.wants(*b) {
                    let xs = self.shape(*x);
                    let (channels, plane) = (xs[1], xs[2] * xs[3]);
                    let mut db = vec![0.0; channels];
                    for (k, chunk) in g.chunks(plane).enumerate() {
                        db[k % channels] += chunk.iter().sum::<f32>();
                    }
                    self.send(pending, *b, db);
                }
            }
            Op::Concat { a, b } => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (batch, ca, cb, plane) = (sa[0], sa[1], sb[1], sa[2] * sa[3]);
                let stride = (ca + cb) * plane;
                if self.wants(*a) {
                    let mut ga = Vec::with_capacity(batch * ca * plane);
                    for n in 0..batch {
                        ga.extend_from_slice(&g[n * stride..n * stride + ca * plane]);
                    }
                    self.send(pending, *a, ga);
                }
                if self.wants(*b) {
                    let mut gb = Vec::with_capacity(batch * cb * plane);
                    for n in 0..batch {
                        gb.extend_from_slice(&g[n * stride + ca * plane..(n + 1) * stride]);
                    }
                    self.send(pending, *b, gb);
                }
            }
            Op::Broadcast { v } => {
                let vs = self.shape(*v);
                let plane = g.len() / (vs[0] * vs[1]);
                let gv = g.chunks(plane).map(|c| c.iter().sum()).collect();
                self.send(pending, *v, gv);
            }
            Op::Relu { x } => {
                let xv = self.value(*x).data();
                let gx = g.iter().zip(xv).map(|(&g, &x)| if x > 0.0 { g } else { 0.0 }).collect();
                self.send(pending, *x, gx);
            }
            Op::LeakyRelu { x, alpha } => {
                let xv = self.value(*x).data();
                let gx = g
                    .iter()
                    .zip(xv)
                    .map(|(&g, &x)| if x > 0.0 { g } else { alpha * g })
                    .collect();
                self.send(pending, *x, gx);
            }
            Op::Sigmoid { x } => {
                let y = node.value.data();
                let gx = g.iter().zip(y).map(|(&g, &y)| g * y * (1.0 - y)).collect();
                self.send(pending, *x, gx);
            }
            Op::Reshape { x } => self.send(pending, *x, g.to_vec()),
            Op::Add { a, b } => {
                self.send(pending, *a, g.to_vec());
                self.send(pending, *b, g.to_vec());
            }
            Op::Mul { a, b } => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                if self.wants(*a) {
                    self.send(pending, *a, g.iter().zip(vb).map(|(g, y)| g * y).collect());
                }
                if self.wants(*b) {
                    self.send(pending, *b, g.iter().zip(va).map(|(g, x)| g * x).collect());
                }
            }
            Op::Scale { x, factor } => {
                let gx = g.iter().map(|v| v * factor).collect();
                self.send(pending, *x, gx);
            }
            Op::Sum { x } => {
                let n = self.value(*x).numel();
                self.send(pending, *x, vec![g[0]; n]);
            }
            Op::MeanBatch { x } => {
                let batch = self.shape(*x)[0];
                let scaled: Vec<f32> = g.iter().map(|v| v / batch as f32).collect();
                let gx = scaled.iter().copied().cycle().take(scaled.len() * batch).collect();
                self.send(pending, *x, gx);
            }
            Op::L2Diff { a, b } => {
                let diff: Vec<f32> = self
                    .value(*a)
                    .data()
                    .iter()
                    .zip(self.value(*b).data())
                    .map(|(x, y)| 2.0 * (x - y) * g[0])
                    .collect();
                if self.wants(*b) {
                    self.send(pending, *b, diff.iter().map(|v| -v).collect());
                }
                self.send(pending, *a, diff);
            }
            Op::SigmoidCrossEntropy { logits, targets } => {
                let n = targets.len() as f32;
                let gx = self
                    .value(*logits)
                    .data()
                    .iter()
                    .zip(targets)
                    .map(|(&x, &t)| (sigmoid(x) - t) / n * g[0])
                    .collect();
                self.send(pending, *logits, gx);
            }
            Op::ColumnArgmax { x, mask } => {
                let gx = g.iter().zip(mask).map(|(g, m)| g * m).collect();
                self.send(pending, *x, gx);
            }
        }
    }
}

/// Per-column one-hot of the maximum along axis 2 of a rank-4 tensor.
pub(crate) fn argmax_mask(t: &Tensor) -> Vec<f32> {
    let [b, c, h, w] = t.dims4();
    let data = t.data();
    let mut mask = vec![0.0; data.len()];
    for plane in 0..b * c {
        let base = plane * h * w;
        for col in 0..w {
            let mut best = 0;
            let mut best_val = f32::NEG_INFINITY;
            for row in 0..h {
                let v = data[base + row * w + col];
                if v > best_val {
                    best_val = v;
                    best = row;
                }
            }
            mask[base + best * w + col] = 1.0;
        }
    }
    mask
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::Dense { .. } => "fully_connected",
        Op::Conv { transposed: false, .. } => "conv2d",
        Op::Conv { transposed: true, .. } => "transposed_conv2d",
        Op::ChannelBias { .. } => "add_channel_bias",
        Op::Concat { .. } => "concat_channels",
        Op::Broadcast { .. } => "broadcast_condition",
        Op::Relu { .. } => "relu",
        Op::LeakyRelu { .. } => "leaky_relu",
        Op::Sigmoid { .. } => "sigmoid",
        Op::Reshape { .. } => "reshape",
        Op::Add { .. } => "add",
        Op::Mul { .. } => "mul",
        Op::Scale { .. } => "scale",
        Op::Sum { .. } => "sum",
        Op::MeanBatch { .. } => "mean_batch",
        Op::L2Diff { .. } => "l2_diff",
        Op::SigmoidCrossEntropy { .. } => "sigmoid_cross_entropy",
        Op::ColumnArgmax { .. } => "column_argmax",
    }
}
