//! Reverse-mode differentiation tape.
//!
//! Operations are recorded in topological order (a node's inputs always
//! precede it), values are kept in an arena, and `backward` replays the
//! tape in reverse, accumulating gradients additively. Gradient buffers
//! exist only for nodes that require them; constants never allocate one,
//! which is how the freeze contract is enforced at the engine level.

use super::tensor::{matmul_nn, matmul_nt, matmul_tn, shape_str, Tensor};
use crate::error::{Error, Result};

/// Handle to a tape node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
enum Op {
    Leaf,
    /// A[m,k] · B[k,n]
    MatMulNN { a: Var, b: Var },
    /// A[m,k] · B[n,k]ᵀ
    MatMulNT { a: Var, b: Var },
    Add { a: Var, b: Var },
    /// x[N,D] + bias[D] broadcast over rows
    AddBias { x: Var, bias: Var },
    Scale { x: Var, c: f64 },
    /// x[N,R] ⊙ v[R] broadcast over rows
    MulRow { x: Var, v: Var },
    Sigmoid { x: Var },
    Tanh { x: Var },
    SoftmaxRows { x: Var },
    LayerNorm { x: Var, gain: Var, bias: Var, eps: f64 },
    /// Forward 1[soft > 0.5]; backward passes gradient straight through.
    SteGate { soft: Var },
    Reshape { x: Var },
    /// Bilinear resize of a [h,w] grid to [out_h,out_w].
    Upsample { x: Var, out_h: usize, out_w: usize },
    SumAll { x: Var },
    MeanAll { x: Var },
    FocalLoss { logits: Var, target: Var, gamma: f64, alpha: f64 },
    DiceLoss { probs: Var, target: Var, smooth: f64 },
}

struct Node {
    value: Tensor,
    grad: Option<Tensor>,
    op: Op,
}

pub struct Tape {
    nodes: Vec<Node>,
    backward_done: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), backward_done: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Untracked input: no gradient buffer is ever allocated for it.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Tracked input: receives a gradient during backward.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    fn requires(&self, v: Var) -> bool {
        self.nodes[v.0].grad.is_some()
    }

    fn push(&mut self, value: Tensor, op: Op, requires: bool) -> Var {
        let grad = requires.then(|| Tensor::zeros(&value.shape));
        self.nodes.push(Node { value, grad, op });
        Var(self.nodes.len() - 1)
    }

    fn shape_err(op: &'static str, detail: String) -> Error {
        Error::Shape { op, detail }
    }

    // ── Recorded operations ─────────────────────────────────────────

    pub fn matmul_nn(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = (ta.rows(), ta.cols());
        let (k2, n) = (tb.rows(), tb.cols());
        if k != k2 {
            return Err(Self::shape_err(
                "matmul_nn",
                format!("{} x {}", shape_str(&ta.shape), shape_str(&tb.shape)),
            ));
        }
        let data = matmul_nn(&ta.data, &tb.data, m, k, n);
        let req = self.requires(a) || self.requires(b);
        Ok(self.push(Tensor::new(vec![m, n], data), Op::MatMulNN { a, b }, req))
    }

    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = (ta.rows(), ta.cols());
        let (n, k2) = (tb.rows(), tb.cols());
        if k != k2 {
            return Err(Self::shape_err(
                "matmul_nt",
                format!("{} x {}ᵀ", shape_str(&ta.shape), shape_str(&tb.shape)),
            ));
        }
        let data = matmul_nt(&ta.data, &tb.data, m, k, n);
        let req = self.requires(a) || self.requires(b);
        Ok(self.push(Tensor::new(vec![m, n], data), Op::MatMulNT { a, b }, req))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape != tb.shape {
            return Err(Self::shape_err(
                "add",
                format!("{} vs {}", shape_str(&ta.shape), shape_str(&tb.shape)),
            ));
        }
        let data: Vec<f64> = ta.data.iter().zip(&tb.data).map(|(x, y)| x + y).collect();
        let shape = ta.shape.clone();
        let req = self.requires(a) || self.requires(b);
        Ok(self.push(Tensor::new(shape, data), Op::Add { a, b }, req))
    }

    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(bias));
        let cols = tx.cols();
        if tb.numel() != cols {
            return Err(Self::shape_err(
                "add_bias",
                format!("{} + bias {}", shape_str(&tx.shape), shape_str(&tb.shape)),
            ));
        }
        let mut data = tx.data.clone();
        for row in data.chunks_mut(cols) {
            for (v, b) in row.iter_mut().zip(&tb.data) {
                *v += b;
            }
        }
        let shape = tx.shape.clone();
        let req = self.requires(x) || self.requires(bias);
        Ok(self.push(Tensor::new(shape, data), Op::AddBias { x, bias }, req))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let tx = self.value(x);
        let data: Vec<f64> = tx.data.iter().map(|v| v * c).collect();
        let shape = tx.shape.clone();
        let req = self.requires(x);
        self.push(Tensor::new(shape, data), Op::Scale { x, c }, req)
    }

    pub fn mul_row(&mut self, x: Var, v: Var) -> Result<Var> {
        let (tx, tv) = (self.value(x), self.value(v));
        let cols = tx.cols();
        if tv.numel() != cols {
            return Err(Self::shape_err(
                "mul_row",
                format!("{} ⊙ row {}", shape_str(&tx.shape), shape_str(&tv.shape)),
            ));
        }
        let mut data = tx.data.clone();
        for row in data.chunks_mut(cols) {
            for (o, g) in row.iter_mut().zip(&tv.data) {
                *o *= g;
            }
        }
        let shape = tx.shape.clone();
        let req = self.requires(x) || self.requires(v);
        Ok(self.push(Tensor::new(shape, data), Op::MulRow { x, v }, req))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let tx = self.value(x);
        let data: Vec<f64> = tx.data.iter().map(|&v| sigmoid(v)).collect();
        let shape = tx.shape.clone();
        let req = self.requires(x);
        self.push(Tensor::new(shape, data), Op::Sigmoid { x }, req)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let tx = self.value(x);
        let data: Vec<f64> = tx.data.iter().map(|v| v.tanh()).collect();
        let shape = tx.shape.clone();
        let req = self.requires(x);
        self.push(Tensor::new(shape, data), Op::Tanh { x }, req)
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let tx = self.value(x);
        let cols = tx.cols();
        let mut data = tx.data.clone();
        for row in data.chunks_mut(cols) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        let shape = tx.shape.clone();
        let req = self.requires(x);
        self.push(Tensor::new(shape, data), Op::SoftmaxRows { x }, req)
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        if eps <= 0.0 {
            return Err(Error::Config(format!("layer_norm eps must be > 0, got {eps}")));
        }
        let (tx, tg, tb) = (self.value(x), self.value(gain), self.value(bias));
        let cols = tx.cols();
        if tg.numel() != cols || tb.numel() != cols {
            return Err(Self::shape_err(
                "layer_norm",
                format!(
                    "x {} gain {} bias {}",
                    shape_str(&tx.shape),
                    shape_str(&tg.shape),
                    shape_str(&tb.shape)
                ),
            ));
        }
        let mut data = tx.data.clone();
        for row in data.chunks_mut(cols) {
            let (mean, rstd) = row_stats(row, eps);
            for (i, v) in row.iter_mut().enumerate() {
                *v = (*v - mean) * rstd * tg.data[i] + tb.data[i];
            }
        }
        let shape = tx.shape.clone();
        let req = self.requires(x) || self.requires(gain) || self.requires(bias);
        Ok(self.push(Tensor::new(shape, data), Op::LayerNorm { x, gain, bias, eps }, req))
    }

    pub fn ste_gate(&mut self, soft: Var) -> Var {
        let ts = self.value(soft);
        let data: Vec<f64> = ts.data.iter().map(|&v| if v > 0.5 { 1.0 } else { 0.0 }).collect();
        let shape = ts.shape.clone();
        let req = self.requires(soft);
        self.push(Tensor::new(shape, data), Op::SteGate { soft }, req)
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let tx = self.value(x);
        if shape.iter().product::<usize>() != tx.numel() {
            return Err(Self::shape_err(
                "reshape",
                format!("{} -> {}", shape_str(&tx.shape), shape_str(&shape)),
            ));
        }
        let t = Tensor::new(shape, tx.data.clone());
        let req = self.requires(x);
        Ok(self.push(t, Op::Reshape { x }, req))
    }

    /// Bilinear resize with half-pixel sample centers.
    pub fn upsample_bilinear(&mut self, x: Var, out_h: usize, out_w: usize) -> Result<Var> {
        let tx = self.value(x);
        if tx.ndim() != 2 {
            return Err(Self::shape_err(
                "upsample_bilinear",
                format!("expected 2-D grid, got {}", shape_str(&tx.shape)),
            ));
        }
        let (h, w) = (tx.shape[0], tx.shape[1]);
        let mut out = vec![0.0; out_h * out_w];
        for r in 0..out_h {
            for c in 0..out_w {
                let mut acc = 0.0;
                for (idx, wgt) in bilinear_taps(r, c, h, w, out_h, out_w) {
                    acc += wgt * tx.data[idx];
                }
                out[r * out_w + c] = acc;
            }
        }
        let req = self.requires(x);
        Ok(self.push(Tensor::new(vec![out_h, out_w], out), Op::Upsample { x, out_h, out_w }, req))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let s: f64 = self.value(x).data.iter().sum();
        let req = self.requires(x);
        self.push(Tensor::scalar(s), Op::SumAll { x }, req)
    }

    pub fn mean_all(&mut self, x: Var) -> Var {
        let tx = self.value(x);
        let s: f64 = tx.data.iter().sum();
        let n = tx.numel() as f64;
        let req = self.requires(x);
        self.push(Tensor::scalar(s / n), Op::MeanAll { x }, req)
    }

    /// Focal-modulated binary cross-entropy on logits, mean over elements.
    /// `target` must hold exact 0/1 values and is never differentiated.
    pub fn focal_loss(&mut self, logits: Var, target: Var, gamma: f64, alpha: f64) -> Result<Var> {
        let (tl, tt) = (self.value(logits), self.value(target));
        if tl.shape != tt.shape {
            return Err(Self::shape_err(
                "focal_loss",
                format!("{} vs target {}", shape_str(&tl.shape), shape_str(&tt.shape)),
            ));
        }
        if gamma < 0.0 || !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Config(format!(
                "focal_loss requires gamma >= 0 and alpha in [0,1], got gamma={gamma} alpha={alpha}"
            )));
        }
        let mut sum = 0.0;
        for (&x, &y) in tl.data.iter().zip(&tt.data) {
            let (_, _, _, l) = focal_terms(x, y, gamma, alpha);
            sum += l;
        }
        let val = sum / tl.numel() as f64;
        let req = self.requires(logits);
        Ok(self.push(Tensor::scalar(val), Op::FocalLoss { logits, target, gamma, alpha }, req))
    }

    /// Soft dice loss 1 − (2·Σpt + s)/(Σp + Σt + s) over probabilities.
    pub fn dice_loss(&mut self, probs: Var, target: Var, smooth: f64) -> Result<Var> {
        let (tp, tt) = (self.value(probs), self.value(target));
        if tp.shape != tt.shape {
            return Err(Self::shape_err(
                "dice_loss",
                format!("{} vs target {}", shape_str(&tp.shape), shape_str(&tt.shape)),
            ));
        }
        if smooth <= 0.0 {
            return Err(Error::Config(format!("dice_loss smooth must be > 0, got {smooth}")));
        }
        let inter: f64 = tp.data.iter().zip(&tt.data).map(|(p, t)| p * t).sum();
        let psum: f64 = tp.data.iter().sum();
        let tsum: f64 = tt.data.iter().sum();
        let val = 1.0 - (2.0 * inter + smooth) / (psum + tsum + smooth);
        let req = self.requires(probs);
        Ok(self.push(Tensor::scalar(val), Op::DiceLoss { probs, target, smooth }, req))
    }

    // ── Backward ────────────────────────────────────────────────────

    /// Reverse sweep from a scalar root. May be called once per tape.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::State(
                "backward already ran on this tape; gradients would double-accumulate".into(),
            ));
        }
        self.backward_done = true;
        let root_node = &mut self.nodes[root.0];
        if root_node.value.numel() != 1 {
            return Err(Error::Shape {
                op: "backward",
                detail: format!("root must be scalar, got {}", shape_str(&root_node.value.shape)),
            });
        }
        match &mut root_node.grad {
            Some(g) => g.data[0] = 1.0,
            None => return Ok(()), // nothing tracked below the root
        }

        for i in (0..self.nodes.len()).rev() {
            if self.nodes[i].grad.is_none() {
                continue;
            }
            let (before, rest) = self.nodes.split_at_mut(i);
            let node = &mut rest[0];
            let g = node.grad.as_ref().unwrap();
            step_backward(&node.op, &node.value, g, before);
        }
        Ok(())
    }
}

/// Accumulate this node's gradient into its parents. `before` holds every
/// node with a smaller index, which by construction includes all parents.
fn step_backward(op: &Op, value: &Tensor, g: &Tensor, before: &mut [Node]) {
    let add_into = |nodes: &mut [Node], v: Var, contrib: &[f64]| {
        if let Some(gr) = nodes[v.0].grad.as_mut() {
            debug_assert_eq!(gr.data.len(), contrib.len());
            for (a, b) in gr.data.iter_mut().zip(contrib) {
                *a += b;
            }
        }
    };

    match *op {
        Op::Leaf => {}
        Op::MatMulNN { a, b } => {
            // C = A·B ⇒ dA = dC·Bᵀ, dB = Aᵀ·dC
            let (m, n) = (value.shape[0], value.shape[1]);
            let k = before[a.0].value.cols();
            if before[a.0].grad.is_some() {
                let db = &before[b.0].value.data;
                let da = matmul_nt(&g.data, db, m, n, k);
                add_into(before, a, &da);
            }
            if before[b.0].grad.is_some() {
                let dav = &before[a.0].value.data;
                let dbv = matmul_tn(dav, &g.data, k, m, n);
                add_into(before, b, &dbv);
            }
        }
        Op::MatMulNT { a, b } => {
            // C = A·Bᵀ ⇒ dA = dC·B, dB = dCᵀ·A
            let (m, n) = (value.shape[0], value.shape[1]);
            let k = before[a.0].value.cols();
            if before[a.0].grad.is_some() {
                let bv = &before[b.0].value.data;
                let da = matmul_nn(&g.data, bv, m, n, k);
                add_into(before, a, &da);
            }
            if before[b.0].grad.is_some() {
                let av = &before[a.0].value.data;
                let db = matmul_tn(&g.data, av, n, m, k);
                add_into(before, b, &db);
            }
        }
        Op::Add { a, b } => {
            add_into(before, a, &g.data);
            add_into(before, b, &g.data);
        }
        Op::AddBias { x, bias } => {
            add_into(before, x, &g.data);
            if before[bias.0].grad.is_some() {
                let cols = before[bias.0].value.numel();
                let mut db = vec![0.0; cols];
                for row in g.data.chunks(cols) {
                    for (acc, v) in db.iter_mut().zip(row) {
                        *acc += v;
                    }
                }
                add_into(before, bias, &db);
            }
        }
        Op::Scale { x, c } => {
            let dx: Vec<f64> = g.data.iter().map(|v| v * c).collect();
            add_into(before, x, &dx);
        }
        Op::MulRow { x, v } => {
            let cols = before[v.0].value.numel();
            if before[x.0].grad.is_some() {
                let vv = &before[v.0].value.data;
                let mut dx = g.data.clone();
                for row in dx.chunks_mut(cols) {
                    for (o, w) in row.iter_mut().zip(vv) {
                        *o *= w;
                    }
                }
                add_into(before, x, &dx);
            }
            if before[v.0].grad.is_some() {
                let xv = &before[x.0].value.data;
                let mut dv = vec![0.0; cols];
                for (grow, xrow) in g.data.chunks(cols).zip(xv.chunks(cols)) {
                    for i in 0..cols {
                        dv[i] += grow[i] * xrow[i];
                    }
                }
                add_into(before, v, &dv);
            }
        }
        Op::Sigmoid { x } => {
            let dx: Vec<f64> = g
                .data
                .iter()
                .zip(&value.data)
                .map(|(gv, y)| gv * y * (1.0 - y))
                .collect();
            add_into(before, x, &dx);
        }
        Op::Tanh { x } => {
            let dx: Vec<f64> = g
                .data
                .iter()
                .zip(&value.data)
                .map(|(gv, y)| gv * (1.0 - y * y))
                .collect();
            add_into(before, x, &dx);
        }
        Op::SoftmaxRows { x } => {
            let cols = value.cols();
            let mut dx = vec![0.0; value.numel()];
            for ((grow, prow), orow) in g
                .data
                .chunks(cols)
                .zip(value.data.chunks(cols))
                .zip(dx.chunks_mut(cols))
            {
                let dot: f64 = grow.iter().zip(prow).map(|(a, b)| a * b).sum();
                for i in 0..cols {
                    orow[i] = prow[i] * (grow[i] - dot);
                }
            }
            add_into(before, x, &dx);
        }
        Op::LayerNorm { x, gain, bias, eps } => {
            let xv = &before[x.0].value;
            let gv = &before[gain.0].value.data;
            let cols = xv.cols();
            let rows = xv.numel() / cols;
            let mut dx = vec![0.0; xv.numel()];
            let mut dgain = vec![0.0; cols];
            let mut dbias = vec![0.0; cols];
            for r in 0..rows {
                let xrow = &xv.data[r * cols..(r + 1) * cols];
                let grow = &g.data[r * cols..(r + 1) * cols];
                let (mean, rstd) = row_stats(xrow, eps);
                // dxhat = g ⊙ gain; dx = rstd·(dxhat − mean(dxhat) − xhat·mean(dxhat⊙xhat))
                let mut m1 = 0.0;
                let mut m2 = 0.0;
                for i in 0..cols {
                    let xhat = (xrow[i] - mean) * rstd;
                    let dxhat = grow[i] * gv[i];
                    m1 += dxhat;
                    m2 += dxhat * xhat;
                    dgain[i] += grow[i] * xhat;
                    dbias[i] += grow[i];
                }
                m1 /= cols as f64;
                m2 /= cols as f64;
                let drow = &mut dx[r * cols..(r + 1) * cols];
                for i in 0..cols {
                    let xhat = (xrow[i] - mean) * rstd;
                    let dxhat = grow[i] * gv[i];
                    drow[i] = rstd * (dxhat - m1 - xhat * m2);
                }
            }
            add_into(before, x, &dx);
            add_into(before, gain, &dgain);
            add_into(before, bias, &dbias);
        }
        Op::SteGate { soft } => {
            add_into(before, soft, &g.data);
        }
        Op::Reshape { x } => {
            add_into(before, x, &g.data);
        }
        Op::Upsample { x, out_h, out_w } => {
            let xv = &before[x.0].value;
            let (h, w) = (xv.shape[0], xv.shape[1]);
            let mut dx = vec![0.0; h * w];
            for r in 0..out_h {
                for c in 0..out_w {
                    let gv = g.data[r * out_w + c];
                    for (idx, wgt) in bilinear_taps(r, c, h, w, out_h, out_w) {
                        dx[idx] += wgt * gv;
                    }
                }
            }
            add_into(before, x, &dx);
        }
        Op::SumAll { x } => {
            let n = before[x.0].value.numel();
            let dx = vec![g.data[0]; n];
            add_into(before, x, &dx);
        }
        Op::MeanAll { x } => {
            let n = before[x.0].value.numel();
            let dx = vec![g.data[0] / n as f64; n];
            add_into(before, x, &dx);
        }
        Op::FocalLoss { logits, target, gamma, alpha } => {
            if before[logits.0].grad.is_some() {
                let lv = &before[logits.0].value.data;
                let tv = &before[target.0].value.data;
                let n = lv.len() as f64;
                let g0 = g.data[0] / n;
                let dx: Vec<f64> = lv
                    .iter()
                    .zip(tv)
                    .map(|(&x, &y)| {
                        let (pt, q, ce, _) = focal_terms(x, y, gamma, alpha);
                        let at = if y > 0.5 { alpha } else { 1.0 - alpha };
                        let s = if y > 0.5 { 1.0 } else { -1.0 };
                        // d/dz[qᵞ·ce] = −qᵞ(γ·p_t·ce + q), z = s·x
                        -g0 * at * s * q.powf(gamma) * (gamma * pt * ce + q)
                    })
                    .collect();
                add_into(before, logits, &dx);
            }
        }
        Op::DiceLoss { probs, target, smooth } => {
            if before[probs.0].grad.is_some() {
                let pv = &before[probs.0].value.data;
                let tv = &before[target.0].value.data;
                let inter: f64 = pv.iter().zip(tv).map(|(p, t)| p * t).sum();
                let psum: f64 = pv.iter().sum();
                let tsum: f64 = tv.iter().sum();
                let denom = psum + tsum + smooth;
                let num = 2.0 * inter + smooth;
                let g0 = g.data[0];
                let dx: Vec<f64> = tv
                    .iter()
                    .map(|&t| -g0 * (2.0 * t * denom - num) / (denom * denom))
                    .collect();
                add_into(before, probs, &dx);
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Per-element focal pieces: (p_t, 1−p_t, −log p_t, loss).
fn focal_terms(x: f64, y: f64, gamma: f64, alpha: f64) -> (f64, f64, f64, f64) {
    let s = if y > 0.5 { 1.0 } else { -1.0 };
    let z = s * x;
    let pt = sigmoid(z);
    let q = sigmoid(-z);
    let ce = softplus(-z);
    let at = if y > 0.5 { alpha } else { 1.0 - alpha };
    (pt, q, ce, at * q.powf(gamma) * ce)
}

fn row_stats(row: &[f64], eps: f64) -> (f64, f64) {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, 1.0 / (var + eps).sqrt())
}

/// Up to four (index, weight) taps for one output pixel of a bilinear
/// resize with half-pixel centers, clamped at the border.
fn bilinear_taps(
    r: usize,
    c: usize,
    h: usize,
    w: usize,
    out_h: usize,
    out_w: usize,
) -> [(usize, f64); 4] {
    let fy = ((r as f64 + 0.5) * h as f64 / out_h as f64 - 0.5).clamp(0.0, (h - 1) as f64);
    let fx = ((c as f64 + 0.5) * w as f64 / out_w as f64 - 0.5).clamp(0.0, (w - 1) as f64);
    let y0 = fy.floor() as usize;
    let x0 = fx.floor() as usize;
    let y1 = (y0 + 1).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let wy = fy - y0 as f64;
    let wx = fx - x0 as f64;
    [
        (y0 * w + x0, (1.0 - wy) * (1.0 - wx)),
        (y0 * w + x1, (1.0 - wy) * wx),
        (y1 * w + x0, wy * (1.0 - wx)),
        (y1 * w + x1, wy * wx),
    ]
}
