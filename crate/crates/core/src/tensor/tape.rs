use std::sync::atomic::{AtomicUsize, Ordering};

use super::{softmax_in_place, Tensor};
use crate::error::{Error, Result};

static NEXT_TAPE_ID: AtomicUsize = AtomicUsize::new(0);

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    tape: usize,
    index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Reduction {
    Mean,
    Max,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Reshape(usize),
    Linear {
        x: usize,
        w: usize,
        b: usize,
    },
    Relu(usize),
    Conv1d {
        x: usize,
        kernel: usize,
        bias: usize,
    },
    Reduce {
        x: usize,
        axis_len: usize,
        inner: usize,
        mode: Reduction,
        // For max: flat input index feeding each output element.
        winners: Vec<usize>,
    },
    Stack(Vec<usize>),
    SoftmaxCrossEntropy {
        logits: usize,
        labels: Vec<usize>,
        weights: Vec<f64>,
        probs: Vec<f64>,
    },
    Add(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Sum(usize),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Records operations in execution order so `backward` can replay them in reverse.
///
/// A tape is single-threaded; build one per graph.
#[derive(Debug)]
pub struct Tape {
    id: usize,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn check(&self, var: Var) -> usize {
        assert_eq!(var.tape, self.id, "Var used with a tape that did not create it");
        var.index
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let index = self.nodes.len();
        self.nodes.push(Node { value, op });
        Var {
            tape: self.id,
            index,
        }
    }

    fn needs_grad(&self, inputs: &[usize]) -> bool {
        inputs.iter().any(|&i| self.nodes[i].value.requires_grad())
    }

    /// Records a leaf. Its `requires_grad` flag is taken from the tensor.
    pub fn leaf(&mut self, tensor: Tensor) -> Var {
        let mut tensor = tensor;
        tensor.zero_grad();
        self.push(tensor, Op::Leaf)
    }

    pub fn constant(&mut self, tensor: Tensor) -> Var {
        self.leaf(tensor.with_requires_grad(false))
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[self.check(var)].value
    }

    pub fn data(&self, var: Var) -> &[f64] {
        self.value(var).data()
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.value(var).shape()
    }

    /// Gradient accumulated by previous `backward` calls, if any.
    pub fn grad(&self, var: Var) -> Option<&[f64]> {
        self.value(var).grad()
    }

    pub fn zero_grads(&mut self) {
        for node in &mut self.nodes {
            node.value.zero_grad();
        }
    }

    fn derived(&self, shape: &[usize], data: Vec<f64>, inputs: &[usize]) -> Tensor {
        Tensor::new(shape, data)
            .expect("op produced consistent shape")
            .with_requires_grad(self.needs_grad(inputs))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let xi = self.check(x);
        let src = &self.nodes[xi].value;
        let numel: usize = shape.iter().product();
        if numel != src.numel() || shape.contains(&0) {
            return Err(Error::shape("reshape", src.shape(), shape));
        }
        let out = self.derived(shape, src.data().to_vec(), &[xi]);
        Ok(self.push(out, Op::Reshape(xi)))
    }

    /// `x[B×I] · w[I×O] + b[O]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xi, wi, bi) = (self.check(x), self.check(w), self.check(b));
        let (xs, ws, bs) = (
            self.nodes[xi].value.shape(),
            self.nodes[wi].value.shape(),
            self.nodes[bi].value.shape(),
        );
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[0] {
            return Err(Error::shape("linear", xs, ws));
        }
        if bs != [ws[1]] {
            return Err(Error::shape("linear bias", ws, bs));
        }
        let (batch, inputs, outputs) = (xs[0], xs[1], ws[1]);
        let xd = self.nodes[xi].value.data();
        let wd = self.nodes[wi].value.data();
        let bd = self.nodes[bi].value.data();
        let mut out = vec![0.0; batch * outputs];
        for (row, out_row) in out.chunks_mut(outputs).enumerate() {
            out_row.copy_from_slice(bd);
            for (i, &xv) in xd[row * inputs..(row + 1) * inputs].iter().enumerate() {
                let w_row = &wd[i * outputs..(i + 1) * outputs];
                for (o, &wv) in out_row.iter_mut().zip(w_row) {
                    *o += xv * wv;
                }
            }
        }
        let out = self.derived(&[batch, outputs], out, &[xi, wi, bi]);
        Ok(self.push(out, Op::Linear { x: xi, w: wi, b: bi }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let xi = self.check(x);
        let src = &self.nodes[xi].value;
        let data = src.data().iter().map(|&v| v.max(0.0)).collect();
        let out = self.derived(src.shape(), data, &[xi]);
        self.push(out, Op::Relu(xi))
    }

    /// Odd-width convolution along time over `x[T×C]` with `kernel[K×C×C']`.
    ///
    /// The `T−K+1` valid outputs are centred in a length-`T` result; the
    /// `K/2` positions at each end are zero.
    pub fn temporal_conv1d(&mut self, x: Var, kernel: Var, bias: Var) -> Result<Var> {
        let (xi, ki, bi) = (self.check(x), self.check(kernel), self.check(bias));
        let (xs, ks, bs) = (
            self.nodes[xi].value.shape(),
            self.nodes[ki].value.shape(),
            self.nodes[bi].value.shape(),
        );
        if xs.len() != 2 || ks.len() != 3 || ks[1] != xs[1] {
            return Err(Error::shape("temporal_conv1d", xs, ks));
        }
        if bs != [ks[2]] {
            return Err(Error::shape("temporal_conv1d bias", ks, bs));
        }
        let (steps, c_in) = (xs[0], xs[1]);
        let (width, c_out) = (ks[0], ks[2]);
        if width % 2 == 0 {
            return Err(Error::Config(format!("temporal kernel width must be odd, got {width}")));
        }
        if width > steps {
            return Err(Error::Config(format!(
                "temporal kernel width {width} exceeds sequence length {steps}"
            )));
        }
        let half = width / 2;
        let xd = self.nodes[xi].value.data();
        let kd = self.nodes[ki].value.data();
        let bd = self.nodes[bi].value.data();
        let mut out = vec![0.0; steps * c_out];
        for t in half..steps - half {
            let out_row = &mut out[t * c_out..(t + 1) * c_out];
            out_row.copy_from_slice(bd);
            for k in 0..width {
                let src = t + k - half;
                for c in 0..c_in {
                    let xv = xd[src * c_in + c];
                    let k_row = &kd[(k * c_in + c) * c_out..(k * c_in + c + 1) * c_out];
                    for (o, &kv) in out_row.iter_mut().zip(k_row) {
                        *o += xv * kv;
                    }
                }
            }
        }
        let out = self.derived(&[steps, c_out], out, &[xi, ki, bi]);
        Ok(self.push(
            out,
            Op::Conv1d {
                x: xi,
                kernel: ki,
                bias: bi,
            },
        ))
    }

    /// Mean or max along `axis`. Max routes gradient to the lowest-index winner.
    pub fn reduce(&mut self, x: Var, axis: usize, mode: Reduction) -> Result<Var> {
        let xi = self.check(x);
        let shape = self.nodes[xi].value.shape().to_vec();
        if axis >= shape.len() {
            return Err(Error::Domain(format!(
                "reduce axis {axis} invalid for shape {shape:?}"
            )));
        }
        let outer: usize = shape[..axis].iter().product();
        let axis_len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        if axis_len == 0 {
            return Err(Error::Domain("reduce over an empty axis".into()));
        }
        let xd = self.nodes[xi].value.data();
        let mut out = vec![0.0; outer * inner];
        let mut winners = Vec::new();
        match mode {
            Reduction::Mean => {
                for o in 0..outer {
                    for a in 0..axis_len {
                        let base = (o * axis_len + a) * inner;
                        for j in 0..inner {
                            out[o * inner + j] += xd[base + j];
                        }
                    }
                }
                let n = axis_len as f64;
                out.iter_mut().for_each(|v| *v /= n);
            }
            Reduction::Max => {
                winners = vec![0; outer * inner];
                for o in 0..outer {
                    for j in 0..inner {
                        let mut best = o * axis_len * inner + j;
                        for a in 1..axis_len {
                            let idx = (o * axis_len + a) * inner + j;
                            if xd[idx] > xd[best] {
                                best = idx;
                            }
                        }
                        out[o * inner + j] = xd[best];
                        winners[o * inner + j] = best;
                    }
                }
            }
        }
        let mut out_shape: Vec<usize> = shape[..axis].iter().chain(&shape[axis + 1..]).copied().collect();
        if out_shape.is_empty() {
            out_shape.push(1);
        }
        let out = self.derived(&out_shape, out, &[xi]);
        Ok(self.push(
            out,
            Op::Reduce {
                x: xi,
                axis_len,
                inner,
                mode,
                winners,
            },
        ))
    }

    /// Stacks equally-shaped values along a new leading axis.
    pub fn stack(&mut self, items: &[Var]) -> Result<Var> {
        let idx: Vec<usize> = items.iter().map(|&v| self.check(v)).collect();
        let values: Vec<Tensor> = idx.iter().map(|&i| self.nodes[i].value.clone()).collect();
        let stacked = Tensor::stack(&values)?;
        let shape = stacked.shape().to_vec();
        let out = self.derived(&shape, stacked.into_data(), &idx);
        Ok(self.push(out, Op::Stack(idx)))
    }

    /// Mean over the batch of `-ln softmax(logits)[label]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        self.weighted_softmax_cross_entropy(logits, labels, None)
    }

    /// Like [`Tape::softmax_cross_entropy`], with an optional per-class weight on each row.
    pub fn weighted_softmax_cross_entropy(
        &mut self,
        logits: Var,
        labels: &[usize],
        class_weights: Option<&[f64]>,
    ) -> Result<Var> {
        let li = self.check(logits);
        let shape = self.nodes[li].value.shape();
        if shape.len() != 2 || shape[0] != labels.len() {
            return Err(Error::shape("softmax_cross_entropy", shape, &[labels.len()]));
        }
        let (batch, classes) = (shape[0], shape[1]);
        if let Some(w) = class_weights {
            if w.len() != classes {
                return Err(Error::shape("class weights", &[classes], &[w.len()]));
            }
        }
        if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(Error::Label {
                label,
                classes,
                row,
            });
        }
        let mut probs = self.nodes[li].value.data().to_vec();
        let mut weights = Vec::with_capacity(batch);
        let mut total = 0.0;
        for (row, &label) in probs.chunks_mut(classes).zip(labels) {
            let logit_row = row.to_vec();
            softmax_in_place(row);
            // log-sum-exp form avoids ln(0) when one class dominates
            let max = logit_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logit_row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            let w = class_weights.map_or(1.0, |w| w[label]);
            weights.push(w);
            total += w * (lse - logit_row[label]);
        }
        let out = self.derived(&[1], vec![total / batch as f64], &[li]);
        Ok(self.push(
            out,
            Op::SoftmaxCrossEntropy {
                logits: li,
                labels: labels.to_vec(),
                weights,
                probs,
            },
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.check(a), self.check(b));
        let (av, bv) = (&self.nodes[ai].value, &self.nodes[bi].value);
        if av.shape() != bv.shape() {
            return Err(Error::shape("add", av.shape(), bv.shape()));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x + y).collect();
        let out = self.derived(av.shape(), data, &[ai, bi]);
        Ok(self.push(out, Op::Add(ai, bi)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.check(a), self.check(b));
        let (av, bv) = (&self.nodes[ai].value, &self.nodes[bi].value);
        if av.shape() != bv.shape() {
            return Err(Error::shape("mul", av.shape(), bv.shape()));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let out = self.derived(av.shape(), data, &[ai, bi]);
        Ok(self.push(out, Op::Mul(ai, bi)))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let xi = self.check(x);
        let src = &self.nodes[xi].value;
        let data = src.data().iter().map(|v| v * factor).collect();
        let out = self.derived(src.shape(), data, &[xi]);
        self.push(out, Op::Scale(xi, factor))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let xi = self.check(x);
        let total = self.nodes[xi].value.data().iter().sum();
        let out = self.derived(&[1], vec![total], &[xi]);
        self.push(out, Op::Sum(xi))
    }

    /// Propagates d(loss)/d(node) to every node that requires a gradient,
    /// visiting operations in reverse execution order. Gradients add onto
    /// whatever earlier calls left behind.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let root = self.check(loss);
        if self.nodes[root].value.numel() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[root].value.shape()
            )));
        }
        if !self.nodes[root].value.requires_grad() {
            return Ok(());
        }
        let mut adjoints: Vec<Option<Vec<f64>>> = vec![None; root + 1];
        adjoints[root] = Some(vec![1.0]);

        for index in (0..=root).rev() {
            let Some(upstream) = adjoints[index].take() else {
                continue;
            };
            if !self.nodes[index].value.requires_grad() {
                continue;
            }
            self.propagate(index, &upstream, &mut adjoints);
            self.nodes[index]
                .value
                .accumulate_grad(&upstream)
                .expect("adjoint matches value shape");
        }
        Ok(())
    }

    fn propagate(&self, index: usize, dy: &[f64], adjoints: &mut [Option<Vec<f64>>]) {
        let wants = |i: usize| self.nodes[i].value.requires_grad();
        let data = |i: usize| self.nodes[i].value.data();
        match &self.nodes[index].op {
            Op::Leaf => {}
            Op::Reshape(x) => add_adjoint(adjoints, *x, || dy.to_vec()),
            Op::Linear { x, w, b } => {
                let xs = self.nodes[*x].value.shape();
                let (batch, inputs) = (xs[0], xs[1]);
                let outputs = dy.len() / batch;
                if wants(*x) {
                    let wd = data(*w);
                    add_adjoint(adjoints, *x, || {
                        let mut dx = vec![0.0; batch * inputs];
                        for (row, dx_row) in dx.chunks_mut(inputs).enumerate() {
                            let dy_row = &dy[row * outputs..(row + 1) * outputs];
                            for (i, d) in dx_row.iter_mut().enumerate() {
                                let w_row = &wd[i * outputs..(i + 1) * outputs];
                                *d = w_row.iter().zip(dy_row).map(|(a, b)| a * b).sum();
                            }
                        }
                        dx
                    });
                }
                if wants(*w) {
                    let xd = data(*x);
                    add_adjoint(adjoints, *w, || {
                        let mut dw = vec![0.0; inputs * outputs];
                        for row in 0..batch {
                            let dy_row = &dy[row * outputs..(row + 1) * outputs];
                            for (i, &xv) in xd[row * inputs..(row + 1) * inputs].iter().enumerate() {
                                let dw_row = &mut dw[i * outputs..(i + 1) * outputs];
                                for (g, &d) in dw_row.iter_mut().zip(dy_row) {
                                    *g += xv * d;
                                }
                            }
                        }
                        dw
                    });
                }
                if wants(*b) {
                    add_adjoint(adjoints, *b, || {
                        let mut db = vec![0.0; outputs];
                        for dy_row in dy.chunks(outputs) {
                            db.iter_mut().zip(dy_row).for_each(|(g, d)| *g += d);
                        }
                        db
                    });
                }
            }
            Op::Relu(x) => {
                let xd = data(*x);
                add_adjoint(adjoints, *x, || {
                    xd.iter()
                        .zip(dy)
                        .map(|(&v, &d)| if v > 0.0 { d } else { 0.0 })
                        .collect()
                });
            }
            Op::Conv1d { x, kernel, bias } => {
                let xs = self.nodes[*x].value.shape();
                let ks = self.nodes[*kernel].value.shape();
                let (steps, c_in) = (xs[0], xs[1]);
                let (width, c_out) = (ks[0], ks[2]);
                let half = width / 2;
                let valid = half..steps - half;
                if wants(*x) {
                    let kd = data(*kernel);
                    add_adjoint(adjoints, *x, || {
                        let mut dx = vec![0.0; steps * c_in];
                        for t in valid.clone() {
                            let dy_row = &dy[t * c_out..(t + 1) * c_out];
                            for k in 0..width {
                                let src = t + k - half;
                                for c in 0..c_in {
                                    let k_row = &kd[(k * c_in + c) * c_out..(k * c_in + c + 1) * c_out];
                                    dx[src * c_in + c] +=
                                        k_row.iter().zip(dy_row).map(|(a, b)| a * b).sum::<f64>();
                                }
                            }
                        }
                        dx
                    });
                }
                if wants(*kernel) {
                    let xd = data(*x);
                    add_adjoint(adjoints, *kernel, || {
                        let mut dk = vec![0.0; width * c_in * c_out];
                        for t in valid.clone() {
                            let dy_row = &dy[t * c_out..(t + 1) * c_out];
                            for k in 0..width {
                                let src = t + k - half;
                                for c in 0..c_in {
                                    let xv = xd[src * c_in + c];
                                    let dk_row = &mut dk[(k * c_in + c) * c_out..(k * c_in + c + 1) * c_out];
                                    for (g, &d) in dk_row.iter_mut().zip(dy_row) {
                                        *g += xv * d;
                                    }
                                }
                            }
                        }
                        dk
                    });
                }
                if wants(*bias) {
                    add_adjoint(adjoints, *bias, || {
                        let mut db = vec![0.0; c_out];
                        for t in valid.clone() {
                            for (g, d) in db.iter_mut().zip(&dy[t * c_out..(t + 1) * c_out]) {
                                *g += d;
                            }
                        }
                        db
                    });
                }
            }
            Op::Reduce {
                x,
                axis_len,
                inner,
                mode,
                winners,
            } => {
                let numel = self.nodes[*x].value.numel();
                add_adjoint(adjoints, *x, || {
                    let mut dx = vec![0.0; numel];
                    match mode {
                        Reduction::Mean => {
                            let n = *axis_len as f64;
                            let outer = numel / (axis_len * inner);
                            for o in 0..outer {
                                for a in 0..*axis_len {
                                    let base = (o * axis_len + a) * inner;
                                    for j in 0..*inner {
                                        dx[base + j] = dy[o * inner + j] / n;
                                    }
                                }
                            }
                        }
                        Reduction::Max => {
                            for (&src, &d) in winners.iter().zip(dy) {
                                dx[src] += d;
                            }
                        }
                    }
                    dx
                });
            }
            Op::Stack(items) => {
                let mut offset = 0;
                for &item in items {
                    let n = self.nodes[item].value.numel();
                    if wants(item) {
                        add_adjoint(adjoints, item, || dy[offset..offset + n].to_vec());
                    }
                    offset += n;
                }
            }
            Op::SoftmaxCrossEntropy {
                logits,
                labels,
                weights,
                probs,
            } => {
                let batch = labels.len();
                let classes = probs.len() / batch;
                let scale = dy[0] / batch as f64;
                add_adjoint(adjoints, *logits, || {
                    let mut g = probs.clone();
                    for (row, (&label, &w)) in labels.iter().zip(weights).enumerate() {
                        let g_row = &mut g[row * classes..(row + 1) * classes];
                        g_row[label] -= 1.0;
                        g_row.iter_mut().for_each(|v| *v *= w * scale);
                    }
                    g
                });
            }
            Op::Add(a, b) => {
                if wants(*a) {
                    add_adjoint(adjoints, *a, || dy.to_vec());
                }
                if wants(*b) {
                    add_adjoint(adjoints, *b, || dy.to_vec());
                }
            }
            Op::Mul(a, b) => {
                if wants(*a) {
                    let bd = data(*b);
                    add_adjoint(adjoints, *a, || bd.iter().zip(dy).map(|(v, d)| v * d).collect());
                }
                if wants(*b) {
                    let ad = data(*a);
                    add_adjoint(adjoints, *b, || ad.iter().zip(dy).map(|(v, d)| v * d).collect());
                }
            }
            Op::Scale(x, factor) => {
                add_adjoint(adjoints, *x, || dy.iter().map(|d| d * factor).collect());
            }
            Op::Sum(x) => {
                let n = self.nodes[*x].value.numel();
                add_adjoint(adjoints, *x, || vec![dy[0]; n]);
            }
        }
    }
}

fn add_adjoint(adjoints: &mut [Option<Vec<f64>>], index: usize, delta: impl FnOnce() -> Vec<f64>) {
    let delta = delta();
    match &mut adjoints[index] {
        Some(existing) => existing.iter_mut().zip(&delta).for_each(|(e, d)| *e += d),
        slot @ None => *slot = Some(delta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(shape: &[usize], data: Vec<f64>) -> Tensor {
        Tensor::new(shape, data).unwrap().with_requires_grad(true)
    }

    #[test]
    fn linear_identity_and_affine() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap());
        let w = tape.constant(Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap());
        let b = tape.constant(Tensor::zeros(&[2]));
        let y = tape.linear(x, w, b).unwrap();
        assert_eq!(tape.data(y), &[1.0, 2.0]);

        let w = tape.constant(Tensor::new(&[2, 1], vec![3.0, 4.0]).unwrap());
        let b = tape.constant(Tensor::scalar(1.0));
        let y = tape.linear(x, w, b).unwrap();
        assert_eq!(tape.data(y), &[12.0]);
    }

    #[test]
    fn linear_shape_error_names_both_shapes() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[1, 3]));
        let w = tape.constant(Tensor::zeros(&[2, 2]));
        let b = tape.constant(Tensor::zeros(&[2]));
        let err = tape.linear(x, w, b).unwrap_err().to_string();
        assert!(err.contains("[1, 3]") && err.contains("[2, 2]"), "{err}");
    }

    #[test]
    fn relu_forward_and_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(param(&[3], vec![-1.0, 0.0, 2.0]));
        let y = tape.relu(x);
        assert_eq!(tape.data(y), &[0.0, 0.0, 2.0]);
        let s = tape.sum(y);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[0.0, 0.0, 1.0]);

        let mut tape = Tape::new();
        let x = tape.leaf(param(&[2], vec![3.0, -3.0]));
        let y = tape.relu(x);
        let s = tape.sum(y);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn relu_positive_is_identity() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_vec(vec![0.5, 1.5, 9.0]));
        let y = tape.relu(x);
        assert_eq!(tape.data(y), tape.data(x));
    }

    #[test]
    fn conv_identity_and_window_sum() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(&[3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let k = tape.constant(Tensor::new(&[1, 2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let b = tape.constant(Tensor::zeros(&[2]));
        let y = tape.temporal_conv1d(x, k, b).unwrap();
        assert_eq!(tape.data(y), tape.data(x));

        let x = tape.constant(Tensor::new(&[3, 1], vec![1.0, 2.0, 3.0]).unwrap());
        let k = tape.constant(Tensor::new(&[3, 1, 1], vec![1.0, 1.0, 1.0]).unwrap());
        let b = tape.constant(Tensor::zeros(&[1]));
        let y = tape.temporal_conv1d(x, k, b).unwrap();
        assert_eq!(tape.data(y), &[0.0, 6.0, 0.0]);
    }

    #[test]
    fn conv_rejects_bad_widths() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[3, 1]));
        let even = tape.constant(Tensor::zeros(&[2, 1, 1]));
        let wide = tape.constant(Tensor::zeros(&[5, 1, 1]));
        let b = tape.constant(Tensor::zeros(&[1]));
        assert!(matches!(tape.temporal_conv1d(x, even, b), Err(Error::Config(_))));
        assert!(matches!(tape.temporal_conv1d(x, wide, b), Err(Error::Config(_))));
    }

    #[test]
    fn reduce_max_and_mean() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_rows(&[vec![1.0, -2.0, 3.0], vec![0.0, 5.0, -1.0]]).unwrap());
        let m = tape.reduce(x, 0, Reduction::Max).unwrap();
        assert_eq!(tape.data(m), &[1.0, 5.0, 3.0]);

        let x = tape.constant(Tensor::from_rows(&[vec![0.5, 2.0], vec![0.5, 2.0]]).unwrap());
        let m = tape.reduce(x, 0, Reduction::Mean).unwrap();
        assert_eq!(tape.data(m), &[0.5, 2.0]);
        assert!(tape.reduce(x, 2, Reduction::Mean).is_err());
    }

    #[test]
    fn max_tie_routes_to_lowest_index() {
        let mut tape = Tape::new();
        let x = tape.leaf(param(&[3], vec![2.0, 5.0, 5.0]));
        let m = tape.reduce(x, 0, Reduction::Max).unwrap();
        tape.backward(m).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn cross_entropy_values() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::zeros(&[1, 4]));
        let l = tape.softmax_cross_entropy(z, &[2]).unwrap();
        assert!((tape.data(l)[0] - 4f64.ln()).abs() < 1e-12);

        let z = tape.constant(Tensor::from_rows(&[vec![10.0, 0.0]]).unwrap());
        let l = tape.softmax_cross_entropy(z, &[0]).unwrap();
        let expected = -(10f64.exp() / (10f64.exp() + 1.0)).ln();
        assert!((tape.data(l)[0] - expected).abs() < 1e-15);
        assert!((tape.data(l)[0] - 4.54e-5).abs() < 1e-7);
    }

    #[test]
    fn cross_entropy_rejects_bad_label() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::zeros(&[2, 3]));
        match tape.softmax_cross_entropy(z, &[0, 3]) {
            Err(Error::Label { label: 3, row: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sum_and_product_rule() {
        let mut tape = Tape::new();
        let x = tape.leaf(param(&[3], vec![1.0, 2.0, 3.0]));
        let s = tape.sum(x);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[1.0, 1.0, 1.0]);

        let mut tape = Tape::new();
        let x = tape.leaf(param(&[1], vec![3.0]));
        let y = tape.leaf(param(&[1], vec![-2.0]));
        let p = tape.mul(x, y).unwrap();
        tape.backward(p).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[-2.0]);
        assert_eq!(tape.grad(y).unwrap(), &[3.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut tape = Tape::new();
        let x = tape.leaf(param(&[2], vec![1.0, 2.0]));
        assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn second_backward_doubles_grads() {
        let mut tape = Tape::new();
        let x = tape.leaf(param(&[1, 2], vec![0.3, -0.7]));
        let w = tape.leaf(param(&[2, 3], vec![0.1, 0.2, 0.3, -0.4, 0.5, -0.6]));
        let b = tape.leaf(param(&[3], vec![0.0, 0.1, 0.2]));
        let y = tape.linear(x, w, b).unwrap();
        let l = tape.softmax_cross_entropy(y, &[1]).unwrap();
        tape.backward(l).unwrap();
        let once: Vec<f64> = tape.grad(w).unwrap().to_vec();
        tape.backward(l).unwrap();
        let twice = tape.grad(w).unwrap();
        for (a, b) in once.iter().zip(twice) {
            assert_eq!(2.0 * a, *b);
        }
    }
}
