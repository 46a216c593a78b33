//! Reverse-mode automatic differentiation over small dense tensors.
//!
//! Tensors are `[batch, rows, cols]`, row-major. A [`Tape`] records the ops of
//! one forward pass; parameters are referenced by index into an external
//! slice and are never copied onto the tape.

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: [usize; 3],
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: [usize; 3]) -> Self {
        Self { shape, data: vec![0.0; shape.iter().product()] }
    }

    pub fn from_vec(shape: [usize; 3], data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/data mismatch");
        Self { shape, data }
    }

    pub fn scalar(v: f64) -> Self {
        Self { shape: [1, 1, 1], data: vec![v] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// Handle to a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(usize),
    /// `x·W + b` over the last axis; W is `[1, in, out]`, b is `[1, 1, out]`
    Affine { x: Var, w: Var, b: Var },
    /// causal dilated convolution along rows; W is `[k, in, out]`
    Conv1d { x: Var, w: Var, b: Var, dilation: usize },
    Relu(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    LastRow(Var),
    Flatten(Var),
    Sum(Var),
    /// mean of squared differences against a constant target
    Mse { pred: Var, target: Tensor },
}

struct Node {
    op: Op,
    /// `None` for parameters, whose values live in the external slice
    value: Option<Tensor>,
}

pub struct Tape<'p> {
    params: &'p [Tensor],
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p [Tensor]) -> Self {
        Self { params, nodes: Vec::with_capacity(64) }
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match node.op {
            Op::Param(i) => &self.params[i],
            _ => node.value.as_ref().expect("non-parameter nodes hold values"),
        }
    }

    fn push(&mut self, op: Op, value: Option<Tensor>) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(Op::Input, Some(t))
    }

    pub fn param(&mut self, index: usize) -> Var {
        assert!(index < self.params.len(), "parameter index out of range");
        self.push(Op::Param(index), None)
    }

    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Var {
        let out = affine_forward(self.value(x), self.value(w), self.value(b));
        self.push(Op::Affine { x, w, b }, Some(out))
    }

    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, dilation: usize) -> Var {
        let out = conv_forward(self.value(x), self.value(w), self.value(b), dilation);
        self.push(Op::Conv1d { x, w, b, dilation }, Some(out))
    }

    fn map(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let v = self.value(x);
        let out = Tensor { shape: v.shape, data: v.data.iter().map(|a| f(*a)).collect() };
        self.push(op, Some(out))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map(x, |a| if a > 0.0 { a } else { 0.0 }, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.map(x, |a| 1.0 / (1.0 + (-a).exp()), Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.map(x, f64::tanh, Op::Tanh(x))
    }

    fn zip(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape, vb.shape, "elementwise shape mismatch");
        let out = Tensor { shape: va.shape, data: va.data.iter().zip(&vb.data).map(|(x, y)| f(*x, *y)).collect() };
        self.push(op, Some(out))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn last_row(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let [bn, r, c] = v.shape;
        let mut out = Tensor::zeros([bn, 1, c]);
        for b in 0..bn {
            let src = (b * r + r - 1) * c;
            out.data[b * c..(b + 1) * c].copy_from_slice(&v.data[src..src + c]);
        }
        self.push(Op::LastRow(x), Some(out))
    }

    pub fn flatten(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let [bn, r, c] = v.shape;
        let out = Tensor { shape: [bn, 1, r * c], data: v.data.clone() };
        self.push(Op::Flatten(x), Some(out))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data.iter().sum();
        self.push(Op::Sum(x), Some(Tensor::scalar(s)))
    }

    pub fn mse(&mut self, pred: Var, target: Tensor) -> Var {
        let p = self.value(pred);
        assert_eq!(p.shape, target.shape, "mse shape mismatch");
        let n = p.len().max(1) as f64;
        let s = p.data.iter().zip(&target.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
        self.push(Op::Mse { pred, target }, Some(Tensor::scalar(s)))
    }

    /// Gradients of the scalar `loss` with respect to every parameter, in
    /// parameter order. Parameters not reached get zero gradients.
    pub fn backward(&self, loss: Var) -> Vec<Tensor> {
        assert_eq!(self.value(loss).len(), 1, "loss must be a scalar");
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut param_grads: Vec<Tensor> = self.params.iter().map(|p| Tensor::zeros(p.shape)).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let acc = |v: Var, delta: Tensor, grads: &mut Vec<Option<Tensor>>| match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            };
            match &self.nodes[idx].op {
                Op::Input => {}
                Op::Param(i) => param_grads[*i].add_assign(&g),
                Op::Affine { x, w, b } => {
                    let (dx, dw, db) = affine_backward(self.value(*x), self.value(*w), &g);
                    acc(*x, dx, &mut grads);
                    acc(*w, dw, &mut grads);
                    acc(*b, db, &mut grads);
                }
                Op::Conv1d { x, w, b, dilation } => {
                    let (dx, dw, db) = conv_backward(self.value(*x), self.value(*w), &g, *dilation);
                    acc(*x, dx, &mut grads);
                    acc(*w, dw, &mut grads);
                    acc(*b, db, &mut grads);
                }
                Op::Relu(x) => {
                    // subgradient 0 at exactly 0
                    let v = self.value(*x);
                    let d = v.data.iter().zip(&g.data).map(|(a, gg)| if *a > 0.0 { *gg } else { 0.0 }).collect();
                    acc(*x, Tensor { shape: v.shape, data: d }, &mut grads);
                }
                Op::Sigmoid(x) => {
                    let y = self.nodes[idx].value.as_ref().expect("value");
                    let d = y.data.iter().zip(&g.data).map(|(s, gg)| gg * s * (1.0 - s)).collect();
                    acc(*x, Tensor { shape: y.shape, data: d }, &mut grads);
                }
                Op::Tanh(x) => {
                    let y = self.nodes[idx].value.as_ref().expect("value");
                    let d = y.data.iter().zip(&g.data).map(|(t, gg)| gg * (1.0 - t * t)).collect();
                    acc(*x, Tensor { shape: y.shape, data: d }, &mut grads);
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone(), &mut grads);
                    acc(*b, g, &mut grads);
                }
                Op::Sub(a, b) => {
                    let neg = Tensor { shape: g.shape, data: g.data.iter().map(|v| -v).collect() };
                    acc(*a, g, &mut grads);
                    acc(*b, neg, &mut grads);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let da = Tensor { shape: g.shape, data: g.data.iter().zip(&vb.data).map(|(x, y)| x * y).collect() };
                    let db = Tensor { shape: g.shape, data: g.data.iter().zip(&va.data).map(|(x, y)| x * y).collect() };
                    acc(*a, da, &mut grads);
                    acc(*b, db, &mut grads);
                }
                Op::LastRow(x) => {
                    let [bn, r, c] = self.value(*x).shape;
                    let mut d = Tensor::zeros([bn, r, c]);
                    for b in 0..bn {
                        let dst = (b * r + r - 1) * c;
                        d.data[dst..dst + c].copy_from_slice(&g.data[b * c..(b + 1) * c]);
                    }
                    acc(*x, d, &mut grads);
                }
                Op::Flatten(x) => {
                    let shape = self.value(*x).shape;
                    acc(*x, Tensor { shape, data: g.data }, &mut grads);
                }
                Op::Sum(x) => {
                    let shape = self.value(*x).shape;
                    acc(*x, Tensor { shape, data: vec![g.data[0]; shape.iter().product()] }, &mut grads);
                }
                Op::Mse { pred, target } => {
                    let p = self.value(*pred);
                    let k = 2.0 * g.data[0] / p.len().max(1) as f64;
                    let d = p.data.iter().zip(&target.data).map(|(a, b)| k * (a - b)).collect();
                    acc(*pred, Tensor { shape: p.shape, data: d }, &mut grads);
                }
            }
        }
        param_grads
    }
}

pub(crate) fn affine_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
    let [bn, r, n_in] = x.shape;
    let [_, w_in, n_out] = w.shape;
    assert_eq!(n_in, w_in, "affine input width mismatch");
    let rows = bn * r;
    let mut out = Tensor::zeros([bn, r, n_out]);
    for i in 0..rows {
        let y = &mut out.data[i * n_out..(i + 1) * n_out];
        y.copy_from_slice(&b.data);
        let xr = &x.data[i * n_in..(i + 1) * n_in];
        for (k, &a) in xr.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let wr = &w.data[k * n_out..(k + 1) * n_out];
            for (yo, wo) in y.iter_mut().zip(wr) {
                *yo += a * wo;
            }
        }
    }
    out
}

fn affine_backward(x: &Tensor, w: &Tensor, g: &Tensor) -> (Tensor, Tensor, Tensor) {
    let [bn, r, n_in] = x.shape;
    let n_out = w.shape[2];
    let rows = bn * r;
    let mut dx = Tensor::zeros(x.shape);
    let mut dw = Tensor::zeros(w.shape);
    let mut db = Tensor::zeros([1, 1, n_out]);
    for i in 0..rows {
        let gr = &g.data[i * n_out..(i + 1) * n_out];
        for (d, gv) in db.data.iter_mut().zip(gr) {
            *d += gv;
        }
        let xr = &x.data[i * n_in..(i + 1) * n_in];
        let dxr = &mut dx.data[i * n_in..(i + 1) * n_in];
        for k in 0..n_in {
            let wr = &w.data[k * n_out..(k + 1) * n_out];
            dxr[k] = wr.iter().zip(gr).map(|(a, b)| a * b).sum();
            let a = xr[k];
            if a != 0.0 {
                let dwr = &mut dw.data[k * n_out..(k + 1) * n_out];
                for (d, gv) in dwr.iter_mut().zip(gr) {
                    *d += a * gv;
                }
            }
        }
    }
    (dx, dw, db)
}

/// `y[t] = b + Σ_j W[j]ᵀ x[t − (k−1−j)·dilation]`, rows before 0 read as zero.
pub(crate) fn conv_forward(x: &Tensor, w: &Tensor, b: &Tensor, dilation: usize) -> Tensor {
    let [bn, len, c_in] = x.shape;
    let [k, w_in, c_out] = w.shape;
    assert_eq!(c_in, w_in, "conv channel mismatch");
    let mut out = Tensor::zeros([bn, len, c_out]);
    for s in 0..bn {
        for t in 0..len {
            let y = &mut out.data[(s * len + t) * c_out..(s * len + t + 1) * c_out];
            y.copy_from_slice(&b.data);
            for j in 0..k {
                let lag = (k - 1 - j) * dilation;
                if lag > t {
                    continue;
                }
                let xr = &x.data[(s * len + t - lag) * c_in..(s * len + t - lag + 1) * c_in];
                let wj = &w.data[j * c_in * c_out..(j + 1) * c_in * c_out];
                for (i, &a) in xr.iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    for (yo, wo) in y.iter_mut().zip(&wj[i * c_out..(i + 1) * c_out]) {
                        *yo += a * wo;
                    }
                }
            }
        }
    }
    out
}

fn conv_backward(x: &Tensor, w: &Tensor, g: &Tensor, dilation: usize) -> (Tensor, Tensor, Tensor) {
    let [bn, len, c_in] = x.shape;
    let [k, _, c_out] = w.shape;
    let mut dx = Tensor::zeros(x.shape);
    let mut dw = Tensor::zeros(w.shape);
    let mut db = Tensor::zeros([1, 1, c_out]);
    for s in 0..bn {
        for t in 0..len {
            let gr = &g.data[(s * len + t) * c_out..(s * len + t + 1) * c_out];
            for (d, gv) in db.data.iter_mut().zip(gr) {
                *d += gv;
            }
            for j in 0..k {
                let lag = (k - 1 - j) * dilation;
                if lag > t {
                    continue;
                }
                let row = s * len + t - lag;
                for i in 0..c_in {
                    let widx = (j * c_in + i) * c_out;
                    let wr = &w.data[widx..widx + c_out];
                    dx.data[row * c_in + i] += wr.iter().zip(gr).map(|(a, b)| a * b).sum::<f64>();
                    let a = x.data[row * c_in + i];
                    if a != 0.0 {
                        for (d, gv) in dw.data[widx..widx + c_out].iter_mut().zip(gr) {
                            *d += a * gv;
                        }
                    }
                }
            }
        }
    }
    (dx, dw, db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: [usize; 3], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    /// Compares tape gradients with central differences for every parameter
    /// entry; returns the norm-wise relative error.
    fn check<F>(params: &mut [Tensor], f: F) -> f64
    where
        F: Fn(&mut Tape<'_>) -> Var,
    {
        let grads = {
            let mut tape = Tape::new(params);
            let loss = f(&mut tape);
            tape.backward(loss)
        };
        let eval = |params: &[Tensor]| {
            let mut tape = Tape::new(params);
            let loss = f(&mut tape);
            tape.value(loss).data[0]
        };
        let h = 1e-6;
        let (mut num, mut den) = (0.0, 0.0);
        for p in 0..params.len() {
            for i in 0..params[p].len() {
                let orig = params[p].data[i];
                params[p].data[i] = orig + h;
                let fp = eval(params);
                params[p].data[i] = orig - h;
                let fm = eval(params);
                params[p].data[i] = orig;
                let fd = (fp - fm) / (2.0 * h);
                num += (fd - grads[p].data[i]).powi(2);
                den += fd.powi(2) + grads[p].data[i].powi(2);
            }
        }
        num.sqrt() / den.sqrt().max(1e-300)
    }

    #[test]
    fn square_at_three_has_gradient_six() {
        let params = [Tensor::scalar(3.0)];
        let mut tape = Tape::new(&params);
        let w = tape.param(0);
        let sq = tape.mul(w, w);
        let loss = tape.sum(sq);
        assert_eq!(tape.value(loss).data[0], 9.0);
        assert_eq!(tape.backward(loss)[0].data[0], 6.0);
    }

    #[test]
    fn relu_at_zero_has_zero_subgradient() {
        let params = [Tensor::from_vec([1, 1, 3], vec![0.0, 1.0, -1.0])];
        let mut tape = Tape::new(&params);
        let w = tape.param(0);
        let r = tape.relu(w);
        let loss = tape.sum(r);
        assert_eq!(tape.backward(loss)[0].data, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn primitive_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random([2, 6, 3], &mut rng);
        let target = random([2, 1, 4], &mut rng);
        let target_seq = random([2, 6, 3], &mut rng);
        for _ in 0..10 {
            let mut params = vec![
                random([1, 3, 4], &mut rng),
                random([1, 1, 4], &mut rng),
                random([3, 3, 3], &mut rng),
                random([1, 1, 3], &mut rng),
                random([2, 6, 3], &mut rng),
            ];
            // affine → sigmoid → last row → mse
            let e = check(&mut params, |t| {
                let xi = t.input(x.clone());
                let (w, b) = (t.param(0), t.param(1));
                let a = t.affine(xi, w, b);
                let s = t.sigmoid(a);
                let l = t.last_row(s);
                t.mse(l, target.clone())
            });
            assert!(e < 1e-6, "affine chain {e}");
            // dilated conv → tanh → residual add → mul → sub → mse
            let e = check(&mut params, |t| {
                let xi = t.input(x.clone());
                let (w, b, p) = (t.param(2), t.param(3), t.param(4));
                let c = t.conv1d(xi, w, b, 2);
                let th = t.tanh(c);
                let r = t.add(th, xi);
                let m = t.mul(r, p);
                let s = t.sub(m, xi);
                t.mse(s, target_seq.clone())
            });
            assert!(e < 1e-6, "conv chain {e}");
            // conv on a parameter input so dx is exercised too, then flatten
            let e = check(&mut params, |t| {
                let (w, b, p) = (t.param(2), t.param(3), t.param(4));
                let c = t.conv1d(p, w, b, 1);
                let r = t.relu(c);
                let f = t.flatten(r);
                let s = t.mul(f, f);
                t.sum(s)
            });
            assert!(e < 1e-5, "conv dx {e}");
        }
    }

    #[test]
    fn conv_is_causal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = random([3, 2, 2], &mut rng);
        let b = random([1, 1, 2], &mut rng);
        let x = random([1, 10, 2], &mut rng);
        let y = conv_forward(&x, &w, &b, 2);
        let mut x2 = x.clone();
        x2.data[7 * 2] += 1.0;
        let y2 = conv_forward(&x2, &w, &b, 2);
        for t in 0..7 {
            assert_eq!(y.data[t * 2..t * 2 + 2], y2.data[t * 2..t * 2 + 2]);
        }
        assert_ne!(y.data[14..16], y2.data[14..16]);
    }
}
