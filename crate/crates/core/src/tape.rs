//! Minimal reverse-mode differentiation over dense `f64` vectors.
//!
//! Every node holds a flat vector. Parameters enter the tape as leaves bound
//! from a [`ParamSet`]; after [`Tape::backward`] their gradients can be read
//! back in the same layout. The op set is exactly what the adapter and the
//! toy flow-matching backbone need, with a hand-written adjoint per op.

use crate::params::ParamSet;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// `w (rows × cols) · x + b`
    Affine { w: Var, x: Var, b: Var, rows: usize, cols: usize },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    /// Broadcast a length-1 node over a vector.
    ScaleBy { s: Var, x: Var },
    ScaleConst(Var, f64),
    AddConst(Var),
    Tanh(Var),
    Sigmoid(Var),
    Gelu(Var),
    /// Affine-free layer normalization; `inv_std` is cached for the adjoint.
    Normalize { x: Var, inv_std: f64 },
    Concat(Vec<Var>),
    Slice { x: Var, start: usize },
    Sum(Vec<Var>),
    Reciprocal(Var),
    SumSquares(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Four partial sums so the loop vectorizes; still a fixed evaluation order.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Tanh approximation of GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Vec<f64>>,
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

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn dim(&self, v: Var) -> usize {
        self.nodes[v.0].value.len()
    }

    /// Constant or parameter leaf.
    pub fn leaf(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Binds every tensor of `params` as a leaf, returning handles indexed by
    /// parameter id.
    pub fn bind(&mut self, params: &ParamSet) -> Vec<Var> {
        params
            .tensors()
            .iter()
            .map(|t| self.leaf(t.data.clone()))
            .collect()
    }

    pub fn affine(&mut self, w: Var, x: Var, b: Var) -> Var {
        let cols = self.dim(x);
        let rows = self.dim(b);
        assert_eq!(self.dim(w), rows * cols, "affine: weight shape");
        let wv = self.value(w);
        let xv = self.value(x);
        let bv = self.value(b);
        let mut out = bv.to_vec();
        for (r, o) in out.iter_mut().enumerate() {
            *o += dot(&wv[r * cols..(r + 1) * cols], xv);
        }
        self.push(out, Op::Affine { w, x, b, rows, cols })
    }

    fn zip_with(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        assert_eq!(self.dim(a), self.dim(b), "elementwise shape mismatch");
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| f(*x, *y))
            .collect();
        self.push(out, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, |x, y| x / y, Op::Div(a, b))
    }

    pub fn scale_by(&mut self, s: Var, x: Var) -> Var {
        assert_eq!(self.dim(s), 1, "scale_by expects a scalar node");
        let k = self.value(s)[0];
        let out = self.value(x).iter().map(|v| k * v).collect();
        self.push(out, Op::ScaleBy { s, x })
    }

    pub fn scale_const(&mut self, x: Var, c: f64) -> Var {
        let out = self.value(x).iter().map(|v| c * v).collect();
        self.push(out, Op::ScaleConst(x, c))
    }

    pub fn add_const(&mut self, x: Var, c: f64) -> Var {
        let out = self.value(x).iter().map(|v| v + c).collect();
        self.push(out, Op::AddConst(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.value(x).iter().map(|v| v.tanh()).collect();
        self.push(out, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).iter().map(|v| sigmoid(*v)).collect();
        self.push(out, Op::Sigmoid(x))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let out = self.value(x).iter().map(|v| gelu(*v)).collect();
        self.push(out, Op::Gelu(x))
    }

    /// `(x - mean) / sqrt(var + eps)` without gain or bias.
    pub fn normalize(&mut self, x: Var) -> Var {
        let (out, inv_std) = normalize_values(self.value(x));
        self.push(out, Op::Normalize { x, inv_std })
    }

    /// LayerNorm with elementwise gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let n = self.normalize(x);
        let g = self.mul(n, gain);
        self.add(g, bias)
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut out = Vec::new();
        for p in parts {
            out.extend_from_slice(self.value(*p));
        }
        self.push(out, Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Var {
        let out = self.value(x)[start..start + len].to_vec();
        self.push(out, Op::Slice { x, start })
    }

    pub fn sum(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "sum of zero nodes");
        let mut out = self.value(parts[0]).to_vec();
        for p in &parts[1..] {
            assert_eq!(self.dim(*p), out.len(), "sum shape mismatch");
            for (o, v) in out.iter_mut().zip(self.value(*p)) {
                *o += v;
            }
        }
        self.push(out, Op::Sum(parts.to_vec()))
    }

    pub fn reciprocal(&mut self, x: Var) -> Var {
        let out = self.value(x).iter().map(|v| 1.0 / v).collect();
        self.push(out, Op::Reciprocal(x))
    }

    pub fn sum_squares(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().map(|v| v * v).sum();
        self.push(vec![s], Op::SumSquares(x))
    }

    pub fn grad(&self, v: Var) -> &[f64] {
        &self.grads[v.0]
    }

    /// Gradients for a set of bound parameter handles.
    pub fn param_grads(&self, vars: &[Var]) -> Vec<Vec<f64>> {
        vars.iter().map(|v| self.grad(*v).to_vec()).collect()
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&mut self, root: Var) {
        assert_eq!(self.dim(root), 1, "backward from non-scalar node");
        let mut grads: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .map(|n| vec![0.0; n.value.len()])
            .collect();
        grads[root.0][0] = 1.0;

        for i in (0..=root.0).rev() {
            let g = std::mem::take(&mut grads[i]);
            if g.iter().all(|v| *v == 0.0) {
                grads[i] = g;
                continue;
            }
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Affine { w, x, b, rows, cols } => {
                    let (rows, cols) = (*rows, *cols);
                    let wv = &self.nodes[w.0].value;
                    let xv = &self.nodes[x.0].value;
                    for (gb, gi) in grads[b.0].iter_mut().zip(&g) {
                        *gb += gi;
                    }
                    {
                        let gw = &mut grads[w.0];
                        for r in 0..rows {
                            let gr = g[r];
                            if gr == 0.0 {
                                continue;
                            }
                            let row = &mut gw[r * cols..(r + 1) * cols];
                            for (a, xc) in row.iter_mut().zip(xv) {
                                *a += gr * xc;
                            }
                        }
                    }
                    let gx = &mut grads[x.0];
                    for r in 0..rows {
                        let gr = g[r];
                        if gr == 0.0 {
                            continue;
                        }
                        let row = &wv[r * cols..(r + 1) * cols];
                        for (a, wc) in gx.iter_mut().zip(row) {
                            *a += gr * wc;
                        }
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], &g, |gi, _| gi);
                    accumulate(&mut grads[b.0], &g, |gi, _| gi);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads[a.0], &g, |gi, _| gi);
                    accumulate(&mut grads[b.0], &g, |gi, _| -gi);
                }
                Op::Mul(a, b) => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    accumulate(&mut grads[a.0], &g, |gi, k| gi * bv[k]);
                    accumulate(&mut grads[b.0], &g, |gi, k| gi * av[k]);
                }
                Op::Div(a, b) => {
                    let bv = &self.nodes[b.0].value;
                    let y = &node.value;
                    accumulate(&mut grads[a.0], &g, |gi, k| gi / bv[k]);
                    accumulate(&mut grads[b.0], &g, |gi, k| -gi * y[k] / bv[k]);
                }
                Op::ScaleBy { s, x } => {
                    let k = self.nodes[s.0].value[0];
                    let xv = &self.nodes[x.0].value;
                    let ds: f64 = g.iter().zip(xv).map(|(gi, xi)| gi * xi).sum();
                    grads[s.0][0] += ds;
                    accumulate(&mut grads[x.0], &g, |gi, _| gi * k);
                }
                Op::ScaleConst(x, c) => {
                    let c = *c;
                    accumulate(&mut grads[x.0], &g, |gi, _| gi * c);
                }
                Op::AddConst(x) => accumulate(&mut grads[x.0], &g, |gi, _| gi),
                Op::Tanh(x) => {
                    let y = &node.value;
                    accumulate(&mut grads[x.0], &g, |gi, k| gi * (1.0 - y[k] * y[k]));
                }
                Op::Sigmoid(x) => {
                    let y = &node.value;
                    accumulate(&mut grads[x.0], &g, |gi, k| gi * y[k] * (1.0 - y[k]));
                }
                Op::Gelu(x) => {
                    let xv = &self.nodes[x.0].value;
                    accumulate(&mut grads[x.0], &g, |gi, k| gi * gelu_grad(xv[k]));
                }
                Op::Normalize { x, inv_std } => {
                    let y = &node.value;
                    let n = y.len() as f64;
                    let sum_g: f64 = g.iter().sum();
                    let sum_gy: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                    let inv = *inv_std;
                    accumulate(&mut grads[x.0], &g, |gi, k| {
                        inv * (gi - sum_g / n - y[k] * sum_gy / n)
                    });
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let len = self.nodes[p.0].value.len();
                        let gp = &mut grads[p.0];
                        for (a, b) in gp.iter_mut().zip(&g[off..off + len]) {
                            *a += b;
                        }
                        off += len;
                    }
                }
                Op::Slice { x, start } => {
                    let gx = &mut grads[x.0][*start..*start + g.len()];
                    for (a, b) in gx.iter_mut().zip(&g) {
                        *a += b;
                    }
                }
                Op::Sum(parts) => {
                    for p in parts {
                        accumulate(&mut grads[p.0], &g, |gi, _| gi);
                    }
                }
                Op::Reciprocal(x) => {
                    let y = &node.value;
                    accumulate(&mut grads[x.0], &g, |gi, k| -gi * y[k] * y[k]);
                }
                Op::SumSquares(x) => {
                    let xv = &self.nodes[x.0].value;
                    let g0 = g[0];
                    let gx = &mut grads[x.0];
                    for (a, xi) in gx.iter_mut().zip(xv) {
                        *a += 2.0 * g0 * xi;
                    }
                }
            }
            grads[i] = g;
        }
        self.grads = grads;
    }
}

fn accumulate(target: &mut [f64], g: &[f64], f: impl Fn(f64, usize) -> f64) {
    for (k, (t, gi)) in target.iter_mut().zip(g).enumerate() {
        *t += f(*gi, k);
    }
}

/// Affine-free LayerNorm on a plain slice. Returns the normalized values and
/// `1/sqrt(var + eps)`.
pub fn normalize_values(x: &[f64]) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + LAYER_NORM_EPS).sqrt();
    (x.iter().map(|v| (v - mean) * inv_std).collect(), inv_std)
}
