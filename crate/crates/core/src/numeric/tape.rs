//! Gradient tape.
//!
//! Every primitive application appends one node. [`Tape::backward`] walks the
//! nodes once in reverse order and accumulates parameter gradients.

use crate::error::{Error, Result};
use crate::numeric::ops;
use crate::numeric::{Gradients, ParamId, ParamSet, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op<T> {
    Input,
    Param(ParamId),
    Row { table: ParamId, row: usize },
    MatMul(Var, Var),
    MatVec(Var, Var),
    VecMat(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var),
    Lstm { x: Var, h: Var, c: Var, w: Var, b: Var },
    AdditiveScores { keys: Var, query: Var, v: Var },
    CrossEntropy { probs: Var, targets: Vec<usize>, eps: T },
    Sum(Vec<Var>),
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param(_) => "param",
            Op::Row { .. } => "row",
            Op::MatMul(..) => "matmul",
            Op::MatVec(..) => "matvec",
            Op::VecMat(..) => "vecmat",
            Op::Add(..) => "add",
            Op::Mul(..) => "mul",
            Op::Concat(_) => "concat",
            Op::Slice(..) => "slice",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::Softmax(_) => "softmax",
            Op::Lstm { .. } => "lstm_step",
            Op::AdditiveScores { .. } => "additive_scores",
            Op::CrossEntropy { .. } => "cross_entropy",
            Op::Sum(_) => "sum",
        }
    }
}

#[derive(Clone, Debug)]
struct Node<T> {
    op: Op<T>,
    rows: usize,
    cols: usize,
    value: Vec<T>,
    cache: Vec<T>,
}

/// Record of primitive applications over a borrowed parameter set.
pub struct Tape<'p, T: Real> {
    params: &'p ParamSet<T>,
    nodes: Vec<Node<T>>,
    param_nodes: Vec<Option<Var>>,
    non_finite: Option<(usize, &'static str)>,
    check_finite: bool,
}

impl<'p, T: Real> Tape<'p, T> {
    pub fn new(params: &'p ParamSet<T>) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            param_nodes: vec![None; params.len()],
            non_finite: None,
            check_finite: true,
        }
    }

    pub fn params(&self) -> &'p ParamSet<T> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Names of the recorded primitives in recording order.
    pub fn op_names(&self) -> Vec<&'static str> {
        self.nodes.iter().map(|n| n.op.name()).collect()
    }

    pub fn value(&self, v: Var) -> &[T] {
        let node = &self.nodes[v.0];
        match node.op {
            Op::Param(id) => self.params.get(id).data(),
            _ => &node.value,
        }
    }

    pub fn dims(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn len_of(&self, v: Var) -> usize {
        let (r, c) = self.dims(v);
        r * c
    }

    pub fn scalar(&self, v: Var) -> T {
        self.value(v)[0]
    }

    /// First primitive that produced a non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.non_finite.map(|(_, name)| name)
    }

    fn push(&mut self, op: Op<T>, rows: usize, cols: usize, value: Vec<T>, cache: Vec<T>) -> Var {
        debug_assert!(matches!(op, Op::Param(_)) || value.len() == rows * cols);
        if self.check_finite && self.non_finite.is_none() && value.iter().any(|x| !x.is_finite()) {
            self.non_finite = Some((self.nodes.len(), op.name()));
        }
        self.nodes.push(Node {
            op,
            rows,
            cols,
            value,
            cache,
        });
        Var(self.nodes.len() - 1)
    }

    fn shape_err(&self, op: &'static str, a: Var, b: Var) -> Error {
        Error::Shape {
            op,
            detail: format!("{:?} vs {:?}", self.dims(a), self.dims(b)),
        }
    }

    pub fn input(&mut self, rows: usize, cols: usize, value: Vec<T>) -> Result<Var> {
        if value.len() != rows * cols {
            return Err(Error::Shape {
                op: "input",
                detail: format!("{rows}x{cols} vs {} values", value.len()),
            });
        }
        Ok(self.push(Op::Input, rows, cols, value, Vec::new()))
    }

    pub fn vector(&mut self, value: Vec<T>) -> Var {
        let n = value.len();
        self.push(Op::Input, n, 1, value, Vec::new())
    }

    /// Node for a whole parameter tensor; repeated calls share one node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.0] {
            return v;
        }
        let (rows, cols) = self.params.get(id).dims2();
        let v = self.push(Op::Param(id), rows, cols, Vec::new(), Vec::new());
        self.param_nodes[id.0] = Some(v);
        v
    }

    /// One row of an embedding table as a column vector.
    pub fn row(&mut self, table: ParamId, row: usize) -> Result<Var> {
        let t = self.params.get(table);
        let (rows, cols) = t.dims2();
        if row >= rows {
            return Err(Error::IndexOutOfRange {
                op: "row",
                index: row,
                len: rows,
            });
        }
        let value = t.row(row).to_vec();
        Ok(self.push(Op::Row { table, row }, cols, 1, value, Vec::new()))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let ((m, k), (k2, n)) = (self.dims(a), self.dims(b));
        if k != k2 {
            return Err(self.shape_err("matmul", a, b));
        }
        let mut out = vec![T::zero(); m * n];
        ops::matmul_into(self.value(a), self.value(b), m, k, n, &mut out);
        Ok(self.push(Op::MatMul(a, b), m, n, out, Vec::new()))
    }

    /// `W x` for a matrix `W` and a vector `x`.
    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let (m, k) = self.dims(w);
        if self.len_of(x) != k {
            return Err(self.shape_err("matvec", w, x));
        }
        let mut out = vec![T::zero(); m];
        ops::matvec_into(self.value(w), k, self.value(x), &mut out);
        Ok(self.push(Op::MatVec(w, x), m, 1, out, Vec::new()))
    }

    /// `a^T M` for a vector `a` of length `rows(M)`; yields a column vector.
    pub fn vecmat(&mut self, a: Var, m: Var) -> Result<Var> {
        let (r, c) = self.dims(m);
        if self.len_of(a) != r {
            return Err(self.shape_err("vecmat", a, m));
        }
        let mut out = vec![T::zero(); c];
        let mv = self.value(m);
        for (i, &ai) in self.value(a).iter().enumerate() {
            ops::axpy(ai, &mv[i * c..(i + 1) * c], &mut out);
        }
        Ok(self.push(Op::VecMat(a, m), c, 1, out, Vec::new()))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.len_of(a) != self.len_of(b) {
            return Err(self.shape_err("add", a, b));
        }
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| *x + *y).collect();
        let (r, c) = self.dims(a);
        Ok(self.push(Op::Add(a, b), r, c, out, Vec::new()))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.len_of(a) != self.len_of(b) {
            return Err(self.shape_err("mul", a, b));
        }
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| *x * *y).collect();
        let (r, c) = self.dims(a);
        Ok(self.push(Op::Mul(a, b), r, c, out, Vec::new()))
    }

    /// Concatenates flattened inputs into one column vector.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let n: usize = parts.iter().map(|&p| self.len_of(p)).sum();
        let mut out = Vec::with_capacity(n);
        for &p in parts {
            out.extend_from_slice(self.value(p));
        }
        self.push(Op::Concat(parts.to_vec()), n, 1, out, Vec::new())
    }

    /// Stacks equal-length vectors as the rows of a matrix.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var> {
        let Some(&first) = rows.first() else {
            return Err(Error::Empty { op: "stack_rows" });
        };
        let width = self.len_of(first);
        if let Some(&bad) = rows.iter().find(|&&r| self.len_of(r) != width) {
            return Err(self.shape_err("stack_rows", first, bad));
        }
        let v = self.concat(rows);
        let node = &mut self.nodes[v.0];
        node.rows = rows.len();
        node.cols = width;
        Ok(v)
    }

    /// Contiguous range `[start, start + len)` of a flattened value.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        if start + len > self.len_of(a) {
            return Err(Error::IndexOutOfRange {
                op: "slice",
                index: start + len,
                len: self.len_of(a),
            });
        }
        let out = self.value(a)[start..start + len].to_vec();
        Ok(self.push(Op::Slice(a, start), len, 1, out, Vec::new()))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|x| x.tanh()).collect();
        let (r, c) = self.dims(a);
        self.push(Op::Tanh(a), r, c, out, Vec::new())
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|&x| ops::sigmoid(x)).collect();
        let (r, c) = self.dims(a);
        self.push(Op::Sigmoid(a), r, c, out, Vec::new())
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let n = self.len_of(a);
        if n == 0 {
            return Err(Error::Empty { op: "softmax" });
        }
        let mut out = vec![T::zero(); n];
        ops::softmax_into(self.value(a), &mut out);
        Ok(self.push(Op::Softmax(a), n, 1, out, Vec::new()))
    }

    /// LSTM cell; returns `(h', c')`.
    pub fn lstm(&mut self, x: Var, h: Var, c: Var, w: Var, b: Var) -> Result<(Var, Var)> {
        let d = self.len_of(h);
        let nin = self.len_of(x);
        if self.len_of(c) != d || self.dims(w) != (4 * d, nin + d) || self.len_of(b) != 4 * d {
            return Err(Error::Shape {
                op: "lstm_step",
                detail: format!(
                    "x {:?}, h {:?}, c {:?}, w {:?}, b {:?}",
                    self.dims(x),
                    self.dims(h),
                    self.dims(c),
                    self.dims(w),
                    self.dims(b)
                ),
            });
        }
        let mut out = vec![T::zero(); 2 * d];
        let mut cache = vec![T::zero(); 5 * d];
        ops::lstm_forward(
            self.value(x),
            self.value(h),
            self.value(c),
            self.value(w),
            self.value(b),
            &mut out,
            &mut cache,
        );
        let both = self.push(Op::Lstm { x, h, c, w, b }, 2 * d, 1, out, cache);
        Ok((self.slice(both, 0, d)?, self.slice(both, d, d)?))
    }

    /// `s_j = v . tanh(K_j + q)` for every row `K_j` of `keys`.
    pub fn additive_scores(&mut self, keys: Var, query: Var, v: Var) -> Result<Var> {
        let (t, a) = self.dims(keys);
        if self.len_of(query) != a || self.len_of(v) != a {
            return Err(self.shape_err("additive_scores", keys, query));
        }
        let mut out = vec![T::zero(); t];
        let mut cache = vec![T::zero(); t * a];
        ops::additive_scores_forward(self.value(keys), self.value(query), self.value(v), &mut out, &mut cache);
        Ok(self.push(Op::AdditiveScores { keys, query, v }, t, 1, out, cache))
    }

    /// `-ln(sum of probs at targets + eps)`; a set of targets aggregates the
    /// mass of one symbol reachable through several output slots.
    pub fn cross_entropy(&mut self, probs: Var, targets: &[usize], eps: T) -> Result<Var> {
        let n = self.len_of(probs);
        if targets.is_empty() {
            return Err(Error::Empty { op: "cross_entropy" });
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= n) {
            return Err(Error::IndexOutOfRange {
                op: "cross_entropy",
                index: t,
                len: n,
            });
        }
        let value = ops::cross_entropy_value(self.value(probs), targets, eps);
        Ok(self.push(
            Op::CrossEntropy {
                probs,
                targets: targets.to_vec(),
                eps,
            },
            1,
            1,
            vec![value],
            Vec::new(),
        ))
    }

    /// Elementwise sum of equally sized values.
    pub fn sum(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::Empty { op: "sum" });
        };
        let n = self.len_of(first);
        let mut out = vec![T::zero(); n];
        for &p in parts {
            if self.len_of(p) != n {
                return Err(self.shape_err("sum", first, p));
            }
            ops::axpy(T::one(), self.value(p), &mut out);
        }
        let (r, c) = self.dims(first);
        Ok(self.push(Op::Sum(parts.to_vec()), r, c, out, Vec::new()))
    }

    /// Reverse pass from a scalar `loss`. Each node is visited exactly once.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let mut grads = Gradients::zeros_like(self.params);
        self.backward_into(loss, &mut grads)?;
        Ok(grads)
    }

    pub fn backward_into(&self, loss: Var, out: &mut Gradients<T>) -> Result<()> {
        if let Some((_, name)) = self.non_finite {
            return Err(Error::NonFinite { op: name.to_string() });
        }
        if self.len_of(loss) != 1 {
            return Err(Error::Shape {
                op: "backward",
                detail: format!("loss must be scalar, got {:?}", self.dims(loss)),
            });
        }
        let mut g: Vec<Vec<T>> = vec![Vec::new(); loss.0 + 1];
        g[loss.0] = vec![T::one()];

        for idx in (0..=loss.0).rev() {
            if g[idx].is_empty() {
                continue;
            }
            let gy = std::mem::take(&mut g[idx]);
            let node = &self.nodes[idx];
            if gy.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    op: format!("{} (backward)", node.op.name()),
                });
            }
            self.backprop_node(node, &gy, &mut g, out);
        }
        Ok(())
    }

    fn backprop_node(&self, node: &Node<T>, gy: &[T], g: &mut [Vec<T>], out: &mut Gradients<T>) {
        let one = T::one();
        match &node.op {
            Op::Input => {}
            Op::Param(id) => ops::axpy(one, gy, out.get_mut(*id).data_mut()),
            Op::Row { table, row } => ops::axpy(one, gy, out.get_mut(*table).row_mut(*row)),
            Op::MatMul(a, b) => {
                let ((m, k), (_, n)) = (self.dims(*a), self.dims(*b));
                let (av, bv) = (self.value(*a), self.value(*b));
                let mut ga = vec![T::zero(); m * k];
                let mut gb = vec![T::zero(); k * n];
                ops::matmul_backward(av, bv, gy, m, k, n, Some(&mut ga), Some(&mut gb));
                acc(g, *a, &ga);
                acc(g, *b, &gb);
            }
            Op::MatVec(w, x) => {
                let (_, k) = self.dims(*w);
                let gx = grad_mut(g, *x, k);
                ops::matvec_t_acc(self.value(*w), k, gy, gx);
                let gw = grad_mut(g, *w, self.len_of(*w));
                ops::outer_acc(gw, k, gy, self.value(*x));
            }
            Op::VecMat(a, m) => {
                let (r, c) = self.dims(*m);
                let mv = self.value(*m);
                let ga = grad_mut(g, *a, r);
                for i in 0..r {
                    ga[i] = ga[i] + ops::dot(&mv[i * c..(i + 1) * c], gy);
                }
                let av = self.value(*a);
                let gm = grad_mut(g, *m, r * c);
                ops::outer_acc(gm, c, av, gy);
            }
            Op::Add(a, b) => {
                acc(g, *a, gy);
                acc(g, *b, gy);
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let ga: Vec<T> = gy.iter().zip(bv).map(|(x, y)| *x * *y).collect();
                let gb: Vec<T> = gy.iter().zip(av).map(|(x, y)| *x * *y).collect();
                acc(g, *a, &ga);
                acc(g, *b, &gb);
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let n = self.len_of(p);
                    acc(g, p, &gy[off..off + n]);
                    off += n;
                }
            }
            Op::Slice(a, start) => {
                let n = self.len_of(*a);
                let ga = grad_mut(g, *a, n);
                ops::axpy(one, gy, &mut ga[*start..*start + gy.len()]);
            }
            Op::Tanh(a) => {
                let ga: Vec<T> = gy.iter().zip(&node.value).map(|(gv, y)| *gv * (one - *y * *y)).collect();
                acc(g, *a, &ga);
            }
            Op::Sigmoid(a) => {
                let ga: Vec<T> = gy.iter().zip(&node.value).map(|(gv, y)| *gv * *y * (one - *y)).collect();
                acc(g, *a, &ga);
            }
            Op::Softmax(a) => {
                let ga = grad_mut(g, *a, node.value.len());
                ops::softmax_backward(&node.value, gy, ga);
            }
            Op::Lstm { x, h, c, w, b } => {
                let (xv, hv, cv, wv) = (self.value(*x), self.value(*h), self.value(*c), self.value(*w));
                let mut gx = vec![T::zero(); xv.len()];
                let mut gh = vec![T::zero(); hv.len()];
                let mut gc = vec![T::zero(); cv.len()];
                let mut gb = vec![T::zero(); self.len_of(*b)];
                // weight gradient goes straight into the shared buffer
                let gw = grad_mut(g, *w, wv.len());
                ops::lstm_backward(
                    xv,
                    hv,
                    cv,
                    wv,
                    &node.cache,
                    gy,
                    Some(&mut gx),
                    Some(&mut gh),
                    Some(&mut gc),
                    Some(gw),
                    Some(&mut gb),
                );
                acc(g, *x, &gx);
                acc(g, *h, &gh);
                acc(g, *c, &gc);
                acc(g, *b, &gb);
            }
            Op::AdditiveScores { keys, query, v } => {
                let vv = self.value(*v);
                let mut gk = vec![T::zero(); self.len_of(*keys)];
                let mut gq = vec![T::zero(); vv.len()];
                let mut gvv = vec![T::zero(); vv.len()];
                ops::additive_scores_backward(vv, &node.cache, gy, Some(&mut gk), Some(&mut gq), Some(&mut gvv));
                acc(g, *keys, &gk);
                acc(g, *query, &gq);
                acc(g, *v, &gvv);
            }
            Op::CrossEntropy { probs, targets, eps } => {
                let pv = self.value(*probs);
                let mass = targets.iter().fold(T::zero(), |s, &t| s + pv[t]);
                let coeff = -gy[0] / (mass + *eps);
                let n = pv.len();
                let gp = grad_mut(g, *probs, n);
                for &t in targets {
                    gp[t] = gp[t] + coeff;
                }
            }
            Op::Sum(parts) => {
                for &p in parts {
                    acc(g, p, gy);
                }
            }
        }
    }
}

fn grad_mut<T: Real>(g: &mut [Vec<T>], v: Var, n: usize) -> &mut [T] {
    let slot = &mut g[v.0];
    if slot.is_empty() {
        *slot = vec![T::zero(); n];
    }
    slot
}

fn acc<T: Real>(g: &mut [Vec<T>], v: Var, gy: &[T]) {
    let slot = grad_mut(g, v, gy.len());
    ops::axpy(T::one(), gy, slot);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Tensor;

    #[test]
    fn square_gradient() {
        let mut p = ParamSet::<f64>::new();
        let x = p.add("x", Tensor::vector(vec![3.0]));
        let mut tape = Tape::new(&p);
        let xv = tape.param(x);
        let y = tape.mul(xv, xv).unwrap();
        assert_eq!(tape.scalar(y), 9.0);
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(x).data(), &[6.0]);
    }

    #[test]
    fn non_finite_names_primitive() {
        let mut p = ParamSet::<f64>::new();
        let x = p.add("x", Tensor::vector(vec![1.0]));
        let mut tape = Tape::new(&p);
        let xv = tape.param(x);
        let big = tape.vector(vec![f64::MAX]);
        let y = tape.mul(xv, big).unwrap();
        let z = tape.add(y, y).unwrap();
        assert_eq!(tape.first_non_finite(), Some("add"));
        match tape.backward(z) {
            Err(Error::NonFinite { op }) => assert_eq!(op, "add"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn replay_is_bit_identical() {
        let mut p = ParamSet::<f64>::new();
        let w = p.add("w", Tensor::matrix(2, 3, vec![0.1, -0.4, 0.3, 0.7, 0.2, -0.9]).unwrap());
        let mut tape = Tape::new(&p);
        let wv = tape.param(w);
        let x = tape.vector(vec![1.0, 2.0, -1.0]);
        let y = tape.matvec(wv, x).unwrap();
        let t = tape.tanh(y);
        let s = tape.softmax(t).unwrap();
        let l = tape.cross_entropy(s, &[1], 1e-12).unwrap();
        let a = tape.backward(l).unwrap();
        let b = tape.backward(l).unwrap();
        assert_eq!(a, b);
    }
}
