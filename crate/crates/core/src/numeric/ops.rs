//! Forward and backward kernels for every primitive.
//!
//! The slice kernels are shared by the tape and by the standalone
//! tensor-level functions at the bottom of this file.

use crate::error::{Error, Result};
use crate::numeric::{Real, Tensor};

const LANES: usize = 8;

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ra.iter().zip(rb) {
        tail = tail + *x * *y;
    }
    let s0 = (acc[0] + acc[4]) + (acc[2] + acc[6]);
    let s1 = (acc[1] + acc[5]) + (acc[3] + acc[7]);
    s0 + s1 + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * *xi;
    }
}

#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// `out = W x` for a row-major `rows x cols` matrix.
pub fn matvec_into<T: Real>(w: &[T], cols: usize, x: &[T], out: &mut [T]) {
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o = dot(row, x);
    }
}

/// `gx += W^T gy`
pub fn matvec_t_acc<T: Real>(w: &[T], cols: usize, gy: &[T], gx: &mut [T]) {
    for (g, row) in gy.iter().zip(w.chunks_exact(cols)) {
        if *g != T::zero() {
            axpy(*g, row, gx);
        }
    }
}

/// `gw += gy x^T`
pub fn outer_acc<T: Real>(gw: &mut [T], cols: usize, gy: &[T], x: &[T]) {
    for (g, row) in gy.iter().zip(gw.chunks_exact_mut(cols)) {
        if *g != T::zero() {
            axpy(*g, x, row);
        }
    }
}

/// `c = a b` with `a: m x k`, `b: k x n`.
pub fn matmul_into<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize, c: &mut [T]) {
    for v in c.iter_mut() {
        *v = T::zero();
    }
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av != T::zero() {
                axpy(av, &b[p * n..(p + 1) * n], crow);
            }
        }
    }
}

/// Accumulates `ga += gc b^T` and `gb += a^T gc`.
#[allow(clippy::too_many_arguments)]
pub fn matmul_backward<T: Real>(
    a: &[T],
    b: &[T],
    gc: &[T],
    m: usize,
    k: usize,
    n: usize,
    ga: Option<&mut [T]>,
    gb: Option<&mut [T]>,
) {
    if let Some(ga) = ga {
        for i in 0..m {
            let grow = &gc[i * n..(i + 1) * n];
            for p in 0..k {
                ga[i * k + p] = ga[i * k + p] + dot(grow, &b[p * n..(p + 1) * n]);
            }
        }
    }
    if let Some(gb) = gb {
        for i in 0..m {
            let grow = &gc[i * n..(i + 1) * n];
            for p in 0..k {
                let av = a[i * k + p];
                if av != T::zero() {
                    axpy(av, grow, &mut gb[p * n..(p + 1) * n]);
                }
            }
        }
    }
}

/// Max-shifted softmax.
pub fn softmax_into<T: Real>(x: &[T], out: &mut [T]) {
    let max = x.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let mut sum = T::zero();
    for (o, &v) in out.iter_mut().zip(x) {
        *o = (v - max).exp();
        sum = sum + *o;
    }
    for o in out.iter_mut() {
        *o = *o / sum;
    }
}

/// `gx += J_softmax^T gp` given the softmax output `p`.
pub fn softmax_backward<T: Real>(p: &[T], gp: &[T], gx: &mut [T]) {
    let inner = dot(p, gp);
    for ((g, &pi), &gpi) in gx.iter_mut().zip(p).zip(gp) {
        *g = *g + pi * (gpi - inner);
    }
}

/// One LSTM cell update with gate order input, forget, candidate, output.
///
/// `w` is `4d x (in + d)` acting on `[x; h]`. Writes `[h'; c']` to `out` and
/// the activated gates followed by `tanh(c')` (5d values) to `cache`.
#[allow(clippy::too_many_arguments)]
pub fn lstm_forward<T: Real>(
    x: &[T],
    h: &[T],
    c: &[T],
    w: &[T],
    b: &[T],
    out: &mut [T],
    cache: &mut [T],
) {
    let d = h.len();
    let nin = x.len();
    let cols = nin + d;
    for r in 0..4 * d {
        let row = &w[r * cols..(r + 1) * cols];
        cache[r] = b[r] + dot(&row[..nin], x) + dot(&row[nin..], h);
    }
    for k in 0..d {
        let i = sigmoid(cache[k]);
        let f = sigmoid(cache[d + k]);
        let g = cache[2 * d + k].tanh();
        let o = sigmoid(cache[3 * d + k]);
        let cn = f * c[k] + i * g;
        let tc = cn.tanh();
        cache[k] = i;
        cache[d + k] = f;
        cache[2 * d + k] = g;
        cache[3 * d + k] = o;
        cache[4 * d + k] = tc;
        out[k] = o * tc;
        out[d + k] = cn;
    }
}

/// Backward pass of [`lstm_forward`]; `gout` is the gradient of `[h'; c']`.
#[allow(clippy::too_many_arguments)]
pub fn lstm_backward<T: Real>(
    x: &[T],
    h: &[T],
    c: &[T],
    w: &[T],
    cache: &[T],
    gout: &[T],
    gx: Option<&mut [T]>,
    gh: Option<&mut [T]>,
    gc: Option<&mut [T]>,
    gw: Option<&mut [T]>,
    gb: Option<&mut [T]>,
) {
    let d = h.len();
    let nin = x.len();
    let cols = nin + d;
    let one = T::one();
    let mut dz = vec![T::zero(); 4 * d];
    let mut dc_prev = vec![T::zero(); d];
    for k in 0..d {
        let (i, f, g, o, tc) = (
            cache[k],
            cache[d + k],
            cache[2 * d + k],
            cache[3 * d + k],
            cache[4 * d + k],
        );
        let dh = gout[k];
        let dcn = gout[d + k] + dh * o * (one - tc * tc);
        let d_o = dh * tc;
        let d_i = dcn * g;
        let d_g = dcn * i;
        let d_f = dcn * c[k];
        dc_prev[k] = dcn * f;
        dz[k] = d_i * i * (one - i);
        dz[d + k] = d_f * f * (one - f);
        dz[2 * d + k] = d_g * (one - g * g);
        dz[3 * d + k] = d_o * o * (one - o);
    }
    if let Some(gc) = gc {
        axpy(one, &dc_prev, gc);
    }
    if let Some(gb) = gb {
        axpy(one, &dz, gb);
    }
    if let Some(gw) = gw {
        for (r, &g) in dz.iter().enumerate() {
            if g != T::zero() {
                let row = &mut gw[r * cols..(r + 1) * cols];
                axpy(g, x, &mut row[..nin]);
                axpy(g, h, &mut row[nin..]);
            }
        }
    }
    if gx.is_some() || gh.is_some() {
        let mut gin = vec![T::zero(); cols];
        matvec_t_acc(w, cols, &dz, &mut gin);
        if let Some(gx) = gx {
            axpy(one, &gin[..nin], gx);
        }
        if let Some(gh) = gh {
            axpy(one, &gin[nin..], gh);
        }
    }
}

/// Additive attention scores `s_j = v . tanh(K_j + q)`.
///
/// Writes the scores to `out` and `tanh(K_j + q)` for every row to `cache`.
pub fn additive_scores_forward<T: Real>(keys: &[T], q: &[T], v: &[T], out: &mut [T], cache: &mut [T]) {
    let a = q.len();
    for (j, (o, krow)) in out.iter_mut().zip(keys.chunks_exact(a)).enumerate() {
        let t = &mut cache[j * a..(j + 1) * a];
        for ((tk, &kk), &qk) in t.iter_mut().zip(krow).zip(q) {
            *tk = (kk + qk).tanh();
        }
        *o = dot(t, v);
    }
}

#[allow(clippy::too_many_arguments)]
pub fn additive_scores_backward<T: Real>(
    v: &[T],
    cache: &[T],
    gout: &[T],
    gkeys: Option<&mut [T]>,
    gq: Option<&mut [T]>,
    gv: Option<&mut [T]>,
) {
    let a = v.len();
    let rows = gout.len();
    let mut gpre = vec![T::zero(); rows * a];
    for j in 0..rows {
        let t = &cache[j * a..(j + 1) * a];
        let g = gout[j];
        for k in 0..a {
            gpre[j * a + k] = g * v[k] * (T::one() - t[k] * t[k]);
        }
    }
    if let Some(gv) = gv {
        for j in 0..rows {
            axpy(gout[j], &cache[j * a..(j + 1) * a], gv);
        }
    }
    if let Some(gq) = gq {
        for j in 0..rows {
            axpy(T::one(), &gpre[j * a..(j + 1) * a], gq);
        }
    }
    if let Some(gk) = gkeys {
        axpy(T::one(), &gpre, gk);
    }
}

/// `-ln(sum_{t in targets} p_t + eps)`
pub fn cross_entropy_value<T: Real>(p: &[T], targets: &[usize], eps: T) -> T {
    let mass = targets.iter().fold(T::zero(), |s, &t| s + p[t]);
    -(mass + eps).ln()
}

// Tensor-level API.

/// Weights of one LSTM cell: `w` is `4d x (in + d)`, `b` is `4d`.
#[derive(Clone, Debug)]
pub struct LstmWeights<T> {
    pub w: Tensor<T>,
    pub b: Tensor<T>,
}

impl<T: Real> LstmWeights<T> {
    pub fn hidden(&self) -> usize {
        self.b.len() / 4
    }

    pub fn input(&self) -> usize {
        self.w.dims2().1 - self.hidden()
    }
}

pub fn matmul<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape().len() != 2 || b.shape().len() != 2 || a.shape()[1] != b.shape()[0] {
        return Err(Error::Shape {
            op: "matmul",
            detail: format!("{:?} x {:?}", a.shape(), b.shape()),
        });
    }
    let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
    let mut out = vec![T::zero(); m * n];
    matmul_into(a.data(), b.data(), m, k, n, &mut out);
    Tensor::matrix(m, n, out)
}

pub fn softmax<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    if x.is_empty() {
        return Err(Error::Empty { op: "softmax" });
    }
    if !x.is_finite() {
        return Err(Error::NonFinite { op: "softmax".into() });
    }
    let mut out = vec![T::zero(); x.len()];
    softmax_into(x.data(), &mut out);
    Tensor::new(x.shape().to_vec(), out)
}

pub fn lstm_step<T: Real>(
    input: &Tensor<T>,
    h: &Tensor<T>,
    c: &Tensor<T>,
    weights: &LstmWeights<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let d = weights.hidden();
    if weights.b.len() != 4 * d
        || h.len() != d
        || c.len() != d
        || weights.w.dims2() != (4 * d, input.len() + d)
    {
        return Err(Error::Shape {
            op: "lstm_step",
            detail: format!(
                "input {:?}, h {:?}, c {:?}, w {:?}, b {:?}",
                input.shape(),
                h.shape(),
                c.shape(),
                weights.w.shape(),
                weights.b.shape()
            ),
        });
    }
    let mut out = vec![T::zero(); 2 * d];
    let mut cache = vec![T::zero(); 5 * d];
    lstm_forward(
        input.data(),
        h.data(),
        c.data(),
        weights.w.data(),
        weights.b.data(),
        &mut out,
        &mut cache,
    );
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { op: "lstm_step".into() });
    }
    let cn = out.split_off(d);
    Ok((Tensor::vector(out), Tensor::vector(cn)))
}

/// Cross-entropy epsilon added inside the logarithm.
pub const CE_EPS: f64 = 1e-12;

pub fn cross_entropy<T: Real>(probs: &Tensor<T>, target: usize) -> Result<T> {
    if target >= probs.len() {
        return Err(Error::IndexOutOfRange {
            op: "cross_entropy",
            index: target,
            len: probs.len(),
        });
    }
    Ok(cross_entropy_value(probs.data(), &[target], T::lit(CE_EPS)))
}
